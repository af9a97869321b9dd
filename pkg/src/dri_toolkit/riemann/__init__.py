from .riemann_sums import RiemannReport, Verdict, dri_verdict, lower_sum, upper_sum

__all__ = ["RiemannReport", "Verdict", "dri_verdict", "lower_sum", "upper_sum"]
