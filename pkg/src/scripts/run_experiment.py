#!/usr/bin/env python3
"""
Experiment execution script
"""

import sys
import argparse
import time
from pathlib import Path
from datetime import datetime

# Add the src directory to Python path
src_root = Path(__file__).parent.parent
sys.path.insert(0, str(src_root))

from dri_toolkit import COMMANDS, ExperimentRunner
from dri_toolkit.utils.config_loader import ConfigLoader, project_root
from dri_toolkit.utils.errors import DriToolkitError
from dri_toolkit.utils.logger import set_log_level, setup_logger

EXIT_ERROR = 1

EXIT_MESSAGES = {
    0: "✅ Verified",
    2: "⚠️  Inconclusive",
    3: "❌ Upper sum diverges",
}


def parse_overrides(pairs: list) -> dict:
    """Turn ``section.key=value`` pairs into a nested override dict"""
    overrides: dict = {}
    for pair in pairs or []:
        if '=' not in pair:
            raise DriToolkitError(f"Override must look like section.key=value, got {pair!r}")
        path, raw = pair.split('=', 1)
        node = overrides
        parts = path.split('.')
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = ConfigLoader._coerce(raw)
    return overrides


def run_experiment(command: str, config_path: str = None, defaults_path: str = None,
                   out_dir: str = None, seed: int = None, threads: int = None,
                   overrides: list = None) -> int:
    """Resolve configuration, run one command and return its exit code"""
    logger = setup_logger("run_experiment")
    defaults_path = defaults_path or str(project_root() / "config" / "experiment.yaml")

    try:
        config = ConfigLoader.resolve(defaults_path, config_path, parse_overrides(overrides))
        set_log_level(config.get('monitoring', {}).get('log_level', 'INFO'))
        if seed is not None:
            config['simulation']['seed'] = seed
        runner = ExperimentRunner(config, threads=threads, seed=seed)
        exit_code, _ = runner.run(command, out_dir)
        logger.info(f"{command} finished with exit code {exit_code}")
        return exit_code

    except (DriToolkitError, OSError, ValueError, ArithmeticError) as e:
        logger.error(f"Experiment failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main():
    """Main function for experiment execution"""
    parser = argparse.ArgumentParser(description="Direct Riemann integrability and renewal diagnostics")
    parser.add_argument(
        "command",
        choices=COMMANDS,
        help="Diagnostic to run"
    )
    parser.add_argument(
        "--config",
        help="Path to a JSON experiment file"
    )
    parser.add_argument(
        "--defaults",
        help="Path to the YAML defaults (config/experiment.yaml)"
    )
    parser.add_argument(
        "--out",
        help="Output directory for report.json, CSV tables and metadata.json"
    )
    parser.add_argument(
        "--seed",
        type=int,
        help="Seed for the renewal simulator"
    )
    parser.add_argument(
        "--threads",
        type=int,
        help="Worker threads for block sums, envelope steps and simulation"
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="Override one configuration value"
    )

    args = parser.parse_args()

    print("🚀 d.R.i. Renewal Toolkit - Execution")
    print("=" * 50)
    print(f"📅 Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"🧪 Command: {args.command}")
    print(f"📁 Config: {args.config if args.config else 'defaults only'}")
    print("-" * 50)

    start_time = time.time()
    exit_code = run_experiment(args.command, args.config, args.defaults, args.out,
                               args.seed, args.threads, args.overrides)
    execution_time = time.time() - start_time

    print(f"⏱️  Execution time: {execution_time:.2f} seconds")
    print(EXIT_MESSAGES.get(exit_code, "❌ Experiment execution failed!"))
    sys.exit(exit_code)


if __name__ == "__main__":
    main()
