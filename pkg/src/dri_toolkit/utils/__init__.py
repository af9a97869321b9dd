"""Shared utilities: logging, configuration, errors and small helpers."""
