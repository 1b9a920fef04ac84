"""Simulation harness: scenario configs, the runner, log audit, the CLI."""
