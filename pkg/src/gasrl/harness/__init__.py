"""Experiment harness: configs, metrics, aggregation, plotting, run orchestration."""
