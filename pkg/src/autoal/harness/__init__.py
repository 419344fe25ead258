"""Experiment harness: configuration, runs, CSV output and figures."""
