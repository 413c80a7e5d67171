"""Configuration, grid execution and the command-line interface."""

from .config import ExperimentConfig, load_config, parse_config
from .runner import run, reproduce_row, read_csv

__all__ = ["ExperimentConfig", "load_config", "parse_config", "run", "reproduce_row", "read_csv"]
