"""Command line, experiment configuration, dataset construction and end-to-end experiments."""
from .config import ExperimentConfig, load_config, stage_seed
from .data import Dataset, Mixture, build_dataset, read_dataset, read_timit, write_dataset
from .experiments import partition_for, run_accuracy_experiment, run_se_experiment
from .main import main

__all__ = ["Dataset", "ExperimentConfig", "Mixture", "build_dataset", "load_config", "main", "partition_for",
           "read_dataset", "read_timit", "run_accuracy_experiment", "run_se_experiment", "stage_seed",
           "write_dataset"]
