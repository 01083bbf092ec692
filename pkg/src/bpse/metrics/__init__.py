"""Objective evaluation: STOI, SNR measurement and report aggregation."""
from .report import (EvalReport, ReportRow, Score, aggregate, measure_snr, read_scores_csv,
                     write_report, write_scores_csv)
from .stoi import STOI_CONFIG, StoiConfig, resample, stoi, third_octave_matrix

__all__ = ["EvalReport", "ReportRow", "STOI_CONFIG", "Score", "StoiConfig", "aggregate",
           "measure_snr", "read_scores_csv", "resample", "stoi", "third_octave_matrix",
           "write_report", "write_scores_csv"]
