"""Bridge pretrained models to the biasaudit NDJSON interchange format."""

__version__ = "0.1.0"

from .extract import ExportJob, run_job

__all__ = ["__version__", "ExportJob", "run_job"]
