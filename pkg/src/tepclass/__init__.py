"""TMS-evoked EEG feature extraction and AD/HC classification pipeline."""

__version__ = "0.1.0"
