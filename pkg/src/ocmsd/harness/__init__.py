"""Sweeps, metrics, data ingestion, file formats, plots and the CLI."""
