"""Multi-task anomaly detection for multi-channel driving telemetry."""

__version__ = "0.1.0"
