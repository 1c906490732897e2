from .pipeline import (LabelStats, ScalerParams, Window, apply_scaler,
                       downsample, fit_scaler, scale_array, segment,
                       segment_count, speed_filter, split, split_sizes,
                       unscale_array, MPH_15_IN_MPS)
from .synth import (DEFAULT_DURATIONS, DEFAULT_MIX, GeneratorConfig,
                    maneuver_channels, synth_trace)
from .trace import CHANNEL_NAMES, NUM_CHANNELS, Trace, export_csv, ingest_csv

__all__ = [
    "LabelStats", "ScalerParams", "Window", "apply_scaler", "downsample",
    "fit_scaler", "scale_array", "segment", "segment_count", "speed_filter",
    "split", "split_sizes", "unscale_array", "MPH_15_IN_MPS",
    "DEFAULT_DURATIONS", "DEFAULT_MIX", "GeneratorConfig",
    "maneuver_channels", "synth_trace",
    "CHANNEL_NAMES", "NUM_CHANNELS", "Trace", "export_csv", "ingest_csv",
]
