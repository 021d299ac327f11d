"""egoadapter: vision-oracle file producer for the actinfer engine.

Turns videos (or deterministic stubs) into the likelihood and feature
CSV files the engine consumes.  The stub mode needs no models and is
fully reproducible from a seed.
"""

from .errors import AdapterError, DataError, ModelUnavailable, UsageError
from .roi import ROI_SIZE, GazeRecord, load_gaze, roi_crop
from .stubs import stub_feature, stub_probability

__version__ = "0.1.0"
