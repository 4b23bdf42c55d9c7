"""wattsplit: disaggregate household mains power into per-appliance consumption.

Two small neural models per appliance: a 1D-CNN that classifies the
operating state from a sliding mains window (midpoint prediction), and an
LSTM that retrieves the power value from the run length of consecutive
active minutes. Everything runs on 1-minute smart-meter data with plain
numpy; trained models serialize to a compact binary bundle.
"""

from wattsplit.errors import DataError, TrainingError
from wattsplit.ingest import PowerSeries
from wattsplit.models import ModelBundle
from wattsplit.pipeline import disaggregate, load_bundle, save_bundle

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "ModelBundle",
    "PowerSeries",
    "TrainingError",
    "disaggregate",
    "load_bundle",
    "save_bundle",
    "__version__",
]
