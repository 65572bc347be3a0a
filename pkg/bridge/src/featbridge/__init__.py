"""featbridge: encode a speech corpus into decodewin feature tensors."""

from .backends import FAMILY_RATES, BACKENDS, ProjectionEncoder, load_backend
from .errors import BridgeError, CheckpointError, ManifestError, MediaError
from .extract import (
    BridgeConfig,
    ExtractReport,
    ManifestEntry,
    extract,
    read_corpus_manifest,
)
from .textgrid import phone_records_from_textgrid

__version__ = "0.1.0"

__all__ = [
    "BACKENDS",
    "BridgeConfig",
    "BridgeError",
    "CheckpointError",
    "ExtractReport",
    "FAMILY_RATES",
    "ManifestEntry",
    "ManifestError",
    "MediaError",
    "ProjectionEncoder",
    "__version__",
    "extract",
    "load_backend",
    "phone_records_from_textgrid",
    "read_corpus_manifest",
]
