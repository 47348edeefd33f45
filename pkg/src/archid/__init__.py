"""archid: CPU architecture and endianness identification for binaries.

Classifies arbitrary binary files and headerless code fragments into 23
architecture classes using 293 byte-statistics features: a 256-bin byte
frequency distribution plus 37 signature match densities.
"""

__version__ = "0.1.0"

from .binfmt import ARCHITECTURES, ARCH_NAMES, label_for
from .features import SCHEMA_VERSION, extract_features, get_schema

__all__ = [
    "ARCHITECTURES",
    "ARCH_NAMES",
    "label_for",
    "SCHEMA_VERSION",
    "extract_features",
    "get_schema",
    "__version__",
]
