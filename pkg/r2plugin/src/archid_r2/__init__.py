from .archmap import ARCH_TO_R2
from .core import PluginConfig, run_identification

__all__ = ["ARCH_TO_R2", "PluginConfig", "run_identification"]
