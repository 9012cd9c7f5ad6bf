"""Variable-length coding over the binary symmetric channel with full feedback."""
from .channel import ChannelParams, derive_params

__all__ = ["ChannelParams", "derive_params"]
__version__ = "0.1.0"
