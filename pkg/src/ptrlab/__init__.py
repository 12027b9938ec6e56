"""Progressive trust-aware reasoning rewards for GRPO, with a prosody
annotation pipeline and a toy environment for checking the dynamics."""

from . import dsp, grpo, prosody, reward, toyenv

__version__ = "0.1.0"

__all__ = ["dsp", "grpo", "prosody", "reward", "toyenv"]
