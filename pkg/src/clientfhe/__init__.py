"""Client-side CKKS toolkit: NTT-friendly modular arithmetic, merged-twiddle
negacyclic transforms, reduced-precision encoding, a multiplier-count design
explorer and a streaming accelerator simulator."""

__version__ = "0.1.0"

from .errors import ParameterError, ConsistencyError, ConfigError  # noqa: F401
