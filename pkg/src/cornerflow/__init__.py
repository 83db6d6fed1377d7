"""Stream-function solver and far-field diagnostics for planar subsonic
compressible (and incompressible) irrotational flow in infinite corner
domains, discretized on truncated log-polar strips."""

from cornerflow.gas import GasModel
from cornerflow.geometry import (
    ChannelDomain,
    CornerDomain,
    construct_domain,
    inverse_strip_map,
    quasiconformality_ratio,
    strip_map,
    verify_decay,
)

__version__ = "0.1.0"
