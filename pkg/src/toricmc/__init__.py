"""Monte Carlo laboratory for decohered Z_N toric codes.

Worm-algorithm sampling of Nishimori-line disordered clock models,
information diagnostics (coherent information, conditional mutual
information, Wilson and Renyi-1 correlators, winding stiffness) and a
minimum-cost-flow + worm decoder, with an experiment harness and CSV output.
"""

__version__ = "0.1.0"

from .lattice import TorusLattice, Region, build_lattice, annular_regions, GeometryError
from .channel import (
    ChannelParams,
    ChannelError,
    cosine_channel,
    custom_channel,
    shannon_entropy,
    selfdual_threshold,
)
from .flows import (
    FlowField,
    SyndromeConfig,
    IntFlow,
    IntegrityError,
    make_flow,
    divergence,
    winding,
    curl_from_spins,
    sample_reference_flow,
    symmetric_lift,
)

__all__ = [
    "TorusLattice",
    "Region",
    "build_lattice",
    "annular_regions",
    "GeometryError",
    "ChannelParams",
    "ChannelError",
    "cosine_channel",
    "custom_channel",
    "shannon_entropy",
    "selfdual_threshold",
    "FlowField",
    "SyndromeConfig",
    "IntFlow",
    "IntegrityError",
    "make_flow",
    "divergence",
    "winding",
    "curl_from_spins",
    "sample_reference_flow",
    "symmetric_lift",
    "__version__",
]
