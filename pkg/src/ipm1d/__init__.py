"""Self-similar blow-up profiles and weighted-space diagnostics for the
scale-invariant wedge reduction of the inviscid porous medium equation."""

__version__ = "0.1.0"

from .grid import AngularGrid, GridFunction, differentiate, integrate, taylor_jet
from .profile import ProfilePair, build_profile, continue_profile, local_profile
from .shooting import ShootingResult, root_angle, shoot
from .weighted import WeightParams, h4tilde_inner

__all__ = [
    "AngularGrid",
    "GridFunction",
    "ProfilePair",
    "ShootingResult",
    "WeightParams",
    "build_profile",
    "continue_profile",
    "differentiate",
    "h4tilde_inner",
    "integrate",
    "local_profile",
    "root_angle",
    "shoot",
    "taylor_jet",
    "__version__",
]
