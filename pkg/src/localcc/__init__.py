"""Local correlation clustering: pivot-based local clustering, a clusterability
tester, cut decompositions with an additive approximation scheme, and
streaming / distributed drivers, all over a probe-counting edge oracle."""

from .seeding import SeedContext, as_seed
from .graph import *  # noqa: F401,F403
from .clustering import *  # noqa: F401,F403
from .estimation import *  # noqa: F401,F403
from .pivot import *  # noqa: F401,F403
from .cutdecomp import *  # noqa: F401,F403
from .ptas import *  # noqa: F401,F403
from .streaming import *  # noqa: F401,F403

__version__ = "0.1.0"
