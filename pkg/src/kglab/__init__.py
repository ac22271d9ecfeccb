"""
Knowledge Gradient best-arm identification: the policy, its finite-time bounds
and a Monte Carlo harness to hold one against the other.
"""

from .bounds import *  # noqa
from .config import *  # noqa
from .figures import *  # noqa
from .instances import *  # noqa
from .montecarlo import *  # noqa
from .normal import *  # noqa
from .output import *  # noqa
from .policy import *  # noqa
from .rewards import *  # noqa
from .utils import *  # noqa
from .version import __version__  # noqa

# Only re-export each module's public names, not the modules themselves
__all__ = [
    *bounds.__all__,
    *config.__all__,
    *figures.__all__,
    *instances.__all__,
    *montecarlo.__all__,
    *normal.__all__,
    *output.__all__,
    *policy.__all__,
    *rewards.__all__,
    *utils.__all__,
]
