"""Two-ensemble dissipative entanglement model (C++ core)."""

from ._dissent import *  # noqa: F401,F403
from ._dissent import __version__  # noqa: F401
