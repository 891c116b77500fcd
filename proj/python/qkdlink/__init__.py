"""Decoy-state BB84 link simulator: analytic and Monte Carlo rates, key-rate bounds."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
