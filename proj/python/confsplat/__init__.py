"""Python bindings for confsplat."""

from ._confsplat import *  # noqa: F401,F403
from ._confsplat import __version__  # noqa: F401
