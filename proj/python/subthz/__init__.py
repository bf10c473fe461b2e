"""Python bindings for the subthz link simulation core."""

from ._subthz import *  # noqa: F401,F403
from ._subthz import __version__  # noqa: F401
