"""Kernelized-synergies grasping toolkit: python bindings for the C++ core."""

try:
    from ._ksyn import *  # noqa: F401,F403
    from ._ksyn import __version__  # noqa: F401
except ImportError:  # extension built out-of-package (plain CMake tree)
    from _ksyn import *  # noqa: F401,F403
    from _ksyn import __version__  # noqa: F401
