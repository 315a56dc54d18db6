"""Depth-from-motion geometry toolkit.

Two-view closed-form depth, plane-sweep cost volumes over ego-motion,
monocular/stereo fusion, photometric pose estimation, frustum-to-voxel
resampling and depth-error metrics, backed by the C++ core.
"""

from dfm._core import *  # noqa: F401,F403
from dfm._core import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
