"""Set topology, Carleman-type staged approximation and non-critical entire functions in the plane."""

from .errors import NoncriticalError
from .planar_sets import Disc, Point, Polygon, Polyline, Rect, Region, dilate, distance, rasterize, sup_norm_diff
from .noncrit_core import NonCriticalEntire, build_noncritical, evaluate

__all__ = [
    "Disc", "Point", "Polygon", "Polyline", "Rect", "Region", "NoncriticalError",
    "NonCriticalEntire", "build_noncritical", "evaluate", "dilate", "distance", "rasterize",
    "sup_norm_diff",
]
__version__ = "0.1.0"
