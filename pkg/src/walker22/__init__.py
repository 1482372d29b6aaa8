"""walker22: exact curvature, spectra and geodesic dynamics for
signature-(2,2) Walker metrics on R^4."""

from walker22.expression import Poly4, parse, render

__version__ = "0.1.0"

__all__ = ["Poly4", "parse", "render", "__version__"]
