"""Isotropic transport and Brownian-motion diagnostics on piecewise-flat complexes."""
__version__ = "0.1.0"

from .complex_core import (  # noqa: E402
    Complex,
    ComplexError,
    DegenerateSimplexError,
    InconsistentLengthError,
    MetricSimplex,
    ParseError,
    Point,
    build_complex,
    check_admissible,
    check_boundaryless,
    check_cat0,
    dump_complex,
    link_at,
    load_complex,
)
from .generate import generate, home_point  # noqa: E402
from .stats import Estimate  # noqa: E402

__all__ = [
    "Complex",
    "ComplexError",
    "DegenerateSimplexError",
    "InconsistentLengthError",
    "MetricSimplex",
    "ParseError",
    "Point",
    "build_complex",
    "check_admissible",
    "check_boundaryless",
    "check_cat0",
    "dump_complex",
    "link_at",
    "load_complex",
    "generate",
    "home_point",
    "Estimate",
]
