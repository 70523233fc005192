"""Exact-arithmetic experiments on fluctuation and monotonicity of ergodic averages."""

__version__ = "0.1.0"

from .errors import CapacityError, ConfigError, DomainError, ExhaustionError, FluctlabError  # noqa: E402
from .indexseq import IndexSequence  # noqa: E402
from .torus import Rotation, TorusPoint, quantize  # noqa: E402
from .observables import PiecewiseFn, circle_preset  # noqa: E402

__all__ = ["__version__", "CapacityError", "ConfigError", "DomainError", "ExhaustionError",
           "FluctlabError", "IndexSequence", "Rotation", "TorusPoint", "quantize",
           "PiecewiseFn", "circle_preset"]
