"""Analytic paraproducts on truncated power series with rapidly decreasing radial weights."""

__version__ = "0.1.0"

from .series import TruncatedSeries, parse_series  # noqa: E402
from .weights import WeightSpec, parse_weight, self_check  # noqa: E402
from .words import Word, apply_word, canonical_decomposition_H0, full_decomposition  # noqa: E402
from .norms import QuadratureConfig, bergman_norm, bloch_seminorm  # noqa: E402

__all__ = [
    "__version__", "TruncatedSeries", "parse_series", "WeightSpec", "parse_weight", "self_check",
    "Word", "apply_word", "canonical_decomposition_H0", "full_decomposition", "QuadratureConfig",
    "bergman_norm", "bloch_seminorm",
]
