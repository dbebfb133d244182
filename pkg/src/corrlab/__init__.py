"""Classical correlations generated from noisy shared quantum states."""

from .corrmat import (
    Correlation,
    make_am,
    make_bm,
    make_edm,
    make_modified_edm,
    make_theorem1_family,
    marginals,
    normalize,
    product,
    q_of_k,
    validate,
)
from .errors import CorrlabError

__version__ = "0.1.0"

__all__ = [
    "Correlation", "CorrlabError", "make_am", "make_bm", "make_edm", "make_modified_edm",
    "make_theorem1_family", "marginals", "normalize", "product", "q_of_k", "validate",
]
