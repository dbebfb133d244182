"""Seed-size (cost) bounds under noise and the quantum advantage ratio.

An unreachable correlation has no finite cost. That case is the tagged
value :class:`Unreachable`, never an infinite float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corrmat import _check_mk, make_bm, marginals, q_of_k
from .errors import BadParameterError, CertificateInvalidError, InconsistentBoundsError
from .factorize import RankBounds, explicit_bm_factorization, verify_noisy_psd_factorization
from .reach import phat, threshold_upper_bound

CERT_TOL = 1e-10


@dataclass(frozen=True)
class Unreachable:
    """No protocol of any size produces the correlation at this noise level."""

    lam: float
    threshold: float
    reason: str = "noise exceeds the permutation bound"

    def to_dict(self) -> dict:
        return {"unreachable": True, "lambda": self.lam, "threshold": self.threshold, "reason": self.reason}


@dataclass(frozen=True)
class CostBounds:
    lower: float
    upper: int | None
    lam: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.upper is not None and self.lower > self.upper + 1e-12:
            raise InconsistentBoundsError(f"cost lower {self.lower} exceeds upper {self.upper}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "cost_lower": self.lower, "cost_upper": self.upper,
                "provenance": dict(self.provenance)}


@dataclass(frozen=True)
class PointLowerBound:
    """Cost lower-bound formula evaluated at one feasible point. Only the
    infimum over all feasible points is a proven bound, so a single
    evaluation is flagged heuristic."""

    value: float
    heuristic: bool = True


@dataclass(frozen=True)
class AdvantageEstimate:
    lam: float
    r_lower: int
    r_upper: int
    q_cost_lower: int | None
    q_cost_upper: int | None
    s_lower: float
    s_upper: float

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam, "r_lower": self.r_lower, "r_upper": self.r_upper,
            "q_cost_lower": self.q_cost_lower, "q_cost_upper": self.q_cost_upper,
            "advantage_lower": self.s_lower, "advantage_upper": self.s_upper,
        }


def _check_certificate(P, lam, s, t, tol=CERT_TOL) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0) or abs(s.sum() - 1) > 1e-9 or abs(t.sum() - 1) > 1e-9:
        raise CertificateInvalidError("s and t must be probability vectors")
    low = float(phat(P, lam, s, t).min())
    if low < -tol:
        raise CertificateInvalidError(f"P_hat has entry {low:.3g} < 0 at lam={lam}")
    return s, t


def _ceil(v: float) -> int:
    # 1 / (1/3) lands a hair above 3
    return math.ceil(v - 1e-9)


def cost_upper_bound(P, lam: float, s, t, psd_upper_of_phat: int) -> int:
    """psd_upper * ceil(1 / min(s, t)): the seed size of the enlarged protocol."""
    s, t = _check_certificate(P, lam, s, t)
    floor = min(s.min(), t.min())
    if floor <= 0:
        raise CertificateInvalidError("weights must be strictly positive for a finite bound")
    return int(psd_upper_of_phat) * _ceil(1.0 / floor)


def cost_lower_bound_at(P, lam: float, s, t) -> PointLowerBound:
    """(max over x, y of r_x / s_x and c_y / t_y, minus lam) / (1 - lam)."""
    s, t = _check_certificate(P, lam, s, t)
    r, c = marginals(P)
    with np.errstate(divide="ignore"):
        ratio = max(np.max(np.where(r > 0, r / s, 0.0)), np.max(np.where(c > 0, c / t, 0.0)))
    return PointLowerBound(float((ratio - lam) / (1 - lam)))


def am_certificate(m: int, k: float, epsilon: float):
    """Weights s = t = (eta, (1-eta)/m, ...) at lam = q - epsilon for A_m.

    Returns (lam, s, t, eta).
    """
    _check_mk(m, k)
    q = q_of_k(k)
    if not 0 < epsilon < q:
        raise BadParameterError(f"epsilon must lie in (0, q={q!r}), got {epsilon!r}")
    lam = q - epsilon
    eta = min((1 - q) / (2 * lam), epsilon * (1 + q) / (2 * q * lam))
    s = np.full(m + 1, (1 - eta) / m)
    s[0] = eta
    return lam, s, s.copy(), eta


def am_cost_bounds(m: int, k: float, epsilon: float) -> CostBounds:
    """Closed-form cost bounds for A_m at lam = q - epsilon."""
    _check_mk(m, k)
    q = q_of_k(k)
    if not 0 < epsilon < q:
        raise BadParameterError(f"epsilon must lie in (0, q={q!r}), got {epsilon!r}")
    upper = m * _ceil(2 * q * (q - epsilon) / (epsilon * (1 + q)))
    lower = ((1 - q) / 2 * math.sqrt(2 * q * q / (epsilon * (1 + q))) - q + epsilon) / (1 - q + epsilon)
    return CostBounds(lower, upper, q - epsilon, {"lower": "closed form", "upper": "closed form"})


def bm_cost(m: int, k: float, lam: float) -> int | Unreachable:
    """Exact noisy cost of B_m: 2 up to the threshold, unreachable above it."""
    _check_mk(m, k)
    if not 0 <= lam < 1:
        raise BadParameterError(f"lambda must lie in [0, 1), got {lam!r}")
    P = make_bm(m, k)
    bound = threshold_upper_bound(P)
    if lam > bound + 1e-12:
        return Unreachable(float(lam), bound)
    rep = verify_noisy_psd_factorization(P, explicit_bm_factorization(m, k), lam)
    if not rep.passed:
        raise CertificateInvalidError(f"two-dimensional factorization fails at lam={lam}")
    return 2


def _log2_ceil(v: float) -> int:
    return max(0, math.ceil(math.log2(v) - 1e-12))


def advantage_estimate(
    P, lam: float, rank_plus_bounds: RankBounds, cost_bounds: CostBounds | Unreachable | int
) -> AdvantageEstimate:
    """Bounds on classical bits over qubits of noisy seed.

    ``cost_bounds`` may also be an exact integer cost or :class:`Unreachable`
    (advantage 0).
    """
    rb = rank_plus_bounds
    if rb.lower > rb.upper:
        raise InconsistentBoundsError("rank lower bound exceeds upper bound")
    r_lo, r_hi = _log2_ceil(rb.lower), _log2_ceil(rb.upper)
    if isinstance(cost_bounds, Unreachable):
        return AdvantageEstimate(float(lam), r_lo, r_hi, None, None, 0.0, 0.0)
    if isinstance(cost_bounds, int):
        cost_bounds = CostBounds(cost_bounds, cost_bounds, lam, {"lower": "exact", "upper": "exact"})
    if r_hi == 0:
        # product correlation: both costs are zero bits, no advantage to speak of
        return AdvantageEstimate(float(lam), 0, 0, 0, 0, 0.0, 0.0)
    q_lo = _log2_ceil(_ceil(max(cost_bounds.lower, 1.0)))
    if rb.lower >= 2:
        q_lo = max(q_lo, 1)
    q_hi = None if cost_bounds.upper is None else _log2_ceil(cost_bounds.upper)
    if q_hi is not None and q_lo > q_hi:
        raise InconsistentBoundsError(f"qubit cost bounds out of order: {q_lo} > {q_hi}")
    s_lo = 0.0 if not q_hi else r_lo / q_hi
    s_hi = math.inf if q_lo == 0 else r_hi / q_lo
    return AdvantageEstimate(float(lam), r_lo, r_hi, q_lo, q_hi, s_lo, s_hi)
