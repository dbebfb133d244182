"""Noisy reachability: the shifted matrix P_hat, the search for marginal
weights (s, t) keeping it nonnegative, the permutation bound on the noise
threshold, and interval / sudden-death analysis built on top.

A positive answer from the search is a checkable certificate. A negative
answer is heuristic unless it comes from :func:`threshold_upper_bound`.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog, minimize

from .corrmat import marginals
from .errors import DimensionMismatchError, NotPositiveError

FEAS_TOL = 1e-12
ZERO_WEIGHT_TOL = 1e-7


@dataclass(frozen=True)
class SimplexVector:
    weights: np.ndarray

    def __post_init__(self):
        w = self.weights
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a nonnegative vector summing to 1")
        w.setflags(write=False)

    @classmethod
    def of(cls, w) -> "SimplexVector":
        return cls(np.array(w, dtype=float))

    @property
    def strict(self) -> bool:
        return bool(np.all(self.weights > 0))


def phat(P, lam: float, s, t) -> np.ndarray:
    """P(x,y) - lam s_x c_y - lam t_y r_x + lam^2 s_x t_y with row sums r and
    column sums c of P."""
    P = np.asarray(P, dtype=float)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if s.shape != (P.shape[0],) or t.shape != (P.shape[1],):
        raise DimensionMismatchError(f"weights {s.shape}, {t.shape} do not fit P {P.shape}")
    r, c = marginals(P)
    return P - lam * np.outer(s, c) - lam * np.outer(r, t) + lam**2 * np.outer(s, t)


def phat_derivative(P, lam: float, s, t) -> np.ndarray:
    """d P_hat / d lam = 2 lam s_x t_y - s_x c_y - t_y r_x."""
    P = np.asarray(P, dtype=float)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    r, c = marginals(P)
    return 2 * lam * np.outer(s, t) - np.outer(s, c) - np.outer(r, t)


def feasible_lambda_edge(P, s, t) -> float:
    """Largest lam in [0, 1] with P_hat(lam; s, t) >= 0 entrywise, solving
    each entry's quadratic for its first nonnegative crossing."""
    P = np.asarray(P, dtype=float)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    r, c = marginals(P)
    A = np.outer(s, t)
    B = -(np.outer(s, c) + np.outer(r, t))
    C = P
    edge = 1.0
    for a, b, cc in zip(A.ravel(), B.ravel(), C.ravel()):
        if cc < 0:
            return 0.0
        roots = np.roots([a, b, cc]) if a != 0 else ([-cc / b] if b != 0 else [])
        for z in roots:
            if abs(np.imag(z)) < 1e-14 and 0 <= np.real(z) < edge:
                edge = float(np.real(z))
    return edge


# --- feasibility search ----------------------------------------------------------

@dataclass
class FeasibilityResult:
    feasible: bool
    s: np.ndarray | None
    t: np.ndarray | None
    margin: float
    iterations: int
    lam: float
    strict_margin: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "feasible": self.feasible,
            "s": None if self.s is None else self.s.tolist(),
            "t": None if self.t is None else self.t.tolist(),
            "margin": self.margin,
            "iterations": self.iterations,
            "strict_margin": self.strict_margin,
        }


def _best_side(P, lam, fixed, other_marg, own_marg, delta, transpose):
    """Maximize min_{x,y} P_hat over one weight vector with the other fixed.

    With t fixed, P_hat(x, y) = a_xy - s_x b_y where
    a_xy = P(x,y) - lam t_y r_x and b_y = lam (c_y - lam t_y).
    """
    M = P.T if transpose else P
    n, m = M.shape
    a = M - lam * np.outer(own_marg, fixed)
    b = lam * (other_marg - lam * fixed)
    # variables: s_0..s_{n-1}, z ; minimize -z
    A_ub = np.zeros((n * m, n + 1))
    for x in range(n):
        A_ub[x * m:(x + 1) * m, x] = b
    A_ub[:, n] = 1.0
    b_ub = a.ravel()
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    bounds = [(delta, None)] * n + [(None, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        return None
    w = np.clip(res.x[:n], delta, None)
    return w / w.sum()


def _alternate(P, lam, s, t, delta, max_iters, target=None):
    r, c = marginals(P)
    margin = float(phat(P, lam, s, t).min())
    best = (s, t)
    it = 0
    for it in range(1, max_iters + 1):
        s_new = _best_side(P, lam, t, c, r, delta, transpose=False)
        if s_new is not None:
            s = s_new
        t_new = _best_side(P, lam, s, r, c, delta, transpose=True)
        if t_new is not None:
            t = t_new
        new = float(phat(P, lam, s, t).min())
        gain = new - margin
        if gain > 0:
            margin, best = new, (s, t)
        if gain < 1e-12:
            break
        if target is not None and margin >= target:
            break
    return best[0], best[1], margin, it


def _joint_slsqp(P, lam, s, t, delta, floor, max_iters=200, safety=0.0):
    """Joint SLSQP over (s, t, z).

    With ``floor=False`` maximize z <= min P_hat. Alternating steps can stall
    where neither vector alone improves the margin (symmetric families are
    the usual case); the joint problem sees directions they cannot.
    With ``floor=True`` maximize z <= every weight subject to P_hat >= safety.
    """
    n, m = P.shape
    r, c = marginals(P)
    xs, ys = np.divmod(np.arange(n * m), m)
    nv = n + m + 1

    def ph(v):
        return phat(P, lam, v[:n], v[n:n + m]).ravel()

    def ph_jac(v):
        sv, tv = v[:n], v[n:n + m]
        J = np.zeros((n * m, nv))
        J[xs * m + ys, xs] = -lam * c[ys] + lam**2 * tv[ys]
        J[xs * m + ys, n + ys] = -lam * r[xs] + lam**2 * sv[xs]
        return J

    if floor:
        W = np.hstack([np.eye(n + m), -np.ones((n + m, 1))])
        cons = [{"type": "ineq", "fun": lambda v: ph(v) - safety, "jac": ph_jac},
                {"type": "ineq", "fun": lambda v: W @ v, "jac": lambda v: W}]
        z0 = weight_floor(s, t)
    else:
        def jac(v):
            J = ph_jac(v)
            J[:, -1] = -1.0
            return J
        cons = [{"type": "ineq", "fun": lambda v: ph(v) - v[-1], "jac": jac}]
        z0 = phat(P, lam, s, t).min()
    eq = np.zeros((2, nv))
    eq[0, :n] = 1.0
    eq[1, n:n + m] = 1.0
    cons.append({"type": "eq", "fun": lambda v: eq @ v - 1.0, "jac": lambda v: eq})
    grad = -np.eye(nv)[-1]
    v0 = np.concatenate([s, t, [z0]])
    with warnings.catch_warnings():
        # SLSQP clips iterates back into the box and says so
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(lambda v: -v[-1], v0, jac=lambda v: grad, method="SLSQP",
                       bounds=[(delta, 1.0)] * (n + m) + [(None, None)], constraints=cons,
                       options={"maxiter": max_iters, "ftol": 1e-15})
    s1, t1 = _project(res.x[:n], delta), _project(res.x[n:n + m], delta)
    return s1, t1, float(phat(P, lam, s1, t1).min())


def _project(w, delta):
    w = np.maximum(np.asarray(w, dtype=float), delta)
    return w / w.sum()


def find_feasible_st(
    P, lam: float, strict_margin: float = 1e-9, max_iters: int = 200, restarts: int = 8,
    seed=0, init=None, feas_tol: float = FEAS_TOL, center: bool = False,
) -> FeasibilityResult:
    """Search for (s, t) on the ``strict_margin``-interior of the simplex with
    P_hat >= -feas_tol.

    Alternating linear programs maximize the smallest entry of P_hat, one
    weight vector at a time. Starts: ``init`` (if given), the marginals, the
    uniform point, then random Dirichlet points. Stops at the first start
    that reaches feasibility. With ``center=True`` a feasible answer is moved
    to keep its smallest weight as large as possible.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    r, c = marginals(P)
    rng = np.random.default_rng(seed)
    starts = []
    if init is not None:
        starts.append((np.asarray(init[0], float), np.asarray(init[1], float)))
    starts += [(r, c), (np.full(n, 1 / n), np.full(P.shape[1], 1 / P.shape[1]))]
    budget = max(restarts, 1) + (init is not None)
    while len(starts) < budget:
        starts.append((rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(P.shape[1]))))
    starts = starts[:budget]

    best = None
    total_iters = 0
    for s0, t0 in starts:
        s0, t0 = _project(s0, strict_margin), _project(t0, strict_margin)
        s, t, margin, its = _alternate(P, lam, s0, t0, strict_margin, max_iters)
        total_iters += its
        if margin < -feas_tol:
            s1, t1, m1 = _joint_slsqp(P, lam, s, t, strict_margin, floor=False)
            if m1 > margin:
                s, t, margin, its = _alternate(P, lam, s1, t1, strict_margin, max_iters)
                margin = max(margin, float(phat(P, lam, s, t).min()))
                total_iters += its
        if best is None or margin > best[2]:
            best = (s, t, margin)
        if margin >= -feas_tol:
            break
    s, t, margin = best
    feasible = margin >= -feas_tol
    if feasible and center:
        s, t = maximize_weight_floor(P, lam, s, t, feas_tol=feas_tol)
        margin = float(phat(P, lam, s, t).min())
    return FeasibilityResult(feasible, s, t, float(margin), total_iters, float(lam), strict_margin)


def weight_floor(s, t) -> float:
    return float(min(np.min(s), np.min(t)))


def maximize_weight_floor(P, lam, s, t, feas_tol: float = FEAS_TOL, rounds: int = 3):
    """From a feasible (s, t), look for a feasible pair whose smallest weight
    is as large as possible. The returned floor is never below the starting
    one and the pair stays feasible."""
    P = np.asarray(P, dtype=float)
    best = (np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    cur = weight_floor(*best)
    for _ in range(rounds):
        s1, t1, margin = _joint_slsqp(P, lam, best[0], best[1], 0.0, floor=True, safety=feas_tol)
        if margin >= -feas_tol and weight_floor(s1, t1) > cur * (1 + 1e-9):
            best, cur = (s1, t1), weight_floor(s1, t1)
        else:
            break
    return best


# --- threshold bound ----------------------------------------------------------

def _threshold_costs(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    r, c = marginals(P)
    return np.sqrt(np.maximum(0.0, np.outer(r, c) - P))


def threshold_upper_bound(P) -> float:
    """1 - max over permutations phi of sum_x sqrt(max(0, r_x c_phi(x) - P(x, phi(x)))).

    No noise strength above this value lets any protocol reproduce ``P``.
    """
    cost = _threshold_costs(P)
    rows, cols = linear_sum_assignment(cost, maximize=True)
    return float(1.0 - cost[rows, cols].sum())


def threshold_upper_bound_bruteforce(P) -> float:
    """Same bound by enumerating all n! permutations (small n only)."""
    cost = _threshold_costs(P)
    n = cost.shape[0]
    idx = np.arange(n)
    best = max(cost[idx, list(p)].sum() for p in itertools.permutations(range(n)))
    return float(1.0 - best)


# --- region and classification ---------------------------------------------

class BoundaryKind(str, enum.Enum):
    CLOSED_CERTIFIED = "ClosedCertified"
    OPEN_CERTIFIED = "OpenCertified"
    UNRESOLVED = "Unresolved"


@dataclass
class RegionEstimate:
    lambda_lo: float
    lambda_hi: float
    boundary_kind: BoundaryKind
    threshold_bound: float
    witness: FeasibilityResult | None = None
    tol_lambda: float = 1e-4
    probes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lambda_lo": self.lambda_lo,
            "lambda_hi": self.lambda_hi,
            "boundary_kind": self.boundary_kind.value,
            "threshold_bound": self.threshold_bound,
            "tol_lambda": self.tol_lambda,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "probes": [(lam, ok) for lam, ok in self.probes],
        }


def _require_positive(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0):
        raise NotPositiveError("noisy reachability for lam > 0 needs every entry of P positive")
    return P


def estimate_region(P, tol_lambda: float = 1e-4, **search) -> RegionEstimate:
    """Bracket sup of the reachable noise interval by bisection.

    ``lambda_lo`` is the largest noise level with a certificate; the upper
    end is either the permutation bound (certified) or the smallest level
    where the search failed (heuristic).
    """
    P = _require_positive(P)
    ub = threshold_upper_bound(P)
    probes = []

    def probe(lam, init):
        res = find_feasible_st(P, lam, init=init, **search)
        probes.append((float(lam), bool(res.feasible)))
        return res

    r, c = marginals(P)
    lo_res = FeasibilityResult(True, r, c, float(P.min()), 0, 0.0)
    if ub >= 1.0 - 1e-15:
        lam = 1.0 - tol_lambda / 2
        res = probe(lam, (r, c))
        if res.feasible:
            return RegionEstimate(lam, 1.0, BoundaryKind.OPEN_CERTIFIED, ub, res, tol_lambda, probes)
        hi = lam
    else:
        res = probe(ub, (r, c))
        if res.feasible:
            return RegionEstimate(ub, ub, BoundaryKind.CLOSED_CERTIFIED, ub, res, tol_lambda, probes)
        hi = ub
    lo = 0.0
    while hi - lo > tol_lambda:
        mid = (lo + hi) / 2
        res = probe(mid, (lo_res.s, lo_res.t))
        if res.feasible:
            lo, lo_res = mid, res
        else:
            hi = mid
    return RegionEstimate(lo, hi, BoundaryKind.UNRESOLVED, ub, lo_res, tol_lambda, probes)


class Verdict(str, enum.Enum):
    SUDDEN_DEATH = "SuddenDeath"
    GRADUAL_DECAY = "GradualDecay"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class Classification:
    verdict: Verdict
    boundary: float | None
    region: RegionEstimate | None
    evidence: dict

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "boundary": self.boundary,
            "region": None if self.region is None else self.region.to_dict(),
            "evidence": self.evidence,
        }


def classify_sudden_death(
    P, tol_lambda: float = 1e-6, n_probes: int = 5, zero_tol: float = ZERO_WEIGHT_TOL,
    flat_slope: float = 0.1, decay_slope: float = 0.25, fit_points: int = 3, **search,
) -> Classification:
    """Decide whether the reachable interval looks right-closed (advantage
    dies suddenly) or right-open (cost blows up, advantage decays).

    If a strictly positive certificate exists at the permutation bound the
    interval is certified closed. Otherwise the largest achievable smallest
    weight, v(lam) = max min(s, t) over feasible (s, t), is traced towards
    the edge: it stays bounded away from zero for a closed interval and
    vanishes for an open one, where 1/v drives the cost upper bound.
    """
    P = _require_positive(P)
    if np.linalg.matrix_rank(P, tol=1e-12) < 2:
        return Classification(Verdict.INCONCLUSIVE, None, None, {"reason": "product correlation"})
    region = estimate_region(P, tol_lambda, **search)
    edge = region.lambda_lo
    w = region.witness
    s, t = maximize_weight_floor(P, edge, w.s, w.t)
    floor_at_edge = weight_floor(s, t)
    evidence = {"edge": edge, "floor_at_edge": floor_at_edge,
                "boundary_kind": region.boundary_kind.value}

    if region.boundary_kind is BoundaryKind.CLOSED_CERTIFIED:
        evidence["closed_feasible"] = True
        evidence["strict_feasible"] = floor_at_edge > zero_tol
        verdict = Verdict.SUDDEN_DEATH if floor_at_edge > zero_tol else Verdict.GRADUAL_DECAY
        return Classification(verdict, edge, region, evidence)

    span = max(edge / 16, 64 * tol_lambda)
    dists, floors = [], []
    for j in range(n_probes):
        dist = span / 4**j
        lam = edge - dist
        if lam <= 0 or dist < tol_lambda:
            continue
        res = find_feasible_st(P, lam, init=(w.s, w.t), **search)
        if not res.feasible:
            continue
        fs, ft = maximize_weight_floor(P, lam, res.s, res.t)
        dists.append(region.lambda_hi - lam)
        floors.append(weight_floor(fs, ft))
    evidence.update(distances=dists, floors=floors)
    n = P.shape[0]
    evidence["cost_upper_proxy"] = [n * math.ceil(1 / v) if v > 0 else None for v in floors]
    if len(floors) < 2 or min(floors) <= 0:
        return Classification(Verdict.INCONCLUSIVE, edge, region, evidence)
    # only the probes closest to the edge see the limiting behaviour
    near = slice(-min(fit_points, len(floors)), None)
    slope = float(np.polyfit(np.log(dists[near]), np.log(floors[near]), 1)[0])
    evidence["floor_slope"] = slope
    if slope <= flat_slope and floor_at_edge > zero_tol:
        verdict = Verdict.SUDDEN_DEATH
    elif slope >= decay_slope:
        verdict = Verdict.GRADUAL_DECAY
    else:
        verdict = Verdict.INCONCLUSIVE
    return Classification(verdict, edge, region, evidence)
