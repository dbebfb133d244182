"""Classical correlations P(x, y) and the concrete families used throughout.

Indices are 0-based in code. Error messages and CSV output use 1-based
outcome labels.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    AlphaSumNonzeroError,
    BadParameterError,
    Condition3ViolatedError,
    DuplicateAlphaError,
    NegativeEntryError,
    NonpositiveScaleError,
    NotSquareError,
    SchmidtOrderError,
    SumNotOneError,
)

ENTRY_TOL = 1e-12
SUM_TOL = 1e-9


@dataclass(frozen=True)
class Correlation:
    """A validated square joint distribution over two parties' outcomes.

    Build one with :func:`validate` (or a family constructor); the entries
    array is made read-only.
    """

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __repr__(self):
        return f"Correlation(n={self.n})"

    def to_dict(self) -> dict:
        return {"n": self.n, "entries": self.entries.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        write_csv(self, buf)
        return buf.getvalue()


def validate(
    P, tol: float = SUM_TOL, entry_tol: float = ENTRY_TOL
) -> Correlation:
    """Check that ``P`` is a square probability matrix and wrap it.

    Nothing is renormalized; use :func:`normalize` first for raw data.
    """
    if isinstance(P, Correlation):
        return P
    arr = np.array(P, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise NotSquareError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise BadParameterError("correlation has non-finite entries")
    neg = np.argwhere(arr < -entry_tol)
    if len(neg):
        x, y = neg[0]
        raise NegativeEntryError(int(x) + 1, int(y) + 1, float(arr[x, y]))
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise SumNotOneError(total)
    return Correlation(arr)


def normalize(P) -> Correlation:
    """Explicitly rescale a nonnegative matrix so that it sums to one."""
    arr = np.array(P, dtype=float)
    total = arr.sum()
    if total <= 0:
        raise BadParameterError("cannot normalize a matrix with nonpositive total")
    return validate(arr / total)


def marginals(P) -> tuple[np.ndarray, np.ndarray]:
    """Return (row sums, column sums) of ``P``."""
    arr = np.asarray(P, dtype=float)
    return arr.sum(axis=1), arr.sum(axis=0)


def product(u: Sequence[float], v: Sequence[float]) -> Correlation:
    """The product distribution u(x) v(y)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return validate(np.outer(u / u.sum(), v / v.sum()))


def is_product(P, tol: float = 1e-12) -> bool:
    r, c = marginals(P)
    return bool(np.max(np.abs(np.asarray(P) - np.outer(r, c))) <= tol)


# --- Euclidean distance matrices -------------------------------------------

def _check_alphas(alphas) -> np.ndarray:
    a = np.asarray(alphas, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise BadParameterError("need at least two alphas")
    if len(np.unique(a)) != a.size:
        raise DuplicateAlphaError("alphas must be pairwise distinct")
    return a


def make_edm(alphas) -> Correlation:
    """EDM(x, y) = (a_x - a_y)^2 / sum_ij (a_i - a_j)^2."""
    a = _check_alphas(alphas)
    diff = (a[:, None] - a[None, :]) ** 2
    return validate(diff / diff.sum())


def make_modified_edm(alphas, L_diag, R_diag) -> np.ndarray:
    """diag(L) @ EDM @ diag(R); a nonnegative matrix, not necessarily normalized."""
    edm = make_edm(alphas).entries
    L = np.asarray(L_diag, dtype=float)
    R = np.asarray(R_diag, dtype=float)
    if L.shape != (edm.shape[0],) or R.shape != (edm.shape[0],):
        raise BadParameterError("scale vectors must match the number of alphas")
    if np.any(L <= 0) or np.any(R <= 0):
        raise NonpositiveScaleError("diagonal scales must be strictly positive")
    return L[:, None] * edm * R[None, :]


def alpha_sum_ok(alphas, tol: float = 1e-12) -> bool:
    a = np.asarray(alphas, dtype=float)
    return abs(a.sum()) <= tol * max(1.0, float(np.max(np.abs(a))))


def make_theorem1_family(schmidt_sq, alphas):
    """Correlation generated by a pure entangled state with squared Schmidt
    coefficients ``schmidt_sq`` (descending).

    Returns ``(P, L_diag, R_diag)`` where ``P`` is the (m+1)x(m+1) block
    matrix diag((l1+l2) * EDM', 1 - l1 - l2) and EDM' = L EDM R.
    """
    lam = np.asarray(schmidt_sq, dtype=float)
    if lam.ndim != 1 or lam.size < 2 or np.any(lam <= 0):
        raise SchmidtOrderError("need at least two positive Schmidt weights")
    if np.any(np.diff(lam) > 0):
        raise SchmidtOrderError("Schmidt weights must be sorted in descending order")
    if lam.sum() > 1 + SUM_TOL:
        raise SchmidtOrderError(f"Schmidt weights sum to {lam.sum()!r} > 1")
    a = _check_alphas(alphas)
    if not alpha_sum_ok(a):
        raise AlphaSumNonzeroError(f"alphas sum to {a.sum()!r}, expected 0")

    edm = make_edm(a).entries
    top = lam[0] + lam[1]
    mu1 = lam[0] / top
    row1 = edm[0].sum()
    if not row1 > mu1 - 0.5:
        raise Condition3ViolatedError(
            f"first EDM row sums to {row1!r}, must exceed mu1 - 1/2 = {mu1 - 0.5!r}"
        )
    r = (mu1 - 0.5) / row1
    m = a.size
    L = np.ones(m)
    R = np.ones(m)
    L[0] += r
    R[0] -= r
    P = np.zeros((m + 1, m + 1))
    P[:m, :m] = top * (L[:, None] * edm * R[None, :])
    # two Schmidt terms leave the corner at 1 - l1 - l2 = 0 up to rounding
    P[m, m] = max(0.0, 1.0 - top)
    return validate(P), L, R


# --- concentric polygons -------------------------------------------------

def _check_mk(m: int, k: float) -> None:
    if int(m) != m or m < 3:
        raise BadParameterError(f"m must be an integer >= 3, got {m!r}")
    if not 0 < k < 1:
        raise BadParameterError(f"k must lie in (0, 1), got {k!r}")


@dataclass(frozen=True)
class PolygonPair:
    """Outer regular m-gon with unit inradius and an inner one of circumradius k.

    ``outer_normals[x]`` is the midpoint of edge x of the outer polygon and
    ``inner_vertices[y]`` the y-th inner vertex (labelled clockwise).
    """

    m: int
    k: float
    outer_normals: np.ndarray = field(repr=False)
    inner_vertices: np.ndarray = field(repr=False)

    def slack(self) -> np.ndarray:
        return 1.0 - self.outer_normals @ self.inner_vertices.T


def polygon_pair(m: int, k: float) -> PolygonPair:
    _check_mk(m, k)
    ang = 2 * np.pi * np.arange(m) / m
    a = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    b = k * np.stack([np.cos(ang), -np.sin(ang)], axis=1)
    return PolygonPair(int(m), float(k), a, b)


def make_bm(m: int, k: float) -> Correlation:
    """B_m(x, y) = (1 - k cos(2 pi (x + y) / m)) / m^2 with 0-based x, y."""
    _check_mk(m, k)
    idx = np.arange(m)
    ang = 2 * np.pi * (idx[:, None] + idx[None, :]) / m
    return validate((1.0 - k * np.cos(ang)) / m**2)


def q_of_k(k: float) -> float:
    """q = 1/(1-k) - sqrt(1/(1-k)^2 - 1), the reachability edge of A_m."""
    if not 0 < k < 1:
        raise BadParameterError(f"k must lie in (0, 1), got {k!r}")
    u = 1.0 / (1.0 - k)
    return u - math.sqrt(u * u - 1.0)


def make_am(m: int, k: float) -> Correlation:
    """(m+1)x(m+1) correlation embedding ((1+q^2)/2) B_m below a corner block."""
    _check_mk(m, k)
    q = q_of_k(k)
    A = np.empty((m + 1, m + 1))
    A[0, 0] = (1 - q) ** 2 / 2
    A[0, 1:] = q * (1 - q) / (2 * m)
    A[1:, 0] = q * (1 - q) / (2 * m)
    A[1:, 1:] = (1 + q * q) / 2 * make_bm(m, k).entries
    return validate(A)


# --- serialization ---------------------------------------------------------

def from_dict(d: dict) -> Correlation:
    n = int(d["n"])
    arr = np.asarray(d["entries"], dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(n, n)
    if arr.shape != (n, n):
        raise NotSquareError(f"entries do not form a {n}x{n} matrix")
    return validate(arr)


def from_json(text: str) -> Correlation:
    return from_dict(json.loads(text))


def write_csv(P, fh, meta: dict | None = None) -> None:
    """Write ``x,y,p`` rows (1-based labels, 17 significant digits).

    ``meta`` entries are emitted as leading ``# key=value`` comment lines.
    """
    arr = np.asarray(P, dtype=float)
    for key, val in (meta or {}).items():
        fh.write(f"# {key}={_fmt(val) if isinstance(val, float) else val}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", "y", "p"])
    for x in range(arr.shape[0]):
        for y in range(arr.shape[1]):
            w.writerow([x + 1, y + 1, _fmt(arr[x, y])])


def read_csv(fh) -> Correlation:
    rows = [line for line in fh if line.strip() and not line.lstrip().startswith("#")]
    reader = csv.DictReader(rows)
    triples = [(int(r["x"]), int(r["y"]), float(r["p"])) for r in reader]
    if not triples:
        raise NotSquareError("empty correlation file")
    n = max(max(x, y) for x, y, _ in triples)
    arr = np.zeros((n, n))
    for x, y, p in triples:
        arr[x - 1, y - 1] = p
    return validate(arr)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")
