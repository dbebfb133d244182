"""Dense states, POVMs, depolarizing noise and two-party protocol simulation.

Bipartite operators are d^2 x d^2 arrays with party A as the left Kronecker
factor. Pure bipartite states are kept as their d x d amplitude matrix
``psi[i, k] = <i k|psi>`` so large enlarged seeds stay cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .corrmat import Correlation, validate
from .errors import (
    BadLambdaError,
    DimensionMismatchError,
    IncompletePOVMError,
    NotBipartiteError,
    NotHermitianError,
    NotNormalizedError,
    NotPSDError,
)

HERM_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_TOL = 1e-9


def as_hermitian(A, tol: float = HERM_TOL) -> np.ndarray:
    arr = np.array(A, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"operator must be square, got shape {arr.shape}")
    if np.max(np.abs(arr - arr.conj().T), initial=0.0) > tol:
        raise NotHermitianError("operator is not Hermitian")
    return arr


def min_eig(A) -> float:
    A = np.asarray(A)
    return float(np.linalg.eigvalsh((A + A.conj().T) / 2)[0])


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise BadLambdaError(f"noise strength must lie in [0, 1], got {lam!r}")
    return lam


def _local_dim(total: int) -> int:
    d = math.isqrt(total)
    if d * d != total:
        raise NotBipartiteError(f"dimension {total} is not a square d*d")
    return d


# --- states and measurements -------------------------------------------------

@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state; ``dims`` is ``(d,)`` or ``(d, d)`` for a bipartite state."""

    matrix: np.ndarray = field(repr=False)
    dims: tuple

    def __post_init__(self):
        total = int(np.prod(self.dims))
        if self.matrix.shape != (total, total):
            raise DimensionMismatchError(f"matrix shape {self.matrix.shape} != dims {self.dims}")
        if min_eig(self.matrix) < -PSD_TOL:
            raise NotPSDError("density matrix has a negative eigenvalue")
        tr = np.trace(self.matrix).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise NotNormalizedError(f"density matrix has trace {tr!r}")
        self.matrix.setflags(write=False)

    @classmethod
    def bipartite(cls, matrix) -> "DensityMatrix":
        arr = as_hermitian(matrix)
        d = _local_dim(arr.shape[0])
        return cls(arr, (d, d))

    @classmethod
    def single(cls, matrix) -> "DensityMatrix":
        arr = as_hermitian(matrix)
        return cls(arr, (arr.shape[0],))

    @property
    def local_dim(self) -> int:
        return self.dims[0]

    def as_density(self) -> "DensityMatrix":
        return self

    def reduced_a(self) -> np.ndarray:
        return partial_trace(self.matrix, keep="A")

    def reduced_b(self) -> np.ndarray:
        return partial_trace(self.matrix, keep="B")

    def expect_product(self, effects_a, effects_b) -> np.ndarray:
        """T[x, y] = tr((E_x (x) F_y) rho)."""
        d = self.local_dim
        R = self.matrix.reshape(d, d, d, d)
        return np.einsum("xij,ykl,jlik->xy", effects_a, effects_b, R, optimize=True)


@dataclass(frozen=True)
class PureState:
    """Bipartite pure state sum_ik psi[i, k] |i>|k>."""

    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = self.amplitudes
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise NotBipartiteError("pure state amplitudes must be a square d x d array")
        norm = float(np.sum(np.abs(a) ** 2))
        if abs(norm - 1.0) > TRACE_TOL:
            raise NotNormalizedError(f"state has squared norm {norm!r}")
        a.setflags(write=False)

    @classmethod
    def from_vector(cls, psi, d: int | None = None) -> "PureState":
        v = np.asarray(psi, dtype=complex).ravel()
        d = d or _local_dim(v.size)
        return cls(v.reshape(d, d).copy())

    @property
    def dims(self) -> tuple:
        return (self.local_dim, self.local_dim)

    @property
    def local_dim(self) -> int:
        return self.amplitudes.shape[0]

    def vector(self) -> np.ndarray:
        return self.amplitudes.ravel()

    def as_density(self) -> DensityMatrix:
        v = self.vector()
        return DensityMatrix(np.outer(v, v.conj()), self.dims)

    def reduced_a(self) -> np.ndarray:
        a = self.amplitudes
        return a @ a.conj().T

    def reduced_b(self) -> np.ndarray:
        a = self.amplitudes
        return a.T @ a.conj()

    def expect_product(self, effects_a, effects_b) -> np.ndarray:
        # <psi|E (x) F|psi> = tr(psi^H E psi F^T)
        a = self.amplitudes
        G = np.einsum("ik,xij,jl->xkl", a.conj(), effects_a, a, optimize=True)
        return np.einsum("xkl,ykl->xy", G, effects_b, optimize=True)


Seed = Union[DensityMatrix, PureState]


@dataclass(frozen=True)
class POVM:
    effects: np.ndarray = field(repr=False)  # shape (n, d, d)

    def __post_init__(self):
        E = self.effects
        if E.ndim != 3 or E.shape[1] != E.shape[2] or E.shape[0] < 1:
            raise DimensionMismatchError(f"effects must have shape (n, d, d), got {E.shape}")
        for i, e in enumerate(E):
            if np.max(np.abs(e - e.conj().T)) > HERM_TOL:
                raise NotHermitianError(f"effect {i + 1} is not Hermitian")
            if min_eig(e) < -PSD_TOL:
                raise NotPSDError(f"effect {i + 1} has a negative eigenvalue")
        if np.max(np.abs(E.sum(axis=0) - np.eye(E.shape[1]))) > PSD_TOL:
            raise IncompletePOVMError("effects do not sum to the identity")
        E.setflags(write=False)

    @classmethod
    def from_effects(cls, effects: Sequence) -> "POVM":
        return cls(np.array([np.asarray(e, dtype=complex) for e in effects]))

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    @property
    def n(self) -> int:
        return self.effects.shape[0]

    def traces(self) -> np.ndarray:
        return np.einsum("xii->x", self.effects).real


def computational_povm(d: int) -> POVM:
    eff = np.zeros((d, d, d), dtype=complex)
    for i in range(d):
        eff[i, i, i] = 1.0
    return POVM(eff)


def max_entangled(d: int) -> PureState:
    return PureState(np.eye(d, dtype=complex) / math.sqrt(d))


@dataclass(frozen=True)
class NoisyProtocol:
    """Seed state on d (x) d, Alice's and Bob's POVMs, and the noise strength."""

    seed: Seed
    povm_a: POVM
    povm_b: POVM
    lam: float

    def __post_init__(self):
        _check_lambda(self.lam)
        d = self.seed.local_dim
        if self.povm_a.dim != d or self.povm_b.dim != d:
            raise DimensionMismatchError(
                f"POVM dimensions ({self.povm_a.dim}, {self.povm_b.dim}) != seed local dim {d}"
            )

    @property
    def d(self) -> int:
        return self.seed.local_dim

    @property
    def size_qubits(self) -> int:
        """Qubits per party, ceil(log2 d)."""
        return math.ceil(math.log2(self.d)) if self.d > 1 else 0

    def to_dict(self) -> dict:
        return protocol_to_dict(self)


# --- channels ----------------------------------------------------------------

def partial_trace(rho, keep: str) -> np.ndarray:
    rho = np.asarray(rho)
    d = _local_dim(rho.shape[0])
    R = rho.reshape(d, d, d, d)
    if keep == "A":
        return np.einsum("ikjk->ij", R)
    if keep == "B":
        return np.einsum("kikj->ij", R)
    raise ValueError("keep must be 'A' or 'B'")


def depolarize(rho, lam: float) -> np.ndarray:
    """(1 - lam) rho + lam tr(rho) I / d."""
    lam = _check_lambda(lam)
    rho = as_hermitian(rho)
    d = rho.shape[0]
    return (1 - lam) * rho + lam * np.trace(rho) * np.eye(d) / d


def depolarize_bipartite(sigma, lam: float):
    """Apply the depolarizing channel to both halves of a bipartite state."""
    lam = _check_lambda(lam)
    if isinstance(sigma, (DensityMatrix, PureState)):
        mat = sigma.as_density().matrix
    else:
        mat = as_hermitian(sigma)
    d = _local_dim(mat.shape[0])
    eye = np.eye(d)
    sa = partial_trace(mat, "A")
    sb = partial_trace(mat, "B")
    out = (
        (1 - lam) ** 2 * mat
        + lam * (1 - lam) * (np.kron(eye / d, sb) + np.kron(sa, eye / d))
        + lam**2 * np.trace(mat) * np.eye(d * d) / (d * d)
    )
    if isinstance(sigma, (DensityMatrix, PureState)):
        return DensityMatrix(out, (d, d))
    return out


def depolarize_party(sigma, lam: float, party: str) -> np.ndarray:
    """Depolarize only one subsystem: (E (x) id) or (id (x) E)."""
    lam = _check_lambda(lam)
    mat = np.asarray(sigma, dtype=complex)
    d = _local_dim(mat.shape[0])
    eye = np.eye(d)
    if party == "A":
        rest = np.kron(eye / d, partial_trace(mat, "B"))
    elif party == "B":
        rest = np.kron(partial_trace(mat, "A"), eye / d)
    else:
        raise ValueError("party must be 'A' or 'B'")
    return (1 - lam) * mat + lam * rest


# --- simulation --------------------------------------------------------------

def generated_correlation(p: NoisyProtocol) -> Correlation:
    """Exact outcome distribution tr((E_x (x) F_y) (E_lam (x) E_lam)(seed)).

    Expanded as (1-l)^2 T + l(1-l)[a_x eB_y + eA_x b_y] + l^2 eA_x eB_y with
    T = tr(E (x) F seed), a = tr(E seed_A), b = tr(F seed_B), eA = tr(E)/d.
    """
    E, F, lam, d = p.povm_a.effects, p.povm_b.effects, p.lam, p.d
    T = p.seed.expect_product(E, F).real
    a = np.einsum("xij,ji->x", E, p.seed.reduced_a()).real
    b = np.einsum("yij,ji->y", F, p.seed.reduced_b()).real
    ea = p.povm_a.traces() / d
    eb = p.povm_b.traces() / d
    P = (
        (1 - lam) ** 2 * T
        + lam * (1 - lam) * (np.outer(a, eb) + np.outer(ea, b))
        + lam**2 * np.outer(ea, eb)
    )
    if P.shape[0] != P.shape[1]:
        raise DimensionMismatchError(f"outcome counts differ: {P.shape}")
    return validate(P, entry_tol=1e-10)


def sample(p: NoisyProtocol, count: int, seed=None) -> np.ndarray:
    """Multinomial outcome counts, drawn by inverse CDF over the flattened
    n*n outcome vector with ``numpy.random.default_rng(seed)``."""
    probs = np.clip(generated_correlation(p).entries, 0.0, None)
    n = probs.shape[0]
    if count <= 0:
        return np.zeros((n, n), dtype=np.int64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdf = np.cumsum(probs.ravel())
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    idx = np.minimum(idx, n * n - 1)
    return np.bincount(idx, minlength=n * n).reshape(n, n)


def schmidt_decompose(psi, dA: int | None = None, dB: int | None = None, tol: float = 1e-12):
    """Return (weights, basis_a, basis_b) with psi = sum sqrt(w_i) |a_i>|b_i>.

    Weights are the squared Schmidt coefficients in descending order; the
    bases are returned as columns.
    """
    v = np.asarray(psi, dtype=complex).ravel()
    if abs(np.vdot(v, v).real - 1.0) > TRACE_TOL:
        raise NotNormalizedError("state vector is not normalized")
    if dA is None and dB is None:
        dA = dB = _local_dim(v.size)
    elif dA is None:
        dA = v.size // dB
    elif dB is None:
        dB = v.size // dA
    if dA * dB != v.size:
        raise DimensionMismatchError(f"{v.size} != {dA} * {dB}")
    U, s, Vh = np.linalg.svd(v.reshape(dA, dB))
    keep = s**2 > tol
    return s[keep] ** 2, U[:, keep], Vh[keep].T


# --- serialization -----------------------------------------------------------

def operator_to_dict(A) -> dict:
    A = np.asarray(A, dtype=complex)
    return {"dim": A.shape[0], "re": A.real.ravel().tolist(), "im": A.imag.ravel().tolist()}


def operator_from_dict(d: dict) -> np.ndarray:
    dim = int(d["dim"])
    re = np.asarray(d["re"], dtype=float)
    im = np.asarray(d.get("im", np.zeros_like(re)), dtype=float)
    return (re + 1j * im).reshape(dim, dim)


def protocol_to_dict(p: NoisyProtocol) -> dict:
    if isinstance(p.seed, PureState):
        seed = {"kind": "ket", "d": p.d, **operator_to_dict(p.seed.amplitudes)}
    else:
        seed = {"kind": "density", **operator_to_dict(p.seed.matrix)}
    return {
        "lambda": p.lam,
        "seed": seed,
        "povm_a": [operator_to_dict(e) for e in p.povm_a.effects],
        "povm_b": [operator_to_dict(e) for e in p.povm_b.effects],
    }


def protocol_from_dict(d: dict) -> NoisyProtocol:
    s = d["seed"]
    if s.get("kind") == "ket":
        seed = PureState(operator_from_dict(s))
    else:
        seed = DensityMatrix.bipartite(operator_from_dict(s))
    return NoisyProtocol(
        seed,
        POVM.from_effects([operator_from_dict(e) for e in d["povm_a"]]),
        POVM.from_effects([operator_from_dict(e) for e in d["povm_b"]]),
        float(d["lambda"]),
    )
