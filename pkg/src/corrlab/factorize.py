"""PSD and nonnegative factorizations, and noisy protocols built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import quantum
from .corrmat import _check_alphas, _check_mk, alpha_sum_ok, q_of_k
from .errors import (
    AlphaSumNonzeroError,
    DimensionMismatchError,
    FactorizationInvalidError,
    InfeasibleSTError,
    LambdaOneError,
    NotDiagonalizedError,
    SingularSumError,
)
from .quantum import POVM, DensityMatrix, NoisyProtocol, PureState, min_eig
from .reach import phat

SINGULAR_TOL = 1e-9


@dataclass(frozen=True)
class PsdFactorization:
    """P(x, y) = tr(C_x D_y) with r x r factors; PSD-ness is checked by the
    verifiers, not at construction."""

    cs: np.ndarray = field(repr=False)  # (n_a, r, r)
    ds: np.ndarray = field(repr=False)  # (n_b, r, r)

    def __post_init__(self):
        if self.cs.ndim != 3 or self.ds.ndim != 3 or self.cs.shape[1:] != self.ds.shape[1:]:
            raise DimensionMismatchError("factors must be stacks of equal-size square matrices")
        self.cs.setflags(write=False)
        self.ds.setflags(write=False)

    @classmethod
    def from_lists(cls, cs, ds) -> "PsdFactorization":
        return cls(
            np.array([np.asarray(c, dtype=complex) for c in cs]),
            np.array([np.asarray(d, dtype=complex) for d in ds]),
        )

    @property
    def r(self) -> int:
        return self.cs.shape[1]

    def gram(self) -> np.ndarray:
        """Matrix of pairwise traces tr(C_x D_y)."""
        return np.einsum("xij,yji->xy", self.cs, self.ds)

    def sums(self) -> tuple[np.ndarray, np.ndarray]:
        return self.cs.sum(axis=0), self.ds.sum(axis=0)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "cs": [quantum.operator_to_dict(c) for c in self.cs],
            "ds": [quantum.operator_to_dict(d) for d in self.ds],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PsdFactorization":
        f = cls.from_lists(
            [quantum.operator_from_dict(c) for c in d["cs"]],
            [quantum.operator_from_dict(x) for x in d["ds"]],
        )
        if "r" in d and int(d["r"]) != f.r:
            raise DimensionMismatchError(f"declared r={d['r']} but factors are {f.r}x{f.r}")
        return f


@dataclass(frozen=True)
class RankBounds:
    lower: int
    upper: int
    lower_method: str = ""
    upper_method: str = ""

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"rank bounds out of order: {self.lower} > {self.upper}")


@dataclass
class VerificationReport:
    passed: bool
    max_residual: float
    min_eig_c: float
    min_eig_d: float
    lam: float = 0.0
    noisy_min_eig_c: float | None = None
    noisy_min_eig_d: float | None = None
    cond_c: float | None = None
    cond_d: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_psd_factorization(P, f: PsdFactorization, tol: float = 1e-9) -> VerificationReport:
    P = np.asarray(P, dtype=float)
    if P.shape != (f.cs.shape[0], f.ds.shape[0]):
        raise DimensionMismatchError(
            f"correlation is {P.shape} but factorization has {len(f.cs)} x {len(f.ds)} factors"
        )
    resid = float(np.max(np.abs(f.gram() - P)))
    mc = min(min_eig(c) for c in f.cs)
    md = min(min_eig(d) for d in f.ds)
    ok = resid <= tol and mc >= -tol and md >= -tol
    return VerificationReport(ok, resid, mc, md)


def _noisy_residuals(stack: np.ndarray, lam: float):
    """C_x - (lam / r) tr(C_x S^-1) S for every factor, with S = sum_x C_x."""
    S = stack.sum(axis=0)
    r = S.shape[0]
    cond = float(np.linalg.cond(S))
    if not np.isfinite(cond) or cond > 1 / SINGULAR_TOL:
        raise SingularSumError(f"factor sum is singular (condition number {cond:.3g})")
    Sinv = np.linalg.inv(S)
    w = np.einsum("xij,ji->x", stack, Sinv).real
    return stack - (lam / r) * w[:, None, None] * S[None], w, S, cond


def verify_noisy_psd_factorization(
    P, f: PsdFactorization, lam: float, tol: float = 1e-9
) -> VerificationReport:
    """Check that ``f`` stays a PSD factorization after the depolarizing
    correction at strength ``lam``."""
    rep = verify_psd_factorization(P, f, tol)
    rc, _, _, cond_c = _noisy_residuals(f.cs, lam)
    rd, _, _, cond_d = _noisy_residuals(f.ds, lam)
    rep.lam = float(lam)
    rep.noisy_min_eig_c = min(min_eig(c) for c in rc)
    rep.noisy_min_eig_d = min(min_eig(d) for d in rd)
    rep.cond_c, rep.cond_d = cond_c, cond_d
    rep.passed = rep.passed and rep.noisy_min_eig_c >= -tol and rep.noisy_min_eig_d >= -tol
    return rep


def noisy_threshold(f: PsdFactorization) -> float:
    """Largest lam (capped at 1) for which ``f`` passes the noisy check.

    The correction is linear in lam, so per factor the edge is the smallest
    generalized eigenvalue of (C_x, tr(C_x S^-1) S / r).
    """
    best = 1.0
    for stack in (f.cs, f.ds):
        _, w, S, _ = _noisy_residuals(stack, 0.0)
        r = S.shape[0]
        for c, wx in zip(stack, w):
            if wx <= 0:
                continue
            G = (wx / r) * S
            ev = scipy.linalg.eigh((c + c.conj().T) / 2, (G + G.conj().T) / 2, eigvals_only=True)
            best = min(best, float(ev[0]))
    return max(best, 0.0)


def _psd_sqrt(A: np.ndarray, inverse: bool = False) -> np.ndarray:
    w, V = np.linalg.eigh((A + A.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    s = 1 / np.sqrt(w) if inverse else np.sqrt(w)
    return (V * s) @ V.conj().T


def diagonalize_factorization(f: PsdFactorization) -> PsdFactorization:
    """Equivalent factorization (H C H^+, H^-+ D H^-1) with both sums equal
    to one diagonal matrix Lambda (entries descending).

    H = Lambda^(1/2) U^+ S^(-1/2) where S^(1/2) T S^(1/2) = U Lambda^2 U^+.
    """
    S, T = f.sums()
    for name, M in (("sum of C", S), ("sum of D", T)):
        if min_eig(M) <= SINGULAR_TOL:
            raise SingularSumError(f"{name} is not positive definite")
    Sh = _psd_sqrt(S)
    Sih = _psd_sqrt(S, inverse=True)
    M = Sh @ T @ Sh
    w, U = np.linalg.eigh((M + M.conj().T) / 2)
    order = np.argsort(w)[::-1]
    w, U = w[order], U[:, order]
    if w[-1] <= SINGULAR_TOL**2:
        raise SingularSumError("diagonal form has a vanishing entry")
    beta = np.sqrt(w)
    H = (np.sqrt(beta)[:, None] * U.conj().T) @ Sih
    Hinv = Sh @ U / np.sqrt(beta)[None, :]
    cs = np.einsum("ij,xjk,lk->xil", H, f.cs, H.conj())
    ds = np.einsum("ji,xjk,kl->xil", Hinv.conj(), f.ds, Hinv)
    return PsdFactorization(cs, ds)


def diagonal_of_sums(f: PsdFactorization, tol: float = 1e-9) -> np.ndarray:
    """Return beta with sum C = sum D = diag(beta), or raise NotDiagonalizedError."""
    S, T = f.sums()
    beta = np.diag(S).real.copy()
    off = max(np.max(np.abs(S - np.diag(np.diag(S)))), np.max(np.abs(T - np.diag(np.diag(T)))))
    if off > tol or np.max(np.abs(np.diag(S) - np.diag(T))) > tol:
        raise NotDiagonalizedError("factor sums are not one common diagonal matrix")
    if np.any(beta <= SINGULAR_TOL):
        raise SingularSumError("diagonal of the factor sums is not invertible")
    return beta


# --- protocols from factorizations ------------------------------------------

def protocol_from_noisy_factorization(
    P, f: PsdFactorization, lam: float, tol: float = 1e-9
) -> NoisyProtocol:
    """Seed sum_k beta_k |kk> and POVMs that produce ``P`` under noise ``lam``.

    ``f`` must already be diagonal (see :func:`diagonalize_factorization`).
    """
    if lam >= 1:
        raise LambdaOneError("construction needs lam < 1")
    beta = diagonal_of_sums(f, tol)
    rep = verify_noisy_psd_factorization(P, f, lam, tol)
    if not rep.passed:
        raise FactorizationInvalidError(
            f"factorization fails the noisy check at lam={lam}: {rep.to_dict()}"
        )
    tr_sq = float(np.sum(beta**2))
    if abs(tr_sq - 1.0) > tol:
        raise FactorizationInvalidError(f"tr(Lambda^2) = {tr_sq!r}, expected 1")
    r = f.r
    Lam = np.diag(beta)
    inv_half = 1 / np.sqrt(beta)

    def effects(stack, transpose):
        w = np.einsum("xii,i->x", stack, 1 / beta).real
        base = np.transpose(stack, (0, 2, 1)) if transpose else stack
        inner = base - (lam / r) * w[:, None, None] * Lam[None]
        out = inv_half[None, :, None] * inner * inv_half[None, None, :] / (1 - lam)
        return (out + np.conj(np.transpose(out, (0, 2, 1)))) / 2

    seed = PureState(np.diag(beta).astype(complex))
    return NoisyProtocol(seed, POVM(effects(f.cs, True)), POVM(effects(f.ds, False)), float(lam))


def trivial_factorization(P) -> PsdFactorization:
    """Diagonal factorization from P = I @ P: C_x = e_x e_x^T, D_y = diag(P[:, y])."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    cs = np.zeros((n, n, n), dtype=complex)
    cs[np.arange(n), np.arange(n), np.arange(n)] = 1.0
    ds = np.zeros((P.shape[1], n, n), dtype=complex)
    for y in range(P.shape[1]):
        ds[y] = np.diag(P[:, y])
    return PsdFactorization(cs, ds)


def nmf_factorization(W, H) -> PsdFactorization:
    """Diagonal PSD factorization from a nonnegative one P = W @ H."""
    W = np.asarray(W, dtype=float)
    H = np.asarray(H, dtype=float)
    cs = np.array([np.diag(row) for row in W], dtype=complex)
    ds = np.array([np.diag(col) for col in H.T], dtype=complex)
    return PsdFactorization(cs, ds)


def noiseless_protocol(P, f: PsdFactorization | None = None) -> NoisyProtocol:
    """A lam = 0 protocol for ``P`` from a (default: trivial) PSD factorization."""
    f = trivial_factorization(P) if f is None else f
    return protocol_from_noisy_factorization(P, diagonalize_factorization(f), 0.0)


def enlarge_k(base: NoisyProtocol, s, t) -> int:
    """Smallest admissible ancilla size k >= 2 for :func:`enlarge_protocol`."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    dp = base.d
    ea, eb = base.povm_a.traces(), base.povm_b.traces()
    if s.shape != ea.shape or t.shape != eb.shape:
        raise DimensionMismatchError("weight vectors do not match the POVM outcome counts")
    if np.any(s < 0) or np.any(t < 0) or abs(s.sum() - 1) > 1e-12 or abs(t.sum() - 1) > 1e-12:
        raise InfeasibleSTError("s and t must be probability vectors")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.concatenate([ea / (dp * s), eb / (dp * t)])
    ratios = np.where(np.concatenate([ea, eb]) <= 1e-15, 0.0, ratios)
    if not np.all(np.isfinite(ratios)):
        raise InfeasibleSTError("a zero weight meets an effect with positive trace")
    return max(2, math.ceil(float(ratios.max()) - 1e-12))


def enlarge_protocol(base: NoisyProtocol, s, t, lam: float) -> NoisyProtocol:
    """Embed a noiseless protocol for P_hat / (1 - lam)^2 into a larger one
    whose effects have traces d * s_x and d * t_y, so that under noise
    ``lam`` it produces the original correlation.

    Alice's space is C^k (x) C^d', Bob's is C^d' (x) C^k; the seed is
    |0><0| (x) seed' (x) |0><0|.
    """
    if lam >= 1:
        raise LambdaOneError("construction needs lam < 1")
    if base.lam != 0:
        raise FactorizationInvalidError("base protocol must be noiseless")
    k = enlarge_k(base, s, t)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    dp = base.d
    d = dp * k
    p0 = np.zeros((k, k))
    p0[0, 0] = 1.0
    rest = np.eye(k) - p0
    ea, eb = base.povm_a.traces(), base.povm_b.traces()
    coef_a = (dp * k * s - ea) / (k - 1)
    coef_b = (dp * k * t - eb) / (k - 1)
    E = np.array(
        [np.kron(p0, e) + c * np.kron(rest, np.eye(dp) / dp) for e, c in zip(base.povm_a.effects, coef_a)]
    )
    F = np.array(
        [np.kron(f, p0) + c * np.kron(np.eye(dp) / dp, rest) for f, c in zip(base.povm_b.effects, coef_b)]
    )
    if isinstance(base.seed, PureState):
        amp = np.zeros((d, d), dtype=complex)
        # A index = a_k * d' + i, B index = j * k + b_k; ancillas in |0>
        amp[:dp, ::k] = base.seed.amplitudes
        seed = PureState(amp)
    else:
        mat = np.kron(np.kron(p0, base.seed.matrix), p0)
        # kron order (k, d', d', k) matches A = (k, d'), B = (d', k)
        seed = DensityMatrix(mat, (d, d))
    return NoisyProtocol(seed, POVM(E), POVM(F), float(lam))


def protocol_from_certificate(P, lam: float, s, t, tol: float = 1e-10) -> NoisyProtocol:
    """Noisy protocol for ``P`` at strength ``lam`` from weights (s, t) that
    keep P_hat nonnegative: a noiseless protocol for P_hat / (1 - lam)^2,
    enlarged so its effect traces follow s and t."""
    if lam >= 1:
        raise LambdaOneError("construction needs lam < 1")
    ph = phat(P, lam, s, t)
    if ph.min() < -tol:
        raise InfeasibleSTError(f"P_hat has entry {ph.min():.3g} < 0 at lam={lam}")
    target = np.clip(ph, 0.0, None) / (1 - lam) ** 2
    target /= target.sum()
    return enlarge_protocol(noiseless_protocol(target), s, t, lam)


# --- explicit constructions ------------------------------------------------

def explicit_edm_factorization(alphas) -> PsdFactorization:
    """Rank-2 factorization of make_edm(alphas); needs sum(alphas) = 0."""
    a = _check_alphas(alphas)
    if not alpha_sum_ok(a):
        raise AlphaSumNonzeroError(f"alphas sum to {a.sum()!r}, expected 0")
    m = a.size
    s2 = float(np.sum(a**2))
    off = a / math.sqrt(m * s2)
    sq = a**2 / s2
    cs = np.zeros((m, 2, 2))
    ds = np.zeros((m, 2, 2))
    cs[:, 0, 0], cs[:, 0, 1], cs[:, 1, 0], cs[:, 1, 1] = sq, -off, -off, 1 / m
    ds[:, 0, 0], ds[:, 0, 1], ds[:, 1, 0], ds[:, 1, 1] = 1 / m, off, off, sq
    return PsdFactorization(cs.astype(complex) / math.sqrt(2), ds.astype(complex) / math.sqrt(2))


def modified_edm_factorization(alphas, r: float) -> PsdFactorization:
    """Rescale the first factors by (1 + r) and (1 - r) to factor L EDM R."""
    f = explicit_edm_factorization(alphas)
    cs, ds = f.cs.copy(), f.ds.copy()
    cs[0] *= 1 + r
    ds[0] *= 1 - r
    return PsdFactorization(cs, ds)


def explicit_bm_factorization(m: int, k: float) -> PsdFactorization:
    _check_mk(m, k)
    theta = 2 * np.pi * np.arange(m) / m
    rk = math.sqrt(k)
    cs = np.empty((m, 2, 2), dtype=complex)
    ds = np.empty((m, 2, 2), dtype=complex)
    cs[:, 0, 0] = cs[:, 1, 1] = 1
    cs[:, 0, 1] = rk * np.exp(1j * theta)
    cs[:, 1, 0] = rk * np.exp(-1j * theta)
    ds[:, 0, 0] = ds[:, 1, 1] = 1
    ds[:, 0, 1] = -rk * np.exp(-1j * theta)
    ds[:, 1, 0] = -rk * np.exp(1j * theta)
    scale = 1 / (math.sqrt(2) * m)
    return PsdFactorization(cs * scale, ds * scale)


def explicit_am_factorization(m: int, k: float) -> PsdFactorization:
    """Rank-3 factorization of make_am(m, k)."""
    fb = explicit_bm_factorization(m, k)
    q = q_of_k(k)
    corner = (1 - q) / (2 * math.sqrt(1 + q * q)) * np.diag([math.sqrt(2), q, q]).astype(complex)
    g = math.sqrt((1 + q * q) / 2)
    cs = np.zeros((m + 1, 3, 3), dtype=complex)
    ds = np.zeros((m + 1, 3, 3), dtype=complex)
    cs[0] = ds[0] = corner
    cs[1:, 1:, 1:] = g * fb.cs
    ds[1:, 1:, 1:] = g * fb.ds
    return PsdFactorization(cs, ds)


# --- rank bounds -------------------------------------------------------------

def _nmf_batch(P, r, restarts, iters, tol, rng):
    """Lee-Seung multiplicative updates run on ``restarts`` random starts at once."""
    n_a, n_b = P.shape
    scale = math.sqrt(P.mean() / r)
    W = rng.random((restarts, n_a, r)) * scale + 1e-3 * scale
    H = rng.random((restarts, r, n_b)) * scale + 1e-3 * scale
    eps = 1e-300
    for it in range(iters):
        H *= (W.transpose(0, 2, 1) @ P) / (W.transpose(0, 2, 1) @ W @ H + eps)
        W *= (P @ H.transpose(0, 2, 1)) / (W @ H @ H.transpose(0, 2, 1) + eps)
        if it % 50 == 49:
            res = np.max(np.abs(W @ H - P), axis=(1, 2))
            best = int(np.argmin(res))
            if res[best] <= tol:
                return W[best], H[best], float(res[best])
    res = np.max(np.abs(W @ H - P), axis=(1, 2))
    best = int(np.argmin(res))
    return W[best], H[best], float(res[best])


def nmf(P, r: int, restarts: int = 50, iters: int = 10_000, tol: float = 1e-10, seed=0):
    """Best of ``restarts`` multiplicative-update runs; returns (W, H, max residual)."""
    P = np.asarray(P, dtype=float)
    rng = np.random.default_rng(seed)
    return _nmf_batch(P, r, restarts, iters, tol, rng)


def nonneg_rank_upper(
    P, r_max: int | None = None, tol: float = 1e-10, restarts: int = 50,
    iters: int = 10_000, seed=0,
) -> int:
    """Smallest r <= r_max with a certified nonnegative factorization of
    inner dimension r; ``r_max + 1`` when none was found.

    Only ever an upper bound on the nonnegative rank.
    """
    P = np.asarray(P, dtype=float)
    n = min(P.shape)
    r_max = n if r_max is None else int(r_max)
    rank = int(np.linalg.matrix_rank(P, tol=1e-12))
    for r in range(max(rank, 1), r_max + 1):
        if r >= n:
            return r  # P = I @ P
        if r == 1:
            row, col = P.sum(axis=1), P.sum(axis=0)
            if np.max(np.abs(np.outer(row, col) / P.sum() - P)) <= tol:
                return 1
            continue
        _, _, res = nmf(P, r, restarts, iters, tol, seed)
        if res <= tol:
            return r
    return r_max + 1


def bm_nonneg_rank_lower(m: int, k: float) -> int:
    """Nonnegative-rank lower bound for B_m from the polygon nesting angle.

    If k > cos(pi/l) / cos^2(pi/m), no l-gon fits between the polygons and
    rank_+ > log2 l. Uses the largest such l >= 3.
    """
    _check_mk(m, k)
    c2 = math.cos(math.pi / m) ** 2
    best = None
    l = 3
    while k > math.cos(math.pi / l) / c2:
        best = l
        l += 1
    if best is None:
        return 1
    return int(math.floor(math.log2(best))) + 1


def edm_rank_bounds(m: int) -> tuple[RankBounds, RankBounds]:
    """(nonnegative-rank bounds, PSD-rank bounds) for an m x m EDM with
    suitably chosen alphas. The 2 sqrt(m) - 2 bound is quoted, not derived."""
    if m < 2:
        raise ValueError("m must be at least 2")
    lower = max(2, math.ceil(2 * math.sqrt(m) - 2 - 1e-12))
    plus = RankBounds(lower, m, "quoted 2*sqrt(m)-2", "trivial")
    psd = RankBounds(2, 2, "not a product", "explicit_edm_factorization")
    return plus, psd
