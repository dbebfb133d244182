"""Family construction and noise sweeps with reproducible CSV output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import corrmat
from .bounds import (
    CostBounds,
    Unreachable,
    advantage_estimate,
    am_certificate,
    am_cost_bounds,
    bm_cost,
    cost_upper_bound,
)
from .errors import BadParameterError
from .factorize import RankBounds, bm_nonneg_rank_lower, edm_rank_bounds
from .reach import find_feasible_st, phat, threshold_upper_bound

COLUMNS = [
    "lambda", "feasible", "status", "margin", "threshold_bound",
    "cost_lower", "cost_upper", "advantage_lower", "advantage_upper",
]
CERT_TOL = 1e-10


def _vector(spec) -> np.ndarray:
    """Parse "uniform:n", "1,2,3" or a list into a float vector."""
    if isinstance(spec, str):
        if spec.startswith("uniform:"):
            n = int(spec.split(":", 1)[1])
            return np.full(n, 1.0 / n)
        return np.array([float(v) for v in spec.split(",") if v.strip()])
    return np.asarray(spec, dtype=float)


def build_family(name: str, params: dict) -> tuple[corrmat.Correlation, dict]:
    """Correlation for a named family plus metadata worth printing with it."""
    p = dict(params)
    meta = {"family": name}
    if name == "bm":
        m, k = int(p["m"]), float(p["k"])
        P = corrmat.make_bm(m, k)
        meta.update(m=m, k=k, threshold=1 - math.sqrt(k))
    elif name == "am":
        m, k = int(p["m"]), float(p["k"])
        P = corrmat.make_am(m, k)
        meta.update(m=m, k=k, q=corrmat.q_of_k(k))
    elif name == "edm":
        P = corrmat.make_edm(_vector(p["alphas"]))
    elif name == "edm-mod":
        P = corrmat.normalize(corrmat.make_modified_edm(_vector(p["alphas"]), _vector(p["L"]), _vector(p["R"])))
    elif name == "thm1":
        P, L, R = corrmat.make_theorem1_family(_vector(p["schmidt"]), _vector(p["alphas"]))
        meta.update(L=",".join(format(v, ".17g") for v in L), R=",".join(format(v, ".17g") for v in R))
    elif name == "product":
        P = corrmat.product(_vector(p["u"]), _vector(p["v"]))
    elif name == "file":
        P = load_correlation(p["path"])
        meta["path"] = str(p["path"])
    else:
        raise BadParameterError(f"unknown family {name!r}")
    meta["threshold_bound"] = threshold_upper_bound(P)
    return P, meta


def load_correlation(path) -> corrmat.Correlation:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        return corrmat.from_json(text)
    return corrmat.read_csv(io.StringIO(text))


@dataclass
class SweepConfig:
    family: str = "bm"
    params: dict = field(default_factory=dict)
    lambdas: list | None = None
    start: float = 0.0
    stop: float = 0.3
    count: int = 10
    strict_margin: float = 1e-9
    max_iters: int = 200
    restarts: int = 8
    seed: int = 0
    out: str | None = None
    cert_dir: str | None = None

    def grid(self) -> list[float]:
        if self.lambdas is not None:
            grid = [float(v) for v in self.lambdas]
        else:
            grid = np.linspace(self.start, self.stop, int(self.count)).tolist()
        if any(not 0 <= v < 1 for v in grid):
            raise BadParameterError("every lambda must lie in [0, 1)")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise BadParameterError("lambda grid must be sorted ascending")
        return grid

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise BadParameterError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepRow:
    lam: float
    feasible: bool
    status: str  # certified | unreachable | unresolved
    margin: float | None
    threshold_bound: float
    cost_lower: float | None
    cost_upper: int | None
    advantage_lower: float | None
    advantage_upper: float | None
    certificate: dict | None = None

    def cells(self) -> list[str]:
        def f(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, int):
                return str(v)
            return format(float(v), ".17g")

        cost_upper = "unreachable" if self.status == "unreachable" else f(self.cost_upper)
        cost_lower = "unreachable" if self.status == "unreachable" else f(self.cost_lower)
        return [f(self.lam), f(self.feasible), self.status, f(self.margin), f(self.threshold_bound),
                cost_lower, cost_upper, f(self.advantage_lower), f(self.advantage_upper)]


def _rank_plus_bounds(cfg: SweepConfig, P) -> RankBounds:
    n = P.shape[0]
    rank = int(np.linalg.matrix_rank(P, tol=1e-12))
    lower = max(rank, 1)
    if cfg.family in ("bm", "am"):
        lower = max(lower, bm_nonneg_rank_lower(int(cfg.params["m"]), float(cfg.params["k"])))
    elif cfg.family == "edm":
        lower = max(lower, edm_rank_bounds(n)[0].lower)
    return RankBounds(min(lower, n), n, "matrix rank / family bound", "trivial")


def _row(cfg: SweepConfig, P, lam: float, rng, tb: float, rb: RankBounds) -> SweepRow:
    arr = np.asarray(P)
    n = arr.shape[0]
    nonproduct = rb.lower >= 2
    if lam > tb + 1e-12 or (lam > 0 and np.any(arr <= 0)):
        adv = advantage_estimate(arr, lam, rb, Unreachable(lam, tb))
        return SweepRow(lam, False, "unreachable", None, tb, None, None, adv.s_lower, adv.s_upper)
    if lam == 0:
        r, c = corrmat.marginals(arr)
        s, t = r, c
    else:
        res = find_feasible_st(arr, lam, strict_margin=cfg.strict_margin, max_iters=cfg.max_iters,
                               restarts=cfg.restarts, seed=rng, center=True)
        if not res.feasible:
            return SweepRow(lam, False, "unresolved", res.margin, tb, None, None, None, None)
        s, t = res.s, res.t
    margin = float(phat(arr, lam, s, t).min())
    lower = 2.0 if nonproduct else 1.0
    upper = cost_upper_bound(arr, lam, s, t, n) if min(s.min(), t.min()) > 0 else None
    prov = {"lower": "non-product" if nonproduct else "trivial", "upper": "enlarged trivial factorization"}
    if cfg.family == "bm":
        cost = bm_cost(int(cfg.params["m"]), float(cfg.params["k"]), lam)
        lower, upper, prov = 2.0, cost, {"lower": "exact", "upper": "exact"}
    elif cfg.family == "am" and lam > 0:
        m, k = int(cfg.params["m"]), float(cfg.params["k"])
        eps = corrmat.q_of_k(k) - lam
        if eps > 0:
            closed = am_cost_bounds(m, k, eps)
            lower = max(lower, closed.lower)
            prov["lower"] = "closed form"
            _, sa, ta, eta = am_certificate(m, k, eps)
            # the closed form counts 1/eta, valid once eta is the smallest weight
            valid = eta <= (1 - eta) / m and phat(arr, lam, sa, ta).min() >= -CERT_TOL
            if valid and (upper is None or closed.upper < upper):
                upper = closed.upper
                prov["upper"] = "closed form"
    if upper is not None and lower > upper:
        lower = float(upper)
    adv = advantage_estimate(arr, lam, rb, CostBounds(lower, upper, lam, prov))
    cert = {"lambda": lam, "s": s.tolist(), "t": t.tolist(), "margin": margin,
            "correlation": corrmat.validate(arr).to_dict()}
    return SweepRow(lam, True, "certified", margin, tb, lower, upper, adv.s_lower, adv.s_upper, cert)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CORRLAB_THREADS", "1")))
    except ValueError:
        return 1


def run_sweep(cfg: SweepConfig, P=None) -> list[SweepRow]:
    """One row per lambda, in grid order. Each row gets its own child seed,
    so results do not depend on the thread count."""
    if P is None:
        P, _ = build_family(cfg.family, cfg.params)
    grid = cfg.grid()
    tb = threshold_upper_bound(P)
    rb = _rank_plus_bounds(cfg, np.asarray(P))
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(grid))
    jobs = [(lam, np.random.default_rng(ss)) for lam, ss in zip(grid, seeds)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(lambda job: _row(cfg, P, job[0], job[1], tb, rb), jobs))


def write_rows(rows: list[SweepRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow(row.cells())


def write_certificates(rows: list[SweepRow], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, row in enumerate(rows):
        if row.certificate is None:
            continue
        path = directory / f"cert_{i:04d}.json"
        path.write_text(json.dumps(row.certificate, sort_keys=True, indent=1) + "\n")
        paths.append(path)
    return paths
