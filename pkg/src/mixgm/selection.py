"""EBIC scoring and the lambda line search."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ParamSpace, ZERO_TOL, compute_penalty_weights, neg_pseudo_loglik, PenaltyWeights
from .data import Dataset
from .errors import NumericalError
from .optimizer import SolverConfig, fit, refit_support
from .theta import Theta

log = logging.getLogger(__name__)

DEFAULT_EXPONENTS = tuple(2.0 - 0.25 * k for k in range(29))


@dataclass(frozen=True)
class SelectionConfig:
    gamma: float = 1.0
    exponent_grid: tuple[float, ...] = DEFAULT_EXPONENTS
    edge_mode: str = "scalar"  # or "group"
    loglik: str = "refit"  # or "penalized"
    baseline_multiplier: float = 10.0
    parallel: bool = False

    def __post_init__(self):
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        g = np.asarray(self.exponent_grid, dtype=float)
        if g.size == 0 or np.any(np.diff(g) >= 0):
            raise ValueError("exponent grid must be non-empty and strictly decreasing")
        if self.edge_mode not in ("scalar", "group"):
            raise ValueError(f"unknown edge mode {self.edge_mode!r}")
        if self.loglik not in ("refit", "penalized"):
            raise ValueError(f"unknown log-likelihood mode {self.loglik!r}")


@dataclass
class SelectionRow:
    lam: float
    ebic: float
    edge_count: int
    objective: float
    converged: bool = True
    failed: bool = False
    loglik: float = math.nan


@dataclass
class SelectionResult:
    lambda_star: float
    theta_star: Theta
    table: list[SelectionRow]
    thetas: list[Theta | None] = field(default_factory=list)

    def write_table(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "ebic", "edge_count", "objective"])
            for r in self.table:
                if r.failed:
                    w.writerow([repr(r.lam), "nan", "", "nan"])
                else:
                    w.writerow([repr(r.lam), repr(r.ebic), r.edge_count, repr(r.objective)])


def lambda0(n: int, p: int, q: int) -> float:
    return math.sqrt(math.log(p + q) / n)


def lambda_grid(n: int, p: int, q: int, cfg: SelectionConfig = SelectionConfig()) -> list[float]:
    """``lambda0 * 2**e`` for each exponent, with ``lambda0 = sqrt(log(p+q)/n)``."""
    if n < 2 or p + q < 2:
        raise ValueError("need n >= 2 and p + q >= 2")
    l0 = lambda0(n, p, q)
    return [l0 * 2.0**e for e in cfg.exponent_grid]


def _edge_entries(theta: Theta):
    """Penalized scalar entries with baseline levels removed, keyed by
    variable pair (model-order node indices)."""
    s = theta.schema
    p = s.p
    isb = s.indicator_is_baseline
    owner = s.indicator_owner
    iu = np.triu_indices(p, 1)
    out = [(iu[0], iu[1], theta.beta[iu])]
    if s.q:
        cols = np.flatnonzero(~isb)
        ss, cc = np.meshgrid(np.arange(p), cols, indexing="ij")
        out.append((ss.ravel(), p + owner[cc.ravel()], theta.rho[ss, cc].ravel()))
        space = ParamSpace(s)
        a, b = space.phi_iu
        keep = ~isb[a] & ~isb[b]
        out.append((p + owner[a[keep]], p + owner[b[keep]], theta.phi[a[keep], b[keep]]))
    return out


def edge_count(theta: Theta, mode: str = "scalar") -> int:
    """Number of nonzero coupling parameters after dropping baseline levels.

    ``mode="group"`` counts variable pairs with any nonzero entry instead.
    """
    if mode == "scalar":
        return int(sum(np.count_nonzero(np.abs(v) > ZERO_TOL) for _, _, v in _edge_entries(theta)))
    pairs = set()
    for a, b, v in _edge_entries(theta):
        nz = np.abs(v) > ZERO_TOL
        pairs.update(zip(a[nz].tolist(), b[nz].tolist()))
    return len({(min(x, y), max(x, y)) for x, y in pairs})


def n_effective_variables(schema) -> int:
    return schema.p + sum(L - 1 for L in schema.n_levels)


def ebic_value(loglik: float, n_edges: int, n: int, gamma: float, P: int) -> float:
    return -2.0 * loglik + n_edges * math.log(n) + 4.0 * n_edges * gamma * math.log(P)


def support_loglik(theta: Theta, ds: Dataset, loglik: str = "refit",
                   solver: SolverConfig = SolverConfig()) -> float:
    """l_n for the edge set of ``theta``: n times the per-sample
    pseudo-log-likelihood, either maximized over that edge set ("refit") or
    evaluated at ``theta`` itself ("penalized")."""
    if loglik == "refit":
        theta = refit_support(ds, theta, solver).theta
    elif loglik != "penalized":
        raise ValueError(f"unknown log-likelihood mode {loglik!r}")
    return -ds.n * neg_pseudo_loglik(theta, ds)


def ebic(theta: Theta, ds: Dataset, gamma: float = 1.0, mode: str = "scalar", loglik: str = "refit",
         solver: SolverConfig = SolverConfig()) -> float:
    """EBIC_gamma = -2 l_n + |E| log n + 4 |E| gamma log P with
    P = p + sum(L_j - 1)."""
    ln = support_loglik(theta, ds, loglik, solver)
    return ebic_value(ln, edge_count(theta, mode), ds.n, gamma, n_effective_variables(ds.schema))


def fit_path(ds: Dataset, lams, w: PenaltyWeights, solver: SolverConfig, parallel: bool = False):
    """Fit every lambda; warm-started from largest to smallest unless
    ``parallel`` (independent cold starts). Failures yield ``None``."""
    if parallel:
        def one(lam):
            try:
                return fit(ds, lam, w, solver)
            except NumericalError as exc:
                log.warning("lambda=%g failed: %s", lam, exc)
                return None
        with ThreadPoolExecutor(max_workers=max(1, solver.threads)) as pool:
            return list(pool.map(one, lams))
    results, warm = [], None
    for lam in lams:
        try:
            res = fit(ds, lam, w, solver, warm_start=warm)
        except NumericalError as exc:
            log.warning("lambda=%g failed: %s", lam, exc)
            results.append(None)
            continue
        results.append(res)
        warm = res.theta
    return results


def select_model(ds: Dataset, cfg: SelectionConfig = SelectionConfig(),
                 solver: SolverConfig = SolverConfig(), weights: PenaltyWeights | None = None,
                 path=None) -> SelectionResult:
    """Fit the lambda grid and return the EBIC minimizer (ties go to the larger lambda).

    ``path`` may pass precomputed fits for the grid to rescore them with a
    different gamma.
    """
    lams = lambda_grid(ds.n, ds.schema.p, ds.schema.q, cfg)
    w = weights if weights is not None else compute_penalty_weights(ds, cfg.baseline_multiplier)
    if path is None:
        path = fit_path(ds, lams, w, solver, cfg.parallel)
    P = n_effective_variables(ds.schema)
    cache: dict[bytes, float] = {}
    space = ParamSpace(ds.schema)
    table, thetas = [], []
    for lam, res in zip(lams, path):
        if res is None:
            table.append(SelectionRow(lam, math.inf, 0, math.nan, False, True))
            thetas.append(None)
            continue
        key = np.packbits(space.pack(res.theta)[space.penalized] != 0).tobytes()
        if cfg.loglik == "refit" and key in cache:
            ln = cache[key]
        else:
            ln = cache[key] = support_loglik(res.theta, ds, cfg.loglik, solver)
        E = edge_count(res.theta, cfg.edge_mode)
        table.append(SelectionRow(lam, ebic_value(ln, E, ds.n, cfg.gamma, P), E, res.objective,
                                  res.converged, loglik=ln))
        thetas.append(res.theta)
    ok = [k for k, r in enumerate(table) if not r.failed]
    if not ok:
        raise NumericalError("all fits on the lambda grid failed")
    # grid is decreasing in lambda, so the first minimum is the sparsest
    best = min(ok, key=lambda k: (table[k].ebic, k))
    return SelectionResult(table[best].lam, thetas[best], table, thetas)


def rescore(result: SelectionResult, ds: Dataset, gamma: float, mode: str | None = None) -> SelectionResult:
    """Re-rank a finished path under another ``gamma`` without refitting;
    the stored l_n values do not depend on gamma."""
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    P = n_effective_variables(ds.schema)
    table = []
    for r, th in zip(result.table, result.thetas):
        if r.failed:
            table.append(r)
            continue
        E = r.edge_count if mode is None else edge_count(th, mode)
        table.append(SelectionRow(r.lam, ebic_value(r.loglik, E, ds.n, gamma, P), E, r.objective,
                                  r.converged, loglik=r.loglik))
    ok = [k for k, r in enumerate(table) if not r.failed]
    best = min(ok, key=lambda k: (table[k].ebic, k))
    return SelectionResult(table[best].lam, result.thetas[best], table, result.thetas)
