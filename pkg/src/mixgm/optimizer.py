"""Accelerated proximal gradient descent with adaptive restarts."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .core import ParamSpace, PenaltyWeights, ZERO_TOL, pseudo_loglik_gradient, neg_pseudo_loglik
from .data import Dataset
from .errors import NumericalError
from .theta import Theta

DIAG_FLOOR = 1e-3


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 2000
    tolerance: float = 1e-6
    initial_step: float = 1.0
    backtracking_factor: float = 0.5
    restart: bool = True
    restart_scheme: str = "function"  # or "gradient"
    fit_diagonal: bool = True
    seed: int | None = None  # None: deterministic zero start
    threads: int = 1
    # also require the prox-gradient residual (a KKT measure) to be this small
    kkt_tolerance: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0 or not self.initial_step > 0 or not self.kkt_tolerance > 0:
            raise ValueError("tolerance, kkt_tolerance and initial_step must be positive")
        if not 0 < self.backtracking_factor < 1:
            raise ValueError("backtracking_factor must lie in (0, 1)")
        if self.restart_scheme not in ("function", "gradient"):
            raise ValueError(f"unknown restart scheme {self.restart_scheme!r}")


@dataclass
class FitResult:
    theta: Theta
    objective_trace: list[float]
    iterations: int
    converged: bool
    restarts: int
    lam: float = 0.0
    step_trace: list[float] = field(default_factory=list)
    restart_flags: list[bool] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "step", "restarted"])
            for k, (f, st, r) in enumerate(zip(self.objective_trace, self.step_trace, self.restart_flags)):
                w.writerow([k, repr(f), repr(st), int(r)])


def soft_threshold(v: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def prox_weighted_l1(theta: Theta, thresholds: Theta) -> Theta:
    """Coordinatewise soft-thresholding of every stored parameter."""
    space = ParamSpace(theta.schema)
    t = space.pack(thresholds)
    if np.any(t < 0):
        raise ValueError("thresholds must be non-negative")
    return space.unpack(soft_threshold(space.pack(theta), t))


class _Problem:
    """Smooth loss + weighted L1 on the flat parameter vector."""

    def __init__(self, ds: Dataset, lam: float, w: PenaltyWeights, cfg: SolverConfig, frozen=None):
        self.ds = ds
        self.cfg = cfg
        self.space = ParamSpace(ds.schema)
        self.thr = lam * w.thresholds(self.space)
        if frozen is None:
            frozen = np.zeros(self.space.size, dtype=bool)
        if not cfg.fit_diagonal:
            frozen = frozen | self.space.mask("beta_diag")
        self.frozen = frozen
        self.diag = self.space.mask("beta_diag")

    def smooth(self, v):
        t = self.space.unpack(v)
        if np.any(np.diag(t.beta) <= 0):
            return np.inf, None
        f, g = pseudo_loglik_gradient(t, self.ds, self.cfg.threads)
        g = self.space.pack(g)
        g[self.frozen] = 0.0
        return f, g

    def smooth_value(self, v):
        t = self.space.unpack(v)
        if np.any(np.diag(t.beta) <= 0):
            return np.inf
        return neg_pseudo_loglik(t, self.ds, self.cfg.threads)

    def penalty(self, v):
        return float(np.sum(self.thr * np.abs(v)))

    def prox(self, v, step):
        out = soft_threshold(v, step * self.thr)
        if self.cfg.fit_diagonal:
            out[self.diag] = np.maximum(out[self.diag], DIAG_FLOOR)
        return out

    def feasible(self, v):
        if self.cfg.fit_diagonal:
            v = v.copy()
            v[self.diag] = np.maximum(v[self.diag], DIAG_FLOOR)
        return v


def _solve(prob: _Problem, x0: np.ndarray, cfg: SolverConfig, lam: float) -> FitResult:
    x = x0.copy()
    f_x = prob.smooth_value(x)
    F_prev = f_x + prob.penalty(x)
    if not np.isfinite(F_prev):
        raise NumericalError("objective is not finite at the starting point", trace=[F_prev])
    trace, steps, flags = [F_prev], [0.0], [False]
    y = x.copy()
    mom = 1.0
    step = cfg.initial_step
    restarts = 0
    converged = False
    it = 0
    momentum_on = False
    while it < cfg.max_iterations:
        it += 1
        f_y, g_y = prob.smooth(y)
        if not np.isfinite(f_y):
            # momentum overshot out of the domain; fall back to the last iterate
            y, mom, momentum_on = x.copy(), 1.0, False
            restarts += 1
            f_y, g_y = prob.smooth(y)
        y_prev = y
        while True:
            x_new = prob.prox(y - step * g_y, step)
            d = x_new - y
            f_new = prob.smooth_value(x_new)
            if np.isfinite(f_new) and f_new <= f_y + g_y @ d + (d @ d) / (2 * step) + 1e-12 * abs(f_y):
                break
            step *= cfg.backtracking_factor
            if step < 1e-20:
                raise NumericalError("step size underflow during backtracking", trace=trace)
        F_new = f_new + prob.penalty(x_new)
        if not np.isfinite(F_new):
            raise NumericalError("objective diverged", trace=trace + [F_new])

        if cfg.restart_scheme == "function":
            bad = F_new > F_prev
        else:
            bad = float((y - x_new) @ (x_new - x)) > 0
        if cfg.restart and momentum_on and bad:
            # reject the extrapolated step and restart momentum from x
            restarts += 1
            y, mom, momentum_on = x.copy(), 1.0, False
            trace.append(F_prev)
            steps.append(step)
            flags.append(True)
            continue

        if F_new > F_prev and not momentum_on:
            # plain proximal step cannot increase beyond rounding
            converged = True
            trace.append(F_prev)
            steps.append(step)
            flags.append(False)
            break
        mom_next = 0.5 * (1 + np.sqrt(1 + 4 * mom * mom))
        y = prob.feasible(x_new + ((mom - 1) / mom_next) * (x_new - x))
        momentum_on = True
        rel = abs(F_prev - F_new) / max(1.0, abs(F_prev))
        residual = float(np.max(np.abs(y_prev - x_new), initial=0.0)) / step
        x, mom = x_new, mom_next
        trace.append(F_new)
        steps.append(step)
        flags.append(False)
        F_prev = F_new
        if rel < cfg.tolerance and residual < cfg.kkt_tolerance:
            converged = True
            break

    theta = prob.space.unpack(x)
    return FitResult(theta, trace, it, converged, restarts, lam, steps, flags)


def _finalize(res: FitResult, lam: float) -> FitResult:
    t = res.theta
    if lam == 0:
        t = t.to_baseline_form()
    else:
        space = ParamSpace(t.schema)
        v = space.pack(t)
        small = space.penalized & (np.abs(v) < ZERO_TOL)
        v[small] = 0.0
        t = space.unpack(v)
    res.theta = t
    return res


def fit(ds: Dataset, lam: float, w: PenaltyWeights, cfg: SolverConfig = SolverConfig(),
        warm_start: Theta | None = None) -> FitResult:
    """Minimize the per-sample negative pseudo-log-likelihood plus
    ``lam * weighted L1`` by FISTA with backtracking and adaptive restarts.

    With restarts on, an extrapolated step that raises the objective is
    rejected and momentum is reset, so the recorded objective trace never
    increases.
    """
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    prob = _Problem(ds, lam, w, cfg)
    if warm_start is not None:
        x0 = prob.space.pack(warm_start)
    else:
        x0 = prob.space.pack(Theta.zeros(ds.schema))
        if cfg.seed is not None:
            rng = np.random.default_rng(cfg.seed)
            free = ~prob.frozen
            x0[free] += 0.01 * rng.standard_normal(int(free.sum()))
    if not cfg.fit_diagonal:
        x0[prob.diag] = 1.0
    return _finalize(_solve(prob, x0, cfg, lam), lam)


def null_fit(ds: Dataset, cfg: SolverConfig = SolverConfig()) -> FitResult:
    """Fit only the unpenalized parameters, all couplings held at zero."""
    dummy = PenaltyWeights(np.zeros((ds.schema.p,) * 2), np.zeros((ds.schema.p, ds.schema.q)),
                           np.zeros((ds.schema.q,) * 2))
    space = ParamSpace(ds.schema)
    prob = _Problem(ds, 0.0, dummy, cfg, frozen=space.penalized)
    x0 = space.pack(Theta.zeros(ds.schema))
    res = _solve(prob, x0, cfg, 0.0)
    res.theta = res.theta.to_baseline_form()
    return res


def lambda_max(ds: Dataset, w: PenaltyWeights, cfg: SolverConfig = SolverConfig()) -> float:
    """Smallest lambda at which every penalized coordinate is zero.

    Zero is a fixed point of the prox step iff |gradient_k| <= lambda * w_k for
    all penalized k, evaluated at the optimum of the unpenalized parameters.
    """
    tight = SolverConfig(max_iterations=5000, tolerance=1e-14, fit_diagonal=cfg.fit_diagonal)
    base = null_fit(ds, tight).theta
    space = ParamSpace(ds.schema)
    _, g = pseudo_loglik_gradient(base, ds)
    g = np.abs(space.pack(g))
    wt = w.thresholds(space)
    pen = space.penalized
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(wt[pen] > 0, g[pen] / wt[pen], 0.0)
    return float(ratio.max(initial=0.0))


def refit_support(ds: Dataset, theta: Theta, cfg: SolverConfig = SolverConfig()) -> FitResult:
    """Unpenalized fit with every zero coupling of ``theta`` held at zero.

    Gives the maximized pseudo-log-likelihood for the edge set of ``theta``.
    """
    space = ParamSpace(ds.schema)
    v = space.pack(theta)
    frozen = space.penalized & (v == 0)
    dummy = PenaltyWeights(np.zeros((ds.schema.p,) * 2), np.zeros((ds.schema.p, ds.schema.q)),
                           np.zeros((ds.schema.q,) * 2))
    prob = _Problem(ds, 0.0, dummy, cfg, frozen=frozen)
    res = _solve(prob, v, cfg, 0.0)
    res.theta = res.theta.to_baseline_form()
    return res
