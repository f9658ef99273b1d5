"""Node conditionals, the negative pseudo-log-likelihood, its gradient, and
the weighted L1 penalty.

The objective is averaged over samples. Symmetric couplings (beta_st, and
the phi blocks) are single parameters; their gradient collects the
contributions of both node conditionals that contain them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, VariableSchema
from .errors import DataError, NumericalError
from .theta import Theta

LOG_2PI = math.log(2 * math.pi)
CHUNK_ROWS = 4096
ZERO_TOL = 1e-8


# -- single-sample conditionals --------------------------------------------


def gaussian_conditional(theta: Theta, x: np.ndarray, y: np.ndarray, s: int) -> tuple[float, float]:
    """Mean and precision of continuous node ``s`` given the rest of the row.

    ``x`` holds the continuous values, ``y`` the level indices.
    """
    bss = theta.beta[s, s]
    if not bss > 0:
        raise DataError(f"beta[{s},{s}] = {bss} must be positive")
    o = theta.schema.offsets
    rho_term = sum(theta.rho[s, o[j] + y[j]] for j in range(theta.q))
    cross = theta.beta[s] @ x - bss * x[s]
    return (theta.alpha[s] + rho_term - cross) / bss, bss


def discrete_scores(theta: Theta, x: np.ndarray, y: np.ndarray, r: int) -> np.ndarray:
    o = theta.schema.offsets
    sl = slice(o[r], o[r + 1])
    score = x @ theta.rho[:, sl] + np.diag(theta.phi)[sl]
    for j in range(theta.q):
        if j != r:
            score = score + theta.phi[sl, o[j] + y[j]]
    return score


def discrete_conditional(theta: Theta, x: np.ndarray, y: np.ndarray, r: int) -> np.ndarray:
    """Level probabilities of discrete node ``r`` given the rest of the row."""
    score = discrete_scores(theta, x, y, r)
    score = score - score.max()
    e = np.exp(score)
    return e / e.sum()


# -- vectorized objective ----------------------------------------------------


def _check_dims(theta: Theta, ds: Dataset) -> None:
    if theta.schema.p != ds.schema.p or theta.schema.n_levels != ds.schema.n_levels:
        raise DataError(
            f"dimension mismatch: theta has p={theta.schema.p}, levels={theta.schema.n_levels}; "
            f"data has p={ds.schema.p}, levels={ds.schema.n_levels}"
        )


def offdiag_blocks(phi: np.ndarray, schema: VariableSchema) -> np.ndarray:
    owner = schema.indicator_owner
    return np.where(owner[:, None] != owner[None, :], phi, 0.0)


def _level_groups(schema: VariableSchema) -> list[tuple[int, np.ndarray]]:
    o = schema.offsets
    groups: dict[int, list[int]] = {}
    for r, L in enumerate(schema.n_levels):
        groups.setdefault(L, []).extend(range(o[r], o[r + 1]))
    return [(L, np.array(cols)) for L, cols in groups.items()]


def discrete_logprobs(theta: Theta, X: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Blockwise log-softmax of level scores, shape (n, M)."""
    s = theta.schema
    S = X @ theta.rho + D @ offdiag_blocks(theta.phi, s) + np.diag(theta.phi)[None, :]
    out = np.empty_like(S)
    # variables sharing a level count are normalized together as (n, k, L)
    for L, cols in _level_groups(s):
        blk = S[:, cols].reshape(S.shape[0], -1, L)
        blk = blk - blk.max(axis=2, keepdims=True)
        blk -= np.log(np.exp(blk).sum(axis=2, keepdims=True))
        out[:, cols] = blk.reshape(S.shape[0], -1)
    return out


def conditional_means(theta: Theta, X: np.ndarray, D: np.ndarray) -> np.ndarray:
    bd = np.diag(theta.beta)
    boff = theta.beta - np.diag(bd)
    return (theta.alpha[None, :] + D @ theta.rho.T - X @ boff) / bd[None, :]


def _chunk_terms(theta: Theta, X, D, want_grad: bool):
    s = theta.schema
    bd = np.diag(theta.beta)
    # Z_is = beta_ss * (x_is - mean_is)
    Z = X @ theta.beta - theta.alpha[None, :] - D @ theta.rho.T
    val = 0.5 * X.shape[0] * (s.p * LOG_2PI - np.log(bd).sum()) + 0.5 * np.sum(Z * Z / bd[None, :])
    if s.q:
        logP = discrete_logprobs(theta, X, D)
        val -= np.sum(D * logP)
    if not want_grad:
        return (val,)
    W = Z / bd[None, :]
    g_alpha = -W.sum(axis=0)
    g_beta = X.T @ W  # entry (t, s): d/d beta_ts through node s
    g_bdiag = -0.5 * X.shape[0] / bd + np.sum(Z * X, axis=0) / bd - 0.5 * np.sum(Z * Z, axis=0) / bd**2
    g_rho = -W.T @ D
    if s.q:
        E = np.exp(logP) - D
        g_rho = g_rho + X.T @ E
        g_phi = D.T @ E
        g_node = E.sum(axis=0)
    else:
        g_phi = np.zeros((0, 0))
        g_node = np.zeros(0)
    return val, g_alpha, g_beta, g_bdiag, g_rho, g_phi, g_node


def _reduce(theta: Theta, ds: Dataset, want_grad: bool, threads: int | None):
    n = ds.n
    X, D = ds.continuous, ds.one_hot
    bounds = [(a, min(a + CHUNK_ROWS, n)) for a in range(0, n, CHUNK_ROWS)]

    def work(b):
        # overflow shows up as a non-finite value, which callers check
        with np.errstate(over="ignore", invalid="ignore"):
            return _chunk_terms(theta, X[b[0]:b[1]], D[b[0]:b[1]], want_grad)

    threads = threads or 1
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    # chunk boundaries do not depend on the thread count, and partial sums are
    # accumulated in chunk order: results are identical for any thread count
    total = list(parts[0])
    for part in parts[1:]:
        for k, v in enumerate(part):
            total[k] = total[k] + v
    return total


def neg_pseudo_loglik(theta: Theta, ds: Dataset, threads: int | None = None) -> float:
    """Per-sample negative pseudo-log-likelihood."""
    _check_dims(theta, ds)
    if np.any(np.diag(theta.beta) <= 0):
        raise DataError("beta diagonal must be strictly positive")
    return float(_reduce(theta, ds, False, threads)[0] / ds.n)


def pseudo_loglik_gradient(theta: Theta, ds: Dataset, threads: int | None = None) -> tuple[float, Theta]:
    """Objective value and its gradient, returned as a Theta-shaped container.

    Off-diagonal beta and phi entries of the gradient hold the derivative with
    respect to the single shared parameter (both mirrored entries carry the
    same value). Entries of phi inside diagonal blocks other than the diagonal
    are zero.
    """
    _check_dims(theta, ds)
    n = ds.n
    val, g_alpha, g_beta, g_bdiag, g_rho, g_phi, g_node = _reduce(theta, ds, True, threads)
    s = theta.schema
    gb = g_beta + g_beta.T
    np.fill_diagonal(gb, g_bdiag)
    if s.q:
        gp = offdiag_blocks(g_phi + g_phi.T, s)
        gp[np.diag_indices_from(gp)] = g_node
    else:
        gp = np.zeros((0, 0))
    grad = Theta(s, gb / n, g_alpha / n, g_rho / n, gp / n)
    return float(val / n), grad


# -- flat parameter vector -------------------------------------------------


class ParamSpace:
    """Maps a :class:`Theta` to a flat vector of free parameters and back.

    Order: beta upper triangle, beta diagonal, alpha, rho (row-major),
    phi upper-triangle entries between different discrete variables,
    node potentials.
    """

    def __init__(self, schema: VariableSchema):
        self.schema = schema
        p, M = schema.p, schema.n_indicators
        self.beta_iu = np.triu_indices(p, 1)
        owner = schema.indicator_owner
        iu = np.triu_indices(M, 1)
        keep = owner[iu[0]] != owner[iu[1]]
        self.phi_iu = (iu[0][keep], iu[1][keep])
        sizes = [len(self.beta_iu[0]), p, p, p * M, len(self.phi_iu[0]), M]
        edges = np.concatenate([[0], np.cumsum(sizes)])
        names = ["beta_off", "beta_diag", "alpha", "rho", "phi_off", "phi_node"]
        self.slices = {k: slice(edges[i], edges[i + 1]) for i, k in enumerate(names)}
        self.size = int(edges[-1])

    def pack(self, t: Theta) -> np.ndarray:
        v = np.empty(self.size)
        sl = self.slices
        v[sl["beta_off"]] = t.beta[self.beta_iu]
        v[sl["beta_diag"]] = np.diag(t.beta)
        v[sl["alpha"]] = t.alpha
        v[sl["rho"]] = t.rho.ravel()
        v[sl["phi_off"]] = t.phi[self.phi_iu]
        v[sl["phi_node"]] = np.diag(t.phi)
        return v

    def unpack(self, v: np.ndarray) -> Theta:
        s = self.schema
        p, M = s.p, s.n_indicators
        sl = self.slices
        beta = np.zeros((p, p))
        beta[self.beta_iu] = v[sl["beta_off"]]
        beta = beta + beta.T
        beta[np.diag_indices(p)] = v[sl["beta_diag"]]
        phi = np.zeros((M, M))
        phi[self.phi_iu] = v[sl["phi_off"]]
        phi = phi + phi.T
        phi[np.diag_indices(M)] = v[sl["phi_node"]]
        return Theta(s, beta, v[sl["alpha"]].copy(), v[sl["rho"]].reshape(p, M).copy(), phi)

    def mask(self, *names) -> np.ndarray:
        m = np.zeros(self.size, dtype=bool)
        for k in names:
            m[self.slices[k]] = True
        return m

    @property
    def penalized(self) -> np.ndarray:
        return self.mask("beta_off", "rho", "phi_off")

    def baseline_mask(self) -> np.ndarray:
        """Penalized coordinates that touch a baseline level."""
        s = self.schema
        isb = s.indicator_is_baseline
        m = np.zeros(self.size, dtype=bool)
        m[self.slices["rho"]] = np.broadcast_to(isb[None, :], (s.p, s.n_indicators)).ravel()
        m[self.slices["phi_off"]] = isb[self.phi_iu[0]] | isb[self.phi_iu[1]]
        return m


# -- penalty ----------------------------------------------------------------


@dataclass
class PenaltyWeights:
    w_cc: np.ndarray
    w_cd: np.ndarray
    w_dd: np.ndarray
    baseline_multiplier: float = 10.0

    def thresholds(self, space: ParamSpace) -> np.ndarray:
        """Per-coordinate weight (before multiplying by lambda)."""
        s = space.schema
        w = np.zeros(space.size)
        w[space.slices["beta_off"]] = self.w_cc[space.beta_iu]
        owner = s.indicator_owner
        w[space.slices["rho"]] = self.w_cd[:, owner].ravel()
        w[space.slices["phi_off"]] = self.w_dd[owner[space.phi_iu[0]], owner[space.phi_iu[1]]]
        w[space.baseline_mask()] *= self.baseline_multiplier
        return w


def _level_spread(codes: np.ndarray, L: int) -> float:
    f = np.bincount(codes, minlength=L) / codes.size
    return float(np.sum(f * (1 - f)))


def compute_penalty_weights(ds: Dataset, baseline_multiplier: float = 10.0) -> PenaltyWeights:
    """w_st = sd_s sd_t, w_sj = sd_s sqrt(sum_a p_a(1-p_a)),
    w_rj = sqrt(sum_a p_a(1-p_a) * sum_b q_b(1-q_b)), from the data at hand."""
    s = ds.schema
    with np.errstate(over="ignore", invalid="ignore"):
        sd = ds.continuous.std(axis=0, ddof=1) if ds.n > 1 else np.ones(s.p)
    if not np.all(np.isfinite(sd)):
        bad = [v.name for v, ok in zip(s.continuous, np.isfinite(sd)) if not ok]
        raise NumericalError(f"standard deviation overflows for {', '.join(bad)}")
    spread = np.array([_level_spread(ds.discrete[:, j], L) for j, L in enumerate(s.n_levels)])
    return PenaltyWeights(
        w_cc=np.outer(sd, sd),
        w_cd=np.outer(sd, np.sqrt(spread)),
        w_dd=np.sqrt(np.outer(spread, spread)),
        baseline_multiplier=baseline_multiplier,
    )


def penalty_value(theta: Theta, w: PenaltyWeights, lam: float) -> float:
    """lambda * weighted L1 norm over off-diagonal beta, all rho entries and
    off-diagonal phi blocks (each symmetric pair once)."""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    space = ParamSpace(theta.schema)
    v = space.pack(theta)
    return float(lam * np.sum(w.thresholds(space) * np.abs(v)))


def default_threads() -> int:
    env = os.environ.get("MIXGM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
