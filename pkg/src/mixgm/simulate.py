"""Ground-truth models and Gibbs sampling from the mixed graphical model.

The joint density used throughout is

    log p(x, y) = -1/2 sum_st beta_st x_s x_t + sum_s alpha_s x_s
                  + sum_sj rho_sj(y_j) x_s + sum_r phi_rr(y_r, y_r)
                  + sum_{r<j} phi_rj(y_r, y_j) - log Z

whose node conditionals are exactly the ones in :mod:`mixgm.core`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import offdiag_blocks
from .data import Dataset, Variable, VariableSchema
from .errors import NumericalError
from .graph import MixedGraph, aggregate
from .theta import Theta

DIAGONAL_MARGIN = 0.1


@dataclass
class GroundTruth:
    theta: Theta
    graph: MixedGraph
    generation_seed: int
    density: float

    def save(self, path) -> None:
        d = self.theta.to_dict()
        d["ground_truth"] = {"generation_seed": self.generation_seed, "density": self.density}
        Path(path).write_text(json.dumps(d, indent=1))

    @classmethod
    def load(cls, path) -> "GroundTruth":
        d = json.loads(Path(path).read_text())
        theta = Theta.from_dict(d)
        meta = d.get("ground_truth", {})
        return cls(theta, aggregate(theta), int(meta.get("generation_seed", 0)), float(meta.get("density", 0.0)))


def synthetic_schema(p: int, q: int, levels) -> VariableSchema:
    variables = [Variable(f"x{s + 1}", "continuous") for s in range(p)]
    for j in range(q):
        labels = tuple(str(k) for k in range(levels[j]))
        variables.append(Variable(f"y{j + 1}", "discrete", labels, labels[0]))
    return VariableSchema(tuple(variables))


def random_sparse_theta(p: int, q: int, levels=None, density: float = 0.1, effect_scale: float = 0.5,
                        seed: int = 0, diagonal_base: float = 0.0) -> GroundTruth:
    """Draw a sparse parameter set.

    Each variable pair gets an edge with probability ``density``; every
    non-baseline entry of an edge is uniform on +-[effect_scale/2, effect_scale].
    The beta diagonal is ``diagonal_base + DIAGONAL_MARGIN + sum_t |beta_st|``
    rounded up so that strict diagonal dominance with margin holds, which keeps
    the Gaussian block positive definite.
    """
    if levels is None:
        levels = [2] * q
    levels = list(levels)
    if len(levels) != q:
        raise ValueError("need one level count per discrete variable")
    if not 0 <= density <= 1:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    rng = np.random.default_rng(seed)
    schema = synthetic_schema(p, q, levels)
    theta = Theta.zeros(schema)

    def draw(size):
        mag = rng.uniform(effect_scale / 2, effect_scale, size)
        return mag * rng.choice([-1.0, 1.0], size)

    o = schema.offsets
    beta = np.zeros((p, p))
    for s in range(p):
        for t in range(s + 1, p):
            if rng.random() < density:
                beta[s, t] = beta[t, s] = draw(1)[0]
    for s in range(p):
        for j in range(q):
            if rng.random() < density:
                theta.rho[s, o[j] + 1:o[j + 1]] = draw(levels[j] - 1)
    for r in range(q):
        for j in range(r + 1, q):
            if rng.random() < density:
                blk = np.zeros((levels[r], levels[j]))
                blk[1:, 1:] = draw((levels[r] - 1, levels[j] - 1))
                theta.set_phi_block(r, j, blk)
    diag = np.abs(beta).sum(axis=1) + DIAGONAL_MARGIN + diagonal_base
    # strictly greater than sum + margin
    diag = np.nextafter(diag, np.inf)
    theta.beta = beta + np.diag(diag)
    return GroundTruth(theta, aggregate(theta), seed, density)


def is_diagonally_dominant(beta: np.ndarray, margin: float = 0.0) -> bool:
    d = np.diag(beta)
    off = np.abs(beta - np.diag(d)).sum(axis=1)
    return bool(np.all(d > off + margin))


def gibbs_sample(gt: GroundTruth | Theta, n: int, burn_in: int = 500, thinning: int = 5, seed: int = 0,
                 n_chains: int = 1) -> Dataset:
    """Systematic-scan Gibbs sampler.

    Each sweep visits the continuous nodes in order, then the discrete nodes.
    ``n_chains`` independent chains advance together (vectorized); after
    ``burn_in`` sweeps every ``thinning``-th sweep records one row per chain,
    rows ordered record-major. Output is on the raw (unstandardized) scale.
    """
    theta = gt.theta if isinstance(gt, GroundTruth) else gt
    if burn_in < 0 or thinning < 1 or n < 1 or n_chains < 1:
        raise ValueError("need burn_in >= 0, thinning >= 1, n >= 1, n_chains >= 1")
    s = theta.schema
    p, q, M = s.p, s.q, s.n_indicators
    if p and not is_diagonally_dominant(theta.beta):
        raise NumericalError("beta is not diagonally dominant; refusing to sample an ill-posed model")
    rng = np.random.default_rng(seed)
    K = n_chains
    o = s.offsets
    bd = np.diag(theta.beta).copy()
    boff = theta.beta - np.diag(bd)
    sd = 1.0 / np.sqrt(bd) if p else bd
    phi_off = offdiag_blocks(theta.phi, s)
    node = np.diag(theta.phi).copy()

    X = rng.standard_normal((K, p))
    Y = np.stack([rng.integers(0, L, K) for L in s.n_levels], axis=1) if q else np.zeros((K, 0), int)
    D = np.zeros((K, M))
    for j in range(q):
        D[np.arange(K), o[j] + Y[:, j]] = 1.0

    n_records = -(-n // K)
    out_x = np.empty((n_records, K, p))
    out_y = np.empty((n_records, K, q), dtype=np.int64)
    rows = np.arange(K)
    total = burn_in + n_records * thinning
    rec = 0
    for sweep in range(1, total + 1):
        for k in range(p):
            mean = (theta.alpha[k] + D @ theta.rho[k] - X @ boff[k]) / bd[k]
            X[:, k] = mean + sd[k] * rng.standard_normal(K)
        for r in range(q):
            sl = slice(o[r], o[r + 1])
            score = X @ theta.rho[:, sl] + D @ phi_off[:, sl] + node[sl]
            score -= score.max(axis=1, keepdims=True)
            prob = np.exp(score)
            cum = np.cumsum(prob, axis=1)
            u = rng.random(K) * cum[:, -1]
            new = np.minimum((cum <= u[:, None]).sum(axis=1), s.n_levels[r] - 1)
            D[rows, o[r] + Y[:, r]] = 0.0
            Y[:, r] = new
            D[rows, o[r] + new] = 1.0
        if sweep > burn_in and (sweep - burn_in) % thinning == 0:
            out_x[rec] = X
            out_y[rec] = Y
            rec += 1
    m = n_records * K
    return Dataset(s, out_x.reshape(m, p)[:n], out_y.reshape(m, q)[:n])


def discrete_joint(theta: Theta) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Exact joint distribution of a pure-discrete model by enumeration."""
    s = theta.schema
    if s.p:
        raise ValueError("exact enumeration implemented for pure-discrete models only")
    o = s.offsets
    states = list(itertools.product(*[range(L) for L in s.n_levels]))
    energy = np.empty(len(states))
    for k, y in enumerate(states):
        idx = [o[j] + y[j] for j in range(s.q)]
        e = sum(theta.phi[i, i] for i in idx)
        for r in range(s.q):
            for j in range(r + 1, s.q):
                e += theta.phi[idx[r], idx[j]]
        energy[k] = e
    energy -= energy.max()
    prob = np.exp(energy)
    return states, prob / prob.sum()


def empirical_joint(ds: Dataset, states) -> np.ndarray:
    index = {st: k for k, st in enumerate(states)}
    counts = np.zeros(len(states))
    for row in map(tuple, ds.discrete.tolist()):
        counts[index[row]] += 1
    return counts / ds.n


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def recovery_metrics(truth: MixedGraph, estimate: MixedGraph) -> dict:
    """Edge-set precision/recall/F1 and sign agreement on true positives.

    With no predicted edges precision is reported as 1 and ``empty_estimate``
    is set; with no true positives sign agreement is reported as 1.
    """
    if set(truth.node_names) != set(estimate.node_names):
        raise ValueError("truth and estimate have different node sets")
    t, e = truth.edge_map(), estimate.edge_map()
    tp = [k for k in e if k in t]
    precision = len(tp) / len(e) if e else 1.0
    recall = len(tp) / len(t) if t else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    agree = sum(t[k].sign == e[k].sign for k in tp)
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "sign_agreement": agree / len(tp) if tp else 1.0,
        "true_positives": len(tp),
        "n_true": len(t),
        "n_estimated": len(e),
        "empty_estimate": not e,
    }


def confounded_suite(seed: int = 0, n: int = 2000, n_motifs: int = 6, effect: float = 0.6,
                     noise: float = 1.0, n_binary: int = 2) -> Dataset:
    """Linear common-cause data for the screening-bias experiment.

    Each motif has three independent standard-normal causes ``c1..c3`` and two
    effects ``e1, e2 = effect * (c1 + c2 + c3) + noise``; the two effects are
    marginally the most correlated pair but conditionally independent given
    the causes. In the first ``n_binary`` motifs ``e2`` is dichotomized at 0.
    Six motifs give 30 variables. Output is on the raw scale.
    """
    if not 0 <= n_binary <= n_motifs:
        raise ValueError("n_binary must lie in [0, n_motifs]")
    rng = np.random.default_rng(seed)
    cont_vars, disc_vars, cont_cols, disc_cols = [], [], [], []
    for m in range(n_motifs):
        causes = rng.standard_normal((n, 3))
        signal = effect * causes.sum(axis=1)
        e1 = signal + noise * rng.standard_normal(n)
        e2 = signal + noise * rng.standard_normal(n)
        for k in range(3):
            cont_vars.append(Variable(f"m{m + 1}_c{k + 1}", "continuous"))
            cont_cols.append(causes[:, k])
        cont_vars.append(Variable(f"m{m + 1}_e1", "continuous"))
        cont_cols.append(e1)
        if m < n_binary:
            disc_vars.append(Variable(f"m{m + 1}_e2", "discrete", ("0", "1"), "0"))
            disc_cols.append((e2 > 0).astype(np.int64))
        else:
            cont_vars.append(Variable(f"m{m + 1}_e2", "continuous"))
            cont_cols.append(e2)
    schema = VariableSchema(tuple(cont_vars + disc_vars))
    disc = np.stack(disc_cols, axis=1) if disc_cols else np.zeros((n, 0), dtype=np.int64)
    return Dataset(schema, np.stack(cont_cols, axis=1), disc)
