"""Univariate association screening, confounder-adjusted regressions, and
the top-association vs. top-neighbour comparison.

Significance is reported as -log10(p), computed from log survival functions
so that it stays accurate far below float underflow, and capped at
``P_CAP`` (p = 1e-300).
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import Dataset
from .errors import DataError
from .graph import aggregate, neighbors_ranked
from .theta import Theta

log = logging.getLogger(__name__)

P_CAP = 300.0
LN10 = math.log(10.0)


@dataclass
class AssociationRecord:
    response: str
    predictor: str
    neg_log10_p: float
    coefficient: float
    rank: int = 0
    top: bool = False
    flags: tuple[str, ...] = ()


def _cap(logp: float) -> float:
    """-log10 p from natural-log p, clipped to [0, P_CAP]."""
    if math.isnan(logp):
        return 0.0
    return float(min(max(-logp / LN10, 0.0), P_CAP))


def _design_columns(ds: Dataset, name: str) -> np.ndarray:
    """Continuous column, or non-baseline indicator columns of a discrete variable."""
    kind, idx = ds.schema.locate(name)
    if kind == "continuous":
        return ds.continuous[:, idx:idx + 1].astype(float)
    v = ds.schema.discrete[idx]
    codes = ds.discrete[:, idx]
    keep = [k for k in range(len(v.levels)) if k != v.baseline_index]
    return np.stack([(codes == k).astype(float) for k in keep], axis=1)


def _degenerate(cols: np.ndarray) -> bool:
    return bool(np.all(np.ptp(cols, axis=0) == 0))


def _is_collinear(X: np.ndarray) -> bool:
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0):
        return True
    return np.linalg.matrix_rank(X / scale, tol=1e-10 * math.sqrt(X.shape[0])) < X.shape[1]


@dataclass
class _Test:
    logp: float
    coef: float
    flags: tuple[str, ...] = ()


def _ols_test(y: np.ndarray, X: np.ndarray, test_cols: list[int]) -> _Test:
    n, k = X.shape
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    df = n - k
    if df <= 0:
        return _Test(0.0, float("nan"), ("underdetermined",))
    sigma2 = float(resid @ resid) / df
    coef = beta[test_cols]
    big = test_cols[int(np.argmax(np.abs(coef)))]
    if sigma2 <= 1e-28 * max(1.0, float(y @ y) / n):
        # perfect fit: p underflows; capped
        return _Test(-math.inf, float(beta[big]), ("perfect_fit",))
    XtX_inv = np.linalg.inv(X.T @ X)
    if len(test_cols) == 1:
        c = test_cols[0]
        t = beta[c] / math.sqrt(sigma2 * XtX_inv[c, c])
        return _Test(math.log(2.0) + stats.t.logsf(abs(t), df), float(beta[c]))
    V = sigma2 * XtX_inv[np.ix_(test_cols, test_cols)]
    wald = float(coef @ np.linalg.solve(V, coef))
    m = len(test_cols)
    return _Test(stats.f.logsf(wald / m, m, df), float(beta[big]))


def _logit_test(y: np.ndarray, X: np.ndarray, test_cols: list[int]) -> _Test:
    import statsmodels.api as sm
    from statsmodels.tools.sm_exceptions import PerfectSeparationError, PerfectSeparationWarning

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", PerfectSeparationWarning)
            warnings.simplefilter("ignore", RuntimeWarning)
            res = sm.Logit(y, X).fit(disp=0, method="newton", maxiter=100)
    except (PerfectSeparationError, PerfectSeparationWarning):
        return _Test(-math.inf, float("nan"), ("separation",))
    except np.linalg.LinAlgError:
        return _Test(0.0, float("nan"), ("collinear",))
    params = np.asarray(res.params)
    coef = params[test_cols]
    big = test_cols[int(np.argmax(np.abs(coef)))]
    fitted = np.asarray(res.predict())
    if np.any(fitted < 1e-10) and np.any(fitted > 1 - 1e-10) and abs(params[big]) > 15:
        return _Test(-math.inf, float(params[big]), ("separation",))
    cov = np.asarray(res.cov_params())
    if len(test_cols) == 1:
        c = test_cols[0]
        se = math.sqrt(cov[c, c])
        z = params[c] / se
        return _Test(math.log(2.0) + stats.norm.logsf(abs(z)), float(params[c]))
    V = cov[np.ix_(test_cols, test_cols)]
    wald = float(coef @ np.linalg.solve(V, coef))
    return _Test(stats.chi2.logsf(wald, len(test_cols)), float(params[big]))


def _association(ds: Dataset, response: str, predictor: str, confounders=()) -> _Test:
    P = _design_columns(ds, predictor)
    if _degenerate(P):
        return _Test(0.0, 0.0, ("degenerate_predictor",))
    blocks = [np.ones((ds.n, 1)), P] + [_design_columns(ds, c) for c in confounders]
    X = np.hstack(blocks)
    if _is_collinear(X):
        return _Test(0.0, float("nan"), ("collinear",))
    test_cols = list(range(1, 1 + P.shape[1]))
    kind, idx = ds.schema.locate(response)
    if kind == "continuous":
        return _ols_test(ds.continuous[:, idx], X, test_cols)
    v = ds.schema.discrete[idx]
    codes = ds.discrete[:, idx]
    b = v.baseline_index
    best = None
    # one-vs-baseline logistic fits; the most significant level is reported
    for k in range(len(v.levels)):
        if k == b:
            continue
        rows = (codes == k) | (codes == b) if len(v.levels) > 2 else slice(None)
        Xk = X[rows]
        yk = (codes[rows] == k).astype(float)
        if yk.min() == yk.max():
            continue
        if _is_collinear(Xk):
            res = _Test(0.0, float("nan"), ("collinear",))
        else:
            res = _logit_test(yk, Xk, test_cols)
        if best is None or res.logp < best.logp:
            best = res
    return best if best is not None else _Test(0.0, float("nan"), ("single_class",))


def univariate_screen(ds: Dataset, response: str, predictors=None) -> list[AssociationRecord]:
    """Regress ``response`` on each other variable separately.

    Linear regression with a t-test for continuous responses, logistic
    regression with a Wald test for discrete ones. Records come back sorted
    by -log10 p (descending; ties in variable order), ranks starting at 1.
    """
    kind, idx = ds.schema.locate(response)
    col = ds.continuous[:, idx] if kind == "continuous" else ds.discrete[:, idx]
    if np.ptp(col) == 0:
        raise DataError(f"response {response!r} is constant (zero variance or a single class)")
    names = ds.schema.model_order
    if predictors is None:
        predictors = [nm for nm in names if nm != response]
    recs = []
    for nm in predictors:
        t = _association(ds, response, nm)
        recs.append(AssociationRecord(response, nm, _cap(t.logp), t.coef, flags=t.flags))
    order = sorted(range(len(recs)), key=lambda k: (-recs[k].neg_log10_p, k))
    out = []
    for rank, k in enumerate(order, start=1):
        r = recs[k]
        r.rank = rank
        r.top = rank == 1
        out.append(r)
    return out


def adjusted_association(ds: Dataset, response: str, predictor: str, confounders=()) -> AssociationRecord:
    """Partial significance of ``predictor`` in a joint regression with ``confounders``."""
    confounders = list(confounders)
    if response in confounders:
        raise ValueError("confounders must exclude the response")
    if predictor in confounders:
        # the design repeats the predictor's columns
        return AssociationRecord(response, predictor, 0.0, math.nan, flags=("collinear",))
    t = _association(ds, response, predictor, confounders)
    return AssociationRecord(response, predictor, _cap(t.logp), t.coef, flags=t.flags)


def residual_adjust(ds: Dataset, target: str, confounders=()) -> tuple[np.ndarray, bool]:
    """Residuals of a linear regression of ``target`` on ``confounders``
    (intercept included), and whether the design was collinear."""
    kind, idx = ds.schema.locate(target)
    if kind != "continuous":
        raise ValueError(f"{target!r} is not continuous")
    y = ds.continuous[:, idx]
    X = np.hstack([np.ones((ds.n, 1))] + [_design_columns(ds, c) for c in confounders])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return y - X @ beta, _is_collinear(X)


def two_sample_t(a, b, equal_var: bool = True) -> tuple[float, float]:
    """Two-sided Student t-test (pooled variance); Welch with ``equal_var=False``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each group needs at least 2 values")
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        raise ValueError("zero pooled variance")
    res = stats.ttest_ind(a, b, equal_var=equal_var)
    return float(res.statistic), float(res.pvalue)


# -- MGM vs univariate comparison -------------------------------------------


@dataclass
class ComparisonRow:
    response: str
    univariate_top: str
    mgm_top: str
    univariate_confounders: tuple[str, ...]
    mgm_confounders: tuple[str, ...]
    univariate_score: float
    mgm_score: float
    difference: float
    rank_percentile: float = math.nan
    drawn_indices: tuple[int, ...] = ()


@dataclass
class Comparison:
    mode: str
    rows: list[ComparisonRow]
    skipped: list[str] = field(default_factory=list)

    @property
    def differences(self) -> np.ndarray:
        return np.array([r.difference for r in self.rows])

    def summary(self) -> dict:
        d = self.differences
        if d.size == 0:
            return {"mode": self.mode, "n": 0, "skipped": len(self.skipped)}
        return {
            "mode": self.mode,
            "n": int(d.size),
            "skipped": len(self.skipped),
            "median_difference": float(np.median(d)),
            "share_positive": float(np.mean(d > 0)),
            "share_negative": float(np.mean(d < 0)),
            "share_zero": float(np.mean(d == 0)),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["response", "univariate_top", "mgm_top", "univariate_neg_log10_p", "mgm_neg_log10_p",
                        "difference", "rank_percentile", "univariate_confounders", "mgm_confounders",
                        "drawn_indices"])
            for r in self.rows:
                w.writerow([r.response, r.univariate_top, r.mgm_top, repr(r.univariate_score),
                            repr(r.mgm_score), repr(r.difference), repr(r.rank_percentile),
                            ";".join(r.univariate_confounders), ";".join(r.mgm_confounders),
                            ";".join(map(str, r.drawn_indices))])


def rank_percentiles(values) -> np.ndarray:
    """0 for the smallest value, 1 for the largest, ties averaged."""
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return np.array([0.5])
    return (stats.rankdata(v, method="average") - 1) / (v.size - 1)


def compare_top_features(ds: Dataset, theta: Theta, mode: str = "top5", seed: int = 0,
                         n_adjust: int = 5, pool_size: int = 10, responses=None,
                         edge_mode: str = "maxabs") -> Comparison:
    """Contrast the univariate top association with the top MGM neighbour.

    For each response, ``mode`` selects the adjustment:

    - ``"none"``: no confounders.
    - ``"top5"``: each method adjusts its top feature for its own next
      ``n_adjust`` ranked features.
    - ``"random5of10"``: both methods adjust for the same ``n_adjust``
      features drawn at random from univariate ranks 2 .. ``pool_size`` + 1.

    The difference is MGM score minus univariate score (-log10 p). Responses
    whose MGM neighbourhood is empty are skipped.
    """
    if mode not in ("none", "top5", "random5of10"):
        raise ValueError(f"unknown comparison mode {mode!r}")
    g = aggregate(theta, mode=edge_mode)
    rng = np.random.default_rng(seed)
    responses = responses or ds.schema.model_order
    rows, skipped = [], []
    for resp in responses:
        nbrs = [nm for nm, _ in neighbors_ranked(g, resp)]
        if not nbrs:
            skipped.append(resp)
            continue
        uni = univariate_screen(ds, resp)
        uni_names = [r.predictor for r in uni]
        u_top, m_top = uni_names[0], nbrs[0]
        drawn: tuple[int, ...] = ()
        if mode == "none":
            u_conf, m_conf = [], []
        elif mode == "top5":
            u_conf = uni_names[1:1 + n_adjust]
            m_conf = nbrs[1:1 + n_adjust]
        else:
            pool = uni_names[1:1 + pool_size]
            k = min(n_adjust, len(pool))
            drawn = tuple(sorted(int(i) for i in rng.choice(len(pool), size=k, replace=False)))
            shared = [pool[i] for i in drawn]
            u_conf = [c for c in shared if c != u_top]
            m_conf = [c for c in shared if c != m_top]
            log.debug("response %s: drawn univariate ranks %s", resp, [i + 2 for i in drawn])
        a = adjusted_association(ds, resp, u_top, u_conf)
        b = adjusted_association(ds, resp, m_top, m_conf)
        rows.append(ComparisonRow(resp, u_top, m_top, tuple(u_conf), tuple(m_conf),
                                  a.neg_log10_p, b.neg_log10_p, b.neg_log10_p - a.neg_log10_p,
                                  drawn_indices=drawn))
    if rows:
        for r, pct in zip(rows, rank_percentiles([r.difference for r in rows])):
            r.rank_percentile = float(pct)
    return Comparison(mode, rows, skipped)
