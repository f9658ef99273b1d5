"""Schema-driven loading, preprocessing and splitting of mixed tabular data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml

from .errors import DataError

CATEGORIES = ("clinical", "demographic", "drug", "metabolite", "other")


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "continuous" | "discrete"
    levels: tuple[str, ...] = ()
    baseline: str | None = None
    log2: bool = False
    center: bool = False
    category: str = "other"

    @property
    def is_continuous(self) -> bool:
        return self.kind == "continuous"

    @property
    def baseline_index(self) -> int:
        return self.levels.index(self.baseline)


@dataclass(frozen=True)
class VariableSchema:
    """Ordered variable declarations.

    Continuous and discrete variables may be interleaved in the file; the
    model always works with the continuous block first, then the discrete
    block, each in declaration order.
    """

    variables: tuple[Variable, ...]

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate variable names: {dup}")
        for v in self.variables:
            if v.kind not in ("continuous", "discrete"):
                raise DataError(f"variable {v.name!r}: unknown kind {v.kind!r}")
            if v.category not in CATEGORIES:
                raise DataError(f"variable {v.name!r}: unknown category {v.category!r}")
            if v.kind == "discrete":
                if len(v.levels) < 2:
                    raise DataError(f"variable {v.name!r}: discrete variables need >= 2 levels")
                if len(set(v.levels)) != len(v.levels):
                    raise DataError(f"variable {v.name!r}: duplicate levels")
                if v.baseline not in v.levels:
                    raise DataError(f"variable {v.name!r}: baseline {v.baseline!r} not among levels")
        if len(self.variables) < 2:
            raise DataError("schema needs at least two variables (p + q >= 2)")

    @cached_property
    def continuous(self) -> tuple[Variable, ...]:
        return tuple(v for v in self.variables if v.is_continuous)

    @cached_property
    def discrete(self) -> tuple[Variable, ...]:
        return tuple(v for v in self.variables if not v.is_continuous)

    @property
    def p(self) -> int:
        return len(self.continuous)

    @property
    def q(self) -> int:
        return len(self.discrete)

    @cached_property
    def n_levels(self) -> tuple[int, ...]:
        return tuple(len(v.levels) for v in self.discrete)

    @cached_property
    def baselines(self) -> tuple[int, ...]:
        return tuple(v.baseline_index for v in self.discrete)

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start column of each discrete variable in the stacked one-hot block."""
        return np.concatenate([[0], np.cumsum(self.n_levels)]).astype(int)

    @property
    def n_indicators(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def indicator_owner(self) -> np.ndarray:
        """Discrete variable index owning each one-hot column."""
        return np.repeat(np.arange(self.q), self.n_levels).astype(int)

    @cached_property
    def indicator_is_baseline(self) -> np.ndarray:
        mask = np.zeros(self.n_indicators, dtype=bool)
        for j, b in enumerate(self.baselines):
            mask[self.offsets[j] + b] = True
        return mask

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def model_order(self) -> list[str]:
        return [v.name for v in self.continuous] + [v.name for v in self.discrete]

    def __getitem__(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def locate(self, name: str) -> tuple[str, int]:
        """Return ``("continuous", s)`` or ``("discrete", j)`` for a name."""
        for s, v in enumerate(self.continuous):
            if v.name == name:
                return "continuous", s
        for j, v in enumerate(self.discrete):
            if v.name == name:
                return "discrete", j
        raise KeyError(name)

    # -- (de)serialization -------------------------------------------------

    def to_dict(self) -> dict:
        out = []
        for v in self.variables:
            d = {"name": v.name, "kind": v.kind}
            if v.kind == "discrete":
                d["levels"] = list(v.levels)
                d["baseline"] = v.baseline
            else:
                d["log2"] = v.log2
                d["center"] = v.center
            if v.category != "other":
                d["category"] = v.category
            out.append(d)
        return {"variables": out}

    @classmethod
    def from_dict(cls, d: dict) -> "VariableSchema":
        if not isinstance(d, dict) or "variables" not in d:
            raise DataError("schema must be a mapping with a 'variables' list")
        variables = []
        for i, item in enumerate(d["variables"]):
            try:
                name = str(item["name"])
                kind = str(item["kind"])
            except (KeyError, TypeError):
                raise DataError(f"schema entry {i} needs 'name' and 'kind'") from None
            levels = tuple(str(lv) for lv in item.get("levels", ()))
            baseline = item.get("baseline")
            if kind == "discrete" and baseline is None and levels:
                baseline = levels[0]
            variables.append(Variable(
                name=name,
                kind=kind,
                levels=levels,
                baseline=None if baseline is None else str(baseline),
                log2=bool(item.get("log2", False)),
                center=bool(item.get("center", False)),
                category=str(item.get("category", "other")),
            ))
        return cls(tuple(variables))

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @classmethod
    def load(cls, path) -> "VariableSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))


@dataclass(frozen=True)
class TransformRecord:
    column: str
    operation: str
    parameters: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    """Immutable sample matrix split into a continuous and a discrete block.

    ``continuous`` has shape (n, p) in model order, ``discrete`` (n, q) holds
    level indices in schema-declared level order. ``prescale`` keeps the
    continuous values right before the final standardization so that a
    split can re-derive scaling statistics from the training rows only.
    """

    schema: VariableSchema
    continuous: np.ndarray
    discrete: np.ndarray
    transform_log: tuple[TransformRecord, ...] = ()
    scaling: tuple[np.ndarray, np.ndarray] | None = None
    prescale: np.ndarray | None = None

    def __post_init__(self):
        cont = np.ascontiguousarray(self.continuous, dtype=float)
        disc = np.ascontiguousarray(self.discrete, dtype=np.int64)
        # an empty block carries no row count of its own
        n = cont.shape[0] if self.schema.p else disc.shape[0]
        cont = cont.reshape(n if not self.schema.p else -1, self.schema.p)
        disc = disc.reshape(n if not self.schema.q else -1, self.schema.q)
        if cont.shape[0] != disc.shape[0]:
            raise DataError("continuous and discrete blocks disagree on row count")
        for j, L in enumerate(self.schema.n_levels):
            if disc.shape[0] and (disc[:, j].min() < 0 or disc[:, j].max() >= L):
                raise DataError(f"level index out of range in column {self.schema.discrete[j].name!r}")
        cont.setflags(write=False)
        disc.setflags(write=False)
        object.__setattr__(self, "continuous", cont)
        object.__setattr__(self, "discrete", disc)

    @property
    def n(self) -> int:
        return self.continuous.shape[0]

    @cached_property
    def one_hot(self) -> np.ndarray:
        """Stacked indicator matrix of shape (n, sum L_j)."""
        s = self.schema
        D = np.zeros((self.n, s.n_indicators))
        rows = np.arange(self.n)
        for j in range(s.q):
            D[rows, s.offsets[j] + self.discrete[:, j]] = 1.0
        D.setflags(write=False)
        return D

    def column(self, name: str) -> np.ndarray:
        kind, idx = self.schema.locate(name)
        if kind == "continuous":
            return self.continuous[:, idx]
        return self.discrete[:, idx]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(
            self,
            continuous=self.continuous[rows],
            discrete=self.discrete[rows],
            prescale=None if self.prescale is None else self.prescale[rows],
        )

    def concat(self, other: "Dataset") -> "Dataset":
        return replace(
            self,
            continuous=np.vstack([self.continuous, other.continuous]),
            discrete=np.vstack([self.discrete, other.discrete]),
            prescale=None,
        )

    @property
    def dropped_rows(self) -> int:
        for rec in self.transform_log:
            if rec.operation == "drop_incomplete":
                return rec.parameters["dropped"]
        return 0


# -- CSV io ----------------------------------------------------------------


def _parse_float(cell: str) -> float | None:
    if cell == "":
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_dataset(csv_path, schema_path=None, *, schema: VariableSchema | None = None) -> Dataset:
    """Read a CSV into a :class:`Dataset`, dropping incomplete rows.

    Empty or non-numeric continuous cells count as missing. A discrete cell
    that is non-empty but not a declared level is an error, not a missing
    value.
    """
    if schema is None:
        if schema_path is None:
            raise DataError("a schema is required")
        schema = VariableSchema.load(schema_path)
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{csv_path}: empty file") from None
        declared = set(schema.names)
        for h in header:
            if h not in declared:
                raise DataError(f"unknown column {h!r} (not declared in schema)")
        for name in schema.names:
            if name not in header:
                raise DataError(f"column {name!r} declared in schema but missing from CSV")
        pos = {h: i for i, h in enumerate(header)}
        level_maps = [{lv: k for k, lv in enumerate(v.levels)} for v in schema.discrete]

        cont_rows, disc_rows = [], []
        total = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            total += 1
            if len(row) != len(header):
                continue  # ragged row counts as incomplete
            cvals = [_parse_float(row[pos[v.name]].strip()) for v in schema.continuous]
            dvals = []
            for v, lm in zip(schema.discrete, level_maps):
                cell = row[pos[v.name]].strip()
                if cell == "":
                    dvals.append(None)
                elif cell not in lm:
                    raise DataError(f"row {lineno}, column {v.name!r}: undeclared level {cell!r}")
                else:
                    dvals.append(lm[cell])
            if any(c is None for c in cvals) or any(d is None for d in dvals):
                continue
            cont_rows.append(cvals)
            disc_rows.append(dvals)

    if not cont_rows:
        raise DataError(f"{csv_path}: no complete rows remain after dropping missing cells")
    log = (TransformRecord("*", "drop_incomplete", {"dropped": total - len(cont_rows), "total": total}),)
    return Dataset(
        schema=schema,
        continuous=np.array(cont_rows, dtype=float).reshape(len(cont_rows), schema.p),
        discrete=np.array(disc_rows, dtype=np.int64).reshape(len(disc_rows), schema.q),
        transform_log=log,
    )


def write_dataset(ds: Dataset, csv_path) -> None:
    """Write values in schema column order; reals use ``repr`` (exact round trip)."""
    s = ds.schema
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(s.names)
        for i in range(ds.n):
            row = []
            for v in s.variables:
                kind, idx = s.locate(v.name)
                if kind == "continuous":
                    row.append(repr(float(ds.continuous[i, idx])))
                else:
                    row.append(v.levels[ds.discrete[i, idx]])
            w.writerow(row)


# -- preprocessing ---------------------------------------------------------


def _standardize(values: np.ndarray, names) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = values.mean(axis=0)
    sds = values.std(axis=0, ddof=1) if values.shape[0] > 1 else np.zeros(values.shape[1])
    for name, sd in zip(names, sds):
        if not sd > 0:
            raise DataError(f"column {name!r}: zero variance under standardization")
    return (values - means) / sds, means, sds


def preprocess(ds: Dataset) -> Dataset:
    """Apply log2 (flagged), centering (flagged), then standard units to all
    continuous columns, in that fixed order.

    Standard deviations use ``ddof=1``.
    """
    s = ds.schema
    X = np.array(ds.continuous, dtype=float)
    log = list(ds.transform_log)
    names = [v.name for v in s.continuous]
    for k, v in enumerate(s.continuous):
        if v.log2:
            bad = np.flatnonzero(~(X[:, k] > 0))
            if bad.size:
                raise DataError(
                    f"column {v.name!r}, row {int(bad[0])}: non-positive value {X[bad[0], k]!r} under log2"
                )
            X[:, k] = np.log2(X[:, k])
            log.append(TransformRecord(v.name, "log2"))
    for k, v in enumerate(s.continuous):
        if v.center:
            m = X[:, k].mean()
            X[:, k] -= m
            log.append(TransformRecord(v.name, "center", {"mean": float(m)}))
    prescale = X.copy()
    Z, means, sds = _standardize(X, names)
    for k, name in enumerate(names):
        log.append(TransformRecord(name, "standardize", {"mean": float(means[k]), "sd": float(sds[k])}))
    return replace(ds, continuous=Z, transform_log=tuple(log), scaling=(means, sds), prescale=prescale)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 2 / 3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise DataError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if n < 3:
        raise DataError("need at least 3 rows to split")
    n_train = math.floor(n * spec.train_fraction + 1e-9)
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_train_test(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split. If ``ds`` was standardized, both halves are
    rescaled with statistics from the training rows only."""
    train_idx, test_idx = split_indices(ds.n, spec)
    train, test = ds.subset(train_idx), ds.subset(test_idx)
    if ds.scaling is None or ds.prescale is None:
        return train, test
    names = [v.name for v in ds.schema.continuous]
    Ztr, means, sds = _standardize(train.prescale, names)
    Zte = (test.prescale - means) / sds
    rec = TransformRecord("*", "split", {"train_fraction": spec.train_fraction, "seed": spec.seed})
    log = tuple(r for r in ds.transform_log if r.operation != "standardize") + (rec,) + tuple(
        TransformRecord(name, "standardize", {"mean": float(means[k]), "sd": float(sds[k]), "source": "train"})
        for k, name in enumerate(names)
    )
    train = replace(train, continuous=Ztr, scaling=(means, sds), transform_log=log)
    test = replace(test, continuous=Zte, scaling=(means, sds), transform_log=log)
    return train, test
