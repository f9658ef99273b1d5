"""``mixgm`` command line: the analysis pipeline as subcommands.

Settings come from built-in defaults, then a YAML config file (``--config``,
else the path in ``$MIXGM_CONFIG``), then command-line flags, later sources
winning. Every run writes ``manifest_<command>.json`` next to its outputs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .core import compute_penalty_weights, default_threads
from .data import Dataset, SplitSpec, VariableSchema, load_dataset, preprocess, split_train_test, write_dataset
from .errors import DataError, NumericalError
from .graph import aggregate, export, load_json, neighborhood
from .optimizer import SolverConfig, fit
from .prediction import evaluate_node
from .screening import P_CAP, compare_top_features, univariate_screen
from .selection import SelectionConfig, select_model
from .simulate import confounded_suite, gibbs_sample, random_sparse_theta
from .spectra import (DEFAULT_RANGE, DEFAULT_WIDTH, FORMIC_ACID_PPM, Spectrum, bin_spectra,
                      exclude_and_scale, reference_shift)
from .theta import Theta

CONFIG_ENV = "MIXGM_CONFIG"
MANIFEST_VERSION = 1

log = logging.getLogger("mixgm")


class UsageError(Exception):
    pass


# -- configuration ------------------------------------------------------------


@dataclass
class Paths:
    data: str | None = None
    schema: str | None = None
    out: str = "mixgm_out"
    theta: str | None = None
    graph: str | None = None


@dataclass
class SimulateConfig:
    suite: str = "mgm"  # or "confounded"
    p: int = 10
    q: int = 5
    levels: tuple[int, ...] | None = None
    density: float = 0.1
    effect_scale: float = 0.5
    n: int = 2000
    burn_in: int = 500
    thinning: int = 5
    chains: int = 1


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    solver: SolverConfig = field(default_factory=SolverConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    seed: int = 0
    threads: int | None = None
    preprocess: bool = False

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


_SECTIONS = {"paths": Paths, "solver": SolverConfig, "selection": SelectionConfig,
             "split": SplitSpec, "simulate": SimulateConfig}
_TUPLE_FIELDS = {"exponent_grid", "levels"}


def _build(cls, values: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise UsageError(f"unknown {cls.__name__} key(s): {', '.join(sorted(unknown))}")
    values = {k: tuple(v) if k in _TUPLE_FIELDS and v is not None else v for k, v in values.items()}
    # PyYAML reads exponent floats without a dot (1e-6) as strings
    types = {f.name: str(f.type) for f in dataclasses.fields(cls)}
    for k, v in values.items():
        if isinstance(v, str) and types[k].startswith(("float", "int")):
            try:
                values[k] = float(v) if types[k].startswith("float") else int(v)
            except ValueError:
                raise UsageError(f"{cls.__name__}.{k}: expected a number, got {v!r}") from None
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid {cls.__name__}: {exc}") from None


def config_from_dict(d: dict) -> RunConfig:
    d = dict(d or {})
    known = set(_SECTIONS) | {"seed", "threads", "preprocess"}
    unknown = set(d) - known
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    kwargs = {name: _build(cls, d.get(name) or {}) for name, cls in _SECTIONS.items()}
    for k in ("seed", "threads", "preprocess"):
        if k in d:
            kwargs[k] = d[k]
    return RunConfig(**kwargs)


def load_config(path) -> tuple[dict, str | None]:
    """Raw config mapping from YAML (or a run manifest) and the command a
    manifest names, if any."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except ValueError:
        try:
            d = yaml.safe_load(text) or {}
        except yaml.YAMLError:
            raise UsageError(f"config {path} is not valid YAML") from None
    if not isinstance(d, dict):
        raise UsageError(f"config {path} must be a mapping")
    if "manifest_version" in d:
        return d["config"], d.get("command")
    return d, None


def _override(cfg: RunConfig, section: str | None, **values) -> RunConfig:
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return cfg
    if section is None:
        return dataclasses.replace(cfg, **values)
    sub = getattr(cfg, section)
    try:
        return dataclasses.replace(cfg, **{section: dataclasses.replace(sub, **values)})
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def resolve_config(args) -> RunConfig:
    raw = {}
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        raw, _ = load_config(path)
    cfg = config_from_dict(raw)
    cfg = _override(cfg, "paths", data=args.data, schema=args.schema, out=args.out,
                    theta=getattr(args, "theta", None), graph=getattr(args, "graph", None))
    cfg = _override(cfg, None, seed=args.seed, threads=args.threads,
                    preprocess=True if getattr(args, "preprocess", False) else None)
    cfg = _override(cfg, "solver", max_iterations=getattr(args, "max_iterations", None),
                    tolerance=getattr(args, "tolerance", None),
                    fit_diagonal=getattr(args, "fit_diagonal", None))
    cfg = _override(cfg, "selection", gamma=getattr(args, "gamma", None),
                    edge_mode=getattr(args, "edge_mode", None), loglik=getattr(args, "loglik", None))
    cfg = _override(cfg, "split", train_fraction=getattr(args, "train_fraction", None),
                    seed=getattr(args, "split_seed", None))
    if args.command == "simulate":
        cfg = _override(cfg, "simulate", suite=args.suite, p=args.p, q=args.q,
                        levels=tuple(args.levels) if args.levels else None, density=args.density,
                        effect_scale=args.effect_scale, n=args.n, burn_in=args.burn_in,
                        thinning=args.thinning, chains=args.chains)
    threads = cfg.threads if cfg.threads is not None else default_threads()
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    return _override(cfg, "solver", threads=threads)


# -- manifest -----------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _versions() -> dict:
    import networkx
    import scipy
    import statsmodels

    return {"mixgm": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "networkx": networkx.__version__,
            "statsmodels": statsmodels.__version__, "pyyaml": yaml.__version__}


def write_manifest(out: Path, command: str, argv: list[str], cfg: RunConfig, inputs, outputs) -> Path:
    def files(paths):
        return {str(p): _sha256(Path(p)) for p in paths if p and Path(p).is_file()}

    seeds = {"seed": cfg.seed, "split_seed": cfg.split.seed, "solver_seed": cfg.solver.seed}
    doc = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "argv": argv,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "seeds": seeds,
        "inputs": files(inputs),
        "outputs": files(outputs),
        "versions": _versions(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    path = out / f"manifest_{command}.json"
    path.write_text(json.dumps(doc, indent=1, sort_keys=False))
    return path


# -- helpers ------------------------------------------------------------------


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"missing required option {flag}")
    return value


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.paths.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def _load_data(cfg: RunConfig, schema: VariableSchema | None = None) -> Dataset:
    data = _require(cfg.paths.data, "--data")
    if schema is None:
        schema = VariableSchema.load(_require(cfg.paths.schema, "--schema"))
    ds = load_dataset(data, schema=schema)
    return preprocess(ds) if cfg.preprocess else ds


def _load_theta(cfg: RunConfig) -> Theta:
    return Theta.load(_require(cfg.paths.theta, "--theta"))


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=1))
    return path


# -- subcommands --------------------------------------------------------------
# Each returns (summary line, input paths, output paths).


def cmd_ingest(args, cfg):
    out = _outdir(cfg)
    ds = preprocess(_load_data(dataclasses.replace(cfg, preprocess=False)))
    schema_out = out / "schema.yaml"
    ds.schema.dump(schema_out)
    outputs = [schema_out]
    if args.split:
        train, test = split_train_test(ds, cfg.split)
        write_dataset(train, out / "train.csv")
        write_dataset(test, out / "test.csv")
        outputs += [out / "train.csv", out / "test.csv"]
        log_records = train.transform_log
        msg = f"ingested {ds.n} rows ({ds.dropped_rows} dropped); split {train.n}/{test.n}"
    else:
        write_dataset(ds, out / "data.csv")
        outputs.append(out / "data.csv")
        log_records = ds.transform_log
        msg = f"ingested {ds.n} rows ({ds.dropped_rows} dropped)"
    outputs.append(_write_json(out / "transforms.json",
                               [dataclasses.asdict(r) for r in log_records]))
    return msg, [cfg.paths.data, cfg.paths.schema], outputs


def cmd_bin(args, cfg):
    out = _outdir(cfg)
    if not args.spectra:
        raise UsageError("missing required option --spectra")
    files = []
    for s in args.spectra:
        p = Path(s)
        files += sorted(p.glob("*.csv")) if p.is_dir() else [p]
    if not files:
        raise DataError("no spectrum files found")
    spectra = [Spectrum.read_csv(f) for f in files]
    if args.observed_ref is not None:
        spectra = [reference_shift(s, args.observed_ref, FORMIC_ACID_PPM) for s in spectra]
    raw = bin_spectra(spectra, args.range_high, args.range_low, args.width)
    raw.write_csv(out / "buckets_raw.csv")
    scaled = exclude_and_scale(raw)
    scaled.write_csv(out / "buckets.csv")
    msg = f"binned {len(spectra)} spectra into {raw.matrix.shape[1]} buckets; {scaled.matrix.shape[1]} kept"
    return msg, files, [out / "buckets_raw.csv", out / "buckets.csv"]


def cmd_fit(args, cfg):
    out = _outdir(cfg)
    ds = _load_data(cfg)
    lam = _require(args.lam, "--lambda")
    res = fit(ds, lam, compute_penalty_weights(ds, cfg.selection.baseline_multiplier), cfg.solver)
    res.theta.save(out / "theta.json")
    outputs = [out / "theta.json"]
    if args.iteration_log:
        res.write_log(out / "fit_log.csv")
        outputs.append(out / "fit_log.csv")
    state = "converged" if res.converged else "not converged"
    msg = f"fit lambda={lam:g}: objective {res.objective:.6g}, {res.iterations} iterations, {state}"
    return msg, [cfg.paths.data, cfg.paths.schema], outputs


def cmd_select(args, cfg):
    out = _outdir(cfg)
    ds = _load_data(cfg)
    sel = select_model(ds, cfg.selection, cfg.solver)
    sel.write_table(out / "selection.csv")
    sel.theta_star.save(out / "theta.json")
    g = aggregate(sel.theta_star)
    export(g, "json", out / "graph.json")
    best = next(r for r in sel.table if r.lam == sel.lambda_star)
    msg = f"selected lambda={sel.lambda_star:.6g} (EBIC {best.ebic:.6g}, {len(g.edges)} edges)"
    return msg, [cfg.paths.data, cfg.paths.schema], [out / "selection.csv", out / "theta.json", out / "graph.json"]


def _graph(cfg):
    if cfg.paths.graph:
        return load_json(cfg.paths.graph), cfg.paths.graph
    return aggregate(_load_theta(cfg)), cfg.paths.theta


def cmd_neighborhood(args, cfg):
    out = _outdir(cfg)
    g, src = _graph(cfg)
    node = _require(args.node, "--node")
    try:
        nb = neighborhood(g, node)
    except KeyError:
        raise UsageError(f"unknown node {node!r}") from None
    outputs = []
    for fmt in ("json", "dot"):
        path = out / f"neighborhood_{node}.{fmt}"
        export(nb, fmt, path)
        outputs.append(path)
    ranked = ", ".join(f"{e.b if e.a == node else e.a}({e.sign}{e.weight:.3g})" for e in nb.edges)
    return f"{node}: {len(nb.edges)} neighbours" + (f": {ranked}" if ranked else ""), [src], outputs


def cmd_predict(args, cfg):
    out = _outdir(cfg)
    theta = _load_theta(cfg)
    schema = VariableSchema.load(cfg.paths.schema) if cfg.paths.schema else theta.schema
    ds = _load_data(cfg, schema)
    nodes = args.node or theta.schema.model_order
    summaries, outputs = [], []
    for node in nodes:
        try:
            kind, idx = theta.schema.locate(node)
        except KeyError:
            raise UsageError(f"unknown node {node!r}") from None
        try:
            rep = evaluate_node(theta, ds, node)
        except ValueError as exc:
            # e.g. an isolated node has a constant prediction
            summaries.append({"node": node, "kind": kind, "n": ds.n, "error": str(exc)})
            continue
        levels = list(theta.schema.discrete[idx].levels) if kind == "discrete" else None
        summaries.append(rep.write(out, levels))
        outputs += [out / f"predictions_{node}.csv", out / f"metrics_{node}.json"]
        if rep.roc_points:
            outputs.append(out / f"roc_{node}.csv")
    outputs.append(_write_json(out / "metrics.json", summaries))
    def short(s):
        if "error" in s:
            return f"{s['node']} n/a"
        return f"{s['node']} {'r' if 'correlation' in s else 'AUC'}={s.get('correlation', s.get('auc')):.3f}"

    parts = [short(s) for s in summaries[:5]]
    more = f" (+{len(summaries) - 5} more)" if len(summaries) > 5 else ""
    return "predicted " + ", ".join(parts) + more, [cfg.paths.theta, cfg.paths.data], outputs


def cmd_screen(args, cfg):
    out = _outdir(cfg)
    ds = _load_data(cfg)
    responses = args.response or ds.schema.model_order
    path = out / "screen.csv"
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["response", "predictor", "rank", "neg_log10_p", "coefficient", "top", "flags"])
        for resp in responses:
            try:
                recs = univariate_screen(ds, resp)
            except KeyError:
                raise UsageError(f"unknown variable {resp!r}") from None
            for r in recs:
                w.writerow([r.response, r.predictor, r.rank, repr(r.neg_log10_p), repr(r.coefficient),
                            int(r.top), ";".join(r.flags)])
    meta = _write_json(out / "screen_meta.json", {"neg_log10_p_cap": P_CAP, "responses": len(responses)})
    return (f"screened {len(responses)} responses (-log10 p capped at {P_CAP:g})",
            [cfg.paths.data, cfg.paths.schema], [path, meta])


def cmd_compare(args, cfg):
    out = _outdir(cfg)
    ds = _load_data(cfg)
    theta = _load_theta(cfg)
    if theta.schema.to_dict() != ds.schema.to_dict():
        raise DataError("theta and data schemas differ")
    cmp = compare_top_features(ds, theta, args.mode, seed=cfg.seed)
    cmp.write_csv(out / f"comparison_{args.mode}.csv")
    summary = cmp.summary()
    summary["skipped_responses"] = cmp.skipped
    _write_json(out / f"comparison_{args.mode}_summary.json", summary)
    med = summary.get("median_difference")
    msg = (f"compared {summary['n']} responses ({summary['skipped']} skipped); "
           + (f"median difference {med:.3g}, {summary['share_positive']:.0%} positive" if med is not None
              else "nothing to compare"))
    return msg, [cfg.paths.data, cfg.paths.theta], [out / f"comparison_{args.mode}.csv",
                                                    out / f"comparison_{args.mode}_summary.json"]


def cmd_simulate(args, cfg):
    out = _outdir(cfg)
    sc = cfg.simulate
    outputs = [out / "data.csv", out / "schema.yaml"]
    if sc.suite == "confounded":
        ds = confounded_suite(cfg.seed, n=sc.n)
        msg = f"simulated confounded suite: {ds.n} rows, {len(ds.schema.names)} variables"
    elif sc.suite == "mgm":
        gt = random_sparse_theta(sc.p, sc.q, sc.levels, sc.density, sc.effect_scale, seed=cfg.seed)
        ds = gibbs_sample(gt, sc.n, sc.burn_in, sc.thinning, seed=cfg.seed, n_chains=sc.chains)
        gt.save(out / "truth.json")
        export(gt.graph, "json", out / "truth_graph.json")
        outputs += [out / "truth.json", out / "truth_graph.json"]
        msg = f"simulated {ds.n} rows from a model with {len(gt.graph.edges)} edges"
    else:
        raise UsageError(f"unknown suite {sc.suite!r}")
    write_dataset(ds, out / "data.csv")
    ds.schema.dump(out / "schema.yaml")
    return msg, [], outputs


def cmd_export(args, cfg):
    out = _outdir(cfg)
    g, src = _graph(cfg)
    path = out / f"graph.{args.format}"
    export(g, args.format, path)
    return f"exported {len(g.nodes)} nodes and {len(g.edges)} edges to {path}", [src], [path]


COMMANDS = {
    "ingest": cmd_ingest, "bin": cmd_bin, "fit": cmd_fit, "select": cmd_select,
    "neighborhood": cmd_neighborhood, "predict": cmd_predict, "screen": cmd_screen,
    "compare": cmd_compare, "simulate": cmd_simulate, "export": cmd_export,
}


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help=f"YAML config or run manifest (default: ${CONFIG_ENV})")
    g.add_argument("--data", help="input CSV")
    g.add_argument("--schema", help="variable schema YAML")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    g.add_argument("--preprocess", action="store_true", help="apply log2/center/standardize on load")
    g.add_argument("-v", "--verbose", action="store_true")

    solver = _Parser(add_help=False)
    g = solver.add_argument_group("solver options")
    g.add_argument("--max-iterations", type=int)
    g.add_argument("--tolerance", type=float)
    g.add_argument("--fit-diagonal", type=_bool, metavar="BOOL")

    model = _Parser(add_help=False)
    model.add_argument("--theta", help="fitted parameter JSON")

    p = _Parser(prog="mixgm", description="Sparse mixed graphical models.")
    p.add_argument("--version", action="version", version=f"mixgm {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="validate, preprocess and split a CSV")
    s.add_argument("--split", action="store_true", help="write train.csv/test.csv")
    s.add_argument("--train-fraction", type=float)
    s.add_argument("--split-seed", type=int)

    s = sub.add_parser("bin", parents=[common], help="bucket raw spectra")
    s.add_argument("--spectra", nargs="+", help="spectrum CSV files or directories")
    s.add_argument("--observed-ref", type=float, help="observed ppm of the reference peak")
    s.add_argument("--range-high", type=float, default=DEFAULT_RANGE[0])
    s.add_argument("--range-low", type=float, default=DEFAULT_RANGE[1])
    s.add_argument("--width", type=float, default=DEFAULT_WIDTH)

    s = sub.add_parser("fit", parents=[common, solver], help="fit at one lambda")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--iteration-log", action="store_true", help="write fit_log.csv")

    s = sub.add_parser("select", parents=[common, solver], help="EBIC lambda search")
    s.add_argument("--gamma", type=float)
    s.add_argument("--edge-mode", choices=["scalar", "group"])
    s.add_argument("--loglik", choices=["refit", "penalized"])

    s = sub.add_parser("neighborhood", parents=[common, model], help="first-order neighbourhood of a node")
    s.add_argument("--graph", help="graph JSON (instead of --theta)")
    s.add_argument("--node")

    s = sub.add_parser("predict", parents=[common, model], help="predict nodes from their neighbours")
    s.add_argument("--node", action="append", help="node to predict (repeatable; default all)")

    s = sub.add_parser("screen", parents=[common], help="univariate association screen")
    s.add_argument("--response", action="append", help="response variable (repeatable; default all)")

    s = sub.add_parser("compare", parents=[common, model], help="MGM vs univariate top features")
    s.add_argument("--mode", choices=["top5", "random5of10", "none"], default="top5")

    s = sub.add_parser("simulate", parents=[common], help="draw synthetic data")
    s.add_argument("--suite", choices=["mgm", "confounded"])
    s.add_argument("--p", type=int)
    s.add_argument("--q", type=int)
    s.add_argument("--levels", type=int, nargs="+")
    s.add_argument("--density", type=float)
    s.add_argument("--effect-scale", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--burn-in", type=int)
    s.add_argument("--thinning", type=int)
    s.add_argument("--chains", type=int)

    s = sub.add_parser("export", parents=[common, model], help="write the graph as json/graphml/dot")
    s.add_argument("--graph", help="graph JSON (instead of --theta)")
    s.add_argument("--format", choices=["json", "graphml", "dot"], default="json")
    return p


def replay_argv(manifest_path) -> list[str]:
    """Command line that re-executes a recorded run from its manifest alone.

    The manifest's resolved config replaces any config file named in the
    original arguments; the remaining flags were already folded into it.
    """
    try:
        doc = json.loads(Path(manifest_path).read_text())
        command, argv = doc["command"], list(doc["argv"])
    except (OSError, ValueError, KeyError, TypeError):
        raise UsageError(f"{manifest_path} is not a run manifest") from None
    cleaned, skip = [], False
    for a in argv:
        if skip:
            skip = False
        elif a == "--config":
            skip = True
        elif not a.startswith("--config="):
            cleaned.append(a)
    if not cleaned or cleaned[0] != command:
        raise UsageError(f"{manifest_path}: argv does not start with {command!r}")
    return cleaned + ["--config", str(manifest_path)]


def run(argv: list[str]) -> int:
    try:
        if argv[:1] == ["replay"]:
            if len(argv) != 2:
                raise UsageError("usage: mixgm replay MANIFEST")
            argv = replay_argv(argv[1])
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("no command given (try --help)")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        msg, inputs, outputs = COMMANDS[args.command](args, cfg)
        write_manifest(Path(cfg.paths.out), args.command, argv, cfg, inputs, outputs)
    except UsageError as exc:
        print(f"mixgm: usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError, yaml.YAMLError) as exc:
        print(f"mixgm: data error: {_one_line(exc)}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"mixgm: numerical failure: {_one_line(exc)}", file=sys.stderr)
        return 3
    print(msg)
    return 0


def _one_line(exc: BaseException) -> str:
    if isinstance(exc, OSError) and exc.filename:
        return f"{exc.strerror}: {exc.filename}"
    return " ".join(str(exc).split())


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
