"""Signed weighted mixed graph built from fitted parameters."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .core import ZERO_TOL
from .data import VariableSchema
from .theta import Theta

JSON_FORMAT = "mixgm-graph"


@dataclass(frozen=True)
class Node:
    name: str
    category: str = "other"
    kind: str = "continuous"


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    weight: float
    sign: str  # "+" or "-"
    group_values: tuple = ()
    rank: int | None = None

    @property
    def signed_weight(self) -> float:
        return self.weight if self.sign == "+" else -self.weight

    @property
    def key(self) -> frozenset:
        return frozenset((self.a, self.b))


@dataclass
class MixedGraph:
    nodes: list[Node]
    edges: list[Edge] = field(default_factory=list)

    def __post_init__(self):
        names = {n.name for n in self.nodes}
        seen = set()
        for e in self.edges:
            if e.a == e.b:
                raise ValueError(f"self-loop on {e.a!r}")
            if e.a not in names or e.b not in names:
                raise ValueError(f"edge {e.a!r}-{e.b!r} references an unknown node")
            if e.key in seen:
                raise ValueError(f"duplicate edge {e.a!r}-{e.b!r}")
            if not e.weight > 0:
                raise ValueError(f"edge {e.a!r}-{e.b!r} must have positive weight")
            seen.add(e.key)

    @property
    def node_names(self) -> list[str]:
        return [n.name for n in self.nodes]

    def edge_map(self) -> dict[frozenset, Edge]:
        return {e.key: e for e in self.edges}

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        for n in self.nodes:
            g.add_node(n.name, category=n.category, kind=n.kind)
        for e in self.edges:
            attrs = dict(weight=e.weight, sign=e.sign, visual_weight=visual_weight(e.weight),
                         group_values=json.dumps(list(e.group_values)))
            if e.rank is not None:
                attrs["rank"] = e.rank
            g.add_edge(e.a, e.b, **attrs)
        return g


def visual_weight(x: float) -> float:
    """Display transform ``log(1 + 10 x)`` for non-negative edge weights."""
    if x < 0:
        raise ValueError(f"visual weight needs x >= 0, got {x}")
    return math.log1p(10.0 * x)


def _reduce(values: np.ndarray, mode: str) -> tuple[float, str]:
    k = int(np.argmax(np.abs(values)))
    sign = "+" if values[k] > 0 else "-"
    if mode == "maxabs":
        return float(abs(values[k])), sign
    if mode == "sumabs":
        return float(np.abs(values).sum()), sign
    raise ValueError(f"unknown aggregation mode {mode!r}")


def aggregate(theta: Theta, schema: VariableSchema | None = None, mode: str = "maxabs") -> MixedGraph:
    """Collapse parameter groups into one signed edge per variable pair.

    Continuous-continuous edges carry ``-beta_st`` (a negative coupling in the
    precision means positive association). Grouped edges use the non-baseline
    entry of largest magnitude (``mode="maxabs"``) or the sum of absolute
    non-baseline entries (``mode="sumabs"``), with the sign of the largest.
    """
    schema = schema or theta.schema
    cont, disc = schema.continuous, schema.discrete
    nodes = [Node(v.name, v.category, v.kind) for v in cont + disc]
    edges = []
    p, q = schema.p, schema.q
    for s in range(p):
        for t in range(s + 1, p):
            b = theta.beta[s, t]
            if abs(b) > ZERO_TOL:
                edges.append(Edge(cont[s].name, cont[t].name, float(abs(b)), "+" if -b > 0 else "-", (float(b),)))
    base = schema.baselines
    for s in range(p):
        for j in range(q):
            vec = theta.rho_block(s, j)
            keep = np.delete(vec, base[j])
            if np.any(np.abs(keep) > ZERO_TOL):
                w, sg = _reduce(keep, mode)
                edges.append(Edge(cont[s].name, disc[j].name, w, sg, tuple(float(x) for x in vec)))
    for r in range(q):
        for j in range(r + 1, q):
            blk = theta.phi_block(r, j)
            keep = np.delete(np.delete(blk, base[r], axis=0), base[j], axis=1).ravel()
            if np.any(np.abs(keep) > ZERO_TOL):
                w, sg = _reduce(keep, mode)
                edges.append(Edge(disc[r].name, disc[j].name, w, sg,
                                  tuple(tuple(float(x) for x in row) for row in blk)))
    return MixedGraph(nodes, edges)


def rank_edges(edges) -> list[Edge]:
    """Sort by |weight| descending, positive before negative at ties."""
    ordered = sorted(edges, key=lambda e: (-e.weight, 0 if e.sign == "+" else 1))
    return [Edge(e.a, e.b, e.weight, e.sign, e.group_values, k + 1) for k, e in enumerate(ordered)]


def neighborhood(g: MixedGraph, node: str) -> MixedGraph:
    """First-order neighborhood: ``node``, its neighbours, and only the edges
    incident to ``node``, ranked by strength (the clockwise display order)."""
    by_name = {n.name: n for n in g.nodes}
    if node not in by_name:
        raise KeyError(f"unknown node {node!r}")
    incident = rank_edges([e for e in g.edges if node in (e.a, e.b)])
    others = [e.b if e.a == node else e.a for e in incident]
    return MixedGraph([by_name[node]] + [by_name[o] for o in others], incident)


def neighbors_ranked(g: MixedGraph, node: str) -> list[tuple[str, Edge]]:
    nb = neighborhood(g, node)
    return [(e.b if e.a == node else e.a, e) for e in nb.edges]


# -- export -----------------------------------------------------------------


def to_json_dict(g: MixedGraph) -> dict:
    def edge(e):
        d = asdict(e)
        d["group_values"] = list(e.group_values)
        d["visual_weight"] = visual_weight(e.weight)
        return d

    return {
        "format": JSON_FORMAT,
        "version": 1,
        "nodes": [asdict(n) for n in g.nodes],
        "edges": [edge(e) for e in g.edges],
    }


def _tuplify(x):
    return tuple(_tuplify(v) for v in x) if isinstance(x, list) else x


def from_json_dict(d: dict) -> MixedGraph:
    if d.get("format") != JSON_FORMAT:
        raise ValueError("not a mixgm graph file")
    nodes = [Node(**n) for n in d["nodes"]]
    edges = [Edge(e["a"], e["b"], e["weight"], e["sign"], _tuplify(e["group_values"]), e.get("rank"))
             for e in d["edges"]]
    return MixedGraph(nodes, edges)


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: MixedGraph) -> str:
    lines = ["graph mixgm {"]
    for n in g.nodes:
        shape = "circle" if n.kind == "continuous" else "box"
        lines.append(f"  {_dot_id(n.name)} [shape={shape}, category={_dot_id(n.category)}, kind={n.kind}];")
    for e in g.edges:
        color = "blue" if e.sign == "+" else "red"
        extra = f", rank={e.rank}" if e.rank is not None else ""
        lines.append(
            f"  {_dot_id(e.a)} -- {_dot_id(e.b)} [weight={e.weight!r}, sign={_dot_id(e.sign)}, "
            f"visual_weight={visual_weight(e.weight)!r}, penwidth={visual_weight(e.weight)!r}, color={color}{extra}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def export(g: MixedGraph, fmt: str, path) -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(to_json_dict(g), indent=1))
    elif fmt == "graphml":
        nx.write_graphml(g.to_networkx(), path)
    elif fmt == "dot":
        path.write_text(to_dot(g))
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def load_json(path) -> MixedGraph:
    return from_json_dict(json.loads(Path(path).read_text()))
