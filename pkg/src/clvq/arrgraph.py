"""Region-adjacency graphs of line arrangements and their isomorphism test.

Each cell of a planar arrangement becomes a vertex; two cells sharing a
boundary segment on line ``j`` are joined by an edge of color ``j``. One
extra vertex ``INF`` stands for the circle at infinity and is joined to
every unbounded cell by an edge of color ``SPHERE``.

Canonical forms are invariant under vertex relabeling and under any
permutation of the line colors. The edge-colored graph is turned into a
vertex-colored one (one node per edge, one node per line color) and
canonically labeled by color refinement plus exhaustive individualization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from clvq.arrangement import Arrangement, _probe_cells_2d, label_string, parse_label_string

__all__ = [
    "INF",
    "SPHERE",
    "RegionGraph",
    "build_region_graph",
    "region_sign_labels",
    "canonical_form",
    "is_isomorphic",
]

INF = "INF"
SPHERE = "S"
MAX_LINES = 8


@dataclass
class RegionGraph:
    """Vertices are label tuples plus ``INF``; edges are ``(u, v, color)``."""

    k: int
    regions: list
    edges: list = field(default_factory=list)

    @property
    def vertices(self) -> list:
        return list(self.regions) + [INF]

    def edges_of_color(self, color) -> list:
        return [e for e in self.edges if e[2] == color]

    def neighbors(self, v) -> set:
        out = set()
        for a, b, _ in self.edges:
            if a == v:
                out.add(b)
            elif b == v:
                out.add(a)
        return out

    def unbounded(self) -> set:
        return {a if b == INF else b for a, b, c in self.edges if c == SPHERE}

    def to_dict(self) -> dict:
        def key(v):
            return INF if v == INF else label_string(v)

        return {
            "vertices": [key(v) for v in self.vertices],
            "edges": [[key(a), key(b), c] for a, b, c in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "RegionGraph":
        def key(v):
            return INF if v == INF else parse_label_string(v)

        regions = [key(v) for v in data["vertices"] if v != INF]
        if sum(v == INF for v in data["vertices"]) != 1:
            raise ValueError("a region graph has exactly one INF vertex")
        k = len(regions[0]) if regions else 0
        edges = [(key(a), key(b), c if c == SPHERE else int(c)) for a, b, c in data["edges"]]
        return cls(k, regions, edges)

    def to_dot(self) -> str:
        lines = ["graph arrangement {"]
        for v in self.vertices:
            name = INF if v == INF else label_string(v)
            shape = "doublecircle" if v == INF else "circle"
            lines.append(f'  "{name}" [shape={shape}];')
        for a, b, c in self.edges:
            na = INF if a == INF else label_string(a)
            nb = INF if b == INF else label_string(b)
            style = "dashed" if c == SPHERE else "solid"
            lines.append(f'  "{na}" -- "{nb}" [label="{c}", colorscheme=set19, color={_dot_color(c)}, style={style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_color(c) -> int:
    return 9 if c == SPHERE else (int(c) % 8) + 1


def build_region_graph(arr: Arrangement) -> RegionGraph:
    """Region-adjacency graph of a planar arrangement of distinct lines."""
    if arr.d != 2:
        raise ValueError(f"region graphs need d = 2, got d = {arr.d}")
    if arr.k > MAX_LINES:
        raise ValueError(f"region graphs support at most {MAX_LINES} lines, got k = {arr.k}")
    cells = _probe_cells_2d(arr)
    a = arr.normalized()
    V, t, k = a.weights, a.offsets, a.k
    for i in range(k):
        for j in range(i + 1, k):
            if np.allclose(V[i], V[j]) and np.isclose(t[i], t[j]) or (
                np.allclose(V[i], -V[j]) and np.isclose(t[i], -t[j])
            ):
                raise ValueError(f"lines {i} and {j} coincide")
    dirs = np.column_stack([-V[:, 1], V[:, 0]])
    feet = -t[:, None] * V
    reach = max([1.0] + [float(np.linalg.norm(f)) for f in feet])
    params = {}
    for j in range(k):
        s = []
        for i in range(k):
            denom = V[i] @ dirs[j]
            if i != j and abs(denom) > 1e-12:
                s.append(-(V[i] @ feet[j] + t[i]) / denom)
        params[j] = np.unique(np.round(np.array(s), 12)) if s else np.array([])
        if s:
            reach = max(reach, float(np.max(np.abs(params[j]))) + float(np.linalg.norm(feet[j])))
    eps = 1e-6 * reach
    edges = set()
    for j in range(k):
        s = params[j]
        if len(s):
            mids = np.concatenate([[s[0] - 1.0 - reach], (s[:-1] + s[1:]) / 2, [s[-1] + 1.0 + reach]])
        else:
            mids = np.array([0.0])
        for m in mids:
            p = feet[j] + m * dirs[j]
            sides = []
            for sg in (-1.0, 1.0):
                q = p + sg * eps * V[j]
                vals = V @ q + t
                vals[j] = sg
                if np.any(np.abs(np.delete(vals, j)) <= 1e-3 * eps):
                    break
                sides.append(tuple(1 if x >= 0 else -1 for x in vals))
            if len(sides) != 2:
                continue
            lo, hi = sorted(sides)
            diff = [i for i in range(k) if lo[i] != hi[i]]
            if diff != [j] or lo not in cells or hi not in cells:
                raise RuntimeError(f"boundary probe on line {j} did not separate two known cells")
            edges.add((lo, hi, j))
    for c in cells.values():
        if c.unbounded:
            edges.add((c.label, INF, SPHERE))
    regions = sorted(cells)
    return RegionGraph(k, regions, sorted(edges, key=lambda e: (str(e[2]), e[0], str(e[1]))))


def region_sign_labels(arr: Arrangement, orientation=None) -> dict:
    """Label string of each cell after orienting line ``j`` by ``orientation[j]``."""
    if arr.d != 2:
        raise ValueError(f"region labels need d = 2, got d = {arr.d}")
    orientation = np.ones(arr.k, dtype=int) if orientation is None else np.asarray(orientation)
    if orientation.shape != (arr.k,) or not np.all(np.isin(orientation, (-1, 1))):
        raise ValueError("orientation must be k values in {-1, +1}")
    out = {}
    for lab in _probe_cells_2d(arr):
        out[lab] = label_string(s * o for s, o in zip(lab, orientation))
    if len(set(out.values())) != len(out):
        raise RuntimeError("region labels are not unique")
    return out


# -- canonical labeling ------------------------------------------------------

_REGION, _INFV, _EDGE, _SPHERE_EDGE, _COLOR = range(5)


def _aux_graph(g: RegionGraph):
    """Vertex-colored graph: (types, adjacency lists)."""
    index = {v: i for i, v in enumerate(g.vertices)}
    types = [_REGION] * len(g.regions) + [_INFV]
    colors = sorted({c for *_, c in g.edges if c != SPHERE})
    cidx = {}
    for c in colors:
        cidx[c] = len(types)
        types.append(_COLOR)
    adj: list[list[int]] = [[] for _ in types]

    def link(a, b):
        adj[a].append(b)
        adj[b].append(a)

    for a, b, c in g.edges:
        e = len(types)
        types.append(_SPHERE_EDGE if c == SPHERE else _EDGE)
        adj.append([])
        link(e, index[a])
        link(e, index[b])
        if c != SPHERE:
            link(e, cidx[c])
    return types, adj


def _refine(colors: list[int], adj) -> list[int]:
    n = len(colors)
    while True:
        sigs = [(colors[v], tuple(sorted(colors[u] for u in adj[v]))) for v in range(n)]
        ranks = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new = [ranks[s] for s in sigs]
        if len(ranks) == len(set(colors)):
            return new
        colors = new


def _certificate(colors, types, adj):
    order = sorted(range(len(colors)), key=lambda v: colors[v])
    pos = {v: i for i, v in enumerate(order)}
    edges = sorted(
        (min(pos[a], pos[b]), max(pos[a], pos[b])) for a in range(len(adj)) for b in adj[a] if a < b
    )
    return tuple(types[v] for v in order), tuple(edges)


def _search(colors, types, adj):
    colors = _refine(colors, adj)
    counts = {}
    for c in colors:
        counts[c] = counts.get(c, 0) + 1
    target = [c for c in sorted(counts) if counts[c] > 1]
    if not target:
        return _certificate(colors, types, adj)
    cell = target[0]
    best = None
    for v in (v for v in range(len(colors)) if colors[v] == cell):
        indiv = [2 * c + (0 if u == v else 1) for u, c in enumerate(colors)]
        cert = _search(indiv, types, adj)
        if best is None or cert < best:
            best = cert
    return best


def canonical_form(g: RegionGraph) -> str:
    """String equal for two graphs iff they are isomorphic up to a
    permutation of line colors (``INF`` and the sphere color stay fixed)."""
    types, adj = _aux_graph(g)
    vtypes, edges = _search(list(types), types, adj)
    head = "".join(map(str, vtypes))
    body = ";".join(f"{a}-{b}" for a, b in edges)
    return f"{head}|{body}"


def is_isomorphic(g1: RegionGraph, g2: RegionGraph) -> bool:
    return canonical_form(g1) == canonical_form(g2)
