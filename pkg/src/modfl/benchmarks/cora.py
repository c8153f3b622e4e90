"""Citation-graph matching instances from Cora-format files.

The graph is cut into equal-size parts by a greedy edge-locality partitioner
and each part is split into two equal sides that maximise crossing edges by
a swap local search. Cells are ``(left node, right node)`` pairs; their
features concatenate the two word vectors and ``y^1`` marks citations.
"""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from ..core import Dataset, InstanceParseError, default_split
from ..seeding import generator
from .bipartite import BipartiteConfig, edge_features, make_instance


def read_content(path) -> tuple[list[str], np.ndarray, list[str]]:
    ids, rows, labels = [], [], []
    width = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) < 3:
            raise InstanceParseError("content", f"line {lineno}: expected id, word flags and label")
        try:
            vec = [float(x) for x in parts[1:-1]]
        except ValueError as exc:
            raise InstanceParseError("content", f"line {lineno}: non-numeric word flag ({exc})") from None
        if width is None:
            width = len(vec)
        elif len(vec) != width:
            raise InstanceParseError("content", f"line {lineno}: {len(vec)} word flags, expected {width}")
        ids.append(parts[0])
        rows.append(vec)
        labels.append(parts[-1])
    if not ids:
        raise InstanceParseError("content", "no rows")
    return ids, np.array(rows), labels


def read_cites(path, known: set[str]) -> list[tuple[str, str]]:
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InstanceParseError("cites", f"line {lineno}: expected 'cited<TAB>citing'")
        if parts[0] not in known or parts[1] not in known:
            raise InstanceParseError("cites", f"line {lineno}: unknown paper id")
        edges.append((parts[0], parts[1]))
    return edges


def greedy_partition(adj: list[set[int]], parts: int, size: int) -> list[list[int]]:
    """Grow ``parts`` groups of ``size`` nodes, each time adding the node with most links into the group."""
    unassigned = set(range(len(adj)))
    groups = []
    for _ in range(parts):
        seed = max(unassigned, key=lambda v: (len(adj[v] & unassigned), -v))
        group, inside = [seed], {seed}
        unassigned.discard(seed)
        gain: dict[int, int] = {}
        for w in adj[seed] & unassigned:
            gain[w] = gain.get(w, 0) + 1
        while len(group) < size:
            if gain:
                v = max(gain, key=lambda w: (gain[w], -w))
                del gain[v]
            else:
                v = min(unassigned)
            group.append(v)
            inside.add(v)
            unassigned.discard(v)
            for w in adj[v] & unassigned:
                gain[w] = gain.get(w, 0) + 1
        groups.append(sorted(group))
    return groups


def cut_size(adj: list[set[int]], left, right) -> int:
    right = set(right)
    return sum(len(adj[v] & right) for v in left)


def max_cut_bisection(adj: list[set[int]], nodes: list[int], rng: np.random.Generator,
                      restarts: int = 3) -> tuple[list[int], list[int]]:
    """Equal halves maximising crossing edges by best-improvement swaps from random starts."""
    nodes = list(nodes)
    half = len(nodes) // 2
    best = None
    for _ in range(restarts):
        perm = [nodes[i] for i in rng.permutation(len(nodes))]
        left, right = perm[:half], perm[half:]
        while True:
            L, R = set(left), set(right)
            # gain of moving v across: edges to own side minus edges to the other side
            d = {v: len(adj[v] & L) - len(adj[v] & R) for v in left}
            d.update({v: len(adj[v] & R) - len(adj[v] & L) for v in right})
            move = None
            best_gain = 0
            for a in left:
                for b in right:
                    g = d[a] + d[b] + (2 if b in adj[a] else 0)
                    if g > best_gain:
                        best_gain, move = g, (a, b)
            if move is None:
                break
            a, b = move
            left[left.index(a)], right[right.index(b)] = b, a
        cut = cut_size(adj, left, right)
        if best is None or cut > best[0]:
            best = (cut, sorted(left), sorted(right))
    return best[1], best[2]


def load_cora(content_path, cites_path, instances: int = 27, nodes_per: int = 100,
              config: BipartiteConfig | None = None) -> Dataset:
    """Matching instances cut from a citation graph."""
    cfg = config or BipartiteConfig(nodes=nodes_per, instances=instances)
    ids, words, _ = read_content(content_path)
    index = {pid: k for k, pid in enumerate(ids)}
    edges = read_cites(cites_path, set(index))
    adj: list[set[int]] = [set() for _ in ids]
    for a, b in edges:
        i, j = index[a], index[b]
        if i != j:
            adj[i].add(j)
            adj[j].add(i)
    usable = len(ids) // nodes_per
    if usable < instances:
        raise ValueError(f"{len(ids)} nodes cannot fill {instances} instances of {nodes_per}")
    dropped = len(ids) - instances * nodes_per
    if dropped:
        warnings.warn(f"{dropped} trailing node(s) left out of the partition", RuntimeWarning, stacklevel=2)
    groups = greedy_partition(adj, instances, nodes_per)
    out = []
    for idx, group in enumerate(groups):
        rng = generator(cfg.seed, "data", idx)
        left, right = max_cut_bisection(adj, group, rng)
        y1 = np.array([1.0 if r in adj[l] else 0.0 for l in left for r in right])
        X = edge_features(words[left], words[right])
        out.append(make_instance(idx, y1, X, len(left), len(right), cfg, rng,
                                 meta={"papers_left": [ids[v] for v in left], "papers_right": [ids[v] for v in right]}))
    return Dataset(out, default_split(len(out)), {"benchmark": "cora", "dropped_nodes": dropped})
