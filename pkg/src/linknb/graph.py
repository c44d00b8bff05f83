"""Immutable multilayer graph storage, node labels, and data splits.

Graphs live on a fixed node universe [0, N) shared by every layer
(multiplex assumption). Each layer keeps a deduplicated edge list plus
CSR indices in both directions so that out-neighbors and in-neighbors
of any node are reachable in O(degree). Everything is read-only after
construction and safe to share across threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError, SingleClassError

ROLE_NONE = 0
ROLE_TRAIN = 1
ROLE_VALID = 2
ROLE_TEST = 3

_ROLE_NAMES = {"train": ROLE_TRAIN, "valid": ROLE_VALID, "test": ROLE_TEST}
_ROLE_STRINGS = {v: k for k, v in _ROLE_NAMES.items()}


def _csr_from_pairs(src, dst, w, n_nodes):
    """Sort (src, dst) pairs into CSR arrays keyed by src."""
    order = np.lexsort((dst, src))
    src = src[order]
    dst = dst[order]
    w = w[order]
    counts = np.bincount(src, minlength=n_nodes)
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, dst.astype(np.int64), w.astype(np.float64)


class Layer:
    """One directed or undirected weighted edge set over the shared node universe.

    Edges are stored once, deduplicated: duplicate (source, target) rows
    merge by summing their weights (weights are interaction frequencies).
    Undirected layers canonicalize each edge to (min, max) endpoint order
    before deduplication, but expose symmetric adjacency.
    """

    def __init__(self, layer_id: int, directed: bool, src, dst, weight, n_nodes: int):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        weight = np.asarray(weight, dtype=np.float64)
        if src.shape != dst.shape or src.shape != weight.shape:
            raise ValueError("src, dst, weight must have equal length")
        if src.size and (src.min() < 0 or dst.min() < 0):
            raise DataError(f"layer {layer_id}: negative node id")
        if src.size and max(src.max(), dst.max()) >= n_nodes:
            raise DataError(
                f"layer {layer_id}: edge endpoint exceeds node universe of size {n_nodes}"
            )
        if not np.all(np.isfinite(weight)) or (weight.size and weight.min() < 0):
            raise DataError(f"layer {layer_id}: weights must be finite and >= 0")

        if not directed:
            lo = np.minimum(src, dst)
            hi = np.maximum(src, dst)
            src, dst = lo, hi

        # merge duplicate (src, dst) pairs, summing weights
        if src.size:
            key = src * n_nodes + dst
            order = np.argsort(key, kind="stable")
            key = key[order]
            wsort = weight[order]
            boundary = np.empty(key.size, dtype=bool)
            boundary[0] = True
            boundary[1:] = key[1:] != key[:-1]
            starts = np.flatnonzero(boundary)
            wmerged = np.add.reduceat(wsort, starts)
            ukey = key[starts]
            src = (ukey // n_nodes).astype(np.int64)
            dst = (ukey % n_nodes).astype(np.int64)
            weight = wmerged
        self.layer_id = int(layer_id)
        self.directed = bool(directed)
        self.n_nodes = int(n_nodes)
        self.src = src
        self.dst = dst
        self.weight = weight

        if directed:
            self._out = _csr_from_pairs(src, dst, weight, n_nodes)
            self._in = _csr_from_pairs(dst, src, weight, n_nodes)
        else:
            both_s = np.concatenate([src, dst])
            both_d = np.concatenate([dst, src])
            both_w = np.concatenate([weight, weight])
            # self-loops would double under symmetrization; keep one copy
            loop = both_s == both_d
            if loop.any():
                keep = np.ones(both_s.size, dtype=bool)
                keep[np.flatnonzero(loop)[loop.sum() // 2:]] = False
                both_s, both_d, both_w = both_s[keep], both_d[keep], both_w[keep]
            self._out = _csr_from_pairs(both_s, both_d, both_w, n_nodes)
            self._in = self._out

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    def out_neighbors(self, u: int):
        """(neighbor ids, weights) of edges leaving u. Symmetric view if undirected."""
        indptr, idx, w = self._out
        return idx[indptr[u]:indptr[u + 1]], w[indptr[u]:indptr[u + 1]]

    def in_neighbors(self, u: int):
        indptr, idx, w = self._in
        return idx[indptr[u]:indptr[u + 1]], w[indptr[u]:indptr[u + 1]]

    def out_degrees(self):
        indptr = self._out[0]
        return np.diff(indptr)

    def in_degrees(self):
        indptr = self._in[0]
        return np.diff(indptr)

    def edge_key_set(self):
        """Set of edge keys for overlap comparison, ignoring weights."""
        if self.directed:
            return set((int(s), int(t)) for s, t in zip(self.src, self.dst))
        return set((int(s), int(t)) for s, t in zip(self.src, self.dst))

    def undirected_key_set(self):
        lo = np.minimum(self.src, self.dst)
        hi = np.maximum(self.src, self.dst)
        return set((int(a), int(b)) for a, b in zip(lo, hi))


class MultilayerGraph:
    """Ordered collection of layers over one node universe of size N."""

    def __init__(self, n_nodes: int, layers: list[Layer]):
        if n_nodes < 0:
            raise ValueError("n_nodes must be nonnegative")
        if not layers:
            raise ValueError("a multilayer graph needs at least one layer")
        for lay in layers:
            if lay.n_nodes != n_nodes:
                raise ValueError("layer node universe disagrees with graph")
        self.n_nodes = int(n_nodes)
        self.layers = list(layers)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def layer(self, k: int) -> Layer:
        if not (0 <= k < len(self.layers)):
            raise IndexError(f"layer id {k} out of range [0, {len(self.layers)})")
        return self.layers[k]

    def total_edges(self) -> int:
        return sum(l.n_edges for l in self.layers)


def load_edgelist(path, n_nodes=None, directed=None) -> MultilayerGraph:
    """Parse a whitespace-separated edge list into a MultilayerGraph.

    Rows are ``source target layer weight``; ``#`` lines are comments.
    Two structured comments are honored when present: ``# nodes: N`` and
    ``# layer K: directed|undirected``. Explicit arguments win over file
    comments. ``directed`` may be a bool applied to all layers, a mapping
    {layer_id: bool}, or None to defer to file comments (default: directed).

    Duplicate (source, target, layer) rows merge by summing weights.
    """
    decl_nodes = n_nodes
    file_nodes = None
    layer_directed: dict[int, bool] = {}
    rows_by_layer: dict[int, list] = {}

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("nodes:"):
                    try:
                        file_nodes = int(body.split(":", 1)[1])
                    except ValueError:
                        raise ParseError(path, lineno, f"bad nodes comment: {line!r}")
                elif body.startswith("layer "):
                    try:
                        head, kind = body.split(":", 1)
                        k = int(head.split()[1])
                        layer_directed[k] = kind.strip() == "directed"
                    except (ValueError, IndexError):
                        raise ParseError(path, lineno, f"bad layer comment: {line!r}")
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(path, lineno, f"expected 4 fields, got {len(parts)}")
            try:
                s = int(parts[0])
                t = int(parts[1])
                k = int(parts[2])
                w = float(parts[3])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc))
            if s < 0 or t < 0 or k < 0:
                raise ParseError(path, lineno, "negative id")
            rows_by_layer.setdefault(k, []).append((s, t, w))

    n = decl_nodes if decl_nodes is not None else file_nodes
    max_seen = -1
    for rows in rows_by_layer.values():
        for s, t, _ in rows:
            if s > max_seen:
                max_seen = s
            if t > max_seen:
                max_seen = t
    if n is None:
        n = max_seen + 1
    elif max_seen >= n:
        raise DataError(f"{path}: edge endpoint {max_seen} outside declared universe of {n} nodes")

    layer_ids = sorted(rows_by_layer) if rows_by_layer else [0]
    # layers must be dense 0..K-1 so ids double as indices
    if layer_ids != list(range(len(layer_ids))):
        raise DataError(f"{path}: layer ids must be dense integers starting at 0, got {layer_ids}")

    def _dir_for(k):
        if isinstance(directed, dict) and k in directed:
            return bool(directed[k])
        if isinstance(directed, bool):
            return directed
        return layer_directed.get(k, True)

    layers = []
    for k in layer_ids:
        rows = rows_by_layer.get(k, [])
        if rows:
            arr = np.asarray(rows, dtype=np.float64)
            src, dst, w = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]
        else:
            src = dst = np.zeros(0, dtype=np.int64)
            w = np.zeros(0, dtype=np.float64)
        layers.append(Layer(k, _dir_for(k), src, dst, w, n))
    return MultilayerGraph(n, layers)


def save_edgelist(g: MultilayerGraph, path) -> None:
    """Write a graph in the edge-list format that load_edgelist reads back."""
    buf = io.StringIO()
    buf.write(f"# nodes: {g.n_nodes}\n")
    for lay in g.layers:
        buf.write(f"# layer {lay.layer_id}: {'directed' if lay.directed else 'undirected'}\n")
    for lay in g.layers:
        for s, t, w in zip(lay.src, lay.dst, lay.weight):
            buf.write(f"{int(s)} {int(t)} {lay.layer_id} {w!r}\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


class NodeLabels:
    """Binary labels for T independent tasks on the shared node universe.

    Internally an (N, T) int8 matrix with entries in {-1, 0, +1}; 0 marks
    an unlabeled node for that task.
    """

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=np.int8)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        if matrix.ndim != 2:
            raise ValueError("labels matrix must be 2-d (nodes x tasks)")
        if not np.isin(matrix, (-1, 0, 1)).all():
            raise DataError("labels must be in {-1, 0, +1}")
        self.matrix = matrix

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.matrix.shape[1]

    def task(self, t: int):
        """Length-N int8 vector of labels for task t (0 = unlabeled)."""
        if not (0 <= t < self.n_tasks):
            raise IndexError(f"task id {t} out of range [0, {self.n_tasks})")
        return self.matrix[:, t]

    def labeled_any(self):
        """Node ids labeled in at least one task."""
        return np.flatnonzero((self.matrix != 0).any(axis=1))


def load_labels(path, n_nodes: int, n_tasks=None) -> NodeLabels:
    """Parse ``node task label`` lines. Labels {+1,-1} or {1,0} (0 -> -1)."""
    rows = []
    max_task = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(path, lineno, f"expected 3 fields, got {len(parts)}")
            try:
                node = int(parts[0])
                task = int(parts[1])
                lab = int(parts[2])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc))
            if lab not in (1, -1, 0):
                raise ParseError(path, lineno, f"label must be +1/-1 or 1/0, got {lab}")
            if node >= n_nodes or node < 0:
                raise DataError(f"{path}:{lineno}: node {node} outside universe of {n_nodes}")
            if task < 0:
                raise ParseError(path, lineno, "negative task id")
            rows.append((node, task, 1 if lab == 1 else -1))
            max_task = max(max_task, task)
    t_count = n_tasks if n_tasks is not None else max_task + 1
    if t_count <= 0:
        raise DataError(f"{path}: no labels found")
    matrix = np.zeros((n_nodes, t_count), dtype=np.int8)
    for node, task, lab in rows:
        if task >= t_count:
            raise DataError(f"{path}: task id {task} outside declared count {t_count}")
        matrix[node, task] = lab
    return NodeLabels(matrix)


class SplitAssignment:
    """Disjoint train/valid/test roles over the node universe."""

    def __init__(self, role):
        role = np.asarray(role, dtype=np.int8)
        if role.ndim != 1:
            raise ValueError("role must be a 1-d array")
        if not np.isin(role, (ROLE_NONE, ROLE_TRAIN, ROLE_VALID, ROLE_TEST)).all():
            raise DataError("unknown role code in split")
        self.role = role

    @property
    def n_nodes(self) -> int:
        return self.role.shape[0]

    def nodes_with_role(self, role_code: int):
        return np.flatnonzero(self.role == role_code)

    @property
    def train_nodes(self):
        return self.nodes_with_role(ROLE_TRAIN)

    @property
    def valid_nodes(self):
        return self.nodes_with_role(ROLE_VALID)

    @property
    def test_nodes(self):
        return self.nodes_with_role(ROLE_TEST)


def make_split(labels: NodeLabels, fractions, seed: int) -> SplitAssignment:
    """Randomly partition labeled nodes into train/valid/test.

    Deterministic given the seed. Counts match the fractions to within
    rounding. All three fractions must be positive and sum to 1.
    """
    f = tuple(float(x) for x in fractions)
    if len(f) != 3:
        raise ValueError("fractions must be (train, valid, test)")
    if min(f) <= 0:
        raise DataError("every split fraction must be positive")
    if abs(sum(f) - 1.0) > 1e-9:
        raise DataError(f"fractions must sum to 1, got {sum(f)}")
    labeled = labels.labeled_any()
    if labeled.size < 3:
        raise DataError(f"need at least 3 labeled nodes to split, got {labeled.size}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(labeled)
    n = labeled.size
    n_tr = int(round(f[0] * n))
    n_va = int(round(f[1] * n))
    n_tr = min(max(n_tr, 1), n - 2)
    n_va = min(max(n_va, 1), n - n_tr - 1)
    role = np.zeros(labels.n_nodes, dtype=np.int8)
    role[perm[:n_tr]] = ROLE_TRAIN
    role[perm[n_tr:n_tr + n_va]] = ROLE_VALID
    role[perm[n_tr + n_va:]] = ROLE_TEST
    return SplitAssignment(role)


def load_split(path, n_nodes: int) -> SplitAssignment:
    """Parse ``node role`` lines with role in {train, valid, test}."""
    role = np.zeros(n_nodes, dtype=np.int8)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected 2 fields, got {len(parts)}")
            try:
                node = int(parts[0])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc))
            if parts[1] not in _ROLE_NAMES:
                raise ParseError(path, lineno, f"unknown role {parts[1]!r}")
            if node >= n_nodes or node < 0:
                raise DataError(f"{path}:{lineno}: node {node} outside universe of {n_nodes}")
            if role[node] != ROLE_NONE:
                raise DataError(f"{path}:{lineno}: node {node} assigned two roles")
            role[node] = _ROLE_NAMES[parts[1]]
    return SplitAssignment(role)


def save_split(split: SplitAssignment, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node in np.flatnonzero(split.role != ROLE_NONE):
            fh.write(f"{int(node)} {_ROLE_STRINGS[int(split.role[node])]}\n")


def layer_overlap(g: MultilayerGraph, k1: int, k2: int) -> float:
    """Jaccard similarity of two layers' edge sets, ignoring weights.

    Directed layers compare ordered pairs; if either layer is undirected
    both are compared as unordered pairs. Two empty layers overlap fully.
    """
    a = g.layer(k1)
    b = g.layer(k2)
    if a.directed and b.directed:
        sa, sb = a.edge_key_set(), b.edge_key_set()
    else:
        sa, sb = a.undirected_key_set(), b.undirected_key_set()
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


def degree_distribution(g: MultilayerGraph, k: int, mode: str = "total") -> dict[int, int]:
    """Histogram degree -> node count for one layer. Sums to N."""
    lay = g.layer(k)
    if mode in ("in", "out") and not lay.directed:
        raise ValueError(f"mode {mode!r} undefined on undirected layer {k}")
    if mode == "out":
        deg = lay.out_degrees()
    elif mode == "in":
        deg = lay.in_degrees()
    elif mode == "total":
        deg = lay.out_degrees() + lay.in_degrees() if lay.directed else lay.out_degrees()
    else:
        raise ValueError(f"unknown degree mode {mode!r}")
    counts = np.bincount(deg.astype(np.int64))
    return {int(d): int(c) for d, c in enumerate(counts) if c > 0}


def check_both_classes(y, context: str) -> None:
    """Raise SingleClassError unless y (in {-1,+1}) contains both classes."""
    y = np.asarray(y)
    if not ((y == 1).any() and (y == -1).any()):
        raise SingleClassError(
            f"{context}: only one label class present; resplit the data or widen the sample"
        )
