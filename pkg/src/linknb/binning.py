"""Edge bins: mutually exclusive categories for ordered node pairs.

A bin scheme maps every ordered pair (anchor, partner) to exactly one
category based on edge direction, weight intervals, their combination,
or the Cartesian product of per-layer categories. Pairs with no edge in
any referenced layer are never materialized; when the scheme models
them (``existing_edges_only=False``) they implicitly occupy the
designated no-edge bin and downstream code reaches them through a
complement identity instead of enumerating all N^2 pairs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BinCapacityError, ConfigError, SchemeError
from .graph import MultilayerGraph

DIR_NONE = 0
DIR_OUT_ONLY = 1
DIR_IN_ONLY = 2
DIR_RECIPROCAL = 3

_DIRECTION_LABELS = ("none", "out_only", "in_only", "reciprocal")

DEFAULT_BIN_CAP = 4096


def assign_direction_bin(has_out: bool, has_in: bool) -> int:
    """4-way direction category of a pair, anchored at the target node.

    ``has_out`` means an edge leaves the anchor toward the partner.
    """
    if has_out and has_in:
        return DIR_RECIPROCAL
    if has_out:
        return DIR_OUT_ONLY
    if has_in:
        return DIR_IN_ONLY
    return DIR_NONE


def assign_weight_bin(weight: float, thresholds) -> int:
    """Index of the half-open interval (t_{j-1}, t_j] containing weight.

    Bin 0 is (-inf, t_1]; the last bin is (t_m, inf). With a leading 0
    threshold and nonnegative weights, bin 0 collapses to {0}.
    """
    if math.isnan(weight):
        raise ValueError("weight is NaN")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    return int(np.searchsorted(thresholds, weight, side="left"))


def _weight_bins_vec(weights, thresholds):
    return np.searchsorted(np.asarray(thresholds, dtype=np.float64),
                           weights, side="left").astype(np.int64)


def percentile_thresholds(weights, percentiles=(25, 50, 75)) -> list[float]:
    """Nearest-rank percentile cut points, duplicates collapsed.

    Collapsing duplicates shrinks the resulting bin count; downstream
    smoothing then uses the effective count.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ValueError("cannot take percentiles of an empty weight set")
    for p in percentiles:
        if not (0 < p <= 100):
            raise ValueError(f"percentile {p} outside (0, 100]")
    s = np.sort(w)
    out = []
    for p in percentiles:
        rank = max(int(math.ceil(p / 100.0 * s.size)), 1)
        out.append(float(s[rank - 1]))
    collapsed = []
    for t in out:
        if not collapsed or t > collapsed[-1]:
            collapsed.append(t)
    return collapsed


def assign_product_bin(per_layer_bins, per_layer_counts) -> int:
    """Mixed-radix encoding of per-layer bins; first layer varies fastest.

    Bijective with the tuple of per-layer bin indices: the code is
    sum_k b_k * prod_{j<k} c_j.
    """
    if len(per_layer_bins) != len(per_layer_counts):
        raise ValueError("bins and counts must have equal length")
    code = 0
    stride = 1
    for b, c in zip(per_layer_bins, per_layer_counts):
        if not (0 <= b < c):
            raise ValueError(f"bin index {b} out of range [0, {c})")
        code += int(b) * stride
        stride *= int(c)
    return code


def decode_product_bin(code: int, per_layer_counts) -> tuple[int, ...]:
    """Inverse of assign_product_bin."""
    out = []
    for c in per_layer_counts:
        out.append(int(code % c))
        code //= c
    return tuple(out)


def _describe(scheme) -> str:
    if isinstance(scheme, DirectionScheme):
        return f"direction(layer={scheme.layer},existing={scheme.existing_edges_only})"
    if isinstance(scheme, WeightScheme):
        t = ",".join(repr(float(x)) for x in scheme.thresholds)
        return f"weight(layer={scheme.layer},t=[{t}],existing={scheme.existing_edges_only})"
    if isinstance(scheme, DirectionWeightScheme):
        to = ",".join(repr(float(x)) for x in scheme.out_thresholds)
        ti = ",".join(repr(float(x)) for x in scheme.in_thresholds)
        return (f"dirweight(layer={scheme.layer},out=[{to}],in=[{ti}],"
                f"existing={scheme.existing_edges_only})")
    if isinstance(scheme, ProductScheme):
        inner = ";".join(_describe(c) for c in scheme.children)
        return f"product({inner};existing={scheme.existing_edges_only})"
    raise TypeError(f"unknown scheme {scheme!r}")


def scheme_fingerprint(scheme) -> str:
    return hashlib.sha256(_describe(scheme).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class DirectionScheme:
    """4-way direction bins (none / out / in / reciprocal) on one layer.

    With ``existing_edges_only`` the impossible-for-edges 'none' category
    is dropped and the remaining three are re-indexed from 0.
    """

    layer: int = 0
    existing_edges_only: bool = False
    kind: str = field(default="direction", init=False)

    @property
    def bin_count(self) -> int:
        return 3 if self.existing_edges_only else 4

    @property
    def no_edge_bin(self):
        return None if self.existing_edges_only else DIR_NONE

    def bin_labels(self) -> list[str]:
        if self.existing_edges_only:
            return list(_DIRECTION_LABELS[1:])
        return list(_DIRECTION_LABELS)


def _interval_labels(thresholds) -> list[str]:
    t = [float(x) for x in thresholds]
    labs = [f"w<={t[0]:g}"]
    for lo, hi in zip(t, t[1:]):
        labs.append(f"{lo:g}<w<={hi:g}")
    labs.append(f"w>{t[-1]:g}")
    return labs


def _check_thresholds(thresholds, who: str):
    t = tuple(float(x) for x in thresholds)
    for a, b in zip(t, t[1:]):
        if not a < b:
            raise ConfigError(f"{who}: thresholds must be strictly ascending, got {t}")
    if any(math.isnan(x) for x in t):
        raise ConfigError(f"{who}: NaN threshold")
    return t


@dataclass(frozen=True)
class WeightScheme:
    """Weight-interval bins on one layer.

    On directed layers the pair weight is the sum of both directions'
    edge weights (weights are interaction frequencies). Without
    ``existing_edges_only`` the interval containing weight 0 doubles as
    the no-edge bin, so thresholds must be nonempty in that mode.
    """

    thresholds: tuple = ()
    layer: int = 0
    existing_edges_only: bool = False
    kind: str = field(default="weight_thresholds", init=False)

    def __post_init__(self):
        object.__setattr__(self, "thresholds", _check_thresholds(self.thresholds, "WeightScheme"))
        if not self.existing_edges_only and len(self.thresholds) == 0:
            raise ConfigError("WeightScheme without existing_edges_only needs >= 1 threshold "
                              "so edges and non-edges can be told apart")

    @property
    def bin_count(self) -> int:
        return len(self.thresholds) + 1

    @property
    def no_edge_bin(self):
        if self.existing_edges_only:
            return None
        return assign_weight_bin(0.0, self.thresholds)

    def bin_labels(self) -> list[str]:
        if not self.thresholds:
            return ["any_edge"]
        return _interval_labels(self.thresholds)


@dataclass(frozen=True)
class DirectionWeightScheme:
    """Product of out-edge and in-edge weight intervals on one directed layer.

    An absent edge in either direction counts as weight 0 there. The bin
    index is out_bin * n_in + in_bin.
    """

    out_thresholds: tuple = ()
    in_thresholds: tuple = ()
    layer: int = 0
    existing_edges_only: bool = False
    kind: str = field(default="direction_x_weight", init=False)

    def __post_init__(self):
        object.__setattr__(self, "out_thresholds",
                           _check_thresholds(self.out_thresholds, "DirectionWeightScheme.out"))
        object.__setattr__(self, "in_thresholds",
                           _check_thresholds(self.in_thresholds, "DirectionWeightScheme.in"))
        if len(self.out_thresholds) == 0 or len(self.in_thresholds) == 0:
            raise ConfigError("DirectionWeightScheme needs thresholds on both directions")

    @property
    def n_out(self) -> int:
        return len(self.out_thresholds) + 1

    @property
    def n_in(self) -> int:
        return len(self.in_thresholds) + 1

    @property
    def bin_count(self) -> int:
        return self.n_out * self.n_in

    @property
    def no_edge_bin(self):
        if self.existing_edges_only:
            return None
        zo = assign_weight_bin(0.0, self.out_thresholds)
        zi = assign_weight_bin(0.0, self.in_thresholds)
        return zo * self.n_in + zi

    def bin_labels(self) -> list[str]:
        out_l = _interval_labels(self.out_thresholds)
        in_l = _interval_labels(self.in_thresholds)
        return [f"out:{o}|in:{i}" for o in out_l for i in in_l]


@dataclass(frozen=True)
class ProductScheme:
    """Cartesian product of per-layer schemes across a multilayer graph.

    Each child categorizes one layer. A pair that has an edge in some
    layers but not others takes, for each missing layer, either the
    child's no-edge bin or an extra trailing 'absent' category when the
    child models existing edges only. With a single child this scheme is
    a transparent pass-through. With ``existing_edges_only`` the product
    space is compacted to the categories actually populated by the graph
    (bin indices ordered by raw product code).
    """

    children: tuple = ()
    existing_edges_only: bool = False
    bin_cap: int = DEFAULT_BIN_CAP
    kind: str = field(default="product_across_layers", init=False)

    def __post_init__(self):
        if not self.children:
            raise ConfigError("ProductScheme needs at least one child scheme")
        layers = [c.layer for c in self.children]
        if len(set(layers)) != len(layers):
            raise ConfigError(f"ProductScheme children must reference distinct layers, got {layers}")
        for c in self.children:
            if isinstance(c, ProductScheme):
                raise ConfigError("ProductScheme children must be single-layer schemes")

    @property
    def n_children(self) -> int:
        return len(self.children)

    def layer_category_counts(self) -> list[int]:
        """Per-layer category counts inside the product (absent category included)."""
        if self.n_children == 1:
            return [self.children[0].bin_count]
        return [c.bin_count + (1 if c.no_edge_bin is None else 0) for c in self.children]

    def layer_absent_category(self, idx: int):
        """Category a pair takes in child idx's slot when it has no edge there."""
        child = self.children[idx]
        if child.no_edge_bin is not None:
            return child.no_edge_bin
        if self.n_children == 1:
            return None
        return child.bin_count  # trailing absent category

    @property
    def raw_bin_count(self) -> int:
        n = 1
        for c in self.layer_category_counts():
            n *= c
        return n

    @property
    def bin_count(self) -> int:
        if self.n_children == 1:
            return self.children[0].bin_count
        return self.raw_bin_count

    @property
    def no_edge_bin(self):
        if self.n_children == 1:
            return None if self.existing_edges_only else self.children[0].no_edge_bin
        if self.existing_edges_only:
            return None
        cats = [self.layer_absent_category(i) for i in range(self.n_children)]
        return assign_product_bin(cats, self.layer_category_counts())

    def raw_bin_labels(self) -> list[str] | None:
        if self.n_children == 1:
            return self.children[0].bin_labels()
        if self.raw_bin_count > 10000:
            return None
        counts = self.layer_category_counts()
        per_layer = []
        for c in self.children:
            labs = c.bin_labels()
            if c.no_edge_bin is None:
                labs = labs + ["absent"]
            per_layer.append(labs)
        out = []
        for code in range(self.raw_bin_count):
            cats = decode_product_bin(code, counts)
            out.append("*".join(f"L{c.layer}[{per_layer[i][cat]}]"
                                for i, (c, cat) in enumerate(zip(self.children, cats))))
        return out


class BinAssignment:
    """Materialized pair -> bin map in CSR form keyed by the anchor node.

    Rows are sorted by (anchor, partner). Pairs without any edge in the
    referenced layers are not stored; when ``no_edge_bin`` is set they
    implicitly belong to that bin.
    """

    def __init__(self, n_nodes, indptr, partners, bins, bin_count,
                 no_edge_bin, labels, fingerprint):
        self.n_nodes = int(n_nodes)
        self.indptr = indptr
        self.partners = partners
        self.bins = bins
        self.bin_count = int(bin_count)
        self.no_edge_bin = no_edge_bin
        self.labels = labels
        self.fingerprint = fingerprint

    @property
    def n_pairs(self) -> int:
        return int(self.partners.size)

    def anchors(self):
        """Anchor node id of every stored pair row."""
        return np.repeat(np.arange(self.n_nodes, dtype=np.int64), np.diff(self.indptr))

    def pairs_of(self, u: int):
        """(partners, bins) of anchor u."""
        lo, hi = self.indptr[u], self.indptr[u + 1]
        return self.partners[lo:hi], self.bins[lo:hi]

    def rows_for(self, targets):
        """Gather pair rows anchored at the given nodes.

        Returns (pair_idx, target_pos): indices into partners/bins and, for
        each, the position of its anchor within ``targets``.
        """
        targets = np.asarray(targets, dtype=np.int64)
        starts = self.indptr[targets]
        lens = self.indptr[targets + 1] - starts
        total = int(lens.sum())
        target_pos = np.repeat(np.arange(targets.size, dtype=np.int64), lens)
        if total == 0:
            return np.zeros(0, dtype=np.int64), target_pos
        offsets = np.zeros(targets.size, dtype=np.int64)
        np.cumsum(lens[:-1], out=offsets[1:])
        pair_idx = np.arange(total, dtype=np.int64) - np.repeat(offsets, lens) + np.repeat(starts, lens)
        return pair_idx, target_pos

    def bin_label(self, w: int) -> str:
        if self.labels is not None and 0 <= w < len(self.labels):
            return self.labels[w]
        return f"bin{w}"


def _merge_pair_rows(a, b, cols, n_nodes):
    """Sum duplicate (a, b) rows. cols is a list of float arrays."""
    key = a * np.int64(n_nodes) + b
    order = np.argsort(key, kind="stable")
    key = key[order]
    uniq_mask = np.empty(key.size, dtype=bool)
    uniq_mask[0] = True
    uniq_mask[1:] = key[1:] != key[:-1]
    starts = np.flatnonzero(uniq_mask)
    out_cols = [np.add.reduceat(c[order], starts) for c in cols]
    ukey = key[starts]
    return (ukey // n_nodes).astype(np.int64), (ukey % n_nodes).astype(np.int64), out_cols


def _layer_pair_table(layer):
    """Ordered pairs with >= 1 edge in this layer.

    Returns (a, b, has_out, has_in, pair_weight, w_out, w_in), sorted by
    (a, b). For undirected layers has_out == has_in == True and
    pair_weight is the stored edge weight; for directed layers
    pair_weight is the sum of both directions.
    """
    n = layer.n_nodes
    if not layer.directed:
        indptr, idx, w = layer._out
        a = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
        ones = np.ones(a.size, dtype=bool)
        return a, idx.copy(), ones, ones.copy(), w.copy(), w.copy(), w.copy()

    op, oi, ow = layer._out
    ipn, ii, iw = layer._in
    a1 = np.repeat(np.arange(n, dtype=np.int64), np.diff(op))
    a2 = np.repeat(np.arange(n, dtype=np.int64), np.diff(ipn))
    a = np.concatenate([a1, a2])
    b = np.concatenate([oi, ii])
    w_out = np.concatenate([ow, np.zeros(ii.size)])
    w_in = np.concatenate([np.zeros(oi.size), iw])
    f_out = np.concatenate([np.ones(oi.size), np.zeros(ii.size)])
    f_in = np.concatenate([np.zeros(oi.size), np.ones(ii.size)])
    if a.size == 0:
        z = np.zeros(0)
        return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                np.zeros(0, dtype=bool), np.zeros(0, dtype=bool), z, z.copy(), z.copy())
    ua, ub, (w_out, w_in, f_out, f_in) = _merge_pair_rows(a, b, [w_out, w_in, f_out, f_in], n)
    return ua, ub, f_out > 0, f_in > 0, w_out + w_in, w_out, w_in


def _single_layer_bins(scheme, table):
    """Vectorized bin of every pair row for a non-product scheme."""
    a, b, has_out, has_in, pw, w_out, w_in = table
    if isinstance(scheme, DirectionScheme):
        cat = np.where(has_out & has_in, DIR_RECIPROCAL,
                       np.where(has_out, DIR_OUT_ONLY, DIR_IN_ONLY)).astype(np.int64)
        if scheme.existing_edges_only:
            cat = cat - 1
        return cat
    if isinstance(scheme, WeightScheme):
        return _weight_bins_vec(pw, scheme.thresholds)
    if isinstance(scheme, DirectionWeightScheme):
        ob = _weight_bins_vec(np.where(has_out, w_out, 0.0), scheme.out_thresholds)
        ib = _weight_bins_vec(np.where(has_in, w_in, 0.0), scheme.in_thresholds)
        return ob * scheme.n_in + ib
    raise TypeError(f"unsupported scheme {scheme!r}")


def _validate_scheme(g: MultilayerGraph, scheme):
    if isinstance(scheme, ProductScheme):
        for c in scheme.children:
            _validate_scheme(g, c)
        return
    if not (0 <= scheme.layer < g.n_layers):
        raise SchemeError(f"scheme references layer {scheme.layer}, graph has {g.n_layers}")
    lay = g.layer(scheme.layer)
    if isinstance(scheme, (DirectionScheme, DirectionWeightScheme)) and not lay.directed:
        raise SchemeError(f"{scheme.kind} scheme requires a directed layer, "
                          f"layer {scheme.layer} is undirected")


def _csr_assignment(n_nodes, a, b, bins, bin_count, no_edge_bin, labels, fp):
    order = np.lexsort((b, a))
    a, b, bins = a[order], b[order], bins[order]
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(a, minlength=n_nodes), out=indptr[1:])
    return BinAssignment(n_nodes, indptr, b, bins, bin_count, no_edge_bin, labels, fp)


def build_assignment(g: MultilayerGraph, scheme, bin_cap: int | None = None) -> BinAssignment:
    """Assign every pair with at least one edge in the referenced layers to a bin.

    ``bin_cap`` (default 4096, overridable) refuses product spaces that
    would exhaust memory downstream.
    """
    _validate_scheme(g, scheme)
    fp = scheme_fingerprint(scheme)

    if not isinstance(scheme, ProductScheme):
        table = _layer_pair_table(g.layer(scheme.layer))
        bins = _single_layer_bins(scheme, table)
        return _csr_assignment(g.n_nodes, table[0], table[1], bins,
                               scheme.bin_count, scheme.no_edge_bin,
                               scheme.bin_labels(), fp)

    cap = bin_cap if bin_cap is not None else scheme.bin_cap
    if scheme.raw_bin_count > cap:
        raise BinCapacityError(
            f"product bin space has {scheme.raw_bin_count} categories, exceeding the cap of "
            f"{cap}; coarsen the per-layer schemes or pass a larger bin_cap to override")

    if scheme.n_children == 1:
        child = scheme.children[0]
        table = _layer_pair_table(g.layer(child.layer))
        bins = _single_layer_bins(child, table)
        no_edge = None if scheme.existing_edges_only else child.no_edge_bin
        return _csr_assignment(g.n_nodes, table[0], table[1], bins,
                               child.bin_count, no_edge, child.bin_labels(), fp)

    counts = scheme.layer_category_counts()
    tables = [_layer_pair_table(g.layer(c.layer)) for c in scheme.children]
    keys = [t[0] * np.int64(g.n_nodes) + t[1] for t in tables]
    universe = np.unique(np.concatenate(keys)) if keys else np.zeros(0, dtype=np.int64)

    code = np.zeros(universe.size, dtype=np.int64)
    stride = 1
    for idx, (child, table, key) in enumerate(zip(scheme.children, tables, keys)):
        cat = np.full(universe.size, scheme.layer_absent_category(idx), dtype=np.int64)
        pos = np.searchsorted(universe, key)
        cat[pos] = _single_layer_bins(child, table)
        code += cat * stride
        stride *= counts[idx]

    labels = scheme.raw_bin_labels()
    if scheme.existing_edges_only:
        populated = np.unique(code)
        bins = np.searchsorted(populated, code).astype(np.int64)
        if labels is not None:
            labels = [labels[int(c)] for c in populated]
        bin_count = int(populated.size)
        no_edge = None
    else:
        bins = code
        bin_count = scheme.raw_bin_count
        no_edge = scheme.no_edge_bin

    a = (universe // g.n_nodes).astype(np.int64)
    b = (universe % g.n_nodes).astype(np.int64)
    return _csr_assignment(g.n_nodes, a, b, bins, bin_count, no_edge, labels, fp)
