"""Super-metapath enumeration over the temporal heterogeneous graph.

Two interaction patterns are mined around each contract account:

  P1: EOA --call--> CA --trans--> EOA            (two hops)
  P2: EOA --call--> CA --call--> CA --trans--> EOA  (three hops; the middle
      call may be a contract self-call)

All concrete instances sharing one node sequence and relation sequence merge
into a single *super metapath* whose importance is the instance count. In
``time_aware`` mode only instances with strictly increasing timestamps along
the path are counted; ``timeless`` mode counts every timestamp combination.
Counting works on neighbour-grouped, timestamp-sorted edge lists with binary
search and prefix sums, so importance values are exact without ever
materialising the instance cross product; memory stays proportional to the
number of distinct supers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .graph import CA, EOA, KIND_CALL, KIND_TRANS, HeterogeneousGraph

TIME_AWARE = "time_aware"
TIMELESS = "timeless"
TIME_MODES = (TIME_AWARE, TIMELESS)

P1 = "P1"
P2 = "P2"
PATTERNS = (P1, P2)

RELATIONS = {P1: ("call", "trans"), P2: ("call", "call", "trans")}

# refined behaviour classes, encoded as two digits: pattern then case
REFINED_NAMES = {11: "P11", 12: "P12", 21: "P21", 22: "P22", 23: "P23", 24: "P24"}
REFINED_BY_PATTERN = {P1: ("P11", "P12"), P2: ("P21", "P22", "P23", "P24")}


@dataclass(frozen=True)
class SuperMetapath:
    """One merged super metapath; importance is the merged instance count."""

    node_sequence: tuple[str, ...]
    relation_sequence: tuple[str, ...]
    pattern: str
    refined_class: str
    importance: int


def _check_mode(mode: str) -> bool:
    if mode not in TIME_MODES:
        raise ValueError(f"mode must be one of {TIME_MODES}, got {mode!r}")
    return mode == TIME_AWARE


def refine(sm: SuperMetapath) -> str:
    """Behaviour class from node equalities alone (pure function).

    P1 splits on head vs tail identity; P2 additionally on whether the middle
    hop is a contract self-call.
    """
    nodes = sm.node_sequence
    head, target, tail = nodes[0], nodes[1], nodes[-1]
    if sm.pattern == P1:
        return "P11" if head != tail else "P12"
    self_call = nodes[2] == target
    if not self_call:
        return "P21" if head != tail else "P22"
    return "P23" if head != tail else "P24"


def _refine_codes_p1(nodes: np.ndarray) -> np.ndarray:
    codes = np.full(nodes.shape[0], 11, dtype=np.uint8)
    codes[nodes[:, 0] == nodes[:, 2]] = 12
    return codes


def _refine_codes_p2(nodes: np.ndarray) -> np.ndarray:
    round_trip = nodes[:, 0] == nodes[:, 3]
    self_call = nodes[:, 1] == nodes[:, 2]
    codes = np.full(nodes.shape[0], 21, dtype=np.uint8)
    codes[round_trip & ~self_call] = 22
    codes[~round_trip & self_call] = 23
    codes[round_trip & self_call] = 24
    return codes


class SuperSet:
    """Columnar, canonically ordered collection of same-pattern supers."""

    def __init__(self, pattern: str, nodes: np.ndarray, importance: np.ndarray,
                 graph: HeterogeneousGraph, presorted: bool = False):
        width = 3 if pattern == P1 else 4
        nodes = np.asarray(nodes, dtype=np.int64).reshape(-1, width)
        importance = np.asarray(importance, dtype=np.int64)
        if not presorted and nodes.shape[0] > 1:
            rank = graph.ext_rank
            cols = [rank[nodes[:, j]] for j in range(width)]
            order = np.lexsort(tuple(reversed(cols)))
            nodes = nodes[order]
            importance = importance[order]
        self.pattern = pattern
        self.nodes = nodes
        self.importance = importance
        self.graph = graph
        self.refined = (_refine_codes_p1(nodes) if pattern == P1
                        else _refine_codes_p2(nodes))

    def __len__(self) -> int:
        return int(self.nodes.shape[0])

    def __iter__(self) -> Iterator[SuperMetapath]:
        acc = self.graph.accounts
        rel = RELATIONS[self.pattern]
        for row in range(len(self)):
            seq = tuple(acc[j] for j in self.nodes[row])
            yield SuperMetapath(seq, rel, self.pattern,
                                REFINED_NAMES[int(self.refined[row])],
                                int(self.importance[row]))

    def subset(self, mask: np.ndarray) -> "SuperSet":
        return SuperSet(self.pattern, self.nodes[mask], self.importance[mask],
                        self.graph, presorted=True)

    def total_importance(self) -> int:
        return int(self.importance.sum())

    def class_totals(self) -> dict[str, tuple[int, int]]:
        """Per refined class: (number of supers, summed importance)."""
        out = {}
        for code, name in REFINED_NAMES.items():
            if name not in REFINED_BY_PATTERN[self.pattern]:
                continue
            mask = self.refined == code
            out[name] = (int(mask.sum()), int(self.importance[mask].sum()))
        return out

    def to_dict(self) -> dict[tuple[str, ...], int]:
        """{external node sequence: importance} for comparisons."""
        acc = self.graph.accounts
        return {
            tuple(acc[j] for j in self.nodes[row]): int(self.importance[row])
            for row in range(len(self))
        }

    def head_column(self) -> np.ndarray:
        return self.nodes[:, 0]

    def target_column(self) -> np.ndarray:
        return self.nodes[:, 1]


# -- exact counting ------------------------------------------------------------


def _group_bounds(ids: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Start/end offsets of each run in an id-grouped array."""
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    ends = np.r_[starts[1:], ids.size]
    return ids[starts], starts, ends


def _eoa_in_calls(g: HeterogeneousGraph, c: int):
    blk = g.block(KIND_CALL)
    lo, hi = blk.in_indptr[c], blk.in_indptr[c + 1]
    src, ts = blk.in_src[lo:hi], blk.in_ts[lo:hi]
    keep = g.node_type[src] == EOA
    return src[keep], ts[keep]


def _eoa_out_trans(g: HeterogeneousGraph, c: int):
    blk = g.block(KIND_TRANS)
    lo, hi = blk.out_indptr[c], blk.out_indptr[c + 1]
    dst, ts = blk.out_dst[lo:hi], blk.out_ts[lo:hi]
    keep = g.node_type[dst] == EOA
    return dst[keep], ts[keep]


def _ca_out_calls(g: HeterogeneousGraph, c: int):
    blk = g.block(KIND_CALL)
    lo, hi = blk.out_indptr[c], blk.out_indptr[c + 1]
    dst, ts = blk.out_dst[lo:hi], blk.out_ts[lo:hi]
    keep = g.node_type[dst] == CA
    return dst[keep], ts[keep]


def _p1_rows_for_ca(g: HeterogeneousGraph, c: int, time_aware: bool):
    """(heads, targets, tails, importance) arrays for one contract account."""
    src, ts_in = _eoa_in_calls(g, c)
    if src.size == 0:
        return None
    dst, ts_out = _eoa_out_trans(g, c)
    if dst.size == 0:
        return None
    src_ids, src_starts, src_ends = _group_bounds(src)
    dst_ids, dst_starts, dst_ends = _group_bounds(dst)

    if time_aware:
        omega = np.empty((src_ids.size, dst_ids.size), dtype=np.int64)
        for r in range(src_ids.size):
            call_ts = ts_in[src_starts[r]:src_ends[r]]
            # per out-trans edge u: number of call timestamps strictly below u;
            # reduceat collapses that to one count per tail group
            below = np.searchsorted(call_ts, ts_out, side="left")
            omega[r] = np.add.reduceat(below, dst_starts)
    else:
        omega = np.multiply.outer(
            (src_ends - src_starts).astype(np.int64),
            (dst_ends - dst_starts).astype(np.int64),
        )

    flat = omega.ravel()
    keep = np.flatnonzero(flat > 0)
    if keep.size == 0:
        return None
    heads = np.repeat(src_ids, dst_ids.size)[keep]
    tails = np.tile(dst_ids, src_ids.size)[keep]
    targets = np.full(keep.size, c, dtype=np.int64)
    return heads, targets, tails, flat[keep]


def _p2_rows_for_ca(g: HeterogeneousGraph, c: int, time_aware: bool, tail_cache: dict):
    src, ts_in = _eoa_in_calls(g, c)
    if src.size == 0:
        return None
    mid, ts_mid = _ca_out_calls(g, c)
    if mid.size == 0:
        return None
    head_ids, head_starts, head_ends = _group_bounds(src)
    mid_ids, mid_starts, mid_ends = _group_bounds(mid)

    out_heads, out_targets, out_mids, out_tails, out_omega = [], [], [], [], []
    for k in range(mid_ids.size):
        d = int(mid_ids[k])
        cached = tail_cache.get(d)
        if cached is None:
            dst, ts_out = _eoa_out_trans(g, d)
            cached = (dst, ts_out, *(_group_bounds(dst) if dst.size else
                                     (np.empty(0, np.int64), np.empty(0, np.int64),
                                      np.empty(0, np.int64))))
            tail_cache[d] = cached
        dst, ts_out, tail_ids, tail_starts, tail_ends = cached
        if tail_ids.size == 0:
            continue
        mid_ts = ts_mid[mid_starts[k]:mid_ends[k]]

        if time_aware:
            left = np.empty((head_ids.size, mid_ts.size), dtype=np.int64)
            for r in range(head_ids.size):
                left[r] = np.searchsorted(ts_in[head_starts[r]:head_ends[r]],
                                          mid_ts, side="left")
            right = np.empty((mid_ts.size, tail_ids.size), dtype=np.int64)
            for j in range(tail_ids.size):
                t3 = ts_out[tail_starts[j]:tail_ends[j]]
                right[:, j] = t3.size - np.searchsorted(t3, mid_ts, side="right")
            omega = left @ right
        else:
            omega = np.multiply.outer(
                (head_ends - head_starts).astype(np.int64),
                (tail_ends - tail_starts).astype(np.int64),
            ) * mid_ts.size

        flat = omega.ravel()
        keep = np.flatnonzero(flat > 0)
        if keep.size == 0:
            continue
        out_heads.append(np.repeat(head_ids, tail_ids.size)[keep])
        out_tails.append(np.tile(tail_ids, head_ids.size)[keep])
        out_mids.append(np.full(keep.size, d, dtype=np.int64))
        out_targets.append(np.full(keep.size, c, dtype=np.int64))
        out_omega.append(flat[keep])

    if not out_heads:
        return None
    return (np.concatenate(out_heads), np.concatenate(out_targets),
            np.concatenate(out_mids), np.concatenate(out_tails),
            np.concatenate(out_omega))


def _run_per_ca(g: HeterogeneousGraph, worker, threads: int) -> list:
    cas = g.ca_ids()
    if threads <= 1 or cas.size < 2:
        return [worker(int(c)) for c in cas]
    chunks = np.array_split(cas, min(threads * 4, cas.size))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(lambda chunk: [worker(int(c)) for c in chunk], chunks)
        return [r for part in parts for r in part]


def enumerate_p1(g: HeterogeneousGraph, mode: str = TIME_AWARE,
                 threads: int = 1) -> SuperSet:
    """All P1 supers with exact importance counts, canonically ordered."""
    time_aware = _check_mode(mode)
    results = _run_per_ca(g, lambda c: _p1_rows_for_ca(g, c, time_aware), threads)
    results = [r for r in results if r is not None]
    if not results:
        empty = np.empty((0, 3), dtype=np.int64)
        return SuperSet(P1, empty, np.empty(0, np.int64), g, presorted=True)
    heads = np.concatenate([r[0] for r in results])
    targets = np.concatenate([r[1] for r in results])
    tails = np.concatenate([r[2] for r in results])
    omega = np.concatenate([r[3] for r in results])
    return SuperSet(P1, np.stack([heads, targets, tails], axis=1), omega, g)


def enumerate_p2(g: HeterogeneousGraph, mode: str = TIME_AWARE,
                 threads: int = 1) -> SuperSet:
    """All P2 supers (middle hop may be a self-call), canonically ordered."""
    time_aware = _check_mode(mode)
    tail_cache: dict = {}
    results = _run_per_ca(
        g, lambda c: _p2_rows_for_ca(g, c, time_aware, tail_cache), threads)
    results = [r for r in results if r is not None]
    if not results:
        empty = np.empty((0, 4), dtype=np.int64)
        return SuperSet(P2, empty, np.empty(0, np.int64), g, presorted=True)
    cols = [np.concatenate([r[i] for r in results]) for i in range(5)]
    nodes = np.stack(cols[:4], axis=1)
    return SuperSet(P2, nodes, cols[4], g)


def enumerate_pattern(g: HeterogeneousGraph, pattern: str, mode: str = TIME_AWARE,
                      threads: int = 1) -> SuperSet:
    if pattern == P1:
        return enumerate_p1(g, mode, threads)
    if pattern == P2:
        return enumerate_p2(g, mode, threads)
    raise ValueError(f"pattern must be P1 or P2, got {pattern!r}")


# -- independent oracle --------------------------------------------------------


def brute_force_supers(g: HeterogeneousGraph, pattern: str,
                       mode: str = TIME_AWARE) -> list[SuperMetapath]:
    """Reference enumerator: nested loops over raw edges, dict grouping.

    Intended for small graphs only; shares nothing with the fast counters.
    """
    time_aware = _check_mode(mode)
    edges = list(g.edges())
    calls = [e for e in edges if e.kind == "call"]
    trans = [e for e in edges if e.kind == "trans"]
    typ = g.type_of
    groups: dict[tuple[str, ...], int] = {}

    if pattern == P1:
        for e1 in calls:
            if typ(e1.src) != "EOA" or typ(e1.dst) != "CA":
                continue
            for e2 in trans:
                if e2.src != e1.dst or typ(e2.dst) != "EOA":
                    continue
                if time_aware and not e1.timestamp < e2.timestamp:
                    continue
                key = (e1.src, e1.dst, e2.dst)
                groups[key] = groups.get(key, 0) + 1
    elif pattern == P2:
        for e1 in calls:
            if typ(e1.src) != "EOA" or typ(e1.dst) != "CA":
                continue
            for e2 in calls:
                if e2.src != e1.dst or typ(e2.dst) != "CA":
                    continue
                if time_aware and not e1.timestamp < e2.timestamp:
                    continue
                for e3 in trans:
                    if e3.src != e2.dst or typ(e3.dst) != "EOA":
                        continue
                    if time_aware and not e2.timestamp < e3.timestamp:
                        continue
                    key = (e1.src, e1.dst, e2.dst, e3.dst)
                    groups[key] = groups.get(key, 0) + 1
    else:
        raise ValueError(f"pattern must be P1 or P2, got {pattern!r}")

    out = []
    for key in sorted(groups):
        head, target, tail = key[0], key[1], key[-1]
        if pattern == P1:
            cls = "P11" if head != tail else "P12"
        else:
            if key[2] != target:
                cls = "P21" if head != tail else "P22"
            else:
                cls = "P23" if head != tail else "P24"
        out.append(SuperMetapath(key, RELATIONS[pattern], pattern, cls, groups[key]))
    return out


# -- reporting -----------------------------------------------------------------


@dataclass
class MetapathStats:
    """Per refined class: super counts and summed importance, plus sums."""

    super_counts: dict[str, int]
    importance_totals: dict[str, int]

    def pattern_sum(self, pattern: str) -> tuple[int, int]:
        names = REFINED_BY_PATTERN[pattern]
        return (sum(self.super_counts.get(n, 0) for n in names),
                sum(self.importance_totals.get(n, 0) for n in names))

    def rows(self) -> list[tuple[str, str, int, int]]:
        out = []
        for pattern in PATTERNS:
            for name in REFINED_BY_PATTERN[pattern]:
                out.append((pattern, name, self.super_counts.get(name, 0),
                            self.importance_totals.get(name, 0)))
            n, om = self.pattern_sum(pattern)
            out.append((pattern, "Sum", n, om))
        return out


def metapath_stats(supers: SuperSet | Iterable[SuperSet]) -> MetapathStats:
    sets = [supers] if isinstance(supers, SuperSet) else list(supers)
    counts: dict[str, int] = {}
    totals: dict[str, int] = {}
    for s in sets:
        for name, (n, om) in s.class_totals().items():
            counts[name] = counts.get(name, 0) + n
            totals[name] = totals.get(name, 0) + om
    return MetapathStats(counts, totals)


def write_supers_csv(sets: Iterable[SuperSet], path: str | Path) -> None:
    """Audit dump: pattern,refined_class,node_sequence,omega (canonical order)."""
    ordered = sorted(sets, key=lambda s: s.pattern)
    with open(path, "w", newline="") as fh:
        fh.write("pattern,refined_class,node_sequence,omega\n")
        for s in ordered:
            acc = s.graph.accounts
            for row in range(len(s)):
                seq = "|".join(acc[j] for j in s.nodes[row])
                name = REFINED_NAMES[int(s.refined[row])]
                fh.write(f"{s.pattern},{name},{seq},{int(s.importance[row])}\n")
