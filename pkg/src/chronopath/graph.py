"""Temporal heterogeneous account graph: ingestion, storage, adjacency queries.

Accounts are externally-owned (EOA) or contract (CA) nodes; edges are directed,
timestamped and typed (``trans`` value transfers, ``call`` contract calls).
Multi-edges between the same pair at different timestamps are preserved.
Internally the graph is immutable after construction: edges live in per-kind
CSR blocks whose per-node slices are grouped by neighbour with timestamps
sorted inside each group, which is the layout the metapath counters need.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ParseError, TypeConflictError, UnknownAccountError

EDGE_KINDS = ("trans", "call")
KIND_TRANS = 0
KIND_CALL = 1
_KIND_CODE = {"trans": KIND_TRANS, "call": KIND_CALL}

EOA = 0
CA = 1
NODE_TYPES = ("EOA", "CA")
_TYPE_CODE = {"EOA": EOA, "CA": CA}

EDGE_CSV_HEADER = ["src", "dst", "kind", "timestamp", "value"]
TYPE_CSV_HEADER = ["account", "type"]


@dataclass(frozen=True)
class TemporalEdge:
    """One directed, timestamped, valued edge."""

    src: str
    dst: str
    kind: str
    timestamp: int
    value: float


@dataclass(frozen=True)
class LabelSet:
    """Known Ponzi contract accounts plus a provenance note."""

    ponzi_accounts: frozenset[str]
    source: str = ""

    def __len__(self) -> int:
        return len(self.ponzi_accounts)


@dataclass(frozen=True)
class GraphStats:
    n_nodes: int
    n_edges: int
    n_ca: int
    n_eoa: int
    n_call_edges: int
    n_trans_edges: int
    n_labels: int

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "n_ca": self.n_ca,
            "n_eoa": self.n_eoa,
            "n_call_edges": self.n_call_edges,
            "n_trans_edges": self.n_trans_edges,
            "n_labels": self.n_labels,
        }


class _KindBlock:
    """CSR adjacency for one edge kind, both directions.

    Out slices are ordered by (dst, ts, value), in slices by (src, ts, value),
    so neighbour groups are contiguous and internally timestamp-sorted.
    """

    __slots__ = (
        "out_indptr", "out_dst", "out_ts", "out_val",
        "in_indptr", "in_src", "in_ts", "in_val",
    )

    def __init__(self, n_nodes: int, src: np.ndarray, dst: np.ndarray,
                 ts: np.ndarray, val: np.ndarray):
        order = np.lexsort((val, ts, dst, src))
        s = src[order]
        self.out_dst = dst[order]
        self.out_ts = ts[order]
        self.out_val = val[order]
        counts = np.bincount(s, minlength=n_nodes)
        self.out_indptr = np.concatenate(([0], np.cumsum(counts)))

        order = np.lexsort((val, ts, src, dst))
        d = dst[order]
        self.in_src = src[order]
        self.in_ts = ts[order]
        self.in_val = val[order]
        counts = np.bincount(d, minlength=n_nodes)
        self.in_indptr = np.concatenate(([0], np.cumsum(counts)))

    def n_edges(self) -> int:
        return int(self.out_dst.shape[0])


class HeterogeneousGraph:
    """Immutable node-typed temporal multigraph.

    Construct via :func:`ingest_edges`, :meth:`from_edges` or
    :meth:`from_arrays`; after that all queries are read-only and safe to
    share across threads.
    """

    def __init__(self, accounts: list[str], node_type: np.ndarray,
                 blocks: dict[int, _KindBlock]):
        self.accounts = accounts
        self._index = {a: i for i, a in enumerate(accounts)}
        self.node_type = node_type
        self._blocks = blocks
        # rank of each internal id when external ids are sorted; used for
        # canonical orderings that must not depend on first-seen order
        self.ext_rank = np.empty(len(accounts), dtype=np.int64)
        self.ext_rank[np.argsort(np.array(accounts, dtype=object), kind="stable")] = \
            np.arange(len(accounts))

    # -- construction ------------------------------------------------------

    @classmethod
    def from_arrays(cls, accounts: Sequence[str], node_type: np.ndarray,
                    src: np.ndarray, dst: np.ndarray, kind: np.ndarray,
                    ts: np.ndarray, val: np.ndarray) -> "HeterogeneousGraph":
        """Low-level constructor from parallel edge arrays of internal ids."""
        accounts = list(accounts)
        n = len(accounts)
        node_type = np.asarray(node_type, dtype=np.uint8)
        if node_type.shape != (n,):
            raise ConfigError("node_type length must match accounts")
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        kind = np.asarray(kind, dtype=np.uint8)
        ts = np.asarray(ts, dtype=np.int64)
        val = np.asarray(val, dtype=np.float64)
        blocks = {}
        for code in (KIND_TRANS, KIND_CALL):
            mask = kind == code
            blocks[code] = _KindBlock(n, src[mask], dst[mask], ts[mask], val[mask])
        return cls(accounts, node_type, blocks)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], types: Mapping[str, str] | None = None,
                   default_type: str | None = None) -> "HeterogeneousGraph":
        """Build from an iterable of (src, dst, kind, timestamp, value) tuples.

        ``types`` maps account id to "EOA"/"CA"; accounts it does not cover
        fall back to ``default_type`` or, with both absent, to the inference
        rule: an account that receives at least one call edge is a CA (so is
        an account that sends trans edges while also receiving calls, which
        the first condition already implies); every other account is an EOA.

        Every account named in ``types`` joins the node set even when no edge
        touches it, so saving and reloading keeps isolated nodes.
        """
        accounts: list[str] = []
        index: dict[str, int] = {}

        def intern(a: str) -> int:
            i = index.get(a)
            if i is None:
                i = len(accounts)
                index[a] = i
                accounts.append(a)
            return i

        srcs: list[int] = []
        dsts: list[int] = []
        kinds: list[int] = []
        tss: list[int] = []
        vals: list[float] = []
        for e in edges:
            s, d, k, t, v = e
            srcs.append(intern(s))
            dsts.append(intern(d))
            kinds.append(_KIND_CODE[k])
            tss.append(t)
            vals.append(v)
        if types is not None:
            for a in types:
                intern(a)

        n = len(accounts)
        src = np.array(srcs, dtype=np.int64)
        dst = np.array(dsts, dtype=np.int64)
        kind = np.array(kinds, dtype=np.uint8)
        ts = np.array(tss, dtype=np.int64)
        val = np.array(vals, dtype=np.float64)

        if types is None and default_type is None:
            node_type = _infer_types(n, src, dst, kind)
        else:
            node_type = np.empty(n, dtype=np.uint8)
            missing = []
            for a, i in index.items():
                declared = types.get(a) if types is not None else None
                if declared is None:
                    declared = default_type
                if declared is None:
                    missing.append(a)
                    continue
                node_type[i] = _TYPE_CODE[declared]
            if missing:
                raise ConfigError(
                    f"type file covers no type for {len(missing)} account(s), "
                    f"e.g. {missing[0]!r}, and declares no default"
                )
        return cls.from_arrays(accounts, node_type, src, dst, kind, ts, val)

    # -- queries -----------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.accounts)

    @property
    def n_edges(self) -> int:
        return sum(b.n_edges() for b in self._blocks.values())

    def n_edges_of_kind(self, kind: str) -> int:
        return self._blocks[_KIND_CODE[kind]].n_edges()

    def has_account(self, account: str) -> bool:
        return account in self._index

    def account_id(self, account: str) -> int:
        try:
            return self._index[account]
        except KeyError:
            raise UnknownAccountError(account) from None

    def type_of(self, account: str) -> str:
        return NODE_TYPES[self.node_type[self.account_id(account)]]

    def block(self, kind_code: int) -> _KindBlock:
        return self._blocks[kind_code]

    def adjacency(self, account: str, direction: str, kind: str) -> list[TemporalEdge]:
        """All edges of ``kind`` incident to ``account`` in ``direction``.

        Sorted ascending by timestamp; timestamp ties are ordered by
        (neighbour, value) on out-lists and by (value, source) on in-lists,
        which makes the order a pure function of the graph's content.
        """
        i = self.account_id(account)
        if direction not in ("in", "out"):
            raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
        blk = self._blocks[_KIND_CODE[kind]]
        if direction == "out":
            lo, hi = blk.out_indptr[i], blk.out_indptr[i + 1]
            nbr, ts, val = blk.out_dst[lo:hi], blk.out_ts[lo:hi], blk.out_val[lo:hi]
            # tie-break on external ids, not internal ones, so the order
            # survives re-ingestion in a different first-seen order
            order = np.lexsort((val, self.ext_rank[nbr], ts))
            return [
                TemporalEdge(account, self.accounts[nbr[j]], kind, int(ts[j]), float(val[j]))
                for j in order
            ]
        lo, hi = blk.in_indptr[i], blk.in_indptr[i + 1]
        nbr, ts, val = blk.in_src[lo:hi], blk.in_ts[lo:hi], blk.in_val[lo:hi]
        order = np.lexsort((self.ext_rank[nbr], val, ts))
        return [
            TemporalEdge(self.accounts[nbr[j]], account, kind, int(ts[j]), float(val[j]))
            for j in order
        ]

    def edges(self) -> Iterator[TemporalEdge]:
        """Iterate every edge once (storage order; deterministic)."""
        for kind in EDGE_KINDS:
            blk = self._blocks[_KIND_CODE[kind]]
            for i in range(self.n_nodes):
                lo, hi = blk.out_indptr[i], blk.out_indptr[i + 1]
                for j in range(lo, hi):
                    yield TemporalEdge(
                        self.accounts[i], self.accounts[blk.out_dst[j]],
                        kind, int(blk.out_ts[j]), float(blk.out_val[j]),
                    )

    def ca_ids(self) -> np.ndarray:
        return np.flatnonzero(self.node_type == CA)

    def accounts_of_type(self, node_type: str) -> list[str]:
        code = _TYPE_CODE[node_type]
        return [self.accounts[i] for i in np.flatnonzero(self.node_type == code)]


def _infer_types(n: int, src: np.ndarray, dst: np.ndarray,
                 kind: np.ndarray) -> np.ndarray:
    receives_call = np.zeros(n, dtype=bool)
    receives_call[dst[kind == KIND_CALL]] = True
    sends_trans = np.zeros(n, dtype=bool)
    sends_trans[src[kind == KIND_TRANS]] = True
    is_ca = receives_call | (sends_trans & receives_call)
    return is_ca.astype(np.uint8)


class HomogeneousGraph:
    """Timestamp-free, kind-free projection: one directed edge per pair."""

    def __init__(self, accounts: list[str], src: np.ndarray, dst: np.ndarray):
        self.accounts = accounts
        order = np.lexsort((dst, src))
        self.src = src[order]
        self.dst = dst[order]

    @property
    def n_nodes(self) -> int:
        return len(self.accounts)

    @property
    def n_edges(self) -> int:
        return int(self.src.shape[0])

    def edge_set(self) -> set[tuple[str, str]]:
        return {
            (self.accounts[s], self.accounts[d])
            for s, d in zip(self.src.tolist(), self.dst.tolist())
        }


def project_homogeneous(g: HeterogeneousGraph) -> HomogeneousGraph:
    """Merge all multi-edges of any kind into single directed edges."""
    if g.n_nodes == 0:
        empty = np.empty(0, dtype=np.int64)
        return HomogeneousGraph(g.accounts, empty, empty)
    pairs = []
    for code in (KIND_TRANS, KIND_CALL):
        blk = g.block(code)
        src = np.repeat(np.arange(g.n_nodes, dtype=np.int64),
                        np.diff(blk.out_indptr))
        pairs.append(src * g.n_nodes + blk.out_dst)
    keys = np.unique(np.concatenate(pairs))
    return HomogeneousGraph(g.accounts, keys // g.n_nodes, keys % g.n_nodes)


def stats(g: HeterogeneousGraph, labels: LabelSet | None = None) -> GraphStats:
    n_ca = int(np.count_nonzero(g.node_type == CA))
    return GraphStats(
        n_nodes=g.n_nodes,
        n_edges=g.n_edges,
        n_ca=n_ca,
        n_eoa=g.n_nodes - n_ca,
        n_call_edges=g.n_edges_of_kind("call"),
        n_trans_edges=g.n_edges_of_kind("trans"),
        n_labels=len(labels) if labels is not None else 0,
    )


# -- parsing and file I/O ----------------------------------------------------

def _parse_row(row: Sequence, line: int) -> tuple[str, str, str, int, float]:
    if len(row) != 5:
        raise ParseError(f"expected 5 fields, got {len(row)}", line)
    s, d, k, t, v = (str(x).strip() for x in row)
    if not s or not d:
        raise ParseError("empty account id", line)
    if k not in _KIND_CODE:
        raise ParseError(f"unknown edge kind {k!r}", line)
    try:
        ts = int(t)
    except ValueError:
        raise ParseError(f"bad timestamp {t!r}", line) from None
    if ts < 0:
        raise ParseError(f"negative timestamp {ts}", line)
    try:
        val = float(v)
    except ValueError:
        raise ParseError(f"bad value {v!r}", line) from None
    if not np.isfinite(val) or val < 0:
        raise ParseError(f"value must be finite and non-negative, got {v!r}", line)
    return s, d, k, ts, val


def read_type_file(path: str | Path) -> tuple[dict[str, str], str | None]:
    """Read an ``account,type`` CSV; a ``*`` account row declares a default."""
    types: dict[str, str] = {}
    default: str | None = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TYPE_CSV_HEADER:
            raise ParseError(f"type file must start with header {','.join(TYPE_CSV_HEADER)}", 1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line)
            account, t = row[0].strip(), row[1].strip()
            if t not in _TYPE_CODE:
                raise ParseError(f"unknown node type {t!r}", line)
            if account == "*":
                if default is not None and default != t:
                    raise TypeConflictError("conflicting default types in type file")
                default = t
                continue
            prev = types.get(account)
            if prev is not None and prev != t:
                raise TypeConflictError(
                    f"account {account!r} declared both {prev} and {t}"
                )
            types[account] = t
    return types, default


def ingest_edges(source: str | Path | Iterable[Sequence],
                 types: str | Path | Mapping[str, str] | None = None,
                 default_type: str | None = None) -> HeterogeneousGraph:
    """Build a graph from an edge CSV file or an iterable of row tuples.

    Files must carry the header ``src,dst,kind,timestamp,value``. When
    ``types`` is a path it is read with :func:`read_type_file`; a mapping is
    used as-is; ``None`` triggers type inference (see
    :meth:`HeterogeneousGraph.from_edges`).
    """
    if isinstance(types, (str, Path)):
        types, file_default = read_type_file(types)
        if default_type is None:
            default_type = file_default

    def parsed_file(path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return
            if [h.strip() for h in header] != EDGE_CSV_HEADER:
                raise ParseError(
                    f"edge file must start with header {','.join(EDGE_CSV_HEADER)}", 1
                )
            for line, row in enumerate(reader, start=2):
                if not row:
                    continue
                yield _parse_row(row, line)

    def parsed_rows(rows):
        for line, row in enumerate(rows, start=1):
            yield _parse_row(row, line)

    if isinstance(source, (str, Path)):
        edge_iter = parsed_file(source)
    else:
        edge_iter = parsed_rows(source)
    return HeterogeneousGraph.from_edges(edge_iter, types=types, default_type=default_type)


def load_labels(path: str | Path, g: HeterogeneousGraph | None = None) -> LabelSet:
    """Read one account id per line; validate against ``g`` when given."""
    with open(path) as fh:
        ids = [line.strip() for line in fh if line.strip()]
    labels = LabelSet(frozenset(ids), source=str(path))
    if g is not None:
        validate_labels(labels, g)
    return labels


def validate_labels(labels: LabelSet, g: HeterogeneousGraph) -> None:
    for a in labels.ponzi_accounts:
        if not g.has_account(a):
            raise UnknownAccountError(a)
        if g.type_of(a) != "CA":
            raise ConfigError(f"labeled account {a!r} is not a contract account")


def _fmt_value(v: float) -> str:
    return f"{v:.17g}"


def save_graph(g: HeterogeneousGraph, directory: str | Path) -> tuple[Path, Path]:
    """Write an ``edges.csv`` / ``types.csv`` snapshot pair.

    Rows are emitted in canonical (src, dst, kind, timestamp, value) order so
    a snapshot is a pure function of the graph's content; re-ingesting it
    reproduces the graph exactly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    edges_path = directory / "edges.csv"
    types_path = directory / "types.csv"
    rows = sorted(
        g.edges(), key=lambda e: (e.src, e.dst, e.kind, e.timestamp, e.value)
    )
    with open(edges_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EDGE_CSV_HEADER)
        for e in rows:
            w.writerow([e.src, e.dst, e.kind, e.timestamp, _fmt_value(e.value)])
    with open(types_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TYPE_CSV_HEADER)
        for a in sorted(g.accounts):
            w.writerow([a, g.type_of(a)])
    return edges_path, types_path


def load_graph(directory: str | Path) -> HeterogeneousGraph:
    directory = Path(directory)
    return ingest_edges(directory / "edges.csv", types=directory / "types.csv")


def graphs_equal(a: HeterogeneousGraph, b: HeterogeneousGraph) -> bool:
    """Equality on external ids: node types, edge multisets, adjacency order."""
    if sorted(a.accounts) != sorted(b.accounts):
        return False
    if any(a.type_of(x) != b.type_of(x) for x in a.accounts):
        return False
    if sorted(a.edges(), key=_edge_key) != sorted(b.edges(), key=_edge_key):
        return False
    for x in a.accounts:
        for direction in ("in", "out"):
            for kind in EDGE_KINDS:
                if a.adjacency(x, direction, kind) != b.adjacency(x, direction, kind):
                    return False
    return True


def _edge_key(e: TemporalEdge):
    return (e.src, e.dst, e.kind, e.timestamp, e.value)
