"""Ground-truth checkers for recorded histories.

Everything here works over committed transactions only. Two operations
conflict when they touch the same item from different transactions and at
least one is a write; the conflict is directed by operation instants, and by
commit order when the instants tie (ties are reported for audit).

build_serialization_graph materializes every conflicting pair and is meant
for small histories; conflict_skeleton builds a reduced edge set that is
cycle-equivalent (omitted edges are transitively implied through the per-item
write chain) and scales to large simulation runs. check_commitment_ordering
streams over per-item scans and is exact at any scale.
"""

from dataclasses import dataclass, field
from itertools import permutations

from .core import History, OpEvent, OpKind


class OracleScaleError(ValueError):
    """The brute-force oracle refuses histories beyond its factorial budget."""


BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class EdgeLabel:
    item_id: int
    kinds: tuple[OpKind, OpKind]
    instants: tuple[int, int]


@dataclass
class SerializationGraph:
    """Directed graph over committed transactions."""

    nodes: set[int] = field(default_factory=set)
    edges: dict[tuple[int, int], list[EdgeLabel]] = field(default_factory=dict)
    ties: list[tuple[int, int, int, int]] = field(default_factory=list)  # (item, a, b, instant)

    def add_edge(self, src: int, dst: int, label: EdgeLabel) -> None:
        self.edges.setdefault((src, dst), []).append(label)

    def successors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        for src, dst in self.edges:
            adj[src].append(dst)
        for lst in adj.values():
            lst.sort()
        return adj


def _committed_ops_by_item(history: History,
                           commits: dict[int, int]) -> dict[int, list[tuple[int, int, int, OpKind]]]:
    """item -> [(instant, commit_instant, txn, kind)] sorted by (instant, commit)."""
    per_item: dict[int, list[tuple[int, int, int, OpKind]]] = {}
    for ev in history.events:
        if isinstance(ev, OpEvent) and ev.txn_id in commits:
            per_item.setdefault(ev.op.item_id, []).append(
                (ev.instant, commits[ev.txn_id], ev.txn_id, ev.op.kind))
    for ops in per_item.values():
        ops.sort(key=lambda o: (o[0], o[1], o[2]))
    return per_item


def _conflicts(kind_a: OpKind, kind_b: OpKind) -> bool:
    return kind_a is OpKind.WRITE or kind_b is OpKind.WRITE


def build_serialization_graph(history: History) -> SerializationGraph:
    """Materialize every conflict edge of the committed part of a history.

    Edges point from the transaction whose conflicting operation came first
    to the one whose operation came later, one edge per ordered transaction
    pair, labeled with each inducing operation pair. Quadratic in per-item
    operation count; use conflict_skeleton for large histories.
    """
    commits = history.committed()
    graph = SerializationGraph(nodes=set(commits))
    per_item = _committed_ops_by_item(history, commits)
    for item_id, ops in sorted(per_item.items()):
        for a in range(len(ops)):
            t_a, c_a, txn_a, kind_a = ops[a]
            for b in range(a + 1, len(ops)):
                t_b, c_b, txn_b, kind_b = ops[b]
                if txn_a == txn_b or not _conflicts(kind_a, kind_b):
                    continue
                if t_a == t_b:
                    # tie: direction follows commit order (the sort already
                    # placed the earlier committer first)
                    graph.ties.append((item_id, txn_a, txn_b, t_a))
                graph.add_edge(txn_a, txn_b,
                               EdgeLabel(item_id, (kind_a, kind_b), (t_a, t_b)))
    return graph


def conflict_skeleton(history: History) -> SerializationGraph:
    """Reduced conflict graph, cycle-equivalent to the full one.

    Per item, in conflict order: consecutive writes of different transactions
    are linked, and each read is linked from the write just before it and to
    the write just after it. Every omitted conflict edge is implied by a path
    through the write chain, so a cycle exists here iff one exists in the full
    graph.
    """
    commits = history.committed()
    graph = SerializationGraph(nodes=set(commits))
    per_item = _committed_ops_by_item(history, commits)
    for item_id, ops in sorted(per_item.items()):
        last_write: tuple[int, int, int, OpKind] | None = None
        pending_reads: list[tuple[int, int, int, OpKind]] = []
        for op in ops:
            t, c, txn, kind = op
            if kind is OpKind.WRITE:
                if last_write is not None and last_write[2] != txn:
                    graph.add_edge(last_write[2], txn,
                                   EdgeLabel(item_id, (OpKind.WRITE, OpKind.WRITE),
                                             (last_write[0], t)))
                for r in pending_reads:
                    if r[2] != txn:
                        graph.add_edge(r[2], txn,
                                       EdgeLabel(item_id, (OpKind.READ, OpKind.WRITE),
                                                 (r[0], t)))
                last_write = op
                pending_reads = []
            else:
                if last_write is not None and last_write[2] != txn:
                    graph.add_edge(last_write[2], txn,
                                   EdgeLabel(item_id, (OpKind.WRITE, OpKind.READ),
                                             (last_write[0], t)))
                pending_reads.append(op)
    return graph


@dataclass
class CycleCheck:
    acyclic: bool
    cycle: list[int] | None = None

    def __bool__(self) -> bool:
        return self.acyclic


def is_acyclic(graph: SerializationGraph) -> CycleCheck:
    """Depth-first cycle search; returns one witness cycle when cyclic."""
    adj = graph.successors()
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph.nodes}
    for root in sorted(graph.nodes):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(adj[root]))]
        color[root] = GREY
        path = [root]
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == GREY:
                    return CycleCheck(False, path[path.index(nxt):])
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    path.append(nxt)
                    stack.append((nxt, iter(adj[nxt])))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
                path.pop()
    return CycleCheck(True)


@dataclass
class CoCheck:
    ok: bool
    violation: tuple[int, int, int, tuple[int, int]] | None = None  # (txn_i, txn_j, item, instants)
    ties: list[tuple[int, int, int, int]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _push_max(best, second, entry):
    """Track the max (commit, instant, txn) entry plus the max from a
    different transaction, so every op can be bounded against other txns."""
    if best is None:
        return entry, None
    if entry[2] == best[2]:
        return (entry, second) if entry > best else (best, second)
    if entry > best:
        return entry, best
    if second is None or entry > second:
        return best, entry
    return best, second


def check_commitment_ordering(history: History) -> CoCheck:
    """Verify commit order matches conflict order for every conflicting pair.

    For each item the committed operations are scanned in instant order; a
    read must commit strictly after every strictly-earlier write on the item,
    a write strictly after every strictly-earlier read or write. Ties in
    operation instants are directed by commit order, hence consistent by
    construction; they are collected for audit. Conflicting operations with
    equal instants and equal commit instants admit no strict order and are
    violations.
    """
    commits = history.committed()
    per_item = _committed_ops_by_item(history, commits)
    ties: list[tuple[int, int, int, int]] = []
    for item_id, ops in sorted(per_item.items()):
        w1 = w2 = None   # (commit, instant, txn) maxima over writes
        a1 = a2 = None   # maxima over reads and writes
        i = 0
        n = len(ops)
        while i < n:
            j = i
            while j < n and ops[j][0] == ops[i][0]:
                j += 1
            group = ops[i:j]
            if len(group) > 1:
                for x in range(len(group)):
                    for y in range(x + 1, len(group)):
                        gx, gy = group[x], group[y]
                        if gx[2] != gy[2] and _conflicts(gx[3], gy[3]):
                            if gx[1] == gy[1]:
                                return CoCheck(False,
                                               violation=(gx[2], gy[2], item_id, (gx[0], gy[0])),
                                               ties=ties)
                            ties.append((item_id, gx[2], gy[2], gx[0]))
            for t, c, txn, kind in group:
                if kind is OpKind.READ:
                    bound = w1 if (w1 is not None and w1[2] != txn) else w2
                else:
                    bound = a1 if (a1 is not None and a1[2] != txn) else a2
                if bound is not None and bound[0] >= c:
                    return CoCheck(False,
                                   violation=(bound[2], txn, item_id, (bound[1], t)),
                                   ties=ties)
            for t, c, txn, kind in group:
                entry = (c, t, txn)
                a1, a2 = _push_max(a1, a2, entry)
                if kind is OpKind.WRITE:
                    w1, w2 = _push_max(w1, w2, entry)
            i = j
    return CoCheck(True, ties=ties)


def brute_force_serializable(history: History) -> bool:
    """Exhaustive conflict-equivalence search over committed transactions.

    True iff some total order of the committed transactions orders every
    conflicting pair consistently with the history. Derives its conflict
    pairs directly from the events, independently of the graph builder.
    Refuses more than BRUTE_FORCE_LIMIT committed transactions.
    """
    commits = history.committed()
    txns = sorted(commits)
    if len(txns) > BRUTE_FORCE_LIMIT:
        raise OracleScaleError(
            f"{len(txns)} committed transactions exceed the brute-force limit "
            f"of {BRUTE_FORCE_LIMIT}")
    per_item: dict[int, list[tuple[int, int, int, OpKind]]] = {}
    for ev in history.events:
        if isinstance(ev, OpEvent) and ev.txn_id in commits:
            per_item.setdefault(ev.op.item_id, []).append(
                (ev.instant, commits[ev.txn_id], ev.txn_id, ev.op.kind))
    ordered_pairs: set[tuple[int, int]] = set()
    for ops in per_item.values():
        for x in range(len(ops)):
            for y in range(len(ops)):
                if x == y:
                    continue
                t_x, c_x, txn_x, kind_x = ops[x]
                t_y, c_y, txn_y, kind_y = ops[y]
                if txn_x == txn_y or not (kind_x is OpKind.WRITE or kind_y is OpKind.WRITE):
                    continue
                if (t_x, c_x, txn_x) < (t_y, c_y, txn_y):
                    ordered_pairs.add((txn_x, txn_y))
    for perm in permutations(txns):
        position = {txn: k for k, txn in enumerate(perm)}
        if all(position[i] < position[j] for i, j in ordered_pairs):
            return True
    return False
