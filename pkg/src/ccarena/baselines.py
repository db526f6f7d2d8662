"""Comparison protocols: strict two-phase locking and classic optimistic CC.

Both sit behind the same server-side surface the simulator drives: register a
transaction, process its operations, decide its commit. The lock table grants
shared/exclusive locks with FIFO wait queues and breaks waits-for cycles by
aborting the youngest transaction in the cycle. The optimistic book validates
a committer backwards: it aborts if any transaction that committed during the
validator's lifetime wrote an item the validator read.
"""

from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum

from .core import Outcome


class LockMode(Enum):
    SHARED = "S"
    EXCLUSIVE = "X"


def compatible(held: LockMode, wanted: LockMode) -> bool:
    return held is LockMode.SHARED and wanted is LockMode.SHARED


@dataclass(frozen=True)
class Granted:
    pass


@dataclass(frozen=True)
class Queued:
    pass


@dataclass(frozen=True)
class DeadlockVictim:
    txn_id: int


@dataclass
class _Request:
    txn_id: int
    mode: LockMode


@dataclass
class _ItemLocks:
    granted: dict[int, LockMode] = field(default_factory=dict)
    queue: list[_Request] = field(default_factory=list)


class LockTable:
    """Per-item granted sets and FIFO wait queues for strict 2PL.

    Transactions never release before their terminal event; release_all drops
    everything at commit/abort and re-grants compatible queue heads. The
    waits-for graph is derived from the queues: a waiter points at every
    conflicting granted holder and at every conflicting request queued ahead
    of it.
    """

    def __init__(self):
        self._items: dict[int, _ItemLocks] = {}
        self._begin: dict[int, int] = {}
        self._presence: dict[int, set[int]] = {}   # txn -> items it is granted/queued on
        self._contended: set[int] = set()          # items with a nonempty queue

    def register_txn(self, txn_id: int, begin_instant: int) -> None:
        self._begin[txn_id] = begin_instant

    def _locks(self, item_id: int) -> _ItemLocks:
        if item_id not in self._items:
            self._items[item_id] = _ItemLocks()
        return self._items[item_id]

    def _note_presence(self, txn_id: int, item_id: int) -> None:
        self._presence.setdefault(txn_id, set()).add(item_id)

    def holds(self, txn_id: int, item_id: int, mode: LockMode) -> bool:
        held = self._locks(item_id).granted.get(txn_id)
        if held is None:
            return False
        return held is LockMode.EXCLUSIVE or mode is LockMode.SHARED

    def acquire(self, txn_id: int, item_id: int, mode: LockMode):
        """Grant, enqueue, or name a deadlock victim.

        Re-acquiring an already-held stronger-or-equal lock is granted
        idempotently. A shared holder asking for exclusive upgrades in place
        when it is the sole holder, otherwise it queues. After an enqueue,
        cycle detection runs; on a cycle the youngest transaction in it (the
        latest begin instant) is returned as the victim.
        """
        locks = self._locks(item_id)
        held = locks.granted.get(txn_id)
        if held is LockMode.EXCLUSIVE or held is mode:
            return Granted()
        if held is LockMode.SHARED and mode is LockMode.EXCLUSIVE:
            if len(locks.granted) == 1:
                locks.granted[txn_id] = LockMode.EXCLUSIVE
                return Granted()
        elif not locks.queue and all(compatible(h, mode) for h in locks.granted.values()):
            locks.granted[txn_id] = mode
            self._note_presence(txn_id, item_id)
            return Granted()
        locks.queue.append(_Request(txn_id, mode))
        self._note_presence(txn_id, item_id)
        self._contended.add(item_id)
        cycle = self.find_cycle(txn_id)
        if cycle:
            return DeadlockVictim(self.youngest_of(cycle))
        return Queued()

    def youngest_of(self, txns) -> int:
        """Victim rule: the transaction with the latest begin instant."""
        return max(txns, key=lambda t: (self._begin.get(t, 0), t))

    def release_all(self, txn_id: int) -> list[tuple[int, int, LockMode]]:
        """Drop every granted and queued entry of txn_id; re-grant FIFO heads.

        Returns the newly granted (txn, item, mode) triples, in grant order.
        """
        granted: list[tuple[int, int, LockMode]] = []
        for item_id in sorted(self._presence.pop(txn_id, ())):
            locks = self._items[item_id]
            locks.granted.pop(txn_id, None)
            if any(r.txn_id == txn_id for r in locks.queue):
                locks.queue = [r for r in locks.queue if r.txn_id != txn_id]
            granted.extend((t, item_id, m) for t, m in self._grant_heads(item_id))
            if not locks.queue:
                self._contended.discard(item_id)
        return granted

    def _grant_heads(self, item_id: int) -> list[tuple[int, LockMode]]:
        locks = self._items[item_id]
        newly: list[tuple[int, LockMode]] = []
        while locks.queue:
            head = locks.queue[0]
            others = [h for t, h in locks.granted.items() if t != head.txn_id]
            if head.mode is LockMode.EXCLUSIVE:
                if others:
                    break
                locks.granted[head.txn_id] = LockMode.EXCLUSIVE
            else:
                if any(h is LockMode.EXCLUSIVE for h in others):
                    break
                locks.granted.setdefault(head.txn_id, LockMode.SHARED)
            locks.queue.pop(0)
            newly.append((head.txn_id, head.mode))
        if not locks.queue:
            self._contended.discard(item_id)
        return newly

    def waits_for_edges(self) -> dict[int, set[int]]:
        """waiter -> the transactions it waits on (holders and queue-ahead)."""
        edges: dict[int, set[int]] = {}
        for item_id in self._contended:
            locks = self._items[item_id]
            for pos, req in enumerate(locks.queue):
                blockers = {t for t, h in locks.granted.items()
                            if t != req.txn_id and not compatible(h, req.mode)}
                for ahead in locks.queue[:pos]:
                    if ahead.txn_id != req.txn_id and not compatible(ahead.mode, req.mode):
                        blockers.add(ahead.txn_id)
                if blockers:
                    edges.setdefault(req.txn_id, set()).update(blockers)
        return edges

    def find_cycle(self, start: int | None = None) -> list[int] | None:
        """Return one waits-for cycle as a transaction list, or None.

        When start is given only cycles through it are searched, which is all
        an acquire can create when the graph was acyclic beforehand.
        """
        edges = self.waits_for_edges()
        roots = [start] if start is not None else sorted(edges)
        for root in roots:
            stack = [(root, iter(sorted(edges.get(root, ()))))]
            on_path = [root]
            seen = {root}
            while stack:
                node, it = stack[-1]
                advanced = False
                for nxt in it:
                    if nxt == root:
                        return list(on_path)
                    if nxt in seen:
                        continue
                    seen.add(nxt)
                    on_path.append(nxt)
                    stack.append((nxt, iter(sorted(edges.get(nxt, ())))))
                    advanced = True
                    break
                if not advanced:
                    stack.pop()
                    on_path.pop()
        return None

    def assert_safety(self) -> None:
        """No two conflicting grants may coexist on one item."""
        for item_id, locks in self._items.items():
            modes = list(locks.granted.values())
            if any(m is LockMode.EXCLUSIVE for m in modes) and len(modes) > 1:
                raise AssertionError(f"conflicting grants on item {item_id}: {locks.granted}")


def s2pl_acquire(table: LockTable, txn_id: int, item_id: int, mode: LockMode):
    """Acquire under strict 2PL; see LockTable.acquire."""
    return table.acquire(txn_id, item_id, mode)


def s2pl_release_all(table: LockTable, txn_id: int) -> list[tuple[int, int, LockMode]]:
    """Release everything at commit/abort; see LockTable.release_all."""
    return table.release_all(txn_id)


@dataclass
class _ActiveTxn:
    start: int
    read_set: set[int] = field(default_factory=set)
    write_set: set[int] = field(default_factory=set)


class OccBook:
    """Backward-validation bookkeeping.

    Active transactions carry a start instant plus read/write sets; committed
    transactions keep their write set at a server-assigned commit instant, and
    those instants strictly increase in commit order.
    """

    def __init__(self):
        self.active: dict[int, _ActiveTxn] = {}
        self._commit_instants: list[int] = []
        self._commit_writes: list[frozenset[int]] = []

    def begin(self, txn_id: int, start: int) -> None:
        self.active[txn_id] = _ActiveTxn(start)

    def note_read(self, txn_id: int, item_id: int) -> None:
        self.active[txn_id].read_set.add(item_id)

    def note_write(self, txn_id: int, item_id: int) -> None:
        self.active[txn_id].write_set.add(item_id)

    def drop(self, txn_id: int) -> None:
        self.active.pop(txn_id, None)

    def last_commit_instant(self) -> int | None:
        return self._commit_instants[-1] if self._commit_instants else None


def occ_validate(book: OccBook, txn_id: int, now: int) -> Outcome:
    """Backward validation at commit instant now.

    Aborts iff some transaction that committed in (start, now] wrote an item
    in the validator's read set. On commit the validator's write set is
    recorded at instant now, which must exceed every earlier commit instant.
    """
    txn = book.active[txn_id]
    if book._commit_instants and now <= book._commit_instants[-1]:
        raise ValueError(f"commit instant {now} does not advance past "
                         f"{book._commit_instants[-1]}")
    lo = bisect_right(book._commit_instants, txn.start)
    for k in range(lo, len(book._commit_instants)):
        if book._commit_writes[k] & txn.read_set:
            book.drop(txn_id)
            return Outcome.ABORTED
    book._commit_instants.append(now)
    book._commit_writes.append(frozenset(txn.write_set))
    book.drop(txn_id)
    return Outcome.COMMITTED
