"""Domain types shared by every protocol in the arena.

Time is integer milliseconds on a logical clock; no wall clocks anywhere.
Item payloads are opaque bytes that the simulator never interprets.
"""

from dataclasses import dataclass, field
from enum import Enum


class ConfigError(ValueError):
    """A configuration value is out of range or malformed."""


class InvalidLogError(ValueError):
    """An operator log violates its shape invariants."""


class UnknownItemError(KeyError):
    """An operation names an item id that the registry does not hold."""


class OpKind(Enum):
    BEGIN = "BEGIN"
    READ = "R"
    WRITE = "W"
    COMMIT = "COMMIT"


@dataclass(frozen=True)
class Operation:
    """One transaction operator. READ/WRITE carry exactly one item id."""

    kind: OpKind
    item_id: int | None = None

    def __post_init__(self):
        if self.kind in (OpKind.READ, OpKind.WRITE):
            if self.item_id is None:
                raise ValueError(f"{self.kind.name} requires an item id")
        elif self.item_id is not None:
            raise ValueError(f"{self.kind.name} carries no item id")

    @property
    def is_data(self) -> bool:
        return self.kind in (OpKind.READ, OpKind.WRITE)

    def __str__(self) -> str:
        if self.is_data:
            return f"{self.kind.value}({self.item_id})"
        return self.kind.value


BEGIN = Operation(OpKind.BEGIN)
COMMIT = Operation(OpKind.COMMIT)


def read(item_id: int) -> Operation:
    return Operation(OpKind.READ, item_id)


def write(item_id: int) -> Operation:
    return Operation(OpKind.WRITE, item_id)


@dataclass(frozen=True)
class LogRecord:
    """An operator plus the milliseconds elapsed since the previous operator."""

    op: Operation
    rel_ts: int

    def __post_init__(self):
        if self.rel_ts < 0:
            raise ValueError(f"rel_ts must be >= 0, got {self.rel_ts}")


@dataclass
class OperatorLog:
    """Per-transaction client log: Begin, data operators, Commit, all with
    relative timestamps."""

    txn_id: int
    records: list[LogRecord] = field(default_factory=list)

    def total_span(self) -> int:
        """Sum of all relative timestamps (client-side duration of the log)."""
        return sum(r.rel_ts for r in self.records)


def log_validate(log: OperatorLog) -> str | None:
    """Check the operator-log shape invariants.

    Returns None when the log is well formed, otherwise a description
    of the first violated invariant.
    """
    if not log.records:
        return "log is empty"
    if log.records[0].op.kind is not OpKind.BEGIN:
        return "log does not start with Begin"
    if log.records[0].rel_ts != 0:
        return "Begin record must have rel_ts 0"
    if log.records[-1].op.kind is not OpKind.COMMIT:
        return "log does not end with Commit"
    for rec in log.records[1:-1]:
        if rec.op.kind is OpKind.BEGIN:
            return "Begin appears after the first record"
        if rec.op.kind is OpKind.COMMIT:
            return "Commit appears before the last record"
    return None


# --- line-oriented text form, used by test fixtures ---------------------
#
# One record per line: "<OP> <item_id|-> <rel_ts_ms>", e.g.
#   BEGIN - 0
#   R 17 40
#   W 17 12
#   COMMIT - 3

def log_to_text(log: OperatorLog) -> str:
    lines = []
    for rec in log.records:
        item = str(rec.op.item_id) if rec.op.is_data else "-"
        lines.append(f"{rec.op.kind.value} {item} {rec.rel_ts}")
    return "\n".join(lines) + "\n"


def log_from_text(text: str, txn_id: int = 0) -> OperatorLog:
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InvalidLogError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        kind_txt, item_txt, rel_txt = parts
        try:
            kind = OpKind(kind_txt)
        except ValueError:
            raise InvalidLogError(f"line {lineno}: unknown operator {kind_txt!r}") from None
        item = None if item_txt == "-" else int(item_txt)
        try:
            records.append(LogRecord(Operation(kind, item), int(rel_txt)))
        except ValueError as exc:
            raise InvalidLogError(f"line {lineno}: {exc}") from None
    return OperatorLog(txn_id, records)


@dataclass(frozen=True)
class AbsRecord:
    """An operator anchored at a server-clock instant."""

    op: Operation
    abs_ts: int


@dataclass
class AbsoluteLog:
    """An operator log rebased to server time; abs_ts is nondecreasing."""

    txn_id: int
    records: list[AbsRecord] = field(default_factory=list)


@dataclass
class ItemState:
    """Server-side state of one item: opaque value plus the instants of the
    latest committed read and write."""

    item_id: int
    value: bytes = b""
    t_read: int = 0
    t_write: int = 0


class ItemRegistry:
    """The server's table of items, keyed 0..n_items-1.

    Read/write stamps only ever move forward across committed transactions;
    apply_update enforces that.
    """

    def __init__(self, n_items: int):
        if n_items < 1:
            raise ConfigError(f"n_items must be >= 1, got {n_items}")
        self.n_items = n_items
        self._items = {i: ItemState(i) for i in range(n_items)}

    def get(self, item_id: int) -> ItemState:
        try:
            return self._items[item_id]
        except KeyError:
            raise UnknownItemError(item_id) from None

    def __contains__(self, item_id: int) -> bool:
        return item_id in self._items

    def __len__(self) -> int:
        return self.n_items

    def apply_update(self, item_id: int, t_read: int | None = None,
                     t_write: int | None = None, value: bytes | None = None) -> None:
        state = self.get(item_id)
        if t_read is not None:
            if t_read < state.t_read:
                raise ValueError(f"t_read of item {item_id} would move backwards "
                                 f"({state.t_read} -> {t_read})")
            state.t_read = t_read
        if t_write is not None:
            if t_write < state.t_write:
                raise ValueError(f"t_write of item {item_id} would move backwards "
                                 f"({state.t_write} -> {t_write})")
            state.t_write = t_write
        if value is not None:
            state.value = value

    def stamps(self) -> dict[int, tuple[int, int, bytes]]:
        """Snapshot of (t_read, t_write, value) per item, for audits and tests."""
        return {i: (s.t_read, s.t_write, s.value) for i, s in self._items.items()}


def registry_new(n_items: int) -> ItemRegistry:
    """Fresh registry with n_items items, all stamps zero."""
    return ItemRegistry(n_items)


class Outcome(Enum):
    COMMITTED = "COMMITTED"
    ABORTED = "ABORTED"


@dataclass(frozen=True)
class OpEvent:
    txn_id: int
    op: Operation
    instant: int


@dataclass(frozen=True)
class TerminalEvent:
    txn_id: int
    outcome: Outcome
    instant: int


class History:
    """Global ordered record of operation and commit/abort events.

    Each transaction gets exactly one terminal event, after all of its
    operation events; record_* enforce that.
    """

    def __init__(self):
        self.events: list[OpEvent | TerminalEvent] = []
        self._terminals: dict[int, TerminalEvent] = {}

    def record_op(self, txn_id: int, op: Operation, instant: int) -> None:
        if txn_id in self._terminals:
            raise ValueError(f"txn {txn_id} already has a terminal event")
        if not op.is_data:
            raise ValueError("only Read/Write operations are history events")
        self.events.append(OpEvent(txn_id, op, instant))

    def record_terminal(self, txn_id: int, outcome: Outcome, instant: int) -> None:
        if txn_id in self._terminals:
            raise ValueError(f"txn {txn_id} already has a terminal event")
        ev = TerminalEvent(txn_id, outcome, instant)
        self.events.append(ev)
        self._terminals[txn_id] = ev

    def terminal_of(self, txn_id: int) -> TerminalEvent | None:
        return self._terminals.get(txn_id)

    def committed(self) -> dict[int, int]:
        """txn_id -> commit instant, for committed transactions only."""
        return {t: ev.instant for t, ev in self._terminals.items()
                if ev.outcome is Outcome.COMMITTED}

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    # --- line-oriented dump, one event per line -------------------------
    #
    #   OP <txn_id> <R|W> <item_id> <instant>
    #   END <txn_id> <COMMITTED|ABORTED> <instant>

    def to_text(self) -> str:
        lines = []
        for ev in self.events:
            if isinstance(ev, OpEvent):
                lines.append(f"OP {ev.txn_id} {ev.op.kind.value} {ev.op.item_id} {ev.instant}")
            else:
                lines.append(f"END {ev.txn_id} {ev.outcome.value} {ev.instant}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "History":
        hist = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if parts[0] == "OP" and len(parts) == 5:
                    kind = OpKind(parts[2])
                    if kind not in (OpKind.READ, OpKind.WRITE):
                        raise ValueError(f"bad op kind {parts[2]!r}")
                    hist.record_op(int(parts[1]), Operation(kind, int(parts[3])), int(parts[4]))
                elif parts[0] == "END" and len(parts) == 4:
                    hist.record_terminal(int(parts[1]), Outcome(parts[2]), int(parts[3]))
                else:
                    raise ValueError(f"unrecognized event line {line!r}")
            except ValueError as exc:
                raise InvalidLogError(f"history line {lineno}: {exc}") from None
        return hist
