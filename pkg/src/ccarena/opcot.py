"""Commitment-ordering validation over relative operator timestamps.

Clients stamp each operator with the milliseconds elapsed since the previous
operator and ship the whole log in a single commit request. The server anchors
the log's last record at the receipt instant, reconstructs absolute instants
backwards, and commits the transaction only if every operator instant is
consistent with the read/write stamps left by already-committed transactions.
Clients therefore talk to the server exactly once per transaction, and
unsynchronized client clocks never matter.
"""

from dataclasses import dataclass, field

from .core import (
    AbsoluteLog,
    AbsRecord,
    History,
    InvalidLogError,
    ItemRegistry,
    LogRecord,
    Operation,
    OperatorLog,
    OpKind,
    Outcome,
    log_validate,
)


class ClockRegressionError(ValueError):
    """Client clock moved backwards within one transaction."""


class RebaseUnderflowError(ValueError):
    """Receipt instant is too small to anchor the log at nonnegative instants."""


def client_record_op(log: OperatorLog, op: Operation, now: int,
                     prev_op_instant: int) -> tuple[OperatorLog, int]:
    """Append op to the in-progress log with rel_ts = now - prev_op_instant.

    Returns the log and the new previous-operator instant (= now). The Begin
    record always gets rel_ts 0; a Commit may only appear once, at the end.
    """
    if now < prev_op_instant:
        raise ClockRegressionError(
            f"client clock regressed: now={now} < previous operator at {prev_op_instant}")
    if log.records and log.records[-1].op.kind is OpKind.COMMIT:
        raise InvalidLogError("log already contains Commit")
    if op.kind is OpKind.BEGIN:
        if log.records:
            raise InvalidLogError("Begin must be the first record")
        log.records.append(LogRecord(op, 0))
    else:
        if not log.records:
            raise InvalidLogError("first record must be Begin")
        log.records.append(LogRecord(op, now - prev_op_instant))
    return log, now


def rebase_to_server_time(log: OperatorLog, receipt: int) -> AbsoluteLog:
    """Convert a relative-timestamp log to server-clock instants.

    The last record is anchored at the receipt instant; every earlier record
    sits rel_ts earlier than its successor:

        abs[last] = receipt
        abs[k]    = abs[k+1] - rel[k+1]

    Operation kinds and order are preserved.
    """
    violation = log_validate(log)
    if violation is not None:
        raise InvalidLogError(violation)
    span = log.total_span()
    if receipt < span:
        raise RebaseUnderflowError(
            f"receipt {receipt} precedes the log's relative span {span}")
    n = len(log.records)
    abs_ts = [0] * n
    abs_ts[-1] = receipt
    for k in range(n - 2, -1, -1):
        abs_ts[k] = abs_ts[k + 1] - log.records[k + 1].rel_ts
    return AbsoluteLog(log.txn_id,
                       [AbsRecord(rec.op, t) for rec, t in zip(log.records, abs_ts)])


@dataclass
class CommitDecision:
    """Outcome of commit validation.

    Committed decisions carry the staged registry updates, one per item the
    log touched. Aborted decisions carry the first violating record and no
    updates (rollback = no effect).
    """

    outcome: Outcome
    updates: list[tuple[int, int, int]] = field(default_factory=list)  # (item, t_read, t_write)
    abort_index: int | None = None
    abort_record: AbsRecord | None = None
    reason: str | None = None

    @property
    def committed(self) -> bool:
        return self.outcome is Outcome.COMMITTED


def validate_commit(registry: ItemRegistry, abs_log: AbsoluteLog,
                    max_read_stamp: bool = True) -> CommitDecision:
    """Scan a rebased log against the registry's read/write stamps.

    Read(X)@t aborts when t < X.t_write; otherwise it stages
    X.t_read = max(X.t_read, t). Write(X)@t aborts when t < X.t_write or
    t < X.t_read; otherwise it stages X.t_write = max(X.t_write, t). Ties pass
    (the conditions are strict), staged values are visible to later records of
    the same log, and Begin/Commit records are no-ops.

    max_read_stamp=False assigns X.t_read = t unconditionally on accepted
    reads, which can move the read stamp backwards; it exists so the two
    semantics can be compared and is not used by the simulator.
    """
    staged: dict[int, list[int]] = {}

    def stamps_for(item_id: int) -> list[int]:
        if item_id not in staged:
            state = registry.get(item_id)  # raises UnknownItemError on workload bugs
            staged[item_id] = [state.t_read, state.t_write]
        return staged[item_id]

    for index, rec in enumerate(abs_log.records):
        if not rec.op.is_data:
            continue
        pair = stamps_for(rec.op.item_id)
        t = rec.abs_ts
        if rec.op.kind is OpKind.READ:
            if t < pair[1]:
                return CommitDecision(
                    Outcome.ABORTED, abort_index=index, abort_record=rec,
                    reason=f"read of item {rec.op.item_id} at {t} precedes last write {pair[1]}")
            pair[0] = max(pair[0], t) if max_read_stamp else t
        else:
            if t < pair[1] or t < pair[0]:
                bound = "write" if t < pair[1] else "read"
                last = pair[1] if t < pair[1] else pair[0]
                return CommitDecision(
                    Outcome.ABORTED, abort_index=index, abort_record=rec,
                    reason=f"write of item {rec.op.item_id} at {t} precedes last {bound} {last}")
            pair[1] = max(pair[1], t)
    updates = [(item, pair[0], pair[1]) for item, pair in sorted(staged.items())]
    return CommitDecision(Outcome.COMMITTED, updates=updates)


def commit_transaction(registry: ItemRegistry, log: OperatorLog, receipt: int,
                       history: History | None = None) -> CommitDecision:
    """Rebase, validate, and on success apply the staged updates atomically.

    Writes are buffered during validation and become visible only on commit;
    an abort leaves the registry bit-identical to its pre-call state. When a
    history is given, the log's data operators are recorded at their rebased
    instants and the terminal event at the receipt instant.
    """
    abs_log = rebase_to_server_time(log, receipt)
    decision = validate_commit(registry, abs_log)
    if decision.committed:
        written = {rec.op.item_id for rec in abs_log.records
                   if rec.op.kind is OpKind.WRITE}
        for item, t_read, t_write in decision.updates:
            value = f"txn:{log.txn_id}".encode() if item in written else None
            registry.apply_update(item, t_read=t_read, t_write=t_write, value=value)
    if history is not None:
        for rec in abs_log.records:
            if rec.op.is_data:
                history.record_op(log.txn_id, rec.op, rec.abs_ts)
        history.record_terminal(log.txn_id, decision.outcome, receipt)
    return decision
