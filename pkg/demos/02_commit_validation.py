"""Commit validation against per-item read/write stamps.

The server keeps, per item, the instants of the latest committed read and
write. A commit request is accepted only if every operator instant in its
rebased log is consistent with those stamps: a read must not predate the
last write, a write must predate neither the last write nor the last read.
Accepted logs move the stamps forward; aborted logs leave no trace.
"""

from ccarena import log_from_text, registry_new, validate_commit
from ccarena.opcot import commit_transaction, rebase_to_server_time


def show(reg, items=(0,)):
    for i in items:
        s = reg.get(i)
        print(f"    item {i}: last_read={s.t_read} last_write={s.t_write} value={s.value!r}")


reg = registry_new(4)
print("fresh registry:")
show(reg)

print("\nT1 writes item 0, receipt 50 (write lands at instant 48):")
d1 = commit_transaction(reg, log_from_text("BEGIN - 0\nW 0 3\nCOMMIT - 2\n", 1), 50)
print(f"  -> {d1.outcome.value}, updates {d1.updates}")
show(reg)

print("\nT2 read item 0 at instant 40 (before T1's committed write at 48):")
d2 = commit_transaction(reg, log_from_text("BEGIN - 0\nR 0 5\nCOMMIT - 15\n", 2), 55)
print(f"  -> {d2.outcome.value}: {d2.reason}")
print("     registry untouched by the abort:")
show(reg)

print("\nT3 read item 0 at instant 58 (after the committed write):")
d3 = commit_transaction(reg, log_from_text("BEGIN - 0\nR 0 5\nCOMMIT - 2\n", 3), 60)
print(f"  -> {d3.outcome.value}, updates {d3.updates}")
show(reg)

print("\nwhy accepted reads raise the read stamp with max() rather than")
print("assigning unconditionally: an old-but-valid read must not drag the")
print("stamp backwards and let a conflicting write slip under a newer read.")
reg2 = registry_new(1)
reg2.apply_update(0, t_read=60)
abs_log = rebase_to_server_time(log_from_text("BEGIN - 0\nR 0 3\nCOMMIT - 15\n", 4), 58)
print(f"  registry read stamp 60; incoming read at instant 43:")
literal = validate_commit(reg2, abs_log, max_read_stamp=False)
kept = validate_commit(reg2, abs_log, max_read_stamp=True)
print(f"  unconditional assignment would stage read stamp {literal.updates[0][1]}")
print(f"  max rule keeps the stamp at {kept.updates[0][1]}")
