"""Two overlapping schedules that commit ordering accepts and classic
optimistic validation rejects.

Backward validation aborts any committer whose read set intersects the write
set of a transaction that committed during its lifetime, with no regard for
*when inside the lifetime* the operations actually happened. Commit-order
validation looks at the operator instants instead, so overlap alone is not a
death sentence: only conflicts that contradict the commit order abort.
"""

from ccarena import OccBook, Outcome, log_from_text, occ_validate, registry_new
from ccarena.opcot import commit_transaction, rebase_to_server_time

WRITER, OVERLAPPER, FIRST_WRITER = 1, 2, 3

print("schedule A: a writer and a reader overlap; the writer commits first,")
print("and the reader's read happens after the writer's write\n")

log_writer = log_from_text("BEGIN - 0\nW 0 2\nCOMMIT - 2\n", WRITER)
log_reader = log_from_text("BEGIN - 0\nR 0 2\nCOMMIT - 3\n", OVERLAPPER)
for name, log, receipt in (("writer", log_writer, 12), ("reader", log_reader, 14)):
    instants = [(str(r.op), r.abs_ts) for r in rebase_to_server_time(log, receipt).records]
    print(f"  {name} rebased: {instants}")

reg = registry_new(1)
d_writer = commit_transaction(reg, log_writer, 12)
d_reader = commit_transaction(reg, log_reader, 14)
print(f"\n  commit ordering: writer {d_writer.outcome.value}, "
      f"reader {d_reader.outcome.value}")

book = OccBook()
book.begin(OVERLAPPER, 9)    # the reader's lifetime spans the writer's commit
book.note_read(OVERLAPPER, 0)
book.begin(WRITER, 8)
book.note_write(WRITER, 0)
occ_writer = occ_validate(book, WRITER, 12)
occ_reader = occ_validate(book, OVERLAPPER, 14)
print(f"  backward validation: writer {occ_writer.value}, reader {occ_reader.value}")
assert d_reader.committed and occ_reader is Outcome.ABORTED

print("\nschedule B: one transaction reads then writes item 0 while a write")
print("and a read commit inside its lifetime, every conflict in commit order\n")

log_first_writer = log_from_text("BEGIN - 0\nW 0 1\nCOMMIT - 2\n", FIRST_WRITER)
log_late_reader = log_from_text("BEGIN - 0\nR 0 1\nCOMMIT - 2\n", WRITER)
log_read_writer = log_from_text("BEGIN - 0\nR 0 4\nW 0 4\nCOMMIT - 2\n", OVERLAPPER)
reg_b = registry_new(1)
d_fw = commit_transaction(reg_b, log_first_writer, 12)
d_lr = commit_transaction(reg_b, log_late_reader, 16)
d_rw = commit_transaction(reg_b, log_read_writer, 19)
print(f"  commit ordering: first writer {d_fw.outcome.value}, "
      f"late reader {d_lr.outcome.value}, read-writer {d_rw.outcome.value}")

book_b = OccBook()
book_b.begin(OVERLAPPER, 9)        # read-writer: instants 9, 13, 17, commit 19
book_b.note_read(OVERLAPPER, 0)
book_b.note_write(OVERLAPPER, 0)
book_b.begin(FIRST_WRITER, 9)      # first writer: instants 9, 10, commit 12
book_b.note_write(FIRST_WRITER, 0)
print(f"  backward validation: first writer "
      f"{occ_validate(book_b, FIRST_WRITER, 12).value}", end="")
book_b.begin(WRITER, 13)           # late reader: instants 13, 14, commit 16
book_b.note_read(WRITER, 0)
print(f", late reader {occ_validate(book_b, WRITER, 16).value}, "
      f"read-writer {occ_validate(book_b, OVERLAPPER, 19).value}")
assert d_rw.committed

print("\nsame histories, opposite verdicts: the relative-timestamp validator")
print("recovers the commits that coarse lifetime-overlap validation wastes.")
