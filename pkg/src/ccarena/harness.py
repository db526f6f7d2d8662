"""Experiment harness: metrics, matrix runs, CSV emission, oracle gate.

Every simulation run is checked before its metrics row is emitted: the
committed history must be conflict-serializable, and commitment-ordering runs
must additionally satisfy the commit-order property. A violation dumps the
offending history to a fixture file and aborts the whole matrix.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .core import ConfigError, History
from .oracle import check_commitment_ordering, conflict_skeleton, is_acyclic
from .simkit import PROTOCOLS, RunResult, SimConfig, TxnTiming, parse_kv_text, run_simulation

CSV_HEADER = ("protocol,seed,n_txns,n_items,committed,aborted,abort_rate,"
              "mean_wait_ms,p95_wait_ms,mean_messages_per_txn")


class OracleViolation(RuntimeError):
    """A run produced a history that fails its correctness checks."""

    def __init__(self, message: str, dump_path: str | None = None):
        super().__init__(message)
        self.dump_path = dump_path


@dataclass
class RunMetrics:
    protocol: str
    seed: int
    n_txns: int
    n_items: int
    committed: int
    aborted: int
    abort_rate: float
    mean_wait_ms: float
    p95_wait_ms: float
    mean_messages_per_txn: float

    def sort_key(self):
        return (self.protocol, self.n_items, self.n_txns, self.seed)

    def csv_row(self) -> str:
        return (f"{self.protocol},{self.seed},{self.n_txns},{self.n_items},"
                f"{self.committed},{self.aborted},{self.abort_rate:.6f},"
                f"{self.mean_wait_ms:.3f},{self.p95_wait_ms:.3f},"
                f"{self.mean_messages_per_txn:.3f}")


def compute_abort_rate(aborted: int, total: int) -> float:
    """Aborted transactions over all transactions."""
    if total < 1:
        raise ConfigError(f"total must be >= 1, got {total}")
    if not 0 <= aborted <= total:
        raise ConfigError(f"aborted must be in [0, {total}], got {aborted}")
    return aborted / total


def compute_waiting_time(timing: TxnTiming) -> int:
    """Wall duration minus the time spent performing instructions, >= 0."""
    if timing.terminal_ms < timing.submit_ms:
        raise ConfigError("terminal instant precedes submit instant")
    return max(0, (timing.terminal_ms - timing.submit_ms) - timing.service_ms)


def _p95(values: list[int]) -> float:
    """Nearest-rank 95th percentile."""
    ordered = sorted(values)
    rank = max(1, math.ceil(0.95 * len(ordered)))
    return float(ordered[rank - 1])


def metrics_for_run(result: RunResult) -> RunMetrics:
    waits = [compute_waiting_time(t) for t in result.timings]
    msgs = [t.messages for t in result.timings]
    n = result.config.n_txns
    return RunMetrics(
        protocol=result.config.protocol,
        seed=result.config.seed,
        n_txns=n,
        n_items=result.config.n_items,
        committed=result.committed,
        aborted=result.aborted,
        abort_rate=compute_abort_rate(result.aborted, n),
        mean_wait_ms=sum(waits) / n,
        p95_wait_ms=_p95(waits),
        mean_messages_per_txn=sum(msgs) / n,
    )


def verify_run(history: History, protocol: str) -> str | None:
    """Oracle-in-the-loop check; returns a violation description or None.

    Serializability is required of every protocol; the commit-order property
    is additionally required of commitment-ordering runs.
    """
    check = is_acyclic(conflict_skeleton(history))
    if not check:
        return f"serialization graph has a cycle: {check.cycle}"
    if protocol == "opcot":
        co = check_commitment_ordering(history)
        if not co:
            return f"commitment ordering violated: {co.violation}"
    return None


@dataclass
class MatrixConfig:
    """Cross product of protocols x txn counts x item counts x seeds.

    When arrival_window_ms is set, each cell's arrival mean becomes
    window / n_txns, so adding transactions to a fixed submission window
    raises contention, which is how the txn-count axis is meant to scale.
    """

    protocols: list[str] = field(default_factory=lambda: list(PROTOCOLS))
    n_txns_list: list[int] = field(default_factory=lambda: [200])
    n_items_list: list[int] = field(default_factory=lambda: [100])
    seeds: list[int] = field(default_factory=lambda: [1])
    base: SimConfig = field(default_factory=SimConfig)
    arrival_window_ms: int | None = None

    def cells(self) -> list[SimConfig]:
        out = []
        for protocol in self.protocols:
            for n_items in self.n_items_list:
                for n_txns in self.n_txns_list:
                    for seed in self.seeds:
                        cfg = replace(self.base, protocol=protocol, n_items=n_items,
                                      n_txns=n_txns, seed=seed)
                        if self.arrival_window_ms is not None:
                            cfg = replace(cfg, arrival_mean_ms=max(1, round(
                                self.arrival_window_ms / n_txns)))
                        cfg.validate()
                        out.append(cfg)
        return out

    @classmethod
    def from_file(cls, path: str) -> "MatrixConfig":
        with open(path, encoding="utf-8") as fh:
            mapping = parse_kv_text(fh.read())
        mx_keys = {"protocols", "txns", "items", "seeds", "arrival_window_ms"}
        base = SimConfig.from_mapping({k: v for k, v in mapping.items() if k not in mx_keys})
        mx = cls(base=base)
        if "protocols" in mapping:
            mx.protocols = [p.strip().lower() for p in mapping["protocols"].split(",")]
            for p in mx.protocols:
                if p not in PROTOCOLS:
                    raise ConfigError(f"unknown protocol {p!r}")
        if "txns" in mapping:
            mx.n_txns_list = [int(v) for v in mapping["txns"].split(",")]
        if "items" in mapping:
            mx.n_items_list = [int(v) for v in mapping["items"].split(",")]
        if "seeds" in mapping:
            mx.seeds = _parse_seeds(mapping["seeds"])
        if "arrival_window_ms" in mapping:
            mx.arrival_window_ms = int(mapping["arrival_window_ms"])
        return mx


def _parse_seeds(text: str) -> list[int]:
    """Either a comma list (1,2,3) or an inclusive range (1:20)."""
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _run_cell(cfg: SimConfig) -> tuple[RunMetrics | None, str | None, str | None]:
    """Worker body: run, verify, summarize. Returns (metrics, violation, dump)."""
    result = run_simulation(cfg)
    violation = verify_run(result.history, cfg.protocol)
    if violation is not None:
        dump = f"oracle_violation_{cfg.protocol}_items{cfg.n_items}_txns{cfg.n_txns}_seed{cfg.seed}.history"
        with open(dump, "w", encoding="utf-8") as fh:
            fh.write(result.history.to_text())
        return None, violation, dump
    return metrics_for_run(result), None, None


def run_matrix(matrix: MatrixConfig, workers: int = 1) -> list[RunMetrics]:
    """Run every cell, gate each run through the oracle, return sorted rows.

    Rows are sorted by (protocol, n_items, n_txns, seed) so output does not
    depend on scheduling. Any oracle violation aborts the matrix.
    """
    cells = matrix.cells()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        outcomes = [_run_cell(cfg) for cfg in cells]
    rows = []
    for cfg, (metrics, violation, dump) in zip(cells, outcomes):
        if violation is not None:
            raise OracleViolation(
                f"{cfg.protocol} seed={cfg.seed} items={cfg.n_items} txns={cfg.n_txns}: "
                f"{violation} (history dumped to {dump})", dump_path=dump)
        rows.append(metrics)
    rows.sort(key=RunMetrics.sort_key)
    return rows


def rows_to_csv(rows: list[RunMetrics]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv_row() for r in rows]) + "\n"


def write_csv(rows: list[RunMetrics], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rows_to_csv(rows))


def rows_to_gnuplot(rows: list[RunMetrics]) -> str:
    """Plain-text blocks for direct plotting: one block per (protocol, items),
    one line per txn count with seed-averaged aborts and waiting time."""
    groups: dict[tuple[str, int], dict[int, list[RunMetrics]]] = {}
    for row in rows:
        groups.setdefault((row.protocol, row.n_items), {}).setdefault(row.n_txns, []).append(row)
    blocks = []
    for (protocol, n_items), by_txns in sorted(groups.items()):
        lines = [f"# protocol={protocol} items={n_items}",
                 "# n_txns mean_aborted mean_wait_ms"]
        for n_txns, cell_rows in sorted(by_txns.items()):
            mean_ab = sum(r.aborted for r in cell_rows) / len(cell_rows)
            mean_wait = sum(r.mean_wait_ms for r in cell_rows) / len(cell_rows)
            lines.append(f"{n_txns} {mean_ab:.3f} {mean_wait:.3f}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def write_gnuplot(rows: list[RunMetrics], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(rows_to_gnuplot(rows))


def cell_means(rows: list[RunMetrics], protocol: str, n_items: int,
               n_txns: int) -> tuple[float, float]:
    """Seed-averaged (aborted, mean_wait_ms) for one cell of a matrix."""
    cell = [r for r in rows if r.protocol == protocol and r.n_items == n_items
            and r.n_txns == n_txns]
    if not cell:
        raise ConfigError(f"no rows for cell ({protocol}, items={n_items}, txns={n_txns})")
    return (sum(r.aborted for r in cell) / len(cell),
            sum(r.mean_wait_ms for r in cell) / len(cell))
