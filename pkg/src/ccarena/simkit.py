"""Deterministic discrete-event simulation of mobile clients.

One logical millisecond clock drives everything. Transactions are generator
processes that sleep for service times and message latencies, park while
blocked on locks, and talk to the single simulated server at their commit
point. Client mobility is abstracted into per-operation disconnect rolls plus
a reconnect delay that is paid only when a server exchange is actually needed.
Client clocks carry large fixed offsets from the server clock; only relative
operator timestamps ever cross the wire, so those offsets are harmless by
construction and the simulation exercises exactly that.

Everything is a pure function of SimConfig: workload, arrivals, latencies and
disconnects are drawn from named sub-streams of one seeded generator, and
per-transaction streams are pre-split so runtime interleaving cannot perturb
the draws.
"""

import math
from dataclasses import dataclass, fields
from heapq import heappop, heappush

from . import core
from .baselines import (
    DeadlockVictim,
    Granted,
    LockMode,
    LockTable,
    OccBook,
    occ_validate,
)
from .core import (
    ConfigError,
    History,
    Operation,
    OperatorLog,
    OpKind,
    Outcome,
    registry_new,
)
from .opcot import client_record_op, commit_transaction
from .rng import DetRng

PROTOCOLS = ("opcot", "occ", "s2pl")

_CLIENT_CLOCK_SKEW_MS = 1_000_000  # client clocks sit anywhere within +/- this


@dataclass
class SimConfig:
    """Knobs of one simulation run; see README for the full story."""

    protocol: str = "opcot"
    n_clients: int = 50
    n_items: int = 100
    n_txns: int = 200
    mean_len: float = 50.0
    sd_len: float = 10.0
    read_fraction: float = 0.5
    op_service_ms: int = 10
    uplink_latency_ms: tuple[int, int] = (10, 30)
    downlink_latency_ms: tuple[int, int] = (10, 30)
    disconnect_prob: float = 0.05
    reconnect_delay_ms: tuple[int, int] = (100, 300)
    arrival_mean_ms: int | None = None  # None -> op_service_ms * 10
    mid_txn_reads: bool = False
    retries: int = 0
    seed: int = 1

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        for name in ("n_clients", "n_items", "n_txns"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.mean_len < 2:
            raise ConfigError(f"mean_len must be >= 2, got {self.mean_len}")
        if self.sd_len < 0:
            raise ConfigError(f"sd_len must be >= 0, got {self.sd_len}")
        for name in ("read_fraction", "disconnect_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        if self.op_service_ms < 0:
            raise ConfigError("op_service_ms must be >= 0")
        for name in ("uplink_latency_ms", "downlink_latency_ms", "reconnect_delay_ms"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ConfigError(f"{name} must be 0 <= lo <= hi, got ({lo}, {hi})")
        if self.arrival_mean_ms is not None and self.arrival_mean_ms < 0:
            raise ConfigError("arrival_mean_ms must be >= 0")
        if self.retries < 0:
            raise ConfigError("retries must be >= 0")

    @property
    def arrival_mean(self) -> int:
        return self.arrival_mean_ms if self.arrival_mean_ms is not None \
            else self.op_service_ms * 10

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "SimConfig":
        """Build a config from flat key=value text values; keys match fields."""
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _parse_field(key, raw)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(parse_kv_text(fh.read()))


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse flat `key = value` lines; '#' starts a comment."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


_INT_FIELDS = {"n_clients", "n_items", "n_txns", "op_service_ms",
               "arrival_mean_ms", "retries", "seed"}
_FLOAT_FIELDS = {"mean_len", "sd_len", "read_fraction", "disconnect_prob"}
_RANGE_FIELDS = {"uplink_latency_ms", "downlink_latency_ms", "reconnect_delay_ms"}
_BOOL_FIELDS = {"mid_txn_reads"}


def _parse_field(key: str, raw: str):
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_FIELDS:
            return float(raw)
        if key in _RANGE_FIELDS:
            lo, hi = (part.strip() for part in raw.split(","))
            return (int(lo), int(hi))
        if key in _BOOL_FIELDS:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw.lower() if key == "protocol" else raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


@dataclass
class TxnSpec:
    """One planned transaction: Begin, interleaved reads/writes, Commit."""

    txn_id: int
    client_id: int
    ops: list[Operation]

    @property
    def data_ops(self) -> list[Operation]:
        return self.ops[1:-1]


def gen_workload(cfg: SimConfig, rng: DetRng) -> list[TxnSpec]:
    """Draw n_txns specs: lengths are floor(Normal(mean_len, sd_len)) clamped
    to >= 2, items uniform over the table, and read ops spread evenly through
    the list so the read/write counts match read_fraction as closely as the
    length allows."""
    specs = []
    for txn_id in range(cfg.n_txns):
        n_ops = max(2, math.floor(rng.normal(cfg.mean_len, cfg.sd_len)))
        ops: list[Operation] = [core.BEGIN]
        for k in range(n_ops):
            is_read = math.floor((k + 1) * cfg.read_fraction) > math.floor(k * cfg.read_fraction)
            item = rng.randrange(cfg.n_items)
            ops.append(core.read(item) if is_read else core.write(item))
        ops.append(core.COMMIT)
        specs.append(TxnSpec(txn_id, txn_id % cfg.n_clients, ops))
    return specs


class EventQueue:
    """Priority queue of (instant, seq, payload); seq breaks instant ties by
    insertion order, so dequeue order is deterministic."""

    def __init__(self):
        self._heap: list[tuple[int, int, object]] = []
        self._seq = 0
        self.now = 0

    def push(self, instant: int, payload) -> None:
        heappush(self._heap, (instant, self._seq, payload))
        self._seq += 1

    def pop(self):
        instant, _, payload = heappop(self._heap)
        if instant < self.now:
            raise AssertionError(f"event clock moved backwards: {instant} < {self.now}")
        self.now = instant
        return payload

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class TxnTiming:
    """Per-transaction accounting over all of its attempts."""

    txn_id: int
    client_id: int
    submit_ms: int
    terminal_ms: int = 0
    service_ms: int = 0
    messages: int = 0
    attempts: int = 0
    outcome: Outcome | None = None


@dataclass
class RunResult:
    config: SimConfig
    history: History
    timings: list[TxnTiming]
    committed: int
    aborted: int


class _VictimSignal(Exception):
    """Thrown into a transaction process chosen as a deadlock victim."""


_SEND, _THROW = 0, 1


class _Sim:
    """Shared state of one run: clock, server structures, parked processes."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.queue = EventQueue()
        self.history = History()
        self.registry = registry_new(cfg.n_items)
        self.table = LockTable()
        self.book = OccBook()
        self.parked: dict[int, object] = {}
        self._last_stamp = -1
        self._next_attempt_id = cfg.n_txns

    @property
    def now(self) -> int:
        return self.queue.now

    def stamp(self, arrival: int) -> int:
        """Server-assigned instant: arrival time, bumped to stay strictly
        increasing across commit processing."""
        s = arrival if arrival > self._last_stamp else self._last_stamp + 1
        self._last_stamp = s
        return s

    def alloc_attempt_id(self) -> int:
        aid = self._next_attempt_id
        self._next_attempt_id += 1
        return aid

    def spawn(self, gen, at: int) -> None:
        self.queue.push(at, (_SEND, gen, None))

    def wake_granted(self, granted: list[tuple[int, int, LockMode]]) -> None:
        for txn_id, _item, _mode in granted:
            gen = self.parked.pop(txn_id, None)
            if gen is not None:
                self.queue.push(self.now, (_SEND, gen, None))

    def s2pl_server_abort(self, aid: int) -> None:
        """Record the victim's abort, drop its locks, cascade grants."""
        self.history.record_terminal(aid, Outcome.ABORTED, self.now)
        self.wake_granted(self.table.release_all(aid))

    def throw_parked(self, aid: int) -> None:
        gen = self.parked.pop(aid)
        self.queue.push(self.now, (_THROW, gen, _VictimSignal()))

    def run_loop(self) -> None:
        while self.queue:
            kind, gen, arg = self.queue.pop()
            try:
                cmd = gen.send(None) if kind == _SEND else gen.throw(arg)
            except StopIteration:
                continue
            if isinstance(cmd, tuple):  # ("park", aid): wait for an external wake
                self.parked[cmd[1]] = gen
                continue
            self.queue.push(self.now + cmd, (_SEND, gen, None))


def _roll_disconnect(cfg: SimConfig, rng: DetRng, connected: bool) -> bool:
    """One per-operation disconnect roll; the stream is consumed either way."""
    dropped = rng.random() < cfg.disconnect_prob
    return connected and not dropped


def _txn_process(sim: _Sim, spec: TxnSpec, run: TxnTiming, rng: DetRng, offset: int):
    cfg = sim.cfg
    outcome = Outcome.ABORTED
    for attempt in range(cfg.retries + 1):
        aid = spec.txn_id if attempt == 0 else sim.alloc_attempt_id()
        run.attempts += 1
        if cfg.protocol == "s2pl":
            outcome = yield from _s2pl_attempt(sim, spec, aid, run, rng)
        elif cfg.protocol == "occ":
            outcome = yield from _occ_attempt(sim, spec, aid, run, rng)
        else:
            outcome = yield from _opcot_attempt(sim, spec, aid, run, rng, offset)
        if outcome is Outcome.COMMITTED:
            break
    run.outcome = outcome
    run.terminal_ms = sim.now


def _opcot_attempt(sim: _Sim, spec: TxnSpec, aid: int, run: TxnTiming,
                   rng: DetRng, offset: int):
    cfg = sim.cfg
    log = OperatorLog(aid)
    prev = sim.now + offset
    _, prev = client_record_op(log, core.BEGIN, sim.now + offset, prev)
    connected = True
    for op in spec.data_ops:
        connected = _roll_disconnect(cfg, rng, connected)
        if cfg.mid_txn_reads and op.kind is OpKind.READ and connected:
            run.messages += 1  # opportunistic refresh of the local copy
            yield rng.uniform_ms(cfg.uplink_latency_ms) + rng.uniform_ms(cfg.downlink_latency_ms)
        yield cfg.op_service_ms
        run.service_ms += cfg.op_service_ms
        _, prev = client_record_op(log, op, sim.now + offset, prev)
    _, prev = client_record_op(log, core.COMMIT, sim.now + offset, prev)
    if not connected:
        yield rng.uniform_ms(cfg.reconnect_delay_ms)
    run.messages += 1
    yield rng.uniform_ms(cfg.uplink_latency_ms)
    receipt = sim.stamp(sim.now)
    decision = commit_transaction(sim.registry, log, receipt, sim.history)
    run.messages += 1
    yield rng.uniform_ms(cfg.downlink_latency_ms)
    return decision.outcome


def _occ_attempt(sim: _Sim, spec: TxnSpec, aid: int, run: TxnTiming, rng: DetRng):
    cfg = sim.cfg
    sim.book.begin(aid, sim.now)
    connected = True
    for op in spec.data_ops:
        connected = _roll_disconnect(cfg, rng, connected)
        if cfg.mid_txn_reads and op.kind is OpKind.READ and connected:
            run.messages += 1
            yield rng.uniform_ms(cfg.uplink_latency_ms) + rng.uniform_ms(cfg.downlink_latency_ms)
        yield cfg.op_service_ms
        run.service_ms += cfg.op_service_ms
        if op.kind is OpKind.READ:
            sim.book.note_read(aid, op.item_id)
            sim.history.record_op(aid, op, sim.now)
        else:
            # buffered locally; the server sees the write at commit time
            sim.book.note_write(aid, op.item_id)
    if not connected:
        yield rng.uniform_ms(cfg.reconnect_delay_ms)
    run.messages += 1
    yield rng.uniform_ms(cfg.uplink_latency_ms)
    instant = sim.stamp(sim.now)
    outcome = occ_validate(sim.book, aid, instant)
    if outcome is Outcome.COMMITTED:
        for op in spec.data_ops:
            if op.kind is OpKind.WRITE:
                sim.history.record_op(aid, op, instant)
                sim.registry.apply_update(op.item_id, value=f"txn:{aid}".encode())
    sim.history.record_terminal(aid, outcome, instant)
    run.messages += 1
    yield rng.uniform_ms(cfg.downlink_latency_ms)
    return outcome


def _s2pl_attempt(sim: _Sim, spec: TxnSpec, aid: int, run: TxnTiming, rng: DetRng):
    cfg = sim.cfg
    sim.table.register_txn(aid, sim.now)
    connected = True
    try:
        for op in spec.data_ops:
            connected = _roll_disconnect(cfg, rng, connected)
            if not connected:
                yield rng.uniform_ms(cfg.reconnect_delay_ms)
                connected = True
            run.messages += 1
            yield rng.uniform_ms(cfg.uplink_latency_ms)
            mode = LockMode.SHARED if op.kind is OpKind.READ else LockMode.EXCLUSIVE
            granted_at = yield from _s2pl_lock_flow(sim, aid, op.item_id, mode)
            sim.history.record_op(aid, op, granted_at)
            run.messages += 1
            yield rng.uniform_ms(cfg.downlink_latency_ms)
            yield cfg.op_service_ms
            run.service_ms += cfg.op_service_ms
        run.messages += 1
        yield rng.uniform_ms(cfg.uplink_latency_ms)
        commit_instant = sim.stamp(sim.now)
        sim.history.record_terminal(aid, Outcome.COMMITTED, commit_instant)
        for op in spec.data_ops:
            if op.kind is OpKind.WRITE:
                sim.registry.apply_update(op.item_id, value=f"txn:{aid}".encode())
        sim.wake_granted(sim.table.release_all(aid))
        run.messages += 1
        yield rng.uniform_ms(cfg.downlink_latency_ms)
        return Outcome.COMMITTED
    except _VictimSignal:
        # server side already recorded the abort and released the locks
        run.messages += 1
        yield rng.uniform_ms(cfg.downlink_latency_ms)
        return Outcome.ABORTED


def _s2pl_lock_flow(sim: _Sim, aid: int, item_id: int, mode: LockMode):
    """Acquire one lock; parks while blocked, returns the grant instant,
    raises _VictimSignal when this transaction itself is chosen as victim
    (its server-side abort is recorded before the raise)."""
    res = sim.table.acquire(aid, item_id, mode)
    while not isinstance(res, Granted):
        if isinstance(res, DeadlockVictim):
            victim = res.txn_id
            if victim == aid:
                sim.history.record_terminal(aid, Outcome.ABORTED, sim.now)
                sim.wake_granted(sim.table.release_all(aid))
                raise _VictimSignal()
            sim.s2pl_server_abort(victim)
            sim.throw_parked(victim)
            if sim.table.holds(aid, item_id, mode):
                return sim.now  # the victim's release granted this request
            cycle = sim.table.find_cycle(aid)
            if cycle:
                res = DeadlockVictim(sim.table.youngest_of(cycle))
                continue
        yield ("park", aid)
        return sim.now
    return sim.now


def run_simulation(cfg: SimConfig) -> RunResult:
    """Execute every transaction of the workload under cfg.protocol.

    Returns the complete history plus one timing record per transaction.
    Deterministic: identical configs (seed included) yield identical results.
    """
    cfg.validate()
    master = DetRng(cfg.seed)
    specs = gen_workload(cfg, master.spawn(1))
    arrivals = master.spawn(2)
    offsets_rng = master.spawn(3)
    offsets = {c: offsets_rng.randint(-_CLIENT_CLOCK_SKEW_MS, _CLIENT_CLOCK_SKEW_MS)
               for c in range(cfg.n_clients)}

    sim = _Sim(cfg)
    timings = []
    submit = 0
    for spec in specs:
        submit += round(arrivals.exponential(cfg.arrival_mean))
        run = TxnTiming(spec.txn_id, spec.client_id, submit_ms=submit)
        timings.append(run)
        gen = _txn_process(sim, spec, run, master.spawn(1000 + spec.txn_id),
                           offsets[spec.client_id])
        sim.spawn(gen, submit)
    sim.run_loop()

    committed = sum(1 for t in timings if t.outcome is Outcome.COMMITTED)
    aborted = sum(1 for t in timings if t.outcome is Outcome.ABORTED)
    if committed + aborted != cfg.n_txns:
        raise AssertionError("conservation violated: every txn must reach a terminal")
    return RunResult(cfg, sim.history, timings, committed, aborted)
