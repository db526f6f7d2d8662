import pytest

from ccarena import (
    History,
    OracleScaleError,
    Outcome,
    brute_force_serializable,
    build_serialization_graph,
    check_commitment_ordering,
    conflict_skeleton,
    is_acyclic,
    read,
    write,
)
from ccarena.rng import DetRng


def hist(*events):
    """events: ('r'|'w', txn, item, instant) or ('c'|'a', txn, instant)."""
    h = History()
    for ev in events:
        tag = ev[0]
        if tag == "r":
            h.record_op(ev[1], read(ev[2]), ev[3])
        elif tag == "w":
            h.record_op(ev[1], write(ev[2]), ev[3])
        elif tag == "c":
            h.record_terminal(ev[1], Outcome.COMMITTED, ev[2])
        else:
            h.record_terminal(ev[1], Outcome.ABORTED, ev[2])
    return h


LOST_UPDATE = hist(("r", 1, 0, 5), ("r", 2, 0, 6), ("w", 1, 0, 20), ("w", 2, 0, 21),
                   ("c", 1, 30), ("c", 2, 31))


class TestBuildGraph:
    def test_single_txn_graph(self):
        g = build_serialization_graph(hist(("r", 1, 0, 5), ("c", 1, 9)))
        assert g.nodes == {1}
        assert g.edges == {}

    def test_write_read_edge(self):
        g = build_serialization_graph(hist(("w", 1, 0, 10), ("c", 1, 12),
                                           ("r", 2, 0, 15), ("c", 2, 20)))
        assert set(g.edges) == {(1, 2)}
        label = g.edges[(1, 2)][0]
        assert label.item_id == 0 and label.instants == (10, 15)

    def test_lost_update_cycle(self):
        g = build_serialization_graph(LOST_UPDATE)
        assert (1, 2) in g.edges and (2, 1) in g.edges

    def test_aborted_txns_contribute_nothing(self):
        g = build_serialization_graph(hist(("w", 1, 0, 10), ("a", 1, 12),
                                           ("r", 2, 0, 15), ("c", 2, 20)))
        assert g.nodes == {2}
        assert g.edges == {}

    def test_reads_do_not_conflict(self):
        g = build_serialization_graph(hist(("r", 1, 0, 5), ("r", 2, 0, 6),
                                           ("c", 1, 9), ("c", 2, 10)))
        assert g.edges == {}

    def test_tie_directed_by_commit_order(self):
        g = build_serialization_graph(hist(("w", 1, 0, 10), ("w", 2, 0, 10),
                                           ("c", 2, 12), ("c", 1, 14)))
        assert set(g.edges) == {(2, 1)}  # T2 committed first
        assert g.ties == [(0, 2, 1, 10)]


class TestIsAcyclic:
    def test_empty_graph(self):
        assert is_acyclic(build_serialization_graph(History()))

    def test_lost_update_graph_is_cyclic(self):
        check = is_acyclic(build_serialization_graph(LOST_UPDATE))
        assert not check
        assert sorted(check.cycle) == [1, 2]

    def test_chain_is_acyclic(self):
        h = hist(("w", 1, 0, 1), ("c", 1, 2), ("w", 2, 0, 3), ("c", 2, 4),
                 ("w", 3, 0, 5), ("c", 3, 6))
        check = is_acyclic(build_serialization_graph(h))
        assert check and check.cycle is None


class TestCommitmentOrdering:
    def test_conflict_free_history_is_ok(self):
        h = hist(("r", 1, 0, 5), ("r", 2, 1, 6), ("c", 1, 9), ("c", 2, 10))
        assert check_commitment_ordering(h).ok

    def test_conflict_order_matching_commit_order(self):
        h = hist(("w", 1, 0, 10), ("c", 1, 12), ("r", 2, 0, 15), ("c", 2, 20))
        assert check_commitment_ordering(h).ok

    def test_commit_before_conflicting_predecessor_is_a_violation(self):
        # T1's write precedes T2's read, but T2 commits first
        h = hist(("w", 1, 0, 10), ("r", 2, 0, 15), ("c", 2, 18), ("c", 1, 25))
        res = check_commitment_ordering(h)
        assert not res.ok
        assert res.violation[0] == 1 and res.violation[1] == 2
        assert res.violation[2] == 0

    def test_read_write_violation(self):
        # T1 read at 5, T2 wrote at 9 but committed before T1
        h = hist(("r", 1, 0, 5), ("w", 2, 0, 9), ("c", 2, 11), ("c", 1, 20))
        res = check_commitment_ordering(h)
        assert not res.ok

    def test_tie_is_consistent_and_logged(self):
        h = hist(("w", 1, 0, 10), ("w", 2, 0, 10), ("c", 2, 12), ("c", 1, 14))
        res = check_commitment_ordering(h)
        assert res.ok
        assert res.ties == [(0, 2, 1, 10)]

    def test_co_implies_acyclic_on_random_histories(self):
        rng = DetRng(555)
        implied = 0
        for _ in range(300):
            h = random_history(rng, max_txns=6)
            co = check_commitment_ordering(h)
            if co.ok:
                implied += 1
                assert is_acyclic(build_serialization_graph(h))
        assert implied > 20  # the generator must produce CO histories too


class TestBruteForce:
    def test_lost_update_not_serializable(self):
        assert not brute_force_serializable(LOST_UPDATE)

    def test_single_txn_serializable(self):
        assert brute_force_serializable(hist(("w", 1, 0, 3), ("c", 1, 5)))

    def test_empty_history_serializable(self):
        assert brute_force_serializable(History())

    def test_scale_guard(self):
        h = History()
        for txn in range(9):
            h.record_op(txn, write(0), txn + 1)
            h.record_terminal(txn, Outcome.COMMITTED, 100 + txn)
        with pytest.raises(OracleScaleError):
            brute_force_serializable(h)

    def test_serializable_despite_nonchronological_commits(self):
        # conflict-equivalent to T2;T1 although T1 commits first
        h = hist(("w", 2, 0, 5), ("r", 1, 0, 9), ("c", 1, 12), ("c", 2, 30))
        assert brute_force_serializable(h)
        assert not check_commitment_ordering(h).ok  # CO is strictly stronger


def random_history(rng: DetRng, max_txns=7, max_ops=6, n_items=4) -> History:
    """Random small history: random instants, random terminal order; commit
    instants distinct per txn (the simulated server stamps uniquely)."""
    n_txns = 1 + rng.randrange(max_txns)
    h = History()
    horizon = 100
    terminal_base = horizon + 10
    order = list(range(1, n_txns + 1))
    # shuffle terminal order
    for i in range(len(order) - 1, 0, -1):
        j = rng.randrange(i + 1)
        order[i], order[j] = order[j], order[i]
    for txn in range(1, n_txns + 1):
        for _ in range(1 + rng.randrange(max_ops)):
            op = read(rng.randrange(n_items)) if rng.random() < 0.5 \
                else write(rng.randrange(n_items))
            h.record_op(txn, op, rng.randrange(horizon))
    for k, txn in enumerate(order):
        outcome = Outcome.COMMITTED if rng.random() < 0.8 else Outcome.ABORTED
        h.record_terminal(txn, outcome, terminal_base + k)
    return h


class TestOracleAgreement:
    def test_brute_force_agrees_with_graph_acyclicity(self):
        rng = DetRng(1234)
        serializable = cyclic = 0
        for _ in range(300):
            h = random_history(rng)
            expected = bool(is_acyclic(build_serialization_graph(h)))
            assert brute_force_serializable(h) == expected
            serializable += expected
            cyclic += not expected
        assert serializable > 30 and cyclic > 30  # both branches exercised

    def test_skeleton_matches_full_graph_acyclicity(self):
        rng = DetRng(4321)
        for _ in range(400):
            h = random_history(rng, max_txns=8, max_ops=8, n_items=5)
            full = bool(is_acyclic(build_serialization_graph(h)))
            reduced = bool(is_acyclic(conflict_skeleton(h)))
            assert full == reduced

    def test_cycle_witness_follows_real_edges(self):
        rng = DetRng(777)
        witnessed = 0
        for _ in range(300):
            h = random_history(rng, max_txns=6, max_ops=6, n_items=3)
            g = build_serialization_graph(h)
            check = is_acyclic(g)
            if check:
                continue
            witnessed += 1
            cycle = check.cycle
            assert len(cycle) >= 2
            for a, b in zip(cycle, cycle[1:] + cycle[:1]):
                assert (a, b) in g.edges, f"witness step {a}->{b} is not an edge"
        assert witnessed > 50
