import io
import json

import pytest

from helpers import line
from meshsched.errors import ContractViolation
from meshsched.feedback import (FeedbackRecord, FeedbackTables, backtrack, dump_tables,
                                expire_records, record_hop)
from meshsched.mdp import PacketState


def S(node, ttd):
    return PacketState(0, node, ttd)


def walk(tables, path, start_ttd=10, slot=0, pid=7, n_c=5, lam=0.0):
    """Record hops along ``path`` one slot apart; returns the final state."""
    prev = None
    ttd = start_ttd
    for k, (i, j) in enumerate(zip(path, path[1:])):
        cur, nxt = S(i, ttd), S(j, ttd - 1)
        record_hop(tables, i, FeedbackRecord(pid, slot + k, 0, prev, cur, nxt, action=3 + k,
                                             n_c=n_c, n_p=100.0, lam=lam))
        prev, ttd = cur, ttd - 1
    return S(path[-1], ttd)


@pytest.fixture
def tables():
    return FeedbackTables.for_graph(line(4))


def test_three_hop_backtrack(tables):
    end = walk(tables, [0, 1, 2, 3], lam=0.01)
    traj = backtrack(tables, 0, end, 100.0, 7)
    assert [s for s, _, _ in traj] == [S(0, 10), S(1, 9), S(2, 8)]
    assert [a for _, a, _ in traj] == [3, 4, 5]
    assert [r for _, _, r in traj] == pytest.approx([-0.05, -0.05, 100 - 0.05])
    assert len(tables) == 0


def test_one_hop_backtrack(tables):
    end = walk(tables, [2, 3])
    assert len(backtrack(tables, 0, end, 100.0, 7)) == 1


def test_holds_are_part_of_the_path(tables):
    end = walk(tables, [0, 0, 1, 1, 2, 3])
    traj = backtrack(tables, 0, end, 100.0, 7)
    assert [s.node for s, _, _ in traj] == [0, 0, 1, 1, 2]


def test_consumed_once(tables):
    end = walk(tables, [0, 1, 2, 3])
    assert backtrack(tables, 0, end, 100.0, 7) is not None
    assert backtrack(tables, 0, end, 100.0, 7) is None
    assert tables.missing == 1


def test_missing_record_restores_partial_walk(tables):
    end = walk(tables, [0, 1, 2, 3])
    # knock out the middle hop
    key = (0, S(2, 8))
    del tables.tables[1][key]
    before = len(tables)
    assert backtrack(tables, 0, end, 100.0, 7) is None
    assert len(tables) == before
    assert tables.missing == 1


def test_duplicate_keys_from_different_packets(tables):
    walk(tables, [0, 1], pid=1)
    end = walk(tables, [0, 1], pid=2)
    assert len(tables.tables[0][(0, end)]) == 2
    traj = backtrack(tables, 0, end, 100.0, 2)
    assert len(traj) == 1
    assert tables.tables[0][(0, end)][0].packet_id == 1


def test_first_hop_has_no_previous_state(tables):
    walk(tables, [0, 1])
    (rec,) = tables.tables[0][(0, S(1, 9))]
    assert rec.previous_state is None


def test_wrong_node_guard(tables):
    rec = FeedbackRecord(0, 0, 0, None, S(1, 5), S(2, 4), 1)
    with pytest.raises(ContractViolation):
        record_hop(tables, 0, rec)


def test_ttd_guard(tables):
    with pytest.raises(ContractViolation):
        record_hop(tables, 1, FeedbackRecord(0, 0, 0, None, S(1, 5), S(2, 5), 1))


def test_expiry(tables):
    assert expire_records(tables, 100, 11) == 0
    walk(tables, [0, 1, 2], slot=0)
    walk(tables, [2, 3], slot=95, pid=9)
    assert expire_records(tables, 100, 11) == 2
    assert len(tables) == 1


def test_step_reward_includes_shaping_and_interference():
    rec = FeedbackRecord(0, 0, 0, None, S(1, 5), S(2, 4), 1, n_c=4, n_p=10.0,
                         interference_subcarriers=6, N_i=2, H=0.5, lam=0.1, mu=0.01)
    assert rec.step_reward() == pytest.approx(0.5 - 0.4 - 0.1 - 0.3)
    assert rec.step_reward(1.0) == pytest.approx(1.5 - 0.8)


def test_dump_tables_ndjson(tables):
    walk(tables, [0, 1, 2])
    fh = io.StringIO()
    dump_tables(tables, fh, 3)
    rows = [json.loads(x) for x in fh.getvalue().splitlines()]
    assert [r["node"] for r in rows] == [0, 1]
    assert rows[1]["previous_state"] == [0, 0, 10]
