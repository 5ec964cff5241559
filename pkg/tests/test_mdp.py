import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import line, make_graph
from meshsched.errors import ContractViolation
from meshsched.mdp import (HOLD, ActionSpace, Packet, PacketState, PhyModel, ScheduleAction,
                           bit_budget, lagrangian_reward, power_grid, primary_reward, sinr,
                           transition)
from meshsched.net import FlowSpec


def pair(g2, n0):
    m = np.zeros((2, 2))
    m[0, 1] = m[1, 0] = g2
    return make_graph(2, [(0, 1)], m, noise_density=n0)


def test_sinr_worked_example():
    # noise N0 * 1 * 15 kHz = 0.5 mW, signal 100 * 0.01 = 1 mW, interference 0.5 mW
    g = pair(0.01, 0.5 / 15e3)
    assert sinr(g, 0, 1, 1, 100.0, 0.5) == pytest.approx(1.0)


def test_sinr_zero_gain():
    assert sinr(pair(0.0, 1e-6), 0, 1, 3, 50.0, 0.0) == 0.0


@given(i1=st.floats(0.0, 10.0), n_c=st.integers(1, 20), p=st.floats(1.0, 100.0))
@settings(max_examples=100, deadline=None)
def test_sinr_strictly_decreasing_in_interference(i1, n_c, p):
    g = pair(0.012, 4.08e-7)
    assert sinr(g, 0, 1, n_c, p, 2 * i1 + 1e-3) < sinr(g, 0, 1, n_c, p, i1)


def test_sinr_rejects_hold():
    with pytest.raises(ContractViolation):
        sinr(pair(0.01, 1e-6), 0, 1, 0, 10.0, 0.0)


def test_bit_budget_worked_example():
    # n_p h^2 / (N0 n_c dc) = 18 * 0.01 / (1e-6 * 4 * 15e3) = 3
    g = pair(0.01, 1e-6)
    assert bit_budget(g, 4, 18.0, 0.1) == pytest.approx(30.0)


def test_bit_budget_degenerate():
    g = pair(0.01, 1e-6)
    assert bit_budget(g, 0, 18.0, 0.1) == 0.0
    assert bit_budget(g, 4, 0.0, 0.1) == 0.0


def test_bit_budget_vectorises():
    g = pair(0.01, 1e-6)
    out = bit_budget(g, np.array([0, 4, 4]), np.array([18.0, 18.0, 0.0]), 0.1)
    assert np.allclose(out, [0.0, 30.0, 0.0])


@given(n_c=st.integers(1, 20), p=st.floats(1.0, 100.0))
@settings(max_examples=80, deadline=None)
def test_bit_budget_monotone(n_c, p):
    g = pair(0.012, 4.08e-7)
    h = math.sqrt(0.012)
    assert bit_budget(g, n_c + 1, p, h) > bit_budget(g, n_c, p, h)
    assert bit_budget(g, n_c, p * 1.5, h) > bit_budget(g, n_c, p, h)


def test_default_phy_unit_packet_needs_five_subcarriers_at_full_power():
    g = line(2)
    h = g.gain[0, 1]
    assert bit_budget(g, 4, 100.0, h) < 90
    assert abs(bit_budget(g, 5, 100.0, h) - 100) <= 10


def test_action_space_indexing():
    sp = ActionSpace([1, 3, 5, 7], 20, power_grid(100.0, 4))
    assert sp.size == 1 + 4 * 20 * 4
    assert sp.action(0) == HOLD
    for idx in (1, 2, 80, 81, 200, 320):
        a = sp.action(idx)
        assert sp.index(a) == idx
    assert sp.index(ScheduleAction(3, 1, 0)) == 1 + 20 * 4
    assert sp.n_p[0] == 0 and sp.n_c[0] == 0
    assert set(sp.n_p[1:]) == {25.0, 50.0, 75.0, 100.0}


def test_power_grid():
    assert np.allclose(power_grid(100.0, 4), [25, 50, 75, 100])
    with pytest.raises(ValueError):
        power_grid(100.0, 0)


class TestTransition:
    def test_hold_keeps_node(self, line4, rng):
        s = PacketState(0, 1, 5)
        assert transition(line4, s, HOLD, 0.0, rng) == (PacketState(0, 1, 4), False)

    def test_below_threshold_stays(self, line4, rng):
        s = PacketState(0, 1, 5)
        # one subcarrier at 25 mW but swamped by interference
        nxt, ok = transition(line4, s, ScheduleAction(2, 1, 0), 10.0, rng)
        assert (nxt, ok) == (PacketState(0, 1, 4), False)

    def test_ideal_success_moves(self, line4):
        s = PacketState(0, 1, 5)
        r = np.random.default_rng(0)
        before = r.bit_generator.state
        nxt, ok = transition(line4, s, ScheduleAction(2, 5, 3), 0.0, r)
        assert (nxt, ok) == (PacketState(0, 2, 4), True)
        assert r.bit_generator.state == before

    def test_expired_state_rejected(self, line4, rng):
        with pytest.raises(ContractViolation):
            transition(line4, PacketState(0, 1, 0), HOLD, 0.0, rng)

    def test_non_neighbour_rejected(self, line4, rng):
        with pytest.raises(ContractViolation):
            transition(line4, PacketState(0, 0, 3), ScheduleAction(2, 5, 3), 0.0, rng)

    def test_replay_is_markov(self, line4):
        phy = PhyModel("exp_err", k=3.0)
        s = PacketState(0, 1, 5)
        a = ScheduleAction(2, 5, 2)
        r = np.random.default_rng(9)
        snap = r.bit_generator.state
        first = [transition(line4, s, a, 0.2, r, phy) for _ in range(50)]
        r.bit_generator.state = snap
        assert [transition(line4, s, a, 0.2, r, phy) for _ in range(50)] == first

    def test_exp_err_frequency(self, line4):
        phy = PhyModel("exp_err", k=1.0)
        s = PacketState(0, 1, 5)
        q = sinr(line4, 1, 2, 5, 100.0, 0.0)
        r = np.random.default_rng(7)
        hits = sum(transition(line4, s, ScheduleAction(2, 5, 3), 0.0, r, phy)[1] for _ in range(4000))
        assert hits / 4000 == pytest.approx(math.exp(-1.0 / q), abs=0.03)

    @given(node=st.integers(0, 3), ttd=st.integers(1, 10), nc=st.integers(0, 20),
           lvl=st.integers(0, 3), interf=st.floats(0.0, 5.0), seed=st.integers(0, 1000))
    @settings(max_examples=150, deadline=None)
    def test_ttd_always_decrements(self, node, ttd, nc, lvl, interf, seed):
        g = line(4)
        nb = g.neighbors(node)[0]
        a = HOLD if nc == 0 else ScheduleAction(nb, nc, lvl)
        nxt, ok = transition(g, Packet(0, PacketState(0, node, ttd)), a, interf,
                             np.random.default_rng(seed))
        assert nxt.ttd == ttd - 1
        assert nxt.node == (nb if ok else node)


def test_primary_reward():
    f = FlowSpec(0, 0, 3)
    assert primary_reward(f, PacketState(0, 3, 2)) == 100.0
    assert primary_reward(f, PacketState(0, 3, 2), "weighted_unit") == 1.0
    assert primary_reward(f, PacketState(0, 2, 2)) == 0.0
    assert primary_reward(f, PacketState(0, 1, 0)) == 0.0


def test_lagrangian_worked_example():
    assert lagrangian_reward(1, 1, 0.1, 4, 0.01, 10, 2, 6) == pytest.approx(0.2)


def test_lagrangian_limits():
    assert lagrangian_reward(2.0, 3.0, 0.0, 7, 0.0, 50.0, 1, 4) == 6.0
    assert lagrangian_reward(1.0, 0.0, 0.3, 0, 0.2, 0.0, 1, 0) == 0.0
    with pytest.raises(ContractViolation):
        lagrangian_reward(1, 1, 0.1, 1, 0.1, 1, 0, 3)


def test_packet_terminal_flags_exclusive():
    p = Packet(0, PacketState(0, 0, 3))
    p.mark_delivered(4)
    assert not p.live
    with pytest.raises(ContractViolation):
        p.mark_dropped()
