import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noma_arena.sinr import (
    Assignment,
    ConstraintViolation,
    SlotGroup,
    count_delivered,
    interference_for,
    rate,
    sinr,
    slot_success_flags,
)

from conftest import make_scenario_direct, tiny_config

W = 40_000.0


class TestPointwise:
    def test_sinr_identity(self):
        assert sinr(1.0, 1.0, 0.0) == 1.0

    def test_sinr_with_interference(self):
        assert sinr(2.0, 2.0, 1.0) == 2.0

    def test_sinr_off(self):
        assert sinr(0.0, 123.0, 5.0) == 0.0

    def test_rate_log2(self):
        assert rate(1.0, 1.0, 0.0, W) == pytest.approx(40_000.0)
        assert rate(0.0, 1.0, 0.0, W) == 0.0
        assert rate(3.0, 1.0, 0.0, W) == pytest.approx(80_000.0)


class TestInterference:
    def test_singleton_zero(self):
        g = SlotGroup(slot=1, members=[(0, 2.0, 1.0)])
        assert interference_for(0, g) == 0.0

    def test_higher_gain_sees_lower(self):
        g = SlotGroup(slot=1, members=[(0, 1.0, 2.0), (1, 1.0, 1.0)])
        assert interference_for(0, g) == pytest.approx(1.0)
        assert interference_for(1, g) == 0.0

    def test_tie_breaks_by_id(self):
        g = SlotGroup(slot=1, members=[(0, 3.0, 1.0), (1, 5.0, 1.0)])
        # equal gains: lower id counts as lower gain
        assert interference_for(1, g) == pytest.approx(3.0)
        assert interference_for(0, g) == 0.0

    def test_absent_device_rejected(self):
        g = SlotGroup(slot=1, members=[(0, 1.0, 1.0)])
        with pytest.raises(ValueError):
            interference_for(5, g)


def group_of(pg_theta):
    """Build a group with unit powers: gain = pg, length from theta."""
    members = []
    lengths = []
    for dev, (pg, theta) in enumerate(pg_theta):
        members.append((dev, 1.0, float(pg)))
        lengths.append(W * np.log2(1.0 + theta))
    return SlotGroup(slot=1, members=members), np.array(lengths)


class TestSuccessFlags:
    def test_both_succeed(self):
        g, lens = group_of([(5.0, 1.0), (1.0, 1.0)])
        assert slot_success_flags(g, lens, W).tolist() == [True, True]

    def test_high_gain_fails_on_interference(self):
        g, lens = group_of([(5.0, 3.0), (1.0, 1.0)])
        assert slot_success_flags(g, lens, W).tolist() == [False, True]

    def test_empty_group(self):
        g = SlotGroup(slot=1, members=[])
        assert slot_success_flags(g, [], W).size == 0

    def test_member_order_irrelevant(self):
        g, lens = group_of([(5.0, 3.0), (1.0, 1.0), (9.0, 1.0)])
        perm = [2, 0, 1]
        g2 = SlotGroup(slot=1, members=[g.members[k] for k in perm])
        flags = slot_success_flags(g, lens, W)
        flags2 = slot_success_flags(g2, lens[perm], W)
        assert flags2.tolist() == flags[perm].tolist()

    def test_failed_transmitters_still_interfere(self):
        # the middle member fails its own test, yet its received power still
        # counts against the strongest member and sinks it: 2.5*(1+2+1) > 8,
        # while without the failed member 2.5*(1+1) <= 8 would have passed
        g, lens = group_of([(8.0, 2.5), (2.0, 5.0), (1.0, 1.0)])
        flags = slot_success_flags(g, lens, W)
        assert flags.tolist() == [False, False, True]

    @given(st.lists(st.tuples(st.floats(0.5, 50), st.floats(0.5, 8)), min_size=1, max_size=6))
    def test_below_solo_threshold_never_succeeds(self, pg_theta):
        g, lens = group_of(pg_theta)
        flags = slot_success_flags(g, lens, W)
        for k, (pg, theta) in enumerate(pg_theta):
            if pg < theta:
                assert not flags[k]

    @given(st.lists(st.tuples(st.floats(0.5, 50), st.floats(0.5, 8)), min_size=2, max_size=6))
    def test_removal_never_hurts_survivors(self, pg_theta):
        g, lens = group_of(pg_theta)
        flags = slot_success_flags(g, lens, W)
        drop = len(pg_theta) // 2
        keep = [k for k in range(len(pg_theta)) if k != drop]
        g2 = SlotGroup(slot=1, members=[g.members[k] for k in keep])
        flags2 = slot_success_flags(g2, lens[keep], W)
        for pos, k in enumerate(keep):
            if flags[k]:
                assert flags2[pos]


def theta_to_bits(theta: float) -> int:
    return int(round(W * np.log2(1.0 + theta)))


class TestCountDelivered:
    def make(self, gains_row, thetas, G=2, N=2):
        M = len(gains_row)
        gains = np.zeros((1, M, N))
        for j in range(N):
            gains[0, :, j] = gains_row
        lengths = np.array([[theta_to_bits(t) for t in thetas]])
        cfg = tiny_config(num_devices=M, num_slots=N, num_frames=1, group_cap=G)
        return make_scenario_direct(gains, lengths, config=cfg)

    def test_empty_assignment(self):
        s = self.make([1.0, 1.0], [1.0, 1.0])
        total, flags = count_delivered(Assignment.empty(1, 2), s, 1)
        assert total == 0 and not flags.any()

    def test_cap_admits_highest_gains(self):
        # three devices individually feasible on one slot, cap 2
        s = self.make([5.0, 40.0, 400.0], [1.0, 1.0, 1.0], G=2)
        a = Assignment(
            slots=np.array([[1, 1, 1]]),
            powers_mw=np.array([[1.0, 1.0, 1.0]]),
        )
        total, flags = count_delivered(a, s, 1)
        assert total <= 2
        assert not flags[0]  # lowest gain is the one squeezed out

    def test_window_violation_raises(self):
        s = self.make([1.0, 1.0], [1.0, 1.0])
        arrivals = np.array([[2, 1]])
        s2 = make_scenario_direct(
            s.gains, s.lengths, arrivals=arrivals, deadlines=np.array([[3, 3]]), config=None
        )
        a = Assignment(slots=np.array([[1, 0]]), powers_mw=np.array([[1.0, 0.0]]))
        with pytest.raises(ConstraintViolation) as err:
            count_delivered(a, s2, 1)
        assert "device 0" in str(err.value)

    def test_power_without_slot_raises(self):
        s = self.make([1.0, 1.0], [1.0, 1.0])
        a = Assignment(slots=np.array([[0, 0]]), powers_mw=np.array([[1.0, 0.0]]))
        with pytest.raises(ConstraintViolation):
            count_delivered(a, s, 1)

    def test_no_packet_never_counts(self):
        s = self.make([5.0, 5.0], [1.0, 1.0])
        lengths = np.array([[0, theta_to_bits(1.0)]])
        s2 = make_scenario_direct(s.gains, lengths)
        a = Assignment(slots=np.array([[1, 2]]), powers_mw=np.array([[1.0, 1.0]]))
        total, flags = count_delivered(a, s2, 1)
        assert not flags[0] and flags[1] and total == 1

    def test_matches_bruteforce_oracle(self):
        # independent straight-line evaluation of the success inequality
        rng = np.random.default_rng(5)
        for _ in range(300):
            M, N = 4, 2
            gains = rng.exponential(10.0, size=(1, M, N))
            thetas = rng.uniform(0.5, 6.0, size=M)
            lengths = np.array([[theta_to_bits(t) for t in thetas]])
            cfg = tiny_config(num_devices=M, num_slots=N, num_frames=1, group_cap=M)
            s = make_scenario_direct(gains, lengths, config=cfg)
            slots = rng.integers(0, N + 1, size=(1, M))
            powers = np.where(slots > 0, rng.uniform(0.5, 3.0, size=(1, M)), 0.0)
            total, flags = count_delivered(Assignment(slots, powers), s, 1)

            expect = np.zeros(M, dtype=bool)
            for i in range(M):
                j = slots[0, i]
                if j == 0 or lengths[0, i] == 0:
                    continue
                interf = 0.0
                for i2 in range(M):
                    if i2 != i and slots[0, i2] == j:
                        key_i2 = (gains[0, i2, j - 1], i2)
                        key_i = (gains[0, i, j - 1], i)
                        if key_i2 < key_i:
                            interf += powers[0, i2] * gains[0, i2, j - 1]
                theta = 2 ** (lengths[0, i] / W) - 1
                expect[i] = powers[0, i] * gains[0, i, j - 1] >= theta * (1 + interf)
            assert flags.tolist() == expect.tolist()
            assert total == expect.sum()
