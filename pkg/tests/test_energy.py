from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgesense.energy import (EnergyBreakdown, LinkSelection, SlotTraffic, account_slot,
                              comp_energy, default_selection, drain_battery, hub_paths, plain_traffic,
                              sensing_energy, total_slot_energy, tran1_energy, tran2_energy,
                              tran3_energy)
from edgesense.errors import BrokenPath, LinkNotOwned, MissingLink, RadiusOutOfRange
from edgesense.netmodel import BatteryState, Topology

from conftest import chain_topology, make_device, make_sensor, mesh_servers
from oracles import naive_ledger, random_micro, random_slot


def test_sensing_worked_example():
    s = make_sensor(a=0.01, b=0.0004, U=5.0, r_max=25.0)
    assert sensing_energy(s, 20.0, 1.0) == pytest.approx(0.85, rel=1e-12)


def test_sensing_zero_radius_zero_idle():
    assert sensing_energy(make_sensor(a=0.0), 0.0, 1.0) == 0.0


def test_sensing_monotone_and_range():
    s = make_sensor(r_max=25.0)
    assert sensing_energy(s, 25.0, 1.0) > sensing_energy(s, 15.0, 1.0)
    with pytest.raises(RadiusOutOfRange):
        sensing_energy(s, 26.0, 1.0)


def test_tran1():
    assert tran1_energy(make_sensor(B1=1000.0, P1=0.5), 0) == 0.0
    assert tran1_energy(make_sensor(B1=1000.0, P1=0.5), 1000) == pytest.approx(0.5)
    base = tran1_energy(make_sensor(B1=1000.0, P1=0.5), 700)
    assert tran1_energy(make_sensor(B1=1000.0, P1=1.0), 700) == pytest.approx(2 * base)
    assert tran1_energy(make_sensor(B1=2000.0, P1=0.5), 700) == pytest.approx(base / 2)


def test_tran1_missing_link():
    with pytest.raises(MissingLink):
        tran1_energy(make_sensor(owner=-1), 10)


def test_comp():
    assert comp_energy(0, 1e3, 1e-12) == 0.0
    assert comp_energy(1e6, 1e3, 1e-12) == pytest.approx(1.0)
    assert comp_energy(500, 4e3, 1e-12) == pytest.approx(16 * comp_energy(500, 1e3, 1e-12))


def test_tran2():
    d = make_device(links=((0, 4000.0, 2.0), (1, 10.0, 99.0)))
    assert tran2_energy(d, None, 2000, 1.0) == 0.0
    assert tran2_energy(d, 0, 2000, 1.0) == pytest.approx(1.0)
    other = make_device(links=((0, 4000.0, 2.0), (1, 1e6, 0.01)))
    assert tran2_energy(other, 0, 2000, 1.0) == tran2_energy(d, 0, 2000, 1.0)
    with pytest.raises(LinkNotOwned):
        tran2_energy(d, 2, 10, 1.0)


def test_tran3():
    servers = mesh_servers(3, rate=1000.0, power=1.0)
    assert tran3_energy((), 1000, servers) == 0.0
    one = tran3_energy(((1, 0),), 1000, servers)
    assert one == pytest.approx(1.0)
    assert tran3_energy(((2, 1), (1, 0)), 1000, servers) == pytest.approx(2 * one)
    with pytest.raises(BrokenPath):
        tran3_energy(((2, 1), (0, 1)), 1000, servers)
    with pytest.raises(BrokenPath):
        tran3_energy(((1, 1),), 1000, servers)


def test_chain_total_is_435():
    top = chain_topology()
    sel = default_selection(top)
    b = total_slot_energy(top, [True], [20.0], sel, 1.0)
    assert b.as_tuple() == pytest.approx((0.85, 0.5, 1.0, 1.0, 1.0), rel=1e-12)
    assert b.total_J == pytest.approx(4.35, rel=1e-12)


def test_chain_with_explicit_leg_bytes():
    # each leg carries the byte count of its worked example
    grid_top = chain_topology()
    s = make_sensor(B1=1000.0, P1=0.5)
    d = make_device(links=((1, 4000.0, 2.0),), k=1e-12, f=1e3)
    top = Topology((s,), (d,), mesh_servers(2, rate=1000.0, power=1.0), grid_top.grid, hub=0)
    sel = LinkSelection(np.array([1]), hub_paths(top))
    traffic = SlotTraffic(sensed=np.array([1000.0]), formatted=np.array([1e6]),
                          sent=np.array([2000.0]), forwarded=np.array([0.0, 1000.0]))
    assert total_slot_energy(top, [True], [20.0], sel, 1.0, traffic).total_J == pytest.approx(4.35)


def test_zero_radii_zero_idle_is_all_zero():
    top = chain_topology()
    top = replace(top, sensors=(replace(top.sensors[0], current_law=(0.0, 0.0004)),))
    b = total_slot_energy(top, [True], [0.0], default_selection(top), 1.0)
    assert b == EnergyBreakdown()


def test_dead_device_contributes_nothing():
    top = chain_topology()
    acct = account_slot(top, [False], [20.0], default_selection(top), 1.0)
    assert acct.breakdown.total_J == 0.0
    assert acct.device_J.sum() == 0.0


def test_offloaded_comp_moves_to_server():
    top = chain_topology()
    sel = default_selection(top)
    local = account_slot(top, [True], [20.0], sel, 1.0)
    t = plain_traffic(top, [20.0], [True], sel)
    t.offloaded = np.array([True])
    off = account_slot(top, [True], [20.0], sel, 1.0, t)
    assert off.breakdown == local.breakdown
    assert off.device_J[0] == pytest.approx(local.device_J[0] - 1.0)
    assert off.server_J[1] == pytest.approx(local.server_J[1] + 1.0)


def test_removing_a_sensor_never_increases_terms():
    rng = np.random.default_rng(2)
    for _ in range(30):
        top = random_micro(rng)
        alive, radii, sel, _ = random_slot(top, rng)
        full = total_slot_energy(top, alive, radii, sel, 1.0)
        radii2 = radii.copy()
        radii2[rng.integers(len(radii2))] = 0.0
        fewer = total_slot_energy(top, alive, radii2, sel, 1.0)
        assert all(b <= a + 1e-12 for a, b in zip(full.as_tuple(), fewer.as_tuple()))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ledger_matches_naive_resummation(seed):
    rng = np.random.default_rng(seed)
    top = random_micro(rng)
    alive, radii, sel, traffic = random_slot(top, rng)
    got = total_slot_energy(top, alive, radii, sel, 1.0, traffic)
    want = naive_ledger(top, alive, radii, sel, 1.0, traffic)
    assert got.as_tuple() == pytest.approx(want, rel=1e-9, abs=1e-300)
    assert all(v >= 0 for v in got.as_tuple())


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1e7), st.floats(0.1, 100))
def test_terms_are_homogeneous_in_bytes(nbytes, scale):
    s = make_sensor(B1=5e4, P1=0.25)
    d = make_device(links=((0, 1e5, 1.0),))
    servers = mesh_servers(2)
    for fn in (lambda x: tran1_energy(s, x), lambda x: comp_energy(x, 1e8, 1e-21),
               lambda x: tran2_energy(d, 0, x, 1.0), lambda x: tran3_energy(((1, 0),), x, servers)):
        assert fn(nbytes) >= 0
        assert fn(scale * nbytes) == pytest.approx(scale * fn(nbytes), rel=1e-12, abs=1e-300)


# -- battery ---------------------------------------------------------------------------

def test_drain_worked_example():
    b = BatteryState.charged(3000.0, soc=0.5)
    out = drain_battery(b, 300.0)
    assert out.soc == pytest.approx(0.4)
    assert out.dod == pytest.approx(0.6)
    assert not out.dead


def test_drain_zero_is_identity():
    b = BatteryState.charged(3000.0, soc=0.7)
    assert drain_battery(b, 0.0) == b


def test_overdrain_marks_dead_and_clamps():
    b = BatteryState.charged(100.0, soc=0.5, soc_min=0.1)
    out = drain_battery(b, 45.0)
    assert out.dead and out.soc == 0.1 and out.dod == pytest.approx(0.9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 0.5), st.lists(st.floats(0, 500), max_size=20))
def test_drain_keeps_soc_in_bounds(soc0, soc_min, spends):
    soc0 = max(soc0, soc_min)
    b = BatteryState.charged(1000.0, soc=soc0, soc_min=soc_min)
    for spend in spends:
        nb = drain_battery(b, spend)
        assert soc_min <= nb.soc <= b.soc <= 1.0
        assert abs(nb.dod - (1 - nb.soc)) <= 1e-9
        assert nb.soe == b.soe
        b = nb
