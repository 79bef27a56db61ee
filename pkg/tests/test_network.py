from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmdc.config import ScenarioConfig
from mmdc.network import (
    Role,
    Street,
    UeState,
    build_topology,
    initial_pair,
    place_ue,
    step_mobility,
)

STREET = Street(((50.0, 0.0), (50.0, 100.0)))


def test_default_layout_is_six_sns_and_one_mn():
    nodes = build_topology(ScenarioConfig())
    sns = [n for n in nodes if n.role is Role.SN]
    mns = [n for n in nodes if n.role is Role.MN]
    assert len(sns) == 6 and len(mns) == 1
    assert {n.position for n in sns} == {(x, y) for x in (0.0, 50.0, 100.0) for y in (25.0, 75.0)}
    assert mns[0].position == (50.0, 50.0)
    dmin = min(math.dist(a.position, b.position) for a, b in itertools.combinations(sns, 2))
    assert dmin == 50.0


def test_default_channels_alternate_between_neighbours():
    sns = [n for n in build_topology(ScenarioConfig()) if n.role is Role.SN]
    for a, b in itertools.combinations(sns, 2):
        if math.dist(a.position, b.position) == 50.0:
            assert a.channel != b.channel


def test_two_nearest_sns_differ_in_channel_along_street():
    sns = [n for n in build_topology(ScenarioConfig()) if n.role is Role.SN]
    for y in np.linspace(0.5, 99.5, 100):
        ranked = sorted(sns, key=lambda n: (math.dist(n.position, (50.0, y)), n.id))
        assert ranked[0].channel != ranked[1].channel


def test_100m_spacing_gives_2x2_grid():
    nodes = build_topology(ScenarioConfig(inter_bs_distance_m=100.0))
    assert sum(n.role is Role.SN for n in nodes) == 4


def test_explicit_positions_alternate_channels_in_list_order():
    pts = ((10.0, 10.0), (20.0, 20.0), (30.0, 30.0))
    nodes = build_topology(ScenarioConfig(sn_positions=pts))
    sns = [n for n in nodes if n.role is Role.SN]
    assert [n.position for n in sns] == list(pts)
    assert [n.channel for n in sns] == [0, 1, 0]


def test_non_positive_spacing_rejected():
    # rejected at config validation and again by the builder itself
    with pytest.raises(ValueError):
        build_topology(ScenarioConfig(inter_bs_distance_m=0.0))


def test_linear_motion():
    ue = UeState((50.0, 10.0), (0.0, 10.0), 10.0, 1)
    nxt = step_mobility(ue, 1.0, STREET)
    assert nxt.position == pytest.approx((50.0, 20.0))


def test_bounce_folds_overshoot_at_the_end():
    ue = UeState((50.0, 99.5), (0.0, 10.0), 99.5, 1)
    nxt = step_mobility(ue, 0.1, STREET)
    assert nxt.velocity == pytest.approx((0.0, -10.0))
    assert nxt.position == pytest.approx((50.0, 99.5))
    assert nxt.reversals == 1


def test_sixty_seconds_is_six_traversals():
    ue = UeState((50.0, 0.0), (0.0, 10.0), 0.0, 1)
    for _ in range(60_000):
        ue = step_mobility(ue, 0.001, STREET)
    assert ue.reversals == 6
    assert ue.position[1] == pytest.approx(0.0, abs=1e-6)


def test_zero_dt_rejected():
    with pytest.raises(ValueError):
        step_mobility(place_ue(STREET, 10.0), 0.0, STREET)


@given(st.floats(0.0, 1.0), st.sampled_from([1, -1]),
       st.lists(st.floats(1e-4, 3.0), min_size=1, max_size=30))
def test_ue_stays_in_bounds_at_constant_speed(frac, direction, steps):
    ue = place_ue(STREET, 10.0, frac, direction)
    for dt in steps:
        ue = step_mobility(ue, dt, STREET)
        assert 0.0 <= ue.position[1] <= 100.0
        assert ue.position[0] == 50.0
        assert ue.speed == pytest.approx(10.0)


def test_initial_pair_prefers_distinct_carriers_and_stronger_serving():
    positions = np.array([[0, 25], [50, 25], [100, 25], [0, 75], [50, 75], [100, 75]], float)
    channels = np.array([0, 1, 0, 1, 0, 1])
    sinr = np.array([0, 10, 0, 0, 20, 0], float)
    # at (50, 50) SNs 1 and 4 tie on distance and differ in carrier
    assert initial_pair((50.0, 50.0), positions, channels, sinr) == (4, 1)
    sinr[1] = 30
    assert initial_pair((50.0, 50.0), positions, channels, sinr) == (1, 4)


def test_topology_is_deterministic():
    assert build_topology(ScenarioConfig()) == build_topology(ScenarioConfig())
