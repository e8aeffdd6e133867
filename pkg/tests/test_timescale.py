import numpy as np
import pytest
from hypothesis import given, strategies as st

from tscontrol import (ContinuousInterval, DiscretePoints, TimeScaleError, build_grid,
                       continuous_grid, delta_derivative, delta_integral, integer_grid, mu,
                       parse_timescale_spec, periodic_grid, sigma)
from tscontrol.timescale import format_timescale_spec


def test_integer_grid_jump_and_graininess():
    g = integer_grid(0, 5)
    assert len(g) == 6
    assert sigma(g, 2) == 3.0
    assert mu(g, 2) == 1.0
    assert g.is_discrete


def test_continuous_grid_is_right_dense():
    g = continuous_grid(0, 1, 0.1)
    assert len(g) == 11
    assert sigma(g, 0.5) == pytest.approx(0.5)
    assert mu(g, 0.5) == 0.0
    assert not g.is_discrete


def test_gap_after_interval_is_scattered():
    g = build_grid("interval 0 1 0.25; points 3 4")
    assert g.point(1.0).right_scattered
    assert mu(g, 1.0) == 2.0
    assert sigma(g, 1.0) == 3.0
    assert mu(g, 3.0) == 1.0
    assert g.mu_max == 2.0


def test_final_node_has_no_successor():
    g = integer_grid(0, 3)
    with pytest.raises(TimeScaleError):
        sigma(g, 3)


def test_off_grid_time_rejected():
    g = integer_grid(0, 3)
    with pytest.raises(TimeScaleError):
        g.index(1.5)


@pytest.mark.parametrize("bad", [
    "interval 0 1", "interval 1 0 0.1", "points 2 1", "blob 1 2", "interval 0 1 0.1; points 0.5",
])
def test_invalid_specs(bad):
    with pytest.raises(TimeScaleError):
        build_grid(bad)


def test_delta_integral_on_integers_is_a_sum():
    g = integer_grid(0, 10)
    # integral_0^10 t Delta t on Z = 0 + 1 + ... + 9
    assert delta_integral(g, lambda t: t, 0, 10) == 45.0


def test_delta_integral_on_interval_is_the_classical_integral():
    g = continuous_grid(0, 1, 1e-3)
    assert delta_integral(g, lambda t: t ** 2, 0, 1) == pytest.approx(1 / 3, abs=1e-6)


def test_delta_integral_mixed():
    # [0,1] dense, then points 2, 3: integral of 1 is 1 + mu(1) + mu(2) = 3
    g = build_grid([ContinuousInterval(0, 1, 0.01), DiscretePoints([2, 3])])
    assert delta_integral(g, lambda t: 1.0, 0, 3) == pytest.approx(3.0)


def test_delta_derivative_of_square():
    # on Z, (t^2)^Delta = 2t + 1; on R, 2t
    assert delta_derivative(integer_grid(0, 5), lambda t: t ** 2, 2) == 5.0
    g = continuous_grid(0, 1, 1e-3)
    assert delta_derivative(g, lambda t: t ** 2, 0.5) == pytest.approx(1.0, abs=1e-9)


def test_periodic_grid_pattern():
    g = periodic_grid([ContinuousInterval(0, 1, 0.5), DiscretePoints([2, 6])], 10, 3)
    assert g.t_max == 26.0
    assert mu(g, 1.0) == 1.0 and mu(g, 6.0) == 4.0 and mu(g, 16.0) == 4.0


def test_parse_accepts_comments_and_fractions():
    segs = parse_timescale_spec("# window\ninterval 0 1/2 1/8\npoints 1 3/2  # gap")
    g = build_grid(segs)
    assert len(g) == 7
    assert mu(g, 0.5) == 0.5


segment_lists = st.lists(
    st.tuples(st.sampled_from(["interval", "points"]), st.integers(1, 4), st.integers(1, 3)),
    min_size=1, max_size=5)


@given(segment_lists)
def test_format_parse_round_trip(desc):
    segs, t = [], 0.0
    for kind, length, count in desc:
        if kind == "interval":
            segs.append(ContinuousInterval(t, t + length, length / 4))
        else:
            segs.append(DiscretePoints([t + i * length for i in range(count)]))
            t += (count - 1) * length
        t = segs[-1].end + 1.0
    text = format_timescale_spec(segs)
    again = parse_timescale_spec(text)
    assert format_timescale_spec(again) == text
    assert np.array_equal(build_grid(again).times, build_grid(segs).times)


@given(st.lists(st.floats(0.1, 5), min_size=2, max_size=8))
def test_delta_integral_of_one_is_the_length(gaps):
    pts = np.concatenate([[0.0], np.cumsum(gaps)])
    g = build_grid([DiscretePoints(pts)])
    assert delta_integral(g, lambda t: 1.0, pts[0], pts[-1]) == pytest.approx(pts[-1])
