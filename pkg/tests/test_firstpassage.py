from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bscfeedback.bounds import confirmation_steps
from bscfeedback.channel import derive_params
from bscfeedback.firstpassage import (
    FirstPassageSpec,
    delta0_star,
    delta0_upper_bound,
    simulate_chain,
    solve_closed_form,
    solve_linear_system,
    v0_upper_bound,
)

specs = st.builds(
    FirstPassageSpec,
    n=st.integers(1, 50),
    p=st.floats(min_value=1e-4, max_value=0.45),
    delta0=st.floats(min_value=0.0, max_value=100.0),
)


def rel_gap(a, b):
    return max(abs(x - y) / max(abs(y), 1.0) for x, y in zip(a, b))


def test_random_walk_weight_collapses_v0():
    # with the plain random-walk self loop, V0 = n / (1 - 2p) = 3 / 0.5
    spec = FirstPassageSpec(3, 0.25, 3.0)
    assert delta0_star(0.25) == 3.0
    assert solve_closed_form(spec).v0 == pytest.approx(6.0, abs=1e-12)
    assert solve_linear_system(spec).v0 == pytest.approx(6.0, abs=1e-12)
    exact = FirstPassageSpec(3, Fraction(1, 4), Fraction(3))
    assert solve_closed_form(exact, exact=True).v0 == 6
    assert solve_closed_form(exact, exact=True).v == (6, 4, 2)


@pytest.mark.parametrize("p", [0.01, 0.1, 0.3, 0.45])
@pytest.mark.parametrize("d0", [0.0, 1.0, 7.5])
def test_single_state_chain(p, d0):
    # V0 = q + p V0 + p d0 gives V0 = 1 + p d0 / q
    spec = FirstPassageSpec(1, p, d0)
    want = 1 + p * d0 / (1 - p)
    assert solve_closed_form(spec).v0 == pytest.approx(want, rel=1e-13)
    assert solve_linear_system(spec).v0 == pytest.approx(want, rel=1e-13)


def test_two_state_hand_elimination():
    # V1 = 1 + p V0, V0 = q + p V0 + q V1 with p = 1/4, d0 = 0
    # => V0 (1 - p - q p) = q + q  => V0 = 1.5 / (0.75 - 0.1875) = 8/3
    spec = FirstPassageSpec(2, 0.25, 0.0)
    res = solve_linear_system(spec)
    assert res.v[0] == pytest.approx(8 / 3, rel=1e-14)
    assert res.v[1] == pytest.approx(1 + 0.25 * 8 / 3, rel=1e-14)
    assert solve_closed_form(spec).v == pytest.approx(res.v, rel=1e-14)


def test_small_chain_solvers_agree():
    spec = FirstPassageSpec(4, 0.05, 10.0)
    assert rel_gap(solve_closed_form(spec).v, solve_linear_system(spec).v) < 1e-12


@given(specs)
def test_closed_form_matches_linear_system(spec):
    cf, ls = solve_closed_form(spec), solve_linear_system(spec)
    assert rel_gap(cf.v, ls.v) < 1e-10
    assert rel_gap(cf.delta_chain, ls.delta_chain) < 1e-10 if spec.n > 1 else True
    assert cf.v0 == pytest.approx(cf.v0_random_walk + cf.v0_differential, rel=1e-12)


@given(st.integers(1, 12), st.fractions(min_value=Fraction(1, 100), max_value=Fraction(49, 100)),
       st.fractions(min_value=0, max_value=50))
def test_exact_solvers_agree_exactly(n, p, d0):
    spec = FirstPassageSpec(n, p, d0)
    assert solve_closed_form(spec, exact=True).v == tuple(solve_linear_system(spec, exact=True).v)


def test_exact_mode_near_half():
    # 1/(1-2p) = 5000 here; rational arithmetic keeps the solvers identical
    spec = FirstPassageSpec(20, Fraction(4999, 10000), Fraction(3))
    a = solve_closed_form(spec, exact=True)
    b = solve_linear_system(spec, exact=True)
    assert a.v == tuple(b.v)
    assert isinstance(a.v0, Fraction)


@given(specs)
def test_differential_sign(spec):
    res = solve_closed_form(spec)
    d_star = res.delta0_star
    if spec.delta0 > d_star * (1 + 1e-9):
        assert res.v0 > res.v0_random_walk
    elif spec.delta0 < d_star * (1 - 1e-9):
        assert res.v0 < res.v0_random_walk


def test_monotone_in_delta0_and_n():
    for p in (0.05, 0.2, 0.4):
        v_d = [solve_linear_system(FirstPassageSpec(5, p, d)).v0 for d in np.linspace(0, 30, 31)]
        assert all(a < b for a, b in zip(v_d, v_d[1:]))
        v_n = [solve_linear_system(FirstPassageSpec(n, p, 4.0)).v0 for n in range(1, 30)]
        assert all(a < b for a, b in zip(v_n, v_n[1:]))


@pytest.mark.parametrize("p", [0.01, 0.05, 0.1, 0.2, 0.3, 0.45])
@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-6])
def test_v0_below_bound_used_for_main_result(p, eps):
    params = derive_params(p)
    n = confirmation_steps(eps, params)
    d_max = delta0_upper_bound(params)
    bound = v0_upper_bound(n, params)
    for d0 in np.linspace(0.0, d_max, 9):
        assert solve_closed_form(FirstPassageSpec(n, p, float(d0))).v0 <= bound + 1e-12


def test_monte_carlo_examples():
    spec = FirstPassageSpec(5, 0.3, delta0_star(0.3))
    est = simulate_chain(spec, 40_000, seed=11)
    assert abs(est.mean - 12.5) <= 4 * est.stderr
    spec = FirstPassageSpec(1, 0.02, 5.0)
    est = simulate_chain(spec, 40_000, seed=12)
    assert abs(est.mean - solve_closed_form(spec).v0) <= 4 * est.stderr
    assert simulate_chain(spec, 1000, seed=5) == simulate_chain(spec, 1000, seed=5)


@pytest.mark.parametrize("bad", [
    dict(n=0, p=0.1, delta0=1.0),
    dict(n=2, p=0.5, delta0=1.0),
    dict(n=2, p=0.6, delta0=1.0),
    dict(n=2, p=0.1, delta0=-1.0),
    dict(n=2, p=0.1, delta0=float("inf")),
])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        FirstPassageSpec(**bad)
