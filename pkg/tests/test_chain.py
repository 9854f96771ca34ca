import numpy as np
import pytest

from aoi_offload.chain import (
    NEVER_OFFLOAD,
    Policy,
    StationarySolveError,
    age_threshold_policy,
    build_chain,
    evaluate_exact,
    local_only_policy,
    mec_only_policy,
    service_threshold_policy,
    stationary,
    threshold_table_policy,
)
from aoi_offload.core import ModelParams, State
from aoi_offload.heuristics import service_threshold_eval


def test_age_threshold_actions():
    pol = age_threshold_policy(3, 50)
    assert [pol.action(a, 0) for a in (1, 2, 3, 4)] == [0, 0, 1, 1]
    assert pol.action(7, 5) == 1
    assert age_threshold_policy(1, 10).action(1, 0) == 1  # offload everywhere


def test_age_threshold_validation():
    with pytest.raises(ValueError):
        age_threshold_policy(51, 50)
    with pytest.raises(ValueError):
        age_threshold_policy(0, 50)


def test_service_threshold_actions():
    pol = service_threshold_policy(2)
    assert pol.action(5, 0) == 0
    assert pol.action(5, 1) == 0
    assert pol.action(3, 2) == 1
    assert pol.action(9, 7) == 1
    assert pol.threshold(0) == NEVER_OFFLOAD
    assert pol.threshold(2) == 1


def test_policy_requires_exactly_one_rule():
    with pytest.raises(ValueError):
        Policy(name="bad")
    with pytest.raises(ValueError):
        Policy(name="bad", thresholds=(2,), action_fn=lambda a, z: 0)
    with pytest.raises(ValueError):
        Policy(name="bad", thresholds=())


def test_chain_rows_for_small_age_threshold():
    chain = build_chain(age_threshold_policy(2, 50), ModelParams(mu=0.5, a_max=50))
    rows = {
        s: {chain.states[j]: chain.matrix[i, j] for j in chain.matrix[i].indices}
        for i, s in enumerate(chain.states)
    }
    assert rows[State(1, 0)] == {State(1, 0): 0.5, State(2, 1): 0.5}
    assert rows[State(2, 1)] == {State(1, 0): 1.0}
    assert set(chain.states) == {State(1, 0), State(2, 1)}


def test_chain_shape_for_age_threshold_three():
    mu = 0.4
    chain = build_chain(age_threshold_policy(3, 50), ModelParams(mu=mu, a_max=50))
    rows = {
        s: {chain.states[j]: chain.matrix[i, j] for j in chain.matrix[i].indices}
        for i, s in enumerate(chain.states)
    }
    assert rows == {
        State(1, 0): {State(1, 0): mu, State(2, 1): 1 - mu},
        State(2, 1): {State(2, 0): mu, State(3, 2): 1 - mu},
        State(2, 0): {State(1, 0): mu, State(3, 1): 1 - mu},
        State(3, 2): {State(1, 0): 1.0},
        State(3, 1): {State(1, 0): 1.0},
    }


def test_chain_always_offload_is_single_state():
    chain = build_chain(mec_only_policy(), ModelParams(mu=0.3, a_max=50))
    assert chain.states == [State(1, 0)]
    assert chain.matrix[0, 0] == 1.0


def test_chain_never_offload_hits_forced_ceiling():
    a_max = 6
    chain = build_chain(local_only_policy(), ModelParams(mu=0.5, a_max=a_max))
    assert max(s.a for s in chain.states) == a_max
    forced = [i for i, s in enumerate(chain.states) if s.a == a_max]
    assert forced and all(chain.actions[i] == 1 for i in forced)
    sums = np.asarray(chain.matrix.sum(axis=1)).ravel()
    assert np.allclose(sums, 1.0, atol=1e-15)


@pytest.mark.parametrize("method", ["direct", "power", "auto"])
def test_stationary_two_state_hand_solution(method):
    chain = build_chain(age_threshold_policy(2, 50), ModelParams(mu=0.5, a_max=50))
    dist = stationary(chain, method=method)
    assert dist.prob(State(1, 0)) == pytest.approx(2.0 / 3.0, abs=1e-10)
    assert dist.prob(State(2, 1)) == pytest.approx(1.0 / 3.0, abs=1e-10)
    assert dist.residual <= 1e-10


def test_stationary_single_state():
    chain = build_chain(mec_only_policy(), ModelParams(mu=0.3, a_max=20))
    dist = stationary(chain)
    assert dist.as_dict() == {State(1, 0): 1.0}


def test_power_and_direct_agree():
    chain = build_chain(service_threshold_policy(3), ModelParams(mu=0.3, a_max=50))
    a = stationary(chain, method="power")
    b = stationary(chain, method="direct")
    assert np.max(np.abs(a.probs - b.probs)) <= 1e-9


def test_power_budget_failure_reports_residual():
    chain = build_chain(service_threshold_policy(3), ModelParams(mu=0.3, a_max=50))
    with pytest.raises(StationarySolveError) as err:
        stationary(chain, method="power", max_iters=2)
    assert err.value.residual > 0


def test_evaluate_age_threshold_two_state():
    res = evaluate_exact(age_threshold_policy(2, 50), ModelParams(mu=0.5, a_max=50))
    assert res.delta == pytest.approx(11.0 / 6.0, abs=1e-10)
    assert res.p_bar == pytest.approx(1.0 / 3.0, abs=1e-10)


def test_evaluate_always_offload():
    res = evaluate_exact(mec_only_policy(), ModelParams(mu=0.9, a_max=30))
    assert (res.delta, res.p_bar) == (1.5, 1.0)


@pytest.mark.parametrize("mu", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("z_star", [0, 1, 2, 5])
def test_chain_matches_closed_form(mu, z_star):
    closed = service_threshold_eval(mu, z_star)
    res = evaluate_exact(service_threshold_policy(z_star), ModelParams(mu=mu, a_max=50))
    assert res.delta == pytest.approx(closed.delta, rel=1e-9)
    assert res.p_bar == pytest.approx(closed.p_bar, rel=1e-9)


def test_reset_state_is_recurrent_under_every_policy():
    params = ModelParams(mu=0.4, a_max=15)
    for pol in (local_only_policy(), mec_only_policy(),
                age_threshold_policy(5, 15), service_threshold_policy(3),
                threshold_table_policy((6, 4, 2))):
        chain = build_chain(pol, params)
        dist = stationary(chain)
        assert dist.prob(State(1, 0)) > 0


def test_lagrangian_cost_uses_price():
    params = ModelParams(mu=0.5, lam=3.0, a_max=50)
    res = evaluate_exact(service_threshold_policy(1), params)
    assert res.g == pytest.approx(res.delta + 3.0 * res.p_bar, abs=1e-12)


def test_callable_policy_evaluates_like_threshold_form():
    params = ModelParams(mu=0.5, a_max=30)
    table = threshold_table_policy((5, 3, 2))
    wrapped = Policy(name="wrapped", action_fn=table.action)
    a = evaluate_exact(table, params)
    b = evaluate_exact(wrapped, params)
    assert a == b
