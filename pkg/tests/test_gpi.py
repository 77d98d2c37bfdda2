from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adabo.gpi import (
    GpiConfig,
    SurrogateUnavailableError,
    default_nominal_values,
    enumerate_rlds,
    gpi_search,
    search_space_size,
    split_train_test,
)
from adabo.gpr import Doe, fit_mle
from adabo.kernels import KernelFamily, KernelSpec
from adabo.model_quality import score
from adabo.sampling import sobol_points


def smooth_doe(n, dim=2, skip=1):
    X = sobol_points(dim, n, skip)
    return Doe(X, np.sin(5 * X[:, 0]) + np.cos(3 * X.sum(axis=1)))


def test_enumeration_starts_with_unrestricted_trio():
    rlds = enumerate_rlds()
    assert [(r.family, r.fixed) for r in rlds[:3]] == [
        (KernelFamily.RBF, {}),
        (KernelFamily.MATERN32, {}),
        (KernelFamily.RQ, {}),
    ]


def test_entries_four_to_six_fix_rbf_output_scale():
    low, mid, high = default_nominal_values()["c"]
    rlds = enumerate_rlds()[3:6]
    assert all(r.family is KernelFamily.RBF for r in rlds)
    assert [r.fixed for r in rlds] == [{"c": low}, {"c": mid}, {"c": high}]


def test_search_space_size():
    expected = 3 + sum(3 * t + 9 * comb(t, 2) for t in (3, 3, 4))
    assert expected == 141
    assert search_space_size() == 141
    assert len(enumerate_rlds(GpiConfig(max_depth=0))) == 3
    assert len(enumerate_rlds(GpiConfig(max_depth=1))) == 3 + 9 + 9 + 12


def test_pair_fixtures_vary_first_parameter_fastest():
    pairs = [r for r in enumerate_rlds() if len(r.fixed) == 2 and r.family is KernelFamily.RBF]
    low, mid, high = default_nominal_values()["c"]
    assert [p.fixed["c"] for p in pairs[:3]] == [low, mid, high]
    assert len({p.fixed["lengthscale"] for p in pairs[:3]}) == 1


def test_enumeration_is_pure():
    assert [r.describe() for r in enumerate_rlds()] == [r.describe() for r in enumerate_rlds()]


def test_nominal_values_are_geometric():
    nv = default_nominal_values()
    assert nv["lengthscale"][0] == pytest.approx(1e-3)
    assert nv["lengthscale"][1] == pytest.approx(10**-0.5)
    assert nv["lengthscale"][2] == pytest.approx(1e2)


def test_config_validation():
    with pytest.raises(ValueError):
        GpiConfig(trial_threshold=0)
    with pytest.raises(ValueError):
        GpiConfig(test_fraction=1.0)
    with pytest.raises(ValueError):
        GpiConfig(nominal_values={"c": (1e-9, 1.0, 2.0)})


def test_single_trial_returns_unrestricted_rbf():
    train, test = split_train_test(smooth_doe(30), 0.2, 0)
    res = gpi_search(train, test, GpiConfig(trial_threshold=1), rng=0)
    assert res.trials_used == 1
    assert res.spec.family is KernelFamily.RBF and not res.spec.fixed


def test_early_stop_on_good_fit():
    # a smooth function sampled densely is fitted to RelMSE < 0.05 on the first trials
    train, test = split_train_test(smooth_doe(40), 0.2, 0)
    res = gpi_search(train, test, GpiConfig(), rng=0)
    assert res.score.relmse < 0.05
    assert res.trials_used <= 3


def test_trials_never_exceed_budget():
    rng = np.random.default_rng(0)
    X = rng.random((25, 2))
    doe = Doe(X, rng.standard_normal(25))
    train, test = split_train_test(doe, 0.2, 0)
    for q in (1, 4, 7):
        assert gpi_search(train, test, GpiConfig(trial_threshold=q), rng=1).trials_used <= q


@settings(max_examples=6, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_result_never_worse_than_first_trial(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((20, 2))
    doe = Doe(X, np.sin(8 * X[:, 0]) + 0.3 * rng.standard_normal(20))
    train, test = split_train_test(doe, 0.2, seed)
    cfg = GpiConfig(trial_threshold=6)
    res = gpi_search(train, test, cfg, rng=seed)
    first_seed = int(np.random.default_rng(seed).integers(2**63))
    first = score(test, fit_mle(train, KernelSpec(KernelFamily.RBF), cfg.restarts, first_seed))
    assert res.score.relmse <= first.relmse


def test_previous_winner_is_tried_first():
    train, test = split_train_test(smooth_doe(40), 0.2, 0)
    prev = KernelSpec(KernelFamily.MATERN32, fixed={"s2": 1e-8})
    res = gpi_search(train, test, GpiConfig(), rng=0, previous=prev)
    assert res.trials_used == 1
    assert res.spec.family is KernelFamily.MATERN32 and res.spec.fixed == {"s2": 1e-8}


def test_all_failures_raise():
    train = Doe([[0.1], [0.2], [0.3]], [0.0, 1.0, 2.0])
    test = Doe([[0.5], [0.6]], [1.0, 1.0])  # constant test outputs cannot be scored
    with pytest.raises(SurrogateUnavailableError):
        gpi_search(train, test, GpiConfig(trial_threshold=2), rng=0)


def test_split_sizes():
    doe = smooth_doe(64)
    train, test = split_train_test(doe, 0.2, 0)
    assert (test.n, train.n) == (12, 52)
    train, test = split_train_test(smooth_doe(5), 0.2, 0)
    assert (test.n, train.n) == (1, 4)
    with pytest.raises(ValueError):
        split_train_test(smooth_doe(4), 0.2, 0)


def test_split_is_a_deterministic_partition():
    doe = smooth_doe(30)
    a_train, a_test = split_train_test(doe, 0.2, 7)
    b_train, b_test = split_train_test(doe, 0.2, 7)
    assert np.array_equal(a_test.X, b_test.X)
    rows = {tuple(r) for r in a_train.X} | {tuple(r) for r in a_test.X}
    assert rows == {tuple(r) for r in doe.X}
    assert not {tuple(r) for r in a_train.X} & {tuple(r) for r in a_test.X}
