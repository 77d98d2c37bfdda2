import sys
import textwrap
from dataclasses import replace

import numpy as np
import pytest

from adabo.acquisition import AcquisitionKind, AcquisitionTag
from adabo.bench import SyntheticObjective, initial_doe
from adabo.gpi import GpiConfig
from adabo.gpr import Doe
from adabo.kernels import KernelFamily, KernelSpec
from adabo.optimizer import (
    ExternalObjective,
    GpiCondition,
    ObjectiveError,
    OptimizerConfig,
    RunHistory,
    Variant,
    config_from_dict,
    recommend,
    run,
    run_adaptive_bo,
    run_bo,
    substream,
)
from adabo.selection import EsSchedule, SelectionStrategy

SPHERE2 = SyntheticObjective("Sphere", 2)
FAST = dict(acq_budget=(64, 10), restarts=3)
LOG_EI = AcquisitionKind(AcquisitionTag.LOG_EI)


def trajectory(h: RunHistory):
    return [(r.x.tobytes(), r.y, r.acquisition, r.gpi_event) for r in h.records]


@pytest.fixture(scope="module")
def init2():
    return initial_doe(SPHERE2, 2, 8, 0)


def test_single_iteration_appends_one_row(init2):
    h = run_bo(SPHERE2, init2, OptimizerConfig(iterations=1, **FAST))
    assert len(h.records) == 1 and h.doe.n == init2.n + 1


def test_bo_beats_its_initial_design(init2):
    cfg = OptimizerConfig(kernel=KernelSpec(KernelFamily.MATERN32), acquisition=LOG_EI, iterations=30)
    h = run_bo(SPHERE2, init2, cfg)
    assert h.incumbents[-1] < init2.y.min()
    assert recommend(h)[1] == min(init2.y.min(), min(r.y for r in h.records))


def test_same_seed_gives_identical_history(init2):
    cfg = OptimizerConfig(variant="BO_iAda", iterations=4, seed=3, **FAST)
    assert trajectory(run(SPHERE2, init2, cfg)) == trajectory(run(SPHERE2, init2, cfg))


@pytest.mark.parametrize("variant", list(Variant))
def test_every_variant_keeps_budget_and_monotone_incumbent(variant, init2):
    cfg = OptimizerConfig(variant=variant, iterations=4, seed=1, gpi=GpiConfig(trial_threshold=3),
                          gpi_condition=GpiCondition("periodic", 2), **FAST)
    h = run_adaptive_bo(SPHERE2, init2, cfg)
    assert h.status == "ok" and len(h.records) == 4
    inc = h.incumbents
    assert np.all(np.diff(inc) <= 0)
    if variant.uses_gpi:
        assert h.gpi_iterations == [1, 3]
    else:
        assert h.gpi_iterations == []


def test_ada_with_singleton_set_is_standard_bo(init2):
    base = OptimizerConfig(acquisition=LOG_EI, iterations=5, seed=9, **FAST)
    ada = replace(base, variant=Variant.BO_ADA, acquisitions=(LOG_EI,), selection=SelectionStrategy.CATEGORICAL)
    assert trajectory(run(SPHERE2, init2, base)) == trajectory(run(SPHERE2, init2, ada))


def test_gpi_ada_with_singleton_set_is_gpi(init2):
    gpi = GpiConfig(trial_threshold=2)
    base = OptimizerConfig(variant=Variant.BO_GPI, acquisition=LOG_EI, gpi=gpi, iterations=3, seed=2, **FAST)
    ada = replace(base, variant=Variant.BO_GPI_ADA, acquisitions=(LOG_EI,))
    assert trajectory(run(SPHERE2, init2, base)) == trajectory(run(SPHERE2, init2, ada))


def test_held_out_test_set_is_used_first(init2):
    train, test = Doe(init2.X[:6], init2.y[:6]), Doe(init2.X[6:], init2.y[6:])
    cfg = OptimizerConfig(variant=Variant.BO_GPI_IADA, gpi=GpiConfig(trial_threshold=2), iterations=2, **FAST)
    h = run_adaptive_bo(SPHERE2, train, cfg, test)
    assert h.gpi_iterations == [1]
    assert h.doe.n == init2.n + 2


def test_es_filter_records_threshold(init2):
    cfg = OptimizerConfig(variant=Variant.BO_IADA, es_schedule=EsSchedule.constant(-100.0), iterations=2, **FAST)
    h = run(SPHERE2, init2, cfg)
    assert all(r.es_threshold == -100.0 for r in h.records)
    assert all(len(r.es_scores) == 3 for r in h.records)


def test_recommend_examples():
    X = np.array([[0.1], [0.2], [0.3]])
    h = RunHistory(OptimizerConfig(), Doe(X, [3.0, 1.0, 2.0]))
    x, y = recommend(h)
    assert y == 1.0 and x[0] == 0.2
    h = RunHistory(OptimizerConfig(), Doe(X[:2], [1.0, 1.0]))
    assert recommend(h)[0][0] == 0.1


def test_objective_failure_aborts_with_partial_history(init2):
    calls = []

    def flaky(u):
        calls.append(1)
        if len(calls) > 2:
            return float("nan")
        return SPHERE2(u)

    h = run_bo(flaky, init2, OptimizerConfig(iterations=5, **FAST))
    assert h.aborted and len(h.records) == 2
    assert "non-finite" in h.message


def test_gpi_condition_kinds():
    assert GpiCondition("never")(1, [])
    assert not GpiCondition("never")(5, [])
    assert [i for i in range(1, 12) if GpiCondition("periodic", 5)(i, [])] == [1, 6, 11]
    with pytest.raises(ValueError):
        GpiCondition("sometimes")


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        OptimizerConfig(iterations=0)
    with pytest.raises(ValueError):
        OptimizerConfig(variant="BO_Ada", acquisitions=())
    cfg = OptimizerConfig(
        variant="BO_GPi_iAda", selection="Categorical", iterations=7, seed=4,
        acquisitions=(LOG_EI, AcquisitionKind("UCB", 1.5)),
        gpi=GpiConfig(trial_threshold=5), gpi_condition=GpiCondition("stagnation", 4),
        es_schedule=EsSchedule(values=(0.1, 0.2)),
    )
    assert config_from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    bo = OptimizerConfig(kernel=KernelSpec(KernelFamily.RQ, fixed={"alpha": 2.0}), acquisition=AcquisitionKind("UCB", 3))
    assert config_from_dict(bo.to_dict()) == bo


def test_substreams_are_independent_and_reproducible():
    a = substream(1, "mle", 3).random(4)
    assert np.array_equal(a, substream(1, "mle", 3).random(4))
    assert not np.array_equal(a, substream(1, "acq", 3).random(4))
    assert not np.array_equal(a, substream(2, "mle", 3).random(4))


@pytest.fixture()
def square_script(tmp_path):
    p = tmp_path / "sq.py"
    p.write_text(textwrap.dedent("""
        import sys
        for line in sys.stdin:
            xs = [float(v) for v in line.split()]
            print(sum((x - 0.5) ** 2 for x in xs), flush=True)
    """))
    return p


def test_external_objective_round_trip(square_script):
    with ExternalObjective([sys.executable, str(square_script)], dim=2) as f:
        assert f([0.5, 0.5]) == 0.0
        assert f(np.array([0.0, 1.0])) == pytest.approx(0.5)
        with pytest.raises(ObjectiveError):
            f([0.1, 0.2, 0.3])


def test_external_objective_failures(tmp_path):
    with pytest.raises(ObjectiveError):
        ExternalObjective([str(tmp_path / "missing")])([0.1])
    bad = tmp_path / "bad.py"
    bad.write_text("import sys\nfor line in sys.stdin:\n    print('nope', flush=True)\n")
    with ExternalObjective([sys.executable, str(bad)]) as f:
        with pytest.raises(ObjectiveError):
            f([0.1])


def test_external_objective_drives_a_run(square_script, init2):
    with ExternalObjective([sys.executable, str(square_script)], dim=2) as f:
        doe = Doe(init2.X, [f(x) for x in init2.X])
        h = run_bo(f, doe, OptimizerConfig(iterations=2, **FAST))
    assert h.status == "ok" and len(h.records) == 2


@pytest.mark.slow
def test_gpi_iada_not_worse_than_worst_reference_on_alpine():
    from adabo.bench import reference_configs, run_ensemble
    from adabo.report import wcri

    obj = SyntheticObjective("AlpineN2", 3)
    seeds = range(5)
    ref = run_ensemble(obj, reference_configs(40), seeds, n_init=16)
    new = run_ensemble(obj, [OptimizerConfig(variant=Variant.BO_GPI_IADA, iterations=40)], seeds, n_init=16)
    finals = [np.median(e.incumbent_matrix()[:, -1]) for e in ref]
    assert np.median(new[0].incumbent_matrix()[:, -1]) <= max(finals)
    assert wcri(ref, new, 2, offset=obj.lower_bound) >= 0
