import hashlib
import sys
import textwrap
from pathlib import Path

import pytest
import yaml

from adabo.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUN_FAILURE,
    ConfigError,
    _apply_overrides,
    main,
    parse_config,
    parse_config_dict,
)
from adabo.optimizer import Variant
from adabo.report import parse_table
from adabo.selection import SelectionStrategy

QUICK = {"iterations": 3, "n_init": 6, "seeds": 1, "acq_seeds": 64, "acq_steps": 10, "restarts": 2}


def write_config(tmp_path, cfg, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def digests(root: Path):
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_minimal_config_defaults():
    spec = parse_config_dict({"objective": {"name": "Sphere", "dim": 2}, "variant": "BO"})
    assert spec.mode == "optimize"
    assert (spec.n_init, spec.iterations, spec.seeds) == (16, 50, [0, 1, 2, 3, 4])
    (opt,) = spec.optimizers
    assert opt.variant is Variant.BO and opt.iterations == 50
    assert opt.acquisition.name == "LogEI"


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="'bogus'"):
        parse_config_dict({"objective": "Sphere", "bogus": 1})
    with pytest.raises(ConfigError, match="'colour'"):
        parse_config_dict({"objective": {"name": "Sphere", "colour": "red"}})


def test_negative_beta_is_named():
    with pytest.raises(ConfigError, match="beta"):
        parse_config_dict({"objective": "Sphere", "acquisition": "UCB", "beta": -1})
    with pytest.raises(ConfigError, match="beta"):
        parse_config_dict({"objective": "Sphere", "variant": "BO_Ada",
                           "acquisitions": [{"name": "UCB", "beta": -1}]})


@pytest.mark.parametrize("raw, field", [
    ({"objective": "Sphere", "iterations": 0}, "iterations"),
    ({"objective": "Sphere", "seeds": []}, "seeds"),
    ({"objective": "Nope"}, "name"),
    ({"objective": {"name": "external", "dim": 2}}, "command"),
    ({"variant": "BO"}, "objective"),
    ({"objective": "Sphere", "variant": "BO_Magic"}, "variant"),
    ({"objective": "Sphere", "gpi_depth": 3}, "gpi_depth"),
])
def test_schema_violations_name_the_field(raw, field):
    with pytest.raises(ConfigError, match=field):
        parse_config_dict(raw)


def test_benchmark_defaults_mirror_reference_layout():
    spec = parse_config_dict({"objective": {"name": "Sphere", "dim": 6}}, "benchmark")
    assert len(spec.reference) == 9
    assert {(c.kernel.family.value, c.acquisition.name) for c in spec.reference} == {
        (k, a) for k in ("RBF", "Matern32", "RQ") for a in ("LogEI", "LogPI", "UCB(2)")
    }
    assert [(c.variant, c.selection) for c in spec.challengers] == [
        (Variant.BO_GPI_IADA, SelectionStrategy.CATEGORICAL),
        (Variant.BO_GPI_IADA, SelectionStrategy.UNIFORM),
    ]


def test_overrides_precedence(tmp_path, monkeypatch):
    p = write_config(tmp_path, {"objective": "Sphere", "out": "from-config", "workers": 1})
    monkeypatch.setenv("ADABO_OUT", "from-env")
    monkeypatch.setenv("ADABO_WORKERS", "3")
    spec = _apply_overrides(parse_config(p))
    assert (spec.out, spec.workers) == ("from-env", 3)
    spec = _apply_overrides(parse_config(p), out="from-flag", workers=2, seed_offset=10)
    assert (spec.out, spec.workers) == ("from-flag", 2)
    assert spec.seeds == [10, 11, 12, 13, 14]
    monkeypatch.setenv("ADABO_WORKERS", "many")
    with pytest.raises(ConfigError, match="ADABO_WORKERS"):
        _apply_overrides(parse_config(p))


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["optimize", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    bad = write_config(tmp_path, {"objective": "Sphere", "bogus": 1})
    assert main(["optimize", "--config", str(bad)]) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    broken = tmp_path / "broken.yaml"
    broken.write_text("objective: [unclosed\n")
    assert main(["optimize", "--config", str(broken)]) == EXIT_CONFIG


def test_optimize_quick_run_is_reproducible(tmp_path, capsys):
    cfg = write_config(tmp_path, {"objective": {"name": "Sphere", "dim": 2}, "variant": "BO", **QUICK})
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert "best=" in capsys.readouterr().out
    runs = list((tmp_path / "a" / "Sphere-2D").glob("run_*.csv"))
    assert len(runs) == 1
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "b")]) == EXIT_OK
    assert digests(tmp_path / "a") == digests(tmp_path / "b")


def test_external_objective_missing_command(tmp_path, capsys):
    cfg = write_config(tmp_path, {"objective": {"name": "external", "dim": 2,
                                                "command": [str(tmp_path / "no-such-simulator")]}, **QUICK})
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_RUN_FAILURE
    assert "no-such-simulator" in capsys.readouterr().err


def test_external_objective_run(tmp_path):
    script = tmp_path / "sim.py"
    script.write_text(textwrap.dedent("""
        import sys
        for line in sys.stdin:
            print(sum((float(v) - 0.3) ** 2 for v in line.split()), flush=True)
    """))
    cfg = write_config(tmp_path, {"objective": {"name": "external", "dim": 2,
                                                "command": [sys.executable, str(script)]}, **QUICK})
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK


def test_sensitivity_outputs(tmp_path):
    cfg = write_config(tmp_path, {"objective": "Ishigami", "seeds": [3],
                                  "sensitivity": {"n_base": [256, 512, 1024], "resamples": 100}})
    assert main(["sensitivity", "--config", str(cfg), "--out", str(tmp_path / "a")]) == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == ["Ishigami-3D_convergence.csv", "Ishigami-3D_sobol_N1024.csv",
                     "Ishigami-3D_sobol_N256.csv", "Ishigami-3D_sobol_N512.csv"]
    for n in (256, 512, 1024):
        assert len((tmp_path / "a" / f"Ishigami-3D_sobol_N{n}.csv").read_text().splitlines()) == 1 + 3
    assert main(["sensitivity", "--config", str(cfg), "--out", str(tmp_path / "b")]) == EXIT_OK
    assert digests(tmp_path / "a") == digests(tmp_path / "b")


def test_benchmark_and_report(tmp_path):
    small = {"acq_seeds": 64, "acq_steps": 10, "restarts": 2}
    cfg = write_config(tmp_path, {
        "objective": {"name": "Sphere", "dim": 2}, "iterations": 3, "n_init": 6, "seeds": 2,
        "reference": [{"kernel": "RBF", **small}, {"kernel": "Matern32", "acquisition": "UCB", **small}],
        "challengers": [{"variant": "BO_GPi_iAda", "selection": "Categorical", "gpi_trials": 3, **small}],
    })
    out = tmp_path / "a"
    assert main(["benchmark", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    table = parse_table((out / "wcri_table.csv").read_text())
    assert table[("Sphere-2D", "No GPi", "No Ada", "-")] == (0.0,) * 5
    assert ("Sphere-2D", "GPi", "iAda", "Sel_Cat") in table
    plot = (out / "plotdata.csv").read_text().splitlines()
    assert len(plot) == 1 + 3 * 3

    before = digests(out)
    assert main(["report", "--out", str(out)]) == EXIT_OK
    assert digests(out) == before
    assert main(["benchmark", "--config", str(cfg), "--out", str(tmp_path / "b")]) == EXIT_OK
    assert digests(out) == digests(tmp_path / "b")
    assert main(["report", "--out", str(tmp_path / "nothing")]) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    import subprocess

    res = subprocess.run([sys.executable, "-m", "adabo", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "benchmark" in res.stdout
