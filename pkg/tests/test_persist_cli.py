import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lerayalpha.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    KEYS,
    ConfigError,
    RunConfig,
    config_help,
    emit_config,
    main,
    parse_config,
)
from lerayalpha.diagnostics import EnergyLedger
from lerayalpha.mesh import GridSpec, ScalarField, random_solenoidal
from lerayalpha.persist import (
    FieldFormatError,
    atomic_write,
    loglog_svg,
    read_checkpoint,
    read_field,
    write_checkpoint,
    write_field,
)


def test_field_and_checkpoint_roundtrip_bit_exact(tmp_path):
    g = GridSpec(7, 5, 1.3)
    rng = np.random.default_rng(3)
    v = random_solenoidal(g, rng)
    p = ScalarField(rng.standard_normal((7, 5)), g)
    write_field(tmp_path / "f.txt", v)
    v2, p2 = read_field(tmp_path / "f.txt")
    assert p2 is None and np.array_equal(v.u, v2.u) and np.array_equal(v.v, v2.v)
    assert v2.grid.lx == 1.3
    write_checkpoint(tmp_path / "c.txt", v, p, 0.1 + 0.2, 30, 0.01)
    v3, p3, (t, k, dt) = read_checkpoint(tmp_path / "c.txt")
    assert np.array_equal(p.values, p3.values) and np.array_equal(v.u, v3.u)
    assert (t, k, dt) == (0.1 + 0.2, 30, 0.01)
    with pytest.raises(FieldFormatError):
        read_checkpoint(tmp_path / "f.txt")


def test_bad_field_files(tmp_path):
    bad = tmp_path / "bad.txt"
    for text in ("", "HELLO\n", "MACFIELD 4 4 2.0\nU\n1,2\n", "MACFIELD 4 x 2.0\n"):
        bad.write_text(text)
        with pytest.raises(FieldFormatError):
            read_field(bad)


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "a.txt"
    atomic_write(target, "one\n")
    atomic_write(target, "two\n")
    assert target.read_text() == "two\n"
    assert [p.name for p in target.parent.iterdir()] == ["a.txt"]


def test_svg():
    svg = loglog_svg({"err": [(0.1, 0.01), (0.05, 0.0025)]}, "h", "error", {"err": (2.0, 0.0)})
    assert svg.startswith("<svg") and "slope 2.000" in svg
    assert "no positive data" in loglog_svg({"err": [(0.1, 0.0)]}, "h", "e")


def test_parse_config_defaults_and_errors():
    cfg = parse_config("")
    assert (cfg.nx, cfg.ny, cfg.nu, cfg.lam, cfg.alpha, cfg.t_end) == (64, 64, 0.01, 0.5, 0.1, 1.0)
    with pytest.raises(ConfigError, match=r"lambda must be in \[0,1\)"):
        parse_config("lambda = 1.0")
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("nx = 32\n# comment\nbogus = 1\n")
    with pytest.raises(ConfigError, match="already set"):
        parse_config("nx = 32\nnx = 16\n")
    with pytest.raises(ConfigError):
        parse_config("nx = 2")
    assert parse_config("dt = auto\nT = 0.5").resolved_dt() > 0


def test_help_lists_exactly_the_keys():
    listed = {ln.split()[0] for ln in config_help().splitlines()[1:]}
    assert listed == set(KEYS)


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 512), st.floats(1e-4, 10), st.floats(0, 0.999), st.floats(1e-3, 1),
       st.sampled_from(["zero", "random", "mms"]), st.integers(0, 10**6))
def test_config_roundtrip(nx, nu, lam, alpha, ic, seed):
    cfg = RunConfig(nx=nx, nu=nu, lam=lam, alpha=alpha, ic=ic, seed=seed)
    assert parse_config(emit_config(cfg)) == cfg


def _ledger(out):
    return EnergyLedger.from_csv((out / "ledger.csv").read_text())


def test_run_on_zero_data(tmp_path):
    out = tmp_path / "o"
    code = main(["run", "--set", "nx=8", "--set", "ny=8", "--set", "ic=zero", "--set", "T=0.05",
                 "--set", "dt=0.01", "--out", str(out)])
    assert code == EXIT_OK
    led = _ledger(out)
    assert np.all(led.column("kinetic") == 0) and np.all(led.column("filter_distance") == 0)
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 0 and man["config"]["nx"] == 8
    v, p, (t, k, dt) = read_checkpoint(out / "checkpoint.txt")
    assert k == 5 and t == pytest.approx(0.05)


def test_config_error_still_writes_manifest(tmp_path):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text("lambda = 1.0\n")
    out = tmp_path / "o"
    code = main(["run", "--config", str(cfgfile), "--out", str(out)])
    assert code == EXIT_CONFIG
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == EXIT_CONFIG and "lambda must be in [0,1)" in man["cause"]


def test_cli_outputs_are_deterministic(tmp_path):
    args = ["--set", "nx=12", "--set", "ny=12", "--set", "T=0.1", "--set", "dt=0.01"]
    for d in ("a", "b"):
        assert main(["run", *args, "--out", str(tmp_path / d)]) == EXIT_OK
    for name in ("ledger.csv", "final.txt", "checkpoint.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_filter_test_and_sweep_alpha_commands(tmp_path):
    out = tmp_path / "f"
    assert main(["filter-test", "--fields", "3", "--set", "nx=8", "--set", "ny=8", "--out", str(out)]) == EXIT_OK
    assert (out / "filter_properties.csv").exists()
    out = tmp_path / "s"
    code = main(["sweep-alpha", "--alphas", "0.2,0.1,0.05", "--set", "nx=12", "--set", "ny=12",
                 "--set", "T=0.1", "--set", "dt=0.01", "--out", str(out)])
    assert code in (0, 1)
    assert (out / "sweep_alpha.csv").exists()
    assert (out / "sweep_alpha.svg").read_text().startswith("<svg")
    assert "verdict" in (out / "sweep_alpha_summary.txt").read_text()
