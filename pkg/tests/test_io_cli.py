import json

import numpy as np
import pytest

from gapsolitons.cli import main
from gapsolitons.errors import ConfigError, StageError
from gapsolitons.grid import UniformGrid, VectorField
from gapsolitons.io import RunConfig, read_csv, read_field, write_csv, write_field
from gapsolitons.pipeline import run_pipeline


def test_field_binary_roundtrip(tmp_path):
    g = UniformGrid((-3.0, 0.5), (6.0, 2.0), (12, 8))
    rng = np.random.default_rng(0)
    f = VectorField(rng.normal(size=(3, 12, 8)) + 1j * rng.normal(size=(3, 12, 8)), g)
    write_field(tmp_path / "f.bin", f)
    back = read_field(tmp_path / "f.bin")
    assert np.array_equal(back.values, f.values)
    assert np.allclose(back.grid.lower, g.lower) and np.allclose(back.grid.length, g.length)
    real = VectorField(rng.normal(size=(1, 12, 8)), g)
    write_field(tmp_path / "r.bin", real)
    assert np.array_equal(read_field(tmp_path / "r.bin").values.real, real.values)


def test_field_binary_rejects_corruption(tmp_path):
    g = UniformGrid.centered(1.0, 4, 1)
    write_field(tmp_path / "f.bin", VectorField(np.ones((1, 4), complex), g))
    data = (tmp_path / "f.bin").read_bytes()
    (tmp_path / "short.bin").write_bytes(data[:-8])
    (tmp_path / "magic.bin").write_bytes(b"X" + data[1:])
    for name in ("short.bin", "magic.bin"):
        with pytest.raises(ConfigError):
            read_field(tmp_path / name)


def test_csv_roundtrip(tmp_path):
    rows = [[0.1, 2.5e-9, 3], [0.2, -1.0, 4]]
    write_csv(tmp_path / "t.csv", ["a", "b", "c"], rows)
    header, back = read_csv(tmp_path / "t.csv")
    assert header == ["a", "b", "c"]
    assert np.allclose(np.array(back, dtype=float), rows, rtol=1e-15)


CARRIER_INI = """
[problem]
carriers = 4 @ -1/5, -2/5; 4 @ 1/5, 2/5   # two carriers
perturbation = 0.5 @ 2/5, 4/5
[dispersion]
window = -8, 8
"""


def test_config_roundtrip_and_defaults():
    cfg = RunConfig.from_text(CARRIER_INI)
    assert cfg["problem"]["carriers"][1][1][1].denominator == 5
    assert cfg["dispersion"]["window"] == (-8.0, 8.0)
    assert cfg["bloch"]["cutoff"] == 12
    assert RunConfig.from_text(cfg.to_text()) == cfg
    assert RunConfig.from_text(RunConfig.defaults().to_text()) == RunConfig.defaults()


@pytest.mark.parametrize("text", [
    "[problem]\nunknown = 1\n",
    "[nowhere]\nx = 1\n",
    "[bloch]\ncutoff = -2\n",
    "[dispersion]\nwindow = 3, 1\n",
    "[problem]\ncarriers = 4 -1/5, 2/5\n",
    "[problem]\ncarriers = 4 @ 1/5\n",
    "not a config",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        RunConfig.from_text(text)


@pytest.fixture(scope="module")
def model_file(tmp_path_factory, ex41_gamma):
    from gapsolitons.cme import symmetric_four_mode_model

    path = tmp_path_factory.mktemp("model") / "ex41.json"
    symmetric_four_mode_model(3, 1, 1, (0, 1), (1, 0), gamma=ex41_gamma).save(path)
    return path


def test_cli_bands(capsys):
    assert main(["bands", "--k=-0.2,-0.4", "--cutoff", "12", "--bands", "4"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    assert abs(float(lines[1].split(",")[-1]) - 0.9942) < 1e-3


def test_cli_gap_and_edge(tmp_path, model_file):
    assert main(["gap", "--model", str(model_file), "--window=-8,8", "--radius", "20",
                 "--out", str(tmp_path / "gap.txt")]) == 0
    assert "n_gaps = 1" in (tmp_path / "gap.txt").read_text()
    assert main(["moving-gap", "--model", str(model_file), "--window", "-8", "8", "--radius", "20",
                 "--velocity", "0.3,0.3", "--out", str(tmp_path / "mg.txt")]) == 0
    assert "n_gaps = 0" in (tmp_path / "mg.txt").read_text()
    assert main(["edge", "--model", str(model_file), "--band", "2", "--k0", "0,0",
                 "--out", str(tmp_path / "edge.json")]) == 0
    assert json.loads((tmp_path / "edge.json").read_text())["band"] == 2


def test_cli_exit_codes(tmp_path, model_file):
    assert main(["gap", "--model", str(tmp_path / "missing.json")]) == 2
    assert main(["gap", "--model", str(model_file), "--window=5,1"]) == 2
    # too small a box for the seed
    assert main(["nls-seed", "--model", str(model_file), "--band", "2", "--k0", "0,0",
                 "--half-width", "5", "--points", "32", "--out", str(tmp_path / "s.bin")]) == 4
    seed = VectorField(np.ones((4, 16, 16), complex), UniformGrid.centered(5.0, 16, 2))
    write_field(tmp_path / "flat.bin", seed)
    # Omega = -1 is the band edge, on the spectrum at K = 0
    assert main(["soliton", "--model", str(model_file), "--omega", "-1.0", "--seed-file",
                 str(tmp_path / "flat.bin"), "--out", str(tmp_path / "o.bin")]) == 3
    with pytest.raises(SystemExit):
        main(["bands", "--cutoff", "x"])


def test_cli_seed_soliton_continue(tmp_path, model_file):
    seed, sol, cont = (str(tmp_path / n) for n in ("seed.bin", "sol.bin", "cont.bin"))
    assert main(["nls-seed", "--model", str(model_file), "--band", "2", "--k0", "0,0",
                 "--epsilon", "0.1", "--out", seed]) == 0
    assert main(["soliton", "--model", str(model_file), "--omega", "-0.99", "--seed-file", seed,
                 "--out", sol]) == 0
    meta = dict(line.split(" = ") for line in (tmp_path / "sol.bin.txt").read_text().splitlines())
    assert float(meta["residual"]) < 1e-8
    assert main(["continue", "--model", str(model_file), "--from", sol, "--to", "-0.98",
                 "--branch", str(tmp_path / "branch.csv"), "--out", cont]) == 0
    header, rows = read_csv(tmp_path / "branch.csv")
    assert header[0] == "omega" and float(rows[-1][0]) == pytest.approx(-0.98)


def test_pipeline_and_restart(tmp_path, model_file):
    ini = tmp_path / "run.ini"
    ini.write_text(f"""
[problem]
epsilon = 0.1
[cme]
model_file = {model_file}
[dispersion]
window = -8, 8
radius = 20
[pipeline]
stages = cme, gap, edge, nls, soliton
output = {tmp_path / 'run'}
""")
    assert main(["pipeline", "--config", str(ini)]) == 0
    out = tmp_path / "run"
    manifest = (out / "manifest.txt").read_text()
    for name in ("gap.json", "edge.json", "seed.bin", "soliton.bin"):
        assert name in manifest
    sol = dict(line.split(" = ") for line in (out / "soliton.txt").read_text().splitlines())
    assert float(sol["residual"]) < 1e-8
    # re-running only the last stage reuses the earlier artifacts
    cfg = RunConfig.load(ini)
    cfg.values["pipeline"]["stages"] = ("soliton",)
    res = run_pipeline(cfg, out)
    assert "soliton.bin" in res.artifacts


def test_pipeline_bloch_stage_with_model_file(tmp_path, model_file):
    cfg = RunConfig.defaults()
    cfg.values["cme"]["model_file"] = str(model_file)
    cfg.values["pipeline"]["stages"] = ("bloch", "cme")
    res = run_pipeline(cfg, tmp_path / "run")
    assert "carriers.csv" not in res.artifacts
    assert res.model.n_modes == 4


def test_pipeline_missing_artifact(tmp_path, model_file):
    cfg = RunConfig.defaults()
    cfg.values["cme"]["model_file"] = str(model_file)
    cfg.values["pipeline"]["stages"] = ("edge",)
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, tmp_path / "empty")
    assert info.value.exit_code == 2 and "gap" in str(info.value)


def test_cli_dynamics(tmp_path, capsys):
    ini = tmp_path / "dyn.ini"
    ini.write_text("""
[problem]
carriers = 1 @ 1/10, 0
perturbation = 0.5 @ 1, 1
[dynamics]
cells = 20
epsilons = 0.3, 0.25, 0.2
t0 = 0.1
dt_gp = 0.005
dt_cme = 0.005
""")
    assert main(["evolve-gp", "--config", str(ini), "--epsilon", "0.3", "--t", "1.0",
                 "--out", str(tmp_path / "u.bin")]) == 0
    meta = dict(line.split(" = ") for line in capsys.readouterr().out.strip().splitlines())
    assert float(meta["mass_drift"]) < 1e-10
    assert read_field(tmp_path / "u.bin").values.shape == (1, 160, 160)
    assert main(["validate-scaling", "--config", str(ini), "--out", str(tmp_path / "s.csv")]) == 0
    header, rows = read_csv(tmp_path / "s.csv")
    assert len(rows) == 3 and all(float(r[header.index("initial_error")]) == 0 for r in rows)
