import os
import subprocess
import sys

import numpy as np
import pytest

from hardylab.cli import main
from hardylab.config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_alpha_list,
    parse_number,
    parse_number_list,
)
from hardylab.experiments import SCHEMAS, run_experiment


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


E4_CFG = """
[experiment]
scenario = E4-cancellation
seed = 7

[grid]
dim = 1
m = 2048
L = 4.0

[scenario]
operator = gaussian
p = 1
alphas = 0
r_ladder = 2^-2, 2^-3, 2^-4
tag = demo
"""


def test_parse_number_conveniences():
    assert parse_number("2^-3") == 0.125
    assert parse_number("2/3") == pytest.approx(2 / 3)
    assert parse_number("inf") == np.inf
    assert parse_number_list("1, 2^-1; 3") == [1.0, 0.5, 3.0]
    assert parse_alpha_list("0, 1") == [(0,), (1,)]
    assert parse_alpha_list("(1,0); (0,1)") == [(1, 0), (0, 1)]
    with pytest.raises(ConfigError):
        parse_number("abc")


def test_config_parser_line_numbers(tmp_path):
    path = write(tmp_path, "bad.cfg", "[experiment]\nscenario E4\n")
    with pytest.raises(ConfigError, match="bad.cfg:2"):
        load_config(path)
    path2 = write(tmp_path, "orphan.cfg", "key = 1\n")
    with pytest.raises(ConfigError, match="orphan.cfg:1"):
        load_config(path2)


def test_config_missing_scenario(tmp_path):
    path = write(tmp_path, "nos.cfg", "[experiment]\nseed = 1\n")
    with pytest.raises(ConfigError, match=r"missing required key 'scenario'"):
        ExperimentConfig.from_file(path)


def test_config_unknown_scenario(tmp_path):
    path = write(tmp_path, "unk.cfg", "[experiment]\nscenario = E9-nope\n")
    with pytest.raises(ConfigError, match="unknown scenario"):
        ExperimentConfig.from_file(path)


def test_ladder_validation(tmp_path):
    path = write(tmp_path, "l.cfg", E4_CFG.replace("2^-2, 2^-3, 2^-4", "2^-3, 2^-2"))
    cfg = ExperimentConfig.from_file(path, out_dir=str(tmp_path))
    with pytest.raises(ConfigError, match="strictly decreasing"):
        cfg.ladder()
    path2 = write(tmp_path, "l2.cfg", E4_CFG.replace("2^-2, 2^-3, 2^-4", "2, 0.5"))
    cfg2 = ExperimentConfig.from_file(path2, out_dir=str(tmp_path))
    with pytest.raises(ConfigError, match="r < 1"):
        cfg2.ladder()


def test_run_produces_schema_and_svg(tmp_path):
    path = write(tmp_path, "e4.cfg", E4_CFG)
    cfg = ExperimentConfig.from_file(path, out_dir=str(tmp_path / "out"))
    result = run_experiment(cfg)
    header = result.csv_path.read_text().splitlines()[0]
    assert header == ",".join(SCHEMAS["E4-cancellation"])
    assert result.csv_path.name == "demo.csv"
    svg = result.svg_paths[0].read_text()
    assert svg.startswith("<svg xmlns=")
    assert "href" not in svg  # self-contained
    meta = (tmp_path / "out" / "demo.meta.txt").read_text()
    assert "runtime_seconds=" in meta


def test_run_determinism(tmp_path):
    path = write(tmp_path, "e4.cfg", E4_CFG)
    outs = []
    for sub in ("a", "b"):
        cfg = ExperimentConfig.from_file(path, out_dir=str(tmp_path / sub), quiet=True)
        run_experiment(cfg)
        outs.append((tmp_path / sub / "demo.csv").read_bytes())
    assert outs[0] == outs[1]


def test_e5_rows(tmp_path):
    path = write(tmp_path, "e5.cfg", """
[experiment]
scenario = E5-duality
seed = 5
[grid]
m = 1024
[scenario]
n_instances = 3
trials = 120
mode = both
""")
    cfg = ExperimentConfig.from_file(path, out_dir=str(tmp_path / "out"), quiet=True)
    result = run_experiment(cfg)
    det = [r for r in result.rows if r[0] == "deterministic"]
    rnd = [r for r in result.rows if r[0] == "random"]
    assert len(det) == len(rnd) == 3
    assert all(r[6] <= 1e-9 for r in det)      # gap column
    assert all(r[7] >= 0.5 for r in rnd)       # Monte-Carlo lower bound


def test_e1_atom_profile_ratios_vanish(tmp_path):
    path = write(tmp_path, "e1a.cfg", """
[experiment]
scenario = E1-moment-decay
seed = 3
[grid]
m = 2048
[scenario]
p_values = 1
profiles = atom
r_ladder = 2^-2, 2^-3
""")
    cfg = ExperimentConfig.from_file(path, out_dir=str(tmp_path / "out"), quiet=True)
    rows = run_experiment(cfg).rows
    data = [r for r in rows if r[0] == "data"]
    assert data and all(r[8] <= 1e-6 for r in data)  # cancelling profiles


def test_e3_image_moment_ratios_bounded(tmp_path):
    # images of cancelling atoms under bounded convolution-type operators keep
    # normalized moments below a fixed constant across the ladder
    for op, params in (("gaussian", "width=0.01"), ("riesz", "")):
        path = write(tmp_path, f"e3-{op}.cfg", f"""
[experiment]
scenario = E3-atom-image
seed = 2
[grid]
m = 2048
[scenario]
operator = {op}
operator_params = {params}
r_ladder = 2^-2, 2^-4, 2^-6
n_seeds = 2
""")
        cfg = ExperimentConfig.from_file(path, out_dir=str(tmp_path / "out"), quiet=True)
        rows = run_experiment(cfg).rows
        assert all(np.isfinite(r[9]) and r[12] <= 10.0 for r in rows), op


def test_cli_psi_and_version(capsys):
    assert main(["psi", "1", "0", "0.5"]) == 0
    out = capsys.readouterr().out.strip()
    assert out == f"{1/np.log(3):.9g}"
    assert main(["version"]) == 0
    assert main(["psi", "1", "3", "0.5"]) == 2  # out of range -> config error


def test_cli_list_operators(capsys):
    assert main(["list-operators"]) == 0
    out = capsys.readouterr().out
    assert "riesz" in out and "pathological" in out


def test_cli_validate_atom(capsys):
    code = main(["validate-atom", "--p", "1", "--s", "2", "--r", "0.25", "--seed", "3",
                 "--grid-m", "1024"])
    assert code == 0
    assert "passed=True" in capsys.readouterr().out


def test_cli_run_and_exit_codes(tmp_path, capsys):
    cfg = write(tmp_path, "e4.cfg", E4_CFG)
    assert main(["run", cfg, "--out-dir", str(tmp_path / "o"), "--quiet"]) == 0
    assert (tmp_path / "o" / "demo.csv").exists()
    bad = write(tmp_path, "bad.cfg", "[experiment]\nseed = 1\n")
    assert main(["run", bad]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["no-such-command"]) == 2


def test_cli_env_out_dir(tmp_path, monkeypatch):
    cfg = write(tmp_path, "e4.cfg", E4_CFG)
    monkeypatch.setenv("HARDYLAB_OUT_DIR", str(tmp_path / "envout"))
    assert main(["run", cfg, "--quiet"]) == 0
    assert (tmp_path / "envout" / "demo.csv").exists()


def test_cli_numerical_failure_exit_code(tmp_path):
    # an atom ball below grid resolution trips the numerical gates
    cfg = write(tmp_path, "tiny.cfg", """
[experiment]
scenario = E3-atom-image
[grid]
m = 256
[scenario]
operator = identity
r_ladder = 2^-9
""")
    code = main(["run", cfg, "--quiet"])
    assert code == 3


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hardylab.cli", "psi", "1", "0", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.910239227"
