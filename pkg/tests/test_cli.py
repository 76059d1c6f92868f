import json
import math

import numpy as np
import pytest

from birkhoff.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, load_config, run
from birkhoff.errors import ConfigError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_bnf_harmonic_trivial(tmp_path):
    cfg = write(
        tmp_path,
        "c.toml",
        """
[hamiltonian]
family = "harmonic"
params = { omega = [1.0, 1.4142135623730951] }

[bnf]
m = 2
""",
    )
    code, paths = run("bnf", cfg, out=tmp_path / "out")
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "out" / "bnf.json").read_text())
    assert doc["result"]["omega"] == [1.0, 1.4142135623730951]
    inv2 = doc["result"]["invariants"][1]["coeffs"]
    assert inv2 == {}
    assert doc["result"]["remainder_terms"] == 0
    assert doc["version"]
    assert doc["config"]["command"] == "bnf"


def test_dioph_resonant_pair(tmp_path):
    cfg = write(
        tmp_path,
        "d.toml",
        """
[dioph]
omega = [1.0, 1.0]
tau = 1.0
K = 10
""",
    )
    code, _ = run("dioph", cfg, out=tmp_path)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "dioph.json").read_text())
    assert doc["result"]["gamma_K"] == 0.0
    assert doc["result"]["worst_k"] == [1, -1]


def test_sample_deterministic(tmp_path):
    cfg = write(tmp_path, "s.toml", "[sample]\nn = 2\nm = 3\nseed = 5\n")
    run("sample", cfg, out=tmp_path / "a")
    run("sample", cfg, out=tmp_path / "b")
    assert (tmp_path / "a" / "sample.json").read_bytes() == (
        tmp_path / "b" / "sample.json"
    ).read_bytes()


def test_unknown_key_rejected(tmp_path):
    cfg = write(tmp_path, "bad.toml", "[sample]\nn = 2\nm = 3\nbogus = 1\n")
    code, _ = run("sample", cfg, out=tmp_path)
    assert code == EXIT_CONFIG


def test_unknown_section_rejected(tmp_path):
    cfg = write(tmp_path, "bad.toml", "[sample]\nn = 2\nm = 3\n\n[extra]\nx = 1\n")
    code, _ = run("sample", cfg, out=tmp_path)
    assert code == EXIT_CONFIG


def test_missing_section_rejected(tmp_path):
    cfg = write(tmp_path, "bad.toml", "[bnf]\nm = 2\n")
    code, _ = run("bnf", cfg, out=tmp_path)
    assert code == EXIT_CONFIG


def test_resonance_exit_code(tmp_path):
    cfg = write(
        tmp_path,
        "r.toml",
        """
[hamiltonian]
n = 2
terms = '''
1 0 | 1 0 | 1.0 0.0
0 1 | 0 1 | 1.0 0.0
1 1 | 0 2 | 0.05 0.0
0 2 | 1 1 | 0.05 0.0
'''

[bnf]
m = 2
""",
    )
    code, _ = run("bnf", cfg, out=tmp_path)
    assert code == EXIT_NUMERICAL


def test_inline_hamiltonian_quartic(tmp_path):
    # I + 0.25 x^4 written in the canonical zeta text form
    cfg = write(
        tmp_path,
        "q.toml",
        """
[hamiltonian]
n = 1
terms = '''
1 | 1 | 1.0 0.0
4 | 0 | 0.0625 0.0
3 | 1 | 0.25 0.0
2 | 2 | 0.375 0.0
1 | 3 | 0.25 0.0
0 | 4 | 0.0625 0.0
'''

[bnf]
m = 2
""",
    )
    code, _ = run("bnf", cfg, out=tmp_path)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "bnf.json").read_text())
    assert doc["result"]["invariants"][1]["coeffs"]["2"] == pytest.approx(0.375)


def test_badvol_csv_columns(tmp_path):
    cfg = write(
        tmp_path,
        "v.toml",
        """
[badvol]
action = "cubic-1d"
rho = 1.0
eps = [0.001, 0.01]
samples = 200
grid = 51
""",
    )
    code, _ = run("badvol", cfg, out=tmp_path)
    assert code == EXIT_OK
    lines = (tmp_path / "badvol.csv").read_text().splitlines()
    assert lines[0] == "eps,rho,samples,bad_fraction,ci_low,ci_high"
    assert len(lines) == 3
    meta = json.loads((tmp_path / "badvol.csv.meta.json").read_text())
    assert meta["columns"][0] == "eps"
    assert meta["version"]


def test_drift_csv(tmp_path):
    cfg = write(
        tmp_path,
        "t.toml",
        """
[hamiltonian]
family = "quartic-1dof"

[drift]
rho = 0.1
dt = 0.01
t_max = 2.0
record_every = 10
""",
    )
    code, _ = run("drift", cfg, out=tmp_path)
    assert code == EXIT_OK
    lines = (tmp_path / "drift.csv").read_text().splitlines()
    assert lines[0] == "t,z0,z1,I1,H"
    assert len(lines) == 22  # header + 21 recorded rows


def test_scaling_deterministic_rerun(tmp_path):
    cfg = write(
        tmp_path,
        "sc.toml",
        """
[hamiltonian]
family = "resonant-coupled"
params = { eps = 0.1 }

[scaling]
rhos = [0.2, 0.1]
C = 1.05
t_max = 200.0
dt = 0.02
n_random = 2
seed = 3
""",
    )
    code, _ = run("scaling", cfg, out=tmp_path / "a")
    assert code == EXIT_OK
    run("scaling", cfg, out=tmp_path / "b")
    assert (tmp_path / "a" / "scaling.csv").read_bytes() == (
        tmp_path / "b" / "scaling.csv"
    ).read_bytes()
    fit = json.loads((tmp_path / "a" / "scaling_fit.json").read_text())
    assert fit["result"]["fit"]["n_uncensored"] >= 1
    lines = (tmp_path / "a" / "scaling.csv").read_text().splitlines()
    assert lines[0] == "rho,exit_time,censored,direction_id"


def test_scaling_worker_pool_matches_sequential(tmp_path):
    cfg = write(
        tmp_path,
        "sc.toml",
        """
[hamiltonian]
family = "resonant-coupled"
params = { eps = 0.1 }

[scaling]
rhos = [0.2]
C = 1.05
t_max = 100.0
dt = 0.02
n_random = 1
seed = 3
""",
    )
    run("scaling", cfg, out=tmp_path / "a", jobs=1)
    run("scaling", cfg, out=tmp_path / "b", jobs=2)
    assert (tmp_path / "a" / "scaling.csv").read_bytes() == (
        tmp_path / "b" / "scaling.csv"
    ).read_bytes()


def test_bnfmap_report(tmp_path):
    cfg = write(
        tmp_path,
        "bm.toml",
        """
[hamiltonian]
family = "convex-benchmark"
params = { eps = 0.05 }

[bnfmap]
m = 2
cases = 2
""",
    )
    code, _ = run("bnfmap", cfg, out=tmp_path)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "bnfmap.json").read_text())
    assert doc["result"]["jacobian_det"] == pytest.approx(1.0, abs=1e-5)
    assert doc["result"]["max_upper_entry"] < 1e-8
    for entry in doc["result"]["triangularity"]:
        assert entry["max_lower_change"] == 0.0


def test_rescale_report(tmp_path):
    cfg = write(
        tmp_path,
        "rs.toml",
        """
[hamiltonian]
family = "quartic-1dof"
params = { c = 0.25 }

[rescale]
m = 2
s_m = 0.5
""",
    )
    code, _ = run("rescale", cfg, out=tmp_path)
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "rescale.json").read_text())
    per = doc["result"]["per_degree"]
    assert per[0]["factor"] == 1.0
    assert per[1]["factor"] == 0.25
    assert per[1]["norm_after"] == pytest.approx(per[1]["norm_before"] * 0.25)


def test_rescale_radius_validation(tmp_path):
    cfg = write(
        tmp_path,
        "rs.toml",
        """
[hamiltonian]
family = "quartic-1dof"

[rescale]
m = 2
s_m = 1.5
""",
    )
    code, _ = run("rescale", cfg, out=tmp_path)
    assert code == EXIT_CONFIG


def test_family_params_validated(tmp_path):
    cfg = write(
        tmp_path,
        "f.toml",
        """
[hamiltonian]
family = "quartic-1dof"
params = { nope = 1.0 }

[bnf]
m = 2
""",
    )
    code, _ = run("bnf", cfg, out=tmp_path)
    assert code == EXIT_CONFIG


def test_hamiltonian_perturbed_by_sample_file(tmp_path):
    sample_cfg = write(tmp_path, "s.toml", "[sample]\nn = 2\nm = 2\nseed = 8\n")
    run("sample", sample_cfg, out=tmp_path)
    cfg = write(
        tmp_path,
        "b.toml",
        f"""
[hamiltonian]
family = "harmonic"
params = {{ omega = [1.0, 1.4142135623730951] }}
sample_file = "{tmp_path / 'sample.json'}"

[bnf]
m = 2
""",
    )
    code, _ = run("bnf", cfg, out=tmp_path / "out")
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "out" / "bnf.json").read_text())
    # the degree-1 brick part shifted the frequency
    assert doc["result"]["omega"] != [1.0, 1.4142135623730951]
    # with no cubic part, B2 equals the sampled degree-2 part
    sample_doc = json.loads((tmp_path / "sample.json").read_text())["result"]
    b2 = doc["result"]["invariants"][1]["coeffs"]
    assert set(b2) == set(sample_doc["parts"][1]["coeffs"])
    for key, val in sample_doc["parts"][1]["coeffs"].items():
        assert b2[key] == pytest.approx(val, rel=1e-9)


def test_hamiltonian_perturbed_by_seed(tmp_path):
    cfg = write(
        tmp_path,
        "b.toml",
        """
[hamiltonian]
family = "harmonic"
params = { omega = [1.0, 1.4142135623730951] }
perturb_seed = 8
perturb_m = 2

[bnf]
m = 2
""",
    )
    code, _ = run("bnf", cfg, out=tmp_path)
    assert code == EXIT_OK


def test_load_config_unknown_command():
    with pytest.raises(ConfigError):
        load_config("frobnicate", "whatever.toml")


def test_missing_config_file(tmp_path):
    code, _ = run("bnf", str(tmp_path / "absent.toml"), out=tmp_path)
    assert code == EXIT_CONFIG
