import json

import pytest

import bsde_lab as bl
from bsde_lab.cli import ConfigError, main, parse_config, run


def _config(tmp_path, **overrides):
    doc = {
        "paths": {"M": 1024, "N": 10, "d": 1, "T": 1.0, "seed": 3},
        "generator": {"family": "zero", "k": 1},
        "terminal": {"kind": "constant", "params": {"value": 1.0}},
        "output_dir": str(tmp_path / "out"),
    }
    doc.update(overrides)
    return doc


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


# ------------------------------------------------------------------- parsing

def test_minimal_config_fills_defaults():
    cfg = parse_config(json.dumps({
        "generator": {"family": "zero", "k": 1},
        "terminal": {"kind": "constant", "params": {"value": 1.0}},
        "paths": {"T": 1.0},
    }))
    assert cfg.paths.M == 16384
    assert cfg.paths.N == 50
    assert cfg.solver.basis_degree == 3
    assert cfg.solver.p == 2.0
    assert cfg.solver.picard_tol == 1e-4
    assert cfg.solver.picard_max_iter == 25
    assert cfg.constants.k_prime_p == 2.0
    assert cfg.constants.k_doubleprime_p == 2.0


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="stepz"):
        parse_config(json.dumps({
            "generator": {"family": "zero"},
            "paths": {"stepz": 3},
        }))


def test_missing_generator():
    with pytest.raises(ConfigError, match="generator required"):
        parse_config(json.dumps({"paths": {"M": 16}}))


def test_type_mismatch_names_field():
    with pytest.raises(ConfigError, match="paths.M"):
        parse_config(json.dumps({
            "generator": {"family": "zero"},
            "paths": {"M": "many"},
        }))


def test_p_must_exceed_one():
    with pytest.raises(ConfigError):
        parse_config(json.dumps({
            "generator": {"family": "zero"},
            "solver": {"p": 1.0},
        }))


def test_generator_d_must_match_paths():
    with pytest.raises(ConfigError, match="generator.d"):
        parse_config(json.dumps({
            "generator": {"family": "zero", "d": 2},
            "paths": {"d": 1},
        }))


def test_modulus_block_families():
    cfg = parse_config(json.dumps({
        "generator": {"family": "zero"},
        "modulus": {"family": "example1h", "params": {"p": 2.0},
                    "domain_cap": 5.0},
    }))
    assert cfg.modulus.family == "example1h"
    assert cfg.modulus.domain_cap == 5.0
    cfg = parse_config(json.dumps({
        "generator": {"family": "zero"},
        "modulus": {"family": "tabulated",
                    "params": {"breakpoints": [[0.0, 0.0], [1.0, 1.0]]}},
    }))
    assert cfg.modulus.breakpoints == ((0.0, 0.0), (1.0, 1.0))


def test_envelope_block():
    cfg = parse_config(json.dumps({
        "generator": {"family": "example1", "params": {"p": 2.0}},
        "envelope": {
            "psi": {"family": "linear", "params": {"mu": 1.0},
                    "domain_cap": 25.0},
            "lambda": 1.0,
            "f": {"kind": "abs_brownian_coordinate", "params": {"index": 0}},
        },
    }))
    assert cfg.envelope.lam == 1.0
    assert cfg.envelope.f.kind == "abs_brownian_coordinate"
    assert cfg.envelope.phi.kind == "zero"


def test_init_and_split_forms():
    cfg = parse_config(json.dumps({
        "generator": {"family": "zero"},
        "solver": {"init": {"constant": 1.5}, "split": {"T1": 0.5}},
    }))
    assert cfg.solver.init == 1.5
    assert cfg.solver.split == 0.5
    cfg = parse_config(json.dumps({
        "generator": {"family": "zero"},
        "solver": {"init": "zero", "split": "auto"},
    }))
    assert cfg.solver.init is None
    assert cfg.solver.split == "auto"


# ------------------------------------------------------------- subcommands

def test_solve_writes_report_and_solution(tmp_path):
    cfg = parse_config(json.dumps(_config(tmp_path)))
    assert run("solve", cfg) == 0
    report = (tmp_path / "out" / "picard_report.csv").read_text().splitlines()
    assert report[0] == "iter,dist_y,dist_z,sp_norm,converged"
    assert report[1].startswith("1,0,0,") and report[1].endswith("true")
    assert (tmp_path / "out" / "solution.csv").exists()


def test_constants_csv_values(tmp_path):
    cfg = parse_config(json.dumps(_config(
        tmp_path, paths={"M": 256, "N": 5, "d": 1, "T": 1.0, "seed": 3})))
    assert run("constants", cfg) == 0
    rows = dict(line.split(",") for line in
                (tmp_path / "out" / "constants.csv").read_text()
                .splitlines()[1:])
    assert float(rows["c_p"]) == 1.0
    assert float(rows["c_lambda_p_T"]) == 256.0
    assert float(rows["lam"]) == 0.0


def test_check_example1_passes(tmp_path):
    doc = _config(tmp_path,
                  paths={"M": 2048, "N": 20, "d": 1, "T": 1.0, "seed": 7},
                  generator={"family": "example1", "params": {"p": 2.0},
                             "k": 1})
    del doc["terminal"]
    cfg = parse_config(json.dumps(doc))
    assert run("check", cfg) == 0
    report = (tmp_path / "out" / "check_report.csv").read_text().splitlines()
    assert report[0] == "check,passed,value,detail"
    names = [line.split(",")[0] for line in report[1:]]
    assert names == ["shape_rho", "osgood_rho", "h1", "h2_lipschitz_z", "h3",
                     "envelope"]
    assert all(line.split(",")[1] == "true" for line in report[1:])


def test_check_failure_exits_one(tmp_path):
    doc = _config(tmp_path,
                  paths={"M": 512, "N": 10, "d": 1, "T": 1.0, "seed": 7},
                  generator={"family": "example1", "params": {"p": 2.0},
                             "k": 1},
                  modulus={"family": "linear", "params": {"mu": 1e-6},
                           "domain_cap": 100.0})
    del doc["terminal"]
    cfg = parse_config(json.dumps(doc))
    assert run("check", cfg) == 1


def test_oracle_compare(tmp_path):
    doc = _config(tmp_path,
                  terminal={"kind": "coordinate", "params": {"j": 0}})
    cfg = parse_config(json.dumps(doc))
    assert run("oracle-compare", cfg) == 0
    lines = (tmp_path / "out" / "oracle_errors.csv").read_text().splitlines()
    assert lines[0] == "sp_error,z_rms_error,iters,converged"
    sp_error = float(lines[1].split(",")[0])
    assert sp_error < 0.5


def test_oracle_compare_rejects_unmatched(tmp_path):
    doc = _config(tmp_path,
                  generator={"family": "example1", "params": {"p": 2.0},
                             "k": 1},
                  terminal={"kind": "coordinate", "params": {"j": 0}})
    cfg = parse_config(json.dumps(doc))
    with pytest.raises(ConfigError):
        run("oracle-compare", cfg)


def test_gen_paths_and_reuse(tmp_path):
    doc = _config(tmp_path)
    doc["paths"]["paths_file"] = str(tmp_path / "paths.bsde")
    cfg = parse_config(json.dumps(doc))
    assert run("gen-paths", cfg) == 0
    ens = bl.load_ensemble(tmp_path / "paths.bsde")
    assert ens.M == 1024 and ens.grid.N == 10
    # solve reuses the stored file
    assert run("solve", cfg) == 0


def test_bihari_subcommand(tmp_path):
    doc = _config(tmp_path,
                  modulus={"family": "linear", "params": {"mu": 1.0},
                           "domain_cap": 2.0},
                  bihari={"M_bound": 1.0, "T1": 0.0, "n_max": 4,
                          "quad_steps": 512})
    cfg = parse_config(json.dumps(doc))
    assert run("bihari", cfg) == 0
    lines = (tmp_path / "out" / "bihari.csv").read_text().splitlines()
    assert lines[0] == "t,phi_0,phi_1,phi_2,phi_3,phi_4"
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == 0.0
    assert first[1] == pytest.approx(1.0, rel=1e-12)
    assert first[2] == pytest.approx(0.5, rel=1e-3)


def test_convergence_study(tmp_path):
    doc = _config(tmp_path,
                  terminal={"kind": "coordinate", "params": {"j": 0}},
                  study={"M_values": [256, 512], "N_values": [5]})
    cfg = parse_config(json.dumps(doc))
    assert run("convergence-study", cfg) == 0
    lines = (tmp_path / "out" / "convergence.csv").read_text().splitlines()
    assert lines[0] == "M,N,sp_error,z_rms_error,iters"
    assert len(lines) == 3
    assert lines[1].startswith("256,5,")


def test_rerun_byte_identical(tmp_path):
    doc = _config(tmp_path, solver={"deterministic_reduction": True},
                  terminal={"kind": "coordinate", "params": {"j": 0}})
    cfg = parse_config(json.dumps(doc))
    run("solve", cfg)
    first = (tmp_path / "out" / "solution.csv").read_bytes()
    run("solve", cfg)
    assert (tmp_path / "out" / "solution.csv").read_bytes() == first


# ------------------------------------------------------------------ main()

def test_main_exit_codes(tmp_path):
    path = _write(tmp_path, _config(tmp_path))
    assert main(["solve", str(path)]) == 0
    bad = _write(tmp_path, {"generator": {"family": "zero"},
                            "paths": {"stepz": 1}}, "bad.json")
    assert main(["check", str(bad)]) == 2
    assert main(["check", str(tmp_path / "missing.json")]) == 2


def test_main_output_dir_override(tmp_path):
    path = _write(tmp_path, _config(tmp_path))
    out = tmp_path / "elsewhere"
    assert main(["solve", str(path), "--output-dir", str(out)]) == 0
    assert (out / "picard_report.csv").exists()


def test_main_paths_file_flag(tmp_path):
    ens = bl.generate_ensemble(128, 5, 1, 1.0, seed=9)
    stored = tmp_path / "stored.bsde"
    bl.save_ensemble(ens, stored)
    path = _write(tmp_path, _config(tmp_path))
    assert main(["solve", str(path), "--paths-file", str(stored)]) == 0
    lines = (tmp_path / "out" / "solution.csv").read_text().splitlines()
    assert len(lines) == 128 * 6 + 1
