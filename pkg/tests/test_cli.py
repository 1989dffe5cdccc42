"""End-to-end command line checks driven through click's test runner."""
import json

import numpy as np
import pytest
from click.testing import CliRunner

from blauspace import estimate_prevalence_ratio
from blauspace.cli import main
from blauspace.io import (
    dump_config,
    read_chain,
    read_matrix_csv,
    read_records,
    read_separation_binary,
    read_vector_csv,
    write_attribute_table,
    write_matrix_csv,
    write_nominations,
    write_separation_binary,
)

COMMANDS = ["simulate", "fit", "segregation", "embed", "coverage", "geo-sample"]


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def _run(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture(scope="module")
def sim_dir(runner, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "sim"
    _run(
        runner,
        ["simulate", "-o", str(out), "--n", "80", "--egos", "20",
         "--theta", "-2,-1,-0.5", "--seed", "5"],
    )
    return out


@pytest.fixture(scope="module")
def fit_dir(runner, sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "fit"
    _run(
        runner,
        ["fit", "--records", str(sim_dir / "records.csv"), "-o", str(out),
         "--mcmc", "--draws", "150", "--burn-in", "30", "--seed", "11"],
    )
    return out


def test_help_everywhere(runner):
    assert runner.invoke(main, ["--help"]).exit_code == 0
    for name in COMMANDS:
        result = runner.invoke(main, [name, "--help"])
        assert result.exit_code == 0, name
    assert runner.invoke(main, ["--version"]).exit_code == 0


def test_simulate_outputs(sim_dir):
    for name in ["attributes.csv", "edges.csv", "records.csv", "truth.csv",
                 "standardization.csv", "config.yaml", "network.png",
                 "manifest.json"]:
        assert (sim_dir / name).exists(), name
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["n_records"] > 0
    assert manifest["mean_degree"] > 0
    # the fixed truth is recorded exactly as requested
    _, truth = read_vector_csv(sim_dir / "truth.csv")
    np.testing.assert_array_equal(truth, [-2.0, -1.0, -0.5])


def test_simulate_deterministic(runner, sim_dir, tmp_path):
    again = tmp_path / "again"
    _run(
        runner,
        ["simulate", "-o", str(again), "--n", "80", "--egos", "20",
         "--theta", "-2,-1,-0.5", "--seed", "5"],
    )
    for name in ["attributes.csv", "edges.csv", "records.csv", "truth.csv",
                 "standardization.csv", "config.yaml"]:
        assert (sim_dir / name).read_bytes() == (again / name).read_bytes(), name


def test_fit_records_mode(runner, sim_dir, tmp_path):
    out = tmp_path / "fit"
    _run(runner, ["fit", "--records", str(sim_dir / "records.csv"), "-o", str(out)])
    names, est = read_vector_csv(out / "map.csv")
    assert names == ["bias", "x1_distance", "x2_distance"]
    hess_ids, H = read_matrix_csv(out / "hessian.csv")
    assert hess_ids == names
    np.testing.assert_allclose(H, H.T)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["r0"] == manifest["r1"] == 1.0
    assert manifest["grad_norm"] <= 1e-6
    assert not (out / "chain.csv").exists()


def test_fit_prevalence_from_population(runner, sim_dir, tmp_path):
    out = tmp_path / "fit"
    _run(
        runner,
        ["fit", "--records", str(sim_dir / "records.csv"), "-o", str(out),
         "--population-size", "80", "--mean-degree", "2.0"],
    )
    manifest = json.loads((out / "manifest.json").read_text())
    _, records = read_records(sim_dir / "records.csv")
    r = estimate_prevalence_ratio(records, 80, 2.0)
    assert manifest["r0"] == pytest.approx(r.r0, rel=1e-12)
    assert manifest["r1"] == pytest.approx(r.r1, rel=1e-12)


def test_fit_mcmc_deterministic(runner, sim_dir, fit_dir, tmp_path):
    names, chain = read_chain(fit_dir / "chain.csv")
    assert chain.shape == (150, 3)
    assert (fit_dir / "trace.png").exists()
    manifest = json.loads((fit_dir / "manifest.json").read_text())
    assert 0.0 < manifest["acceptance_rate"] <= 1.0
    again = tmp_path / "again"
    _run(
        runner,
        ["fit", "--records", str(sim_dir / "records.csv"), "-o", str(again),
         "--mcmc", "--draws", "150", "--burn-in", "30", "--seed", "11"],
    )
    assert (fit_dir / "chain.csv").read_bytes() == (again / "chain.csv").read_bytes()


def test_fit_input_mode_conflicts(runner, sim_dir, tmp_path):
    records = str(sim_dir / "records.csv")
    attrs = str(sim_dir / "attributes.csv")
    out = str(tmp_path / "x")
    assert runner.invoke(main, ["fit", "-o", out]).exit_code == 2
    assert runner.invoke(
        main, ["fit", "--records", records, "--attributes", attrs, "-o", out]
    ).exit_code == 2
    assert runner.invoke(
        main, ["fit", "--attributes", attrs, "-o", out]
    ).exit_code == 2
    assert runner.invoke(
        main, ["fit", "--records", records, "--r0", "0.5", "-o", out]
    ).exit_code == 2
    assert runner.invoke(
        main, ["fit", "--records", records, "--population-size", "100", "-o", out]
    ).exit_code == 2
    assert runner.invoke(
        main,
        ["fit", "--records", records, "--r0", "0.5", "--r1", "2.0",
         "--population-size", "100", "--mean-degree", "2.0", "-o", out],
    ).exit_code == 2


def test_fit_survey_mode(runner, tmp_path, toy_table, toy_config):
    attrs = tmp_path / "attributes.csv"
    config = tmp_path / "config.yaml"
    noms = tmp_path / "nominations.csv"
    write_attribute_table(attrs, toy_table)
    dump_config(config, toy_config, {"pairs": 2000, "seed": 1})
    rng = np.random.default_rng(0)
    ids = list(toy_table.ids)
    pairs = []
    for _ in range(40):
        i, j = rng.choice(len(ids), size=2, replace=False)
        pairs.append((ids[i], ids[j]))
    pairs.append(("p0", "nobody"))  # unknown alter: skipped, not fatal
    pairs.append(("p3", "p3"))  # self-nomination: skipped too
    write_nominations(noms, pairs)
    out = tmp_path / "fit"
    _run(
        runner,
        ["fit", "--attributes", str(attrs), "--nominations", str(noms),
         "--config", str(config), "-o", str(out), "--seed", "2"],
    )
    assert (out / "records.csv").exists()
    assert (out / "standardization.csv").exists()
    names, records = read_records(out / "records.csv")
    assert names == list(toy_config.names)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["skipped_nominations"] == 2
    assert manifest["std_pairs"] == 2000
    n_pos = sum(r.edge for r in records)
    assert manifest["n_positive"] == n_pos
    assert len(records) - n_pos == round(3.0 * n_pos)


@pytest.fixture(scope="module")
def seg_dir(runner, sim_dir, fit_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "seg"
    _run(
        runner,
        ["segregation", "--attributes", str(sim_dir / "attributes.csv"),
         "--config", str(sim_dir / "config.yaml"), "--fit", str(fit_dir),
         "--stat", "separation", "--format", "both", "-o", str(out)],
    )
    return out


def test_segregation_csv_binary_agree(seg_dir):
    ids_a, csv_m = read_matrix_csv(seg_dir / "separation.csv")
    ids_b, bin_m = read_separation_binary(seg_dir / "separation.bin")
    assert ids_a == ids_b
    np.testing.assert_array_equal(csv_m, bin_m)
    np.testing.assert_allclose(csv_m, csv_m.T, atol=1e-12)


def test_segregation_isolation_and_strain(runner, sim_dir, fit_dir, tmp_path):
    iso_out = tmp_path / "iso"
    _run(
        runner,
        ["segregation", "--attributes", str(sim_dir / "attributes.csv"),
         "--config", str(sim_dir / "config.yaml"), "--fit", str(fit_dir),
         "--stat", "isolation", "-o", str(iso_out)],
    )
    assert (iso_out / "isolation.csv").exists()
    strain_out = tmp_path / "strain"
    _run(
        runner,
        ["segregation", "--attributes", str(sim_dir / "attributes.csv"),
         "--config", str(sim_dir / "config.yaml"), "--fit", str(fit_dir),
         "--stat", "strain", "--use", "median",
         "--posterior-quantiles", "0.1,0.9", "-o", str(strain_out)],
    )
    names, values = read_vector_csv(strain_out / "strain.csv")
    assert names[-1] == "TOTAL"
    text = (strain_out / "strain.csv").read_text().splitlines()[0]
    assert text == "feature,contribution,lower,upper"


def test_segregation_exclude_feature(runner, sim_dir, fit_dir, tmp_path, seg_dir):
    out = tmp_path / "seg"
    _run(
        runner,
        ["segregation", "--attributes", str(sim_dir / "attributes.csv"),
         "--config", str(sim_dir / "config.yaml"), "--fit", str(fit_dir),
         "--exclude-feature", "x2_distance", "--format", "csv", "-o", str(out)],
    )
    _, full = read_matrix_csv(seg_dir / "separation.csv")
    _, part = read_matrix_csv(out / "separation.csv")
    assert not np.allclose(full, part)
    # excluding the bias is meaningless and refused
    bad = runner.invoke(
        main,
        ["segregation", "--attributes", str(sim_dir / "attributes.csv"),
         "--config", str(sim_dir / "config.yaml"), "--fit", str(fit_dir),
         "--exclude-feature", "bias", "-o", str(tmp_path / "bad")],
    )
    assert bad.exit_code == 2


def test_segregation_theta_without_chain(runner, sim_dir, tmp_path):
    base = ["segregation", "--attributes", str(sim_dir / "attributes.csv"),
            "--config", str(sim_dir / "config.yaml"), "--theta", "-2,-1,-0.5"]
    out = tmp_path / "seg"
    _run(runner, base + ["-o", str(out), "--format", "csv"])
    assert (out / "separation.csv").exists()
    # interval requests need a sampled chain
    assert runner.invoke(
        main,
        base + ["--stat", "strain", "--posterior-quantiles", "0.1,0.9",
                "-o", str(tmp_path / "q")],
    ).exit_code == 2


def test_use_median_needs_a_chain(runner, sim_dir, fit_dir, tmp_path):
    bare = tmp_path / "bare_fit"
    bare.mkdir()
    (bare / "map.csv").write_bytes((fit_dir / "map.csv").read_bytes())
    result = runner.invoke(
        main,
        ["segregation", "--attributes", str(sim_dir / "attributes.csv"),
         "--config", str(sim_dir / "config.yaml"), "--fit", str(bare),
         "--use", "median", "-o", str(tmp_path / "m")],
    )
    assert result.exit_code == 2
    assert "chain" in result.output


def _planted_matrix(tmp_path, n=12, seed=6):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2))
    D = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
    ids = [f"p{i}" for i in range(n)]
    path = tmp_path / "matrix.csv"
    write_matrix_csv(path, ids, D)
    return path, ids, D


def test_embed_recovers_distances(runner, tmp_path):
    path, ids, D = _planted_matrix(tmp_path)
    out = tmp_path / "embed"
    _run(runner, ["embed", "--matrix", str(path), "-o", str(out)])
    with open(out / "embedding.csv") as fh:
        header = fh.readline().strip().split(",")
        assert header == ["id", "dim1", "dim2"]
        rows = [line.strip().split(",") for line in fh]
    assert [r[0] for r in rows] == ids
    coords = np.array([[float(v) for v in r[1:]] for r in rows])
    got = np.sqrt(((coords[:, None] - coords[None, :]) ** 2).sum(-1))
    np.testing.assert_allclose(got, D, atol=1e-8)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stress"] < 1e-10
    assert manifest["n_negative_eigenvalues"] == 0


def test_embed_binary_input_identical(runner, tmp_path):
    path, ids, D = _planted_matrix(tmp_path)
    bin_path = tmp_path / "matrix.bin"
    write_separation_binary(bin_path, ids, D)
    a, b = tmp_path / "a", tmp_path / "b"
    _run(runner, ["embed", "--matrix", str(path), "-o", str(a), "--no-figures"])
    _run(runner, ["embed", "--matrix", str(bin_path), "-o", str(b), "--no-figures"])
    assert (a / "embedding.csv").read_bytes() == (b / "embedding.csv").read_bytes()
    assert not list(a.glob("*.png"))


def test_embed_surface_and_profile(runner, tmp_path):
    path, ids, D = _planted_matrix(tmp_path)
    values = tmp_path / "values.csv"
    with open(values, "w") as fh:
        fh.write("id,value\n")
        for k, ident in enumerate(ids):
            fh.write(f"{ident},{float(k)}\n")
    out = tmp_path / "embed"
    _run(
        runner,
        ["embed", "--matrix", str(path), "--values", str(values),
         "--grid-size", "8", "--profile", "-o", str(out)],
    )
    surface = (out / "surface.csv").read_text().splitlines()
    assert surface[0] == "x,y,value"
    assert len(surface) == 1 + 64
    profile = (out / "profile.csv").read_text().splitlines()
    assert profile[0] == "position,mean,sd"
    assert len(profile) == 1 + 100
    for name in ["surface.png", "profile.png", "embedding.png"]:
        assert (out / name).exists()


def test_embed_value_errors(runner, tmp_path):
    path, ids, _ = _planted_matrix(tmp_path)
    short = tmp_path / "short.csv"
    short.write_text("id,value\np0,1.0\n")
    assert runner.invoke(
        main,
        ["embed", "--matrix", str(path), "--values", str(short),
         "-o", str(tmp_path / "x")],
    ).exit_code == 2
    assert runner.invoke(
        main,
        ["embed", "--matrix", str(path), "--grid-size", "8",
         "-o", str(tmp_path / "y")],
    ).exit_code == 2


def test_embed_asymmetric_matrix_is_numeric_error(runner, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,a,b\na,0.0,1.0\nb,2.0,0.0\n")
    result = runner.invoke(main, ["embed", "--matrix", str(path), "-o", str(tmp_path / "x")])
    assert result.exit_code == 3


def test_outdir_collision_is_io_error(runner, tmp_path, sim_dir):
    blocker = tmp_path / "blocked"
    blocker.write_text("in the way\n")
    result = runner.invoke(
        main, ["fit", "--records", str(sim_dir / "records.csv"), "-o", str(blocker)]
    )
    assert result.exit_code == 4


def test_no_figures_leaves_no_images(runner, sim_dir, fit_dir, tmp_path):
    out = tmp_path / "seg"
    _run(
        runner,
        ["segregation", "--attributes", str(sim_dir / "attributes.csv"),
         "--config", str(sim_dir / "config.yaml"), "--fit", str(fit_dir),
         "--format", "csv", "--no-figures", "-o", str(out)],
    )
    assert not list(out.glob("*.png"))


def test_coverage_cli(runner, tmp_path):
    out = tmp_path / "cov"
    _run(
        runner,
        ["coverage", "--replications", "2", "--n", "150", "--egos", "30",
         "--alpha-grid", "0.5,0.9", "--seed", "1", "-o", str(out)],
    )
    lines = (out / "coverage.csv").read_text().splitlines()
    assert lines[0] == "alpha,coverage,se"
    assert len(lines) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["n_effective"] + manifest["failures"] == 2
    assert (out / "coverage.png").exists()


def test_geo_sample_cli(runner, tmp_path):
    regions = tmp_path / "regions.txt"
    regions.write_text(
        "north 900 0,0 1,0 1,1 0,1\n"
        "south 100 0,0 1,0 1,1\n"
    )
    out = tmp_path / "geo"
    _run(
        runner,
        ["geo-sample", "--regions", str(regions), "-n", "60", "--pairs", "25",
         "--bins", "1,5", "--seed", "7", "-o", str(out)],
    )
    locations = (out / "locations.csv").read_text().splitlines()
    assert locations[0] == "id,region_id,x,y"
    assert len(locations) == 61
    levels = (out / "distance_levels.csv").read_text().splitlines()
    assert levels[0] == "pair,level"
    assert len(levels) == 26
    assert all(line.split(",")[1] in {"1", "2", "3"} for line in levels[1:])
    manifest = json.loads((out / "manifest.json").read_text())
    assert 0 < manifest["acceptance_rate"] <= 1.0
    assert manifest["total_population"] == 1000.0
    assert (out / "regions.png").exists()
    # same seed, same draw
    again = tmp_path / "again"
    _run(
        runner,
        ["geo-sample", "--regions", str(regions), "-n", "60", "--pairs", "25",
         "--bins", "1,5", "--seed", "7", "-o", str(again)],
    )
    assert (out / "locations.csv").read_bytes() == (again / "locations.csv").read_bytes()
