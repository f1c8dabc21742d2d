import csv
import json
import math

import numpy as np
import pytest

from hspr import (
    ConfigurationError,
    CubeFile,
    CubeFormatError,
    DelayLineConfig,
    InterferogramStack,
    InvalidArgumentError,
    read_cube,
    write_cube,
)
from hspr.cli import main
from hspr.config import load_config
from hspr.pipeline import (
    MANIFEST,
    run_evaluate,
    run_render,
    run_retrieve,
    run_simulate,
    run_spectra,
    run_study,
    simulate,
)

from .helpers import relative_rms


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def read_manifest(out):
    return json.loads((out / MANIFEST).read_text())


def tree_bytes(root):
    return {
        str(path.relative_to(root)): path.read_bytes()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


def run_chain(config, out):
    sim = run_simulate(config, out / "sim")
    run_spectra(sim["noisy"], config, out / "spectra")
    run_retrieve(
        out / "spectra" / "spectra.cube", config, out / "retrieve", sim["truth"]
    )
    run_render(out / "retrieve" / "objects.cube", config, out / "render")
    run_evaluate(
        out / "retrieve" / "objects.cube", sim["truth"], config, out / "eval"
    )


def test_simulate(tmp_path, small_config):
    outputs = run_simulate(small_config, tmp_path)
    truth = read_cube(outputs["truth"])
    assert truth.kind == "field"
    assert truth.data.shape == (32, 32, 10)
    noisy = read_cube(outputs["noisy"])
    assert noisy.kind == "stack"
    assert noisy.data.shape == (32, 32, 400)
    assert noisy.delay().n_steps == 400

    manifest = read_manifest(tmp_path)
    assert manifest["stage"] == "simulate"
    assert manifest["seed"] == 0
    assert manifest["outputs"] == ["clean.cube", "noisy.cube", "truth.cube"]
    assert manifest["config"]["frame"]["rows"] == 32


def test_zero_noise_observations_are_clean(tmp_path, small_overrides):
    small_overrides["noise_sigma"] = 0
    outputs = run_simulate(load_config(overrides=small_overrides), tmp_path)
    assert outputs["noisy"].read_bytes() == outputs["clean"].read_bytes()


def test_spectra_recover_the_sensor(tmp_path, small_overrides):
    small_overrides["noise_sigma"] = 0
    config = load_config(overrides=small_overrides)
    outputs = run_simulate(config, tmp_path / "sim")
    spectra = run_spectra(outputs["clean"], config, tmp_path / "spectra")

    expected = np.abs(simulate(config).sensor.data)
    assert relative_rms(spectra.amplitudes, expected) < 1e-10
    rows = read_rows(tmp_path / "spectra" / "spectra.csv")
    assert rows[0] == ["wavelength_nm", "bin", "max_intensity", "psnr_db"]
    assert len(rows) == 11
    assert rows[1][3] == ""
    assert not (tmp_path / "spectra" / "psnr.csv").exists()
    assert read_manifest(tmp_path / "spectra")["inputs"] == ["clean.cube"]


def test_spectra_report_psnr(tmp_path, small_config):
    outputs = run_simulate(small_config, tmp_path / "sim")
    run_spectra(outputs["noisy"], small_config, tmp_path / "spectra")
    rows = dict(read_rows(tmp_path / "spectra" / "psnr.csv")[1:])
    gap = float(rows["observation"]) - float(rows["aggregate"])
    assert gap == pytest.approx(5 * math.log10(400))


def test_spectra_of_a_dark_stack(tmp_path, small_config):
    stack = InterferogramStack(
        np.zeros((32, 32, 400)), DelayLineConfig(100e-9, 400), 3.45e-6
    )
    path = tmp_path / "dark.cube"
    write_cube(path, CubeFile.from_stack(stack))
    out = tmp_path / "spectra"
    spectra = run_spectra(path, small_config, out)
    np.testing.assert_array_equal(spectra.amplitudes, 0.0)

    rows = dict(read_rows(out / "psnr.csv")[1:])
    assert float(rows["observation"]) == -math.inf
    assert float(rows["aggregate"]) == -math.inf
    assert float(read_rows(out / "spectra.csv")[1][3]) == -math.inf
    assert read_manifest(out)["outputs"] == [
        "psnr.csv",
        "spectra.csv",
        "spectra.cube",
    ]


def test_full_chain_is_deterministic(tmp_path, small_config):
    run_chain(small_config, tmp_path / "a")
    run_chain(small_config, tmp_path / "b")
    first = tree_bytes(tmp_path / "a")
    second = tree_bytes(tmp_path / "b")
    assert sorted(first) == sorted(second)
    assert first == second
    assert "render/slice_001_phase.pgm" in first


def test_retrieve_outputs(tmp_path, small_config):
    sim = run_simulate(small_config, tmp_path / "sim")
    run_spectra(sim["noisy"], small_config, tmp_path / "spectra")
    out = tmp_path / "retrieve"
    result = run_retrieve(
        tmp_path / "spectra" / "spectra.cube", small_config, out, sim["truth"]
    )
    assert result.iterations_run == 2
    assert len(read_rows(out / "convergence.csv")) == 3
    rrmse_rows = read_rows(out / "rrmse.csv")
    assert rrmse_rows[0] == ["iteration", "wavelength_nm", "rrmse"]
    assert len(rrmse_rows) == 1 + 2 * 4
    assert read_cube(out / "objects.cube").data.shape == (32, 32, 4)
    assert read_cube(out / "baseline.cube").data.shape == (32, 32, 4)
    assert read_manifest(out)["inputs"] == ["spectra.cube", "truth.cube"]

    # without a truth there is no RRMSE table
    run_retrieve(tmp_path / "spectra" / "spectra.cube", small_config, out)
    assert "rrmse.csv" not in read_manifest(out)["outputs"]


def test_truth_must_fit(tmp_path, small_config, small_overrides):
    sim = run_simulate(small_config, tmp_path / "sim")
    run_spectra(sim["noisy"], small_config, tmp_path / "spectra")
    small_overrides["frame"] = {"rows": 16, "cols": 16}
    other = run_simulate(load_config(overrides=small_overrides), tmp_path / "x")
    with pytest.raises(InvalidArgumentError):
        run_retrieve(
            tmp_path / "spectra" / "spectra.cube",
            small_config,
            tmp_path / "retrieve",
            other["truth"],
        )


def test_wrong_cube_kinds(tmp_path, small_config):
    sim = run_simulate(small_config, tmp_path / "sim")
    with pytest.raises(CubeFormatError):
        run_spectra(sim["truth"], small_config, tmp_path / "spectra")
    with pytest.raises(CubeFormatError):
        run_retrieve(sim["noisy"], small_config, tmp_path / "retrieve")
    with pytest.raises(InvalidArgumentError):
        run_render(sim["noisy"], small_config, tmp_path / "render")


def test_evaluate_truth_against_itself(tmp_path, small_config):
    sim = run_simulate(small_config, tmp_path / "sim")
    values, mean = run_evaluate(
        sim["truth"], sim["truth"], small_config, tmp_path / "eval"
    )
    assert values.shape == (10,)
    np.testing.assert_array_equal(values, 0.0)
    assert mean == 0.0
    rows = read_rows(tmp_path / "eval" / "evaluate.csv")
    assert rows[-1] == ["mean", "0.0"]


def test_render_outputs(tmp_path, small_config):
    sim = run_simulate(small_config, tmp_path / "sim")
    out = tmp_path / "render"
    images = run_render(sim["truth"], small_config, out)
    assert [path.name for path in images] == [
        "slice_000_phase.pgm",
        "slice_001_phase.pgm",
    ]
    for name in (
        "slice_000_phase.json",
        "slice_000_phase_row_016.csv",
        "slice_001_phase_col_008.csv",
    ):
        assert (out / name).is_file()
    assert len(read_rows(out / "slice_000_phase_row_016.csv")) == 33


@pytest.mark.parametrize(
    "render",
    [
        {"slices": [0, 10]},
        {"slices": [1], "rows": [32]},
        {"slices": [1], "rows": [4], "cols": [99]},
    ],
)
def test_render_checks_indices_first(tmp_path, small_overrides, render):
    config = load_config(overrides=small_overrides)
    sim = run_simulate(config, tmp_path / "sim")
    small_overrides["render"] = render
    out = tmp_path / "render"
    with pytest.raises(InvalidArgumentError, match="out of range"):
        run_render(sim["truth"], load_config(overrides=small_overrides), out)
    assert not list(out.glob("*"))


def test_render_rejects_bad_settings(tmp_path, small_overrides):
    config = load_config(overrides=small_overrides)
    sim = run_simulate(config, tmp_path / "sim")
    small_overrides["render"] = {"rows": [-1]}
    out = tmp_path / "render"
    with pytest.raises(ConfigurationError):
        run_render(sim["truth"], load_config(overrides=small_overrides), out)
    assert not list(out.glob("*"))


def test_psnr_study(tmp_path, small_config):
    rows = run_study(small_config, tmp_path, "psnr")
    assert [row[0] for row in rows] == [0.25, 0.5]
    for row in rows:
        assert row[1] - row[2] == pytest.approx(5 * math.log10(400))
    # more noise, lower PSNR
    assert rows[1][1] < rows[0][1]
    assert (tmp_path / "study_psnr.csv").is_file()

    table = read_rows(tmp_path / "study_psnr_map.csv")
    assert table[0] == ["sigma", "wavelength_nm", "psnr_db"]
    assert len(table) == 1 + 2 * 10
    assert [float(row[0]) for row in table[1:]] == [0.25] * 10 + [0.5] * 10
    by_sigma = {}
    for sigma, wavelength, value in table[1:]:
        by_sigma.setdefault(sigma, []).append((wavelength, float(value)))
    low, high = by_sigma["0.25"], by_sigma["0.5"]
    assert [item[0] for item in low] == [item[0] for item in high]
    # doubling sigma costs 10 log10(2) dB on every wavelength
    for (_, quiet), (_, loud) in zip(low, high):
        assert quiet - loud == pytest.approx(10 * math.log10(2), abs=0.5)
    assert read_manifest(tmp_path)["outputs"] == [
        "study_psnr.csv",
        "study_psnr_map.csv",
    ]


def test_rrmse_study(tmp_path, small_config):
    rows = run_study(small_config, tmp_path, "rrmse")
    assert [(row[0], row[2]) for row in rows] == [
        (0.25, 1),
        (0.25, 2),
        (0.5, 1),
        (0.5, 2),
    ]
    # one observation PSNR per sigma, lower with more noise
    assert rows[0][1] == rows[1][1]
    assert rows[2][1] == rows[3][1]
    assert rows[2][1] < rows[0][1]
    table = read_rows(tmp_path / "study_rrmse.csv")
    assert table[0] == ["sigma", "observation_db", "iteration", "mean_rrmse"]
    assert len(table) == 5
    with pytest.raises(InvalidArgumentError):
        run_study(small_config, tmp_path, "depth")


def test_cli_matches_library(tmp_path, small_config_file):
    status = main(
        ["simulate", "--config", str(small_config_file), "--out",
         str(tmp_path / "cli")]
    )
    assert status == 0
    run_simulate(load_config(small_config_file), tmp_path / "api")
    assert tree_bytes(tmp_path / "cli") == tree_bytes(tmp_path / "api")


def test_cli_seed_and_evaluate(tmp_path, small_config_file, capsys):
    out = tmp_path / "sim"
    args = ["--config", str(small_config_file), "--out", str(out)]
    assert main(["simulate", "--seed", "5"] + args) == 0
    assert read_manifest(out)["seed"] == 5

    truth = str(out / "truth.cube")
    assert main(["evaluate", truth, truth] + args) == 0
    assert "mean_rrmse=0.000000" in capsys.readouterr().out


def test_cli_presets(tmp_path, small_config_file):
    out = tmp_path / "exp"
    args = ["--config", str(small_config_file), "--out", str(out)]
    assert main(["simulate", "--preset", "paper-exp"] + args) == 0
    config = read_manifest(out)["config"]
    assert config["delay"] == {"delta_z": "59.7 nm", "n_steps": 400}
    assert config["band"] == ["650 nm", "850 nm"]
    assert config["solver"]["dispersion"]["kind"] == "sellmeier_fused_silica"
    # the file still wins over the preset
    assert config["frame"]["rows"] == 32

    out = tmp_path / "sim"
    args = ["--config", str(small_config_file), "--out", str(out)]
    assert main(["simulate", "--preset", "paper-sim"] + args) == 0
    assert read_manifest(out)["config"]["phantom"]["max_depth"] == "317 nm"
    with pytest.raises(SystemExit):
        main(["simulate", "--preset", "laboratory"] + args)


def test_cli_errors(tmp_path):
    missing = str(tmp_path / "missing.cube")
    assert main(["spectra", missing, "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit):
        main(["simulate"])
