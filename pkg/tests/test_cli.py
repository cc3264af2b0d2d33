import json

import numpy as np
import pytest

from src.cli import commands
from src.services import fileio

GRID = ["--grid", "16", "16", "16"]


@pytest.fixture
def workdir(tmp_path):
    return tmp_path


@pytest.fixture
def phantom_file(workdir):
    path = workdir / "clean.vol"
    assert commands.main(["phantom", "--dims", "16", "16", "16", "-o", str(path)]) == 0
    return path


@pytest.fixture
def stack_file(workdir):
    path = workdir / "w.stk"
    assert commands.main(["make-wavelets", "--order", "1", *GRID, "-o", str(path)]) == 0
    return path


def test_phantom_and_noise_are_deterministic(workdir, phantom_file):
    out = workdir / "noisy.vol"
    argv = ["noise", "-i", str(phantom_file), "--sigma", "0.3", "--relative", "--seed", "5", "-o", str(out)]
    assert commands.main(argv) == 0
    first = out.read_bytes()
    assert commands.main(argv) == 0
    assert out.read_bytes() == first

    record = fileio.read_manifest(out)
    assert record["command"] == "noise"
    assert record["seed"] == 5
    assert record["flags"]["sigma"] == 0.3


def test_make_wavelets_is_deterministic_and_exports(workdir):
    stack_file = workdir / "w.stk"
    spectra = workdir / "spectra"
    slices = workdir / "slices"
    argv = ["make-wavelets", "--order", "1", *GRID, "-o", str(stack_file), "--dump-spectra", str(spectra),
            "--orientations-csv", str(workdir / "orientations.csv"), "--kernel-slices", str(slices)]
    assert commands.main(argv) == 0
    first = stack_file.read_bytes()
    assert commands.main(argv) == 0
    assert stack_file.read_bytes() == first
    assert {p.name for p in spectra.iterdir()} == {"window.csv", "h_re.csv", "h_im.csv"}
    assert len(list(slices.glob("*.pgm"))) == 6
    assert (workdir / "orientations.csv").exists()


def test_every_stage_is_byte_identical_on_rerun(workdir, phantom_file, stack_file):
    noisy = workdir / "noisy.vol"
    assert commands.main(["noise", "-i", str(phantom_file), "--sigma", "0.3", "--seed", "11",
                          "-o", str(noisy)]) == 0
    score, diffused = workdir / "u.scr", workdir / "d.scr"
    stages = [
        (["transform", "-i", str(noisy), "-w", str(stack_file)], score),
        (["diffuse", "-i", str(score), "--t", "1.0"], diffused),
        (["reconstruct", "-i", str(diffused), "-w", str(stack_file)], workdir / "exact.vol"),
        (["reconstruct", "-i", str(diffused), "--recon", "approx"], workdir / "approx.vol"),
        (["enhance", "-i", str(noisy), "-w", str(stack_file), "--t", "1.0", "--p", "1.5"], workdir / "e.vol"),
        (["mpsi-report", "-w", str(stack_file), "--bins", "4"], workdir / "mpsi.csv"),
    ]
    for argv, out in stages:
        assert commands.main([*argv, "-o", str(out)]) == 0
        first = out.read_bytes()
        assert commands.main([*argv, "-o", str(out)]) == 0
        assert out.read_bytes() == first, argv[0]


def test_transform_reconstruct_round_trip(workdir, phantom_file, stack_file):
    score, back = workdir / "u.scr", workdir / "back.vol"
    assert commands.main(["transform", "-i", str(phantom_file), "-w", str(stack_file), "-o", str(score)]) == 0
    assert commands.main(["reconstruct", "-i", str(score), "-w", str(stack_file), "--double", "-o", str(back)]) == 0
    original = fileio.read_volume(phantom_file).data
    restored = fileio.read_volume(back).data
    assert np.linalg.norm(restored - original) <= 0.05 * np.linalg.norm(original)


def test_padding_is_cropped_on_reconstruction(workdir, stack_file):
    small = workdir / "small.vol"
    score, back = workdir / "u.scr", workdir / "back.vol"
    assert commands.main(["phantom", "--dims", "12", "12", "12", "-o", str(small)]) == 0
    assert commands.main(["transform", "-i", str(small), "-w", str(stack_file), "--pad", "2", "2", "2",
                          "-o", str(score)]) == 0
    assert fileio.read_score(score).pad == (2, 2, 2)
    assert commands.main(["reconstruct", "-i", str(score), "--recon", "approx", "-o", str(back)]) == 0
    assert fileio.read_volume(back).dims == (12, 12, 12)


def test_file_pipeline_equals_enhance(workdir, phantom_file, stack_file):
    noisy = workdir / "noisy.vol"
    commands.main(["noise", "-i", str(phantom_file), "--sigma", "0.2", "--seed", "1", "-o", str(noisy)])
    score, diffused, piped, direct = (workdir / n for n in ("u.scr", "d.scr", "piped.vol", "direct.vol"))
    flags = ["--t", "1.0", "--dt", "0.1"]
    assert commands.main(["transform", "-i", str(noisy), "-w", str(stack_file), "-o", str(score)]) == 0
    assert commands.main(["diffuse", "-i", str(score), *flags, "-o", str(diffused)]) == 0
    assert commands.main(["reconstruct", "-i", str(diffused), "--recon", "approx", "--double",
                          "-o", str(piped)]) == 0
    assert commands.main(["enhance", "-i", str(noisy), "-w", str(stack_file), *flags, "--double",
                          "-o", str(direct)]) == 0
    np.testing.assert_allclose(fileio.read_volume(piped).data, fileio.read_volume(direct).data, atol=1e-12)


def test_mpsi_report_csv(workdir, stack_file, capsys):
    csv = workdir / "mpsi.csv"
    assert commands.main(["mpsi-report", "-w", str(stack_file), "--bins", "4", "-o", str(csv)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["global_min"] > 0
    assert csv.read_text().startswith("rho_lo,rho_hi,min,mean,max")


def test_metrics_prints_json(phantom_file, capsys):
    assert commands.main(["metrics", str(phantom_file), str(phantom_file)]) == 0
    assert json.loads(capsys.readouterr().out) == {"rel_l2": 0.0, "psnr": 200.0}


def test_slice_of_volume_and_score(workdir, phantom_file, stack_file):
    score = workdir / "u.scr"
    commands.main(["transform", "-i", str(phantom_file), "-w", str(stack_file), "-o", str(score)])
    assert commands.main(["slice", "-i", str(phantom_file), "--axis", "0", "-o", str(workdir / "v.pgm")]) == 0
    assert commands.main(["slice", "-i", str(score), "--orientation", "3", "-o", str(workdir / "u.pgm")]) == 0
    assert json.loads((workdir / "v.pgm.json").read_text())["axis"] == 0
    assert commands.main(["slice", "-i", str(score), "--orientation", "99", "-o", str(workdir / "x.pgm")]) == 2


class TestExitCodes:
    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as exc:
            commands.main(["noise", "--sigma", "1"])
        assert exc.value.code == 2

    def test_invalid_parameter(self, workdir):
        assert commands.main(["make-wavelets", "--L", "0", *GRID, "-o", str(workdir / "w.stk")]) == 2

    @pytest.mark.parametrize("export", [["--kernel-slices", "slices"], ["--patch", "5"]])
    def test_kernel_index_out_of_range(self, workdir, export):
        if export[0] == "--kernel-slices":
            export = [export[0], str(workdir / export[1])]
        argv = ["make-wavelets", "--order", "0", "--grid", "8", "8", "8", "--kernel-index", "12", *export,
                "-o", str(workdir / "w.stk")]
        assert commands.main(argv) == 2

    def test_exact_reconstruction_needs_wavelets(self, workdir, phantom_file, stack_file):
        score = workdir / "u.scr"
        commands.main(["transform", "-i", str(phantom_file), "-w", str(stack_file), "-o", str(score)])
        assert commands.main(["reconstruct", "-i", str(score), "-o", str(workdir / "r.vol")]) == 2

    def test_missing_input_file(self, workdir):
        assert commands.main(["noise", "-i", str(workdir / "absent.vol"), "--sigma", "1",
                              "-o", str(workdir / "n.vol")]) == 3

    def test_corrupt_input_file(self, workdir):
        bad = workdir / "bad.vol"
        bad.write_bytes(b"garbage that is long enough")
        assert commands.main(["metrics", str(bad), str(bad)]) == 3

    def test_grid_mismatch(self, workdir, stack_file):
        other = workdir / "other.vol"
        commands.main(["phantom", "--dims", "8", "8", "8", "-o", str(other)])
        assert commands.main(["transform", "-i", str(other), "-w", str(stack_file),
                              "-o", str(workdir / "u.scr")]) == 3

    def test_unstable_reconstruction(self, workdir, phantom_file, stack_file):
        score = workdir / "u.scr"
        commands.main(["transform", "-i", str(phantom_file), "-w", str(stack_file), "-o", str(score)])
        assert commands.main(["reconstruct", "-i", str(score), "-w", str(stack_file), "--strict",
                              "--eps", "1e6", "-o", str(workdir / "r.vol")]) == 4


class TestConfigFile:
    def test_values_become_defaults(self, workdir, phantom_file):
        config = workdir / "run.toml"
        config.write_text('seed = 9\n\n[noise]\nsigma = 0.25\n')
        out = workdir / "n.vol"
        assert commands.main(["--config", str(config), "noise", "-i", str(phantom_file), "-o", str(out)]) == 0
        record = fileio.read_manifest(out)
        assert record["seed"] == 9
        assert record["flags"]["sigma"] == 0.25

    def test_command_line_wins(self, workdir, phantom_file):
        config = workdir / "run.toml"
        config.write_text('[noise]\nsigma = 0.25\nseed = 9\n')
        out = workdir / "n.vol"
        commands.main(["--config", str(config), "noise", "-i", str(phantom_file), "--seed", "3", "-o", str(out)])
        assert fileio.read_manifest(out)["seed"] == 3

    def test_unknown_key(self, workdir):
        config = workdir / "run.toml"
        config.write_text('[phantom]\nnot_a_flag = 1\n')
        assert commands.main(["--config", str(config), "phantom", "-o", str(workdir / "p.vol")]) == 2

    def test_enum_values_from_config(self, workdir):
        config = workdir / "run.toml"
        config.write_text('[make-wavelets]\ndc-policy = "zero"\ngrid = [8, 8, 8]\norder = 0\n')
        out = workdir / "w.stk"
        assert commands.main(["--config", str(config), "make-wavelets", "-o", str(out)]) == 0
        assert fileio.read_stack(out).params.dc_policy.value == "zero"


def test_serve_hands_off_to_uvicorn(monkeypatch):
    calls = {}
    monkeypatch.setattr(commands.uvicorn, "run", lambda app, **kwargs: calls.update(app=app, **kwargs))
    assert commands.main(["serve", "--port", "2001"]) == 0
    assert calls["app"] == "src.api.router:app"
    assert calls["port"] == 2001
