"""Command-line interface: subcommands, pipelines, determinism, exit codes."""

import json
import math

import pytest

import biphoton as bp
from biphoton.cli import main
from biphoton.polstate import ket_from_dict


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv) -> dict:
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


class TestPredict:
    def test_path_x_amplitudes(self, capsys):
        payload = run_json(capsys, "predict", "--path", "X")
        amps = payload["path_amplitudes"]
        assert amps["a0"] == pytest.approx(0.55, abs=0.005)
        assert amps["a1"] == pytest.approx(0.83, abs=0.005)
        assert amps["phi0"] == pytest.approx(math.pi)
        assert payload["metrics"]["concurrence"] == pytest.approx(12 / 13, abs=1e-9)

    def test_path_y_amplitudes(self, capsys):
        payload = run_json(capsys, "predict", "--path", "Y")
        assert payload["path_amplitudes"]["a0"] == pytest.approx(0.92, abs=0.005)
        assert payload["path_amplitudes"]["a1"] == pytest.approx(0.39, abs=0.005)

    def test_levels_alias_equivalence(self, capsys):
        by_path = run_json(capsys, "predict", "--path", "X")
        by_levels = run_json(capsys, "predict", "--levels", "2,2,3,3")
        del by_path["meta"], by_levels["meta"]
        assert by_path == by_levels

    def test_ket_output_loadable(self, capsys, tmp_path):
        out = tmp_path / "state.json"
        code, _, _ = run(capsys, "predict", "--path", "X", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        ket = ket_from_dict(payload["ket_circular"])
        assert abs(ket.amplitudes[1]) == pytest.approx(2 / math.sqrt(13), abs=1e-12)

    def test_bad_levels_exit_code(self, capsys):
        code, _, err = run(capsys, "predict", "--levels", "2,2,3")
        assert code == 1
        assert "error" in err

    def test_triangle_violating_levels_exit_code(self, capsys):
        code, _, err = run(capsys, "predict", "--levels", "2,2,3,1")
        assert code == 1


class TestTomographyPipeline:
    def test_full_round_trip(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, _, err = run(
            capsys, "simulate-tomo", "--path", "X", "--n", "1e5",
            "--seed", "7", "--out", "counts.csv",
        )
        assert code == 0, err
        payload = run_json(
            capsys, "reconstruct", "--counts", "counts.csv",
            "--method", "mle", "--target-path", "X",
        )
        assert payload["metrics"]["fidelity"] >= 0.995
        assert payload["physical"] is True
        assert payload["min_eigenvalue"] >= 0.0

    def test_linear_method(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-tomo", "--path", "Y", "--n", "1e6",
            "--seed", "3", "--out", "counts.csv")
        payload = run_json(
            capsys, "reconstruct", "--counts", "counts.csv", "--method", "linear",
            "--target-path", "Y",
        )
        assert payload["metrics"]["fidelity"] >= 0.99

    def test_resampled_metrics(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-tomo", "--path", "X", "--n", "2000",
            "--seed", "5", "--out", "counts.csv")
        payload = run_json(
            capsys, "reconstruct", "--counts", "counts.csv", "--resamples", "8",
            "--seed", "6", "--target-path", "X",
        )
        stats = payload["resampled_metrics"]
        for name in ("purity", "concurrence", "entanglement_of_formation",
                     "fidelity"):
            assert stats[name]["std"] >= 0.0

    def test_resample_command(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-tomo", "--path", "X", "--n", "2000",
            "--seed", "5", "--out", "counts.csv")
        payload = run_json(
            capsys, "resample", "--counts", "counts.csv", "--resamples", "6",
            "--seed", "2",
        )
        assert payload["n_resamples"] == 6
        assert payload["metrics"]["concurrence"]["std"] > 0.0

    def test_predict_payload_accepted_as_target(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "predict", "--path", "X", "--out", "state.json")
        run(capsys, "simulate-tomo", "--ket", "state.json", "--n", "1e4",
            "--seed", "2", "--out", "counts.csv")
        payload = run_json(capsys, "reconstruct", "--counts", "counts.csv",
                           "--target", "state.json")
        assert payload["metrics"]["fidelity"] >= 0.99

    def test_background_subtraction_flag(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-tomo", "--path", "X", "--n", "1e4",
            "--seed", "9", "--out", "counts.csv")
        plain = run_json(capsys, "reconstruct", "--counts", "counts.csv")
        cleaned = run_json(capsys, "reconstruct", "--counts", "counts.csv",
                           "--subtract-background", "5")
        assert plain["rho"] != cleaned["rho"]

    def test_empty_counts_file_fails(self, capsys, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        code, _, err = run(capsys, "reconstruct", "--counts", str(empty))
        assert code == 1
        assert "line" in err

    def test_corrupt_counts_file_names_line(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-tomo", "--path", "X", "--n", "1e3",
            "--seed", "1", "--out", "counts.csv")
        lines = (tmp_path / "counts.csv").read_text().splitlines()
        lines[5] = lines[5].replace(",", ";", 1)
        (tmp_path / "counts.csv").write_text("\n".join(lines) + "\n")
        code, _, err = run(capsys, "reconstruct", "--counts", "counts.csv")
        assert code == 1
        assert "line" in err


class TestG2Pipeline:
    def test_preset_simulation_and_fit(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, _, err = run(capsys, "simulate-g2", "--preset", "fig3",
                           "--seed", "11", "--out", "hist.csv")
        assert code == 0, err
        payload = run_json(capsys, "fit-g2", "--hist", "hist.csv",
                           "--preset", "fig3")
        fitted = payload["fit"]["params"]
        assert fitted["g0"] == pytest.approx(20.0, rel=0.03)
        assert payload["fit"]["converged"] is True

    def test_single_model_fit(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-g2", "--preset", "fig2x", "--seed", "3",
            "--out", "hist.csv")
        payload = run_json(capsys, "fit-g2", "--hist", "hist.csv",
                           "--model", "single")
        assert payload["fit"]["params"]["tau_decay"] == pytest.approx(5.6, rel=0.02)

    def test_explicit_model_simulation(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, _, err = run(
            capsys, "simulate-g2", "--model", "beats", "--g0", "10",
            "--tau-x", "5.6", "--tau-y", "13.1", "--r", "0.5", "--phi", "0",
            "--background", "2", "--bin-width", "0.5", "--t-min", "-5",
            "--t-max", "25", "--seed", "2", "--out", "hist.csv",
        )
        assert code == 0, err
        hist = (tmp_path / "hist.csv").read_text()
        assert hist.splitlines()[0].startswith("#")
        assert "bin_start_ns,counts" in hist

    def test_fit_offset_flag(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-g2", "--preset", "fig2x", "--seed", "3",
            "--out", "hist.csv")
        payload = run_json(capsys, "fit-g2", "--hist", "hist.csv",
                           "--model", "single", "--fit-offset")
        assert "offset" in payload["fit"]["params"]

    def test_unlock_flags(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-g2", "--preset", "fig3", "--seed", "11",
            "--out", "hist.csv")
        payload = run_json(capsys, "fit-g2", "--hist", "hist.csv",
                           "--preset", "fig3", "--free", "g0,background,delta")
        assert payload["fit"]["params"]["delta"] == pytest.approx(
            2 * math.pi * 0.266, rel=0.01
        )

    def test_missing_model_fails(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate-g2", "--out",
                           str(tmp_path / "h.csv"))
        assert code == 1


class TestBeatParamsCommand:
    def test_user_supplied_passthrough(self, capsys):
        payload = run_json(capsys, "beat-params", "--r", "2.86e-2", "--phi",
                           str(math.pi))
        assert payload["r"] == pytest.approx(2.86e-2)
        assert payload["phi"] == pytest.approx(math.pi)
        assert payload["source"] == "user"

    def test_phase_folded_into_principal_range(self, capsys):
        payload = run_json(capsys, "beat-params", "--r", "1.0", "--phi",
                           str(3 * math.pi))
        assert payload["phi"] == pytest.approx(math.pi)

    def test_from_projectors(self, capsys):
        payload = run_json(
            capsys, "beat-params", "--path-x", "X", "--path-y", "Y",
            "--proj-s", "L", "--proj-i", "0.7,0.57,0,0.41",
        )
        assert payload["source"] == "projection"
        assert payload["r"] > 0.0
        # oracle: compute from the library directly
        ket_x = bp.ket_from_path(bp.predict_path_state(bp.PATH_X))
        ket_y = bp.ket_from_path(bp.predict_path_state(bp.PATH_Y))
        proj_s = bp.named_projector("L")
        proj_i = bp.Projector.normalized(0.7 + 0.57j, 0.41j)
        r, phi = bp.beat_params(ket_x, ket_y, proj_s, proj_i)
        assert payload["r"] == pytest.approx(r, abs=1e-12)
        assert payload["phi"] == pytest.approx(phi, abs=1e-12)

    def test_negative_r_rejected(self, capsys):
        code, _, _ = run(capsys, "beat-params", "--r", "-1", "--phi", "0")
        assert code == 1

    def test_missing_projectors_rejected(self, capsys):
        with pytest.raises(SystemExit):
            main(["beat-params", "--path-x", "X"])


class TestDeterminism:
    def test_simulate_tomo_byte_identical(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        argv = ("simulate-tomo", "--path", "X", "--n", "1e4", "--seed", "42",
                "--out", "counts.csv")
        run(capsys, *argv)
        first = (tmp_path / "counts.csv").read_bytes()
        run(capsys, *argv)
        assert (tmp_path / "counts.csv").read_bytes() == first

    def test_reconstruct_byte_identical(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-tomo", "--path", "X", "--n", "1e4", "--seed", "42",
            "--out", "counts.csv")
        argv = ("reconstruct", "--counts", "counts.csv", "--resamples", "4",
                "--seed", "1", "--out", "result.json")
        run(capsys, *argv)
        first = (tmp_path / "result.json").read_bytes()
        run(capsys, *argv)
        assert (tmp_path / "result.json").read_bytes() == first

    def test_seed_env_var_default(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("BIPHOTON_SEED", "42")
        run(capsys, "simulate-g2", "--preset", "fig3", "--out", "a.csv")
        monkeypatch.delenv("BIPHOTON_SEED")
        run(capsys, "simulate-g2", "--preset", "fig3", "--seed", "42",
            "--out", "b.csv")
        a = [ln for ln in (tmp_path / "a.csv").read_text().splitlines()
             if not ln.startswith("#")]
        b = [ln for ln in (tmp_path / "b.csv").read_text().splitlines()
             if not ln.startswith("#")]
        assert a == b

    def test_meta_block_contents(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        run(capsys, "simulate-tomo", "--path", "X", "--n", "1e3", "--seed", "8",
            "--out", "counts.csv")
        payload = run_json(capsys, "reconstruct", "--counts", "counts.csv")
        meta = payload["meta"]
        assert meta["tool"] == "biphoton"
        assert meta["version"] == bp.__version__
        assert meta["seed"] == 12345  # default seed recorded
        assert meta["inputs"]["counts.csv"].startswith("sha256:")
        assert "reconstruct" in meta["command"]
