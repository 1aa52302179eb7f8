from structmc.cli import cli_main
from structmc.linalg import read_dense
from structmc.sampling import ObservationMask


def test_unknown_flag_exits_1(capsys):
    assert cli_main(["solve", "--bogus"]) == 1
    assert cli_main(["nonsense"]) == 1


def test_generate_writes_files(tmp_path, capsys):
    out = tmp_path / "gen"
    rc = cli_main(["generate", "--size", "20", "20", "--rank", "3",
                   "--seed", "5", "--out", str(out)])
    assert rc == 0
    M = read_dense(out / "matrix.txt")
    assert M.shape == (20, 20)
    mask = ObservationMask.load_csv(out / "mask.csv")
    assert mask.shape == (20, 20)
    assert "wrote" in capsys.readouterr().out


def test_solve_full_observation_prints_zero_error(capsys):
    rc = cli_main(["solve", "--size", "15", "15", "--rank", "2", "--seed", "1",
                   "--rate-zero", "1.0", "--rate-nonzero", "1.0",
                   "--solver", "ssirls"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "relative_error=0.0" in out


def test_solve_from_files(tmp_path, capsys):
    out = tmp_path / "gen"
    assert cli_main(["generate", "--size", "15", "15", "--rank", "2",
                     "--seed", "2", "--rate-zero", "0.4",
                     "--rate-nonzero", "0.9", "--out", str(out)]) == 0
    rc = cli_main(["solve", "--matrix", str(out / "matrix.txt"),
                   "--mask", str(out / "mask.csv"), "--rank", "2",
                   "--solver", "sirls", "--out", str(tmp_path / "sol")])
    assert rc == 0
    assert (tmp_path / "sol" / "X_hat.txt").exists()
    assert (tmp_path / "sol" / "trace.csv").exists()


def test_solve_flag_pairing_error():
    assert cli_main(["solve", "--matrix", "only.txt"]) == 1


def test_grid_outputs_and_determinism(tmp_path):
    args = ["grid", "--size", "12", "12", "--rank", "2", "--trials", "2",
            "--seed", "9", "--zero-rates", "0.5", "1.0",
            "--nonzero-rates", "0.9", "--max-iter", "150"]
    out1, out2 = tmp_path / "g1", tmp_path / "g2"
    assert cli_main(args + ["--out", str(out1)]) == 0
    assert cli_main(args + ["--out", str(out2)]) == 0
    names = ["results.csv", "error_ssirls.pgm", "error_sirls.pgm",
             "ratio.pgm", "binned.pgm"]
    for name in names:
        a = (out1 / name).read_bytes()
        b = (out2 / name).read_bytes()
        assert a == b, name
    assert (out1 / "ratio.pgm.meta.txt").exists()


def test_compare_runs_small(tmp_path, capsys):
    out = tmp_path / "cmp"
    rc = cli_main(["compare", "--size", "12", "12", "--rank", "2",
                   "--trials", "1", "--seed", "4", "--zero-rates", "0.5",
                   "--nonzero-rates", "0.9", "--alpha", "0.01",
                   "--out", str(out)])
    assert rc == 0
    assert (out / "error_snnm.pgm").exists()


def test_remark_subcommand(capsys):
    rc = cli_main(["remark", "--trials", "5", "--seed", "1"])
    assert rc == 0
    assert "5/5 inequality passes" in capsys.readouterr().out


def test_config_file_with_cli_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "size=15 15\nrank=2\nseed=1\nrate-zero=1.0\nrate-nonzero=1.0\n"
        "solver=sirls\n")
    rc = cli_main(["solve", "--config", str(cfg)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "solver=sirls" in out and "relative_error=0.0" in out
    # explicit flag wins over the file
    rc = cli_main(["solve", "--config", str(cfg), "--solver", "ssirls"])
    assert rc == 0
    assert "solver=ssirls" in capsys.readouterr().out


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("this is not key value\n")
    assert cli_main(["solve", "--config", str(bad)]) == 1
    assert cli_main(["solve", "--config"]) == 1


def test_parameter_error_exit_code(tmp_path):
    # rank exceeding the dimension is a parameter error -> exit 1
    assert cli_main(["solve", "--size", "5", "5", "--rank", "9"]) == 1
