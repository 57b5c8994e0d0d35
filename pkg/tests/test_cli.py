import numpy as np
import pytest

from bregshift import bench
from bregshift.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_PARTIAL, main
from bregshift.flow import read_samples
from bregshift.scenarios import read_dataset

SMALL = ["--sizes", "40", "--reps", "2", "--iterations", "10", "--set", "n_test=50"]


def test_dre_run_is_byte_stable(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["dre", *SMALL, "--out", str(a)]) == EXIT_OK
    assert main(["dre", *SMALL, "--out", str(b), "-v"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[1].startswith("dre,d=1,40,source_mse,")


def test_config_file_and_run_subcommand(tmp_path):
    cfg = tmp_path / "exp.cfg"
    out = tmp_path / "o.csv"
    cfg.write_text(f"experiment = dre\nsizes = 40\nreps = 2\niterations = 5\nn_test = 50\nout = {out}\n")
    assert main(["run", "--config", str(cfg), "--loss", "lr"]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 3


def test_config_errors(tmp_path, capsys):
    assert main(["dre", "--reps", "0", "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert main(["dre", "--set", "bogus=1"]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["dre", *SMALL, "--out", str(blocker / "x.csv")]) == EXIT_IO


def test_partial_failure(tmp_path, monkeypatch):
    def broken(*_args):
        raise FloatingPointError("diverged")

    monkeypatch.setitem(bench._WORKERS, "dre", broken)
    out = tmp_path / "f.csv"
    assert main(["dre", *SMALL, "--out", str(out)]) == EXIT_PARTIAL
    assert out.read_text() == "experiment,scenario,n,metric,mean,std,reps\n"


def test_dataset_dump(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["dataset", "--d", "5", "--n", "7", "--n-target", "3", "--nu", "0.1", "--out", str(out)]) == EXIT_OK
    s = read_dataset(out)
    assert s.source_X.shape == (7, 5) and s.target_X.shape == (3, 5) and s.source_Y.shape == (7, 2)
    assert main(["dataset", "--d", "2", "--nu", "0.1", "--out", str(out)]) == EXIT_CONFIG


def test_sample_dump(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sample", "--n-train", "100", "--iterations", "5", "--x", "0,1", "--n", "4",
                 "--out", str(out)]) == EXIT_OK
    X, Z = read_samples(out)
    assert X.shape == (8, 1) and Z.shape == (8, 1)
    assert np.array_equal(X[:, 0], [0, 0, 0, 0, 1, 1, 1, 1])


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for sub in ("dre", "shift", "flow", "run", "dataset", "sample"):
        assert sub in text
