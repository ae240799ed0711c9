"""
Command line tests: each subcommand end to end on small files.
"""
import io

import pandas as pd
import pytest

from app.cli import main
from app.services.accountant import SgmParams, best_dp_budget
from app.services.frontier import FRONTIER_COLUMNS, PLOT_COLUMNS
from app.utils.file_handler import load_matrix, load_params, load_signature

GRID = """\
signature = planted
arch = logistic_regression, shallow_mlp
q = 0.5
eta = 0.5
sigma = 2.0
clip_c = 1.0
n_rounds = 2
local_steps = 2
"""


def _csv(text: str) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(text))


@pytest.fixture
def synthetic(tmp_path):
    """Two client matrices, a test matrix and the planted signature"""
    common = ["--n-normal", "20", "--n-tumor", "40", "--n-genes", "12", "--n-signal", "5", "--effect-size", "4"]
    assert main(["synth", *common, "--seed", "1", "--out", str(tmp_path / "c1.csv"),
                 "--test-out", str(tmp_path / "c2.csv"), "--test-fraction", "0.5",
                 "--signature-out", str(tmp_path / "planted.txt")]) == 0
    assert main(["synth", *common, "--seed", "2", "--out", str(tmp_path / "test.csv")]) == 0
    return tmp_path


def test_accountant(capsys):
    assert main(["accountant", "--q", "0.01", "--sigma", "1.1", "--steps", "1000", "--delta", "1e-5"]) == 0
    summary, table = capsys.readouterr().out.split("\n\n")
    best = _csv(summary)
    point, alpha = best_dp_budget(SgmParams(q=0.01, sigma=1.1), 1000, 1e-5)
    assert best.loc[0, "epsilon"] == pytest.approx(point.epsilon, rel=1e-8)
    assert best.loc[0, "alpha"] == alpha
    assert list(_csv(table).columns) == ["alpha", "rdp_epsilon", "dp_epsilon"]


def test_accountant_rejects_bad_grid(capsys):
    assert main(["accountant", "--q", "0.1", "--sigma", "1", "--steps", "5", "--alpha-grid", "2,x"]) == 2
    assert "error:" in capsys.readouterr().err


def test_synth_holdout(synthetic):
    first, holdout = load_matrix(synthetic / "c1.csv"), load_matrix(synthetic / "c2.csv")
    assert first.n_samples + holdout.n_samples == 60
    assert holdout.class_counts() == (10, 20)
    assert load_signature(synthetic / "planted.txt").genes[:2] == ("SIG00000", "SIG00001")


def test_train(synthetic, capsys):
    params_path = synthetic / "model.bin"
    argv = [
        "train", "--clients", f"{synthetic / 'c1.csv'},{synthetic / 'c2.csv'}",
        "--signature", str(synthetic / "planted.txt"),
        "--q", "1", "--eta", "0.5", "--sigma", "0", "--clip", "1e6",
        "--rounds", "10", "--local-steps", "3",
        "--test", str(synthetic / "test.csv"), "--save-params", str(params_path),
    ]
    assert main(argv) == 0
    row = _csv(capsys.readouterr().out).iloc[0]
    assert row["accuracy"] > 0.9
    assert row["epsilon"] == float("inf")
    assert load_params(params_path).theta.size == 6


def test_train_needs_two_clients(synthetic, capsys):
    argv = [
        "train", "--clients", str(synthetic / "c1.csv"), "--signature", str(synthetic / "planted.txt"),
        "--q", "0.5", "--eta", "0.1", "--sigma", "1", "--clip", "1", "--rounds", "1", "--local-steps", "1",
    ]
    assert main(argv) == 2
    assert "two files" in capsys.readouterr().err


def test_grid_select_plot(synthetic, capsys):
    grid_file = synthetic / "grid.txt"
    grid_file.write_text(GRID)
    frontier = synthetic / "frontier.csv"

    assert main([
        "grid", "--grid-file", str(grid_file), "--dataset", str(synthetic / "c1.csv"),
        "--signatures", str(synthetic / "planted.txt"), "--seeds", "2", "--deltas", "1e-5,1e-3",
        "--out", str(frontier),
    ]) == 0
    records = pd.read_csv(frontier)
    assert list(records.columns) == FRONTIER_COLUMNS
    assert len(records) == 4
    capsys.readouterr()

    loosest = str(records["epsilon"].max())
    assert main(["select", "--frontier", str(frontier), "--eps", loosest, "--delta", "1e-3"]) == 0
    selected = _csv(capsys.readouterr().out)
    assert selected.loc[0, "delta"] == 1e-3

    assert main([
        "select", "--frontier", str(frontier), "--eps", loosest, "--delta", "1e-3",
        "--dataset", str(synthetic / "c1.csv"), "--signatures", str(synthetic / "planted.txt"), "--seeds", "1",
    ]) == 0
    rerun = _csv(capsys.readouterr().out)
    assert rerun.loc[0, "epsilon"] <= float(loosest)

    plot = synthetic / "plot.csv"
    assert main(["plot-data", "--frontier", str(frontier), "--deltas", "1e-5", "--eps-grid", "0.01,1000",
                 "--out", str(plot)]) == 0
    rows = pd.read_csv(plot)
    assert list(rows.columns) == PLOT_COLUMNS
    assert rows["best_accuracy"].isna().tolist() == [True, False]


def test_select_errors(tmp_path, capsys):
    assert main(["select", "--frontier", str(tmp_path / "missing.csv"), "--eps", "1", "--delta", "1e-5"]) == 2
    assert "error:" in capsys.readouterr().err


def test_grid_rejects_empty_delta_grid(synthetic, capsys):
    grid_file = synthetic / "grid.txt"
    grid_file.write_text(GRID)
    assert main([
        "grid", "--grid-file", str(grid_file), "--dataset", str(synthetic / "c1.csv"),
        "--signatures", str(synthetic / "planted.txt"), "--seeds", "1", "--deltas", ",",
        "--out", str(synthetic / "frontier.csv"),
    ]) == 2
    assert "Delta grid" in capsys.readouterr().err
