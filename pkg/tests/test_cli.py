import json

import numpy as np
import pytest

from sparse_code.cli import main
from sparse_code.errors import ParseError
from sparse_code.mmio import format_matrix_market, load_matrix_market, parse_matrix_market
from sparse_code.sparse import SparseMatrix

# Matrix Market


def test_single_entry():
    M = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 5.0\n")
    assert M.to_dense().tolist() == [[0, 5], [0, 0]]


def test_pattern_symmetric_expands():
    text = "%%MatrixMarket matrix coordinate pattern symmetric\n% comment\n2 2 1\n2 1\n"
    assert parse_matrix_market(text).to_dense().tolist() == [[0, 1], [1, 0]]


def test_skew_symmetric_and_integer():
    text = "%%MatrixMarket matrix coordinate integer skew-symmetric\n3 3 1\n3 1 4\n"
    D = parse_matrix_market(text).to_dense()
    assert D[2, 0] == 4 and D[0, 2] == -4


@pytest.mark.parametrize("text,line", [
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 4),
    ("%%MatrixMarket matrix array real general\n2 2\n", 1),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n", 3),
    ("", 1),
])
def test_malformed(text, line):
    with pytest.raises(ParseError) as err:
        parse_matrix_market(text)
    assert f"line {line}" in str(err.value)


def test_format_round_trip(tmp_path):
    M = SparseMatrix.from_dense(np.array([[0.0, 1.5, 0.0], [-2.0, 0.0, 3.0]]))
    assert parse_matrix_market(format_matrix_market(M)).equals(M)


# command line

def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_round_trip(tmp_path, capsys):
    path = tmp_path / "a.mtx"
    assert run(capsys, "gen", "--rows", 40, "--cols", 30, "--nnz", 100, "--seed", 3, "--out", path)[0] == 0
    M = load_matrix_market(path)
    assert (M.rows, M.cols, M.nnz) == (40, 30, 100)
    again = tmp_path / "b.mtx"
    run(capsys, "gen", "--rows", 40, "--cols", 30, "--nnz", 100, "--seed", 3, "--out", again)
    assert path.read_bytes() == again.read_bytes()
    code, out, _ = run(capsys, "check", path)
    assert code == 0 and out.split() == ["40", "30", "100"]


def test_threshold_output_deterministic(capsys):
    argv = ("threshold", "--dist", "wave", "--mn", 9, "--trials", 20, "--seed", 7)
    code, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert code == 0 and first == second
    csv_part, json_part = first.split("{", 1)
    assert csv_part.splitlines()[0] == "K,count"
    body = json.loads("{" + json_part)
    assert body["schema"] == "sparse-code/threshold/1" and body["trials"] == 20


def test_threshold_robust_reports_parameters(tmp_path, capsys):
    out = tmp_path / "t.json"
    run(capsys, "threshold", "--dist", "robust", "--m", 3, "--n", 3, "--trials", 5, "--json", out)
    body = json.loads(out.read_text())
    assert body["robust_c"] == 0.1 and body["robust_delta"] == 0.5


def test_analyze_matching_from_file(tmp_path, capsys):
    dist = tmp_path / "p.json"
    dist.write_text(json.dumps({"d": 3, "probs": ["1", "0", "0"]}))
    code, out, _ = run(capsys, "analyze", "--dist-file", dist, "--matching")
    assert code == 0 and out.startswith("matching probability: 2/9 = 0.2222")


def test_analyze_json(tmp_path, capsys):
    out = tmp_path / "a.json"
    code, _, _ = run(capsys, "analyze", "--d", 6, "--dist", "wave", "--K", 12, "--evolution",
                     "--moments", 2, "--json", out)
    body = json.loads(out.read_text())
    assert code == 0 and body["schema"] == "sparse-code/analyze/1"
    assert set(body["evolution"]) == {str(s) for s in range(1, 7)}
    assert body["decodability"]["K"] == 12


def test_optimize(tmp_path, capsys):
    out, dist = tmp_path / "o.json", tmp_path / "p.json"
    code, _, _ = run(capsys, "optimize", "--d", 6, "--json", out, "--dist-out", dist)
    body = json.loads(out.read_text())
    assert code == 0 and body["report"]["check"]["feasible"]
    assert json.loads(dist.read_text())["d"] == 6


def test_optimize_infeasible_exit_code(capsys):
    code, _, err = run(capsys, "optimize", "--d", 6, "--p-m", 0.95)
    assert code == 1 and "Infeasible" in err


def test_simulate_deterministic(tmp_path, capsys):
    argv = ["simulate", "--scheme", "sparse", "--scheme", "uncoded", "--m", 2, "--n", 2,
            "--N", 6, "--stragglers", 1, "--trials", 3, "--rows", 50, "--cols", 50,
            "--nnz", 200, "--seed", 4]
    outs = []
    for tag in ("x", "y"):
        js, tc = tmp_path / f"{tag}.json", tmp_path / f"{tag}.csv"
        code, out, _ = run(capsys, *argv, "--json", js, "--trials-csv", tc)
        assert code == 0
        outs.append((out, js.read_bytes(), tc.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][0].splitlines()[0] == "scheme,metric,mean,std"
    assert json.loads(outs[0][1])["summary"]["sparse"]["all_correct"]


def test_simulate_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schemes": ["polynomial"], "m": 2, "n": 2, "N": 5, "stragglers": 1,
                               "trials": 2, "rows": 30, "a_cols": 30, "b_cols": 30, "nnz": 90}))
    code, out, _ = run(capsys, "simulate", "--config", cfg)
    assert code == 0 and out.count("polynomial") > 0


@pytest.mark.parametrize("argv", [
    [],
    ["nope"],
    ["threshold", "--trials", "5"],
    ["simulate", "--m", "0"],
    ["simulate", "--scheme", "lt"],
    ["optimize"],
    ["optimize", "--d", "6", "--p-m", "2"],
    ["analyze", "--matching"],
    ["analyze", "--d", "6", "--dist", "zipf"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_missing_file_exit_1(tmp_path, capsys):
    code, _, err = run(capsys, "check", tmp_path / "none.mtx")
    assert code == 1
