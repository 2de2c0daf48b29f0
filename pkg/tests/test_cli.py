import csv
import io
import json

import pytest

from infoqueue.analytics import MetricsRow
from infoqueue.cli import main, round_half_even
from infoqueue.decision import Advice, ThresholdMap
from infoqueue.equilibrium import EquilibriumSet, PrivateRule
from infoqueue.sim import SimReport


def call(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err):
    # warnings may precede the machine-readable error line
    return json.loads(err.strip().splitlines()[-1])


def csv_rows(text):
    return list(csv.reader(io.StringIO(text)))


# --- reproduce ----------------------------------------------------------------

def test_reproduce_mean_table_first_row(capsys):
    code, out, _ = call(capsys, "reproduce", "table-mean")
    rows = csv_rows(out)
    assert code == 0
    assert rows[0] == ["belief", "inv_mean_inv", "mean", "M_xi", "rev_P", "rev_S", "rev_C"]
    assert rows[1] == ["U(3.4, 4.0)", "3.692", "3.7", "3.719", "6.05", "6.048", "5.357"]
    assert len(rows) == 12


def test_reproduce_optimistic_p_table_row(capsys):
    _, out, _ = call(capsys, "reproduce", "table-p-optimistic")
    rows = csv_rows(out)
    assert rows[0] == ["p", "xi", "rev_P", "rev_S", "rev_C"]
    assert rows[8] == ["2.9", "2.619", "8.403", "8.386", "7.595"]


def test_reproduce_equilibrium_ordering(capsys):
    _, out, _ = call(capsys, "reproduce", "fig-equilibria", "--format", "json")
    d = json.loads(out)
    assert d["ordering"] == "q_m^S < q_m^C = q_s^C = q_s^S < q_e^S < q_e^C = 1"
    assert d["violations"] == []


def test_reproduce_is_repeatable(capsys):
    _, first, _ = call(capsys, "reproduce", "table-spread")
    _, second, _ = call(capsys, "reproduce", "table-spread")
    assert first == second


# --- sweep --------------------------------------------------------------------

def test_zero_step_sweep_is_header_only(capsys):
    code, out, _ = call(capsys, "sweep", "--start", "0.1", "--stop", "3.7", "--steps", "0")
    assert code == 0
    assert out.strip() == ",".join(["p"] + [c for c in MetricsRow.columns() if c != "p"])


def test_fee_sweep_matches_pessimistic_table(capsys):
    _, table, _ = call(capsys, "reproduce", "table-p-pessimistic")
    _, sweep, _ = call(capsys, "sweep", "--start", "0.1", "--stop", "3.7", "--steps", "10",
                       "--belief-uniform", "4.4", "4.8", "--precision", "3")
    expected = csv_rows(table)
    got = csv_rows(sweep)
    idx = {c: got[0].index(c) for c in expected[0]}
    for exp_row, got_row in zip(expected[1:], got[1:]):
        assert [got_row[idx[c]] for c in expected[0]] == exp_row


def test_spread_sweep_lowers_shared_revenue(capsys):
    _, out, _ = call(capsys, "sweep", "--axis", "belief-spread", "--start", "0", "--stop", "0.4",
                     "--steps", "5", "--belief-uniform", "3.9", "4.5", "--format", "json")
    rev_s = [r["rev_S"] for r in json.loads(out)["rows"]]
    assert all(b < a for a, b in zip(rev_s, rev_s[1:]))


def test_fee_sweep_out_of_range_is_validation_error(capsys):
    code, out, err = call(capsys, "sweep", "--start", "0", "--stop", "9", "--steps", "3")
    assert code == 2 and out == ""
    assert error_of(err)["exit_code"] == 2


# --- thin wrappers ------------------------------------------------------------

def test_analyze_point_mass_all_revenues_equal(capsys):
    code, out, err = call(capsys, "analyze", "--belief-point", "4.2", "--format", "json")
    row = MetricsRow.from_dict(json.loads(out))
    assert code == 0 and "degenerate_belief" in err
    assert row.rev_P == pytest.approx(row.rev_C, rel=1e-12)
    assert row.rev_S == pytest.approx(row.rev_C, rel=1e-10)


def test_advise_pessimistic(capsys):
    code, out, _ = call(capsys, "advise", "--audience", "rm", "--belief-uniform", "4.4", "4.8",
                        "--format", "json")
    adv = Advice.from_dict(json.loads(out))
    assert code == 0 and adv.action == "reveal_true_rate"


def test_equilibria_json_round_trip(capsys):
    _, out, _ = call(capsys, "equilibria", "--format", "json")
    d = json.loads(out)
    assert EquilibriumSet.from_dict(d["classical"]).case.value == "classical"
    assert EquilibriumSet.from_dict(d["shared"]).q_s == pytest.approx(d["classical"]["q_s"])
    assert PrivateRule.from_dict(d["private"]["rm"]).regime == "rm"


def test_threshold_map_outputs(capsys, tmp_path):
    curves = tmp_path / "curves.csv"
    code, out, _ = call(capsys, "threshold-map", "--steps", "6", "--format", "json",
                        "--curves", str(curves))
    assert code == 0
    tm = ThresholdMap.from_dict(json.loads(out))
    assert len(tm.cells) == 36
    rows = csv_rows(curves.read_text())
    assert rows[0] == ["curve", "xi", "lambda"]
    assert {r[0] for r in rows[1:]} >= {"M", "xi0"}


def test_threshold_map_csv_columns(capsys):
    _, out, _ = call(capsys, "threshold-map", "--steps", "3")
    assert csv_rows(out)[0] == ["xi", "lambda", "pvc", "svc", "pvs"]


def test_simulate_deterministic_bytes(capsys):
    argv = ("simulate", "--seed", "1", "--horizon", "5000", "--format", "json")
    _, first, _ = call(capsys, *argv)
    _, second, _ = call(capsys, *argv)
    assert first == second
    rep = SimReport.from_json(first)
    assert rep.seed == 1


def test_simulate_validate_reports_each_metric(capsys):
    code, out, _ = call(capsys, "simulate", "--case", "classical", "--p", "2", "--horizon", "2e5",
                        "--validate", "--format", "json")
    d = json.loads(out)
    assert code == 0
    names = {c["name"] for c in d["checks"]}
    assert names == {"join_fraction", "mean_wait", "revenue_rate", "welfare_rate_physical"}


def test_simulate_deterministic_service_defaults_second_moment(capsys):
    code, _, _ = call(capsys, "simulate", "--service-dist", "deterministic", "--horizon", "2000")
    assert code == 0


# --- inputs and errors --------------------------------------------------------

def test_flags_override_params_file(capsys, tmp_path):
    pf = tmp_path / "params.json"
    pf.write_text(json.dumps({"R": 5, "C": 5, "mu": 5, "lambda": 3.0}))
    _, from_file, _ = call(capsys, "analyze", "--params", str(pf), "--format", "json")
    _, overridden, _ = call(capsys, "analyze", "--params", str(pf), "--lambda", "4.2",
                            "--format", "json")
    assert json.loads(from_file)["rev_C"] == pytest.approx(1.5 * 3.0 * min(1, 3.5714285714 / 3.0))
    assert json.loads(overridden)["rev_C"] == pytest.approx(5.357142857, rel=1e-9)


def test_belief_file_and_out_path(capsys, tmp_path):
    bf = tmp_path / "belief.json"
    bf.write_text(json.dumps({"type": "discrete", "points": [[3.8, 0.5], [4.4, 0.5]]}))
    out = tmp_path / "row.csv"
    code, stdout, _ = call(capsys, "analyze", "--belief", str(bf), "--out", str(out))
    assert code == 0 and stdout == ""
    assert csv_rows(out.read_text())[0] == MetricsRow.columns()


def test_invalid_params_exit_2(capsys):
    code, _, err = call(capsys, "analyze", "--R", "1", "--C", "10")
    assert code == 2
    assert error_of(err)["error"] == "validation"


def test_missing_file_exit_4(capsys, tmp_path):
    code, _, err = call(capsys, "analyze", "--params", str(tmp_path / "absent.json"))
    assert code == 4
    assert error_of(err)["exit_code"] == 4


def test_numeric_failure_exit_3(capsys):
    code, _, err = call(capsys, "advise", "--s2", "0.04", "--belief-uniform", "3.45", "4.98")
    assert code == 3
    assert error_of(err)["error"] == "not_mm1"


def test_half_even_rounding():
    assert round_half_even(0.125, 2) == 0.12
    assert round_half_even(0.375, 2) == 0.38
    assert round_half_even(2.5, 0) == 2.0
    assert round_half_even(7, 2) == 7
