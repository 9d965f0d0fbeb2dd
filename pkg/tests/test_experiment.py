import io
import math

import numpy as np
import pytest

from taskcascade import toygen
from taskcascade.cascade import CascadeParams
from taskcascade.experiment import (
    UNSPECIFIED, CellResult, IncompleteTableError, ResultsTable, SizeEngine, SweepConfig,
    best_scheme_map, compute_R1, compute_R2, evaluate_cell, read_bestmap_csv, summarise, sweep,
)
from taskcascade.mitigation import SCHEMES, MitigationScheme
from taskcascade.schedule import ActivityNetwork, Task

from oracles import exact_R


def two_chain(gap, slack):
    return ActivityNetwork([Task("a", 0, 5), Task("b", 5 + gap, 10 + gap)], [("a", "b")],
                           project_end=10 + gap + slack)


@pytest.mark.parametrize("kind", SCHEMES)
def test_identities(kind):
    net = toygen.random_dag(25, 0.2, 120, 10, seed=3, project_slack=10)
    for q0, tau, gamma in [(0.4, 10.0, 0.0), (0.0, 10.0, 0.7), (1.0, math.inf, 1.0)]:
        r = evaluate_cell(net, kind, CascadeParams(q0, tau), gamma, 50, master_seed=1)
        assert r.R1 == 1.0 and r.R2 == 1.0


def test_two_node_chain_closed_form():
    gap, slack, q0, tau = 3, 7, 0.6, 5.0
    net = two_chain(gap, slack)
    before, after = q0 * math.exp(-gap / tau), q0 * math.exp(-(gap + slack) / tau)
    R1 = ((1 + after) / (1 + before) + 1) / 2
    R2 = (2 + after) / (2 + before)
    r = evaluate_cell(net, "duration", CascadeParams(q0, tau), 1.0, 40000, master_seed=5)
    assert abs(r.R1 - R1) < 3 * r.R1_se_unpaired
    assert abs(r.R2 - R2) < 3 * r.R2_se_unpaired
    assert compute_R1(net, "duration", CascadeParams(q0, tau), 1.0, 100) <= 1.0
    assert compute_R2(net, "duration", CascadeParams(q0, tau), 1.0, 100) <= 1.0


@pytest.mark.parametrize("kind,gamma", [("out-degree", 0.67), ("random", 0.5), ("start-date", 0.3),
                                        ("duration", 1.0)])
def test_fig3_against_exact(fig3, kind, gamma):
    params = CascadeParams(0.8, 10.0)
    scheme = MitigationScheme(kind)
    R1, R2 = exact_R(fig3, scheme, gamma, params)
    r = evaluate_cell(fig3, scheme, params, gamma, 20000, master_seed=7)
    assert abs(r.R1 - R1) < 3 * r.R1_se_unpaired + 1e-9
    assert abs(r.R2 - R2) < 3 * r.R2_se_unpaired + 1e-9
    assert R1 < 1 and R2 < 1


def test_summarise_ratio_modes():
    U = np.array([[1, 2, 3, 2], [1, 1, 1, 1]])
    M = np.array([[1, 1, 3, 1], [1, 1, 1, 1]])
    s = summarise(M, U)
    assert s["R1"] == pytest.approx((6 / 8 + 1) / 2)
    assert s["R2"] == pytest.approx(10 / 12)
    r = summarise(M, U, ratio="run-ratios")
    assert r["R1"] == pytest.approx(((1 + 0.5 + 1 + 0.5) / 4 + 1) / 2)
    ex = summarise(M, U, exclude_trivial=np.array([False, True]))
    assert ex["R1"] == pytest.approx(0.75)
    with pytest.raises(ValueError):
        summarise(M, U, ratio="median")
    with pytest.raises(ValueError):
        summarise(M, U, exclude_trivial=np.array([True, True]))


def test_exclude_trivial_seeds(fig3):
    params = CascadeParams(0.9, 100.0)
    a = evaluate_cell(fig3, "out-degree", params, 0.5, 300)
    b = evaluate_cell(fig3, "out-degree", params, 0.5, 300, exclude_trivial=True)
    # two sink tasks contribute ratio 1 when included
    assert a.R1 == pytest.approx((5 * b.R1 + 2) / 7)


def test_threads_do_not_change_results():
    net = toygen.random_dag(40, 0.15, 150, 10, seed=8, project_slack=5)
    params = CascadeParams(0.7, 20.0)
    for kind in ("random", "out-component"):
        a = SizeEngine(net, 3, threads=1).mitigated(MitigationScheme(kind), params, 0.4, 30)
        b = SizeEngine(net, 3, threads=4).mitigated(MitigationScheme(kind), params, 0.4, 30)
        assert np.array_equal(a, b)


def test_results_prefix_consistent():
    # run k of a seed is the same whether 10 or 50 runs were requested
    net = toygen.random_dag(20, 0.2, 100, 8, seed=2)
    eng = SizeEngine(net, 4)
    params = CascadeParams(0.5, 10.0)
    assert np.array_equal(eng.unmitigated(params, 50)[:, :10], SizeEngine(net, 4).unmitigated(params, 10))
    assert np.array_equal(eng.mitigated(MitigationScheme("random"), params, 0.5, 50)[:, :10],
                          eng.mitigated(MitigationScheme("random"), params, 0.5, 10))


def test_sweep_and_csv_round_trip(fig3, tmp_path):
    cfg = SweepConfig(q0=(0.3, 0.9), tau_tilde=(10.0, 2e4), gamma=(0.0, 0.5), n_runs=20,
                      n_runs_large_tau=40, master_seed=11)
    table = sweep(fig3, cfg)
    assert len(table) == 2 * 2 * 2 * len(SCHEMES)
    assert [r.n_runs for r in table.rows if r.tau_tilde == 2e4][0] == 40
    path = tmp_path / "results.csv"
    table.to_csv(path)
    again = ResultsTable.from_csv(path)
    key = lambda r: (r.scheme, r.cell)
    for a, b in zip(sorted(table.rows, key=key), sorted(again.rows, key=key)):
        assert (a.R1, a.R2, a.U, a.M, a.n_runs, a.master_seed) == (b.R1, b.R2, b.U, b.M, b.n_runs, b.master_seed)
    assert sweep(fig3, cfg).rows == table.rows


def test_from_csv_validates_header():
    with pytest.raises(ValueError):
        ResultsTable.from_csv(io.StringIO("a,b\n"))


@pytest.mark.parametrize("kw", [dict(q0=()), dict(q0=(1.5,)), dict(tau_tilde=(0.0,)), dict(gamma=(-0.1,)),
                                dict(schemes=("bogus",)), dict(n_runs=0), dict(ratio="x"),
                                dict(date_order="soon")])
def test_sweep_config_validation(kw):
    with pytest.raises(ValueError):
        SweepConfig(**kw)


def rows(values, cell=(10.0, 0.5, 0.5), metric="R1"):
    t, q, g = cell
    return [CellResult(s, q, t, g, 1, 0, R1=v, R2=v, U=1.0, M=v) for s, v in values.items()]


def test_best_map_winner_and_unspecified(tmp_path):
    table = rows({"out-degree": 0.80, "duration": 0.70, "random": 0.90})
    table += rows({"out-degree": 0.900, "duration": 0.899, "random": 0.901}, cell=(10.0, 0.6, 0.5))
    bm = best_scheme_map(table, threshold=0.01)
    assert bm.cells[(10.0, 0.5, 0.5)] == "duration"
    assert bm.cells[(10.0, 0.6, 0.5)] == UNSPECIFIED
    # (w - b) / w = 0.03 / 0.9; well above threshold
    assert best_scheme_map(rows({"out-degree": 0.87, "random": 0.9}), threshold=0.01).cells[(10.0, 0.5, 0.5)] == "out-degree"
    assert best_scheme_map(rows({"out-degree": 0.899, "random": 0.9}), threshold=0.01).cells[(10.0, 0.5, 0.5)] == UNSPECIFIED
    path = tmp_path / "bm.csv"
    bm.to_csv(path)
    assert read_bestmap_csv(path).cells == bm.cells


def test_best_map_tie_goes_to_first_scheme():
    table = rows({"random": 0.5, "duration": 0.5, "out-component": 0.5, "end-date": 0.9})
    assert best_scheme_map(table).cells[(10.0, 0.5, 0.5)] == "out-component"


def test_best_map_errors():
    with pytest.raises(ValueError):
        best_scheme_map(rows({"random": 0.5}))
    with pytest.raises(IncompleteTableError) as exc:
        best_scheme_map(rows({"random": 0.5, "duration": 0.4}) + rows({"random": 0.5}, cell=(1.0, 0.5, 0.5)))
    assert exc.value.missing == [((1.0, 0.5, 0.5), ["duration"])]
    with pytest.raises(ValueError):
        best_scheme_map(rows({"random": 0.5, "duration": 0.4}), metric="U")


def test_large_tau_limit_is_approached_from_below(fig3):
    # postponement still widens floats slightly, so R sits just under 1 at finite tau_tilde
    scheme = MitigationScheme("end-date")
    for tau in (1e3, 1e5):
        R1, R2 = exact_R(fig3, scheme, 1.0, CascadeParams(1.0, tau))
        assert 1 - 1e-2 * 1e3 / tau < R1 < 1 and R2 < 1
    R1_inf, _ = exact_R(fig3, scheme, 1.0, CascadeParams(1.0, math.inf))
    assert R1_inf == 1.0
