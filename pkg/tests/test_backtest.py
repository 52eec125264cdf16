from dataclasses import replace
from datetime import date

import numpy as np
import pytest
from hypothesis import given, strategies as st

from barow.backtest import (
    BacktestConfig,
    BarowModel,
    RollingModel,
    SequentialArowModel,
    compute_metrics,
    estimate_daily_return,
    run_backtest,
    select_r,
    tune_grid,
    tune_r,
)
from barow.baselines import RollingConfig
from barow.data import PanelDataset, RegimeSpec, generate_synthetic_panel
from barow.errors import InvalidArgumentError
from barow.fixtures import fixture_configs, fixture_panel, fixture_spec
from barow.model import Batch


@pytest.fixture(scope="module")
def small_panel():
    spec = RegimeSpec(segments=((40, [0.3, -0.2]), (40, [-0.1, 0.4])), noise_std=1.0, K=30, seed=5)
    return generate_synthetic_panel(spec)


def shuffled_within_dates(panel, seed):
    rng = np.random.default_rng(seed)
    return PanelDataset(
        [b.permuted(rng.permutation(b.size)) for b in panel.batches], panel.dim, panel.universe, panel.truth
    )


# -- daily return estimate --------------------------------------------------

def test_perfect_and_anti_prediction():
    y = np.array([0.01, -0.02, 0.03, 0.0])
    ic, ret = estimate_daily_return(y, y)
    assert ic == pytest.approx(1.0, abs=1e-15) and ret == pytest.approx(y.std(), rel=1e-14)
    ic, ret = estimate_daily_return(-y, y)
    assert ic == pytest.approx(-1.0, abs=1e-15) and ret == pytest.approx(-y.std(), rel=1e-14)


def test_degenerate_dispersion():
    assert estimate_daily_return([1.0, 1.0, 1.0], [0.1, 0.2, 0.3]) == (0.0, 0.0)
    assert estimate_daily_return([0.1, 0.2, 0.3], [5.0, 5.0, 5.0]) == (0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        estimate_daily_return([1.0], [1.0])


def test_rank_ic():
    preds = np.array([1.0, 2.0, 3.0, 4.0])
    realized = np.array([0.1, 0.2, 0.9, 50.0])
    ic, _ = estimate_daily_return(preds, realized, rank=True)
    assert ic == pytest.approx(1.0)
    assert estimate_daily_return(preds, realized)[0] < 0.9


# -- metrics -------------------------------------------------------------------

def test_metrics_hand_case():
    m = compute_metrics([0.01, -0.005, 0.02])
    assert m.total_return == 0.025
    assert m.max_dd == -0.005
    assert m.calmar == 5.0
    r = np.array([0.01, -0.005, 0.02])
    assert m.sharpe == pytest.approx(r.mean() / r.std() * np.sqrt(252), rel=1e-14)


def test_metrics_no_drawdown_and_flat():
    m = compute_metrics([0.0, 0.01, 0.02])
    assert m.max_dd == 0.0 and m.calmar is None
    z = compute_metrics([0.0, 0.0, 0.0])
    assert z.total_return == 0.0 and z.sharpe is None and z.calmar is None
    with pytest.raises(InvalidArgumentError):
        compute_metrics([])


def test_metrics_drawdown_from_start():
    # equity starts at 0, so an initial loss is a drawdown
    assert compute_metrics([-0.02, 0.01]).max_dd == -0.02


@given(
    st.lists(st.floats(-1, 1, allow_nan=False), max_size=20),
    st.floats(1e-6, 1), st.floats(1e-6, 1),
    st.lists(st.floats(-1, 1, allow_nan=False), max_size=20),
)
def test_up_then_down_has_drawdown(before, up, down, after):
    m = compute_metrics(before + [up, -down] + after)
    assert m.max_dd < 0
    assert m.calmar == pytest.approx(m.total_return / abs(m.max_dd))


# -- walk-forward ------------------------------------------------------------

def test_noiseless_barow_ic_is_one():
    # the N(0, I) prior biases the direction by O(R / rows seen); by day 126
    # with K = 100 the bias is far below the tolerance
    spec = RegimeSpec(segments=((160, [0.4, -0.3, 0.2]),), noise_std=0.0, K=100, seed=1)
    rep = run_backtest(generate_synthetic_panel(spec), BacktestConfig(model=BarowModel(), burn_in_days=126))
    assert rep.daily_ic.min() >= 1 - 1e-6


def test_zero_targets_give_zero_returns():
    spec = RegimeSpec(segments=((30, [0.0, 0.0]),), noise_std=0.0, K=10, seed=2)
    panel = generate_synthetic_panel(spec)
    for model in (BarowModel(), RollingModel(RollingConfig(window_days=5)), SequentialArowModel()):
        rep = run_backtest(panel, BacktestConfig(model=model, burn_in_days=5))
        assert np.all(rep.daily_return == 0.0)


def test_report_shapes_and_equity(small_panel):
    rep = run_backtest(small_panel, BacktestConfig(model=BarowModel(), burn_in_days=20))
    n = len(small_panel) - 20
    assert len(rep.dates) == len(rep.daily_ic) == len(rep.daily_return) == len(rep.equity) == n
    assert rep.dates[0] == small_panel.dates[20]
    np.testing.assert_array_equal(np.diff(rep.equity), np.diff(np.cumsum(rep.daily_return)))
    assert abs(rep.equity[-1] - rep.metrics.total_return) <= 1e-12


def test_burn_in_too_long(small_panel):
    with pytest.raises(InvalidArgumentError):
        run_backtest(small_panel, BacktestConfig(burn_in_days=len(small_panel)))


@pytest.mark.parametrize("model", [
    BarowModel(),
    SequentialArowModel(),
    SequentialArowModel(shuffle=True),
    RollingModel(RollingConfig(window_days=15, refit_every=3)),
])
def test_no_lookahead(small_panel, model):
    cfg = BacktestConfig(model=model, burn_in_days=20)
    full = run_backtest(small_panel, cfg)
    cut = run_backtest(small_panel.head(50), cfg)
    for a, b in zip(cut.predictions, full.predictions):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(cut.daily_return, full.daily_return[:30])


def test_predictions_ignore_same_day_targets(small_panel):
    cfg = BacktestConfig(model=BarowModel(), burn_in_days=20)
    t = 35
    batches = list(small_panel.batches)
    batches[t] = Batch(batches[t].X, batches[t].Y + 100.0, batches[t].date, batches[t].symbols)
    tampered = PanelDataset(batches, small_panel.dim)
    a = run_backtest(small_panel, cfg).predictions[t - 20]
    b = run_backtest(tampered, cfg).predictions[t - 20]
    np.testing.assert_array_equal(a, b)


def test_barow_report_is_shuffle_invariant(small_panel):
    cfg = BacktestConfig(model=BarowModel(), burn_in_days=20)
    a = run_backtest(small_panel, cfg)
    b = run_backtest(shuffled_within_dates(small_panel, 3), cfg)
    assert np.abs(a.daily_return - b.daily_return).max() < 1e-10


def test_sequential_arow_report_depends_on_row_order(small_panel):
    cfg = BacktestConfig(model=SequentialArowModel(), burn_in_days=20)
    a = run_backtest(small_panel, cfg)
    b = run_backtest(shuffled_within_dates(small_panel, 3), cfg)
    assert np.abs(a.daily_return - b.daily_return).max() > 1e-9


def test_rolling_refit_cadence(small_panel):
    daily = run_backtest(small_panel, BacktestConfig(model=RollingModel(RollingConfig(window_days=15)), burn_in_days=20))
    weekly = run_backtest(
        small_panel, BacktestConfig(model=RollingModel(RollingConfig(window_days=15, refit_every=5)), burn_in_days=20)
    )
    # both refit just before the first evaluated date
    np.testing.assert_array_equal(daily.predictions[0], weekly.predictions[0])
    assert not np.array_equal(daily.predictions[1], weekly.predictions[1])
    np.testing.assert_array_equal(daily.predictions[5], weekly.predictions[5])


def test_covariance_reset_schedule(small_panel):
    plain = run_backtest(small_panel, BacktestConfig(model=BarowModel(), burn_in_days=20))
    reset = run_backtest(small_panel, BacktestConfig(model=BarowModel(reset_every=10), burn_in_days=20))
    assert not np.array_equal(plain.daily_return, reset.daily_return)
    with pytest.raises(InvalidArgumentError):
        BarowModel(reset_every=0)


# -- tuning ---------------------------------------------------------------------

def test_tune_single_and_duplicates(small_panel):
    cfg = BacktestConfig(model=BarowModel(), burn_in_days=20)
    assert tune_r(small_panel, [0.7], None, cfg) == 0.7
    assert tune_r(small_panel, [10, 0.1, 1, 0.1, 10], None, cfg) == tune_r(small_panel, [0.1, 1, 10], None, cfg)
    table = tune_grid(small_panel, [10, 0.1, 1], None, cfg)
    assert [r for r, _ in table] == [0.1, 1.0, 10.0]
    with pytest.raises(InvalidArgumentError):
        tune_r(small_panel, [], None, cfg)
    with pytest.raises(InvalidArgumentError):
        tune_r(small_panel, [1.0], None, BacktestConfig(model=RollingModel(), burn_in_days=20))


def test_select_r_breaks_ties_low():
    from barow.backtest import Metrics
    m = lambda v: Metrics(v, None, -0.1, None)
    assert select_r([(0.1, m(1.0)), (1.0, m(1.0)), (10.0, m(0.5))]) == 0.1
    assert select_r([(0.1, m(1.0)), (1.0, m(2.0)), (10.0, m(2.0))]) == 1.0


def test_tune_window_restricts_dates(small_panel):
    cfg = BacktestConfig(model=BarowModel(), burn_in_days=10)
    window = (small_panel.dates[0], small_panel.dates[39])
    table = tune_grid(small_panel, [1.0], window, cfg)
    direct = run_backtest(small_panel.head(40), cfg)
    assert table[0][1] == direct.metrics


def test_noisy_fixture_grid_argmax():
    # With no forgetting, r only sets the strength of the N(0, aI) prior, so
    # the grid run favours the weakest prior. Value computed by the full grid.
    panel = generate_synthetic_panel(replace(fixture_spec(), noise_std=10.0))
    cfg = fixture_configs()["barow"]
    table = tune_grid(panel, [1e-3, 0.1, 1, 10, 100], None, cfg)
    totals = [m.total_return for _, m in table]
    assert select_r(table) == 1e-3
    assert totals == sorted(totals, reverse=True)
