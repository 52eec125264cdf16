"""The frozen two-regime synthetic panel used for model-ordering checks."""

from __future__ import annotations

from .backtest import BacktestConfig, BarowModel, RollingModel, SequentialArowModel
from .baselines import RollingConfig
from .data import PanelDataset, RegimeSpec, generate_synthetic_panel

FIXTURE_SEED = 42
FIXTURE_BURN_IN = 126
FIXTURE_WEIGHTS = ((0.10, -0.05, 0.05), (0.05, 0.10, -0.05))


def fixture_spec() -> RegimeSpec:
    """750 days in two equal regimes, K=100, d=3, unit noise."""
    return RegimeSpec(
        segments=((375, FIXTURE_WEIGHTS[0]), (375, FIXTURE_WEIGHTS[1])),
        noise_std=1.0,
        K=100,
        seed=FIXTURE_SEED,
    )


def fixture_panel() -> PanelDataset:
    return generate_synthetic_panel(fixture_spec())


def fixture_configs() -> dict[str, BacktestConfig]:
    models = {
        "barow": BarowModel(),
        "rolling": RollingModel(RollingConfig(window_days=FIXTURE_BURN_IN)),
        "arow-seq": SequentialArowModel(),
    }
    return {
        name: BacktestConfig(model=m, burn_in_days=FIXTURE_BURN_IN, seed=FIXTURE_SEED)
        for name, m in models.items()
    }
