from pathlib import Path

import pytest
import yaml

from barow.cli import main

ROOT = Path(__file__).resolve().parent.parent
FIXTURE_CONFIG = ROOT / "configs" / "fixture.yaml"


def fixture_config_copy(directory: Path) -> Path:
    """The shipped fixture config with its panel path pointed into ``directory``."""
    cfg = yaml.safe_load(FIXTURE_CONFIG.read_text())
    cfg["data"]["panel"] = "data/panel.csv"
    path = directory / "fixture.yaml"
    path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return path


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory):
    """Generate the fixture panel and backtest all three models once per session."""
    root = tmp_path_factory.mktemp("fixture")
    config = fixture_config_copy(root)
    assert main(["generate", "--config", str(config), "--out", str(root / "data")]) == 0
    assert main(["backtest", "--config", str(config), "--out", str(root / "backtest")]) == 0
    return {"root": root, "config": config, "data": root / "data", "backtest": root / "backtest"}


def strip_timestamp(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if "timestamp:" not in line)


# one "PASS/FAIL criterion N: ..." line per acceptance criterion, echoed in
# the terminal summary so it survives output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
