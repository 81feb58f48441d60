"""Shared fixtures: a session-wide cache of trained runs and the acceptance report."""
import pytest

from licfg.cfg import PenaltyKind, TrainConfig, TrainingDiverged, train
from licfg.data import get_mixture

ACCEPTANCE_LINES: list[str] = []


class RunCache:
    """Train each (dataset, penalty, seed) once per session; keep divergences too."""

    def __init__(self):
        self.runs = {}

    def get(self, dataset: str, penalty: PenaltyKind, seed: int, template: TrainConfig | None = None):
        template = template or TrainConfig()
        key = (dataset, penalty, seed, template)
        if key not in self.runs:
            cfg = TrainConfig(**{**{k: getattr(template, k) for k in template.__dataclass_fields__}, "penalty": penalty, "seed": seed})
            try:
                self.runs[key] = train(cfg, get_mixture(dataset))
            except TrainingDiverged as exc:
                self.runs[key] = exc
        return self.runs[key]


@pytest.fixture(scope="session")
def run_cache():
    return RunCache()


@pytest.fixture(scope="session")
def acceptance_report():
    def report(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
