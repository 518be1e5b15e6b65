"""Shared fixtures: bundled configs and session-scoped scenario runs."""

from __future__ import annotations

import time
from pathlib import Path

import pytest

from qkdsim.scenario import run_scenario
from qkdsim.topology import load_topology

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# One line per acceptance criterion, echoed after the test summary so a
# plain pytest run doubles as the acceptance report.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(ACCEPTANCE_LINES)):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def configs() -> Path:
    return CONFIGS


@pytest.fixture(scope="session")
def reference_topology():
    return load_topology(str(CONFIGS / "reference_topology.json"))


def _run(tmp_path_factory, label: str, topology: str, scenario: str, seed: int,
         allow_exhaustion: bool = False) -> dict:
    out = tmp_path_factory.mktemp(label)
    t0 = time.perf_counter()
    code = run_scenario(
        str(CONFIGS / topology), str(CONFIGS / scenario), seed=seed,
        out_dir=str(out), deterministic=True, allow_exhaustion=allow_exhaustion,
    )
    wall_s = time.perf_counter() - t0
    return {"out": out, "code": code, "wall_s": wall_s}


@pytest.fixture(scope="session")
def run_link1(tmp_path_factory) -> dict:
    """Single-episode mitigation: attack on link1, fail over to link2."""
    return _run(tmp_path_factory, "run_link1",
                "reference_topology.json", "attack-link1.json", seed=42)


@pytest.fixture(scope="session")
def run_two_episodes(tmp_path_factory) -> dict:
    """Two-episode mitigation: link1 then link2 attacked, ending on link3."""
    return _run(tmp_path_factory, "run_two",
                "reference_topology.json", "attack-link1-then-link2.json", seed=7)


@pytest.fixture(scope="session")
def run_all_links(tmp_path_factory) -> dict:
    """Every link attacked: the run ends exhausted, in alarm state."""
    return _run(tmp_path_factory, "run_all",
                "reference_topology.json", "attack-all-links.json", seed=11)


@pytest.fixture(scope="session")
def run_steady_link2(tmp_path_factory) -> dict:
    """Reference run with link2 active from the start and no attacks."""
    return _run(tmp_path_factory, "run_steady",
                "reference_topology_link2_first.json", "steadystate-link2.json", seed=42)
