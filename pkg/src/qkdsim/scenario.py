"""Scenario runner: timed attack injection over the full simulated stack.

One run wires together the switches, controller, QKD unit pair, and
monitor under a single simulated clock, injects attacker-power changes
at scripted times, and records poll-cadence metrics plus the monitor and
controller event logs. Everything observable is written to plain files
with fixed formatting so identical inputs and seed reproduce identical
bytes.

The unit pair is advanced lazily: whenever any component needs current
state (a poll, an attack change, a metrics sample), the runner ticks the
units over the elapsed interval under the circuit and attack power that
held during it. Key-block boundaries therefore land at exact simulated
times and random draws occur in timeline order no matter which event
triggered the tick.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .clock import Scheduler, SimClock
from .controller import (
    InProcessSwitchLink,
    LocalControllerClient,
    Northbound,
    SdnController,
)
from .physics import ATTACK_OFF, qber, skr
from .qkd_unit import QkdUnitPair
from .qpm import DETECTED, EXHAUSTED, RECONFIG_DONE, REINIT_DONE, Qpm, QpmConfig
from .switch import OpticalSwitch
from .topology import Topology, load_topology, resolve_active_path

PRIORITY_ATTACK = 0
PRIORITY_QPM = Qpm.PRIORITY
PRIORITY_METRICS = 3

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EXHAUSTED = 3


class ScenarioError(ValueError):
    """Malformed scenario file or inconsistent run inputs."""


@dataclass(frozen=True)
class ScenarioEvent:
    t: float
    link_id: str
    attack_power_dbm: float  # ATTACK_OFF when the attacker turns off


@dataclass(frozen=True)
class Scenario:
    duration_s: float
    events: tuple[ScenarioEvent, ...]


def load_scenario(file_path: str) -> Scenario:
    with open(file_path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"cannot parse {file_path}: {exc}") from exc
    duration = data.get("duration_s")
    if not isinstance(duration, (int, float)) or duration <= 0:
        raise ScenarioError("duration_s must be a positive number")
    events = []
    seen: set[tuple[float, str]] = set()
    last_t = -1.0
    for entry in data.get("events", []):
        t = entry.get("t")
        link = entry.get("link")
        power = entry.get("attack_power_dbm")
        if not isinstance(t, (int, float)) or t < 0:
            raise ScenarioError(f"event time must be a non-negative number, got {t!r}")
        if not isinstance(link, str):
            raise ScenarioError("event link must be a string")
        if power == "off":
            power_dbm = ATTACK_OFF
        elif isinstance(power, (int, float)):
            power_dbm = float(power)
        else:
            raise ScenarioError(
                f"attack_power_dbm must be a number or \"off\", got {power!r}")
        if t < last_t:
            raise ScenarioError("events must be sorted by t")
        if (float(t), link) in seen:
            raise ScenarioError(f"duplicate event for link {link!r} at t={t}")
        seen.add((float(t), link))
        last_t = float(t)
        events.append(ScenarioEvent(t=float(t), link_id=link, attack_power_dbm=power_dbm))
    return Scenario(duration_s=float(duration), events=tuple(events))


class LocalQkdClient:
    """In-process monitor/session access for the QPM, kept time-consistent."""

    def __init__(self, run: "ScenarioRun"):
        self.run = run

    def read_monitor(self) -> dict:
        self.run.sync_unit()
        return self.run.unit.read_monitor(self.run.clock.now())

    def start_session(self):
        self.run.sync_unit()
        _, channel, _ = self.run.current_circuit()
        if channel is None:
            raise RuntimeError("start_session with no established circuit")
        self.run.unit.start_session(channel, self.run.clock.now())


class ScenarioRun:
    """State of one deterministic simulated run."""

    def __init__(self, topology: Topology, scenario: Scenario, seed: int,
                 qpm_config: Optional[QpmConfig] = None,
                 link_latency_s: float = 0.002,
                 init_time_s: float = 120.0,
                 key_interval_s: float = 60.0):
        known_links = {link.link_id for link in topology.links}
        for event in scenario.events:
            if event.link_id not in known_links:
                raise ScenarioError(f"scenario references unknown link '{event.link_id}'")
        self.topology = topology
        self.scenario = scenario
        self.seed = seed
        self.clock = SimClock()
        self.scheduler = Scheduler(self.clock)
        self.rng = np.random.default_rng(seed)
        self.unit = QkdUnitPair(self.rng, init_time_s=init_time_s,
                                key_interval_s=key_interval_s)
        self.switches = {
            sid: OpticalSwitch(sid, ports) for sid, ports in topology.switches.items()
        }
        self.links = {
            sid: InProcessSwitchLink(sw, self.clock, latency_s=link_latency_s)
            for sid, sw in self.switches.items()
        }
        self.controller_records: list[dict] = []
        self.controller = SdnController(
            topology, self.links, self.clock, log=self.controller_records.append)
        self.northbound = Northbound(self.controller)
        self.controller_client = LocalControllerClient(
            self.northbound, self.clock, latency_s=link_latency_s)
        self.qpm = Qpm(qpm_config or QpmConfig(), topology,
                       self.controller_client, LocalQkdClient(self),
                       self.clock, self.scheduler)
        self.attack_powers = {link.link_id: ATTACK_OFF for link in topology.links}
        self.metrics_rows: list[str] = []
        self._last_sync = 0.0

    # -- time-consistent unit state -------------------------------------------

    def current_circuit(self):
        states = {sid: sw.query_entries() for sid, sw in self.switches.items()}
        path_id = resolve_active_path(self.topology, states)
        if path_id is None:
            return None, None, ATTACK_OFF
        link = self.topology.link_for_path(path_id)
        return path_id, link.channel, self.attack_powers[link.link_id]

    def sync_unit(self):
        now = self.clock.now()
        dt = now - self._last_sync
        if dt > 1e-12:
            _, channel, power = self.current_circuit()
            self.unit.tick(dt, channel, power)
            self._last_sync = now

    # -- scheduled handlers -----------------------------------------------------

    def _apply_attack(self, event: ScenarioEvent):
        self.sync_unit()
        self.attack_powers[event.link_id] = event.attack_power_dbm

    def _sample_metrics(self, t: float):
        self.sync_unit()
        path_id, _, _ = self.current_circuit()
        reading = self.unit.read_monitor(self.clock.now())
        powers = ",".join(
            f"{self.attack_powers[link.link_id]:.2f}" for link in self.topology.links
        )
        self.metrics_rows.append(
            f"{t:.1f},{path_id or 'none'},{reading['skr_bps']:.6f},"
            f"{reading['qber']:.6f},{powers},{self.qpm.mode}"
        )

    # -- execution ---------------------------------------------------------------

    def execute(self):
        for event in self.scenario.events:
            self.scheduler.at(event.t, lambda ev=event: self._apply_attack(ev),
                              priority=PRIORITY_ATTACK)
        self.scheduler.at(0.0, lambda: self.qpm.startup(0.0), priority=PRIORITY_QPM)
        period = self.qpm.config.poll_period_s
        n_samples = int(self.scenario.duration_s // period)
        for k in range(n_samples + 1):
            t = k * period
            if t <= self.scenario.duration_s:
                self.scheduler.at(t, lambda st=t: self._sample_metrics(st),
                                  priority=PRIORITY_METRICS)
        self.scheduler.run_until(self.scenario.duration_s)


def extract_episodes(events) -> tuple[Optional[float], list[dict]]:
    """Split the monitor event stream into first-init and mitigation episodes.

    Returns (first_init_s, episodes); first_init_s is the startup
    provisioning-to-keys duration, episodes are dicts with t_detected /
    t_reconfig_done / t_reinit_done for every completed mitigation.
    """
    first_reconfig_done = None
    first_init_s = None
    episodes: list[dict] = []
    current: Optional[dict] = None
    for event in events:
        if event.kind == DETECTED:
            current = {"t_detected": event.t, "path": None}
        elif event.kind == RECONFIG_DONE:
            if current is not None and "t_reconfig_done" not in current:
                current["t_reconfig_done"] = event.t
                current["path"] = event.path
            elif current is None and first_reconfig_done is None:
                first_reconfig_done = event.t
        elif event.kind == REINIT_DONE:
            if current is not None and "t_reconfig_done" in current:
                current["t_reinit_done"] = event.t
                episodes.append(current)
                current = None
            elif first_reconfig_done is not None and first_init_s is None:
                first_init_s = event.t - first_reconfig_done
    return first_init_s, episodes


def timing_rows(episodes: list[dict], scenario: Scenario) -> list[str]:
    """timing.csv rows: per-episode breakdown anchored at attack onset."""
    rows = []
    onsets = [ev.t for ev in scenario.events if ev.attack_power_dbm != ATTACK_OFF]
    for index, ep in enumerate(episodes, start=1):
        candidates = [t for t in onsets if t <= ep["t_detected"]]
        onset = max(candidates) if candidates else ep["t_detected"]
        detect_s = ep["t_detected"] - onset
        controller_s = ep["t_reconfig_done"] - ep["t_detected"]
        reinit_s = ep["t_reinit_done"] - ep["t_reconfig_done"]
        total_s = ep["t_reinit_done"] - onset
        rows.append(
            f"{index},{detect_s:.6f},{controller_s:.6f},{reinit_s:.6f},{total_s:.6f}"
        )
    return rows


def run_scenario(topology_file: str, scenario_file: str, seed: int, out_dir: str,
                 deterministic: bool = False, allow_exhaustion: bool = False,
                 qpm_log_path: Optional[str] = None,
                 qpm_config: Optional[QpmConfig] = None) -> int:
    """Run one scenario end to end and write all artifacts into out_dir."""
    topology = load_topology(topology_file)
    scenario = load_scenario(scenario_file)
    run = ScenarioRun(topology, scenario, seed, qpm_config=qpm_config)
    run.execute()

    os.makedirs(out_dir, exist_ok=True)
    qpm_log = qpm_log_path or os.path.join(out_dir, "qpm_log.ndjson")

    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="utf-8", newline="") as fh:
        header_links = ",".join(
            f"attack_{link.link_id}_dbm" for link in topology.links)
        fh.write(f"t,active_path,skr_bps,qber,{header_links},qpm_state\n")
        for row in run.metrics_rows:
            fh.write(row + "\n")

    with open(qpm_log, "w", encoding="utf-8", newline="") as fh:
        for event in run.qpm.events:
            fh.write(json.dumps(event.to_dict(), separators=(",", ":")) + "\n")

    with open(os.path.join(out_dir, "controller_log.ndjson"), "w",
              encoding="utf-8", newline="") as fh:
        for record in run.controller_records:
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")

    first_init_s, episodes = extract_episodes(run.qpm.events)
    with open(os.path.join(out_dir, "timing.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("episode,detect_s,controller_s,reinit_s,total_s\n")
        for row in timing_rows(episodes, scenario):
            fh.write(row + "\n")

    exhausted = any(ev.kind == EXHAUSTED for ev in run.qpm.events)
    # Reference the log relative to out_dir when it lives inside, so the
    # recorded metadata does not depend on where the run directory sits.
    qpm_log_ref = qpm_log
    if os.path.dirname(os.path.abspath(qpm_log)) == os.path.abspath(out_dir):
        qpm_log_ref = os.path.basename(qpm_log)
    info = {
        "topology": topology_file,
        "scenario": scenario_file,
        "seed": seed,
        "duration_s": scenario.duration_s,
        "deterministic": deterministic,
        "qpm_log": qpm_log_ref,
        "poll_period_s": run.qpm.config.poll_period_s,
        "init_grace_s": run.qpm.config.init_grace_s,
        "first_init_s": round(first_init_s, 6) if first_init_s is not None else None,
        "episodes": len(episodes),
        "exhausted": exhausted,
        "final_active_path": run.qpm.active_path,
        "final_qpm_mode": run.qpm.mode,
    }
    if not deterministic:
        info["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    with open(os.path.join(out_dir, "run_info.json"), "w", encoding="utf-8", newline="") as fh:
        json.dump(info, fh, indent=2)
        fh.write("\n")

    from .report import render_summary
    summary = render_summary(out_dir, thresholds_path=None,
                             include_timestamp=not deterministic)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8", newline="") as fh:
        fh.write(summary)

    if exhausted and not allow_exhaustion:
        return EXIT_EXHAUSTED
    return EXIT_OK


def sweep_attack_power(topology_file: str, link_id: str,
                       start_dbm: float, end_dbm: float, step_db: float,
                       out_dir: str) -> int:
    """Evaluate the calibrated model means over a power grid (no simulation)."""
    topology = load_topology(topology_file)
    try:
        link = topology.link(link_id)
    except KeyError:
        raise ScenarioError(f"unknown link '{link_id}'") from None
    if step_db <= 0:
        raise ScenarioError("step_db must be positive")
    if end_dbm < start_dbm:
        raise ScenarioError("end_dbm must be >= start_dbm")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "sweep.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("power_dbm,skr_bps,qber\n")
        k = 0
        while True:
            power = start_dbm + k * step_db
            if power > end_dbm + 1e-9:
                break
            fh.write(f"{power:.2f},{skr(link.channel, power):.6f},"
                     f"{qber(link.channel, power):.6f}\n")
            k += 1
    return EXIT_OK
