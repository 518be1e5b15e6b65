"""Summary reporting: steady windows, stats, threshold checks."""

from __future__ import annotations

import json
import statistics

import pytest

from qkdsim.report import (
    load_events,
    load_metrics,
    load_timing,
    render_summary,
    steady_windows,
    summarize,
    window_stats,
)


def ev(t, kind, path="link1"):
    return {"t": t, "kind": kind, "path": path, "detail": ""}


class TestSteadyWindows:
    def test_window_per_reinit_bounded_by_next_detection(self):
        events = [
            ev(0.02, "RECONFIG_DONE"),
            ev(122.0, "REINIT_DONE"),
            ev(600.0, "DETECTED"),
            ev(600.03, "RECONFIG_DONE", "link2"),
            ev(719.0, "REINIT_DONE", "link2"),
        ]
        windows = steady_windows(events, grace_s=240.0, duration_s=12600.0)
        assert windows == [
            {"path": "link1", "start": 362.0, "end": 600.0},
            {"path": "link2", "start": 959.0, "end": 12600.0},
        ]

    def test_no_detection_extends_to_duration(self):
        windows = steady_windows([ev(120.0, "REINIT_DONE")], 240.0, 600.0)
        assert windows == [{"path": "link1", "start": 360.0, "end": 600.0}]

    def test_no_reinit_no_windows(self):
        assert steady_windows([ev(0.0, "RECONFIG_DONE")], 240.0, 600.0) == []


class TestWindowStats:
    def test_means_and_stds_match_statistics(self):
        metrics = [
            {"t": float(t), "skr_bps": 900.0 + t, "qber": 0.02 + t / 1e5}
            for t in range(0, 600, 60)
        ]
        window = {"path": "p", "start": 120.0, "end": 360.0}
        stats = window_stats(window, metrics)
        in_rows = [r for r in metrics if 120.0 <= r["t"] < 360.0]
        assert stats["n"] == 4
        assert stats["skr_mean"] == statistics.fmean(r["skr_bps"] for r in in_rows)
        assert stats["skr_std"] == statistics.pstdev([r["skr_bps"] for r in in_rows])
        assert stats["qber_mean"] == statistics.fmean(r["qber"] for r in in_rows)

    def test_empty_window(self):
        stats = window_stats({"path": "p", "start": 0.0, "end": 1.0}, [])
        assert stats["n"] == 0
        assert "skr_mean" not in stats


class TestLoadersAndSummary:
    def test_loaders_round_trip_real_artifacts(self, run_link1):
        out = run_link1["out"]
        metrics = load_metrics(str(out / "metrics.csv"))
        assert metrics[0]["t"] == 0.0
        assert metrics[-1]["t"] == 12600.0
        assert all(set(r) == {"t", "active_path", "skr_bps", "qber", "qpm_state"}
                   for r in metrics)
        timing = load_timing(str(out / "timing.csv"))
        assert len(timing) == 1 and timing[0]["episode"] == 1
        events = load_events(str(out / "qpm_log.ndjson"))
        assert events[0]["kind"] == "RECONFIG_SENT"

    def test_summary_passes_bundled_thresholds(self, run_link1, configs):
        text, all_pass = summarize(str(run_link1["out"]),
                                   thresholds_path=str(configs / "thresholds.json"))
        assert all_pass
        assert "acceptance checks" in text
        assert "FAIL" not in text
        assert text.count("PASS") == 4  # skr, qber, ratio, parity
        assert render_summary(str(run_link1["out"])) == summarize(str(run_link1["out"]))[0]

    def test_failing_thresholds_flip_the_verdict(self, run_link1, tmp_path):
        strict = tmp_path / "strict.json"
        strict.write_text(json.dumps({
            "steady_state_skr_bps": [10000.0, 20000.0],
            "controller_reinit_ratio_max": 1e-9,
        }), encoding="utf-8")
        text, all_pass = summarize(str(run_link1["out"]), thresholds_path=str(strict))
        assert not all_pass
        assert "FAIL steady_state_skr_bps" in text
        assert "FAIL controller_reinit_ratio" in text

    def test_episodeless_run_skips_episode_checks(self, run_steady_link2, configs):
        text, all_pass = summarize(str(run_steady_link2["out"]),
                                   thresholds_path=str(configs / "thresholds.json"))
        assert all_pass  # SKIPPED lines do not fail the run
        assert "SKIPPED controller_reinit_ratio: no episodes" in text
        assert "SKIPPED reinit_parity" in text
        assert "PASS steady_state_skr_bps" in text

    def test_summary_without_thresholds_has_no_checks_section(self, run_link1):
        text, all_pass = summarize(str(run_link1["out"]))
        assert all_pass
        assert "acceptance checks" not in text
        assert "steady-state windows" in text
        assert "mitigation episodes" in text
