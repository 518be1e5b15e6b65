"""Post-run reporting: steady-state statistics, episode timing, checks.

Operates purely on the files a run leaves behind (metrics.csv,
timing.csv, the monitor event log, run_info.json), so it can be re-run
long after the simulation. Steady-state windows span from each
re-initialization (plus the detection grace period) to the next
detection or the end of the run; acceptance thresholds live in a JSON
file so the expected bands are reviewable data rather than code.
"""

from __future__ import annotations

import json
import os
import time
from statistics import fmean, pstdev
from typing import Optional


def load_metrics(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            row = dict(zip(header, parts))
            rows.append({
                "t": float(row["t"]),
                "active_path": row["active_path"],
                "skr_bps": float(row["skr_bps"]),
                "qber": float(row["qber"]),
                "qpm_state": row["qpm_state"],
            })
    return rows


def load_timing(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            row = dict(zip(header, parts))
            rows.append({
                "episode": int(row["episode"]),
                "detect_s": float(row["detect_s"]),
                "controller_s": float(row["controller_s"]),
                "reinit_s": float(row["reinit_s"]),
                "total_s": float(row["total_s"]),
            })
    return rows


def load_events(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def steady_windows(events: list[dict], grace_s: float, duration_s: float) -> list[dict]:
    """Windows of undisturbed operation between re-init and next detection."""
    detections = [ev["t"] for ev in events if ev["kind"] == "DETECTED"]
    windows = []
    for ev in events:
        if ev["kind"] != "REINIT_DONE":
            continue
        start = ev["t"] + grace_s
        later = [d for d in detections if d >= ev["t"]]
        end = min(later) if later else duration_s
        windows.append({"path": ev["path"], "start": start, "end": end})
    return windows


def window_stats(window: dict, metrics: list[dict]) -> dict:
    rows = [r for r in metrics if window["start"] <= r["t"] < window["end"]]
    stats = dict(window)
    stats["n"] = len(rows)
    if rows:
        skrs = [r["skr_bps"] for r in rows]
        qbers = [r["qber"] for r in rows]
        stats.update(
            skr_mean=fmean(skrs), skr_std=pstdev(skrs),
            qber_mean=fmean(qbers), qber_std=pstdev(qbers),
        )
    return stats


def summarize(out_dir: str, thresholds_path: Optional[str] = None,
              include_timestamp: bool = False) -> tuple[str, bool]:
    """Render the run summary; the flag reports whether all checks passed."""
    with open(os.path.join(out_dir, "run_info.json"), "r", encoding="utf-8") as fh:
        info = json.load(fh)
    metrics = load_metrics(os.path.join(out_dir, "metrics.csv"))
    timing = load_timing(os.path.join(out_dir, "timing.csv"))
    qpm_log = info["qpm_log"]
    if not os.path.isabs(qpm_log):
        qpm_log = os.path.join(out_dir, qpm_log)
    events = load_events(qpm_log)
    windows = [
        window_stats(w, metrics)
        for w in steady_windows(events, info["init_grace_s"], info["duration_s"])
    ]

    lines = ["run summary"]
    if include_timestamp:
        lines.append("generated " + time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    lines.append(
        f"topology: {info['topology']}  scenario: {info['scenario']}  "
        f"seed={info['seed']}  duration_s={info['duration_s']}"
    )
    first_init = info.get("first_init_s")
    lines.append(
        f"first_init_s={first_init}  episodes={info['episodes']}  "
        f"exhausted={str(info['exhausted']).lower()}  "
        f"final_active_path={info['final_active_path']}"
    )

    lines.append("")
    lines.append(f"steady-state windows (first {info['init_grace_s']}s after "
                 "each re-init excluded)")
    if not windows:
        lines.append("  none")
    for i, w in enumerate(windows, start=1):
        if w["n"] == 0:
            lines.append(
                f"  window {i}: path={w['path']} "
                f"t=[{w['start']:.1f},{w['end']:.1f}) SKIPPED (no samples)"
            )
        else:
            lines.append(
                f"  window {i}: path={w['path']} t=[{w['start']:.1f},{w['end']:.1f}) "
                f"n={w['n']} skr_mean={w['skr_mean']:.3f} skr_std={w['skr_std']:.3f} "
                f"qber_mean={w['qber_mean']:.6f} qber_std={w['qber_std']:.6f}"
            )

    lines.append("")
    lines.append("mitigation episodes")
    if not timing:
        lines.append("  none")
    for row in timing:
        ratio = (row["controller_s"] / row["reinit_s"]) if row["reinit_s"] > 0 else float("inf")
        lines.append(
            f"  episode {row['episode']}: detect_s={row['detect_s']:.3f} "
            f"controller_s={row['controller_s']:.3f} reinit_s={row['reinit_s']:.3f} "
            f"total_s={row['total_s']:.3f} controller/reinit={ratio:.6f}"
        )

    all_pass = True
    if thresholds_path is not None:
        with open(thresholds_path, "r", encoding="utf-8") as fh:
            thresholds = json.load(fh)
        lines.append("")
        lines.append("acceptance checks")
        check_lines, all_pass = _checks(thresholds, windows, timing, first_init)
        lines.extend("  " + line for line in check_lines)

    return "\n".join(lines) + "\n", all_pass


def _checks(thresholds: dict, windows: list[dict], timing: list[dict],
            first_init_s: Optional[float]) -> tuple[list[str], bool]:
    lines: list[str] = []
    all_pass = True

    def verdict(ok: bool) -> str:
        nonlocal all_pass
        if not ok:
            all_pass = False
        return "PASS" if ok else "FAIL"

    populated = [(i, w) for i, w in enumerate(windows, start=1) if w["n"] > 0]
    if "steady_state_skr_bps" in thresholds or "steady_state_qber" in thresholds:
        if not populated:
            lines.append("SKIPPED steady_state checks: no populated window")
        else:
            index, final = populated[-1]
            if "steady_state_skr_bps" in thresholds:
                lo, hi = thresholds["steady_state_skr_bps"]
                ok = lo <= final["skr_mean"] <= hi
                lines.append(
                    f"{verdict(ok)} steady_state_skr_bps window={index} "
                    f"mean={final['skr_mean']:.3f} in [{lo},{hi}]"
                )
            if "steady_state_qber" in thresholds:
                lo, hi = thresholds["steady_state_qber"]
                ok = lo <= final["qber_mean"] <= hi
                lines.append(
                    f"{verdict(ok)} steady_state_qber window={index} "
                    f"mean={final['qber_mean']:.6f} in [{lo},{hi}]"
                )

    if "controller_reinit_ratio_max" in thresholds:
        limit = thresholds["controller_reinit_ratio_max"]
        if not timing:
            lines.append("SKIPPED controller_reinit_ratio: no episodes")
        for row in timing:
            ratio = (row["controller_s"] / row["reinit_s"]) if row["reinit_s"] > 0 else float("inf")
            ok = ratio < limit
            lines.append(
                f"{verdict(ok)} controller_reinit_ratio episode={row['episode']} "
                f"ratio={ratio:.6f} < {limit}"
            )

    if "reinit_parity_frac_max" in thresholds:
        limit = thresholds["reinit_parity_frac_max"]
        if not timing or first_init_s is None:
            lines.append("SKIPPED reinit_parity: no episodes or no first init")
        else:
            for row in timing:
                frac = abs(row["reinit_s"] - first_init_s) / first_init_s
                ok = frac <= limit
                lines.append(
                    f"{verdict(ok)} reinit_parity episode={row['episode']} "
                    f"frac={frac:.6f} <= {limit}"
                )

    return lines, all_pass


def render_summary(out_dir: str, thresholds_path: Optional[str] = None,
                   include_timestamp: bool = False) -> str:
    text, _ = summarize(out_dir, thresholds_path, include_timestamp)
    return text
