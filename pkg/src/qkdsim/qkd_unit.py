"""Paired QKD unit emulation: session lifecycle and key-block production.

One object stands for the Alice/Bob pair sharing a session. A session
initializes for a configurable duration, then distills one final key
block per key interval at the channel model's jittered rate. A sampled
error rate at or above the correctable limit aborts the session; losing
the optical circuit drops it to Idle (control-plane action, not attack).
The monitor read-out is the poll target for failure detection: key size
and rate read as zero whenever keys are not being generated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import physics
from .physics import ChannelParams

STATE_IDLE = "Idle"
STATE_INITIALIZING = "Initializing"
STATE_GENERATING = "Generating"
STATE_ABORTED = "Aborted"

_EPS = 1e-9


@dataclass(frozen=True)
class KeyBlock:
    sequence_no: int
    size_bits: int
    produced_at: float


class QkdUnitPair:
    """State machine advanced by the simulation owner via tick().

    rng is a caller-owned numpy Generator; each session consumes one
    uniform draw (init-duration jitter) followed by two normal draws per
    key interval (QBER then SKR, inside physics.sample), so the draw
    order is a pure function of the event timeline.
    """

    def __init__(self, rng, init_time_s: float = 120.0, key_interval_s: float = 60.0,
                 init_jitter_frac: float = 0.03):
        if init_time_s <= 0 or key_interval_s <= 0:
            raise ValueError("init_time_s and key_interval_s must be positive")
        if not 0.0 <= init_jitter_frac < 1.0:
            raise ValueError("init_jitter_frac must be in [0, 1)")
        self.rng = rng
        self.init_time_s = init_time_s
        self.key_interval_s = key_interval_s
        self.init_jitter_frac = init_jitter_frac
        self.state = STATE_IDLE
        self._now = 0.0
        self._init_remaining = 0.0
        self._interval_elapsed = 0.0
        self._sequence = 0
        self._last_skr = 0.0
        self._last_qber = 0.0
        self._last_key_bits = 0

    def start_session(self, channel: ChannelParams, now: float):
        """Begin (re-)initialization; caller guarantees a complete circuit."""
        if channel is None:
            raise ValueError("start_session requires an established channel")
        if now < self._now - _EPS:
            raise ValueError("session start before the unit's current time")
        self._now = max(self._now, now)
        jitter = 1.0 + self.init_jitter_frac * (2.0 * self.rng.random() - 1.0)
        self._init_remaining = self.init_time_s * jitter
        self._interval_elapsed = 0.0
        self._sequence = 0
        self._last_skr = 0.0
        self._last_qber = 0.0
        self._last_key_bits = 0
        self.state = STATE_INITIALIZING

    def tick(self, dt: float, active_channel, attack_power_dbm: float) -> list[KeyBlock]:
        """Advance dt seconds under the given circuit/attack conditions."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        if active_channel is None:
            self._now += dt
            self._to_idle()
            return []
        produced: list[KeyBlock] = []
        remaining = dt
        while remaining > _EPS:
            if self.state == STATE_INITIALIZING:
                step = min(remaining, self._init_remaining)
                self._init_remaining -= step
                self._now += step
                remaining -= step
                if self._init_remaining <= _EPS:
                    self.state = STATE_GENERATING
                    self._interval_elapsed = 0.0
            elif self.state == STATE_GENERATING:
                step = min(remaining, self.key_interval_s - self._interval_elapsed)
                self._interval_elapsed += step
                self._now += step
                remaining -= step
                if self._interval_elapsed >= self.key_interval_s - _EPS:
                    self._interval_elapsed = 0.0
                    block = self._distill(active_channel, attack_power_dbm)
                    if block is not None:
                        produced.append(block)
            else:  # Idle or Aborted: time passes, nothing happens
                self._now += remaining
                remaining = 0.0
        return produced

    def read_monitor(self, now: float) -> dict:
        """Side-effect-free monitoring read-out in the wire schema."""
        generating = self.state == STATE_GENERATING
        return {
            "timestamp": round(now, 6),
            "skr_bps": self._last_skr if generating else 0.0,
            "qber": self._last_qber if self.state != STATE_IDLE else 0.0,
            "last_key_size_bits": self._last_key_bits if generating else 0,
            "state": self.state,
        }

    # -- internals ---------------------------------------------------------

    def _distill(self, channel: ChannelParams, attack_power_dbm: float):
        sample = physics.sample(channel, attack_power_dbm, self.rng)
        self._last_qber = sample.qber
        self._last_skr = sample.skr_bps
        if sample.qber >= physics.abort_qber(channel.ec_efficiency):
            self.state = STATE_ABORTED
            self._last_key_bits = 0
            return None
        bits = int(round(sample.skr_bps * self.key_interval_s))
        self._last_key_bits = bits
        if bits <= 0:
            return None
        self._sequence += 1
        return KeyBlock(sequence_no=self._sequence, size_bits=bits, produced_at=self._now)

    def _to_idle(self):
        self.state = STATE_IDLE
        self._init_remaining = 0.0
        self._interval_elapsed = 0.0
        self._last_skr = 0.0
        self._last_qber = 0.0
        self._last_key_bits = 0


class MonitorAgent:
    """Line-oriented monitor protocol over one unit pair.

    The socket transport and the in-process client both produce readings
    through here, so the serialized schema is identical in either mode.
    """

    def __init__(self, unit: QkdUnitPair, clock):
        self.unit = unit
        self.clock = clock

    def process_line(self, line: str) -> str:
        request = json.loads(line)
        if request.get("op") != "read_monitor":
            raise ValueError(f"unknown monitor op {request.get('op')!r}")
        reading = self.unit.read_monitor(self.clock.now())
        return json.dumps(reading, separators=(",", ":")) + "\n"
