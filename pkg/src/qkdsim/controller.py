"""SDN controller: northbound reconfiguration API over southbound flow-mods.

A reconfiguration names an optional path to tear down and a path to set
up. The controller translates both into per-switch flow-mods under one
global ascending transaction-id sequence, stages everything, then
commits with one barrier per affected switch, leaving the switch nearest
the Alice QKD unit for last. Staging before any commit plus the
Alice-last order is what keeps the fabric from ever exposing two
complete paths (or a half-built one) to an observer.

On any staging failure the controller reverses its own staged mods and
commits the net-zero batch, so a failed request leaves neither committed
changes nor staged residue behind.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

from .switch import (
    CMD_ADD,
    CMD_DELETE,
    OpticalSwitch,
    STATUS_STAGED,
)
from .topology import Topology

OUTCOME_SUCCESS = "SUCCESS"
OUTCOME_FAILED = "FAILED"


class SwitchDisconnected(ConnectionError):
    """Southbound link to a switch is down."""


@dataclass
class ReconfigRequest:
    request_id: str
    tear_down: Optional[str]
    set_up: str


@dataclass
class TransactionRecord:
    xid: int
    switch: str
    command: str
    in_port: int
    out_port: int
    status: str = "PENDING"  # PENDING | ACKED | FAILED

    def to_dict(self) -> dict:
        return {
            "xid": self.xid,
            "switch": self.switch,
            "command": self.command,
            "in_port": self.in_port,
            "out_port": self.out_port,
            "status": self.status,
        }


@dataclass
class ReconfigReport:
    request_id: str
    outcome: str
    transactions: list[TransactionRecord] = field(default_factory=list)
    barrier_xids: list[int] = field(default_factory=list)
    started_at: float = 0.0
    completed_at: float = 0.0
    error: Optional[str] = None

    @property
    def duration_ms(self) -> float:
        return (self.completed_at - self.started_at) * 1000.0

    def to_http_body(self) -> dict:
        return {
            "request_id": self.request_id,
            "outcome": self.outcome,
            "transactions": [
                {"xid": t.xid, "switch": t.switch, "status": t.status}
                for t in self.transactions
            ],
            "duration_ms": self.duration_ms,
        }


class InProcessSwitchLink:
    """Deterministic southbound transport to one in-process switch.

    Each direction of every exchange advances the simulated clock by
    latency_s, which is how controller time becomes measurable (and
    small) in simulated runs.
    """

    def __init__(self, switch: OpticalSwitch, clock, latency_s: float = 0.002):
        self.switch = switch
        self.clock = clock
        self.latency_s = latency_s
        self.connected = True

    def send(self, msg: dict) -> dict:
        if not self.connected:
            raise SwitchDisconnected(self.switch.switch_id)
        self.clock.advance(self.latency_s)
        reply = self.switch.handle_message(msg)
        self.clock.advance(self.latency_s)
        return reply


class SdnController:
    """Serialized reconfiguration engine over a set of switch links."""

    def __init__(self, topology: Topology, switch_links: dict, clock,
                 log: Optional[Callable[[dict], None]] = None):
        self.topology = topology
        self.switch_links = switch_links
        self.clock = clock
        self.log = log
        self.active_path: Optional[str] = None
        self._xid = 0
        self._xid_lock = threading.Lock()
        self._serial = threading.Lock()

    def next_xid(self) -> int:
        with self._xid_lock:
            self._xid += 1
            return self._xid

    def handle_reconfigure(self, request: ReconfigRequest) -> ReconfigReport:
        with self._serial:
            report = self._execute(request)
        if self.log is not None:
            self.log({
                "t_start": round(report.started_at, 6),
                "t_end": round(report.completed_at, 6),
                "request_id": report.request_id,
                "tear_down": request.tear_down,
                "set_up": request.set_up,
                "outcome": report.outcome,
                "error": report.error,
                "barrier_xids": report.barrier_xids,
                "transactions": [t.to_dict() for t in report.transactions],
            })
        return report

    # -- internals ---------------------------------------------------------

    def _execute(self, request: ReconfigRequest) -> ReconfigReport:
        report = ReconfigReport(
            request_id=request.request_id,
            outcome=OUTCOME_SUCCESS,
            started_at=self.clock.now(),
        )
        plan: list[tuple[str, str, int, int]] = []
        if request.tear_down is not None:
            for cc in self.topology.path(request.tear_down).cross_connects:
                plan.append((cc.switch, CMD_DELETE, cc.in_port, cc.out_port))
        for cc in self.topology.path(request.set_up).cross_connects:
            plan.append((cc.switch, CMD_ADD, cc.in_port, cc.out_port))

        staged: list[tuple[str, str, int, int]] = []
        for switch_id, command, in_port, out_port in plan:
            xid = self.next_xid()
            record = TransactionRecord(xid, switch_id, command, in_port, out_port)
            report.transactions.append(record)
            try:
                ack = self._send(switch_id, {
                    "type": "FLOW_MOD", "xid": xid, "command": command,
                    "in_port": in_port, "out_port": out_port,
                })
            except SwitchDisconnected:
                record.status = "FAILED"
                report.outcome = OUTCOME_FAILED
                report.error = f"switch {switch_id} disconnected"
                break
            if ack.get("xid") == xid and ack.get("status") == STATUS_STAGED:
                record.status = "ACKED"
                staged.append((switch_id, command, in_port, out_port))
            else:
                record.status = "FAILED"
                report.outcome = OUTCOME_FAILED
                report.error = f"xid {xid} on {switch_id}: {ack.get('status')}"
                break

        committed: set[str] = set()
        if report.outcome == OUTCOME_SUCCESS:
            for switch_id in self._commit_order(plan):
                expected = [t.xid for t in report.transactions
                            if t.switch == switch_id and t.status == "ACKED"]
                xid = self.next_xid()
                try:
                    reply = self._send(switch_id, {"type": "BARRIER_REQUEST", "xid": xid})
                except SwitchDisconnected:
                    report.outcome = OUTCOME_FAILED
                    report.error = f"switch {switch_id} disconnected at barrier"
                    break
                report.barrier_xids.append(xid)
                if reply.get("committed_xids") != expected:
                    report.outcome = OUTCOME_FAILED
                    report.error = f"barrier on {switch_id} committed unexpected xids"
                    break
                committed.add(switch_id)

        if report.outcome == OUTCOME_FAILED:
            self._compensate(report, staged, committed)
        else:
            self.active_path = request.set_up
        report.completed_at = self.clock.now()
        return report

    def _commit_order(self, plan) -> list[str]:
        """Affected switches in first-touched order, Alice-side switch last."""
        order: list[str] = []
        for switch_id, _, _, _ in plan:
            if switch_id not in order:
                order.append(switch_id)
        alice_switch = self.topology.alice_port[0]
        if alice_switch in order:
            order.remove(alice_switch)
            order.append(alice_switch)
        return order

    def _compensate(self, report: ReconfigReport, staged, committed: set[str]):
        """Reverse staged-but-uncommitted mods and flush them with a barrier."""
        touched: list[str] = []
        for switch_id, command, in_port, out_port in reversed(staged):
            if switch_id in committed:
                continue
            reverse = CMD_DELETE if command == CMD_ADD else CMD_ADD
            xid = self.next_xid()
            record = TransactionRecord(xid, switch_id, reverse, in_port, out_port)
            report.transactions.append(record)
            try:
                ack = self._send(switch_id, {
                    "type": "FLOW_MOD", "xid": xid, "command": reverse,
                    "in_port": in_port, "out_port": out_port,
                })
                record.status = "ACKED" if ack.get("status") == STATUS_STAGED else "FAILED"
            except SwitchDisconnected:
                record.status = "FAILED"
                continue
            if switch_id not in touched:
                touched.append(switch_id)
        for switch_id in touched:
            xid = self.next_xid()
            try:
                self._send(switch_id, {"type": "BARRIER_REQUEST", "xid": xid})
                report.barrier_xids.append(xid)
            except SwitchDisconnected:
                pass

    def _send(self, switch_id: str, msg: dict) -> dict:
        link = self.switch_links.get(switch_id)
        if link is None:
            raise SwitchDisconnected(switch_id)
        return link.send(msg)


class Northbound:
    """Request-level API: validation, admission control, serialization.

    Shared by the in-process client and the HTTP server so the same
    status codes and body schemas apply on both transports. At most one
    reconfiguration runs at a time; up to queue_depth more may wait.
    """

    def __init__(self, controller: SdnController, queue_depth: int = 16):
        self.controller = controller
        self.queue_depth = queue_depth
        self._admission = threading.Lock()
        self._in_system = 0

    def post_reconfigure(self, body: dict) -> tuple[int, dict]:
        error = self._validate(body)
        if error is not None:
            return 400, {"error": error}
        with self._admission:
            if self._in_system > self.queue_depth:
                return 409, {"error": "reconfiguration queue full"}
            self._in_system += 1
        try:
            request = ReconfigRequest(
                request_id=body["request_id"],
                tear_down=body.get("tear_down"),
                set_up=body["set_up"],
            )
            report = self.controller.handle_reconfigure(request)
        finally:
            with self._admission:
                self._in_system -= 1
        return 200, report.to_http_body()

    def get_paths(self) -> tuple[int, dict]:
        listing = []
        for path in self.controller.topology.paths:
            status = "ACTIVE" if path.path_id == self.controller.active_path else "INACTIVE"
            listing.append({"id": path.path_id, "link": path.link_id, "status": status})
        return 200, {"paths": listing}

    def _validate(self, body: dict) -> Optional[str]:
        if not isinstance(body, dict):
            return "body must be an object"
        request_id = body.get("request_id")
        if not isinstance(request_id, str) or not request_id:
            return "request_id must be a non-empty string"
        known = set(self.controller.topology.path_ids())
        set_up = body.get("set_up")
        if set_up not in known:
            return f"set_up references unknown path {set_up!r}"
        tear_down = body.get("tear_down")
        if tear_down is not None and tear_down not in known:
            return f"tear_down references unknown path {tear_down!r}"
        return None


class LocalControllerClient:
    """In-process northbound client with deterministic request latency."""

    def __init__(self, northbound: Northbound, clock, latency_s: float = 0.002):
        self.northbound = northbound
        self.clock = clock
        self.latency_s = latency_s

    def post_reconfigure(self, body: dict) -> tuple[int, dict]:
        self.clock.advance(self.latency_s)
        status, resp = self.northbound.post_reconfigure(body)
        self.clock.advance(self.latency_s)
        return status, resp

    def get_paths(self) -> tuple[int, dict]:
        self.clock.advance(self.latency_s)
        status, resp = self.northbound.get_paths()
        self.clock.advance(self.latency_s)
        return status, resp
