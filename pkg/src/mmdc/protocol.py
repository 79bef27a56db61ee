"""Secondary-cell mobility controllers.

``DcController`` runs the dual-connection scheme: two SN legs, immediate
data-path switches between them, and a TTT-guarded handover of one leg only
when both legs sit at or below the SINR threshold. ``BaselineController`` is
the single-leg scheme that hands over to any neighbour beating the serving
cell for a full TTT. Both sit behind the same interface so the run loop does
not care which one it drives.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Literal, NamedTuple, Union

from .channel import LinkClass, LinkReport
from .engine import EventHandle, EventKind, Scheduler
from .network import Mode

Leg = Literal["serving", "idle"]


@dataclass(frozen=True)
class NoAction:
    pass


@dataclass(frozen=True)
class SwitchPath:
    to: int
    forward_buffer: bool


@dataclass(frozen=True)
class StartHandover:
    replace: Leg
    target: int
    duplicate: bool
    forward_buffer: bool


@dataclass(frozen=True)
class FallbackToMn:
    pass


@dataclass(frozen=True)
class Reestablish:
    serving: int
    idle: int | None


ControlAction = Union[NoAction, SwitchPath, StartHandover, FallbackToMn, Reestablish]
NONE = NoAction()


class LegReports(NamedTuple):
    serving: LinkReport
    idle: LinkReport


class Target(NamedTuple):
    sn_id: int
    sinr_db: float


class Targets(NamedTuple):
    serving_target: Target | None
    idle_target: Target | None


@dataclass
class DcControllerState:
    serving_sn: int
    idle_sn: int
    sinr_th: float = 20.0
    ttt: float = 0.020
    ttt_timer: EventHandle | None = None
    ttt_satisfied: bool = False
    pd_active: bool = False
    candidate_targets: Targets = Targets(None, None)
    mode: Mode = Mode.DUAL
    hysteresis_db: float = 3.0
    forward_on_switch: bool = True


def dc_decide(state: DcControllerState, reports: LegReports, targets: Targets) -> ControlAction:
    """One pass of the dual-connection decision rule at the MN.

    Handover needs both legs at or below threshold for a satisfied TTT, and a
    target above threshold (or any connectable target once both legs are in
    outage). Only the leg on the losing target's carrier is kept.
    """
    if reports is None or reports.serving is None or reports.idle is None:
        raise ValueError("dc_decide needs both leg reports")
    th = state.sinr_th
    s, i = reports.serving.sinr_db, reports.idle.sinr_db
    if s <= th and i <= th:
        if not state.ttt_satisfied:
            return NONE
        st = targets.serving_target.sinr_db if targets.serving_target else -math.inf
        it = targets.idle_target.sinr_db if targets.idle_target else -math.inf
        if st <= it:
            replace: Leg = "idle"
            chosen = targets.idle_target
        else:
            replace = "serving"
            chosen = targets.serving_target
        if chosen is None:
            return NONE
        both_out = (reports.serving.link_class is LinkClass.OUTAGE
                    and reports.idle.link_class is LinkClass.OUTAGE)
        if chosen.sinr_db > th or both_out:
            return StartHandover(replace, chosen.sn_id, duplicate=True, forward_buffer=True)
        return NONE
    if s <= th < i:
        return SwitchPath(reports.idle.sn_id, forward_buffer=True)
    if s > th and i > th and i > s + state.hysteresis_db:
        return SwitchPath(reports.idle.sn_id, forward_buffer=state.forward_on_switch)
    return NONE


def dc_fallback_check(reports: LegReports, candidates: Targets) -> ControlAction | None:
    """Both legs in outage with nothing connectable to hand over to."""
    if (reports.serving.link_class is LinkClass.OUTAGE
            and reports.idle.link_class is LinkClass.OUTAGE
            and candidates.serving_target is None
            and candidates.idle_target is None):
        return FallbackToMn()
    return None


def best_candidates(
    reports: Mapping[int, LinkReport],
    channels: Mapping[int, int] | list[int],
    connected: set[int],
) -> dict[int, Target]:
    """Per carrier, the strongest non-connected SN that is not in outage."""
    best: dict[int, Target] = {}
    for sn_id in sorted(reports):
        if sn_id in connected:
            continue
        rep = reports[sn_id]
        if rep.link_class is LinkClass.OUTAGE:
            continue
        ch = channels[sn_id]
        cur = best.get(ch)
        if cur is None or rep.sinr_db > cur.sinr_db:
            best[ch] = Target(sn_id, rep.sinr_db)
    return best


@dataclass
class BaselineControllerState:
    serving_sn: int
    ttt: float = 0.020
    ttt_timer: EventHandle | None = None
    ttt_satisfied: bool = False
    best_neighbor: int | None = None
    mode: Mode = Mode.DUAL


def _best_neighbor(serving: int, neighbor_reports: Mapping[int, LinkReport] | list[LinkReport]):
    reps = neighbor_reports.values() if isinstance(neighbor_reports, Mapping) else neighbor_reports
    best = None
    for rep in sorted(reps, key=lambda r: r.sn_id):
        if rep.sn_id == serving or rep.link_class is LinkClass.OUTAGE:
            continue
        if best is None or rep.sinr_db > best.sinr_db:
            best = rep
    return best


def baseline_trigger(serving_report: LinkReport, neighbor_reports) -> bool:
    """Condition the single-leg TTT timer watches."""
    best = _best_neighbor(serving_report.sn_id, neighbor_reports)
    if best is not None:
        return best.sinr_db > serving_report.sinr_db
    return serving_report.link_class is LinkClass.OUTAGE


def baseline_decide(
    state: BaselineControllerState, serving_report: LinkReport, neighbor_reports
) -> ControlAction:
    best = _best_neighbor(serving_report.sn_id, neighbor_reports)
    state.best_neighbor = None if best is None else best.sn_id
    if not state.ttt_satisfied:
        return NONE
    if best is not None and best.sinr_db > serving_report.sinr_db:
        return StartHandover("serving", best.sn_id, duplicate=False, forward_buffer=True)
    if best is None and serving_report.link_class is LinkClass.OUTAGE:
        return FallbackToMn()
    return NONE


@dataclass
class PendingHandover:
    action: StartHandover | Reestablish
    started: float
    old_serving: int | None
    old_idle: int | None
    retained: int | None


@dataclass
class _TttTimer:
    """Arms on condition onset, cancels on lapse, reports satisfied on expiry."""

    scheduler: Scheduler | None
    ttt: float
    handle: EventHandle | None = None
    satisfied: bool = False
    onset: float | None = None

    def update(self, now: float, condition: bool, owner: str = "") -> None:
        if not condition:
            if self.handle is not None and self.scheduler is not None:
                self.scheduler.cancel(self.handle)
            self.handle = None
            self.satisfied = False
            self.onset = None
            return
        if self.satisfied or self.handle is not None:
            return
        self.onset = now
        if self.ttt <= 0:
            self.satisfied = True
        elif self.scheduler is not None:
            self.handle = self.scheduler.schedule(now + self.ttt, EventKind.TTT_EXPIRY,
                                                     {"controller": owner})

    def expire(self) -> None:
        self.handle = None
        self.satisfied = True

    def reset(self) -> None:
        self.update(0.0, False)


class ControllerBase:
    """Leg bookkeeping shared by both schemes."""

    scheme = "base"

    def __init__(self, scheduler: Scheduler | None, channels, outage_threshold: float = -5.0):
        self.scheduler = scheduler
        self.channels = list(channels)
        self.outage_threshold = outage_threshold
        self.mode = Mode.DUAL
        self.serving: int | None = None
        self.idle: int | None = None
        self.pending: PendingHandover | None = None
        self.reports: dict[int, LinkReport] = {}
        self.now = 0.0

    @property
    def pd_active(self) -> bool:
        return (self.pending is not None and isinstance(self.pending.action, StartHandover)
                and self.pending.action.duplicate)

    @property
    def connected(self) -> set[int]:
        return {x for x in (self.serving, self.idle) if x is not None}

    def on_reports(self, now: float, reports: Mapping[int, LinkReport]) -> ControlAction:
        self.now = now
        self.reports = dict(reports)
        if self.mode is Mode.HO_IN_PROGRESS:
            return NONE
        if self.mode is Mode.MN_FALLBACK:
            return self._recover()
        return self._evaluate(now, from_timer=False)

    def on_ttt_expiry(self, now: float) -> ControlAction:
        self.now = now
        self._timer.expire()
        if self.mode is not Mode.DUAL:
            return NONE
        return self._evaluate(now, from_timer=True)

    def _recover(self) -> ControlAction:
        if self.pending is not None:
            return NONE
        ok = [r for r in self.reports.values() if r.connectable]
        if not ok:
            return NONE
        best = max(ok, key=lambda r: (r.sinr_db, -r.sn_id))
        idle = self._recovery_partner(best.sn_id)
        action = Reestablish(best.sn_id, idle)
        self.pending = PendingHandover(action, self.now, None, None, None)
        return action

    def _recovery_partner(self, serving: int) -> int | None:
        return None

    def _begin(self, action: ControlAction) -> ControlAction:
        if isinstance(action, SwitchPath):
            self.serving, self.idle = self.idle, self.serving
        elif isinstance(action, StartHandover):
            retained = None
            if self.idle is not None:
                retained = self.idle if action.replace == "serving" else self.serving
            self.pending = PendingHandover(action, self.now, self.serving, self.idle, retained)
            self.mode = Mode.HO_IN_PROGRESS
            self._timer.reset()
        elif isinstance(action, FallbackToMn):
            self.mode = Mode.MN_FALLBACK
            self.serving = self.idle = None
            self._timer.reset()
        return action

    def complete(self, target_ok: bool) -> ControlAction:
        """Finish the pending handover or re-establishment.

        Returns a follow-up action (fallback) when an aborted handover leaves
        nothing usable.
        """
        p = self.pending
        if p is None:
            return NONE
        self.pending = None
        if isinstance(p.action, Reestablish):
            if target_ok:
                self.serving, self.idle = p.action.serving, p.action.idle
                self.mode = Mode.DUAL
            return NONE
        self.mode = Mode.DUAL
        if target_ok:
            self.serving, self.idle = p.action.target, p.retained
            return NONE
        self.serving, self.idle = p.old_serving, p.old_idle
        return self._after_abort()

    def _after_abort(self) -> ControlAction:
        return NONE

    def _evaluate(self, now: float, from_timer: bool) -> ControlAction:
        raise NotImplementedError


class DcController(ControllerBase):
    scheme = "dual"

    def __init__(
        self,
        scheduler: Scheduler | None,
        channels,
        sinr_th: float = 20.0,
        ttt: float = 0.020,
        hysteresis_db: float = 3.0,
        forward_on_switch: bool = True,
        outage_threshold: float = -5.0,
    ) -> None:
        super().__init__(scheduler, channels, outage_threshold)
        self.sinr_th = sinr_th
        self.ttt = ttt
        self.hysteresis_db = hysteresis_db
        self.forward_on_switch = forward_on_switch
        self._timer = _TttTimer(scheduler, ttt)

    def attach(self, serving: int, idle: int) -> None:
        if serving == idle:
            raise ValueError("dual legs must be distinct SNs")
        self.serving, self.idle = serving, idle
        self.mode = Mode.DUAL

    @property
    def ttt_timer(self) -> EventHandle | None:
        return self._timer.handle

    def state(self) -> DcControllerState:
        return DcControllerState(
            serving_sn=self.serving, idle_sn=self.idle, sinr_th=self.sinr_th, ttt=self.ttt,
            ttt_timer=self._timer.handle, ttt_satisfied=self._timer.satisfied,
            pd_active=self.pd_active, candidate_targets=self.targets(), mode=self.mode,
            hysteresis_db=self.hysteresis_db, forward_on_switch=self.forward_on_switch,
        )

    def targets(self) -> Targets:
        if self.serving is None or self.idle is None or not self.reports:
            return Targets(None, None)
        best = best_candidates(self.reports, self.channels, self.connected)
        return Targets(best.get(self.channels[self.serving]), best.get(self.channels[self.idle]))

    def _evaluate(self, now: float, from_timer: bool) -> ControlAction:
        legs = LegReports(self.reports[self.serving], self.reports[self.idle])
        if not from_timer:
            cond = legs.serving.sinr_db <= self.sinr_th and legs.idle.sinr_db <= self.sinr_th
            self._timer.update(now, cond, self.scheme)
        targets = self.targets()
        action = dc_decide(self.state(), legs, targets)
        if isinstance(action, NoAction) and self._timer.satisfied:
            action = dc_fallback_check(legs, targets) or action
        return self._begin(action)

    def _recovery_partner(self, serving: int) -> int | None:
        others = [r for r in self.reports.values()
                  if self.channels[r.sn_id] != self.channels[serving]]
        if not others:
            others = [r for r in self.reports.values() if r.sn_id != serving]
        if not others:
            return None
        return max(others, key=lambda r: (r.sinr_db, -r.sn_id)).sn_id

    def _after_abort(self) -> ControlAction:
        if self.serving is None or self.idle is None:
            return NONE
        legs = LegReports(self.reports[self.serving], self.reports[self.idle])
        return self._begin(dc_fallback_check(legs, self.targets()) or NONE)


class BaselineController(ControllerBase):
    scheme = "single"

    def __init__(self, scheduler: Scheduler | None, channels, ttt: float = 0.020,
                 outage_threshold: float = -5.0) -> None:
        super().__init__(scheduler, channels, outage_threshold)
        self.ttt = ttt
        self._timer = _TttTimer(scheduler, ttt)

    def attach(self, serving: int, idle: int | None = None) -> None:
        self.serving, self.idle = serving, None
        self.mode = Mode.DUAL

    @property
    def ttt_timer(self) -> EventHandle | None:
        return self._timer.handle

    def state(self) -> BaselineControllerState:
        return BaselineControllerState(self.serving, self.ttt, self._timer.handle,
                                       self._timer.satisfied, None, self.mode)

    def _evaluate(self, now: float, from_timer: bool) -> ControlAction:
        serving = self.reports[self.serving]
        neighbors = [r for k, r in self.reports.items() if k != self.serving]
        if not from_timer:
            self._timer.update(now, baseline_trigger(serving, neighbors), self.scheme)
        return self._begin(baseline_decide(self.state(), serving, neighbors))

    def _after_abort(self) -> ControlAction:
        if self.serving is None:
            return NONE
        serving = self.reports[self.serving]
        neighbors = [r for k, r in self.reports.items() if k != self.serving]
        if serving.link_class is LinkClass.OUTAGE and _best_neighbor(self.serving, neighbors) is None:
            return self._begin(FallbackToMn())
        return NONE


def make_controller(scheme: str, scheduler: Scheduler | None, channels, **kw) -> ControllerBase:
    if scheme == "dual":
        return DcController(scheduler, channels, **kw)
    if scheme == "single":
        kw = {k: v for k, v in kw.items() if k in ("ttt", "outage_threshold")}
        return BaselineController(scheduler, channels, **kw)
    raise ValueError(f"unknown scheme {scheme!r}")
