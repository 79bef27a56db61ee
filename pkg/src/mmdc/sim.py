"""Single-run orchestration: events in, RunMetrics out."""

from __future__ import annotations

import math
from typing import TextIO

import numpy as np

from .channel import (
    ChannelModel,
    LinkClass,
    LinkReport,
    PathlossParams,
    RadioParams,
    mn_pathloss_db,
)
from .config import ScenarioConfig
from .dataplane import FileTable, IntervalSet, PdcpReceiver, RlcBuffer, X2Link, link_rate_bps
from .engine import EventKind, RngStreams, Scheduler, SimEvent
from .geometry import BlockageField, generate_field
from .metrics import FileRecord, RunMetrics
from .network import (
    Mode,
    NodeDescriptor,
    Role,
    Street,
    build_topology,
    initial_pair,
    place_ue,
    step_mobility,
)
from .protocol import (
    FallbackToMn,
    NoAction,
    Reestablish,
    StartHandover,
    SwitchPath,
    make_controller,
)


class Simulation:
    def __init__(
        self,
        cfg: ScenarioConfig,
        trace: TextIO | None = None,
        record_sinr: bool = False,
        field: BlockageField | None = None,
    ) -> None:
        self.cfg = cfg
        self.rng = RngStreams(cfg.seed)
        self.sched = Scheduler(trace)
        self.nodes: list[NodeDescriptor] = build_topology(cfg)
        sns = [n for n in self.nodes if n.role is Role.SN]
        self.mn = next(n for n in self.nodes if n.role is Role.MN)
        self.n_sn = len(sns)
        positions = np.array([n.position for n in sns], dtype=float)
        self.channels = [int(n.channel) for n in sns]
        bounds = (cfg.area_width_m, cfg.area_height_m)
        if field is None:
            field = generate_field(
                cfg.blockage_density_per_km2, bounds, self.rng["blockage"],
                (cfg.blockage_size_min_m, cfg.blockage_size_max_m),
                cfg.blockage_random_orientation, cfg.blockage_fixed_count,
            )
        self.field = field
        radio = RadioParams(cfg.tx_power_dbm, cfg.sn_bandwidth_hz, cfg.noise_psd_dbm_hz,
                            cfg.noise_figure_db, cfg.g_main_db, cfg.g_side_db)
        self.channel = ChannelModel(
            positions, np.array(self.channels), field, radio,
            PathlossParams(cfg.los_alpha, cfg.los_beta, cfg.los_sigma_db),
            PathlossParams(cfg.nlos_alpha, cfg.nlos_beta, cfg.nlos_sigma_db),
            cfg.min_distance_m, cfg.all_bs_interference,
        )
        self.mn_noise_dbm = (cfg.noise_psd_dbm_hz + 10 * math.log10(cfg.lte_bandwidth_hz)
                             + cfg.noise_figure_db)

        self.street = Street(tuple(cfg.street_waypoints))
        self.ue = place_ue(self.street, cfg.ue_speed_mps, cfg.ue_start_fraction, mn_id=self.mn.id)
        self._shadow_rng = self.rng["shadowing"]
        self.shadow_z = self._shadow_rng.standard_normal(self.n_sn)
        self._shadow_pos = self.ue.position

        self.table = FileTable(cfg.pdu_size_bytes)
        self.buffers = [RlcBuffer(i, self.table, cfg.rlc_buffer_bytes) for i in range(self.n_sn)]
        self.mn_queue = RlcBuffer(self.mn.id, self.table, math.inf)
        self.x2 = X2Link(self.sched, cfg.x2_delay_s)
        self.pdcp = PdcpReceiver(cfg.pdcp_reordering, cfg.reorder_window_s)
        self.dropped = IntervalSet()
        self._deadline_idx = 0

        self.controller = make_controller(
            cfg.scheme, self.sched, self.channels, sinr_th=cfg.sinr_th_db, ttt=cfg.ttt_s,
            hysteresis_db=cfg.hysteresis_db, forward_on_switch=cfg.forward_on_switch,
            outage_threshold=cfg.outage_threshold_db,
        )
        self.reports = self._measure(0.0, advance_shadowing=False)
        sinr = np.array([self.reports[i].sinr_db for i in range(self.n_sn)])
        if cfg.scheme == "dual":
            serving, idle = initial_pair(self.ue.position, positions, np.array(self.channels), sinr)
            self.controller.attach(serving, idle)
        else:
            self.controller.attach(int(np.argmax(sinr)))
        self.controller.reports = dict(self.reports)

        self.metrics = RunMetrics(scheme=cfg.scheme, seed=cfg.seed,
                                  density=cfg.blockage_density_per_km2,
                                  file_size=cfg.file_size_bytes, sim_duration=cfg.duration_s,
                                  count_inflight=cfg.count_inflight_as_failures)
        if record_sinr:
            self.metrics.sinr_series = []

        on = self.sched.on
        on(EventKind.MOBILITY_STEP, self._on_mobility)
        on(EventKind.SRS_REPORT, self._on_srs)
        on(EventKind.LINK_SERVICE, self._on_service)
        on(EventKind.TRAFFIC_GEN, self._on_traffic)
        on(EventKind.X2_DELIVERY, self._on_x2)
        on(EventKind.HO_COMPLETE, self._on_ho_complete)
        on(EventKind.TTT_EXPIRY, self._on_ttt)
        on(EventKind.RUN_END, self._on_end)

    # ------------------------------------------------------------------ setup

    def run(self) -> RunMetrics:
        cfg = self.cfg
        self.sched.schedule(cfg.mobility_step_s, EventKind.MOBILITY_STEP, 1)
        self.sched.schedule(cfg.srs_period_s, EventKind.SRS_REPORT, 1)
        self.sched.schedule(0.0, EventKind.TRAFFIC_GEN, 0)
        self.metrics.events_processed = self.sched.run_until(cfg.duration_s)
        return self.metrics

    # ---------------------------------------------------------------- channel

    def _measure(self, now: float, advance_shadowing: bool = True) -> dict[int, LinkReport]:
        pos = self.ue.position
        if advance_shadowing:
            dd = math.hypot(pos[0] - self._shadow_pos[0], pos[1] - self._shadow_pos[1])
            rho = math.exp(-dd / self.cfg.decorrelation_distance_m)
            draw = self._shadow_rng.standard_normal(self.n_sn)
            self.shadow_z = rho * self.shadow_z + math.sqrt(1.0 - rho * rho) * draw
            self._shadow_pos = pos
        sinr, los = self.channel.sinr_all(pos, self.shadow_z)
        thr = self.cfg.outage_threshold_db
        reports = {}
        for i in range(self.n_sn):
            s = float(sinr[i])
            cls = LinkClass.OUTAGE if s < thr else (LinkClass.LOS if los[i] else LinkClass.NLOS)
            reports[i] = LinkReport(i, s, cls, now)
        return reports

    def _sn_rate(self, sn: int) -> float:
        cfg = self.cfg
        return link_rate_bps(self.reports[sn], cfg.sn_bandwidth_hz, cfg.eta, cfg.se_max)

    def _mn_rate(self) -> float:
        cfg = self.cfg
        x, y = self.ue.position
        d = math.hypot(x - self.mn.position[0], y - self.mn.position[1])
        snr = cfg.mn_tx_power_dbm - mn_pathloss_db(max(d, cfg.min_distance_m)) - self.mn_noise_dbm
        return link_rate_bps(None, cfg.lte_bandwidth_hz, cfg.eta, cfg.se_max, sinr_db=snr)

    # ------------------------------------------------------------- data paths

    def _feed_targets(self) -> list[RlcBuffer]:
        c = self.controller
        if c.mode is Mode.DUAL:
            return [self.buffers[c.serving]]
        if c.mode is Mode.HO_IN_PROGRESS:
            p = c.pending
            target = self.buffers[p.action.target]
            if p.action.duplicate and p.retained is not None:
                return [self.buffers[p.retained], target]
            return [target]
        return []

    def _anchor(self) -> RlcBuffer:
        """Where stray data should end up right now."""
        c = self.controller
        if c.mode is Mode.DUAL:
            return self.buffers[c.serving]
        if c.mode is Mode.HO_IN_PROGRESS:
            return self.buffers[c.pending.action.target]
        return self.mn_queue

    def _transmitters(self) -> list[tuple[RlcBuffer, float]]:
        c = self.controller
        if c.mode is Mode.DUAL:
            return [(self.buffers[c.serving], self._sn_rate(c.serving))]
        if c.mode is Mode.HO_IN_PROGRESS:
            p = c.pending
            if p.action.duplicate and p.retained is not None:
                return [(self.buffers[p.retained], self._sn_rate(p.retained))]
            return []
        return [(self.mn_queue, self._mn_rate())]

    def _feed(self) -> None:
        if not self.mn_queue.queue:
            return
        dsts = self._feed_targets()
        if not dsts:
            return
        room = min(b.room for b in dsts)
        if room < self.cfg.pdu_size_bytes:
            return
        ranges = self.mn_queue.take_bytes(room)
        for dst in dsts:
            self.x2.send(dst, ranges)

    def _consolidate(self, src: RlcBuffer, dst: RlcBuffer) -> None:
        """Move what ``src`` holds to ``dst``, skipping copies already received or headed there."""
        if src is dst or not src.queue:
            return
        have = self.pdcp.received.union(dst.contents())
        for tr in self.x2.in_flight.values():
            if tr.dst is dst:
                for lo, hi in tr.ranges:
                    have.add(lo, hi)
        keep = IntervalSet(src.take_all()).difference(have)
        self.x2.send(dst, list(keep))

    def _credit(self, released) -> None:
        for lo, hi, t in released:
            for f in self.table.credit(lo, hi, t):
                self.sched.record("FILE_DONE", file_id=f.file_id, completed=f.completed)

    def _expire_deadlines(self, now: float) -> None:
        files = self.table.files
        while self._deadline_idx < len(files) and files[self._deadline_idx].deadline <= now:
            f = files[self._deadline_idx]
            self._deadline_idx += 1
            if f.completed is not None:
                continue
            gone = IntervalSet([(f.first_seq, f.end_seq)]).difference(self.pdcp.received)
            for buf in [*self.buffers, self.mn_queue]:
                buf.discard(gone)
            for tr in self.x2.in_flight.values():
                tr.ranges = list(IntervalSet(tr.ranges).difference(gone))
                nbytes = self.table.measure(tr.ranges)
                tr.dst.reserved -= tr.nbytes - nbytes
                tr.nbytes = nbytes
            for lo, hi in gone:
                self.dropped.add(lo, hi)

    # ---------------------------------------------------------------- actions

    def _record_action(self, name: str, **extra) -> None:
        if not self.sched.tracing:
            return
        c = self.controller
        fields = {"action": name, "scheme": c.scheme}
        for leg, sn in (("serving", c.serving), ("idle", c.idle)):
            if sn is not None:
                fields[leg] = sn
                fields[f"sinr_{leg}"] = self.reports[sn].sinr_db
        fields.update(extra)
        self.sched.record("ACTION", **fields)

    def _execute(self, action) -> None:
        if isinstance(action, NoAction):
            return
        c = self.controller
        m = self.metrics
        if isinstance(action, SwitchPath):
            m.path_switches += 1
            self._record_action("SWITCH_PATH", to=action.to, forward_buffer=action.forward_buffer)
            if action.forward_buffer:
                self.x2.forward(self.buffers[c.idle], self.buffers[c.serving])
        elif isinstance(action, StartHandover):
            m.handover_trials += 1
            p = c.pending
            self._record_action("START_HANDOVER", target=action.target, replace=action.replace,
                                duplicate=action.duplicate,
                                sinr_target=self.reports[action.target].sinr_db)
            target = self.buffers[action.target]
            if action.forward_buffer and p.old_serving is not None:
                self.x2.forward(self.buffers[p.old_serving], target)
            if action.replace == "idle" and p.old_idle is not None:
                self._consolidate(self.buffers[p.old_idle], target)
            self.sched.schedule(self.sched.now + self.cfg.rrc_delay_s, EventKind.HO_COMPLETE,
                                {"op": "handover", "target": action.target})
            self._feed()
        elif isinstance(action, FallbackToMn):
            m.fallback_events += 1
            self._record_action("FALLBACK_TO_MN")
            for buf in self.buffers:
                if buf.queue:
                    self.x2.forward(buf, self.mn_queue)
        elif isinstance(action, Reestablish):
            m.handover_trials += 1
            self._record_action("REESTABLISH", target=action.serving, partner=action.idle)
            self.sched.schedule(self.sched.now + self.cfg.rrc_delay_s, EventKind.HO_COMPLETE,
                                {"op": "reestablish", "target": action.serving})

    # --------------------------------------------------------------- handlers

    def _on_mobility(self, ev: SimEvent) -> None:
        self.ue = step_mobility(self.ue, self.cfg.mobility_step_s, self.street)
        k = ev.payload + 1
        self.sched.schedule(k * self.cfg.mobility_step_s, EventKind.MOBILITY_STEP, k)

    def _on_srs(self, ev: SimEvent) -> None:
        now = self.sched.now
        self.reports = self._measure(now)
        c = self.controller
        if self.metrics.sinr_series is not None and c.serving is not None:
            idle = self.reports[c.idle].sinr_db if c.idle is not None else math.nan
            self.metrics.sinr_series.append((now, self.reports[c.serving].sinr_db, idle))
        self._execute(c.on_reports(now, self.reports))
        self.sched.schedule(now, EventKind.LINK_SERVICE, ev.payload)
        k = ev.payload + 1
        self.sched.schedule(k * self.cfg.srs_period_s, EventKind.SRS_REPORT, k)

    def _on_service(self, ev: SimEvent) -> None:
        now = self.sched.now
        self._credit(self.pdcp.advance(now))
        if self.cfg.abort_on_deadline:
            self._expire_deadlines(now)
        dt = min(self.cfg.srs_period_s, self.cfg.duration_s - now)
        for buf, rate in self._transmitters() if dt > 0 else ():
            for lo, hi, t in buf.serve(rate, dt, now):
                self._credit(self.pdcp.receive(lo, hi, t))
        self._feed()

    def _on_traffic(self, ev: SimEvent) -> None:
        cfg = self.cfg
        now = self.sched.now
        job = self.table.add_file(cfg.file_size_bytes, now, now + cfg.delay_constraint_s)
        self.mn_queue.enqueue(job.first_seq, job.end_seq)
        self._feed()
        k = ev.payload + 1
        t_next = k * cfg.file_interval_s
        if t_next < cfg.duration_s - 1e-9:
            self.sched.schedule(t_next, EventKind.TRAFFIC_GEN, k)

    def _on_x2(self, ev: SimEvent) -> None:
        tr, dropped = self.x2.deliver(ev.payload["transfer"])
        for lo, hi in dropped:
            self.dropped.add(lo, hi)
        dst = tr.dst
        if dst is self.mn_queue:
            return
        if dst not in self._feed_targets():
            self._consolidate(dst, self._anchor())

    def _on_ttt(self, ev: SimEvent) -> None:
        self._execute(self.controller.on_ttt_expiry(self.sched.now))

    def _on_ho_complete(self, ev: SimEvent) -> None:
        c = self.controller
        p = c.pending
        target = ev.payload["target"]
        ok = self.reports[target].connectable
        follow = c.complete(ok)
        if isinstance(p.action, Reestablish):
            self._record_action("REESTABLISH_DONE" if ok else "REESTABLISH_FAILED")
            self._feed()
            return
        if not ok:
            self.metrics.handover_aborts += 1
            self._record_action("HANDOVER_ABORT", target=target)
        else:
            self._record_action("HANDOVER_DONE", target=target)
        if isinstance(follow, FallbackToMn):
            self._execute(follow)
        else:
            received = self.pdcp.received
            anchor = self._anchor()
            for sn in {p.action.target, p.old_serving, p.old_idle} - {None}:
                buf = self.buffers[sn]
                buf.discard(received)
                if buf is not anchor:
                    self._consolidate(buf, anchor)
        self._feed()

    def _on_end(self, ev: SimEvent) -> None:
        now = self.sched.now
        self._credit(self.pdcp.advance(now))
        m = self.metrics
        records = []
        for f in self.table.files:
            deadline = round(f.deadline, 9)
            done = None if f.completed is None else round(f.completed, 9)
            if done is not None:
                status = "ok" if done <= deadline else "failed"
            elif deadline <= now:
                status = "failed"
            else:
                status = "inflight"
            records.append(FileRecord(f.file_id, f.size, f.created, deadline, done, status))
        m.files = records

        table = self.table
        delivered = self.pdcp.delivered
        residual = self.pdcp.held.copy()
        for buf in [*self.buffers, self.mn_queue]:
            for lo, hi in buf.queue:
                residual.add(lo, hi)
        residual = residual.union(self.x2.contents()).difference(delivered)
        lost = self.dropped.difference(delivered).difference(residual)
        generated = IntervalSet([(0, table.next_seq)]) if table.next_seq else IntervalSet()
        for part in (delivered, residual, lost):
            if not part.issubset(generated):
                raise AssertionError("accounted data outside the generated stream")
        m.bytes_generated = table.total_bytes
        m.bytes_delivered = table.measure(delivered)
        m.bytes_residual = table.measure(residual)
        m.bytes_dropped = table.measure(lost)
        m.duplicate_pdus = self.pdcp.duplicate_pdus
        m.pdcp_double_delivery = self.pdcp.released_pdus != delivered.count
        self.sched.record(
            "SUMMARY", handover_trials=m.handover_trials, path_switches=m.path_switches,
            fallback_events=m.fallback_events, bytes_generated=m.bytes_generated,
            bytes_delivered=m.bytes_delivered, bytes_residual=m.bytes_residual,
            bytes_dropped=m.bytes_dropped,
        )


def run_scenario(cfg: ScenarioConfig, trace: TextIO | None = None,
                 record_sinr: bool = False) -> RunMetrics:
    return Simulation(cfg, trace, record_sinr).run()
