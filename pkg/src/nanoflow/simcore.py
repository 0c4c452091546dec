"""Discrete-event engine: beaconing, sensing, backscatter responses, records.

One run owns an event queue ordered by (time, kind, subject); kinds break
timestamp ties as beacon < sense < reception < energy-sample, so a run is a
deterministic total order regardless of how the caller schedules runs.

The physics split drives the design: anchor contact is rare (a device is
within THz range for well under a second per circulation loop), so contact
windows are precomputed per device from the piecewise-linear trace and the
beacon handler only touches devices whose window covers the beacon instant.
Energy is advanced lazily with the closed-form harvest curve, never cycle
by cycle.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .energy import EnergyConfig, EnergyState, advance_harvest, try_consume
from .errors import ConfigMismatch
from .vasculature import MobilityTrace, VesselGraph, locate_vessel

_BEACON, _SENSE, _RECEPTION, _ENERGY = 0, 1, 2, 3
_T_EPS = 1e-9


@dataclass
class Anchor:
    mac: int
    position: tuple[float, float, float]
    beacon_interval_s: float = 0.1
    tx_power_dbm: float | None = None   # None = channel default

    def __post_init__(self):
        if self.beacon_interval_s <= 0:
            raise ConfigMismatch("anchor beacon_interval_s must be positive")


@dataclass
class EventScenario:
    target: tuple[float, float, float] | None = None
    detection_radius_cm: float = 1.0
    sense_rate_hz: int = 3


@dataclass
class ProtocolParams:
    beacon_bits: int = 16
    response_bits: int = 48
    # beacon silence (in units of the anchor interval) that closes a contact
    # episode; a device answers the first beacon it hears per episode
    episode_gap_intervals: float = 1.5


@dataclass
class RawRecord:
    report_time_s: float
    device_mac: int
    circulation_time_s: float
    event_bit: int


@dataclass
class SimResult:
    records: list[RawRecord]
    energy_rows: list[tuple[float, int, float, int]]   # time_s, mac, pJ, powered
    consumed_pj: dict[int, float]
    duration_s: float


class NanodeviceRuntime:
    """Mutable per-device state while a run is in flight.

    RF geometry (contact windows, positions at beacon instants) reads the
    trace's exact visit schedule when present: the sampled polyline corner-
    cuts short vessels and would place the device centimeters away from
    where it really is exactly when it crosses the heart.  Sensing, by
    contract, stays on the upsampled sample grid.
    """

    __slots__ = ("mac", "times", "pos", "vids", "state", "last_adv",
                 "last_reset", "event_bit", "last_beacon_rx_dbm",
                 "last_delivered", "responded", "consumed", "sense_idx",
                 "sense_stride", "vt", "vstart", "vvel", "vheart", "vvid")

    def __init__(self, trace: MobilityTrace, graph: VesselGraph):
        self.mac = trace.device_id
        self.times = np.asarray(trace.times, dtype=float)
        self.pos = np.asarray(trace.positions, dtype=float)
        self.vids = np.asarray(trace.vessel_ids, dtype=int)
        self.state = EnergyState()
        self.last_adv = 0.0
        self.last_reset = 0.0
        self.event_bit = 0
        self.last_beacon_rx_dbm: float | None = None
        self.last_delivered: float | None = None
        self.responded = False
        self.consumed = 0.0
        self.sense_idx = 0
        self.sense_stride = 1
        if trace.visit_times is not None and trace.visit_vessels is not None:
            self.vt = np.asarray(trace.visit_times, dtype=float)
            self.vvid = np.asarray(trace.visit_vessels, dtype=int)
            m = len(self.vt)
            self.vstart = np.empty((m, 3))
            self.vvel = np.empty((m, 3))
            self.vheart = np.empty(m, dtype=bool)
            for k, vid in enumerate(self.vvid):
                v = graph.vessel(int(vid))
                self.vstart[k] = v.start
                length = v.length
                direction = (v.end - v.start) / length if length > 0 else v.start * 0.0
                self.vvel[k] = direction * v.speed_cm_s
                self.vheart[k] = v.is_heart
        else:
            self.vt = None
            self.vvid = self.vstart = self.vvel = self.vheart = None

    def advance(self, t: float, cfg: EnergyConfig) -> None:
        if t > self.last_adv:
            advance_harvest(self.state, t - self.last_adv, cfg)
            self.last_adv = t

    def spend(self, cost: float, cfg: EnergyConfig) -> bool:
        if try_consume(self.state, cost, cfg) is None:
            return False
        self.consumed += cost
        return True

    def position_at(self, t: float):
        """Exact (position, velocity, vessel id, in_heart) at time t."""
        if self.vt is not None:
            k = int(np.searchsorted(self.vt, t, side="right")) - 1
            k = max(0, k)
            p = self.vstart[k] + (t - self.vt[k]) * self.vvel[k]
            return p, self.vvel[k], int(self.vvid[k]), bool(self.vheart[k])
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = max(0, min(i, len(self.times) - 2))
        t0, t1 = self.times[i], self.times[i + 1]
        seg = self.pos[i + 1] - self.pos[i]
        frac = (t - t0) / (t1 - t0) if t1 > t0 else 0.0
        p = self.pos[i] + frac * seg
        velocity = seg / (t1 - t0) if t1 > t0 else seg * 0.0
        return p, velocity, int(self.vids[i]), None


def _max_range_cm(tx_dbm: float, ccfg: ch.ChannelConfig) -> float:
    """Largest distance where a packet still clears the sensitivity gate."""
    budget = tx_dbm - ccfg.rx_sensitivity_dbm
    if ch.path_loss_db(0.0, ccfg) > budget:
        return 0.0
    lo, hi = 0.0, 1.0
    while ch.path_loss_db(hi, ccfg) <= budget:
        hi *= 2.0
        if hi > 1e6:
            return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ch.path_loss_db(mid, ccfg) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def _visit_windows(dev: "NanodeviceRuntime", anchor_pos: np.ndarray,
                   radius_cm: float, t_end: float) -> list[tuple[float, float]]:
    """[t_in, t_out] in-range intervals from the exact visit schedule.

    Inside one visit the position is vstart + tau * vvel, so the in-range
    condition is a quadratic in tau; windows from touching visits merge.
    """
    vt, vstart, vvel = dev.vt, dev.vstart, dev.vvel
    ends = np.append(vt[1:], t_end)
    w = vstart - anchor_pos
    aa = np.einsum("ij,ij->i", vvel, vvel)
    bb = 2.0 * np.einsum("ij,ij->i", w, vvel)
    cc = np.einsum("ij,ij->i", w, w) - radius_cm * radius_cm
    disc = bb * bb - 4.0 * aa * cc
    hit = np.nonzero(((aa > 0.0) & (disc >= 0.0)) | ((aa == 0.0) & (cc <= 0.0)))[0]
    out: list[tuple[float, float]] = []
    for k in hit:
        dwell = ends[k] - vt[k]
        if dwell <= 0:
            continue
        if aa[k] > 0.0:
            root = math.sqrt(disc[k])
            tau0 = max((-bb[k] - root) / (2.0 * aa[k]), 0.0)
            tau1 = min((-bb[k] + root) / (2.0 * aa[k]), dwell)
            if tau0 >= tau1:
                continue
        else:
            tau0, tau1 = 0.0, dwell
        t0, t1 = vt[k] + tau0, vt[k] + tau1
        if out and t0 <= out[-1][1] + _T_EPS:
            out[-1] = (out[-1][0], max(out[-1][1], t1))
        else:
            out.append((t0, t1))
    return out


def _contact_windows(times: np.ndarray, pos: np.ndarray, anchor_pos: np.ndarray,
                     radius_cm: float) -> list[tuple[float, float]]:
    """Fallback [t_in, t_out] intervals from the sampled polyline.

    Only used for traces without a visit schedule; the polyline corner-cuts
    vessels shorter than one sample step, so windows can be missed.
    """
    if len(times) < 2:
        return []
    w = pos[:-1] - anchor_pos
    d = pos[1:] - pos[:-1]
    aa = np.einsum("ij,ij->i", d, d)
    bb = 2.0 * np.einsum("ij,ij->i", w, d)
    cc = np.einsum("ij,ij->i", w, w) - radius_cm * radius_cm
    out: list[tuple[float, float]] = []
    moving = aa > 0.0
    disc = bb * bb - 4.0 * aa * cc
    hit = moving & (disc >= 0.0)
    idx = np.nonzero(hit | (~moving & (cc <= 0.0)))[0]
    for i in idx:
        if aa[i] > 0.0:
            root = math.sqrt(disc[i])
            s0 = (-bb[i] - root) / (2.0 * aa[i])
            s1 = (-bb[i] + root) / (2.0 * aa[i])
            s0, s1 = max(s0, 0.0), min(s1, 1.0)
            if s0 >= s1:
                continue
        else:
            s0, s1 = 0.0, 1.0
        dt = times[i + 1] - times[i]
        t0, t1 = times[i] + s0 * dt, times[i] + s1 * dt
        if out and t0 <= out[-1][1] + _T_EPS:
            out[-1] = (out[-1][0], max(out[-1][1], t1))
        else:
            out.append((t0, t1))
    return out


def _beacon_interferers(anchors: list[Anchor], active_idx: int, t: float,
                        p: np.ndarray, ccfg: ch.ChannelConfig,
                        beacon_air: float) -> list[float]:
    """Receive powers at the device from other anchors beaconing at time t."""
    powers = []
    for j, other in enumerate(anchors):
        if j == active_idx:
            continue
        k = round(t / other.beacon_interval_s)
        if abs(k * other.beacon_interval_s - t) > beacon_air:
            continue
        tx = other.tx_power_dbm if other.tx_power_dbm is not None else ccfg.tx_power_dbm
        dist = float(np.linalg.norm(p - np.asarray(other.position, dtype=float)))
        powers.append(tx - ch.path_loss_db(dist, ccfg))
    return powers


def run_simulation(graph: VesselGraph, traces: list[MobilityTrace],
                   anchors: list[Anchor], scenario: EventScenario,
                   energy_cfg: EnergyConfig, channel_cfg: ch.ChannelConfig,
                   duration_s: float, seed: int = 0,
                   protocol: ProtocolParams | None = None) -> SimResult:
    """Run one deterministic simulation and collect raw records.

    `seed` is part of the interface for forward compatibility (the engine
    itself draws no random numbers; all stochasticity lives in the traces).
    """
    proto = protocol or ProtocolParams()
    if not anchors:
        raise ConfigMismatch("at least one anchor is required")
    if duration_s <= 0:
        raise ConfigMismatch("duration_s must be positive")

    devices = []
    for trace in traces:
        if len(trace.times) < 2:
            raise ConfigMismatch(f"device {trace.device_id}: trace has fewer than 2 samples")
        if trace.times[-1] + _T_EPS < duration_s:
            raise ConfigMismatch(
                f"device {trace.device_id}: trace covers {trace.times[-1]:.3f} s "
                f"< simulation duration {duration_s:.3f} s")
        devices.append(NanodeviceRuntime(trace, graph))

    # sense ticks ride the upsampled sample grid
    for dev in devices:
        dt = dev.times[1] - dev.times[0]
        stride = (1.0 / scenario.sense_rate_hz) / dt
        if abs(stride - round(stride)) > 1e-6 or round(stride) < 1:
            raise ConfigMismatch(
                f"device {dev.mac}: trace period {dt:.6f} s does not divide the "
                f"sense period {1.0 / scenario.sense_rate_hz:.6f} s")
        dev.sense_stride = int(round(stride))

    target = None if scenario.target is None else np.asarray(scenario.target, dtype=float)
    beacon_air = ch.airtime_s(proto.beacon_bits, channel_cfg)
    response_air = ch.airtime_s(proto.response_bits, channel_cfg)
    rx_cost = ch.pulse_count(proto.beacon_bits) * energy_cfg.cost_rx_pulse
    tx_cost = ch.pulse_count(proto.response_bits) * energy_cfg.cost_tx_pulse

    # per-anchor contact windows, sorted by entry time
    anchor_pos = [np.asarray(a.position, dtype=float) for a in anchors]
    anchor_tx = [a.tx_power_dbm if a.tx_power_dbm is not None else channel_cfg.tx_power_dbm
                 for a in anchors]
    anchor_windows = []
    for ai in range(len(anchors)):
        radius = _max_range_cm(anchor_tx[ai], channel_cfg)
        rows = []
        for di, dev in enumerate(devices):
            if dev.vt is not None:
                windows = _visit_windows(dev, anchor_pos[ai], radius, duration_s)
            else:
                windows = _contact_windows(dev.times, dev.pos, anchor_pos[ai], radius)
            for t0, t1 in windows:
                rows.append((t0, t1, di))
        rows.sort()
        anchor_windows.append({"rows": rows, "ptr": 0, "active": {}})

    heap: list[tuple[float, int, int, int]] = []
    seq = itertools.count()
    payloads: dict[int, tuple[int, list]] = {}
    records: list[RawRecord] = []
    energy_rows: list[tuple[float, int, float, int]] = []

    for ai, anchor in enumerate(anchors):
        heapq.heappush(heap, (0.0, _BEACON, ai, next(seq)))
    for di, dev in enumerate(devices):
        heapq.heappush(heap, (float(dev.times[0]), _SENSE, di, next(seq)))
        heapq.heappush(heap, (0.0, _ENERGY, di, next(seq)))
    beacon_count = [0] * len(anchors)

    def process_beacon(ai: int, t: float) -> None:
        anchor = anchors[ai]
        beacon_count[ai] += 1
        t_next = beacon_count[ai] * anchor.beacon_interval_s
        if t_next <= duration_s + _T_EPS:
            heapq.heappush(heap, (t_next, _BEACON, ai, next(seq)))
        state = anchor_windows[ai]
        rows, active = state["rows"], state["active"]
        ptr = state["ptr"]
        while ptr < len(rows) and rows[ptr][0] <= t + _T_EPS:
            t0, t1, di = rows[ptr]
            if t1 >= t - _T_EPS:
                active[di] = t1
            ptr += 1
        state["ptr"] = ptr
        for di in [d for d, end in active.items() if end < t - _T_EPS]:
            del active[di]
        if not active:
            return
        responders = []
        for di in sorted(active):
            dev = devices[di]
            p, velocity, vid, in_heart = dev.position_at(t)
            if in_heart is None:
                in_heart = graph.vessel(locate_vessel(graph, p)).is_heart
            offset = p - anchor_pos[ai]
            dist = float(np.linalg.norm(offset))
            radial = float(np.dot(velocity, offset) / dist) if dist > 0 else 0.0
            link = ch.link_sample(dist, -radial, anchor_tx[ai], channel_cfg)
            if link.rx_power_dbm < channel_cfg.rx_sensitivity_dbm:
                continue
            interferers = _beacon_interferers(anchors, ai, t, p, channel_cfg, beacon_air)
            sinr = ch.sinr_db(link.rx_power_dbm, interferers, channel_cfg.noise_floor_dbm)
            if ch.reception_decision(link.rx_power_dbm, sinr, channel_cfg) is not ch.Reception.DELIVERED:
                continue
            dev.advance(t, energy_cfg)
            if not dev.state.powered:
                continue
            if not dev.spend(rx_cost, energy_cfg):
                continue
            dev.last_beacon_rx_dbm = link.rx_power_dbm
            gap = proto.episode_gap_intervals * anchor.beacon_interval_s
            if dev.last_delivered is None or t - dev.last_delivered > gap + _T_EPS:
                dev.responded = False
            dev.last_delivered = t
            circulation = t - dev.last_reset
            bit = dev.event_bit
            if in_heart:
                dev.last_reset = t
                dev.event_bit = 0
            if dev.responded:
                continue
            if not dev.spend(tx_cost, energy_cfg):
                continue
            dev.responded = True
            t_rx = t + beacon_air + response_air
            if t_rx <= duration_s + _T_EPS:
                tx_dbm = link.rx_power_dbm + channel_cfg.backscatter_gain_db
                responders.append((di, p, tx_dbm, -radial, circulation, bit))
        if responders:
            sid = next(seq)
            payloads[sid] = (ai, responders)
            heapq.heappush(heap, (t + beacon_air + response_air, _RECEPTION, ai, sid))

    def process_receptions(first: tuple) -> None:
        t = first[0]
        batch = [payloads.pop(first[3])]
        while heap and heap[0][1] == _RECEPTION and abs(heap[0][0] - t) <= _T_EPS:
            batch.append(payloads.pop(heapq.heappop(heap)[3]))
        transmitters = [(ai, *resp) for ai, responders in batch for resp in responders]
        for ai, responders in batch:
            apos = anchor_pos[ai]
            for di, p, tx_dbm, radial, circulation, bit in responders:
                dist = float(np.linalg.norm(p - apos))
                link = ch.link_sample(dist, radial, tx_dbm, channel_cfg)
                interferers = []
                for oai, odi, op, otx, _orad, _oc, _ob in transmitters:
                    if oai == ai and odi == di:
                        continue
                    odist = float(np.linalg.norm(op - apos))
                    interferers.append(otx - ch.path_loss_db(odist, channel_cfg))
                sinr = ch.sinr_db(link.rx_power_dbm, interferers, channel_cfg.noise_floor_dbm)
                if ch.reception_decision(link.rx_power_dbm, sinr, channel_cfg) is ch.Reception.DELIVERED:
                    records.append(RawRecord(t, devices[di].mac, circulation, bit))

    def process_sense(di: int, t: float) -> None:
        dev = devices[di]
        i = dev.sense_idx
        dev.advance(t, energy_cfg)
        if dev.state.powered and dev.spend(energy_cfg.cost_sense, energy_cfg):
            if target is not None:
                if float(np.linalg.norm(dev.pos[i] - target)) < scenario.detection_radius_cm:
                    dev.event_bit = 1
        nxt = i + dev.sense_stride
        if nxt < len(dev.times) and dev.times[nxt] <= duration_s + _T_EPS:
            dev.sense_idx = nxt
            heapq.heappush(heap, (float(dev.times[nxt]), _SENSE, di, next(seq)))

    def process_energy_sample(di: int, t: float) -> None:
        dev = devices[di]
        dev.advance(t, energy_cfg)
        energy_rows.append((t, dev.mac, dev.state.energy * 1e12, int(dev.state.powered)))
        if t + 1.0 <= duration_s + _T_EPS:
            heapq.heappush(heap, (t + 1.0, _ENERGY, di, next(seq)))

    while heap:
        event = heapq.heappop(heap)
        t, kind, subject = event[0], event[1], event[2]
        if kind == _BEACON:
            process_beacon(subject, t)
        elif kind == _SENSE:
            process_sense(subject, t)
        elif kind == _RECEPTION:
            process_receptions(event)
        else:
            process_energy_sample(subject, t)

    records.sort(key=lambda r: (r.report_time_s, r.device_mac))
    consumed = {dev.mac: dev.consumed * 1e12 for dev in devices}
    return SimResult(records=records, energy_rows=energy_rows,
                     consumed_pj=consumed, duration_s=duration_s)


def export_raw_csv(records: list[RawRecord], path: str) -> None:
    rows = sorted(records, key=lambda r: (r.report_time_s, r.device_mac))
    with open(path, "w") as fh:
        fh.write("report_time_s,device_mac,circulation_time_s,event_bit\n")
        for r in rows:
            fh.write(f"{r.report_time_s:.6f},{r.device_mac},"
                     f"{r.circulation_time_s:.6f},{r.event_bit}\n")


def export_energy_csv(rows: list[tuple[float, int, float, int]], path: str) -> None:
    with open(path, "w") as fh:
        fh.write("time_s,device_mac,energy_pj,powered\n")
        for t, mac, pj, powered in rows:
            fh.write(f"{t:.6f},{mac},{pj:.6f},{powered}\n")
