"""Time-domain simulation of the full closed-loop microgrid.

Unlike the design model, the simulator keeps every line current as a state
(one shared state per edge, so the two directed readings are antisymmetric
by construction) and integrates the resulting stiff RLC network with an
implicit L-stable method. The controller stack per unit is the integrator
state feedback plus optional reference prefilter and measured-disturbance
compensator; controller replacement is done through a tracker that makes
the handover continuous (bumpless) before committing.

Scenarios are value objects: a duration, initial references, and a
time-ordered event list (connect/disconnect, load and reference steps, hot
plug-in/unplug, controller switches). Events at the same timestamp apply in
file order. Plug and unplug events are adjudicated first; a denied request
is skipped with a warning, it never aborts the run.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.signal

from .gainsio import GainsFile, PrefilterEntry, load_gains
from .params import (DguParams, GridGraph, InputError, LineParams,
                     _coerce_id, _edge_key, _make_parser, format_num, parse_si)
from .pnp import PlugRequest, evaluate_plug_in, evaluate_unplug
from .statespace import build_augmented_dgu
from .synthesis import (ControllerGains, SynthesisOptions, solve_problem_O,
                        synthesize_all)
from .tfs import (CompensatorDesign, Rejection, closed_loop_reference_tf,
                  design_disturbance_compensator, design_prefilter,
                  desired_tf_template, disturbance_tfs)

EVENT_KINDS = ("connect", "disconnect", "load_step", "ref_step",
               "plug_in", "unplug", "switch_controller")


class SimulationError(RuntimeError):
    """Integration failed; .trace carries the samples recorded so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


# --- scenario values ------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    """One scheduled change. data is a typed payload, keys depend on kind."""

    t: float
    kind: str
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (isinstance(self.t, (int, float)) and math.isfinite(self.t) and self.t >= 0):
            raise InputError(f"event time must be finite and >= 0, got {self.t!r}")
        if self.kind not in EVENT_KINDS:
            raise InputError(f"unknown event kind {self.kind!r}")
        object.__setattr__(self, "data", dict(self.data))


@dataclass(frozen=True)
class Scenario:
    """Simulation script: duration, initial per-unit references, events.

    connected=False opens every line of the grid file at t=0; lines then
    come up through connect events. init_gains names where the initial
    controllers come from: "file" (a gains file supplied by the caller),
    "file:<path>", "synthesize:current" (design on the t=0 topology) or
    "synthesize:grid" (design on the full grid-file topology even when
    starting disconnected).
    """

    duration: float
    refs: dict
    events: tuple = ()
    connected: bool = True
    init_gains: str = "file"
    prefilter_bw: float | None = None
    compensator: bool = False

    def __post_init__(self):
        if not (isinstance(self.duration, (int, float)) and self.duration > 0
                and math.isfinite(self.duration)):
            raise InputError("scenario duration must be finite and > 0")
        evs = tuple(self.events)
        last = 0.0
        for e in evs:
            if not isinstance(e, Event):
                raise InputError("scenario events must be Event values")
            if e.t < last:
                raise InputError("event times must be nondecreasing")
            if e.t > self.duration:
                raise InputError(f"event at t={e.t} is beyond the duration")
            last = e.t
        ok = (self.init_gains in ("file", "synthesize:current", "synthesize:grid")
              or self.init_gains.startswith("file:"))
        if not ok:
            raise InputError(f"bad init_gains directive {self.init_gains!r}")
        if self.prefilter_bw is not None and not self.prefilter_bw > 0:
            raise InputError("prefilter_bw must be > 0")
        object.__setattr__(self, "events", evs)
        object.__setattr__(self, "refs", dict(self.refs))


@dataclass(frozen=True)
class SimConfig:
    """Numerical knobs. Defaults follow the stiffness of the plant: ms-scale
    solver caps normally, tightened to 10 us for a short window after every
    event, where the fast line dynamics are excited.
    """

    max_step: float = 1e-3
    tolerance: float = 1e-8
    atol: float = 1e-8
    saturation: bool = True
    record_stride: float = 1e-3
    event_max_step: float = 1e-5
    event_window: float = 2e-3
    commute_threshold: float = 0.01
    hold_window: float = 0.01
    saturation_warn_after: float = 1e-3

    def __post_init__(self):
        for name in ("max_step", "tolerance", "atol", "record_stride",
                     "event_max_step", "event_window", "commute_threshold",
                     "hold_window", "saturation_warn_after"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InputError(f"SimConfig.{name} must be finite and > 0")


# --- bumpless transfer -----------------------------------------------------------


@dataclass(frozen=True)
class BumplessState:
    """Arming bookkeeping for one pending controller replacement.

    The tracker state u_hat lives in the simulator state vector; it obeys
    d(u_hat) = -lam*u_hat + lam*w + k_i*(z_f - V) with w = u_prec_tilde
    until commutation. Commuting replaces the integrator state with
    u_hat/k_i, which continues the exact same dynamics under the new gains.
    """

    dgu_id: object
    lam: float
    commute_threshold: float
    hold_window: float
    started: float
    incoming: ControllerGains
    incoming_prefilter: PrefilterEntry | None = None
    incoming_compensator: CompensatorDesign | None = None
    armed_since: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise InputError("tracker pole must be > 0")
        if not self.incoming.k_i > self.lam:
            raise InputError(
                f"incoming integral gain {self.incoming.k_i:g} must exceed "
                f"the tracker pole {self.lam:g}")


def bumpless_switch(state: BumplessState, incoming: ControllerGains, signals: dict):
    """One arming-logic step on sampled signals.

    signals: t, u_hat, u_prec_tilde, v_pcc, i_t, u_tilde. Returns
    (updated state, commute flag, the control the incoming stack would
    apply). The flag goes up once |u_hat - u_prec_tilde| has stayed below
    the threshold for a full hold window.
    """
    if not incoming.k_i > state.lam:
        raise InputError("incoming integral gain must exceed the tracker pole")
    t = float(signals["t"])
    gap = abs(float(signals["u_hat"]) - float(signals["u_prec_tilde"]))
    if gap < state.commute_threshold:
        if state.armed_since is None:
            state = dataclasses.replace(state, armed_since=t)
    else:
        if state.armed_since is not None:
            state = dataclasses.replace(state, armed_since=None)
    commute = (state.armed_since is not None
               and t - state.armed_since >= state.hold_window - 1e-12)
    u_would = (incoming.k_v * float(signals["v_pcc"])
               + incoming.k_c * float(signals["i_t"])
               + float(signals["u_hat"]) + float(signals.get("u_tilde", 0.0)))
    return state, commute, u_would


# --- realized controller pieces ---------------------------------------------------


class _Filter:
    """State-space form of a proper rational filter (prefilter realization)."""

    def __init__(self, tf):
        if not tf.is_proper:
            raise InputError("cannot realize an improper filter")
        a, b, c, d = scipy.signal.tf2ss(tf.num, tf.den)
        self.a, self.b = np.atleast_2d(a), np.atleast_2d(b)
        self.c, self.d = np.atleast_2d(c), float(np.atleast_2d(d)[0, 0])
        self.n = self.a.shape[0]

    def dc_state(self, z: float) -> np.ndarray:
        if self.n == 0:
            return np.zeros(0)
        return np.linalg.solve(-self.a, self.b[:, 0] * z)

    def output(self, x: np.ndarray, z: float) -> float:
        if self.n == 0:
            return self.d * z
        return float(self.c[0] @ x) + self.d * z

    def deriv(self, x: np.ndarray, z: float) -> np.ndarray:
        return self.a @ x + self.b[:, 0] * z


class _Compensator:
    """Realization of a proper compensator acting on the measured load
    current. An improper (exact) design is rejected here: a load step is a
    jump in I_L, and only a realizable filter that differentiates the
    measured signal through its own fast pole carries the impulsive content
    that re-aligns the converter current. Ask the designer for a proper
    approximation instead.
    """

    def __init__(self, design: CompensatorDesign):
        if not design.tf.is_proper:
            raise InputError(
                "simulation needs a realizable compensator; design one with "
                "require_proper=True (roll-off approximation)")
        self.filt = _Filter(design.tf)
        self.n = self.filt.n
        self._dc = design.tf.dc_gain()

    def dc_state(self, i_l: float) -> np.ndarray:
        return self.filt.dc_state(i_l)

    def output(self, x: np.ndarray, i_l: float) -> float:
        return self.filt.output(x, i_l)

    def deriv(self, x: np.ndarray, i_l: float) -> np.ndarray:
        return self.filt.deriv(x, i_l)

    def dc_gain(self) -> float:
        return self._dc


# --- active configuration ----------------------------------------------------------


class _UnitRec:
    __slots__ = ("did", "base", "p", "gains", "ref", "pf", "pf_sl", "comp",
                 "comp_sl", "pend", "pend_pf", "pend_pf_sl", "pend_comp",
                 "pend_comp_sl", "hat_ix")

    def __init__(self, did, p):
        self.did = did
        self.p = p
        self.gains = None
        self.ref = 0.0
        self.pf = None
        self.pf_sl = None
        self.comp = None
        self.comp_sl = None
        self.pend = None            # BumplessState or None
        self.pend_pf = None
        self.pend_pf_sl = None
        self.pend_comp = None
        self.pend_comp_sl = None
        self.hat_ix = None


class _Config:
    """One constant-structure interval: active units, closed lines, and the
    state-vector layout. Rebuilt at every event; states migrate by key.
    """

    def __init__(self, params, refs, gains, prefilters, compensators,
                 pendings, active_lines):
        self.ids = sorted(params, key=str)
        self.units = []
        ix = 0
        for did in self.ids:
            u = _UnitRec(did, params[did])
            u.base = ix
            ix += 3
            u.gains = gains.get(did)
            u.ref = float(refs.get(did, 0.0))
            self.units.append(u)
        for u in self.units:
            pf = prefilters.get(u.did)
            if pf is not None:
                u.pf = (_Filter(pf.tf), pf)
                u.pf_sl = slice(ix, ix + u.pf[0].n)
                ix += u.pf[0].n
        for u in self.units:
            cd = compensators.get(u.did)
            if cd is not None:
                u.comp = (_Compensator(cd), cd)
                u.comp_sl = slice(ix, ix + u.comp[0].n)
                ix += u.comp[0].n
        for u in self.units:
            pend = pendings.get(u.did)
            if pend is None:
                continue
            u.pend = pend
            if pend.incoming_prefilter is not None:
                u.pend_pf = (_Filter(pend.incoming_prefilter.tf), pend.incoming_prefilter)
                u.pend_pf_sl = slice(ix, ix + u.pend_pf[0].n)
                ix += u.pend_pf[0].n
            if pend.incoming_compensator is not None:
                u.pend_comp = (_Compensator(pend.incoming_compensator), pend.incoming_compensator)
                u.pend_comp_sl = slice(ix, ix + u.pend_comp[0].n)
                ix += u.pend_comp[0].n
            u.hat_ix = ix
            ix += 1
        self.edges = []
        for key in sorted(active_lines, key=lambda k: (str(k[0]), str(k[1]))):
            if key[0] not in params or key[1] not in params:
                raise InputError(f"line {key} references a unit that is not active")
            self.edges.append((key, active_lines[key], ix))
            ix += 1
        self.n = ix
        self.by_id = {u.did: u for u in self.units}
        self.pos = {u.did: k for k, u in enumerate(self.units)}

    # semantic keys for state migration across layout changes
    def keys(self):
        out = {}
        for u in self.units:
            for k in range(3):
                out[("unit", u.did, k)] = u.base + k
            for tag, sl in (("pf", u.pf_sl), ("comp", u.comp_sl),
                            ("pend_pf", u.pend_pf_sl), ("pend_comp", u.pend_comp_sl)):
                if sl is not None:
                    for k in range(sl.stop - sl.start):
                        out[(tag, u.did, k)] = sl.start + k
            if u.hat_ix is not None:
                out[("hat", u.did)] = u.hat_ix
        for key, _lp, ix in self.edges:
            out[("edge", key)] = ix
        return out


def _migrate(old_cfg, x_old, new_cfg, overrides=None, renames=None):
    """Carry state across a layout change. overrides force values by key;
    renames map a new key to the old key it continues."""
    overrides = overrides or {}
    renames = renames or {}
    old_keys = old_cfg.keys() if old_cfg is not None else {}
    x_new = np.zeros(new_cfg.n)
    for key, ix in new_cfg.keys().items():
        if key in overrides:
            x_new[ix] = overrides[key]
            continue
        src = renames.get(key, key)
        if src in old_keys:
            x_new[ix] = x_old[old_keys[src]]
    return x_new


def _eval(cfg, t, x, cfg_sat, want_out=False):
    """Derivative of the full state, optionally with the recorded signals."""
    dx = np.zeros_like(x)
    line_in = {u.did: 0.0 for u in cfg.units}
    for (a, b), lp, ix in cfg.edges:
        cur = x[ix]
        va = x[cfg.by_id[a].base]
        vb = x[cfg.by_id[b].base]
        dx[ix] = (vb - va - lp.r * cur) / lp.l
        line_in[a] += cur
        line_in[b] -= cur
    out = {} if want_out else None
    for u in cfg.units:
        v_pcc = x[u.base]
        i_t = x[u.base + 1]
        vi = x[u.base + 2]
        p = u.p
        inv_rl = 1.0 / p.load_r if p.load_r is not None else 0.0
        i_l = v_pcc * inv_rl
        v_dot = (i_t - i_l + line_in[u.did]) / p.c_t
        z = u.ref
        if u.pf is not None:
            xf = x[u.pf_sl]
            zf = u.pf[0].output(xf, z)
            dx[u.pf_sl] = u.pf[0].deriv(xf, z)
        else:
            zf = z
        u_tilde = 0.0
        if u.comp is not None:
            xc = x[u.comp_sl]
            u_tilde = u.comp[0].output(xc, i_l)
            if u.comp[0].n:
                dx[u.comp_sl] = u.comp[0].deriv(xc, i_l)
        if u.gains is not None:
            g = u.gains
            u_raw = g.k_v * v_pcc + g.k_c * i_t + g.k_i * vi + u_tilde
        else:
            u_raw = 0.0
        u_app = min(max(u_raw, 0.0), p.v_dc) if cfg_sat else u_raw
        dx[u.base] = v_dot
        dx[u.base + 1] = (-v_pcc - p.r_t * i_t + u_app) / p.l_t
        dx[u.base + 2] = zf - v_pcc

        if u.pend is not None:
            pend = u.pend
            gn = pend.incoming
            if u.pend_pf is not None:
                xfn = x[u.pend_pf_sl]
                zfn = u.pend_pf[0].output(xfn, z)
                dx[u.pend_pf_sl] = u.pend_pf[0].deriv(xfn, z)
            else:
                zfn = z
            ut_new = 0.0
            if u.pend_comp is not None:
                xcn = x[u.pend_comp_sl]
                ut_new = u.pend_comp[0].output(xcn, i_l)
                if u.pend_comp[0].n:
                    dx[u.pend_comp_sl] = u.pend_comp[0].deriv(xcn, i_l)
            u_hat = x[u.hat_ix]
            u_prec_tilde = u_app - gn.k_v * v_pcc - gn.k_c * i_t - ut_new
            dx[u.hat_ix] = (-pend.lam * u_hat + pend.lam * u_prec_tilde
                            + gn.k_i * (zfn - v_pcc))
            if want_out:
                out[f"_uhat_{u.did}"] = u_hat
                out[f"_uprec_tilde_{u.did}"] = u_prec_tilde
                out[f"_utilde_new_{u.did}"] = ut_new
        if want_out:
            did = u.did
            out[f"V_{did}"] = v_pcc
            out[f"It_{did}"] = i_t
            out[f"vi_{did}"] = vi
            out[f"u_{did}"] = u_app
            out[f"IL_{did}"] = i_l
            out[f"ref_{did}"] = z
            out[f"_sat_{did}"] = 1.0 if (cfg_sat and u_raw != u_app) else 0.0
    if want_out:
        for (a, b), _lp, ix in cfg.edges:
            out[f"I_{a}_{b}"] = x[ix]
            out[f"I_{b}_{a}"] = -x[ix]
    return dx, out


# --- trace -----------------------------------------------------------------------


@dataclass
class SimTrace:
    """Recorded run: one row per record-grid time, NaN where a unit or line
    was not active. events log the applied (or denied) schedule."""

    time: np.ndarray
    columns: dict
    events: list
    warnings: list
    dgu_ids: list
    edges: list

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise InputError(f"no trace column {name!r}")
        return self.columns[name]


def metrics(trace: SimTrace, dgu, window, band: float | None = None) -> dict:
    """Settling/overshoot/steady-state numbers for one unit over a window.

    settling_time is measured from the last event inside the window (or the
    window start) to the first sample after which |V - ref| stays inside the
    band; inf when it never settles. band defaults to 2% of the step implied
    by the window, with a 0.01 V floor.
    """
    t0, t1 = float(window[0]), float(window[1])
    if not t1 > t0:
        raise InputError("window must satisfy t1 > t0")
    t = trace.time
    mask = (t >= t0) & (t <= t1)
    if not np.any(mask):
        raise InputError("window contains no samples")
    tt = t[mask]
    v = trace.column(f"V_{dgu}")[mask]
    ref = trace.column(f"ref_{dgu}")[mask]
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(ref))):
        raise InputError(f"unit {dgu!r} is not active over the whole window")
    ev_times = [et for et, _ in trace.events if t0 <= et <= t1]
    t_ref = max([t0] + ev_times)
    k0 = int(np.searchsorted(tt, t_ref))
    k0 = min(k0, tt.size - 1)
    ref_final = float(ref[-1])
    step = ref_final - float(v[k0])
    if band is None:
        band = max(0.02 * abs(step), 0.01)
    err = np.abs(v - ref)
    inside = err < band
    settling = math.inf
    for k in range(k0, tt.size):
        if np.all(inside[k:]):
            settling = float(tt[k] - t_ref)
            break
    seg = v[k0:]
    if abs(step) > band:
        overshoot = max(0.0, float(np.max(np.sign(step) * (seg - ref_final))) / abs(step))
    else:
        overshoot = 0.0  # below the band there is no transition to overshoot
    tail = max(1, int(0.1 * tt.size))
    sse = abs(float(np.mean(v[-tail:] - ref[-tail:])))
    return {
        "settling_time": settling,
        "overshoot": overshoot,
        "steady_state_error": sse,
        "peak_deviation": float(np.max(err)),
    }


def export_trace_csv(trace: SimTrace, path) -> None:
    cols = ["time"]
    for did in trace.dgu_ids:
        cols += [f"V_{did}", f"It_{did}", f"vi_{did}", f"u_{did}",
                 f"IL_{did}", f"ref_{did}"]
    for (a, b) in trace.edges:
        cols += [f"I_{a}_{b}", f"I_{b}_{a}"]
    arrays = [trace.time] + [trace.columns[c] for c in cols[1:]]
    with open(path, "w", encoding="utf-8") as fh:
        for et, label in trace.events:
            fh.write(f"# event: {format_num(et)} {label}\n")
        for w in trace.warnings:
            fh.write(f"# warning: {w}\n")
        fh.write(",".join(cols) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(format_num(float(v)) for v in row) + "\n")


def load_trace_csv(path) -> SimTrace:
    events, warnings_, rows, header = [], [], [], None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read trace file {path}: {exc}") from exc
    with fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# event: "):
                tok = line[len("# event: "):].split(" ", 1)
                events.append((float(tok[0]), tok[1] if len(tok) > 1 else ""))
            elif line.startswith("# warning: "):
                warnings_.append(line[len("# warning: "):])
            elif line.startswith("#"):
                continue
            elif header is None:
                header = line.split(",")
            else:
                rows.append([float(v) for v in line.split(",")])
    if header is None or header[0] != "time":
        raise InputError("trace file has no header row")
    data = np.array(rows, dtype=float) if rows else np.zeros((0, len(header)))
    columns = {name: data[:, k] for k, name in enumerate(header)}
    dgu_ids = [_coerce_id(n[2:]) for n in header if n.startswith("V_")]
    edges, seen = [], set()
    for n in header:
        if n.startswith("I_") and not n.startswith("IL_") and not n.startswith("It_"):
            a, b = n[2:].split("_", 1)
            key = tuple(sorted((_coerce_id(a), _coerce_id(b)), key=str))
            if key not in seen:
                seen.add(key)
                edges.append(key)
    return SimTrace(time=columns.pop("time"), columns=columns, events=events,
                    warnings=warnings_, dgu_ids=dgu_ids, edges=edges)


# --- scenario files ----------------------------------------------------------------


def _parse_bool(text: str, what: str) -> bool:
    if text in ("true", "yes", "1"):
        return True
    if text in ("false", "no", "0"):
        return False
    raise InputError(f"{what} must be true or false, got {text!r}")


def _parse_event(sec: str, kv: dict) -> Event:
    try:
        t = parse_si(kv.pop("t"))
        kind = kv.pop("kind")
    except KeyError as exc:
        raise InputError(f"[{sec}] missing key {exc}") from exc
    data = {}
    try:
        if kind in ("connect", "disconnect"):
            data["i"] = _coerce_id(kv.pop("i"))
            data["j"] = _coerce_id(kv.pop("j"))
        elif kind == "load_step":
            data["i"] = _coerce_id(kv.pop("i"))
            data["r"] = parse_si(kv.pop("r"))
        elif kind == "ref_step":
            data["i"] = _coerce_id(kv.pop("i"))
            data["v"] = parse_si(kv.pop("v"))
        elif kind == "plug_in":
            data["i"] = _coerce_id(kv.pop("i"))
            for name in ("r_t", "l_t", "c_t", "v_dc", "ref"):
                data[name] = parse_si(kv.pop(name))
            if "load_r" in kv:
                data["load_r"] = parse_si(kv.pop("load_r"))
            lines = {}
            for key in [k for k in kv if k.startswith("line.")]:
                j = _coerce_id(key[5:])
                tok = kv.pop(key).split()
                if len(tok) != 2:
                    raise InputError(f"[{sec}] {key} must hold 'R L'")
                lines[j] = LineParams(parse_si(tok[0]), parse_si(tok[1]))
            data["lines"] = lines
            data["policy"] = kv.pop("policy", "keep-if-valid")
            data["bumpless"] = _parse_bool(kv.pop("bumpless", "true"), "bumpless")
        elif kind == "unplug":
            data["i"] = _coerce_id(kv.pop("i"))
            data["policy"] = kv.pop("policy", "keep-if-valid")
            data["bumpless"] = _parse_bool(kv.pop("bumpless", "true"), "bumpless")
        elif kind == "switch_controller":
            data["i"] = _coerce_id(kv.pop("i"))
            data["gains"] = kv.pop("gains", "synthesize:current")
            data["bumpless"] = _parse_bool(kv.pop("bumpless", "true"), "bumpless")
            if "prefilter_bw" in kv:
                data["prefilter_bw"] = parse_si(kv.pop("prefilter_bw"))
            if "compensator" in kv:
                data["compensator"] = _parse_bool(kv.pop("compensator"), "compensator")
        else:
            raise InputError(f"[{sec}] unknown event kind {kind!r}")
    except KeyError as exc:
        raise InputError(f"[{sec}] missing key {exc}") from exc
    if kv:
        raise InputError(f"[{sec}] unknown keys: {sorted(kv)}")
    return Event(t=t, kind=kind, data=data)


def parse_scenario(text: str) -> Scenario:
    cp = _make_parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InputError(f"malformed scenario file: {exc}") from exc
    if "scenario" not in cp:
        raise InputError("scenario file needs a [scenario] section")
    head = dict(cp["scenario"])
    try:
        duration = parse_si(head.pop("duration"))
    except KeyError as exc:
        raise InputError(f"[scenario] missing key {exc}") from exc
    connected = _parse_bool(head.pop("connected", "true"), "connected")
    if head:
        raise InputError(f"[scenario] unknown keys: {sorted(head)}")

    refs, init_gains, prefilter_bw, compensator = {}, "file", None, False
    if "init" in cp:
        kv = dict(cp["init"])
        for key in [k for k in kv if k.startswith("ref.")]:
            refs[_coerce_id(key[4:])] = parse_si(kv.pop(key))
        init_gains = kv.pop("gains", "file")
        if "prefilter_bw" in kv:
            prefilter_bw = parse_si(kv.pop("prefilter_bw"))
        if "compensator" in kv:
            compensator = _parse_bool(kv.pop("compensator"), "compensator")
        if kv:
            raise InputError(f"[init] unknown keys: {sorted(kv)}")

    numbered = []
    for sec in cp.sections():
        if sec in ("scenario", "init"):
            continue
        if not sec.startswith("event."):
            raise InputError(f"unknown section [{sec}]")
        try:
            n = int(sec[6:])
        except ValueError as exc:
            raise InputError(f"event sections are [event.<number>], got [{sec}]") from exc
        numbered.append((n, _parse_event(sec, dict(cp[sec]))))
    numbered.sort(key=lambda p: p[0])
    events = tuple(e for _, e in numbered)
    return Scenario(duration=duration, refs=refs, events=events,
                    connected=connected, init_gains=init_gains,
                    prefilter_bw=prefilter_bw, compensator=compensator)


def load_scenario(path: str | os.PathLike) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_scenario(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read scenario file {path}: {exc}") from exc


def dump_scenario(s: Scenario) -> str:
    out = io.StringIO()
    out.write(f"[scenario]\nduration = {format_num(s.duration)}\n")
    out.write(f"connected = {'true' if s.connected else 'false'}\n\n[init]\n")
    for did in sorted(s.refs, key=str):
        out.write(f"ref.{did} = {format_num(s.refs[did])}\n")
    out.write(f"gains = {s.init_gains}\n")
    if s.prefilter_bw is not None:
        out.write(f"prefilter_bw = {format_num(s.prefilter_bw)}\n")
    if s.compensator:
        out.write("compensator = true\n")
    out.write("\n")
    for n, e in enumerate(s.events, 1):
        out.write(f"[event.{n}]\nt = {format_num(e.t)}\nkind = {e.kind}\n")
        for key in sorted(e.data):
            val = e.data[key]
            if key == "lines":
                for j in sorted(val, key=str):
                    lp = val[j]
                    out.write(f"line.{j} = {format_num(lp.r)} {format_num(lp.l)}\n")
            elif isinstance(val, bool):
                out.write(f"{key} = {'true' if val else 'false'}\n")
            elif isinstance(val, float):
                out.write(f"{key} = {format_num(val)}\n")
            else:
                out.write(f"{key} = {val}\n")
        out.write("\n")
    return out.getvalue()


def save_scenario(s: Scenario, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_scenario(s))


# --- initial controller resolution ---------------------------------------------------


def _design_stack(aug, gains, bw, order, want_comp):
    """(PrefilterEntry|None, CompensatorDesign|None, [warnings])."""
    warn = []
    pf = comp = None
    f = closed_loop_reference_tf(aug, gains)
    if bw is not None:
        use_order = order if order is not None else max(f.relative_degree, 1)
        res = design_prefilter(f, desired_tf_template(bw, use_order))
        if isinstance(res, Rejection):
            warn.append(f"prefilter rejected ({res.reason}): {res.detail}")
        else:
            pf = PrefilterEntry(tf=res, bandwidth_hz=float(bw), order=use_order)
    if want_comp:
        g_d, g_u = disturbance_tfs(aug, gains)
        res = design_disturbance_compensator(
            g_d, g_u, require_proper=True,
            fallback_bandwidth_hz=bw if bw is not None else 100.0)
        if isinstance(res, Rejection):
            warn.append(f"compensator rejected ({res.reason}): {res.detail}")
        else:
            comp = res
    return pf, comp, warn


def resolve_scenario(g: GridGraph, scenario: Scenario,
                     gains_file: GainsFile | None = None,
                     opts: SynthesisOptions | None = None):
    """Produce the (gains, prefilters, compensators) the scenario starts with."""
    directive = scenario.init_gains
    prefilters, compensators = {}, {}
    if directive == "file" or directive.startswith("file:"):
        gf = gains_file if directive == "file" else load_gains(directive[5:])
        if gf is None:
            raise InputError("scenario wants initial gains from a file, none was given")
        gains = dict(gf.gains)
        prefilters = dict(gf.prefilters)
        compensators = dict(gf.compensators)
        missing = [i for i in g.dgu_ids() if i not in gains]
        if missing:
            raise InputError(f"gains file lacks entries for DGU(s) {missing!r}")
    elif directive == "synthesize:current":
        gains = synthesize_all(g, opts=opts, isolated=not scenario.connected)
    else:  # synthesize:grid
        gains = synthesize_all(g, opts=opts)
    if (scenario.prefilter_bw is not None or scenario.compensator):
        for i in g.dgu_ids():
            if i in prefilters or i in compensators:
                continue
            topo = g if scenario.connected else g.without_lines_of(i)
            aug = build_augmented_dgu(topo, i)
            pf, comp, _ = _design_stack(aug, gains[i], scenario.prefilter_bw,
                                        None, scenario.compensator)
            if pf is not None:
                prefilters[i] = pf
            if comp is not None:
                compensators[i] = comp
    return gains, prefilters, compensators


# --- the engine -----------------------------------------------------------------------


class _Engine:
    def __init__(self, g, gains, prefilters, compensators, scenario, cfg, opts):
        self.cfg = cfg
        self.opts = opts
        self.scenario = scenario
        self.params = dict(g.dgus)
        self.known_lines = dict(g.lines)
        self.active_lines = dict(g.lines) if scenario.connected else {}
        self.refs = {}
        for i in g.dgu_ids():
            if i not in scenario.refs:
                raise InputError(f"scenario gives no reference for DGU {i!r}")
            self.refs[i] = float(scenario.refs[i])
        self.passive = gains is None
        if self.passive:
            self.gains = {}
        else:
            missing = [i for i in g.dgu_ids() if i not in gains]
            if missing:
                raise InputError(f"gains missing for DGU(s) {missing!r}")
            self.gains = dict(gains)
        self.prefilters = dict(prefilters or {})
        self.compensators = dict(compensators or {})
        if self.passive and (self.prefilters or self.compensators):
            raise InputError("filters need controllers; passive runs take none")
        self.pendings = {}
        self.events_log = []
        self.warnings = []
        self.pieces = []          # (t_array, rows list of out-dicts)
        self.seen_ids = set(self.params)
        self.seen_edges = set(self.active_lines)
        self.cfgobj = self._build()
        self.x = np.zeros(self.cfgobj.n)

    # -- configuration plumbing
    def _build(self):
        return _Config(self.params, self.refs, {} if self.passive else self.gains,
                       self.prefilters, self.compensators, self.pendings,
                       self.active_lines)

    def _rebuild(self, overrides=None, renames=None):
        new = _Config(self.params, self.refs, {} if self.passive else self.gains,
                      self.prefilters, self.compensators, self.pendings,
                      self.active_lines)
        self.x = _migrate(self.cfgobj, self.x, new, overrides, renames)
        self.cfgobj = new
        self.seen_ids |= set(self.params)
        self.seen_edges |= set(self.active_lines)

    def _graph(self) -> GridGraph:
        return GridGraph(dgus=dict(self.params), lines=dict(self.active_lines))

    # -- integration
    def _record_grid(self, t0, t1):
        stride = self.cfg.record_stride
        k0 = math.ceil(round(t0 / stride, 9))
        k1 = math.floor(round(t1 / stride, 9))
        pts = [t0]
        for k in range(k0, k1 + 1):
            p = k * stride
            # keep only interior grid points; endpoints are pinned exactly
            if p > t0 + 1e-12 and p < t1 - 1e-12:
                pts.append(p)
        pts.append(t1)
        return np.array(pts)

    def _solve(self, t0, t1, max_step, t_eval):
        cfg = self.cfgobj
        sat = self.cfg.saturation

        def rhs(t, x):
            return _eval(cfg, t, x, sat)[0]

        sol = scipy.integrate.solve_ivp(
            rhs, (t0, t1), self.x, method="Radau", rtol=self.cfg.tolerance,
            atol=self.cfg.atol, max_step=max_step, t_eval=t_eval)
        if not sol.success or not np.all(np.isfinite(sol.y)):
            reached = sol.t[-1] if sol.t.size else t0
            raise SimulationError(
                f"integration failed at t = {reached:g}: {sol.message}",
                trace=self._assemble())
        return sol

    def _rows(self, ts, ys):
        cfg = self.cfgobj
        sat = self.cfg.saturation
        rows = []
        for k in range(ts.size):
            rows.append(_eval(cfg, ts[k], ys[:, k], sat, want_out=True)[1])
        return rows

    def _scan_pendings(self, ts, rows):
        """Walk recorded samples updating arming state; return index of the
        first commutation and the unit, or (None, None)."""
        cfg = self.cfgobj
        for k in range(ts.size):
            for u in cfg.units:
                if u.pend is None:
                    continue
                did = u.did
                sig = {
                    "t": ts[k],
                    "u_hat": rows[k][f"_uhat_{did}"],
                    "u_prec_tilde": rows[k][f"_uprec_tilde_{did}"],
                    "v_pcc": rows[k][f"V_{did}"],
                    "i_t": rows[k][f"It_{did}"],
                    "u_tilde": rows[k][f"_utilde_new_{did}"],
                }
                new_state, commute, _ = bumpless_switch(u.pend, u.pend.incoming, sig)
                u.pend = new_state
                self.pendings[did] = new_state
                if commute:
                    return k, did
        return None, None

    def _run_interval(self, t0, t1, fresh_event):
        """Integrate [t0, t1] applying post-event refinement and pending
        controller switches; records samples; returns when t1 is reached."""
        cur = t0
        refine_until = t0 + self.cfg.event_window if fresh_event else t0
        while cur < t1 - 1e-15:
            if cur < refine_until - 1e-15:
                seg_end = min(refine_until, t1)
                step = self.cfg.event_max_step
            else:
                seg_end = t1
                step = self.cfg.max_step
            t_eval = self._record_grid(cur, seg_end)
            sol = self._solve(cur, seg_end, step, t_eval)
            rows = self._rows(sol.t, sol.y)
            if any(u.pend is not None for u in self.cfgobj.units):
                k, did = self._scan_pendings(sol.t, rows)
            else:
                k = did = None
            if k is not None:
                self._push_piece(sol.t[: k + 1], rows[: k + 1])
                self.x = sol.y[:, k]
                t_star = float(sol.t[k])
                self._commute(did, t_star)
                cur = t_star
                refine_until = t_star + self.cfg.event_window
                if cur >= t1 - 1e-15:
                    break
                continue
            self._push_piece(sol.t, rows)
            self.x = sol.y[:, -1]
            cur = float(sol.t[-1])

    def _push_piece(self, ts, rows):
        if self.pieces and ts.size and abs(self.pieces[-1][0][-1] - ts[0]) < 1e-15:
            ts = ts[1:]
            rows = rows[1:]
        if len(rows):
            self.pieces.append((np.asarray(ts, dtype=float), rows))

    # -- controller replacement
    def _commute(self, did, t_star):
        u = self.cfgobj.by_id[did]
        pend = u.pend
        old_keys = self.cfgobj.keys()
        u_hat = self.x[old_keys[("hat", did)]]
        gn = pend.incoming
        self.gains[did] = gn
        if pend.incoming_prefilter is not None:
            self.prefilters[did] = pend.incoming_prefilter
        else:
            self.prefilters.pop(did, None)
        if pend.incoming_compensator is not None:
            self.compensators[did] = pend.incoming_compensator
        else:
            self.compensators.pop(did, None)
        del self.pendings[did]
        renames = {}
        if pend.incoming_prefilter is not None:
            for k in range(_Filter(pend.incoming_prefilter.tf).n):
                renames[("pf", did, k)] = ("pend_pf", did, k)
        if pend.incoming_compensator is not None:
            for k in range(_Compensator(pend.incoming_compensator).n):
                renames[("comp", did, k)] = ("pend_comp", did, k)
        overrides = {("unit", did, 2): float(u_hat) / gn.k_i}
        self._rebuild(overrides=overrides, renames=renames)
        self.events_log.append((t_star, f"commute {did}"))

    def _schedule_switch(self, t, did, incoming, bumpless, pf_entry, comp_design):
        if bumpless and not self.passive and self.gains.get(did) is not None:
            lam = 0.1 * incoming.k_i
            pend = BumplessState(
                dgu_id=did, lam=lam,
                commute_threshold=self.cfg.commute_threshold,
                hold_window=self.cfg.hold_window, started=t,
                incoming=incoming, incoming_prefilter=pf_entry,
                incoming_compensator=comp_design)
            self.pendings[did] = pend
            base = self.cfgobj.by_id[did].base
            v_now = float(self.x[base])
            it_now = float(self.x[base + 1])
            p = self.params[did]
            i_l = v_now / p.load_r if p.load_r is not None else 0.0
            _, out_now = _eval(self.cfgobj, t, self.x, self.cfg.saturation,
                               want_out=True)
            u_now = out_now[f"u_{did}"]
            overrides = {}
            ut_new = 0.0
            if comp_design is not None:
                compn = _Compensator(comp_design)
                dc = compn.dc_state(i_l)
                for k in range(compn.n):
                    overrides[("pend_comp", did, k)] = dc[k]
                ut_new = compn.output(dc, i_l)
            # seed the tracker on the signal it tracks so a quiescent switch
            # commutes without any residual step
            overrides[("hat", did)] = (u_now - incoming.k_v * v_now
                                       - incoming.k_c * it_now - ut_new)
            if pf_entry is not None:
                filt = _Filter(pf_entry.tf)
                dc = filt.dc_state(self.refs[did])
                for k in range(filt.n):
                    overrides[("pend_pf", did, k)] = dc[k]
            self._rebuild(overrides=overrides)
        else:
            # hard swap; filters re-initialized at their DC equilibrium
            self.gains[did] = incoming
            overrides = {}
            if pf_entry is not None:
                self.prefilters[did] = pf_entry
                filt = _Filter(pf_entry.tf)
                dc = filt.dc_state(self.refs[did])
                for k in range(filt.n):
                    overrides[("pf", did, k)] = dc[k]
            else:
                self.prefilters.pop(did, None)
            if comp_design is not None:
                self.compensators[did] = comp_design
            else:
                self.compensators.pop(did, None)
            self._rebuild(overrides=overrides)

    def _redesign_filters(self, did, incoming, bw, want_comp, order=None):
        """New filter stack for a unit whose gains change, on the active topology."""
        if bw is None and not want_comp:
            return None, None
        aug = build_augmented_dgu(self._graph(), did)
        pf, comp, warn = _design_stack(aug, incoming, bw, order, want_comp)
        for w in warn:
            self.warnings.append(f"DGU {did}: {w}")
        return pf, comp

    # -- events
    def _resolve_gain_directive(self, directive, did):
        if isinstance(directive, ControllerGains):
            return directive
        if directive == "synthesize:current":
            aug = build_augmented_dgu(self._graph(), did)
            return solve_problem_O(aug, opts=self.opts)
        if directive.startswith("file:"):
            gf = load_gains(directive[5:])
            if did not in gf.gains:
                raise InputError(f"gains file {directive[5:]} has no entry for {did!r}")
            return gf.gains[did]
        raise InputError(f"bad gains directive {directive!r}")

    def _apply_event(self, e: Event):
        d = e.data
        if e.kind == "connect":
            key = _edge_key(d["i"], d["j"])
            if key in self.active_lines:
                raise InputError(f"line {key} is already connected at t={e.t}")
            if key not in self.known_lines:
                raise InputError(f"no such line {key} in the grid")
            for end in key:
                if end not in self.params:
                    raise InputError(f"line {key} endpoint {end!r} is not active")
            self.active_lines[key] = self.known_lines[key]
            self._rebuild(overrides={("edge", key): 0.0})
            self.events_log.append((e.t, f"connect {key[0]}-{key[1]}"))
        elif e.kind == "disconnect":
            key = _edge_key(d["i"], d["j"])
            if key not in self.active_lines:
                raise InputError(f"line {key} is not connected at t={e.t}")
            del self.active_lines[key]
            self._rebuild()
            self.events_log.append((e.t, f"disconnect {key[0]}-{key[1]}"))
        elif e.kind == "load_step":
            did = d["i"]
            if did not in self.params:
                raise InputError(f"load_step on unknown DGU {did!r}")
            self.params[did] = dataclasses.replace(self.params[did], load_r=d["r"])
            self._rebuild()
            self.events_log.append((e.t, f"load_step {did} -> {d['r']:g}"))
        elif e.kind == "ref_step":
            did = d["i"]
            if did not in self.refs:
                raise InputError(f"ref_step on unknown DGU {did!r}")
            self.refs[did] = float(d["v"])
            self._rebuild()
            self.events_log.append((e.t, f"ref_step {did} -> {d['v']:g}"))
        elif e.kind == "switch_controller":
            did = d["i"]
            if did not in self.params:
                raise InputError(f"switch_controller on unknown DGU {did!r}")
            if self.passive:
                raise InputError("switch_controller in a passive run")
            incoming = self._resolve_gain_directive(d["gains"], did)
            bw = d.get("prefilter_bw")
            want_comp = d.get("compensator")
            cur_pf = self.prefilters.get(did)
            if bw is None and cur_pf is not None:
                bw = cur_pf.bandwidth_hz
            if want_comp is None:
                want_comp = did in self.compensators
            order = cur_pf.order if (cur_pf is not None and d.get("prefilter_bw") is None) else None
            pf, comp = self._redesign_filters(did, incoming, bw, want_comp, order)
            self._schedule_switch(e.t, did, incoming, d["bumpless"], pf, comp)
            self.events_log.append((e.t, f"switch_controller {did}"))
        elif e.kind == "plug_in":
            self._apply_plug_in(e)
        elif e.kind == "unplug":
            self._apply_unplug(e)

    def _apply_plug_in(self, e: Event):
        d = e.data
        did = d["i"]
        new_dgu = DguParams(r_t=d["r_t"], l_t=d["l_t"], c_t=d["c_t"],
                            v_dc=d["v_dc"], load_r=d.get("load_r"))
        req = PlugRequest(kind="plug_in", dgu_id=did, new_dgu=new_dgu,
                          new_lines=d["lines"])
        if self.passive:
            raise InputError("plug_in in a passive run")
        dec = evaluate_plug_in(self._graph(), self.gains, req, opts=self.opts,
                               policy=d["policy"])
        if not dec.allowed:
            self.warnings.append(f"plug_in of {did!r} denied: {dec.denial_reason}")
            self.events_log.append((e.t, f"plug_in {did} DENIED"))
            return
        self.params[did] = new_dgu
        self.refs[did] = float(d["ref"])
        gn = dec.new_gains[did]
        self.gains[did] = gn
        overrides = {}
        for j, lp in d["lines"].items():
            key = _edge_key(did, j)
            self.known_lines[key] = lp
            self.active_lines[key] = lp
            overrides[("edge", key)] = 0.0
        # filters are designed against the post-plug topology
        pf, comp = self._redesign_filters(
            did, gn, self.scenario.prefilter_bw, self.scenario.compensator)
        if pf is not None:
            self.prefilters[did] = pf
        if comp is not None:
            self.compensators[did] = comp
        # the unit arrives at the steady state it held while isolated
        v0 = self.refs[did]
        i_l0 = v0 / new_dgu.load_r if new_dgu.load_r is not None else 0.0
        compn = _Compensator(comp) if comp is not None else None
        u_t0 = compn.dc_gain() * i_l0 if compn is not None else 0.0
        u0 = v0 + new_dgu.r_t * i_l0
        vi0 = (u0 - gn.k_v * v0 - gn.k_c * i_l0 - u_t0) / gn.k_i
        overrides[("unit", did, 0)] = v0
        overrides[("unit", did, 1)] = i_l0
        overrides[("unit", did, 2)] = vi0
        if pf is not None:
            filt = _Filter(pf.tf)
            dc = filt.dc_state(v0)
            for k in range(filt.n):
                overrides[("pf", did, k)] = dc[k]
        if compn is not None:
            dcc = compn.dc_state(i_l0)
            for k in range(compn.n):
                overrides[("comp", did, k)] = dcc[k]
        # neighbors whose certificates did not survive get new controllers
        retuned = {k: v for k, v in dec.new_gains.items() if k != did}
        self._rebuild(overrides=overrides)
        for j, gj in retuned.items():
            bw = self.prefilters[j].bandwidth_hz if j in self.prefilters else None
            pfj, compj = self._redesign_filters(j, gj, bw, j in self.compensators)
            self._schedule_switch(e.t, j, gj, d["bumpless"], pfj, compj)
        self.events_log.append((e.t, f"plug_in {did}"))

    def _apply_unplug(self, e: Event):
        d = e.data
        did = d["i"]
        if did not in self.params:
            raise InputError(f"unplug of unknown DGU {did!r}")
        if self.passive:
            raise InputError("unplug in a passive run")
        req = PlugRequest(kind="unplug", dgu_id=did)
        dec = evaluate_unplug(self._graph(), self.gains, req, opts=self.opts,
                              policy=d["policy"])
        if not dec.allowed:
            self.warnings.append(f"unplug of {did!r} denied: {dec.denial_reason}")
            self.events_log.append((e.t, f"unplug {did} DENIED"))
            return
        if did in self.pendings:
            self.warnings.append(
                f"DGU {did!r} unplugged while a controller switch was pending")
            del self.pendings[did]
        del self.params[did]
        del self.refs[did]
        self.gains.pop(did, None)
        self.prefilters.pop(did, None)
        self.compensators.pop(did, None)
        self.active_lines = {k: v for k, v in self.active_lines.items() if did not in k}
        self._rebuild()
        for j, gj in dec.new_gains.items():
            bw = self.prefilters[j].bandwidth_hz if j in self.prefilters else None
            pfj, compj = self._redesign_filters(j, gj, bw, j in self.compensators)
            self._schedule_switch(e.t, j, gj, d["bumpless"], pfj, compj)
        self.events_log.append((e.t, f"unplug {did}"))

    # -- top level
    def run(self) -> SimTrace:
        sc = self.scenario
        t = 0.0
        fresh = True  # startup counts as an event for step refinement
        k = 0
        events = list(sc.events)
        while t < sc.duration - 1e-15:
            t_next = events[k].t if k < len(events) else sc.duration
            t_next = min(max(t_next, t), sc.duration)
            if t_next > t:
                self._run_interval(t, t_next, fresh)
                fresh = False
                t = t_next
            while k < len(events) and events[k].t <= t + 1e-15:
                self._apply_event(events[k])
                fresh = True
                k += 1
        for did, pend in sorted(self.pendings.items(), key=lambda p: str(p[0])):
            self.warnings.append(
                f"controller switch for DGU {did!r} never armed; deferred past the end")
        return self._assemble()

    def _assemble(self) -> SimTrace:
        ids = sorted(self.seen_ids, key=str)
        edges = sorted(self.seen_edges, key=lambda e: (str(e[0]), str(e[1])))
        cols = {}
        for did in ids:
            for tag in ("V", "It", "vi", "u", "IL", "ref"):
                cols[f"{tag}_{did}"] = []
        for (a, b) in edges:
            cols[f"I_{a}_{b}"] = []
            cols[f"I_{b}_{a}"] = []
        times = []
        for ts, rows in self.pieces:
            for i in range(ts.size):
                times.append(ts[i])
                row = rows[i]
                for name, acc in cols.items():
                    acc.append(row.get(name, math.nan))
        time = np.asarray(times, dtype=float)
        columns = {name: np.asarray(vals, dtype=float) for name, vals in cols.items()}
        trace = SimTrace(time=time, columns=columns, events=list(self.events_log),
                         warnings=list(self.warnings), dgu_ids=ids, edges=edges)
        self._saturation_warnings(trace)
        return trace

    def _saturation_warnings(self, trace: SimTrace):
        if not self.cfg.saturation:
            return
        # recorded flags: warn when a unit stays clamped longer than the budget
        for did in trace.dgu_ids:
            flag = np.zeros(trace.time.size)
            pos = 0
            for ts, rows in self.pieces:
                for i in range(ts.size):
                    flag[pos] = rows[i].get(f"_sat_{did}", 0.0)
                    pos += 1
            run_start = None
            for i in range(flag.size):
                if flag[i] > 0 and run_start is None:
                    run_start = trace.time[i]
                elif flag[i] == 0 and run_start is not None:
                    if trace.time[i] - run_start > self.cfg.saturation_warn_after:
                        trace.warnings.append(
                            f"DGU {did!r} control saturated for "
                            f"{trace.time[i] - run_start:.4g} s from t = {run_start:.4g}")
                    run_start = None
            if run_start is not None and trace.time.size:
                dur = trace.time[-1] - run_start
                if dur > self.cfg.saturation_warn_after:
                    trace.warnings.append(
                        f"DGU {did!r} control saturated for {dur:.4g} s "
                        f"from t = {run_start:.4g}")


def simulate(g: GridGraph, gains, prefilters=None, compensators=None,
             scenario: Scenario = None, cfg: SimConfig | None = None,
             opts: SynthesisOptions | None = None) -> SimTrace:
    """Run one scenario against a grid.

    gains maps unit id to ControllerGains and must cover every unit present
    at t=0; pass None for an uncontrolled (u = 0) physics run. prefilters
    and compensators are optional per-unit maps (PrefilterEntry /
    CompensatorDesign). The returned trace samples every record stride with
    NaN outside a unit's active window.
    """
    if scenario is None:
        raise InputError("simulate needs a scenario")
    if not isinstance(g, GridGraph) or not g.dgus:
        raise InputError("simulate needs a non-empty grid")
    cfg = cfg or SimConfig()
    opts = opts or SynthesisOptions()
    eng = _Engine(g, gains, prefilters or {}, compensators or {}, scenario, cfg, opts)
    return eng.run()
