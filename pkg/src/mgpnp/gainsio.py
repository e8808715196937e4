"""Reading and writing gains files.

One file carries everything a controller deployment needs: per-unit state
feedback row, certificate matrix and scalars, solver metadata, and the
optional prefilter/compensator transfer functions. Numbers are written with
17 significant digits so a parse returns the identical bits; section order
is id-sorted, making the output a deterministic function of the content.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .params import InputError, format_num, _coerce_id, _make_parser
from .synthesis import ControllerGains
from .tfs import CompensatorDesign, RationalTf

FORMAT_TAG = "mgpnp-gains 1"


@dataclass(frozen=True)
class PrefilterEntry:
    """A designed reference prefilter plus the template choice it came from."""

    tf: RationalTf
    bandwidth_hz: float
    order: int

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise InputError("prefilter bandwidth must be > 0")
        if not (isinstance(self.order, int) and self.order >= 1):
            raise InputError("prefilter order must be an integer >= 1")


@dataclass(frozen=True)
class GainsFile:
    """Parsed gains file: gains always, filters when present."""

    gains: dict = field(default_factory=dict)          # id -> ControllerGains
    prefilters: dict = field(default_factory=dict)     # id -> PrefilterEntry
    compensators: dict = field(default_factory=dict)   # id -> CompensatorDesign
    created: str | None = None


def _fmt_vec(v) -> str:
    return " ".join(format_num(float(x)) for x in np.asarray(v, dtype=float).ravel())


def _parse_vec(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split()], dtype=float)
    except ValueError as exc:
        raise InputError(f"cannot parse {what}: {text!r}") from exc


def _parse_meta_value(text: str):
    parts = text.split()
    try:
        vals = [float(t) for t in parts]
    except ValueError:
        return text
    if len(vals) == 1:
        return vals[0]
    return tuple(vals)


def _upper_triangle(p: np.ndarray) -> np.ndarray:
    return np.array([p[0, 0], p[0, 1], p[0, 2], p[1, 1], p[1, 2], p[2, 2]])


def _from_upper_triangle(u: np.ndarray) -> np.ndarray:
    p = np.empty((3, 3))
    p[0, 0], p[0, 1], p[0, 2], p[1, 1], p[1, 2], p[2, 2] = u
    p[1, 0], p[2, 0], p[2, 1] = p[0, 1], p[0, 2], p[1, 2]
    return p


def dump_gains(gf: GainsFile) -> str:
    out = io.StringIO()
    out.write(f"[meta]\nformat = {FORMAT_TAG}\n")
    if gf.created is not None:
        out.write(f"created = {gf.created}\n")
    out.write("\n")
    for did in sorted(gf.gains, key=str):
        g = gf.gains[did]
        out.write(f"[gains.{did}]\n")
        out.write(f"k = {_fmt_vec(g.k)}\n")
        out.write(f"p = {_fmt_vec(_upper_triangle(g.p))}\n")
        for name in ("eta", "gamma", "beta", "delta"):
            out.write(f"{name} = {format_num(getattr(g, name))}\n")
        for key in sorted(g.metadata):
            val = g.metadata[key]
            if isinstance(val, (tuple, list, np.ndarray)):
                text = _fmt_vec(val)
            elif isinstance(val, float):
                text = format_num(val)
            else:
                text = str(val)
            out.write(f"meta.{key} = {text}\n")
        out.write("\n")
    for did in sorted(gf.prefilters, key=str):
        pf = gf.prefilters[did]
        out.write(f"[prefilter.{did}]\n")
        out.write(f"num = {_fmt_vec(pf.tf.num)}\n")
        out.write(f"den = {_fmt_vec(pf.tf.den)}\n")
        out.write(f"bandwidth_hz = {format_num(pf.bandwidth_hz)}\n")
        out.write(f"order = {pf.order}\n\n")
    for did in sorted(gf.compensators, key=str):
        cd = gf.compensators[did]
        out.write(f"[compensator.{did}]\n")
        out.write(f"num = {_fmt_vec(cd.tf.num)}\n")
        out.write(f"den = {_fmt_vec(cd.tf.den)}\n")
        out.write(f"approximate = {'true' if cd.approximate else 'false'}\n")
        if cd.fallback_bandwidth_hz is not None:
            out.write(f"fallback_bandwidth_hz = {format_num(cd.fallback_bandwidth_hz)}\n")
        out.write("\n")
    return out.getvalue()


def parse_gains(text: str) -> GainsFile:
    cp = _make_parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InputError(f"malformed gains file: {exc}") from exc
    if "meta" not in cp or cp["meta"].get("format", "") != FORMAT_TAG:
        raise InputError(f"gains file must declare 'format = {FORMAT_TAG}' in [meta]")
    created = cp["meta"].get("created")

    gains, prefilters, compensators = {}, {}, {}
    for sec in cp.sections():
        if sec == "meta":
            continue
        kv = dict(cp[sec])
        if sec.startswith("gains."):
            did = _coerce_id(sec[6:])
            try:
                k = _parse_vec(kv.pop("k"), "k")
                pu = _parse_vec(kv.pop("p"), "p")
                scalars = {n: float(kv.pop(n)) for n in ("eta", "gamma", "beta", "delta")}
            except KeyError as exc:
                raise InputError(f"[{sec}] missing key {exc}") from exc
            if k.size != 3:
                raise InputError(f"[{sec}] k must have 3 entries")
            if pu.size != 6:
                raise InputError(f"[{sec}] p must have 6 entries (upper triangle)")
            meta = {}
            for key in list(kv):
                if not key.startswith("meta."):
                    raise InputError(f"[{sec}] unknown key {key!r}")
                meta[key[5:]] = _parse_meta_value(kv.pop(key))
            gains[did] = ControllerGains(
                k=k.reshape(1, 3), p=_from_upper_triangle(pu),
                metadata=meta, **scalars)
        elif sec.startswith("prefilter."):
            did = _coerce_id(sec[10:])
            try:
                tf = RationalTf(_parse_vec(kv.pop("num"), "num"),
                                _parse_vec(kv.pop("den"), "den"))
                bw = float(kv.pop("bandwidth_hz"))
                order = int(kv.pop("order"))
            except KeyError as exc:
                raise InputError(f"[{sec}] missing key {exc}") from exc
            if kv:
                raise InputError(f"[{sec}] unknown keys: {sorted(kv)}")
            prefilters[did] = PrefilterEntry(tf=tf, bandwidth_hz=bw, order=order)
        elif sec.startswith("compensator."):
            did = _coerce_id(sec[12:])
            try:
                tf = RationalTf(_parse_vec(kv.pop("num"), "num"),
                                _parse_vec(kv.pop("den"), "den"))
                approx = kv.pop("approximate")
            except KeyError as exc:
                raise InputError(f"[{sec}] missing key {exc}") from exc
            if approx not in ("true", "false"):
                raise InputError(f"[{sec}] approximate must be true or false")
            fb = kv.pop("fallback_bandwidth_hz", None)
            if kv:
                raise InputError(f"[{sec}] unknown keys: {sorted(kv)}")
            compensators[did] = CompensatorDesign(
                tf=tf, approximate=(approx == "true"),
                fallback_bandwidth_hz=float(fb) if fb is not None else None)
        else:
            raise InputError(f"unknown section [{sec}]")
    return GainsFile(gains=gains, prefilters=prefilters,
                     compensators=compensators, created=created)


def load_gains(path: str | os.PathLike) -> GainsFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_gains(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read gains file {path}: {exc}") from exc


def save_gains(gf: GainsFile, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_gains(gf))
