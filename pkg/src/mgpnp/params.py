"""Electrical parameters and grid topology.

Holds the per-unit electrical constants (converter filter, supply, local
load), the line constants, and the graph that ties them together. The graph
is the single source of topology truth for every other module.

Units are SI throughout (V, A, Ohm, H, F, s). Config files accept
engineering suffixes (k, m, u/µ, n) which are resolved at parse time.
"""

from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import dataclass, field


class InputError(ValueError):
    """Invalid parameter value or malformed config file."""


# --- engineering-notation numbers -------------------------------------------

_SI_SUFFIXES = {
    "k": 1e3,
    "M": 1e6,
    "m": 1e-3,
    "u": 1e-6,
    "µ": 1e-6,
    "n": 1e-9,
    "p": 1e-12,
}


def parse_si(text: str) -> float:
    """Parse a number with an optional engineering suffix: '2.2m' -> 2.2e-3."""
    s = text.strip()
    if not s:
        raise InputError("empty numeric value")
    mult = 1.0
    if s[-1] in _SI_SUFFIXES and not s[-1].isdigit():
        mult = _SI_SUFFIXES[s[-1]]
        s = s[:-1].strip()
    try:
        return float(s) * mult
    except ValueError as exc:
        raise InputError(f"cannot parse number {text!r}") from exc


def format_num(x: float) -> str:
    """Format a float so that parsing it back returns the identical bits."""
    return f"{x:.17g}"


# --- domain types ------------------------------------------------------------


@dataclass(frozen=True)
class DguParams:
    """Constants of one generation unit: converter filter, supply, local load.

    load_r is the initial load resistance at the unit's output node; it is
    optional because a unit may run without a local load.
    """

    r_t: float
    l_t: float
    c_t: float
    v_dc: float
    load_r: float | None = None

    def __post_init__(self):
        for name in ("r_t", "l_t", "c_t", "v_dc"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InputError(f"DguParams.{name} must be finite and > 0, got {v!r}")
        if self.load_r is not None:
            if not (math.isfinite(self.load_r) and self.load_r > 0):
                raise InputError(f"DguParams.load_r must be > 0 when present, got {self.load_r!r}")


@dataclass(frozen=True)
class LineParams:
    """Constants of one transmission line.

    A single instance serves both directions of the connection, so the
    two directed currents always see identical R and L.
    """

    r: float
    l: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise InputError(f"LineParams.r must be > 0, got {self.r!r}")
        if not (math.isfinite(self.l) and self.l > 0):
            raise InputError(f"LineParams.l must be > 0, got {self.l!r}")


def _edge_key(i, j) -> tuple:
    if i == j:
        raise InputError(f"line endpoints must differ, got ({i}, {j})")
    return (i, j) if str(i) < str(j) else (j, i)


@dataclass(frozen=True)
class GridGraph:
    """Units plus lines. Neighbor relation is symmetric by construction:
    lines are stored under unordered endpoint pairs, at most one per pair,
    no self-loops.
    """

    dgus: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def __post_init__(self):
        dgus = dict(self.dgus)
        lines = {}
        for key, lp in dict(self.lines).items():
            i, j = key
            k = _edge_key(i, j)
            if i not in dgus or j not in dgus:
                raise InputError(f"line {key} references unknown DGU")
            if k in lines:
                raise InputError(f"duplicate line between {k[0]} and {k[1]}")
            if not isinstance(lp, LineParams):
                raise InputError(f"line {key} value must be LineParams")
            lines[k] = lp
        for did, p in dgus.items():
            if not isinstance(p, DguParams):
                raise InputError(f"dgu {did!r} value must be DguParams")
        object.__setattr__(self, "dgus", dgus)
        object.__setattr__(self, "lines", lines)

    # -- topology queries

    def neighbors(self, i) -> list:
        if i not in self.dgus:
            raise InputError(f"unknown DGU {i!r}")
        out = []
        for (a, b) in self.lines:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out, key=str)

    def line_between(self, i, j) -> LineParams:
        return self.lines[_edge_key(i, j)]

    def has_line(self, i, j) -> bool:
        return _edge_key(i, j) in self.lines

    def attached_lines(self, i) -> list:
        """LineParams of every line incident to DGU i, neighbor-sorted."""
        return [self.line_between(i, j) for j in self.neighbors(i)]

    def dgu_ids(self) -> list:
        return sorted(self.dgus, key=str)

    def edge_keys(self) -> list:
        return sorted(self.lines, key=lambda k: (str(k[0]), str(k[1])))

    # -- non-mutating editing (used by the plug/unplug logic)

    def with_dgu(self, i, p: DguParams, new_lines: dict | None = None) -> "GridGraph":
        if i in self.dgus:
            raise InputError(f"DGU id {i!r} already exists")
        dgus = dict(self.dgus)
        dgus[i] = p
        lines = dict(self.lines)
        for j, lp in (new_lines or {}).items():
            lines[_edge_key(i, j)] = lp
        return GridGraph(dgus, lines)

    def without_dgu(self, i) -> "GridGraph":
        if i not in self.dgus:
            raise InputError(f"unknown DGU {i!r}")
        dgus = {k: v for k, v in self.dgus.items() if k != i}
        lines = {k: v for k, v in self.lines.items() if i not in k}
        return GridGraph(dgus, lines)

    def without_lines_of(self, i) -> "GridGraph":
        """Same units, but DGU i disconnected from every line."""
        if i not in self.dgus:
            raise InputError(f"unknown DGU {i!r}")
        lines = {k: v for k, v in self.lines.items() if i not in k}
        return GridGraph(dict(self.dgus), lines)


# --- grid description file ----------------------------------------------------

# Sections: [dgu.<id>] with r_t/l_t/c_t/v_dc/load_r, [line.<i>-<j>] with r/l.


def _make_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep key case
    return cp


def _coerce_id(text: str):
    """DGU ids are ints when they look like ints, else strings."""
    t = text.strip()
    return int(t) if t.lstrip("+-").isdigit() else t


def parse_grid(text: str) -> GridGraph:
    cp = _make_parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InputError(f"malformed grid file: {exc}") from exc

    dgus, lines = {}, {}
    for sec in cp.sections():
        if sec.startswith("dgu."):
            did = _coerce_id(sec[4:])
            kv = dict(cp[sec])
            try:
                dgus[did] = DguParams(
                    r_t=parse_si(kv.pop("r_t")),
                    l_t=parse_si(kv.pop("l_t")),
                    c_t=parse_si(kv.pop("c_t")),
                    v_dc=parse_si(kv.pop("v_dc")),
                    load_r=parse_si(kv.pop("load_r")) if "load_r" in kv else None,
                )
            except KeyError as exc:
                raise InputError(f"[{sec}] missing key {exc}") from exc
            if kv:
                raise InputError(f"[{sec}] unknown keys: {sorted(kv)}")
        elif sec.startswith("line."):
            body = sec[5:]
            if "-" not in body:
                raise InputError(f"line section name must be line.<i>-<j>, got [{sec}]")
            a, b = body.split("-", 1)
            kv = dict(cp[sec])
            try:
                lp = LineParams(r=parse_si(kv.pop("r")), l=parse_si(kv.pop("l")))
            except KeyError as exc:
                raise InputError(f"[{sec}] missing key {exc}") from exc
            if kv:
                raise InputError(f"[{sec}] unknown keys: {sorted(kv)}")
            key = (_coerce_id(a), _coerce_id(b))
            if _edge_key(*key) in lines:
                raise InputError(f"duplicate line section for {key}")
            lines[key] = lp
        else:
            raise InputError(f"unknown section [{sec}]")
    return GridGraph(dgus, lines)


def dump_grid(g: GridGraph) -> str:
    out = io.StringIO()
    for did in g.dgu_ids():
        p = g.dgus[did]
        out.write(f"[dgu.{did}]\n")
        out.write(f"r_t = {format_num(p.r_t)}\n")
        out.write(f"l_t = {format_num(p.l_t)}\n")
        out.write(f"c_t = {format_num(p.c_t)}\n")
        out.write(f"v_dc = {format_num(p.v_dc)}\n")
        if p.load_r is not None:
            out.write(f"load_r = {format_num(p.load_r)}\n")
        out.write("\n")
    for (i, j) in g.edge_keys():
        lp = g.lines[(i, j)]
        out.write(f"[line.{i}-{j}]\n")
        out.write(f"r = {format_num(lp.r)}\n")
        out.write(f"l = {format_num(lp.l)}\n\n")
    return out.getvalue()


def load_grid(path: str | os.PathLike) -> GridGraph:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_grid(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read grid file {path}: {exc}") from exc


def save_grid(g: GridGraph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_grid(g))
