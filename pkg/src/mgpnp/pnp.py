"""Plug-in and unplugging adjudication.

A topology change touches only the target unit and its immediate neighbors:
their voltage coupling terms change, nothing else does. Requests are judged
by rebuilding exactly those local models and either re-checking the existing
certificates against them (keep-if-valid) or re-running synthesis (retune).
The decision is a pure value; committing the topology change and deploying
the gains is the caller's job, so what-if checks are free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .params import DguParams, GridGraph, InputError, LineParams
from .statespace import build_augmented_dgu
from .synthesis import (GlobalCertificate, Infeasible, SynthesisOptions,
                        certify_global_stability, recheck_constraints,
                        solve_problem_O)

POLICIES = ("keep-if-valid", "retune")


def _normalize_policy(policy: str) -> str:
    if policy in ("keep", "keep-if-valid"):
        return "keep-if-valid"
    if policy == "retune":
        return "retune"
    raise InputError(f"policy must be one of keep|keep-if-valid|retune, got {policy!r}")


@dataclass(frozen=True)
class PlugRequest:
    """One requested topology change.

    plug_in carries the new unit's constants and the lines tying it in;
    new_lines maps existing neighbor ids to LineParams and may be empty
    (a unit may join without connections and be wired up later).
    """

    kind: str
    dgu_id: object
    new_dgu: DguParams | None = None
    new_lines: dict | None = None

    def __post_init__(self):
        if self.kind not in ("plug_in", "unplug"):
            raise InputError(f"request kind must be plug_in or unplug, got {self.kind!r}")
        if self.kind == "plug_in":
            if not isinstance(self.new_dgu, DguParams):
                raise InputError("plug_in request needs new_dgu parameters")
            lines = dict(self.new_lines or {})
            for j, lp in lines.items():
                if not isinstance(lp, LineParams):
                    raise InputError(f"new_lines[{j!r}] must be LineParams")
                if j == self.dgu_id:
                    raise InputError("a unit cannot connect to itself")
            object.__setattr__(self, "new_lines", lines)
        else:
            if self.new_dgu is not None or self.new_lines:
                raise InputError("unplug request carries no new unit or lines")
            object.__setattr__(self, "new_lines", {})


@dataclass(frozen=True)
class PnpDecision:
    """Outcome of adjudicating one request.

    graph is the evaluated post-change topology; it has not been applied
    anywhere. new_gains holds fresh synthesis results, kept the ids whose
    existing gains were revalidated; together they cover retune_set exactly
    when allowed. denial_reason maps the failing scope (a dgu id, or
    "global") to a message.
    """

    allowed: bool
    kind: str
    target: object
    retune_set: frozenset
    new_gains: dict
    kept: frozenset
    denial_reason: dict | None
    certificate: GlobalCertificate | None
    graph: GridGraph
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        covered = set(self.new_gains) | set(self.kept)
        if not covered <= set(self.retune_set):
            raise InputError("decision covers units outside the retune set")
        if self.allowed and covered != set(self.retune_set):
            raise InputError("allowed decision must cover the whole retune set")


def _adjudicate(kind, target, g_new, old_gains, retune_ids, fresh_ids, opts, policy):
    new_gains, kept, denial, details = {}, set(), {}, {}
    for k in sorted(retune_ids, key=str):
        aug = build_augmented_dgu(g_new, k)
        resolve = k in fresh_ids or policy == "retune"
        if not resolve:
            ok, det = recheck_constraints(aug, old_gains[k])
            details[k] = {"action": "kept" if ok else "recheck-failed", "recheck": det}
            if ok:
                kept.add(k)
                continue
            resolve = True
        try:
            gk = solve_problem_O(aug, opts=opts)
        except Infeasible as exc:
            denial[k] = str(exc)
            details.setdefault(k, {})["action"] = "infeasible"
            continue
        new_gains[k] = gk
        prior = details.get(k, {}).get("action")
        details.setdefault(k, {})["action"] = \
            "recheck-failed, resynthesized" if prior else "resynthesized"

    allowed = not denial
    certificate = None
    if allowed and g_new.dgus:
        post = {}
        for i in g_new.dgu_ids():
            if i in new_gains:
                post[i] = new_gains[i]
            elif i in old_gains:
                post[i] = old_gains[i]
            else:
                raise InputError(f"no gains available for DGU {i!r}")
        certificate = certify_global_stability(g_new, post)
        if not certificate.ok:
            allowed = False
            denial["global"] = (f"post-change spectral certificate failed, "
                                f"max Re(lambda) = {certificate.max_real:g}")
    return PnpDecision(
        allowed=allowed, kind=kind, target=target,
        retune_set=frozenset(retune_ids), new_gains=new_gains,
        kept=frozenset(kept), denial_reason=denial or None,
        certificate=certificate, graph=g_new, details=details)


def _check_gains_cover(g: GridGraph, gains: dict, needed) -> None:
    missing = [i for i in needed if i not in gains]
    if missing:
        raise InputError(f"gains missing for DGU(s) {missing!r}")


def evaluate_plug_in(g: GridGraph, gains: dict, req: PlugRequest,
                     opts: SynthesisOptions | None = None,
                     policy: str = "keep-if-valid") -> PnpDecision:
    """Adjudicate adding a unit. Retune set = its neighbors plus itself."""
    policy = _normalize_policy(policy)
    if req.kind != "plug_in":
        raise InputError("evaluate_plug_in needs a plug_in request")
    if req.dgu_id in g.dgus:
        raise InputError(f"DGU {req.dgu_id!r} already exists")
    for j in req.new_lines:
        if j not in g.dgus:
            raise InputError(f"new line endpoint {j!r} is not in the grid")
    g_new = g.with_dgu(req.dgu_id, req.new_dgu, req.new_lines)
    # every unit that remains in place must already be controlled
    _check_gains_cover(g, gains, [i for i in g.dgu_ids()])
    retune = set(req.new_lines) | {req.dgu_id}
    return _adjudicate("plug_in", req.dgu_id, g_new, gains, retune,
                       {req.dgu_id}, opts, policy)


def evaluate_unplug(g: GridGraph, gains: dict, req: PlugRequest,
                    opts: SynthesisOptions | None = None,
                    policy: str = "keep-if-valid") -> PnpDecision:
    """Adjudicate removing a unit. Retune set = its former neighbors."""
    policy = _normalize_policy(policy)
    if req.kind != "unplug":
        raise InputError("evaluate_unplug needs an unplug request")
    if req.dgu_id not in g.dgus:
        raise InputError(f"unknown DGU {req.dgu_id!r}")
    retune = set(g.neighbors(req.dgu_id))
    g_new = g.without_dgu(req.dgu_id)
    _check_gains_cover(g_new, gains, g_new.dgu_ids())
    return _adjudicate("unplug", req.dgu_id, g_new, gains, retune,
                       set(), opts, policy)


def format_decision(dec: PnpDecision) -> str:
    """Structured text report of one decision."""
    lines = [
        f"decision: {'allowed' if dec.allowed else 'denied'}",
        f"kind: {dec.kind}",
        f"target: {dec.target}",
        f"retune set: {', '.join(str(i) for i in sorted(dec.retune_set, key=str)) or '(empty)'}",
        f"kept: {', '.join(str(i) for i in sorted(dec.kept, key=str)) or '(none)'}",
        f"resynthesized: {', '.join(str(i) for i in sorted(dec.new_gains, key=str)) or '(none)'}",
    ]
    if dec.certificate is not None:
        c = dec.certificate
        lines.append(
            f"global certificate: {'pass' if c.ok else 'FAIL'}, "
            f"{c.n_dgus} units, max Re(lambda) = {c.max_real:.6g}, "
            f"coupling residual = {c.term_b_max_abs:.3g}")
    else:
        lines.append("global certificate: (not evaluated)")
    if dec.details:
        lines.append("per-DGU:")
        for i in sorted(dec.details, key=str):
            det = dec.details[i]
            line = f"  {i}: {det.get('action', '?')}"
            rc = det.get("recheck")
            if rc and "lyap_design" in rc:
                line += f" (lyapunov max {rc['lyap_design']:.3g})"
            lines.append(line)
    if dec.denial_reason:
        for scope in sorted(dec.denial_reason, key=str):
            lines.append(f"denial[{scope}]: {dec.denial_reason[scope]}")
    else:
        lines.append("denial: none")
    return "\n".join(lines) + "\n"
