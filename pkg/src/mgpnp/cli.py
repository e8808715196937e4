"""Command-line front end.

Verbs: synthesize, certify, plug-check, simulate, analyze, export. Each
verb reads the file formats of the library modules and writes the same
formats back, so every artifact the tool produces can be fed to it again.
Diagnostics go to stderr; artifacts and reports go to --out and stdout.

Exit codes: 0 success; 2 the mathematics said no (synthesis infeasible, a
plug request denied, a certificate check failed); 3 bad input (missing or
malformed files, bad flags); 4 numerical failure (solver or integration
breakdown). A simulation that dies mid-run still writes the partial trace
when --out is given.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys

import numpy as np

from .gainsio import GainsFile, PrefilterEntry, load_gains, save_gains
from .params import InputError, format_num, load_grid, save_grid
from .pnp import PlugRequest, evaluate_plug_in, evaluate_unplug, format_decision
from .statespace import (assemble_full_line_model, assemble_qsl_overall,
                         build_augmented_dgu)
from .synthesis import (Infeasible, SolverNumericalFailure, SynthesisOptions,
                        certify_global_stability, check_assumption_2,
                        synthesize_all, verify_certificate)
from .tfs import (Rejection, closed_loop_reference_tf, default_frequency_grid,
                  design_disturbance_compensator, design_prefilter,
                  desired_tf_template, disturbance_tfs,
                  export_frequency_response_csv, export_spectrum_csv,
                  frequency_response, spectrum)
from .sim import (SimConfig, SimulationError, export_trace_csv, load_scenario,
                  metrics, resolve_scenario, save_scenario, simulate)

EXIT_OK = 0
EXIT_REFUSED = 2      # infeasible synthesis, denied request, failed certificate
EXIT_INPUT = 3
EXIT_NUMERICAL = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with its own code 2 on bad flags; route through the
    # input-error path instead so flag mistakes report as exit 3
    def error(self, message):
        raise InputError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="mgpnp",
                description="Design, certify, and simulate decentralized "
                            "voltage controllers for DC microgrids.")
    sub = p.add_subparsers(dest="verb", metavar="VERB")

    def add(name, help_, *, grid=False, gains=False, scenario=False, out=False,
            design=False, tune=False, policy=False):
        sp = sub.add_parser(name, help=help_, description=help_)
        if grid:
            sp.add_argument("--grid", required=True, help="grid description file")
        if gains:
            req = gains == "required"
            sp.add_argument("--gains", required=req, help="gains file"
                            + ("" if req else " (optional)"))
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario file")
        if out:
            req = out == "required"
            sp.add_argument("--out", required=req, metavar="DIR",
                            help="directory for written artifacts")
        if design:
            sp.add_argument("--prefilter", type=float, metavar="BW_HZ",
                            help="design reference prefilters with this bandwidth")
            sp.add_argument("--compensator", action="store_true",
                            help="design load-current compensators "
                                 "(realizable roll-off form)")
        if tune:
            sp.add_argument("--eta", type=float, help="certificate scale override")
            sp.add_argument("--tol", type=float, default=1e-3,
                            help="scale-separation tolerance (default 1e-3)")
            sp.add_argument("--seed", type=int, help="pin RNG-dependent paths")
        if policy:
            sp.add_argument("--policy", choices=("keep", "retune"),
                            help="neighbor handling: keep revalidates stored "
                                 "gains, retune always resynthesizes")
        sp.add_argument("--no-timestamp", action="store_true",
                        help="omit the creation stamp from written files")
        return sp

    add("synthesize", "Design per-unit controllers for a grid and write a gains file.",
        grid=True, out="required", design=True, tune=True)
    add("certify", "Check stored gains against a grid: per-unit certificates, "
        "global spectrum, scale separation.",
        grid=True, gains="required", out=True, tune=True)
    add("plug-check", "Adjudicate the plug-in/unplug events of a scenario "
        "against a grid without changing any file.",
        grid=True, gains="required", scenario=True, tune=True, policy=True)
    add("simulate", "Run a scenario and write the trace and metrics.",
        grid=True, gains=True, scenario=True, out=True, design=True, tune=True)
    add("analyze", "Write eigenvalue and frequency-response tables for a grid.",
        grid=True, gains=True, out="required")
    add("export", "Re-emit grid/gains/scenario files in canonical form.",
        out="required", gains=True)
    sub.choices["export"].add_argument("--grid", help="grid description file")
    sub.choices["export"].add_argument("--scenario", help="scenario file")
    return p


def _outdir(args) -> str | None:
    out = getattr(args, "out", None)
    if out is not None:
        os.makedirs(out, exist_ok=True)
    return out


def _stem(path: str) -> str:
    base = os.path.basename(path)
    return base.rsplit(".", 1)[0] if "." in base else base


def _opts(args) -> SynthesisOptions:
    kw = {}
    if getattr(args, "eta", None) is not None:
        kw["eta"] = args.eta
    if getattr(args, "tol", None) is not None:
        kw["assumption2_tol"] = args.tol
    if getattr(args, "seed", None) is not None:
        np.random.seed(args.seed)
    return SynthesisOptions(**kw)


def _design_filters(g, gains, bw, want_comp, warn):
    """Per-unit prefilter/compensator maps for the CLI artifacts."""
    prefilters, compensators = {}, {}
    for i in g.dgu_ids():
        aug = build_augmented_dgu(g, i)
        f = closed_loop_reference_tf(aug, gains[i])
        if bw is not None:
            order = max(f.relative_degree, 1)
            res = design_prefilter(f, desired_tf_template(bw, order))
            if isinstance(res, Rejection):
                warn(f"DGU {i}: prefilter rejected ({res.reason}): {res.detail}")
            else:
                prefilters[i] = PrefilterEntry(tf=res, bandwidth_hz=bw, order=order)
        if want_comp:
            g_d, g_u = disturbance_tfs(aug, gains[i])
            res = design_disturbance_compensator(
                g_d, g_u, require_proper=True,
                fallback_bandwidth_hz=bw if bw is not None else 100.0)
            if isinstance(res, Rejection):
                warn(f"DGU {i}: compensator rejected ({res.reason}): {res.detail}")
            else:
                compensators[i] = res
    return prefilters, compensators


def _timestamp(args) -> str | None:
    if args.no_timestamp:
        return None
    return datetime.datetime.now(datetime.timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ")


# --- verbs -------------------------------------------------------------------------


def _cmd_synthesize(args, err) -> int:
    g = load_grid(args.grid)
    out = _outdir(args)
    opts = _opts(args)
    gains = synthesize_all(g, opts=opts)
    prefilters, compensators = _design_filters(
        g, gains, args.prefilter, args.compensator, err)
    gf = GainsFile(gains=gains, prefilters=prefilters,
                   compensators=compensators, created=_timestamp(args))
    path = os.path.join(out, _stem(args.grid) + ".gains")
    save_gains(gf, path)
    for i in g.dgu_ids():
        gi = gains[i]
        print(f"DGU {i}: k = [{format_num(gi.k_v)} {format_num(gi.k_c)} "
              f"{format_num(gi.k_i)}], eta = {gi.eta:g}, gamma = {gi.gamma:g}")
    print(f"wrote {path} ({len(gains)} gains entries, "
          f"{len(prefilters)} prefilters, {len(compensators)} compensators)")
    return EXIT_OK


def _cmd_certify(args, err) -> int:
    g = load_grid(args.grid)
    gf = load_gains(args.gains)
    missing = [i for i in g.dgu_ids() if i not in gf.gains]
    if missing:
        raise InputError(f"gains file lacks entries for DGU(s) {missing!r}")
    ok = True
    for i in g.dgu_ids():
        rep = verify_certificate(build_augmented_dgu(g, i), gf.gains[i])
        state = "pass" if rep.ok else "FAIL (" + ", ".join(rep.failed()) + ")"
        print(f"DGU {i}: certificate {state}, decay margin {rep.lyap_margin:.3g}")
        ok = ok and rep.ok
    cert = certify_global_stability(g, gf.gains)
    print(f"global spectrum: {'pass' if cert.spectral_ok else 'FAIL'}, "
          f"{cert.n_dgus} units, max Re(lambda) = {cert.max_real:.6g}")
    print(f"coupling residual (term b): {cert.term_b_max_abs:.3g}")
    ok = ok and cert.ok
    a2 = check_assumption_2(g, {i: gf.gains[i].eta for i in g.dgu_ids()},
                            tol=args.tol)
    if a2.worst_edge is not None:
        print(f"scale separation: {'pass' if a2.ok else 'FAIL'}, worst ratio "
              f"{a2.worst_ratio:.3g} at {a2.worst_edge} (tol {args.tol:g})")
    else:
        print("scale separation: no coupled units")
    ok = ok and a2.ok
    out = _outdir(args)
    if out is not None:
        path = os.path.join(out, _stem(args.grid) + ".spectrum.csv")
        export_spectrum_csv(np.array(cert.eigenvalues), path)
        print(f"wrote {path}")
    if not ok:
        err("certification failed")
        return EXIT_REFUSED
    return EXIT_OK


def _cmd_plug_check(args, err) -> int:
    g = load_grid(args.grid)
    gf = load_gains(args.gains)
    sc = load_scenario(args.scenario)
    requests = [e for e in sc.events if e.kind in ("plug_in", "unplug")]
    if not requests:
        raise InputError("scenario contains no plug_in or unplug events")
    gains = dict(gf.gains)
    missing = [i for i in g.dgu_ids() if i not in gains]
    if missing:
        raise InputError(f"gains file lacks entries for DGU(s) {missing!r}")
    any_denied = False
    for e in requests:
        d = e.data
        policy = args.policy if args.policy is not None else d["policy"]
        if e.kind == "plug_in":
            from .params import DguParams
            req = PlugRequest(
                kind="plug_in", dgu_id=d["i"],
                new_dgu=DguParams(r_t=d["r_t"], l_t=d["l_t"], c_t=d["c_t"],
                                  v_dc=d["v_dc"], load_r=d.get("load_r")),
                new_lines=d["lines"])
            dec = evaluate_plug_in(g, gains, req, opts=_opts(args), policy=policy)
        else:
            req = PlugRequest(kind="unplug", dgu_id=d["i"])
            dec = evaluate_unplug(g, gains, req, opts=_opts(args), policy=policy)
        print(f"--- t = {format_num(e.t)}: {e.kind} {d['i']}")
        print(format_decision(dec), end="")
        if dec.allowed:
            # later requests see the world this one creates (memory only)
            g = dec.graph
            gains.update(dec.new_gains)
            if e.kind == "unplug":
                gains.pop(d["i"], None)
        else:
            any_denied = True
    if any_denied:
        err("at least one request was denied")
        return EXIT_REFUSED
    return EXIT_OK


def _cmd_simulate(args, err) -> int:
    import dataclasses

    g = load_grid(args.grid)
    sc = load_scenario(args.scenario)
    if args.prefilter is not None:
        sc = dataclasses.replace(sc, prefilter_bw=args.prefilter)
    if args.compensator:
        sc = dataclasses.replace(sc, compensator=True)
    gf = load_gains(args.gains) if args.gains else None
    needs_file = sc.init_gains == "file"
    if needs_file and gf is None:
        raise InputError("scenario takes initial gains from a file; pass --gains")
    opts = _opts(args)
    gains, prefilters, compensators = resolve_scenario(g, sc, gains_file=gf,
                                                       opts=opts)
    out = _outdir(args)
    try:
        trace = simulate(g, gains, prefilters, compensators, scenario=sc,
                         opts=opts)
    except SimulationError as exc:
        if out is not None and exc.trace is not None and exc.trace.time.size:
            path = os.path.join(out, _stem(args.scenario) + ".partial.trace.csv")
            export_trace_csv(exc.trace, path)
            err(f"wrote partial trace to {path}")
        raise
    for t, label in trace.events:
        print(f"event t = {format_num(t)}: {label}")
    for w in trace.warnings:
        err(f"warning: {w}")
    rows = []
    for did in trace.dgu_ids:
        v = trace.column(f"V_{did}")
        fin = np.flatnonzero(np.isfinite(v))
        if fin.size < 2:
            continue
        t0, t1 = float(trace.time[fin[0]]), float(trace.time[fin[-1]])
        m = metrics(trace, did, (t0, t1))
        rows.append((did, t0, t1, m))
        print(f"DGU {did}: final V = {v[fin[-1]]:.4f}, settling "
              f"{m['settling_time']:.4g} s, overshoot {m['overshoot']:.3g}, "
              f"sse {m['steady_state_error']:.3g} V")
    if out is not None:
        tpath = os.path.join(out, _stem(args.scenario) + ".trace.csv")
        export_trace_csv(trace, tpath)
        mpath = os.path.join(out, _stem(args.scenario) + ".metrics.csv")
        with open(mpath, "w", encoding="utf-8") as fh:
            fh.write("dgu,t0,t1,settling_time,overshoot,"
                     "steady_state_error,peak_deviation\n")
            for did, t0, t1, m in rows:
                fh.write(f"{did},{format_num(t0)},{format_num(t1)},"
                         f"{format_num(m['settling_time'])},"
                         f"{format_num(m['overshoot'])},"
                         f"{format_num(m['steady_state_error'])},"
                         f"{format_num(m['peak_deviation'])}\n")
        print(f"wrote {tpath}")
        print(f"wrote {mpath}")
    return EXIT_OK


def _cmd_analyze(args, err) -> int:
    g = load_grid(args.grid)
    out = _outdir(args)
    stem = _stem(args.grid)
    qsl = assemble_qsl_overall(g)
    full = assemble_full_line_model(g)
    eig_qsl = spectrum(qsl)
    eig_full = spectrum(full)
    p1 = os.path.join(out, stem + ".spectrum-qsl-open.csv")
    export_spectrum_csv(eig_qsl, p1)
    p2 = os.path.join(out, stem + ".spectrum-full-open.csv")
    export_spectrum_csv(eig_full, p2)
    print(f"open-loop QSL spectrum: {eig_qsl.size} modes, "
          f"max Re = {float(np.max(eig_qsl.real)):.6g} -> {p1}")
    print(f"open-loop full spectrum: {eig_full.size} modes, "
          f"max Re = {float(np.max(eig_full.real)):.6g} -> {p2}")
    freqs = default_frequency_grid()
    fr = frequency_response(full, freqs)
    p3 = os.path.join(out, stem + ".freq-full-open.csv")
    export_frequency_response_csv(fr, p3)
    print(f"open-loop singular values on {freqs.size} frequencies -> {p3}")
    if args.gains:
        gf = load_gains(args.gains)
        cert = certify_global_stability(g, gf.gains)
        p4 = os.path.join(out, stem + ".spectrum-qsl-closed.csv")
        export_spectrum_csv(np.array(cert.eigenvalues), p4)
        print(f"closed-loop QSL spectrum: {len(cert.eigenvalues)} modes, "
              f"max Re = {cert.max_real:.6g} -> {p4}")
        for i in g.dgu_ids():
            f = closed_loop_reference_tf(build_augmented_dgu(g, i), gf.gains[i])
            fri = frequency_response(f, freqs)
            pth = os.path.join(out, f"{stem}.freq-ref-{i}.csv")
            export_frequency_response_csv(fri, pth)
            print(f"DGU {i} reference response -> {pth}")
    return EXIT_OK


def _cmd_export(args, err) -> int:
    out = _outdir(args)
    wrote = []
    if args.grid:
        g = load_grid(args.grid)
        path = os.path.join(out, os.path.basename(args.grid))
        save_grid(g, path)
        wrote.append(path)
    if args.gains:
        gf = load_gains(args.gains)
        if args.no_timestamp and gf.created is not None:
            gf = GainsFile(gains=gf.gains, prefilters=gf.prefilters,
                           compensators=gf.compensators, created=None)
        path = os.path.join(out, os.path.basename(args.gains))
        save_gains(gf, path)
        wrote.append(path)
    if args.scenario:
        sc = load_scenario(args.scenario)
        path = os.path.join(out, os.path.basename(args.scenario))
        save_scenario(sc, path)
        wrote.append(path)
    if not wrote:
        raise InputError("export needs at least one of --grid, --gains, --scenario")
    for path in wrote:
        print(f"wrote {path}")
    return EXIT_OK


_VERBS = {
    "synthesize": _cmd_synthesize,
    "certify": _cmd_certify,
    "plug-check": _cmd_plug_check,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "export": _cmd_export,
}


def main(argv=None) -> int:
    def err(msg):
        print(f"mgpnp: {msg}", file=sys.stderr)

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verb is None:
            raise InputError("a verb is required (see mgpnp --help)")
        return _VERBS[args.verb](args, err)
    except InputError as exc:
        err(str(exc))
        return EXIT_INPUT
    except Infeasible as exc:
        err(f"synthesis infeasible: {exc}")
        return EXIT_REFUSED
    except (SolverNumericalFailure, SimulationError) as exc:
        err(f"numerical failure: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
