"""Acceptance gate: the nine headline requirements, one pass/fail line each.

Run with -s to see the lines; every criterion asserts as well, so the gate
fails loudly under plain pytest. Windows and tolerances are stated inline
next to each check.
"""

import time

import numpy as np
import pytest
from conftest import random_dgu, random_grid

from mgpnp import (DguParams, Event, GridGraph, LineParams, PlugRequest,
                   Rejection, Scenario, SimConfig, SynthesisOptions,
                   assemble_full_line_model, assemble_qsl_overall,
                   build_augmented_dgu, certify_global_stability,
                   check_assumption_2, check_local_controllability,
                   check_rank_gamma, closed_loop_reference_tf,
                   design_disturbance_compensator, design_prefilter,
                   desired_tf_template, disturbance_tfs, evaluate_plug_in,
                   evaluate_unplug, metrics, rational_equal, simulate,
                   solve_problem_O, spectrum, synthesize_all,
                   verify_certificate)
from mgpnp.sim import _Engine

P1 = DguParams(r_t=0.2, l_t=1.8e-3, c_t=2.2e-3, v_dc=100.0, load_r=10.0)


def _gate(num, label, ok):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {label}")
    assert ok, f"criterion {num}: {label}"


def test_criterion_1_regulation_rank(grid2):
    t0 = time.perf_counter()
    reports = [check_rank_gamma(assemble_qsl_overall(grid2))]
    rng = np.random.default_rng(20260818)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        reports.append(check_rank_gamma(assemble_qsl_overall(random_grid(rng, n))))
    elapsed = time.perf_counter() - t0
    ok = all(r.ok for r in reports) and elapsed < 5.0
    _gate(1, f"rank test = 3N on the reference pair and 200 random grids "
             f"(N <= 8) in {elapsed:.2f} s (< 5 s)", ok)


def test_criterion_2_local_controllability():
    rng = np.random.default_rng(7)
    bad = 0
    for k in range(200):
        if k % 2:
            g = GridGraph({1: random_dgu(rng)}, {})
        else:
            g = random_grid(rng, 2)
        if not check_local_controllability(build_augmented_dgu(g, 1)).ok:
            bad += 1
    _gate(2, f"augmented pair controllable (rank 3) on 200 random draws, "
             f"{bad} failures", bad == 0)


def test_criterion_3_synthesis_round_trip():
    rng = np.random.default_rng(42)
    fails = 0
    for k in range(50):
        g = GridGraph({1: random_dgu(rng)}, {}) if k % 2 else random_grid(rng, 2)
        aug = build_augmented_dgu(g, 1)
        gains = solve_problem_O(aug)
        if not verify_certificate(aug, gains).ok:
            fails += 1
    _gate(3, f"50 solves across random parameters, {fails} certificate "
             f"verification failures", fails == 0)


def test_criterion_4_global_certificate(grid5, gains5):
    cert = certify_global_stability(grid5, gains5)
    a2 = check_assumption_2(
        grid5, {i: gains5[i].eta for i in grid5.dgu_ids()}, tol=1e-3)
    ok = (cert.ok and cert.spectral_ok and cert.max_real < 0
          and cert.term_b_max_abs <= 1e-3 and a2.ok)
    _gate(4, f"five-unit mesh certified: max Re(lambda) = {cert.max_real:.4g}, "
             f"coupling residual {cert.term_b_max_abs:.2g} <= 1e-3", ok)


def test_criterion_5_model_consistency(grid2):
    t0 = time.perf_counter()
    full = spectrum(assemble_full_line_model(grid2))
    qsl = spectrum(assemble_qsl_overall(grid2))
    line_modes = []
    for lp in grid2.lines.values():
        line_modes += [-lp.r / lp.l, -lp.r / lp.l]  # one mode per direction
    expected = np.concatenate([qsl, np.array(line_modes, dtype=complex)])
    expected = expected[np.lexsort((expected.imag, expected.real))]
    elapsed = time.perf_counter() - t0
    scale = float(np.max(np.abs(expected)))
    err = float(np.max(np.abs(full - expected))) / scale
    ok = full.size == expected.size and err <= 1e-6 and elapsed < 1.0
    _gate(5, f"full open-loop spectrum = QSL modes + line modes, relative "
             f"spread {err:.2g} (<= 1e-6) in {elapsed:.3f} s", ok)


def test_criterion_6_scenario_1(scenario1_run):
    tr = scenario1_run.trace
    t = tr.time
    v = {i: tr.column(f"V_{i}") for i in (1, 2)}

    def worst(lo, hi, target):
        m = (t >= lo) & (t <= hi)
        return max(float(np.max(np.abs(v[i][m] - target))) for i in (1, 2))

    a = worst(0.5, 2.0, 48.0)        # regulated before the connect event
    b = worst(2.0, 2.2, 48.0)        # bounded excursion through plug-and-switch
    c = worst(3.5, 4.0, 48.0)        # recovered from the load halving
    m1 = metrics(tr, 1, (4.0, 10.0))
    d1 = m1["steady_state_error"]
    d2 = abs(float(v[2][-1]) - 48.0)
    wall = scenario1_run.wall
    ok = (a <= 0.05 and b <= 0.5 and c <= 0.05 and d1 < 0.01 and d2 <= 0.05
          and wall < 120.0)
    _gate(6, f"scenario 1: startup dev {a:.3g} V (<=0.05), connect window "
             f"{b:.3g} V (<=0.5), post-load-step {c:.3g} V (<=0.05), tracking "
             f"sse {d1:.2g} (<0.01), neighbor dev {d2:.3g} V (<=0.05), "
             f"{wall:.0f} s (<120)", ok)


def test_criterion_7_plug_and_play(grid5, gains5, scenario2_run):
    req = PlugRequest(
        kind="plug_in", dgu_id=6,
        new_dgu=DguParams(r_t=0.6, l_t=2.5e-3, c_t=3.0e-3, v_dc=100.0,
                          load_r=8.0),
        new_lines={1: LineParams(0.1, 2.5e-6), 5: LineParams(0.08, 3.0e-6)})
    dec = evaluate_plug_in(grid5, gains5, req)
    plug_ok = (dec.allowed and {1, 5} <= set(dec.kept)
               and dec.certificate is not None and dec.certificate.ok)
    gains6 = dict(gains5)
    gains6.update(dec.new_gains)
    dec2 = evaluate_unplug(dec.graph, gains6,
                           PlugRequest(kind="unplug", dgu_id=3))
    unplug_ok = (dec2.allowed and {1, 4} <= set(dec2.kept)
                 and dec2.certificate is not None and dec2.certificate.ok)

    tr = scenario2_run.trace
    t = tr.time
    mask = t >= 1.0
    for ev_t, _ in tr.events:
        mask &= ~((t > ev_t) & (t <= ev_t + 0.2))
    worst = 0.0
    for i in tr.dgu_ids:
        vi = tr.column(f"V_{i}")
        ri = tr.column(f"ref_{i}")
        m = mask & np.isfinite(vi)
        if np.any(m):
            worst = max(worst, float(np.max(np.abs(vi[m] - ri[m]))))
    ok = plug_ok and unplug_ok and worst <= 0.5
    _gate(7, f"plug-in kept {sorted(dec.kept)}, unplug kept "
             f"{sorted(dec2.kept)}, both certified; worst settled deviation "
             f"{worst:.3g} V (<=0.5, outside 0.2 s event windows)", ok)


def test_criterion_8_inversion_designs(grid2, gains2):
    ident_ok = True
    for i in grid2.dgu_ids():
        aug = build_augmented_dgu(grid2, i)
        f = closed_loop_reference_tf(aug, gains2[i])
        f_tilde = desired_tf_template(100.0, max(f.relative_degree, 1))
        c = design_prefilter(f, f_tilde)
        ident_ok &= not isinstance(c, Rejection)
        ident_ok &= rational_equal((c * f).cancel(), f_tilde, rtol=1e-9)
        g_d, g_u = disturbance_tfs(aug, gains2[i])
        n = design_disturbance_compensator(g_d, g_u)
        ident_ok &= not isinstance(n, Rejection)
        ident_ok &= rational_equal((g_u * n.tf).cancel(), -g_d, rtol=1e-9)

    g1 = GridGraph({1: P1}, {})
    gains = synthesize_all(g1)
    aug = build_augmented_dgu(g1, 1)
    g_d, g_u = disturbance_tfs(aug, gains[1])
    comp = design_disturbance_compensator(g_d, g_u, require_proper=True,
                                          fallback_bandwidth_hz=100.0)
    sc = Scenario(duration=1.0, refs={1: 48.0}, events=(
        Event(t=0.5, kind="load_step", data={"i": 1, "r": 8.0}),))
    peak_u = metrics(simulate(g1, gains, scenario=sc), 1,
                     (0.5, 1.0))["peak_deviation"]
    peak_c = metrics(simulate(g1, gains, compensators={1: comp}, scenario=sc),
                     1, (0.5, 1.0))["peak_deviation"]
    ratio = peak_c / peak_u
    ok = ident_ok and ratio <= 0.10
    _gate(8, f"prefilter and compensator identities hold at 1e-9; measured "
             f"load-step peak ratio {ratio:.3f} (<= 0.10)", ok)


def test_criterion_9_numerical_integrity(grid2, scenario1_run):
    tr = scenario1_run.trace
    anti = np.array_equal(tr.column("I_1_2"), -tr.column("I_2_1"),
                          equal_nan=True)

    sc = Scenario(duration=0.02, refs={1: 0.0, 2: 0.0})
    eng = _Engine(grid2, None, {}, {}, sc, SimConfig(), SynthesisOptions())
    keys = eng.cfgobj.keys()
    eng.x[keys[("unit", 1, 0)]] = 5.0
    eng.x[keys[("unit", 2, 0)]] = -3.0
    eng.x[keys[("unit", 1, 1)]] = 1.0
    ptr = eng.run()
    p1, p2 = grid2.dgus[1], grid2.dgus[2]
    e = 0.5 * (p1.c_t * ptr.column("V_1") ** 2
               + p2.c_t * ptr.column("V_2") ** 2
               + p1.l_t * ptr.column("It_1") ** 2
               + p2.l_t * ptr.column("It_2") ** 2
               + grid2.lines[(1, 2)].l * ptr.column("I_1_2") ** 2)
    passive = bool(np.all(np.diff(e) <= 1e-9))

    run = scenario1_run
    cfg2 = SimConfig(max_step=5e-4, event_max_step=5e-6)
    tr2 = simulate(run.grid, run.gains, run.prefilters, run.compensators,
                   scenario=run.scenario, cfg=cfg2)
    same_grid = np.array_equal(tr.time, tr2.time)
    diff = 0.0
    for i in tr.dgu_ids:
        a = tr.column(f"V_{i}")
        b = tr2.column(f"V_{i}")
        same_grid &= np.array_equal(np.isnan(a), np.isnan(b))
        diff = max(diff, float(np.nanmax(np.abs(a - b))))
    halving = same_grid and diff < 1e-6
    ok = anti and passive and halving
    _gate(9, f"line antisymmetry exact; passive energy nonincreasing; "
             f"step-halving voltage agreement {diff:.2g} V (< 1e-6)", ok)
