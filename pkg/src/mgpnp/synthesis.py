"""Per-unit controller synthesis and stability certificates.

Each unit gets a static feedback K = [k_v, k_c, k_i] on its augmented state
[V, I_t, v], found by a small semidefinite program over a structured
certificate Y = P^-1 whose first row pins the voltage coordinate. The
program is solved in a conditioned frame (integrator state scaled by
t0 = sqrt(L_t C_t), certificate normalized to Y[0,0] = 1); gains are frame
invariant and the stored P is rescaled so that P[0,0] equals the requested
eta exactly.

Robustness: the line coupling enters the unit's A only through the single
nonnegative self term A[0,0] = -sum 1/(R C), affinely. The decay constraint
is therefore enforced at two vertices (no coupling, and coupling_headroom
times the design value), which certifies every intermediate line subset by
convexity. A second pass re-centers the certificate inside the feasible set
so that later numeric re-validation (plug/unplug keep checks) sees real
margins instead of solver boundary points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import cvxpy as cp

from .params import GridGraph, InputError, format_num
from .statespace import AugmentedDgu, build_augmented_dgu, check_local_controllability


class Infeasible(Exception):
    """The synthesis program has an empty feasible set (solver certificate).

    Signals denial of the requested plug operation, not a numeric accident.
    """

    def __init__(self, message, dgu=None):
        super().__init__(message)
        self.dgu = dgu


class SolverNumericalFailure(Exception):
    """The solver failed or returned a point that does not verify.

    Distinct from Infeasible: retrying with different scaling/solver
    settings may succeed.
    """


@dataclass(frozen=True)
class LmiWeights:
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 1.0

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0 and self.alpha3 > 0):
            raise InputError("LmiWeights must all be > 0")


@dataclass(frozen=True)
class SynthesisOptions:
    """Knobs of the synthesis program.

    eta: certificate scale (P[0,0]); None derives the default
         1e-2 * min_neighbor(R_ij * C_t) * assumption2_tol.
    feasibility_margin: explicit shift applied to strict inequalities.
    assumption2_tol: threshold for the scale-separation check (and the
         eta default).
    structure_slack: budget on the magnitude of the certificate entries
         Y[0,1], Y[0,2] in the normalized frame. The exactly-zero structure
         has an empty feasible set (with those entries pinned to zero the
         decay block's (3,3) entry is identically zero while the Schur
         complement demands it be strictly negative), so a budget is
         required. It cannot be made arbitrarily small either: feasibility
         at the coupled vertex forces ||Y[:,2]|| to be of order 1/delta,
         which makes slack * gamma bounded below by a constant, so a tiny
         budget blows gamma up by its inverse and puts the optimum at a
         degenerate corner no interior-point solver survives. The default
         1e-2 keeps solves clean; the resulting cross terms in P sit near
         3e-2 in correlation units, checked by verify_certificate.
    coupling_headroom: upper vertex multiplier for the robust decay
         constraint.
    recenter_relax: factor applied to the optimal scalars before the
         interior-centering pass.
    """

    eta: float | None = None
    feasibility_margin: float = 1e-6
    assumption2_tol: float = 1e-3
    structure_slack: float = 1e-2
    coupling_headroom: float = 2.0
    recenter_relax: float = 1.1

    def __post_init__(self):
        if self.eta is not None and not self.eta > 0:
            raise InputError("eta must be > 0")
        if not self.feasibility_margin > 0:
            raise InputError("feasibility_margin must be > 0")
        if not self.assumption2_tol > 0:
            raise InputError("assumption2_tol must be > 0")
        if not self.structure_slack > 0:
            raise InputError("structure_slack must be > 0")
        if not self.coupling_headroom >= 1.0:
            raise InputError("coupling_headroom must be >= 1")
        if not self.recenter_relax > 1.0:
            raise InputError("recenter_relax must be > 1")

    @property
    def slack(self) -> float:
        return self.structure_slack


STRUCTURE_TOL = 0.1  # default gate on P cross-term correlations in verify
_WITNESS_TOL = 1e-6


@dataclass(frozen=True)
class ControllerGains:
    """Feedback row K = [k_v, k_c, k_i], certificate P, and its scalars.

    Construction validates only well-formedness (shapes, finiteness,
    symmetry, positive scalars). The semantic invariants — P > 0 with
    P[0,0] = eta and near-zero (0,1)/(0,2) cross terms, the closed-loop
    decay inequality, and the gain bound ||k||_2 < sqrt(beta)*delta — are
    guaranteed by solve_problem_O on return and re-checkable at any time
    with verify_certificate, which must also be able to report failures
    on hand-perturbed certificates.
    """

    k: np.ndarray
    p: np.ndarray
    eta: float
    gamma: float
    beta: float
    delta: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float).reshape(1, 3)
        p = np.asarray(self.p, dtype=float)
        if p.shape != (3, 3):
            raise InputError("p must be 3x3")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(p))):
            raise InputError("gains must be finite")
        asym = np.max(np.abs(p - p.T))
        if asym > 1e-9 * max(1.0, float(np.max(np.abs(p)))):
            raise InputError("p must be symmetric")
        p = 0.5 * (p + p.T)
        for name in ("eta", "gamma", "beta", "delta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be finite and > 0")
        k = np.ascontiguousarray(k)
        k.flags.writeable = False
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def k_v(self) -> float:
        return float(self.k[0, 0])

    @property
    def k_c(self) -> float:
        return float(self.k[0, 1])

    @property
    def k_i(self) -> float:
        return float(self.k[0, 2])


def default_eta(aug: AugmentedDgu, assumption2_tol: float) -> float:
    """eta small enough that eta/(R_ij C_t) stays two decades under tol.

    Isolated units have no line to scale against; a 1-Ohm reference line
    is used so the default stays well defined.
    """
    entries = [blk[0, 0] for blk in aug.coupling.values()]  # 1/(R_ij C_t)
    if entries:
        min_rc = 1.0 / max(entries)
    else:
        min_rc = 1.0 * aug.c_t
    return 1e-2 * min_rc * assumption2_tol


# --- the conditioned solve frame ----------------------------------------------


def _frames(aug: AugmentedDgu):
    t0 = math.sqrt(aug.l_t * aug.c_t)
    d = np.diag([1.0, 1.0, t0])
    di = np.diag([1.0, 1.0, 1.0 / t0])
    return t0, d, di


def _scaled_ab(aug: AugmentedDgu, a11: float, t0, d, di):
    ah = np.array(aug.aug.a, dtype=float)
    ah[0, 0] = -a11
    an = t0 * (di @ ah @ d)
    bn = t0 * (di @ aug.aug.b)
    return an, bn


def _vertices(a11_design: float, headroom: float) -> list:
    if a11_design == 0.0:
        return [0.0]
    return [0.0, headroom * a11_design]


def solve_problem_O(aug: AugmentedDgu, w: LmiWeights | None = None,
                    opts: SynthesisOptions | None = None) -> ControllerGains:
    """Synthesize gains and certificate for one unit.

    Minimizes alpha1*gamma + alpha2*beta + alpha3*delta over the structured
    certificate, then re-centers. Raises Infeasible on a solver
    infeasibility certificate and SolverNumericalFailure when no returned
    point verifies.
    """
    w = w or LmiWeights()
    opts = opts or SynthesisOptions()
    ctrb = check_local_controllability(aug)
    if not ctrb.ok:
        raise InputError(f"augmented pair not controllable (rank {ctrb.rank})")

    t0, d, di = _frames(aug)
    a11d = aug.coupling_self_term
    verts = _vertices(a11d, opts.coupling_headroom)
    margin = opts.feasibility_margin
    slack = opts.slack

    i3 = np.eye(3)
    yv = cp.Variable((3, 3), symmetric=True)
    gv = cp.Variable((1, 3))
    gam = cp.Variable(nonneg=True)
    bet = cp.Variable(nonneg=True)
    dlt = cp.Variable(nonneg=True)

    def constraints(shift):
        cons = [
            yv[0, 0] == 1.0,
            cp.abs(yv[0, 1]) <= slack,
            cp.abs(yv[0, 2]) <= slack,
            yv >> shift * i3,
            cp.bmat([[-bet * i3, gv.T], [gv, -np.eye(1)]]) << -shift * np.eye(4),
            cp.bmat([[yv, i3], [i3, dlt * i3]]) >> shift * np.eye(6),
        ]
        for a11 in verts:
            an, bn = _scaled_ab(aug, a11, t0, d, di)
            sym = an @ yv + bn @ gv
            cons.append(
                cp.bmat([[sym + sym.T, yv], [yv, -gam * i3]]) << (margin - shift) * np.eye(6))
        return cons

    objective = cp.Minimize(w.alpha1 * gam + w.alpha2 * bet + w.alpha3 * dlt)
    prob = cp.Problem(objective, constraints(margin))
    status, solver_used = _run_solvers(prob)
    if status is None:
        raise SolverNumericalFailure("no solver produced a usable point")

    scalars = (float(gam.value), float(bet.value), float(dlt.value))
    best = (np.array(yv.value), np.array(gv.value), scalars, status, solver_used, None)

    # pass 2: freeze relaxed scalars, maximize a common interior slack
    relax = opts.recenter_relax
    tvar = cp.Variable(nonneg=True)
    cons2 = [
        yv[0, 0] == 1.0,
        cp.abs(yv[0, 1]) <= slack,
        cp.abs(yv[0, 2]) <= slack,
        yv >> (margin + tvar) * i3,
        cp.bmat([[-relax * scalars[1] * i3, gv.T], [gv, -np.eye(1)]]) << -(margin + tvar) * np.eye(4),
        cp.bmat([[yv, i3], [i3, relax * scalars[2] * i3]]) >> (margin + tvar) * np.eye(6),
        tvar <= 1.0,
    ]
    for a11 in verts:
        an, bn = _scaled_ab(aug, a11, t0, d, di)
        sym = an @ yv + bn @ gv
        cons2.append(
            cp.bmat([[sym + sym.T, yv], [yv, -relax * scalars[0] * i3]]) << -tvar * np.eye(6))
    prob2 = cp.Problem(cp.Maximize(tvar), cons2)
    try:
        status2, solver2 = _run_solvers(prob2, allow_infeasible=True)
    except Infeasible:
        status2 = None
    if status2 is not None and yv.value is not None:
        recentered = (
            np.array(yv.value), np.array(gv.value),
            (relax * scalars[0], relax * scalars[1], relax * scalars[2]),
            status2, solver2, float(tvar.value))
    else:
        recentered = None

    for cand, label in ((recentered, "recentered"), (best, "pass1")):
        if cand is None:
            continue
        gains = _package(aug, cand, opts, w, verts, label)
        if gains is not None:
            return gains
    raise SolverNumericalFailure("solver points failed post-solve verification")


def _run_solvers(prob, allow_infeasible=False):
    """CLARABEL first, SCS as fallback; clean optimal preferred, a single
    inaccurate point accepted as last resort (verification decides later)."""
    inaccurate = None
    for solver, kwargs in ((cp.CLARABEL, {}), (cp.SCS, {"eps": 1e-9, "max_iters": 200000})):
        try:
            prob.solve(solver=solver, **kwargs)
        except cp.error.SolverError:
            continue
        if prob.status == cp.OPTIMAL:
            return prob.status, str(solver)
        if prob.status in (cp.INFEASIBLE, "infeasible_inaccurate"):
            if allow_infeasible:
                return None, None
            raise Infeasible(f"synthesis program infeasible ({prob.status})")
        if prob.status == "optimal_inaccurate" and inaccurate is None:
            # snapshot the point; a later solver attempt overwrites .value
            inaccurate = (prob.status, str(solver),
                          [None if v.value is None else np.array(v.value)
                           for v in prob.variables()])
    if inaccurate is not None:
        status, solver_used, values = inaccurate
        for var, val in zip(prob.variables(), values):
            var.value = None if val is None else var.project(val)
        return status, solver_used
    return None, None


def _package(aug, cand, opts, w, verts, label):
    """Physical-frame gains + certificate from a solver point, or None if
    the point does not verify."""
    yvv, gvv, (gam_n, bet_n, dlt_n), status, solver_used, tval = cand
    yvv = 0.5 * (yvv + yvv.T)
    try:
        pn = np.linalg.inv(yvv)
    except np.linalg.LinAlgError:
        return None
    pn = 0.5 * (pn + pn.T)
    if np.linalg.eigvalsh(pn)[0] <= 0:
        return None
    t0, d, di = _frames(aug)
    kn = gvv @ pn
    k_phys = kn @ di
    eta = opts.eta if opts.eta is not None else default_eta(aug, opts.assumption2_tol)
    eta_s = eta / pn[0, 0]
    p_phys = eta_s * (di @ pn @ di)
    p_phys = 0.5 * (p_phys + p_phys.T)
    g_phys = (gvv @ d) / eta_s
    beta_phys = float(np.linalg.norm(g_phys, 2) * (1.0 + _WITNESS_TOL)) ** 2
    delta_phys = float(np.linalg.norm(p_phys, 2) * (1.0 + _WITNESS_TOL))

    # decay must hold at every enforced vertex, checked without the solver
    for a11 in verts + [aug.coupling_self_term]:
        an, bn = _scaled_ab(aug, a11, t0, d, di)
        acl = an + bn @ kn
        m = acl.T @ pn + pn @ acl
        lam = np.linalg.eigvalsh(m)[-1]
        if lam > -1e-12 * max(1.0, np.linalg.norm(m, 2)):
            return None

    meta = {
        "solver": solver_used or "",
        "solver_status": status or "",
        "pass": label,
        "frame_scale": t0,
        "gamma_n": gam_n,
        "beta_n": bet_n,
        "delta_n": dlt_n,
        "structure_slack": opts.slack,
        "feasibility_margin": opts.feasibility_margin,
        "coupling_headroom": opts.coupling_headroom,
        "a11_design": aug.coupling_self_term,
        "weights": (w.alpha1, w.alpha2, w.alpha3),
    }
    if tval is not None:
        meta["recenter_slack"] = tval
    try:
        gains = ControllerGains(
            k=k_phys, p=p_phys, eta=eta, gamma=gam_n,
            beta=beta_phys, delta=delta_phys, metadata=meta)
    except InputError:
        return None
    report = verify_certificate(aug, gains)
    return gains if report.ok else None


# --- certificate verification --------------------------------------------------


@dataclass(frozen=True)
class CertificateReport:
    ok: bool
    checks: dict
    lyap_max_scaled: float
    lyap_margin: float
    lyap_max_physical: float

    def failed(self) -> list:
        return [name for name, (ok, _) in self.checks.items() if not ok]


def verify_certificate(aug: AugmentedDgu, g: ControllerGains,
                       structure_tol: float = STRUCTURE_TOL) -> CertificateReport:
    """Solver-free re-check of a gains/certificate pair on a given model.

    Four checks: P positive definite; P structure (P[0,0] equals eta, and
    the (0,1)/(0,2) cross terms small in correlation units — exact zeros
    are unattainable, see SynthesisOptions.structure_slack); the
    closed-loop decay inequality; the gain bound. The decay inequality is
    evaluated in the conditioned frame (a congruence, so the sign is
    exact); the physical-frame value is reported alongside.
    """
    checks = {}
    p = g.p
    evals = np.linalg.eigvalsh(p)
    checks["p_positive"] = (bool(evals[0] > 0), float(evals[0]))

    if min(p[0, 0], p[1, 1], p[2, 2]) > 0:
        c01 = abs(p[0, 1]) / math.sqrt(p[0, 0] * p[1, 1])
        c02 = abs(p[0, 2]) / math.sqrt(p[0, 0] * p[2, 2])
    else:
        c01 = c02 = math.inf
    eta_err = abs(p[0, 0] - g.eta) / g.eta
    structure_ok = eta_err <= 1e-9 and max(c01, c02) <= structure_tol
    checks["p_structure"] = (bool(structure_ok), float(max(c01, c02)))

    t0, d, di = _frames(aug)
    acl = aug.aug.a + aug.aug.b @ g.k
    acl_n = t0 * (di @ acl @ d)
    p_s = d @ p @ d
    p_s = p_s / p_s[0, 0]
    m_n = acl_n.T @ p_s + p_s @ acl_n
    lam_n = float(np.linalg.eigvalsh(m_n)[-1])
    lyap_margin = -lam_n / max(1.0, float(np.linalg.norm(m_n, 2)))
    checks["lyapunov"] = (bool(lam_n < 0), lam_n)

    m_phys = acl.T @ p + p @ acl
    lam_phys = float(np.linalg.eigvalsh(m_phys)[-1])

    bound = math.sqrt(g.beta) * g.delta
    kn2 = float(np.linalg.norm(g.k))
    checks["gain_bound"] = (bool(kn2 < bound), bound - kn2)

    ok = all(v[0] for v in checks.values())
    return CertificateReport(ok, checks, lam_n, lyap_margin, lam_phys)


_RECHECK_RTOL = 5e-7  # violation tolerance per block, relative to block norm


def recheck_constraints(aug_new: AugmentedDgu, g: ControllerGains) -> tuple:
    """Numeric re-evaluation of the synthesis constraint set for stored gains
    against a (possibly different) topology. Used by the keep-if-valid
    plug/unplug policy.

    Reconstructs the conditioned frame from the stored physical certificate,
    then evaluates every constraint block at the new design point and at the
    isolated vertex. Returns (ok, details).
    """
    t0, d, di = _frames(aug_new)
    try:
        y_phys = np.linalg.inv(g.p)
    except np.linalg.LinAlgError:
        return False, {"error": "stored P singular"}
    # stored p = eta_s * Di Pn Di, so the solve-frame Y comes back via Di
    y_s = di @ y_phys @ di
    yv = y_s / y_s[0, 0]
    yv = 0.5 * (yv + yv.T)
    kn = g.k @ d
    gv = kn @ yv

    meta = g.metadata
    gam_n = float(meta.get("gamma_n", 0.0)) or None
    bet_n = float(meta.get("beta_n", 0.0)) or None
    dlt_n = float(meta.get("delta_n", 0.0)) or None
    slack = float(meta.get("structure_slack", 0.0)) or 1e-2
    margin = float(meta.get("feasibility_margin", 0.0)) or 1e-6
    if bet_n is None:
        bet_n = float(np.linalg.norm(gv, 2)) ** 2 * (1 + 1e-9)
    if dlt_n is None:
        dlt_n = (1 + 1e-9) / float(np.linalg.eigvalsh(yv)[0])

    def tol(mat):
        return _RECHECK_RTOL * max(1.0, float(np.linalg.norm(mat, 2)))

    details = {}
    ok = True

    lam_y = float(np.linalg.eigvalsh(yv - margin * np.eye(3))[0])
    details["y_pos"] = lam_y
    ok &= lam_y >= -tol(yv)

    s01, s02 = abs(yv[0, 1]), abs(yv[0, 2])
    details["structure"] = max(s01, s02)
    ok &= max(s01, s02) <= slack * (1 + 1e-6) + _RECHECK_RTOL

    blk_d = np.block([[-bet_n * np.eye(3), gv.T], [gv, -np.eye(1)]])
    lam = float(np.linalg.eigvalsh(blk_d)[-1])
    details["gain_block"] = lam
    ok &= lam <= tol(blk_d)

    blk_e = np.block([[yv, np.eye(3)], [np.eye(3), dlt_n * np.eye(3)]])
    lam = float(np.linalg.eigvalsh(blk_e)[0])
    details["delta_block"] = lam
    ok &= lam >= -tol(blk_e)

    pn = np.linalg.inv(yv)
    pn = 0.5 * (pn + pn.T)
    for tag, a11 in (("isolated", 0.0), ("design", aug_new.coupling_self_term)):
        an, bn = _scaled_ab(aug_new, a11, t0, d, di)
        sym = an @ yv + bn @ gv
        if gam_n is not None:
            blk = np.block([[sym + sym.T, yv], [yv, -gam_n * np.eye(3)]])
            lam = float(np.linalg.eigvalsh(blk)[-1])
            details[f"decay_{tag}"] = lam
            ok &= lam <= tol(blk)
        acl = an + bn @ (gv @ pn)
        m = acl.T @ pn + pn @ acl
        lam = float(np.linalg.eigvalsh(m)[-1])
        details[f"lyap_{tag}"] = lam
        ok &= lam <= -1e-12 * max(1.0, float(np.linalg.norm(m, 2)))

    return bool(ok), details


# --- scale separation -----------------------------------------------------------


@dataclass(frozen=True)
class Assumption2Report:
    ok: bool
    worst_ratio: float
    worst_edge: tuple | None
    ratios: dict


def check_assumption_2(g: GridGraph, etas: dict, tol: float) -> Assumption2Report:
    """Checks eta_i / (R_ij C_ti) <= tol for every unit and neighbor.

    Boundary equality passes. Units without neighbors contribute nothing.
    """
    ratios = {}
    worst, worst_edge = 0.0, None
    for i in g.dgu_ids():
        if i not in etas:
            continue
        c_ti = g.dgus[i].c_t
        for j in g.neighbors(i):
            r = g.line_between(i, j).r
            ratio = etas[i] / (r * c_ti)
            ratios[(i, j)] = ratio
            if ratio > worst:
                worst, worst_edge = ratio, (i, j)
    return Assumption2Report(worst <= tol, worst, worst_edge, ratios)


# --- global certificate -----------------------------------------------------------


@dataclass(frozen=True)
class GlobalCertificate:
    ok: bool
    spectral_ok: bool
    max_real: float
    eigenvalues: tuple
    lyap_max: float
    term_b_max_abs: float
    term_a_block_error: float
    n_dgus: int


def _closed_loop_blocks(g: GridGraph, gains: dict):
    ids = g.dgu_ids()
    missing = [i for i in ids if i not in gains]
    if missing:
        raise InputError(f"gains missing for {missing}")
    n = len(ids)
    pos = {d: k for k, d in enumerate(ids)}
    acl = np.zeros((3 * n, 3 * n))
    pblk = np.zeros((3 * n, 3 * n))
    local = {}
    for i in ids:
        aug = build_augmented_dgu(g, i)
        ki = gains[i].k
        blk = aug.aug.a + aug.aug.b @ ki
        s = 3 * pos[i]
        acl[s:s + 3, s:s + 3] = blk
        pblk[s:s + 3, s:s + 3] = gains[i].p
        local[i] = (blk, gains[i].p)
        for j, cblk in aug.coupling.items():
            sj = 3 * pos[j]
            acl[s:s + 3, sj:sj + 3] = cblk
    return ids, pos, acl, pblk, local


def certify_global_stability(g: GridGraph, gains: dict) -> GlobalCertificate:
    """Two independent whole-grid checks under the algebraic-line model.

    1. Spectral: eigenvalues of the assembled closed loop, all real parts
       strictly negative. This is the binding criterion.
    2. Energy form: lambda_max of Acl' P + P Acl for block-diagonal P,
       reported together with the size of its coupling-only part ("term b"),
       which the scale-separation condition keeps near zero. The coupling
       part sits on rows/columns where the block-diagonal part is only
       marginally negative, so the assembled value is reported, not gated.
    """
    ids, pos, acl, pblk, local = _closed_loop_blocks(g, gains)
    eigs = np.linalg.eigvals(acl)
    max_real = float(np.max(eigs.real))
    spectral_ok = bool(max_real < 0)

    m = acl.T @ pblk + pblk @ acl
    lyap_max = float(np.linalg.eigvalsh(0.5 * (m + m.T))[-1])

    term_a_err = 0.0
    mb = m.copy()
    for i in ids:
        s = 3 * pos[i]
        blk, p_i = local[i]
        m_local = blk.T @ p_i + p_i @ blk
        term_a_err = max(term_a_err, float(np.max(np.abs(m[s:s + 3, s:s + 3] - m_local))))
        mb[s:s + 3, s:s + 3] = 0.0
    term_b_max = float(np.max(np.abs(mb))) if mb.size else 0.0

    return GlobalCertificate(
        ok=spectral_ok,
        spectral_ok=spectral_ok,
        max_real=max_real,
        eigenvalues=tuple(sorted(eigs, key=lambda z: (z.real, z.imag))),
        lyap_max=lyap_max,
        term_b_max_abs=term_b_max,
        term_a_block_error=term_a_err,
        n_dgus=len(ids),
    )


def synthesize_all(g: GridGraph, w: LmiWeights | None = None,
                   opts: SynthesisOptions | None = None,
                   isolated: bool = False) -> dict:
    """solve_problem_O for every unit of a grid.

    isolated=True designs each controller for the unit with its lines
    removed (used for startup phases where units run disconnected).
    """
    out = {}
    for i in g.dgu_ids():
        topo = g.without_lines_of(i) if isolated else g
        aug = build_augmented_dgu(topo, i)
        try:
            out[i] = solve_problem_O(aug, w, opts)
        except Infeasible as exc:
            raise Infeasible(str(exc), dgu=i) from exc
    return out
