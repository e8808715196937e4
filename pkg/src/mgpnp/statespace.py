"""State-space models of the microgrid.

Builds the 2-state unit model, its 3-state integrator-augmented form, the
algebraic-line (quasi-stationary) overall model with 2N states, and the
expanded model that carries two directed line-current states per connection.

Conventions:
  unit states   [V, I_t]          (output-node voltage, filter current)
  augmented     [V, I_t, v]       (v integrates the tracking error)
  line state    I_ij              (current through the line, positive into i)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import DguParams, GridGraph, InputError, LineParams

RANK_RTOL = 1e-9  # singular values below RANK_RTOL * s_max count as zero


@dataclass(frozen=True)
class StateSpaceModel:
    """Dense (A, B, C, M, H) with axis labels.

    dx = A x + B u + M d;  y = C x;  z = H y.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    m_dist: np.ndarray
    h: np.ndarray
    state_labels: tuple = ()
    input_labels: tuple = ()
    output_labels: tuple = ()
    disturbance_labels: tuple = ()

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        m = np.asarray(self.m_dist, dtype=float)
        h = np.asarray(self.h, dtype=float)
        n = a.shape[0]
        if a.shape != (n, n):
            raise InputError(f"A must be square, got {a.shape}")
        if b.ndim != 2 or b.shape[0] != n:
            raise InputError(f"B rows must match A, got {b.shape}")
        if c.ndim != 2 or c.shape[1] != n:
            raise InputError(f"C cols must match A, got {c.shape}")
        if m.ndim != 2 or m.shape[0] != n:
            raise InputError(f"M rows must match A, got {m.shape}")
        if h.ndim != 2 or h.shape[1] != c.shape[0]:
            raise InputError(f"H cols must match C rows, got {h.shape}")
        for mat, name in ((a, "a"), (b, "b"), (c, "c"), (m, "m_dist"), (h, "h")):
            arr = np.ascontiguousarray(mat)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        for lbl_name, count in (
            ("state_labels", n),
            ("input_labels", b.shape[1]),
            ("output_labels", c.shape[0]),
            ("disturbance_labels", m.shape[1]),
        ):
            lbls = tuple(getattr(self, lbl_name))
            if lbls and len(lbls) != count:
                raise InputError(f"{lbl_name}: expected {count} labels, got {len(lbls)}")
            if len(set(lbls)) != len(lbls):
                raise InputError(f"{lbl_name} must be unique")
            object.__setattr__(self, lbl_name, lbls)

    @property
    def n_states(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class AugmentedDgu:
    """One unit's 2-state model plus its integrator-augmented 3-state model
    and the 3x3 coupling blocks toward each neighbor.
    """

    base: StateSpaceModel
    aug: StateSpaceModel
    coupling: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.base.n_states != 2:
            raise InputError("base model must have 2 states")
        if self.aug.n_states != 3:
            raise InputError("augmented model must have 3 states")
        # bottom-left row of the augmented A must be -H C, last column zero
        hc = (self.base.h @ self.base.c).ravel()
        if not np.allclose(self.aug.a[2, :2], -hc, rtol=0, atol=0):
            raise InputError("augmented A: error-integrator row must equal -H C")
        if self.aug.a[0, 2] != 0.0 or self.aug.a[1, 2] != 0.0 or self.aug.a[2, 2] != 0.0:
            raise InputError("augmented A: last column must be zero")
        if not np.array_equal(self.aug.a[:2, :2], self.base.a):
            raise InputError("augmented A: top-left block must equal base A")
        coup = {}
        for j, m in dict(self.coupling).items():
            m = np.asarray(m, dtype=float)
            if m.shape != (3, 3):
                raise InputError(f"coupling block to {j!r} must be 3x3")
            mask = np.zeros_like(m)
            mask[0, 0] = m[0, 0]
            if not np.array_equal(m, mask):
                raise InputError(f"coupling block to {j!r} must have (1,1) as its only nonzero")
            m = np.ascontiguousarray(m)
            m.flags.writeable = False
            coup[j] = m
        object.__setattr__(self, "coupling", coup)

    # electrical constants recovered from the matrices (used by synthesis/sim)
    @property
    def l_t(self) -> float:
        return 1.0 / self.base.b[1, 0]

    @property
    def c_t(self) -> float:
        return -1.0 / self.base.m_dist[0, 0]

    @property
    def r_t(self) -> float:
        return -self.base.a[1, 1] * self.l_t

    @property
    def coupling_self_term(self) -> float:
        """Sum of 1/(R_ij * C_t) over attached lines (the -A[0,0] entry)."""
        return -self.base.a[0, 0]


# --- builders -----------------------------------------------------------------


def build_local_dgu(p: DguParams, attached_lines: list) -> StateSpaceModel:
    """2-state model of one unit with the line couplings folded into A[0,0].

    attached_lines may be empty (isolated unit): the A[0,0] sum is then 0.
    """
    if not isinstance(p, DguParams):
        raise InputError("p must be DguParams")
    for lp in attached_lines:
        if not isinstance(lp, LineParams):
            raise InputError("attached_lines must contain LineParams")
    a11 = -sum(1.0 / (lp.r * p.c_t) for lp in attached_lines)
    a = np.array([[a11, 1.0 / p.c_t], [-1.0 / p.l_t, -p.r_t / p.l_t]])
    b = np.array([[0.0], [1.0 / p.l_t]])
    c = np.eye(2)
    m = np.array([[-1.0 / p.c_t], [0.0]])
    h = np.array([[1.0, 0.0]])
    return StateSpaceModel(
        a, b, c, m, h,
        state_labels=("V", "I_t"),
        input_labels=("u",),
        output_labels=("V", "I_t"),
        disturbance_labels=("I_L",),
    )


def build_coupling(line: LineParams, c_ti: float) -> np.ndarray:
    """2x2 coupling block toward a neighbor: single entry 1/(R*C) at (1,1)."""
    if not isinstance(line, LineParams):
        raise InputError("line must be LineParams")
    if not c_ti > 0:
        raise InputError("c_ti must be > 0")
    out = np.zeros((2, 2))
    out[0, 0] = 1.0 / (line.r * c_ti)
    return out


def build_line_subsystem(line: LineParams):
    """Directed line-current dynamics: a_ll scalar, a_li / a_lj voltage rows.

    dI_ij = a_ll * I_ij + a_li . [V_i, I_ti] + a_lj . [V_j, I_tj]
    """
    if not isinstance(line, LineParams):
        raise InputError("line must be LineParams")
    a_ll = -line.r / line.l
    a_li = np.array([[-1.0 / line.l, 0.0]])
    a_lj = np.array([[1.0 / line.l, 0.0]])
    return a_ll, a_li, a_lj


def augment_with_integrator(local: StateSpaceModel, couplings: dict | None = None) -> AugmentedDgu:
    """Append the tracking-error integrator state: dv = z_ref - H C x.

    couplings, when given, maps neighbor id -> 2x2 coupling block; each is
    zero-padded to 3x3. Exogenous inputs of the result are [I_L, z_ref].
    """
    if local.n_states != 2:
        raise InputError("local model must have 2 states")
    a = np.zeros((3, 3))
    a[:2, :2] = local.a
    a[2, :2] = -(local.h @ local.c).ravel()
    b = np.vstack([local.b, np.zeros((1, 1))])
    c = np.eye(3)
    m = np.zeros((3, 2))
    m[:2, :1] = local.m_dist
    m[2, 1] = 1.0
    h = np.array([[1.0, 0.0, 0.0]])
    aug = StateSpaceModel(
        a, b, c, m, h,
        state_labels=local.state_labels + ("v",),
        input_labels=local.input_labels,
        output_labels=local.output_labels + ("v",),
        disturbance_labels=("I_L", "z_ref"),
    )
    coup3 = {}
    for j, blk in (couplings or {}).items():
        blk = np.asarray(blk, dtype=float)
        if blk.shape != (2, 2):
            raise InputError("coupling blocks must be 2x2 before padding")
        big = np.zeros((3, 3))
        big[:2, :2] = blk
        coup3[j] = big
    return AugmentedDgu(base=local, aug=aug, coupling=coup3)


def build_augmented_dgu(g: GridGraph, i) -> AugmentedDgu:
    """Full chain for one unit of a grid: local model + padded couplings."""
    p = g.dgus[i]
    local = build_local_dgu(p, g.attached_lines(i))
    coup = {j: build_coupling(g.line_between(i, j), p.c_t) for j in g.neighbors(i)}
    return augment_with_integrator(local, coup)


def assemble_qsl_overall(g: GridGraph) -> StateSpaceModel:
    """2N-state overall model with algebraic lines folded into the A blocks."""
    ids = g.dgu_ids()
    n = len(ids)
    if n == 0:
        raise InputError("empty grid")
    pos = {d: k for k, d in enumerate(ids)}
    a = np.zeros((2 * n, 2 * n))
    b = np.zeros((2 * n, n))
    m = np.zeros((2 * n, n))
    c = np.eye(2 * n)
    h = np.zeros((n, 2 * n))
    for d in ids:
        k = pos[d]
        local = build_local_dgu(g.dgus[d], g.attached_lines(d))
        a[2 * k:2 * k + 2, 2 * k:2 * k + 2] = local.a
        b[2 * k:2 * k + 2, k:k + 1] = local.b
        m[2 * k:2 * k + 2, k:k + 1] = local.m_dist
        h[k, 2 * k] = 1.0
        for j in g.neighbors(d):
            blk = build_coupling(g.line_between(d, j), g.dgus[d].c_t)
            kj = pos[j]
            a[2 * k:2 * k + 2, 2 * kj:2 * kj + 2] = blk
    st, iu, od = [], [], []
    for d in ids:
        st += [f"V_{d}", f"It_{d}"]
        iu.append(f"u_{d}")
        od.append(f"IL_{d}")
    return StateSpaceModel(
        a, b, c, m, h,
        state_labels=tuple(st),
        input_labels=tuple(iu),
        output_labels=tuple(st),
        disturbance_labels=tuple(od),
    )


def assemble_full_line_model(g: GridGraph) -> StateSpaceModel:
    """Expanded model: 2N unit states plus two directed line states per edge.

    The unit block keeps the algebraic-line substitution, so the line states
    are driven by the node voltages but feed nothing back; A is block
    triangular and its spectrum is the union of the unit-block spectrum and
    {-R/L} per directed line.
    """
    qsl = assemble_qsl_overall(g)
    ids = g.dgu_ids()
    pos = {d: k for k, d in enumerate(ids)}
    edges = g.edge_keys()
    n2 = 2 * len(ids)
    e2 = 2 * len(edges)
    nt = n2 + e2
    a = np.zeros((nt, nt))
    a[:n2, :n2] = qsl.a
    labels = list(qsl.state_labels)
    for k, (i, j) in enumerate(edges):
        a_ll, a_li, a_lj = build_line_subsystem(g.lines[(i, j)])
        # direction ij: current into i, driven by V_j - V_i
        row = n2 + 2 * k
        a[row, row] = a_ll
        a[row, 2 * pos[i]:2 * pos[i] + 2] = a_li.ravel()
        a[row, 2 * pos[j]:2 * pos[j] + 2] = a_lj.ravel()
        labels.append(f"I_{i}_{j}")
        # direction ji: swap the endpoint roles
        row = n2 + 2 * k + 1
        a[row, row] = a_ll
        a[row, 2 * pos[j]:2 * pos[j] + 2] = a_li.ravel()
        a[row, 2 * pos[i]:2 * pos[i] + 2] = a_lj.ravel()
        labels.append(f"I_{j}_{i}")
    b = np.vstack([qsl.b, np.zeros((e2, qsl.b.shape[1]))])
    m = np.vstack([qsl.m_dist, np.zeros((e2, qsl.m_dist.shape[1]))])
    c = np.eye(nt)
    h = np.hstack([qsl.h, np.zeros((qsl.h.shape[0], e2))])
    return StateSpaceModel(
        a, b, c, m, h,
        state_labels=tuple(labels),
        input_labels=qsl.input_labels,
        output_labels=tuple(labels),
        disturbance_labels=qsl.disturbance_labels,
    )


# --- rank checks --------------------------------------------------------------


@dataclass(frozen=True)
class RankReport:
    rank: int
    expected: int
    ok: bool
    singular_values: tuple
    tolerance: float


def _numerical_rank(mat: np.ndarray) -> tuple:
    # Rank is invariant under nonzero diagonal row/column scalings, so
    # equilibrate first (Ruiz iteration): physical models mix units like
    # 1/L ~ 1e6 and plain 1s, and a relative cutoff on the raw singular
    # values would misread that spread as rank deficiency.
    a = np.array(mat, dtype=float)
    if a.size:
        for _ in range(10):
            rn = np.sqrt(np.max(np.abs(a), axis=1))
            rn[rn == 0] = 1.0
            a /= rn[:, None]
            cn = np.sqrt(np.max(np.abs(a), axis=0))
            cn[cn == 0] = 1.0
            a /= cn[None, :]
    sv = np.linalg.svd(a, compute_uv=False)
    smax = sv[0] if sv.size else 0.0
    tol = RANK_RTOL * smax
    return int(np.sum(sv > tol)), sv, tol


def check_rank_gamma(qsl_overall: StateSpaceModel) -> RankReport:
    """Regulation-feasibility rank test on the 2N-state overall model.

    Builds [[A, B], [H C, 0]] and checks numerical rank == 3N. The model
    must be square in the sense inputs == controlled outputs.
    """
    a, b = qsl_overall.a, qsl_overall.b
    hc = qsl_overall.h @ qsl_overall.c
    nu, nz = b.shape[1], hc.shape[0]
    if nu != nz:
        raise InputError("rank test requires as many inputs as controlled outputs")
    n = a.shape[0]
    gam = np.zeros((n + nz, n + nu))
    gam[:n, :n] = a
    gam[:n, n:] = b
    gam[n:, :n] = hc
    rank, sv, tol = _numerical_rank(gam)
    expected = n + nu  # = 3N for the 2N-state model with N inputs
    return RankReport(rank, expected, rank == expected, tuple(sv), tol)


def check_local_controllability(aug: AugmentedDgu) -> RankReport:
    """Rank of [B, AB, A^2 B] for the 3-state augmented model."""
    a, b = aug.aug.a, aug.aug.b
    ctrb = np.hstack([b, a @ b, a @ a @ b])
    rank, sv, tol = _numerical_rank(ctrb)
    return RankReport(rank, 3, rank == 3, tuple(sv), tol)
