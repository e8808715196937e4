"""Transfer-function machinery for the per-unit closed loop.

Reference and disturbance transfer functions come straight out of the 3-state
closed-loop model; prefilters and disturbance compensators are built by
rational inversion, which is legitimate only under the stable-inversion
conditions checked here (no right-half-plane zeros in the inverted path, no
delays, realizable result). Everything works on explicit polynomial
coefficient arrays in descending powers, the numpy.polyval convention; the
models are tiny, so companion-matrix root finding is reliable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .params import InputError, format_num
from .statespace import AugmentedDgu, StateSpaceModel
from .synthesis import ControllerGains, SolverNumericalFailure

# roots closer than this (relative to 1 + |root|) cancel when reducing
CANCEL_RTOL = 1e-7
# a root is treated as right-half-plane when Re >= -RHP_RTOL * max(1, |roots|);
# imaginary-axis roots are rejected too, inverting them gives a marginal pole
RHP_RTOL = 1e-9

DEFAULT_GRID_HZ = (0.1, 1e5)
DEFAULT_GRID_POINTS = 400


def default_frequency_grid(lo_hz: float = DEFAULT_GRID_HZ[0],
                           hi_hz: float = DEFAULT_GRID_HZ[1],
                           points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if not (0 < lo_hz < hi_hz) or points < 2:
        raise InputError("frequency grid needs 0 < lo < hi and at least 2 points")
    return np.logspace(np.log10(lo_hz), np.log10(hi_hz), points)


# --- rational functions -------------------------------------------------------


def _strip_leading_zeros(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(c != 0.0)
    if nz.size == 0:
        return np.zeros(1)
    return c[nz[0]:]


def _polyadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[n - len(a):] += a
    out[n - len(b):] += b
    return out


@dataclass(frozen=True)
class RationalTf:
    """One rational function num(s)/den(s), coefficients in descending powers.

    The representation is normalized: leading zero coefficients are stripped
    and the denominator is made monic. A zero numerator is stored as [0].
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float)).ravel()
        den = np.atleast_1d(np.asarray(self.den, dtype=float)).ravel()
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise InputError("transfer-function coefficients must be finite")
        den = _strip_leading_zeros(den)
        if den[0] == 0.0:
            raise InputError("denominator must be nonzero")
        num = _strip_leading_zeros(num) / den[0]
        den = den / den[0]
        num.flags.writeable = False
        den.flags.writeable = False
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    # degrees and shape
    @property
    def is_zero(self) -> bool:
        return self.num.size == 1 and self.num[0] == 0.0

    @property
    def deg_num(self) -> int:
        return int(self.num.size - 1)

    @property
    def deg_den(self) -> int:
        return int(self.den.size - 1)

    @property
    def relative_degree(self) -> int:
        return self.deg_den - self.deg_num

    @property
    def is_proper(self) -> bool:
        return self.is_zero or self.deg_num <= self.deg_den

    # evaluation
    def evaluate(self, s):
        """Value at complex s (scalar or array); poles evaluate to inf."""
        s = np.asarray(s)
        nv = np.polyval(self.num, s)
        dv = np.polyval(self.den, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(dv == 0,
                           np.where(nv == 0, np.nan, np.inf + 0j),
                           nv / np.where(dv == 0, 1.0, dv))
        return out if out.ndim else out[()]

    def dc_gain(self) -> float:
        n0, d0 = float(self.num[-1]), float(self.den[-1])
        if d0 == 0.0:
            return np.nan if n0 == 0.0 else np.inf
        return n0 / d0

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        if self.is_zero:
            return np.array([], dtype=complex)
        return np.roots(self.num)

    # algebra; results are NOT reduced, call cancel() explicitly
    def __mul__(self, other):
        other = _as_tf(other)
        if self.is_zero or other.is_zero:
            return RationalTf([0.0], [1.0])
        return RationalTf(np.polymul(self.num, other.num),
                          np.polymul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tf(other)
        if other.is_zero:
            raise InputError("division by the zero transfer function")
        if self.is_zero:
            return RationalTf([0.0], [1.0])
        return RationalTf(np.polymul(self.num, other.den),
                          np.polymul(self.den, other.num))

    def __add__(self, other):
        other = _as_tf(other)
        return RationalTf(
            _polyadd(np.polymul(self.num, other.den), np.polymul(other.num, self.den)),
            np.polymul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return RationalTf(-self.num, self.den)

    def __sub__(self, other):
        return self + (-_as_tf(other))

    def cancel(self, rtol: float = CANCEL_RTOL) -> "RationalTf":
        """Minimal form: remove zero/pole pairs closer than rtol*(1+|root|)."""
        if self.is_zero:
            return RationalTf([0.0], [1.0])
        zs = list(np.roots(self.num))
        ps = list(np.roots(self.den))
        gain = self.num[0]  # den is monic
        kept = []
        for z in zs:
            best, best_d = None, None
            for idx, p in enumerate(ps):
                d = abs(z - p)
                if d <= rtol * (1.0 + abs(z)) and (best is None or d < best_d):
                    best, best_d = idx, d
            if best is None:
                kept.append(z)
            else:
                ps.pop(best)
        num = gain * np.atleast_1d(np.poly(kept))
        den = np.atleast_1d(np.poly(ps))
        # conjugate pairs cancel together, leaving real coefficients up to noise
        for name, c in (("num", num), ("den", den)):
            if np.iscomplexobj(c):
                scale = np.max(np.abs(c)) or 1.0
                if np.max(np.abs(c.imag)) > 1e-9 * scale:
                    raise SolverNumericalFailure(
                        f"cancellation produced complex {name} coefficients")
        return RationalTf(np.real(num), np.real(den))


def _as_tf(x) -> RationalTf:
    if isinstance(x, RationalTf):
        return x
    if isinstance(x, (int, float)):
        return RationalTf([float(x)], [1.0])
    raise InputError(f"expected a transfer function or scalar, got {type(x).__name__}")


def rational_equal(f: RationalTf, g: RationalTf, rtol: float = 1e-9) -> bool:
    """Equality as rational functions: cross-multiplied coefficient match."""
    lhs = np.polymul(f.num, g.den)
    rhs = np.polymul(g.num, f.den)
    diff = _polyadd(lhs, -rhs)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
    return bool(np.max(np.abs(diff)) <= rtol * scale)


# --- closed-loop transfer functions -------------------------------------------


def _closed_loop_a(aug: AugmentedDgu, g: ControllerGains) -> np.ndarray:
    return aug.aug.a + aug.aug.b @ g.k


def _require_hurwitz(acl: np.ndarray, what: str) -> None:
    worst = float(np.max(np.linalg.eigvals(acl).real))
    if worst >= 0.0:
        raise InputError(f"{what}: closed loop is not Hurwitz (max Re = {worst:g})")


def _tf_from_ss(a: np.ndarray, col: np.ndarray, row: np.ndarray) -> RationalTf:
    num, den = scipy.signal.ss2tf(a, col.reshape(-1, 1), row.reshape(1, -1),
                                  np.zeros((1, 1)))
    num = np.asarray(num[0], dtype=float)
    den = np.asarray(den, dtype=float)
    # the D=0 feedthrough makes the top numerator coefficients structural
    # zeros; ss2tf leaves rounding residue there, aligned with den's scale
    tol = 1e-9 * np.max(np.abs(den))
    k = 0
    while k < num.size - 1 and abs(num[k]) <= tol:
        k += 1
    return RationalTf(num[k:], den)


def closed_loop_reference_tf(aug: AugmentedDgu, g: ControllerGains) -> RationalTf:
    """Reference-to-output transfer function of one closed-loop unit.

    The reference enters through the error integrator, so integral action
    pins the DC gain at exactly 1 whenever the loop is stable.
    """
    acl = _closed_loop_a(aug, g)
    _require_hurwitz(acl, "reference transfer function")
    row = (aug.aug.h @ aug.aug.c).ravel()
    col = aug.aug.m_dist[:, 1]
    return _tf_from_ss(acl, col, row).cancel()


def disturbance_tfs(aug: AugmentedDgu, g: ControllerGains):
    """(load-current -> output, control-injection -> output) pair."""
    acl = _closed_loop_a(aug, g)
    _require_hurwitz(acl, "disturbance transfer functions")
    row = (aug.aug.h @ aug.aug.c).ravel()
    g_d = _tf_from_ss(acl, aug.aug.m_dist[:, 0], row).cancel()
    g_u = _tf_from_ss(acl, aug.aug.b[:, 0], row).cancel()
    return g_d, g_u


def desired_tf_template(bandwidth_hz: float, order: int = 3) -> RationalTf:
    """Butterworth low-pass with unit DC gain and -3 dB at bandwidth_hz."""
    if not (isinstance(bandwidth_hz, (int, float)) and bandwidth_hz > 0):
        raise InputError(f"bandwidth must be > 0, got {bandwidth_hz!r}")
    if not (isinstance(order, int) and order >= 1):
        raise InputError(f"order must be an integer >= 1, got {order!r}")
    b, a = scipy.signal.butter(order, 2.0 * np.pi * bandwidth_hz,
                               btype="low", analog=True, output="ba")
    return RationalTf(b, a)


# --- stable inversion ----------------------------------------------------------


@dataclass(frozen=True)
class Rejection:
    """Why an inversion-based design is refused."""

    reason: str  # "rhp_zero" or "improper"
    detail: str
    offending_root: complex | None = None
    degree_deficit: int | None = None


def _worst_rhp_root(roots: np.ndarray):
    """Rightmost root that is not strictly in the open left half-plane."""
    if roots.size == 0:
        return None
    thr = RHP_RTOL * max(1.0, float(np.max(np.abs(roots))))
    bad = roots[roots.real >= -thr]
    if bad.size == 0:
        return None
    return complex(bad[np.argmax(bad.real)])


def design_prefilter(f: RationalTf, f_tilde: RationalTf):
    """Reference prefilter f_tilde/f, or a Rejection when inversion is unsound.

    Checks, in order: f's zeros must lie strictly in the open left half-plane
    (they become the prefilter's poles; the rational form carries no delay,
    so the no-prediction condition holds structurally), and the quotient must
    be proper. On success the result is stable and realizable, and satisfies
    prefilter * f = f_tilde exactly.
    """
    fp = f.poles()
    if fp.size and np.max(fp.real) >= 0:
        raise InputError("design_prefilter: the loop transfer function must be stable")
    tp = f_tilde.poles()
    if tp.size and np.max(tp.real) >= 0:
        raise InputError("design_prefilter: the template must be stable")
    bad = _worst_rhp_root(f.zeros())
    if bad is not None:
        return Rejection(
            reason="rhp_zero",
            detail=f"inverted path has a zero at {bad:g} which would become an unstable pole",
            offending_root=bad)
    c = (f_tilde / f).cancel()
    if not c.is_proper:
        deficit = c.deg_num - c.deg_den
        return Rejection(
            reason="improper",
            detail=f"quotient has {deficit} more zeros than poles; raise the template order",
            degree_deficit=deficit)
    return c


@dataclass(frozen=True)
class CompensatorDesign:
    """A disturbance compensator plus how literally it inverts the plant.

    approximate=False means the transfer function is the exact inversion and
    g_d + g_u * tf = 0 identically. tf may then exceed properness by one
    degree: the polynomial part acts on the measured disturbance and its
    first derivative, which the resistive-load model provides exactly.
    """

    tf: RationalTf
    approximate: bool = False
    fallback_bandwidth_hz: float | None = None


def design_disturbance_compensator(g_d: RationalTf, g_u: RationalTf,
                                   require_proper: bool = False,
                                   fallback_bandwidth_hz: float | None = None):
    """Feedforward compensator N = -g_d/g_u, or a Rejection.

    The stable-inversion check runs on the poles that actually survive into
    N: a zero of g_u that g_d shares (both paths go through the same loop,
    so a shared differentiator zero is the normal case) cancels exactly and
    never becomes a pole. Degree deficit 1 is accepted as exact, see
    CompensatorDesign; beyond that, or under require_proper, low-pass
    factors with poles at 20x fallback_bandwidth_hz are appended and the
    result is flagged approximate. The factor keeps the smearing of a load
    step's impulsive feedthrough an order of magnitude below the loop
    bandwidth's own transient.
    """
    if g_u.is_zero:
        raise InputError("design_disturbance_compensator: zero control path")
    if g_d.is_zero:
        return CompensatorDesign(tf=RationalTf([0.0], [1.0]))
    n = (-(g_d / g_u)).cancel()
    bad = _worst_rhp_root(n.poles())
    if bad is not None:
        return Rejection(
            reason="rhp_zero",
            detail=f"inverted path has a zero at {bad:g} which would become an unstable pole",
            offending_root=bad)
    deficit = n.deg_num - n.deg_den
    if deficit <= 0 or (deficit == 1 and not require_proper):
        return CompensatorDesign(tf=n)
    if fallback_bandwidth_hz is not None:
        if not fallback_bandwidth_hz > 0:
            raise InputError("fallback bandwidth must be > 0")
        w = 2.0 * np.pi * 20.0 * fallback_bandwidth_hz
        roll = RationalTf([1.0], [1.0 / w, 1.0])  # unit DC gain
        extra = deficit if require_proper else deficit - 1
        for _ in range(extra):
            n = (n * roll).cancel()
        return CompensatorDesign(tf=n, approximate=True,
                                 fallback_bandwidth_hz=fallback_bandwidth_hz)
    return Rejection(
        reason="improper",
        detail=f"compensator has {deficit} more zeros than poles and no fallback bandwidth was given",
        degree_deficit=deficit)


# --- spectra and frequency responses -------------------------------------------


def spectrum(a) -> np.ndarray:
    """Eigenvalues of a square matrix, residual-checked, sorted by (Re, Im)."""
    if isinstance(a, StateSpaceModel):
        a = a.a
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"spectrum needs a square matrix, got shape {a.shape}")
    if a.size == 0:
        return np.array([], dtype=complex)
    w, v = np.linalg.eig(a)
    scale = float(np.linalg.norm(a, 2))
    for k in range(w.size):
        resid = float(np.linalg.norm(a @ v[:, k] - w[k] * v[:, k]))
        if resid > 1e-8 * max(scale, 1e-300):
            raise SolverNumericalFailure(
                f"eigenpair residual {resid:g} exceeds 1e-8 * |A| = {1e-8 * scale:g}")
    return w[np.lexsort((w.imag, w.real))]


@dataclass(frozen=True)
class FrequencyResponse:
    """Sampled response on a frequency grid.

    kind "bode-magnitude": values are the complex gains of one channel.
    kind "singular-values": values is (n_freqs, n_sv), descending per row.
    """

    freqs: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float).ravel()
        if freqs.size == 0 or np.any(freqs <= 0) or np.any(np.diff(freqs) <= 0):
            raise InputError("freqs must be positive and strictly increasing")
        if self.kind not in ("bode-magnitude", "singular-values"):
            raise InputError(f"unknown response kind {self.kind!r}")
        values = np.asarray(self.values)
        if values.shape[0] != freqs.size:
            raise InputError("values must have one row per frequency")
        freqs.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def magnitudes(self) -> np.ndarray:
        if self.kind == "bode-magnitude":
            return np.abs(self.values)
        return self.values


def _as_abcd(model):
    if isinstance(model, StateSpaceModel):
        return model.a, model.b, model.c, np.zeros((model.c.shape[0], model.b.shape[1]))
    if isinstance(model, (tuple, list)) and len(model) in (3, 4):
        a, b, c = (np.asarray(m, dtype=float) for m in model[:3])
        d = np.asarray(model[3], dtype=float) if len(model) == 4 else np.zeros((c.shape[0], b.shape[1]))
        return a, b, c, d
    raise InputError("expected a RationalTf, a StateSpaceModel, or (a, b, c[, d]) matrices")


def frequency_response(model, freqs) -> FrequencyResponse:
    """Response on a grid of frequencies in Hz.

    Scalar transfer functions give complex gains; state-space models give
    the singular values of the transfer matrix at each j*omega. A sample
    landing on an imaginary-axis pole reports inf, it never raises.
    """
    freqs = np.asarray(freqs, dtype=float).ravel()
    if freqs.size == 0 or np.any(freqs <= 0) or np.any(np.diff(freqs) <= 0):
        raise InputError("freqs must be positive and strictly increasing")
    s = 2j * np.pi * freqs
    if isinstance(model, RationalTf):
        return FrequencyResponse(freqs, np.atleast_1d(model.evaluate(s)), "bode-magnitude")
    a, b, c, d = _as_abcd(model)
    n = a.shape[0]
    eye = np.eye(n)
    vals = np.empty((freqs.size, min(b.shape[1], c.shape[0])))
    for i, si in enumerate(s):
        try:
            h = c @ np.linalg.solve(si * eye - a, b) + d
            vals[i] = np.linalg.svd(h, compute_uv=False)
        except np.linalg.LinAlgError:
            vals[i] = np.inf
    return FrequencyResponse(freqs, vals, "singular-values")


# --- CSV export -----------------------------------------------------------------


def export_frequency_response_csv(fr: FrequencyResponse, path) -> None:
    mags = np.atleast_2d(fr.magnitudes().T).T
    cols = mags.shape[1]
    header = "freq_hz,value" if cols == 1 else \
        "freq_hz," + ",".join(f"sv{k + 1}" for k in range(cols))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i, f in enumerate(fr.freqs):
            row = ",".join(format_num(float(v)) for v in mags[i])
            fh.write(f"{format_num(float(f))},{row}\n")


def export_spectrum_csv(eigs, path) -> None:
    eigs = np.asarray(eigs, dtype=complex).ravel()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("real,imag\n")
        for lam in eigs:
            fh.write(f"{format_num(lam.real)},{format_num(lam.imag)}\n")
