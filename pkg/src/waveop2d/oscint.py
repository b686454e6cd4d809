"""Oscillatory low-energy lambda-integrals and their (r,s) bound sweeps.

The three integral families share the factor (H0-)'(lam r) and differ in
the s-side Bessel derivative and the lambda weight:

    Js :  (H0-)'(lam r) J0' (lam s) lam^3 h-(lam) chi(lam)
    Jpp:  (H0-)'(lam r) J0''(lam s) lam^2         chi(lam)
    Jp :  (H0-)'(lam r) J0' (lam s) lam           chi(lam)

Each is integrated over (0, 2*lambda1] with a composite Gauss-Legendre
rule whose panels are geometrically graded toward 0 (log behavior) and
capped at a fraction of the oscillation wavelength 2*pi/(r+s).  The
empirical bound constants are sup |I(r,s)| / k(r,s) over log-spaced
sweeps.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import specfun

# "2+" and "2-" exponents in the comparison bounds
BOUND_EPS = 0.01
_KINDS = ("Js", "Jpp", "Jp")

# composite rule shape: geometric grading depth and phase-per-panel cap
_GRADE_DEPTH = 36
_PHASE_CAP = math.pi / 4.0
_GL_ORDER = 8


class QuadratureError(RuntimeError):
    """Raised when the two-level quadrature check fails to converge."""

    def __init__(self, message, r=None, s=None):
        super().__init__(message)
        self.r = r
        self.s = s


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth low-energy cutoff: 1 on (0, lambda1], 0 from 2*lambda1 on."""

    lambda1: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.lambda1 < 0.5):
            raise ValueError("lambda1 must lie in (0, 1/2)")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        # the specfun transition window is [1/2, 1] in its argument
        return specfun.envelope_transition(lam / (2.0 * self.lambda1))

    @property
    def support_end(self) -> float:
        return 2.0 * self.lambda1

    def derivative_sups(self, n: int = 4001):
        """Reported sup |chi'| and sup |chi''| by dense finite differences."""
        lam = np.linspace(1e-6, self.support_end * 1.01, n)
        h = lam[1] - lam[0]
        c = self(lam)
        d1 = np.gradient(c, h)
        d2 = np.gradient(d1, h)
        return float(np.max(np.abs(d1))), float(np.max(np.abs(d2)))


def default_hminus(lam):
    """h-(lam) with unit |v|^2 and b = 1; replace with tuned values via CLI."""
    return specfun.g_minus(lam) + 1.0


# ---------------------------------------------------------------------------
# integrand evaluation


def _integrand(kind: str, r: float, s: float, lam: np.ndarray,
               cutoff: CutoffSpec, hminus) -> np.ndarray:
    zr = lam * r
    zs = lam * s
    fr = specfun.dh0_minus_array(zr)
    if kind == "Js":
        return fr * specfun.dj0_array(zs) * lam ** 3 * hminus(lam) * cutoff(lam)
    if kind == "Jpp":
        return fr * specfun.d2j0_array(zs) * lam ** 2 * cutoff(lam)
    if kind == "Jp":
        return fr * specfun.dj0_array(zs) * lam * cutoff(lam)
    raise ValueError(f"unknown integral kind {kind!r}")


def envelope_pieces(kind: str, r: float, s: float, lam: np.ndarray,
                    cutoff: CutoffSpec, hminus) -> dict:
    """The A/B/C/D decomposition of the integrand (six labeled pieces).

    (H0-)' splits into eta + e^{-iz} omega; the s-side derivative into a
    compactly supported rho part plus e^{+-iz} omega envelopes.  Summing
    the returned arrays reproduces the direct integrand to rounding.
    """
    zr = lam * r
    zs = lam * s
    if kind == "Js":
        weight = lam ** 3 * hminus(lam) * cutoff(lam)
        which_s = "J0'"
    elif kind == "Jpp":
        weight = lam ** 2 * cutoff(lam)
        which_s = "J0''"
    elif kind == "Jp":
        weight = lam * cutoff(lam)
        which_s = "J0'"
    else:
        raise ValueError(f"unknown integral kind {kind!r}")

    eta_r = specfun.envelope_component(zr, "H0m'", "eta")
    om_r = specfun.envelope_component(zr, "H0m'", "omega_minus")
    rho_s = specfun.envelope_component(zs, which_s, "rho")
    if which_s == "J0'":
        rho_s = zs * rho_s                 # J0' = z rho + oscillatory parts
    om_sp = specfun.envelope_component(zs, which_s, "omega_plus")
    om_sm = specfun.envelope_component(zs, which_s, "omega_minus")

    er = np.exp(-1j * zr)
    ep = np.exp(1j * zs)
    em = np.exp(-1j * zs)
    return {
        "A": eta_r * rho_s * weight,
        "B+": er * om_r * ep * om_sp * weight,
        "B-": er * om_r * em * om_sm * weight,
        "C+": eta_r * ep * om_sp * weight,
        "C-": eta_r * em * om_sm * weight,
        "D": er * om_r * rho_s * weight,
    }


# ---------------------------------------------------------------------------
# composite quadrature


def _gl_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w          # on [0, 1]


_GL_CACHE = {}


def _panel_edges(r: float, s: float, lambda1: float,
                 refine: int = 1) -> np.ndarray:
    """Geometric grading toward 0, then oscillation-capped subdivision."""
    top = 2.0 * lambda1
    geo = top * 0.5 ** np.arange(_GRADE_DEPTH + 1)
    edges = [0.0]
    # resolve the oscillation and the cutoff ramp, whichever is finer
    cap = min(_PHASE_CAP / max(r + s, 1.0), lambda1 / 6.0) / refine
    for hi, lo in zip(geo[:-1], geo[1:]):
        edges.append(lo)
    edges = np.array(sorted(edges + [top]))
    # subdivide any panel longer than the phase cap
    out = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, int(math.ceil((b - a) / cap)), refine)
        out.extend(np.linspace(a, b, n + 1)[1:])
    return np.array(out)


def _quad_nodes(edges: np.ndarray, order: int):
    key = order
    if key not in _GL_CACHE:
        _GL_CACHE[key] = _gl_rule(order)
    x, w = _GL_CACHE[key]
    a = edges[:-1]
    h = np.diff(edges)
    lam = (a[:, None] + h[:, None] * x[None, :]).ravel()
    wts = (h[:, None] * w[None, :]).ravel()
    return lam, wts


def _quad_value(kind, r, s, cutoff, hminus, refine=1, order=_GL_ORDER):
    edges = _panel_edges(r, s, cutoff.lambda1, refine=refine)
    lam, wts = _quad_nodes(edges, order)
    keep = lam > 0.0
    f = _integrand(kind, r, s, lam[keep], cutoff, hminus)
    return complex(np.sum(f * wts[keep]))


def osc_integral(kind: str, r: float, s: float,
                 cutoff: CutoffSpec | None = None, hminus=None, *,
                 rtol: float = 1e-9, afloor: float = 1e-14,
                 certify: bool = True) -> complex:
    """One oscillatory lambda-integral with a two-level convergence check.

    The value from the base rule is accepted when a panel-doubled rule
    agrees within rtol relative (or afloor absolute for tiny values);
    otherwise QuadratureError carries the offending (r, s).
    """
    if r <= 0 or s <= 0:
        raise ValueError("r and s must be positive")
    cutoff = cutoff or CutoffSpec()
    hminus = hminus or default_hminus
    v1 = _quad_value(kind, r, s, cutoff, hminus, refine=1)
    if not certify:
        return v1
    v2 = _quad_value(kind, r, s, cutoff, hminus, refine=2)
    err = abs(v2 - v1)
    if err > max(rtol * abs(v2), afloor):
        raise QuadratureError(
            f"{kind} quadrature not converged at (r={r:g}, s={s:g}): "
            f"|delta| = {err:.2e}", r=r, s=s)
    return v2


def brute_force_integral(kind: str, r: float, s: float,
                         cutoff: CutoffSpec | None = None, hminus=None,
                         panels: int = 1_000_000, order: int = 2) -> complex:
    """Independent oracle: uniform composite Gauss rule with many panels.

    Shares no panel logic with osc_integral; the only common code is the
    special-function evaluator itself.
    """
    cutoff = cutoff or CutoffSpec()
    hminus = hminus or default_hminus
    top = cutoff.support_end
    lo = 1e-9 * top                      # integrand is O(lam log lam) at 0
    x, w = _gl_rule(order)
    acc = 0.0 + 0.0j
    chunk = 200_000
    edges = np.linspace(lo, top, panels + 1)
    for start in range(0, panels, chunk):
        stop = min(start + chunk, panels)
        a = edges[start:stop]
        h = edges[start + 1:stop + 1] - a
        lam = (a[:, None] + h[:, None] * x[None, :]).ravel()
        wts = (h[:, None] * w[None, :]).ravel()
        f = _integrand(kind, r, s, lam, cutoff, hminus)
        acc += complex(np.sum(f * wts))
    return acc


# ---------------------------------------------------------------------------
# comparison bounds and sweeps


def _br(t):
    return np.hypot(1.0, t)              # <t> = sqrt(1 + t^2)


def comparison_bound(kind: str, r, s, eps: float = BOUND_EPS):
    """The per-lemma envelope k(r,s) the integral is measured against."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if kind == "Js":
        return (1.0 / (np.sqrt(r * s) * _br(r - s) ** 2)
                + 1.0 / (r * _br(r + s) ** (2.0 + eps)))
    if kind == "Jpp":
        return (1.0 / (np.sqrt(r * s) * _br(r - s) ** (2.0 - eps))
                + 1.0 / (r * _br(r + s) ** 2))
    if kind == "Jp":
        return s * _br(np.log(_br(r))) / (r * _br(r + s) * _br(r - s))
    raise ValueError(f"unknown integral kind {kind!r}")


@dataclass
class BoundSweep:
    kind: str
    r: np.ndarray
    s: np.ndarray
    values: np.ndarray          # (len(r), len(s)) complex integrals
    bound: np.ndarray           # k(r,s) on the same grid
    ratio: np.ndarray
    C: float
    argmax: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("r,s,re_I,im_I,k,ratio\n")
        for i, rv in enumerate(self.r):
            for j, sv in enumerate(self.s):
                v = self.values[i, j]
                buf.write(f"{rv:.10g},{sv:.10g},{v.real:.12e},"
                          f"{v.imag:.12e},{self.bound[i, j]:.12e},"
                          f"{self.ratio[i, j]:.12e}\n")
        return buf.getvalue()


def bound_sweep(kind: str, n: int = 40, *, lo: float = 0.1, hi: float = 200.0,
                cutoff: CutoffSpec | None = None, hminus=None,
                eps: float = BOUND_EPS) -> BoundSweep:
    """|I(r,s)| / k(r,s) over a log-spaced (r,s) grid; C is the sweep max."""
    cutoff = cutoff or CutoffSpec()
    hminus = hminus or default_hminus
    rg = np.geomspace(lo, hi, n)
    sg = np.geomspace(lo, hi, n)
    vals = np.empty((n, n), dtype=complex)
    for i, r in enumerate(rg):
        for j, s in enumerate(sg):
            vals[i, j] = osc_integral(kind, r, s, cutoff, hminus,
                                      certify=False)
    bnd = comparison_bound(kind, rg[:, None], sg[None, :], eps)
    ratio = np.abs(vals) / bnd
    if not np.all(np.isfinite(ratio)):
        i, j = np.unravel_index(np.argmax(~np.isfinite(ratio)), ratio.shape)
        raise QuadratureError("non-finite sweep ratio", r=rg[i], s=sg[j])
    k = int(np.argmax(ratio))
    i, j = divmod(k, n)
    return BoundSweep(kind=kind, r=rg, s=sg, values=vals, bound=bnd,
                      ratio=ratio, C=float(ratio[i, j]),
                      argmax=(float(rg[i]), float(sg[j])))


def abcd_recombination(kind: str, r: float, s: float,
                       cutoff: CutoffSpec | None = None, hminus=None):
    """Integrate the direct integrand and the A..D pieces on one rule.

    Returns (direct, piecewise_sum); agreement exercises the envelope
    decomposition inside the oscillatory integral.
    """
    cutoff = cutoff or CutoffSpec()
    hminus = hminus or default_hminus
    edges = _panel_edges(r, s, cutoff.lambda1)
    lam, wts = _quad_nodes(edges, _GL_ORDER)
    keep = lam > 0.0
    lam, wts = lam[keep], wts[keep]
    direct = complex(np.sum(_integrand(kind, r, s, lam, cutoff, hminus) * wts))
    pieces = envelope_pieces(kind, r, s, lam, cutoff, hminus)
    total = complex(sum(np.sum(p * wts) for p in pieces.values()))
    return direct, total


# ---------------------------------------------------------------------------
# the averaged-oscillation bound


@dataclass(frozen=True)
class LipschitzBound:
    bound: float            # ||f||_inf / L + int |f(. + pi/L) - f|
    sup_f: float
    shift_l1: float
    direct: complex         # the oscillatory integral itself


def lipschitz_average_bound(f, L: float, *, lam_max: float,
                            n: int = 400_001) -> LipschitzBound:
    """||f||_inf/L + int |f(lam + pi/L) - f(lam)| dlam vs |int e^{iLlam} f|.

    f is a callable on (0, lam_max] extended by zero; L > 1.
    """
    if L <= 1.0:
        raise ValueError("the averaged bound applies for L > 1")
    lam = np.linspace(0.0, lam_max + math.pi / L, n)
    h = lam[1] - lam[0]
    fv = np.where((lam > 0) & (lam <= lam_max), f(np.maximum(lam, 1e-300)), 0.0)
    shifted = np.where((lam + math.pi / L > 0) & (lam + math.pi / L <= lam_max),
                       f(lam + math.pi / L), 0.0)
    sup_f = float(np.max(np.abs(fv)))
    shift_l1 = float(np.trapezoid(np.abs(shifted - fv), dx=h))
    direct = complex(np.trapezoid(np.exp(1j * L * lam) * fv, dx=h))
    return LipschitzBound(bound=sup_f / L + shift_l1, sup_f=sup_f,
                          shift_l1=shift_l1, direct=direct)
