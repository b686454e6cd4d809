"""Assembled low-energy kernel terms: dual routes, subtractions, majorants.

Two independent assembly routes (dense contraction on geometric panels
vs eigenfactor reduction on the oscillation-capped grading) must agree;
the Bessel-argument subtractions must be no-ops against the projectors
that kill constants/moments; each leading kernel must sit under its
proved majorant with a finite sweep constant.  Module-scale sweeps are
4x4; the full 8x8 sweeps belong to the acceptance suite.
"""

import math

import numpy as np
import pytest

from waveop2d import discretize as dz
from waveop2d import operators as op
from waveop2d import waveop as wo


# ---------------------------------------------------------------------------
# term resolution and preconditions


def test_term_spec_validation(swave_problem, regular_problem):
    _, _, rep_s = swave_problem
    _, _, rep_r = regular_problem
    grid = rep_s.internals["pot"].grid
    with pytest.raises(ValueError):
        wo.term_spec("NotATerm", rep_s, grid)
    with pytest.raises(ValueError):
        wo.term_spec("SWaveLeading", rep_r, grid)    # needs the resonance
    with pytest.raises(ValueError):
        wo.term_spec("D3Leading", rep_s, grid)       # needs the eigenvalue
    with pytest.raises(ValueError):
        wo.term_spec("ErrorTerm", rep_r, grid, error_order=1.0)


def test_term_spec_weights(swave_problem):
    _, _, rep = swave_problem
    grid = rep.internals["pot"].grid
    lam = np.array([0.01, 0.05])
    sw = wo.term_spec("SWaveLeading", rep, grid)
    st = wo.term_spec("STerm", rep, grid)
    h = op.h_coefficient(lam, -1, sw.vnorm_sq, sw.b)
    assert np.allclose(sw.weight(lam), h, rtol=1e-14)
    assert np.allclose(st.weight(lam), 1.0 / h, rtol=1e-14)
    qd = wo.term_spec("QD0Q", rep, grid)
    assert np.all(qd.weight(lam) == 1.0)
    assert qd.kills_constants and not qd.kills_moments


def test_zero_potential_terms_vanish(grid):
    pot = dz.sample_potential(dz.PotentialSpec("zero"), grid)
    _, rep = op.classify_potential(pot, grid)
    for label in ("QD0Q", "STerm", "ErrorTerm"):
        val = wo.assemble_term(label, (1.0, 0.5), (-2.0, 1.0), pot, grid, rep)
        assert val == 0.0


# ---------------------------------------------------------------------------
# dual-route assembly agreement


def test_two_assembly_routes_agree(regular_problem, swave_problem,
                                   eigen_problem):
    rng = np.random.default_rng(4)
    cases = (("SWaveLeading", swave_problem),
             ("D3Leading", eigen_problem),
             ("ErrorTerm", regular_problem))
    for label, (pot, _, rep) in cases:
        for _ in range(2):
            x = rng.uniform(-6.0, 6.0, 2)
            y = rng.uniform(-6.0, 6.0, 2)
            a = wo.assemble_term(label, x, y, pot, pot.grid, rep)
            b = wo.assemble_term_factored(label, x, y, pot, pot.grid, rep)
            rel = abs(a - b) / max(abs(a), abs(b))
            assert rel < 1e-7                       # measured <= 2.2e-9


# ---------------------------------------------------------------------------
# the three subtraction identities


def test_subtraction_identities(swave_problem, eigen_problem):
    # toggling the subtracted Hankel/Bessel arguments changes nothing
    # when the sandwiched projector kills constants (and moments for the
    # lam^{-2} term) -- pure roundoff by orthogonality
    rng = np.random.default_rng(4)
    rng.uniform(-6.0, 6.0, (12, 2))                 # spend the dual-route draws
    pts = [(rng.uniform(-8.0, 8.0, 2), rng.uniform(-8.0, 8.0, 2))
           for _ in range(3)]
    pot_s, _, rep_s = swave_problem
    pot_e, _, rep_e = eigen_problem
    grid = pot_s.grid
    cases = (("SWaveLeading", pot_s, rep_s),        # measured 1.1e-12
             ("QD0Q", pot_s, rep_s),                # measured 1.5e-13
             ("D3Leading", pot_e, rep_e))           # measured 3.2e-10
    for label, pot, rep in cases:
        assert wo.subtraction_residual(label, pts, pot, grid, rep) < 1e-7


def test_sterm_subtraction_not_free(swave_problem):
    # STerm does not annihilate constants, so assemble_term must refuse
    # to subtract: subtract=True and False coincide by construction
    pot, _, rep = swave_problem
    x, y = (3.0, 1.0), (-2.0, 2.5)
    a0 = wo.assemble_term("STerm", x, y, pot, pot.grid, rep, subtract=False)
    a1 = wo.assemble_term("STerm", x, y, pot, pot.grid, rep, subtract=True)
    assert a0 == a1
    assert abs(a0) > 0


# ---------------------------------------------------------------------------
# majorant sweeps (module scale)


def test_swave_bound_small_sweep(swave_problem):
    pot, _, rep = swave_problem
    out = wo.swave_bound_check(pot, pot.grid, rep, n_radii=4, n_angles=4,
                               hi=60.0)
    assert out.sweep.finite
    assert 0.0 < out.sweep.ratio_sup < 0.01         # measured 2.12e-4
    assert out.decay_rate >= 2.0                    # measured 2.198
    assert out.stable                               # row sups 341 vs 366
    assert all(np.isfinite(r) for r in out.row_sups)


def test_d3_bound_small_sweep(eigen_problem):
    pot, _, rep = eigen_problem
    out = wo.d3_bound_check(pot, pot.grid, rep, n_radii=4, n_angles=4,
                            n_random=4, hi=60.0)
    assert out.sweep.finite
    assert 0.0 < out.sweep.ratio_sup < 1.0          # measured 0.075
    assert out.moment_residual < 1e-7               # measured 1.4e-9
    assert abs(out.geometric_sup - 0.5) < 1e-3      # sharp constant 1/2
    assert out.decay_rate >= 2.0                    # measured 2.241


def test_error_term_small_sweep(regular_problem):
    pot, _, rep = regular_problem
    out = wo.error_term_check(pot, pot.grid, rep, n_radii=4, n_angles=4,
                              hi=60.0)
    assert out.sweep.finite
    assert 0.0 < out.sweep.ratio_sup < 1.0          # measured 0.116
    assert out.decay_rate >= 2.0                    # measured 2.567
    assert out.derivative_check.passed              # slopes 1.5/0.5/-0.5
    assert out.g_bound_sups[0] <= 1.0               # measured 0.199
    assert all(np.isfinite(g) for g in out.g_bound_sups)


def test_geometric_inequality_sharp():
    # | |y-w| - |y| + w.y/|y| | * |y| <= |w|^2 / 2, and the constant is
    # attained in the limit |y| >> |w| with w perpendicular to y
    sup = wo.geometric_inequality_sup()
    assert sup <= 0.5
    assert sup > 0.499                              # measured 0.4999995


def test_g_function_bound_j0_gated():
    # only j = 0 carries the unit-constant claim; higher derivatives are
    # reported finite without a ceiling
    assert wo.g_function_bound(0) <= 1.0            # measured 0.199
    assert np.isfinite(wo.g_function_bound(1))
    assert np.isfinite(wo.g_function_bound(2))


def test_majorants_positive():
    for fn in (wo.d3_majorant, wo.error_majorant):
        v = fn(10.0, 10.0)
        assert np.isfinite(v) and v > 0
    v = wo.swave_majorant(10.0, 10.0)
    assert np.isfinite(v) and v > 0                 # measured 0.341


def test_sweep_csv_layout(swave_problem):
    pot, _, rep = swave_problem
    sweep = wo.term_bound_sweep("SWaveLeading", pot, pot.grid, rep,
                                n_radii=2, n_angles=2, hi=20.0)
    lines = sweep.to_csv().strip().split("\n")
    assert lines[0] == "x_abs,y_abs,angle,re_A,im_A,majorant,ratio"
    assert len(lines) == 1 + 2 * 2 * 2
    assert len(lines[1].split(",")) == 7
