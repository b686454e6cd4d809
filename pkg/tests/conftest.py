"""Shared fixtures: the workhorse grid and the three tuned potentials.

The critical couplings are frozen from the sign-count bisection on the
(48, 16) radius-30 grid; test_operators re-derives them against an
independent eigenvalue-pencil oracle, everything else reuses the
literals to avoid paying for the bisection repeatedly.
"""

import numpy as np
import pytest

from waveop2d import discretize as dz
from waveop2d import operators as op

GRID_RADIUS = 30.0
GRID_NR = 48
GRID_NTHETA = 16

C_REGULAR = 1.0
C_SWAVE = 10.776541655315835      # third crossing: the m = 0 mode touches zero
C_EIGEN = 19.350741045646537      # fourth crossing: degenerate m = +-2 pair


@pytest.fixture(scope="session")
def grid():
    return dz.build_polar_grid(GRID_RADIUS, n_r=GRID_NR, n_theta=GRID_NTHETA)


@pytest.fixture(scope="session")
def gauss_base():
    return dz.PotentialSpec("gaussian", coupling=1.0, beta=8.0)


def pencil_crossings(base, grid, g0):
    """Reciprocal eigenvalues of the Q-compressed Newton form.

    With U = -I the singularities of QTQ(c) = Q(-I + c v G0 v)Q sit at
    c = 1/mu for eigenvalues mu of UQ^T (v G0 v) UQ, sorted descending.
    No bisection, no sign counting: one dense eigensolve.  Shared by the
    operator-module tests and the acceptance gate as the independent
    oracle for the critical-coupling bisection.
    """
    unit = dz.sample_potential(base.with_coupling(1.0), grid)
    vw = np.sqrt(grid.w) * unit.v
    vhat = vw / np.linalg.norm(vw)
    UQ = op._orth_complement_basis(vhat)
    AU = UQ.T @ (unit.u[:, None] * UQ)
    assert np.max(np.abs(0.5 * (AU + AU.T) + np.eye(AU.shape[0]))) < 1e-12
    B = unit.v[:, None] * g0 * unit.v[None, :]
    BQ = UQ.T @ B @ UQ
    mu = np.sort(np.linalg.eigvalsh(0.5 * (BQ + BQ.T)))[::-1]
    return 1.0 / mu[mu > 1e-6 * mu[0]]


def _problem(grid, base, coupling):
    pot = dz.sample_potential(base.with_coupling(coupling), grid)
    pset, report = op.classify_potential(pot, grid)
    return pot, pset, report


@pytest.fixture(scope="session")
def regular_problem(grid, gauss_base):
    return _problem(grid, gauss_base, C_REGULAR)


@pytest.fixture(scope="session")
def swave_problem(grid, gauss_base):
    return _problem(grid, gauss_base, C_SWAVE)


@pytest.fixture(scope="session")
def eigen_problem(grid, gauss_base):
    return _problem(grid, gauss_base, C_EIGEN)
