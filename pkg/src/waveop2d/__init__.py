"""Zero-energy threshold analysis for 2D Schrodinger operators.

Numerical companion to the low-energy wave-operator expansion: special
functions, polar-grid discretization of the Birman-Schwinger operators,
threshold classification, oscillatory integral bounds, kernel lemmas,
and the assembled wave-operator term checks.
"""

__version__ = "0.1.0"

from .discretize import (PotentialSpec, QuadratureGrid, SampledPotential,
                         build_polar_grid, sample_potential)
from .operators import (ClassificationUncertain, ThresholdReport,
                        classify_potential, critical_coupling,
                        m_inverse_expansion, zero_eigenfunctions)
from .oscint import CutoffSpec, bound_sweep, osc_integral
from .kernelbounds import (admissibility, bracket_decay_check, k1_kernel,
                           k2_kernel, lp_kernel_lemma_check, schur_norm)
from .waveop import (assemble_term, d3_bound_check, error_term_check,
                     swave_bound_check, term_bound_sweep)

__all__ = [
    "__version__",
    "PotentialSpec", "QuadratureGrid", "SampledPotential",
    "build_polar_grid", "sample_potential",
    "ClassificationUncertain", "ThresholdReport", "classify_potential",
    "critical_coupling", "m_inverse_expansion", "zero_eigenfunctions",
    "CutoffSpec", "bound_sweep", "osc_integral",
    "admissibility", "bracket_decay_check", "k1_kernel", "k2_kernel",
    "lp_kernel_lemma_check", "schur_norm",
    "assemble_term", "d3_bound_check", "error_term_check",
    "swave_bound_check", "term_bound_sweep",
]
