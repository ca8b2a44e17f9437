"""Discrete laboratory for weighted Sobolev, maximal-function and commutator inequalities."""

__version__ = "0.1.0"

from .grid import (  # noqa: E402
    Cube,
    CubeLadder,
    ExponentSet,
    Grid,
    GridFunction,
    VectorField,
    box_average,
    cell_average,
    gradient,
    integrate,
    load_grid_function,
    sample,
    save_grid_function,
)
from .norms import DiscreteMeasure, LorentzIndex, bmo_norm, local_lorentz_norm, lorentz_norm, lp_norm, weak_norm  # noqa: E402
from .operators import (  # noqa: E402
    ConvolutionCZ,
    SphereKernel,
    commutator,
    hl_maximal,
    iterated_maximal,
    lorentz_maximal,
    nonlinear_commutator,
    nonlinear_split,
    power_maximal,
    riesz_potential,
    rough_singular,
)
from .weights import a1q_constant, ainfty_constant, ap_constant, apq_constant, sharpness_function, sharpness_weight  # noqa: E402
