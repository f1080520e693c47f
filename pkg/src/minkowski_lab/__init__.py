"""Expected Minkowski functionals of weakly non-Gaussian random fields, with lattice checks."""
from .excursion import BACKEND as SWEEP_BACKEND
from .geometry import LKVector, lk_rectangle, steiner_tube_volume
from .theory import LEVELS, CumulantSet, ec_density, expected_ec, expected_lk_excursion

__version__ = "0.1.0"

__all__ = [
    "CumulantSet",
    "LEVELS",
    "LKVector",
    "SWEEP_BACKEND",
    "ec_density",
    "expected_ec",
    "expected_lk_excursion",
    "lk_rectangle",
    "steiner_tube_volume",
    "__version__",
]
