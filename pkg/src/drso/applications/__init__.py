"""Applications built on the dual solver and its worst-case distributions."""
from .affine import affine_drso, affine_value
from .drtp import ContinuumInstance, drtp_solve, square_grid
from .newsvendor import NewsvendorInstance, newsvendor_solve
from .uq import Disc, HalfSpace, uq_solve
from .var import VaRQuery, wc_var

__all__ = ["affine_drso", "affine_value", "ContinuumInstance", "drtp_solve", "square_grid",
           "NewsvendorInstance", "newsvendor_solve", "Disc", "HalfSpace", "uq_solve",
           "VaRQuery", "wc_var"]
