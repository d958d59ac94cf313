"""Robust problems whose loss is affine in the uncertain coefficients.

For loss a.x + b with a perturbed in a norm ball, the worst-case expectation
is the nominal mean plus theta times the dual norm of x.
"""
import numpy as np

from ..measures import SchemaError


def affine_value(x, A_hat, b_hat, theta: float, q_star: float) -> float:
    """mean_i (a_i.x + b_i) + theta * ||x||_{q*}."""
    x = np.asarray(x, dtype=float).ravel()
    A = np.atleast_2d(np.asarray(A_hat, dtype=float))
    b = np.asarray(b_hat, dtype=float).ravel()
    if A.shape[1] != x.size or A.shape[0] != b.size:
        raise SchemaError("shapes of A_hat, b_hat and x do not match")
    if theta < 0:
        raise SchemaError("theta must be nonnegative")
    if q_star < 1:
        raise SchemaError("dual norm exponent must be >= 1")
    return float(np.mean(A @ x + b) + theta * np.linalg.norm(x, ord=q_star))


def affine_drso(A_hat, b_hat, theta: float, q_star: float, candidates):
    """Minimize the worst-case affine loss over a finite set of decisions.

    Returns (x*, value); ties go to the first candidate.
    """
    X = np.atleast_2d(np.asarray(candidates, dtype=float))
    vals = np.array([affine_value(x, A_hat, b_hat, theta, q_star) for x in X])
    k = int(np.argmin(vals))
    return X[k], float(vals[k])
