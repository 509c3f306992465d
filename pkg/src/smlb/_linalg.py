"""Small dense SPD helpers with an explicit conditioning guard."""

import numpy as np
from scipy import linalg

from .errors import NumericalGuardError

COND_LIMIT = 1e12


def check_spd(A, name="matrix", cond_limit=COND_LIMIT):
    """Return eigenvalues of symmetric ``A`` after verifying it is SPD and well conditioned."""
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12):
        raise NumericalGuardError(f"{name} is not symmetric")
    w = np.linalg.eigvalsh(A)
    if w[0] <= 0.0:
        raise NumericalGuardError(f"{name} is not positive definite (min eigenvalue {w[0]:.3e})")
    if w[-1] / w[0] > cond_limit:
        raise NumericalGuardError(f"{name} condition number {w[-1] / w[0]:.3e} exceeds {cond_limit:.0e}")
    return w


def spd_factor(A, name="matrix"):
    check_spd(A, name)
    return linalg.cho_factor(A, lower=True)


def spd_solve(A, B, name="matrix"):
    """Solve ``A X = B`` for SPD ``A``."""
    return linalg.cho_solve(spd_factor(A, name), B)


def spd_inv(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    inv = spd_solve(A, np.eye(A.shape[0]), name)
    return 0.5 * (inv + inv.T)


def spd_logdet(A, name="matrix"):
    c, _ = spd_factor(A, name)
    return 2.0 * np.sum(np.log(np.diag(c)))


def sym(A):
    return 0.5 * (A + A.T)
