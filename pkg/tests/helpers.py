import numpy as np

from smlb import targets as tg
from smlb.linear_model import LinearObservation


def random_gaussian(rng, d=4, p=2, rho=None):
    rho = rng.uniform(0.2, 0.8) if rho is None else rho
    S = tg.correlated_covariance(rng.uniform(0.5, 1.5, d), p, rho)
    return tg.GaussianTarget(rng.normal(size=d), S)


def random_mixture(rng, d=2, p=1, n_comp=2):
    S = tg.correlated_covariance(rng.uniform(0.1, 1.5, d), p, rng.uniform(0.1, 0.8))
    w = rng.dirichlet(np.ones(n_comp))
    return tg.MixtureTarget(w, rng.uniform(-1, 1, (n_comp, d)), S)


def random_model(rng, d=4, p=2, sigma_y2=None):
    s2 = rng.uniform(0.05, 1.0) if sigma_y2 is None else sigma_y2
    return LinearObservation.identity_prefix(p, d, s2, rng.normal(size=p))
