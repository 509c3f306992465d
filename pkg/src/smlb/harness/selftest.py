"""Fast analytic invariant checks behind ``smlb self-test``."""

from __future__ import annotations

import warnings

import numpy as np

from .. import analysis as an
from .. import samplers as sm
from .. import schedules as sc
from .. import targets as tg
from ..linear_model import LinearObservation, sigma_t0y_inv


def fd_grad(fn, x, h=1e-5):
    """Central differences of a scalar function at a single point."""
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def _problem(rng, d=4, p=2, sigma_y2=0.5, mixture=False):
    S = tg.correlated_covariance(rng.uniform(0.5, 1.5, d), p, rng.uniform(0.2, 0.8))
    if mixture:
        target = tg.MixtureTarget([0.4, 0.6], rng.uniform(-1, 1, (2, d)), S)
    else:
        target = tg.GaussianTarget(rng.normal(size=d), S)
    model = LinearObservation.identity_prefix(p, d, sigma_y2, rng.normal(size=p))
    return target, model


def _checks(seed):
    rng = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sched = sc.make_exp_then_const(200, 3.0, 1e-2)

    H = rng.normal(size=(2, 4))
    m = LinearObservation(H, 0.3, rng.normal(size=2))
    yield "projector identities", (
        np.allclose(H @ m.H_pinv, np.eye(2), atol=1e-10)
        and np.allclose(m.P @ m.P, m.P, atol=1e-10)
        and np.allclose(m.Pc @ m.P, 0, atol=1e-10)
    )
    K = sigma_t0y_inv(m, sched, 50)
    yield "Sigma_{t|0,y}^{-1} Pc = Pc / (1 - alpha_bar)", np.allclose(
        K @ m.Pc, m.Pc / sched.one_minus_alpha_bar_at(50), atol=1e-10
    )

    for mixture in (False, True):
        target, model = _problem(rng, mixture=mixture)
        worst = 0.0
        for _ in range(20):
            t = int(rng.integers(1, sched.T + 1))
            x = rng.normal(size=4)
            for s, f in (
                (tg.score_uncond(target, sched, t, x), lambda z: tg.logpdf_t(target, sched, t, z)),
                (tg.score_cond(target, model, sched, t, x), lambda z: tg.logpdf_cond(target, model, sched, t, z)),
            ):
                worst = max(worst, np.linalg.norm(fd_grad(f, x) - s) / max(np.linalg.norm(s), 1.0))
        yield f"scores match finite differences ({'mixture' if mixture else 'gaussian'})", worst < 1e-5

    target, model = _problem(rng)
    xs = rng.normal(size=(50, 4))
    ok = True
    for t in (1, 10, 100, 200):
        a = an.delta_ty("boddnm", target, model, sched, t, xs)
        b = an.delta_closed_form_gaussian(target, model, sched, t, xs)
        ok &= np.linalg.norm(a - b) <= 1e-8 * max(np.linalg.norm(b), 1e-300) + 1e-12
    yield "closed-form and definitional mismatch agree", bool(ok)

    v = rng.normal(size=4) @ model.P.T
    gap = an.optimality_gap(target, model, sched, 30, xs[0], v)
    yield "optimality gap equals |v|^2", abs(gap - v @ v) <= 1e-8 * (v @ v)

    clean = model.with_(sigma_y2=0.0)
    same = all(
        np.allclose(sm.f_ty("boddnm", clean, sched, t, xs), sm.f_ty("ddnm", clean, sched, t, xs), rtol=0, atol=1e-12)
        for t in (2, 50, 200)
    )
    yield "noiseless BO-DDNM equals DDNM", same

    in_range = True
    for kind in ("boddnm", "ddnm", "ccdf", "ddnmplus"):
        f = sm.f_ty(kind, model, sched, 20, xs, xs)
        in_range &= np.max(np.abs(f @ model.Pc.T)) < 1e-12
    yield "rectifiers stay in range(P)", bool(in_range)

    yield "Gaussian KL closed form", abs(an.gaussian_kl([0.0], [[1.0]], [1.0], [[1.0]]) - 0.5) < 1e-14

    s = sc.make_constant(100_000, 2.0)
    ln = np.log(s.T) / s.T
    yield "coefficient sum p=1 matches the constant-schedule expansion", abs(
        sc.coefficient_sum(s, 1.0) - sc.constant_sum_closed_form(s.T, 2.0, 1.0)
    ) <= 20 * ln**2


def run_self_test(seed=0, stream=None) -> bool:
    import sys

    stream = stream or sys.stdout
    ok = True
    for name, passed in _checks(seed):
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}", file=stream)
    return ok
