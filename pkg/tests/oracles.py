"""Reference computations that do not import the package under test.

Each oracle takes a different route from the implementation: dense textbook
formulas, quadrature, joint-Gaussian conditioning or plain loops.
"""

import numpy as np
from scipy import integrate, stats


def alpha_bars(betas):
    """Cumulative products by serial multiplication."""
    out, acc = [], 1.0
    for b in betas:
        acc *= 1.0 - b
        out.append(acc)
    return np.array(out)


def exp_then_const_betas(T, c, delta):
    a = c * np.log(T) / T
    betas = [delta]
    for t in range(2, T + 1):
        betas.append(a * min(delta * (1 + a) ** t, 1.0))
    return np.array(betas)


def canonical_H(p, d):
    H = np.zeros((p, d))
    H[:, :p] = np.eye(p)
    return H


def gaussian_kl(ma, ca, mb, cb):
    ma, mb = np.atleast_1d(ma), np.atleast_1d(mb)
    ca, cb = np.atleast_2d(ca), np.atleast_2d(cb)
    ib = np.linalg.inv(cb)
    dm = mb - ma
    return 0.5 * (np.trace(ib @ ca) + dm @ ib @ dm - ma.size + np.log(np.linalg.det(cb) / np.linalg.det(ca)))


def conditional_law(mu0, S0, H, s2, y, ab):
    """Law of x_t under the conditional forward model, built from the data-level law."""
    Hp = np.linalg.pinv(H)
    P = Hp @ H
    Pc = np.eye(len(mu0)) - P
    m0 = Pc @ mu0 + Hp @ y
    c0 = Pc @ S0 @ Pc + s2 * Hp @ Hp.T
    return np.sqrt(ab) * m0, ab * c0 + (1 - ab) * np.eye(len(mu0))


def joint_posterior_mean(mu0, S0, H, s2, y, ab_prev, alpha, x):
    """E[X_{t-1} | X_t = x, y] by conditioning the joint Gaussian of (X_{t-1}, X_t)."""
    m_prev, c_prev = conditional_law(mu0, S0, H, s2, y, ab_prev)
    m_t = np.sqrt(alpha) * m_prev
    c_t = alpha * c_prev + (1 - alpha) * np.eye(len(mu0))
    cross = np.sqrt(alpha) * c_prev  # Cov(X_{t-1}, X_t)
    return m_prev + cross @ np.linalg.solve(c_t, x - m_t)


def mixture_density_1d_quadrature(weights, means, var0, ab, x):
    """q_t(x) in one dimension by integrating the data density against the noising kernel."""
    s = np.sqrt(ab)
    sd_noise = np.sqrt(1 - ab)

    def integrand(x0):
        prior = sum(w * stats.norm.pdf(x0, m, np.sqrt(var0)) for w, m in zip(weights, means))
        return prior * stats.norm.pdf(x, s * x0, sd_noise)

    lo = min(means) - 12 * np.sqrt(var0)
    hi = max(means) + 12 * np.sqrt(var0)
    val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=400)
    return val


def knn_kl_loop(x, y, k):
    """Brute-force two-sample k-NN KL estimate (small inputs only)."""
    n, d = x.shape
    m = y.shape[0]
    total = 0.0
    for i in range(n):
        dx = np.sort(np.linalg.norm(x - x[i], axis=1))[k]  # index 0 is the point itself
        dy = np.sort(np.linalg.norm(y - x[i], axis=1))[k - 1]
        total += np.log(dy / dx)
    return d * total / n + np.log(m / (n - 1))


def score_cond_by_decomposition(mu0, S0, H, s2, y, ab, x):
    """Conditional score assembled from the data-level posterior mean of the prior variable.

    Under the conditional forward model x_t = sqrt(ab) (Pc X0 + H^+ y) + noise with
    noise covariance K = ab s2 H^+ H^+^T + (1 - ab) I, and X0 ~ N(mu0, S0).
    """
    d = len(mu0)
    Hp = np.linalg.pinv(H)
    P = Hp @ H
    Pc = np.eye(d) - P
    K = ab * s2 * Hp @ Hp.T + (1 - ab) * np.eye(d)
    mean_t = np.sqrt(ab) * (Pc @ mu0 + Hp @ y)
    var_t = ab * Pc @ S0 @ Pc + K
    cross = np.sqrt(ab) * S0 @ Pc  # Cov(X0, X_t)
    post = mu0 + cross @ np.linalg.solve(var_t, x - mean_t)
    return np.linalg.solve(K, np.sqrt(ab) * Hp @ y - x) + np.sqrt(ab) / (1 - ab) * Pc @ post
