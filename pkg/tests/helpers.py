"""Independent oracles shared by the test modules."""

import numpy as np

from barow.model import Batch, BeliefState, cost


def random_spd(rng, d, low=0.1, high=10.0):
    """Random SPD matrix with eigenvalues log-uniform in [low, high]."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.exp(rng.uniform(np.log(low), np.log(high), d))
    s = (q * eig) @ q.T
    return 0.5 * (s + s.T)


def random_state(rng, d, low=0.1, high=10.0):
    return BeliefState(rng.standard_normal(d), random_spd(rng, d, low, high))


def random_batch(rng, k, d):
    return Batch(rng.standard_normal((k, d)), rng.standard_normal(k))


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def sym_basis(d):
    """Symmetric perturbation directions E_ii and E_ij + E_ji."""
    out = []
    for i in range(d):
        for j in range(i, d):
            e = np.zeros((d, d))
            e[i, j] = e[j, i] = 1.0
            out.append(e)
    return out


def fd_cost_gradient(prev, mu, sigma, batch, R, h=1e-6):
    """Central differences of the update objective in mu and along symmetric sigma directions."""
    f = lambda m, s: cost(prev, m, s, batch, R)
    d = mu.size
    g_mu = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        g_mu[i] = (f(mu + e, sigma) - f(mu - e, sigma)) / (2 * h)
    g_sigma = np.array([
        (f(mu, sigma + h * e) - f(mu, sigma - h * e)) / (2 * h) for e in sym_basis(d)
    ])
    return g_mu, g_sigma


def ridge_chain_oracle(batches, R, a):
    """Posterior of a Gaussian prior N(0, aI) after all batches, noise variance R."""
    X = np.vstack([b.X for b in batches])
    Y = np.concatenate([b.Y for b in batches])
    d = X.shape[1]
    sigma = np.linalg.inv(np.eye(d) / a + X.T @ X / R)
    mu = np.linalg.solve(X.T @ X + (R / a) * np.eye(d), X.T @ Y)
    return mu, sigma, X, Y


def ema_oracle(values, n):
    """EMA via its explicit weighted-sum expansion (no recursion)."""
    values = np.asarray(values, dtype=float)
    alpha = 2.0 / (n + 1)
    out = np.full(values.size, np.nan)
    seed = sum(values[:n]) / n
    for t in range(n - 1, values.size):
        acc = (1 - alpha) ** (t - n + 1) * seed
        for j in range(n, t + 1):
            acc += alpha * (1 - alpha) ** (t - j) * values[j]
        out[t] = acc
    return out


def macd_oracle(close, fast, slow, signal):
    close = np.asarray(close, dtype=float)
    line = ema_oracle(close, fast) - ema_oracle(close, slow)
    sig = np.full(close.size, np.nan)
    sig[slow - 1:] = ema_oracle(line[slow - 1:], signal)
    return np.column_stack([line, sig, line - sig])
