"""Shared test oracles, deliberately independent of the library code.

The logistic-regression oracle (IRLS) bounds what a linear model can
extract from encoded clinical features; the quadrature t-test oracle
integrates the Student-t density directly instead of going through the
incomplete beta function.
"""

import math

import numpy as np


def random_simplex(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform (Dirichlet(1,..,1)) point on the k-simplex."""
    g = -np.log(rng.random(k))
    return g / g.sum()


def interior_simplex(rng: np.random.Generator, k: int, floor: float = 0.015) -> np.ndarray:
    """Dirichlet(3) point resampled until every component >= floor.

    Keeps log^2(q_i) small enough that alpha -> 1 convergence statements
    with a 1e-3 tolerance hold for every draw, not just typically.
    """
    while True:
        q = rng.dirichlet(np.full(k, 3.0))
        if q.min() >= floor:
            return q


def logistic_fit(x: np.ndarray, y: np.ndarray, iters: int = 30, ridge: float = 1e-3):
    """IRLS logistic regression; returns weights including the intercept."""
    xb = np.hstack([x, np.ones((len(x), 1))])
    w = np.zeros(xb.shape[1])
    for _ in range(iters):
        z = np.clip(xb @ w, -30, 30)
        p = 1.0 / (1.0 + np.exp(-z))
        h = xb.T @ (xb * (p * (1 - p) + 1e-9)[:, None]) + ridge * np.eye(xb.shape[1])
        g = xb.T @ (p - y) + ridge * w
        w -= np.linalg.solve(h, g)
    return w


def logistic_accuracy(x_train, y_train, x_test, y_test) -> float:
    w = logistic_fit(x_train, y_train)
    xb = np.hstack([x_test, np.ones((len(x_test), 1))])
    return float(np.mean((xb @ w >= 0.0) == y_test))


def t_two_sided_p_quadrature(t: float, df: float, nodes: int = 300) -> float:
    """Two-sided t p-value by Gauss-Legendre integration of the density."""
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = abs(t) / 2.0
    u = half * (x + 1.0)  # map [-1, 1] onto [0, |t|]
    pdf = c * (1.0 + u * u / df) ** (-(df + 1) / 2)
    integral = half * float(w @ pdf)
    return max(0.0, min(1.0, 1.0 - 2.0 * integral))


def welch_t_df(a, b):
    """Welch statistic and degrees of freedom, straight from the formulas."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    na, nb = a.size, b.size
    se2 = va / na + vb / nb
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return t, df
