"""Independent reference computations used to check the package.

Nothing here imports the code under test.
"""
import itertools
import math

import numpy as np


def dense_generator(lam, mu_a, mu_b, q_max):
    """Generator of the truncated (q_a, q_b) chain, built state by state."""
    n = q_max + 1
    idx = lambda i, j: i * n + j  # noqa: E731
    Q = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            s = idx(i, j)
            if i < q_max and j < q_max:
                Q[s, idx(i + 1, j + 1)] += lam
            if i > 0:
                Q[s, idx(i - 1, j)] += mu_a
            if j > 0:
                Q[s, idx(i, j - 1)] += mu_b
            Q[s, s] = -Q[s].sum()
    return Q


def dense_stationary(lam, mu_a, mu_b, q_max):
    """Solve pi Q = 0, sum(pi) = 1 by replacing one balance equation."""
    Q = dense_generator(lam, mu_a, mu_b, q_max)
    A = Q.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    return pi.reshape(q_max + 1, q_max + 1)


def region_sum(P, pred):
    n = P.shape[0]
    return sum(P[i, j] for i in range(n) for j in range(n) if pred(i, j))


def conditional_rate_oracle(P, mu_a, mu_b):
    num = (mu_a ** 2 * region_sum(P, lambda a, b: b > a > 1)
           + mu_b ** 2 * region_sum(P, lambda a, b: a > b > 1)
           + (mu_a ** 2 + mu_b ** 2) * region_sum(P, lambda a, b: a == b > 1))
    den = (mu_a * region_sum(P, lambda a, b: b > a > 0)
           + mu_b * region_sum(P, lambda a, b: a > b > 0)
           + (mu_a + mu_b) * region_sum(P, lambda a, b: a == b > 0))
    return num / den


def poisson_tail_sum(rho, k):
    """1 - sum_{n<=k} rho^n e^-rho / n!, summed directly."""
    return 1.0 - sum(rho ** n * math.exp(-rho) / math.factorial(n) for n in range(k + 1))


def k_max_scan(rho, eps):
    k = 0
    while poisson_tail_sum(rho, k) >= eps:
        k += 1
    return k


def birth_death_tail(n, psi, q_max, cutoff=5000):
    """P(q > q_max) for M/M/n by normalising the birth-death chain numerically."""
    lam, mu = psi * n, 1.0
    w = [1.0]
    for q in range(1, cutoff):
        w.append(w[-1] * lam / (min(q, n) * mu))
    total = math.fsum(w)
    return math.fsum(w[q_max + 1:]) / total


def brute_force_partition(tail_a, tail_b, tail_k, m_max):
    """Enumerate all (q_a, q_b, k) with q_a + q_b + k = m_max."""
    best = None
    for qa, qb, k in itertools.product(range(m_max + 1), repeat=3):
        if qa + qb + k != m_max:
            continue
        loss = tail_a(qa) + tail_b(qb) + tail_k(k)
        key = (loss, -k, -qa)
        if best is None or key < best[0]:
            best = (key, (qa, qb, k, loss))
    return best[1]
