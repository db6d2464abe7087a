"""Reference implementations used only by the tests.

Written from the definitions, without calling into the library, so the
library can be checked against something other than itself.
"""

import itertools
import math

import numpy as np


def jacobi_eigenvalues(a, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi rotations until the off-diagonal mass vanishes."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum((a - np.diag(np.diag(a))) ** 2))
        if off <= tol * max(1.0, np.abs(a).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * a[p, q])
                if abs(theta) > 1e150:
                    t = 1 / (2 * theta)
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta**2 + 1))
                c = 1 / math.sqrt(t**2 + 1)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))


def metropolis(adj_sets, active):
    """Metropolis weights from neighbor sets and an active set, entry by entry."""
    m = len(adj_sets)
    w = np.zeros((m, m))
    closed = [set(adj_sets[i]) | {i} for i in range(m)]
    for i in active:
        for j in active:
            if i != j and j in adj_sets[i]:
                w[i, j] = 1.0 / max(len(closed[i] & set(active)), len(closed[j] & set(active)))
    for i in range(m):
        w[i, i] = 1.0 - w[i].sum()
    return w


def enumerate_broadcast(adj_sets, omega):
    """All ``2^m`` activation outcomes as ``(probability, matrix)`` pairs."""
    m = len(adj_sets)
    out = []
    for bits in itertools.product([0, 1], repeat=m):
        prob = 1.0
        for b, w in zip(bits, omega):
            prob *= w if b else 1 - w
        active = [i for i in range(m) if bits[i]]
        out.append((prob, metropolis(adj_sets, active)))
    return out


def rho_of_outcomes(outcomes):
    m = outcomes[0][1].shape[0]
    gram = sum(p * w.T @ w for p, w in outcomes)
    return float(np.max(np.abs(jacobi_eigenvalues(gram - np.full((m, m), 1.0 / m)))))


def clique_sets(m):
    return [set(range(m)) - {i} for i in range(m)]


def path_sets(m):
    return [{j for j in (i - 1, i + 1) if 0 <= j < m} for i in range(m)]


def pi_direct(ps, T, tail_terms=10_000):
    """``pi_j`` as the unrolled sum ``sum_{k >= 0} prod_{j <= s < j + k} (1 - p_s / 2)``.

    ``ps(s)`` returns the value at iteration ``s``; the infinite tail is
    truncated after ``tail_terms`` terms.
    """
    out = []
    for j in range(T):
        total, prod = 0.0, 1.0
        for s in range(j, j + tail_terms):
            total += prod
            prod *= 1 - ps(s) / 2
            if prod < 1e-18:
                break
        out.append(total)
    return out


def poisson_binomial_bruteforce(omega):
    m = len(omega)
    pmf = np.zeros(m + 1)
    for bits in itertools.product([0, 1], repeat=m):
        prob = 1.0
        for b, w in zip(bits, omega):
            prob *= w if b else 1 - w
        pmf[sum(bits)] += prob
    return pmf
