"""Compiled inner loop of the rotated-basis collision estimator."""

import numpy as np
from numba import njit


@njit(cache=True)
def collision_rates(G, right, c_r, c_s, mu_r, mu_s, ux, uy):
    """Mean partial-collision rate over basis settings, per round.

    For round ``b`` and basis setting ``i``, ``G[b, i]`` (``d x r`` Ginibre) is
    orthonormalised by Gram-Schmidt. That is its QR factor with a positive
    diagonal, i.e. Haar distributed. Then ``X = Q @ right[b]`` gives the
    outcome probabilities ``c + sum_k mu[k] |X[:, k]|^2`` of both states.
    ``ux``/``uy`` hold the uniforms for ``m`` categorical draws per state;
    mass left over below one is the failure outcome.
    """
    B, N, d, r = G.shape
    n = right.shape[2]
    m = ux.shape[2]
    out = np.zeros(B)
    Q = np.empty((d, r), dtype=np.complex128)
    p = np.empty(d)
    q = np.empty(d)
    cx = np.zeros(d, dtype=np.int64)
    cy = np.zeros(d, dtype=np.int64)
    for b in range(B):
        acc = 0.0
        for i in range(N):
            for j in range(r):
                for a in range(d):
                    Q[a, j] = G[b, i, a, j]
                for _ in range(2):
                    for l in range(j):
                        coef = 0j
                        for a in range(d):
                            coef += np.conj(Q[a, l]) * Q[a, j]
                        for a in range(d):
                            Q[a, j] -= coef * Q[a, l]
                norm = 0.0
                for a in range(d):
                    norm += Q[a, j].real ** 2 + Q[a, j].imag ** 2
                norm = np.sqrt(norm)
                for a in range(d):
                    Q[a, j] /= norm
            sp = 0.0
            sq = 0.0
            for a in range(d):
                pa = c_r[b]
                qa = c_s[b]
                for k in range(n):
                    x = 0j
                    for j in range(r):
                        x += Q[a, j] * right[b, j, k]
                    w = x.real**2 + x.imag**2
                    pa += mu_r[b, k] * w
                    qa += mu_s[b, k] * w
                pa = min(max(pa, 0.0), 1.0)
                qa = min(max(qa, 0.0), 1.0)
                p[a] = pa
                q[a] = qa
                sp += pa
                sq += qa
            if sp > 1.0:
                for a in range(d):
                    p[a] /= sp
            if sq > 1.0:
                for a in range(d):
                    q[a] /= sq
            cx[:] = 0
            cy[:] = 0
            for j in range(m):
                cum = 0.0
                for a in range(d):
                    cum += p[a]
                    if ux[b, i, j] < cum:
                        cx[a] += 1
                        break
                cum = 0.0
                for a in range(d):
                    cum += q[a]
                    if uy[b, i, j] < cum:
                        cy[a] += 1
                        break
            hits = 0
            for a in range(d):
                hits += cx[a] * cy[a]
            acc += hits / (m * m)
        out[b] = acc / N
    return out
