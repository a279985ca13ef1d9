"""Compiled inner loops. Every stochastic kernel reseeds numba's generator
from a per-trial seed, so results never depend on how trials are batched."""
import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def gauss_seidel_csr(indptr, indices, data, diag, b, x, sweeps):
    """In-place sweeps of x = b + M x, with M's diagonal held separately."""
    n = b.shape[0]
    for _ in range(sweeps):
        for r in range(n):
            acc = b[r]
            for p in range(indptr[r], indptr[r + 1]):
                acc += data[p] * x[indices[p]]
            x[r] = acc / (1.0 - diag[r])


@njit(cache=True, nogil=True)
def _choose_neighbor(indptr, indices, cum, v, u):
    lo = indptr[v]
    hi = indptr[v + 1]
    k = lo
    # linear scan for small degrees, bisection otherwise
    if hi - lo <= 16:
        while k < hi - 1 and cum[k] <= u:
            k += 1
    else:
        a = lo
        b = hi - 1
        while a < b:
            mid = (a + b) // 2
            if cum[mid] <= u:
                a = mid + 1
            else:
                b = mid
        k = a
    return indices[k]


@njit(cache=True, nogil=True)
def _neutral_step(indptr, indices, cum, v):
    u = np.random.random()
    if u < 0.5:
        return v
    return _choose_neighbor(indptr, indices, cum, v, 2.0 * u - 1.0)


@njit(cache=True, nogil=True)
def simulate_walkers(indptr, indices, cum, starts, lineage, seeds, out):
    """Coalescence time of walkers on the lazy neutral walk, one trial per seed.

    lineage=False: one walker slot is chosen uniformly per step and every
    walker sharing its vertex moves with it; time counts steps.
    lineage=True: one surviving lineage is chosen uniformly per event and
    time advances by 1/(number of lineages).
    """
    r = starts.shape[0]
    pos = np.empty(r, dtype=np.int64)
    for t in range(seeds.shape[0]):
        np.random.seed(seeds[t])
        for q in range(r):
            pos[q] = starts[q]
        elapsed = 0.0
        while True:
            distinct = 0
            for q in range(r):
                first = True
                for q2 in range(q):
                    if pos[q2] == pos[q]:
                        first = False
                        break
                if first:
                    distinct += 1
            if distinct == 1:
                break
            if lineage:
                pick = int(np.random.random() * distinct)
                seen = -1
                v = -1
                for q in range(r):
                    first = True
                    for q2 in range(q):
                        if pos[q2] == pos[q]:
                            first = False
                            break
                    if first:
                        seen += 1
                        if seen == pick:
                            v = pos[q]
                            break
                elapsed += 1.0 / distinct
            else:
                v = pos[int(np.random.random() * r)]
                elapsed += 1.0
            x = _neutral_step(indptr, indices, cum, v)
            for q in range(r):
                if pos[q] == v:
                    pos[q] = x
        out[t] = elapsed


@njit(cache=True, nogil=True)
def _pair_score(x, y, a, b, c, d):
    if x == 1:
        return a if y == 1 else b
    return c if y == 1 else d


@njit(cache=True, nogil=True)
def _full_scores(indptr, indices, weights, s, params, f):
    a, b, c, d, da, db = params[0], params[1], params[2], params[3], params[4], params[5]
    for i in range(s.shape[0]):
        acc = da if s[i] == 1 else db
        for p in range(indptr[i], indptr[i + 1]):
            acc += weights[p] * _pair_score(s[i], s[indices[p]], a, b, c, d)
        f[i] = acc


@njit(cache=True, nogil=True)
def fermi(fi, fj, beta):
    # 1/(1+exp(-beta*(fj-fi))) written so it cannot overflow
    return 0.5 * (1.0 + math.tanh(0.5 * beta * (fj - fi)))


@njit(cache=True, nogil=True)
def run_fixation(indptr, indices, weights, cum, focal_cum, params, beta,
                 initial, seeds, max_steps, verify, outcome, steps, drift):
    """Pairwise-comparison imitation runs from a single A individual.

    outcome[t] is 1 (all A), 0 (all B) or -1 (step guard hit). Each step
    always draws focal, model and acceptance uniforms so that at beta = 0
    trajectories do not depend on the score parameters. With ``verify`` the
    incrementally maintained scores are compared against a full recompute
    after every flip and the worst discrepancy is stored in drift[t].
    """
    n = indptr.shape[0] - 1
    a, b, c, d = params[0], params[1], params[2], params[3]
    s = np.zeros(n, dtype=np.int64)
    f = np.empty(n)
    check = np.empty(n)
    uniform_focal = focal_cum.shape[0] == 0
    for t in range(seeds.shape[0]):
        np.random.seed(seeds[t])
        for i in range(n):
            s[i] = 0
        if initial >= 0:
            start = initial
        else:
            start = int(np.random.random() * n)
        s[start] = 1
        count_a = 1
        _full_scores(indptr, indices, weights, s, params, f)
        worst = 0.0
        k = 0
        while count_a > 0 and count_a < n and k < max_steps:
            k += 1
            u_focal = np.random.random()
            u_model = np.random.random()
            u_accept = np.random.random()
            if uniform_focal:
                i = int(u_focal * n)
            else:
                i = 0
                while i < n - 1 and focal_cum[i] <= u_focal:
                    i += 1
            j = _choose_neighbor(indptr, indices, cum, i, u_model)
            if s[i] == s[j]:
                continue
            if u_accept >= fermi(f[i], f[j], beta):
                continue
            old = s[i]
            new = s[j]
            s[i] = new
            count_a += 1 if new == 1 else -1
            acc = params[4] if new == 1 else params[5]
            for p in range(indptr[i], indptr[i + 1]):
                nb = indices[p]
                w = weights[p]
                acc += w * _pair_score(new, s[nb], a, b, c, d)
                f[nb] += w * (_pair_score(s[nb], new, a, b, c, d) - _pair_score(s[nb], old, a, b, c, d))
            f[i] = acc
            if verify:
                _full_scores(indptr, indices, weights, s, params, check)
                for q in range(n):
                    e = abs(check[q] - f[q])
                    if e > worst:
                        worst = e
        if count_a == n:
            outcome[t] = 1
        elif count_a == 0:
            outcome[t] = 0
        else:
            outcome[t] = -1
        steps[t] = k
        drift[t] = worst
