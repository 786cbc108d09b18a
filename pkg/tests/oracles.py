"""Hand-rolled reference implementations used by the test-suite as oracles.

Everything in this file is deliberately written with explicit index loops,
truncated series, or brute-force enumeration.  None of it imports the package
under test.  The point is that the library's spectral/vectorized results get
compared against independently-assembled arithmetic, not against themselves.

This module was written and frozen before the spectral parts of the package;
later commits must not touch it (only eigh/solve from numpy are shared
primitives -- the assembly logic is what the oracles pin down).
"""

import math

import numpy as np


# ---------------------------------------------------------------------------
# elementary constructions, loop-level
# ---------------------------------------------------------------------------

def kron_oracle(a, b):
    """Kronecker product via the index formula (a (x) b)[ip+k, jq+l] = a[i,j] b[k,l]."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for i in range(ra):
        for j in range(ca):
            for k in range(rb):
                for l in range(cb):
                    out[i * rb + k, j * cb + l] = a[i, j] * b[k, l]
    return out


def ptrace_env_oracle(m, d_sys, d_env):
    """Partial trace over the second (environment) factor, explicit double sum."""
    m = np.asarray(m, dtype=complex)
    out = np.zeros((d_sys, d_sys), dtype=complex)
    for a in range(d_sys):
        for b in range(d_sys):
            s = 0.0 + 0.0j
            for e in range(d_env):
                s += m[a * d_env + e, b * d_env + e]
            out[a, b] = s
    return out


def vec_col_oracle(m):
    """Column-stacking vectorization, explicit loops."""
    m = np.asarray(m, dtype=complex)
    d_r, d_c = m.shape
    v = np.zeros(d_r * d_c, dtype=complex)
    for j in range(d_c):
        for i in range(d_r):
            v[j * d_r + i] = m[i, j]
    return v


def expm_taylor(a, terms=30):
    """Matrix exponential by scaling-and-squaring plus a 30-term Taylor series."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    norm = max(1e-300, float(np.abs(a).sum(axis=1).max()))
    s = max(0, int(math.ceil(math.log2(norm))) + 1)
    x = a / (2.0 ** s)
    acc = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, terms + 1):
        term = term @ x / k
        acc = acc + term
    for _ in range(s):
        acc = acc @ acc
    return acc


def thermal_oracle(h, beta):
    """exp(-beta h)/Z via the series exponential above."""
    w = expm_taylor(-beta * np.asarray(h, dtype=complex))
    return w / np.trace(w).real


def superop_oracle(phi, d):
    """Matrix of a map rho -> phi(rho) in the column-stacked basis, column by column."""
    cols = []
    for j in range(d):
        for i in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            cols.append(vec_col_oracle(phi(e)))
    return np.stack(cols, axis=1)


def entropy_oracle(probs):
    """-sum p log p with a hard floor, plain python accumulation."""
    s = 0.0
    for p in probs:
        p = float(p)
        if p > 1e-300:
            s -= p * math.log(p)
    return s


# ---------------------------------------------------------------------------
# Markov chain oracles
# ---------------------------------------------------------------------------

def stationary_power_oracle(p_mat, power=1000):
    """Stationary law as the row-average of P^power (plain repeated matmul)."""
    p_mat = np.asarray(p_mat, dtype=float)
    acc = np.eye(p_mat.shape[0])
    for _ in range(power):
        acc = acc @ p_mat
    return acc.mean(axis=0)


def reachable_oracle(p_mat, start, tol=1e-14):
    """BFS over the support digraph (edges P[i,j] > tol)."""
    n = p_mat.shape[0]
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in range(n):
                if p_mat[u, v] > tol and v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return seen


def irreducible_oracle(p_mat, tol=1e-14):
    n = p_mat.shape[0]
    return all(len(reachable_oracle(p_mat, i, tol)) == n for i in range(n))


def period_oracle(p_mat, tol=1e-14, kmax=None):
    """gcd of return-time lengths read off diag(P^k) > tol (irreducible chains)."""
    p_mat = np.asarray(p_mat, dtype=float)
    n = p_mat.shape[0]
    if kmax is None:
        kmax = 2 * n * n + 2
    g = 0
    acc = np.eye(n)
    for k in range(1, kmax + 1):
        acc = acc @ p_mat
        if acc[0, 0] > tol:
            g = math.gcd(g, k)
    return g if g > 0 else 0


# ---------------------------------------------------------------------------
# one-step reduced dynamics, direct embedding (no Kraus operators anywhere)
# ---------------------------------------------------------------------------

def reduced_map_oracle(u, rho_env, rho):
    """tr_env( U (rho (x) rho_env) U^dagger ) assembled from the loop primitives."""
    u = np.asarray(u, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    rho_env = np.asarray(rho_env, dtype=complex)
    d_sys = rho.shape[0]
    d_env = rho_env.shape[0]
    joint = u @ kron_oracle(rho, rho_env) @ u.conj().T
    return ptrace_env_oracle(joint, d_sys, d_env)


def unravel_step_oracle(u, rho_env, rho):
    """Joint law of the two-time environment-entropy measurement for one step.

    Returns a list of dicts, one per eigenpair (i, j) of rho_env with p_i above
    floor: probability, unnormalized post state, entropy increment
    varsigma_j - varsigma_i.  Projectors are rank-one here (raw eigenvectors,
    no clustering); tests that exercise degenerate spectra do their own sums.
    """
    u = np.asarray(u, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    d_sys = rho.shape[0]
    p_env, phi = np.linalg.eigh(np.asarray(rho_env, dtype=complex))
    d_env = p_env.shape[0]
    out = []
    for i in range(d_env):
        if p_env[i] <= 1e-14:
            continue
        vs_i = -math.log(p_env[i])
        pre = kron_oracle(rho, p_env[i] * np.outer(phi[:, i], phi[:, i].conj()))
        joint = u @ pre @ u.conj().T
        for j in range(d_env):
            if p_env[j] <= 1e-14:
                continue
            vs_j = -math.log(p_env[j])
            post = np.zeros((d_sys, d_sys), dtype=complex)
            for a in range(d_sys):
                for b in range(d_sys):
                    s = 0.0 + 0.0j
                    for e in range(d_env):
                        for f in range(d_env):
                            s += phi[e, j].conjugate() * joint[a * d_env + e, b * d_env + f] * phi[f, j]
                    post[a, b] = s
            out.append({
                "i": i,
                "j": j,
                "prob": float(np.trace(post).real),
                "post": post,
                "delta": vs_j - vs_i,
            })
    return out


# ---------------------------------------------------------------------------
# exhaustive path / word enumeration
# ---------------------------------------------------------------------------

def initial_blocks_oracle(pi, p_mat, rho_init):
    """R0(w) = sum_v pi_v P_vw rho_v by double loop.  rho_init indexed 0..m-1."""
    m = len(pi)
    d = rho_init[0].shape[0]
    blocks = [np.zeros((d, d), dtype=complex) for _ in range(m)]
    for w in range(m):
        for v in range(m):
            blocks[w] += pi[v] * p_mat[v, w] * np.asarray(rho_init[v], dtype=complex)
    return blocks


def path_expectation_oracle(pi, p_mat, rho_init, us, rho_envs, x_blocks, n):
    """E[ <rho_n(path), X(w_{n+1})> ] by summing every path w_0 ... w_{n+1}.

    States evolve through reduced_map_oracle; the pairing is tr(rho^dagger X)
    accumulated in plain python.  Everything indexed 0..m-1.
    """
    m = len(pi)
    total = 0.0 + 0.0j

    def recurse(k, w_prev, weight, rho):
        nonlocal total
        if k == n + 1:
            for w_next in range(m):
                wgt = weight * p_mat[w_prev, w_next]
                if wgt == 0.0:
                    continue
                total += wgt * np.trace(rho.conj().T @ np.asarray(x_blocks[w_next], dtype=complex))
            return
        for w in range(m):
            wgt = weight * p_mat[w_prev, w]
            if wgt == 0.0:
                continue
            recurse(k + 1, w, wgt, reduced_map_oracle(us[w], rho_envs[w], rho))

    for w0 in range(m):
        if pi[w0] == 0.0:
            continue
        recurse(1, w0, float(pi[w0]), np.asarray(rho_init[w0], dtype=complex))
    return total


def full_statistics_oracle(pi, p_mat, rho_init, us, rho_envs, n):
    """Exact law of the n-step (probe, measurement-outcome) word process.

    Enumerates every branch: probe word w_1..w_n and per-step eigenpair
    outcome (i_k, j_k).  Returns a list of branches
    ``(prob, svec, word)`` where svec[v] accumulates the entropy increments
    of the steps driven by probe v and word is a tuple of (w_k, i_k, j_k).
    The chain factors are folded into R0 for the first step exactly as the
    measure does.
    """
    m = len(pi)
    blocks0 = initial_blocks_oracle(pi, p_mat, rho_init)
    eig_env = []
    for v in range(m):
        p_env, phi = np.linalg.eigh(np.asarray(rho_envs[v], dtype=complex))
        eig_env.append((p_env, phi))

    branches = []

    def step_outcomes(w, mat):
        """All (i, j, unnormalized-post, delta) for probe w applied to mat."""
        p_env, phi = eig_env[w]
        u = np.asarray(us[w], dtype=complex)
        d_sys = mat.shape[0]
        d_env = p_env.shape[0]
        outs = []
        for i in range(d_env):
            if p_env[i] <= 1e-14:
                continue
            pre = kron_oracle(mat, p_env[i] * np.outer(phi[:, i], phi[:, i].conj()))
            joint = u @ pre @ u.conj().T
            for j in range(d_env):
                if p_env[j] <= 1e-14:
                    continue
                post = np.zeros((d_sys, d_sys), dtype=complex)
                for a in range(d_sys):
                    for b in range(d_sys):
                        s = 0.0 + 0.0j
                        for e in range(d_env):
                            for f in range(d_env):
                                s += (phi[e, j].conjugate()
                                      * joint[a * d_env + e, b * d_env + f]
                                      * phi[f, j])
                        post[a, b] = s
                delta = -math.log(p_env[j]) + math.log(p_env[i])
                outs.append((i, j, post, delta))
        return outs

    def recurse(k, w_now, mat, weight, svec, word):
        if k == n:
            prob = weight * float(np.trace(mat).real)
            branches.append((prob, svec.copy(), tuple(word)))
            return
        for w in range(m):
            chain_wgt = float(p_mat[w_now, w])
            if chain_wgt == 0.0:
                continue
            for i, j, post, delta in step_outcomes(w, mat):
                svec[w] += delta
                word.append((w, i, j))
                recurse(k + 1, w, post, weight * chain_wgt, svec, word)
                word.pop()
                svec[w] -= delta

    # first step: the chain factors up to w_1 are already folded into R0(w_1)
    for w1 in range(m):
        for i, j, post, delta in step_outcomes(w1, blocks0[w1]):
            svec = [0.0] * m
            svec[w1] = delta
            recurse(1, w1, post, 1.0, svec, [(w1, i, j)])
    return branches


def deformed_expectation_oracle(branches, alpha):
    """E[e^{-alpha . S}] from a full_statistics_oracle branch list."""
    alpha = np.asarray(alpha, dtype=float)
    total = 0.0
    for prob, svec, _word in branches:
        total += prob * math.exp(-float(np.dot(alpha, np.asarray(svec))))
    return total


def inverse_cdf_oracle(weights, u):
    """Index selection by cumulative comparison, plain loop (matches (u > cum).sum())."""
    c = 0.0
    idx = 0
    for k, w in enumerate(weights):
        c += float(w)
        if u > c:
            idx = k + 1
    return min(idx, len(weights) - 1)
