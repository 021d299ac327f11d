"""Hot numeric kernels, numba-compiled when available.

Set ACTINFER_NUMBA=0 to force the pure-Python/numpy fallback.  Both
backends run the same code path, so results are bit-identical; the
benchmark under benchmarks/ compares their speed.
"""

from __future__ import annotations

import math
import os

import numpy as np

_env = os.environ.get("ACTINFER_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _env not in ("0", "false", "off", "no")

if NUMBA_REQUESTED:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def _affinity_scan_impl(indptr, nbrs, wts, comp, decay, src, dst, max_hops):
    """Max path score from src to dst over simple undirected paths.

    A path of edges e_1..e_L (L <= max_hops) scores
    sum_k decay[k-1] * weight(e_k), accumulated in path order, and
    qualifies only if at least one edge is affinity-compositional.
    Returns 0.0 when no qualifying path exists (all weights are > 0,
    so a positive result implies at least one path).
    """
    n = indptr.shape[0] - 1
    if src == dst:
        return 0.0
    best = 0.0
    on_path = np.zeros(n, np.bool_)
    node_at = np.zeros(max_hops + 1, np.int64)
    ptr = np.zeros(max_hops + 1, np.int64)
    psum = np.zeros(max_hops + 1, np.float64)
    pcomp = np.zeros(max_hops + 1, np.bool_)
    depth = 0
    node_at[0] = src
    ptr[0] = indptr[src]
    on_path[src] = True
    while depth >= 0:
        node = node_at[depth]
        if ptr[depth] < indptr[node + 1]:
            e = ptr[depth]
            ptr[depth] += 1
            nb = nbrs[e]
            if on_path[nb]:
                continue
            score = psum[depth] + decay[depth] * wts[e]
            qual = pcomp[depth] or comp[e]
            if nb == dst:
                if qual and score > best:
                    best = score
                continue
            if depth + 1 < max_hops:
                depth += 1
                node_at[depth] = nb
                ptr[depth] = indptr[nb]
                psum[depth] = score
                pcomp[depth] = qual
                on_path[nb] = True
        else:
            on_path[node] = False
            depth -= 1
    return best


def _anneal_scan_impl(energies, t0, alpha, stage_len, u_init, u_steps):
    """Metropolis chain over a 2-D energy table with staged geometric cooling.

    The temperature ladder T_i = t0 * alpha^i advances one rung every
    stage_len proposals, so a larger iteration budget spends longer at
    each temperature.  Proposals resample one coordinate uniformly among
    its other values.  Randomness is pre-drawn: u_init holds two uniforms
    for the start state, u_steps one row (coin, index, accept) per
    iteration.  Returns the boolean table of states the chain occupied.
    """
    n_obj, n_act = energies.shape
    visited = np.zeros((n_obj, n_act), np.bool_)
    i = int(u_init[0] * n_obj)
    if i >= n_obj:
        i = n_obj - 1
    j = int(u_init[1] * n_act)
    if j >= n_act:
        j = n_act - 1
    visited[i, j] = True
    e_cur = energies[i, j]
    temp = t0
    for step in range(u_steps.shape[0]):
        flip_obj = u_steps[step, 0] < 0.5
        if n_act == 1:
            flip_obj = True
        if n_obj == 1:
            flip_obj = False
        ni = i
        nj = j
        if flip_obj:
            off = int(u_steps[step, 1] * (n_obj - 1))
            if off >= n_obj - 1:
                off = n_obj - 2
            ni = off if off < i else off + 1
        elif n_act > 1:
            off = int(u_steps[step, 1] * (n_act - 1))
            if off >= n_act - 1:
                off = n_act - 2
            nj = off if off < j else off + 1
        e_prop = energies[ni, nj]
        accept = False
        if e_prop <= e_cur:
            accept = True
        elif temp > 0.0:
            accept = u_steps[step, 2] < math.exp(-(e_prop - e_cur) / temp)
        if accept:
            i = ni
            j = nj
            e_cur = e_prop
            visited[i, j] = True
        if (step + 1) % stage_len == 0:
            temp = temp * alpha
    return visited


# Plain-Python references, kept importable for the backend-equivalence
# tests and the benchmark regardless of the env flag.
affinity_scan_py = _affinity_scan_impl
anneal_scan_py = _anneal_scan_impl

if NUMBA_ENABLED:
    affinity_scan = njit(cache=True, nogil=True)(_affinity_scan_impl)
    anneal_scan = njit(cache=True, nogil=True)(_anneal_scan_impl)
else:
    affinity_scan = affinity_scan_py
    anneal_scan = anneal_scan_py
