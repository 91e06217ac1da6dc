"""Transportation simplex (MODI / u-v method) compiled with numba.

The basis is a spanning tree of ``m + n - 1`` cells over the bipartite
row/column graph. Each pivot recomputes the dual potentials by a tree walk,
prices arcs in blocks of about ``sqrt(m n)``, and pushes flow around the
cycle closed by the entering cell.

Degeneracy is handled by the classical perturbation ``a_i + delta`` (every
row) and ``b_n + m delta`` (last column) with ``delta`` infinitesimal. Each
flow is stored as a pair ``(real part, integer coefficient of delta)`` and
compared lexicographically; the perturbed problem is nondegenerate, so every
pivot makes lexicographic progress and cycling is impossible. The reported
plan is the real part.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_MAX_ITER = 1


@njit(cache=True)
def _lex_less(x0, x1, y0, y1):
    return x0 < y0 or (x0 == y0 and x1 < y1)


@njit(cache=True)
def _northwest_corner(a, b, rows, cols, flow, flow1, snap):
    m = a.shape[0]
    n = b.shape[0]
    ra = a.copy()
    rb = b.copy()
    ra1 = np.ones(m, np.int64)
    rb1 = np.zeros(n, np.int64)
    rb1[n - 1] = m
    i = 0
    j = 0
    for t in range(m + n - 1):
        if _lex_less(ra[i], ra1[i], rb[j], rb1[j]):
            f0, f1 = ra[i], ra1[i]
        else:
            f0, f1 = rb[j], rb1[j]
        if abs(f0) <= snap:
            f0 = 0.0
        rows[t] = i
        cols[t] = j
        flow[t] = f0
        flow1[t] = f1
        ra[i] -= f0
        ra1[i] -= f1
        rb[j] -= f0
        rb1[j] -= f1
        if abs(ra[i]) <= snap:
            ra[i] = 0.0
        if abs(rb[j]) <= snap:
            rb[j] = 0.0
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif not _lex_less(rb[j], rb1[j], ra[i], ra1[i]):
            # row exhausted first (or both; the perturbation rules ties out)
            i += 1
        else:
            j += 1


@njit(cache=True)
def _potentials(m, n, c, rows, cols, u, v, parent, parent_cell, depth, adj_start, adj_cell, queue, deg):
    """Tree walk from row node 0; column node k is ``m + k``."""
    nn = m + n
    nb = nn - 1
    for x in range(nn + 1):
        adj_start[x] = 0
    for t in range(nb):
        adj_start[rows[t] + 1] += 1
        adj_start[m + cols[t] + 1] += 1
    for x in range(nn):
        adj_start[x + 1] += adj_start[x]
    for x in range(nn):
        deg[x] = adj_start[x]
    for t in range(nb):
        r = rows[t]
        k = m + cols[t]
        adj_cell[deg[r]] = t
        deg[r] += 1
        adj_cell[deg[k]] = t
        deg[k] += 1
    for x in range(nn):
        parent[x] = -2
    parent[0] = -1
    parent_cell[0] = -1
    depth[0] = 0
    u[0] = 0.0
    head = 0
    tail = 1
    queue[0] = 0
    while head < tail:
        x = queue[head]
        head += 1
        for p in range(adj_start[x], adj_start[x + 1]):
            t = adj_cell[p]
            r = rows[t]
            k = m + cols[t]
            y = k if x == r else r
            if parent[y] != -2:
                continue
            parent[y] = x
            parent_cell[y] = t
            depth[y] = depth[x] + 1
            if y >= m:
                v[y - m] = c[r, cols[t]] - u[r]
            else:
                u[y] = c[r, cols[t]] - v[cols[t]]
            queue[tail] = y
            tail += 1
    return tail == nn


@njit(cache=True)
def _solve(a, b, c, max_iter, cost_tol, snap):
    m = a.shape[0]
    n = b.shape[0]
    nn = m + n
    nb = nn - 1
    rows = np.empty(nb, np.int64)
    cols = np.empty(nb, np.int64)
    flow = np.empty(nb, np.float64)
    flow1 = np.empty(nb, np.int64)
    _northwest_corner(a, b, rows, cols, flow, flow1, snap)

    u = np.zeros(m)
    v = np.zeros(n)
    parent = np.empty(nn, np.int64)
    parent_cell = np.empty(nn, np.int64)
    depth = np.empty(nn, np.int64)
    adj_start = np.empty(nn + 1, np.int64)
    adj_cell = np.empty(2 * nb, np.int64)
    queue = np.empty(nn, np.int64)
    deg = np.empty(nn, np.int64)
    path = np.empty(nn, np.int64)
    back = np.empty(nn, np.int64)

    total = m * n
    block = max(32, int(math.sqrt(total)))
    cursor = 0
    it = 0
    while it < max_iter:
        it += 1
        _potentials(m, n, c, rows, cols, u, v, parent, parent_cell, depth, adj_start, adj_cell, queue, deg)

        # Block pricing: scan blocks from a rotating cursor and take the most
        # negative reduced cost in the first block that has one.
        enter = -1
        scanned = 0
        best = -cost_tol
        while scanned < total:
            stop = min(scanned + block, total)
            while scanned < stop:
                e = cursor
                j = e // n
                k = e - j * n
                rc = c[j, k] - u[j] - v[k]
                if rc < best:
                    best = rc
                    enter = e
                cursor += 1
                if cursor == total:
                    cursor = 0
                scanned += 1
            if enter >= 0:
                break
        if enter < 0:
            return rows, cols, flow, STATUS_OPTIMAL, it
        ej = enter // n
        ek = enter - ej * n

        # Cycle: entering cell, then the tree path from column ek back to row ej.
        p = ej
        q = m + ek
        np_ = 0
        nq = 0
        while p != q:
            if depth[p] >= depth[q]:
                back[np_] = parent_cell[p]
                np_ += 1
                p = parent[p]
            else:
                path[nq] = parent_cell[q]
                nq += 1
                q = parent[q]
        for s in range(np_ - 1, -1, -1):
            path[nq] = back[s]
            nq += 1

        # Even path positions lose flow; the leaving cell is the lexicographic
        # minimum among them.
        leave = 0
        th0 = flow[path[0]]
        th1 = flow1[path[0]]
        for s in range(2, nq, 2):
            t = path[s]
            if _lex_less(flow[t], flow1[t], th0, th1):
                th0 = flow[t]
                th1 = flow1[t]
                leave = s
        for s in range(nq):
            t = path[s]
            if s % 2 == 0:
                flow[t] -= th0
                flow1[t] -= th1
            else:
                flow[t] += th0
                flow1[t] += th1
            if abs(flow[t]) <= snap:
                flow[t] = 0.0
        t_leave = path[leave]
        rows[t_leave] = ej
        cols[t_leave] = ek
        flow[t_leave] = th0
        flow1[t_leave] = th1
    return rows, cols, flow, STATUS_MAX_ITER, it


def transport_simplex(a: np.ndarray, b: np.ndarray, c: np.ndarray, max_iter: int | None = None, cost_tol: float = 1e-12):
    """Solve ``min <P, c>`` subject to ``P 1 = a``, ``P^T 1 = b``, ``P >= 0``.

    ``a`` and ``b`` must have equal sums. Returns ``(plan, status, iterations)``
    where ``plan`` is a dense ``(m, n)`` array.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    m, n = c.shape
    if max_iter is None:
        max_iter = 200 * (m + n) + 10_000
    tol = cost_tol * max(1.0, float(np.max(np.abs(c))))
    # Real parts within a few ulps of the total mass are treated as zero.
    snap = 64.0 * np.finfo(np.float64).eps * max(float(a.sum()), float(b.sum()))
    rows, cols, flow, status, it = _solve(a, b, c, max_iter, tol, snap)
    plan = np.zeros((m, n))
    np.add.at(plan, (rows, cols), np.clip(flow, 0.0, None))
    return plan, int(status), int(it)
