"""Primal network simplex for balanced transportation problems.

Nodes ``0..m-1`` are sources (rows) with supply ``n`` each, nodes
``m..m+n-1`` are sinks (columns) with demand ``m`` each, so every basic flow
is an integer and degeneracy tests are exact. Arc ``(i, j)`` has cost
``-<A[i], B[j]>``; costs are never materialised, which keeps memory at
``O((m + n) * k)`` for feature width ``k``.

The spanning tree is stored by parent pointers with sibling lists. Only the
subtree that hangs off the leaving arc is touched on a pivot. The leaving-arc
tie rule keeps the tree strongly feasible, which rules out cycling.
Potentials follow the convention ``cost(i, j) + pi[i] - pi[m + j] = 0`` on
tree arcs.
"""

import numpy as np

from ._jit import njit


@njit
def arc_cost(A, B, i, j):
    s = 0.0
    for k in range(A.shape[1]):
        s += A[i, k] * B[j, k]
    return -s


@njit
def _add_child(fch, nsib, psib, p, c):
    nsib[c] = fch[p]
    psib[c] = -1
    if fch[p] >= 0:
        psib[fch[p]] = c
    fch[p] = c


@njit
def _remove_child(fch, nsib, psib, p, c):
    if psib[c] >= 0:
        nsib[psib[c]] = nsib[c]
    else:
        fch[p] = nsib[c]
    if nsib[c] >= 0:
        psib[nsib[c]] = psib[c]
    nsib[c] = -1
    psib[c] = -1


@njit
def nw_corner_tree(m, n, row_order, col_order, parent, flow):
    """North-west corner basis along the given orders.

    When a row and a column are exhausted together the column advances first,
    so every zero-flow arc points from a row parent to a column child and the
    starting tree is strongly feasible.
    """
    root = row_order[0]
    parent[root] = -1
    flow[root] = 0.0
    ii = 0
    jj = 0
    supply = float(n)
    demand = float(m)
    new_is_col = True
    while True:
        r = row_order[ii]
        c = m + col_order[jj]
        x = supply if supply < demand else demand
        supply -= x
        demand -= x
        if new_is_col:
            parent[c] = r
            flow[c] = x
        else:
            parent[r] = c
            flow[r] = x
        if ii == m - 1 and jj == n - 1:
            break
        if demand == 0.0 and jj < n - 1:
            jj += 1
            demand = float(m)
            new_is_col = True
        else:
            ii += 1
            supply = float(n)
            new_is_col = False
    return root


@njit
def rebuild_tree(A, B, m, n, root, parent, pi, depth, fch, nsib, psib, stack):
    """Recompute sibling lists, depths and potentials from ``parent``."""
    N = m + n
    for v in range(N):
        fch[v] = -1
        nsib[v] = -1
        psib[v] = -1
    for v in range(N):
        if v != root:
            _add_child(fch, nsib, psib, parent[v], v)
    pi[root] = 0.0
    depth[root] = 0
    top = 0
    stack[top] = root
    top += 1
    while top > 0:
        top -= 1
        p = stack[top]
        c = fch[p]
        while c >= 0:
            depth[c] = depth[p] + 1
            if c >= m:
                pi[c] = pi[p] + arc_cost(A, B, p, c - m)
            else:
                pi[c] = pi[p] - arc_cost(A, B, c, p - m)
            stack[top] = c
            top += 1
            c = nsib[c]


@njit
def _pivot(m, i, j, r, parent, flow, pi, depth, fch, nsib, psib, stack):
    u = i
    v = m + j
    a = u
    b = v
    while a != b:
        if depth[a] > depth[b]:
            a = parent[a]
        elif depth[b] > depth[a]:
            b = parent[b]
        else:
            a = parent[a]
            b = parent[b]
    join = a

    # strict on the source side, non-strict on the sink side: this picks the
    # last blocking arc in cycle order and preserves strong feasibility
    delta = np.inf
    u_out = -1
    side = 0
    x = u
    while x != join:
        if x < m and flow[x] < delta:
            delta = flow[x]
            u_out = x
            side = 1
        x = parent[x]
    x = v
    while x != join:
        if x >= m and flow[x] <= delta:
            delta = flow[x]
            u_out = x
            side = 2
        x = parent[x]

    if delta > 0.0:
        x = u
        while x != join:
            if x < m:
                flow[x] -= delta
            else:
                flow[x] += delta
            x = parent[x]
        x = v
        while x != join:
            if x >= m:
                flow[x] -= delta
            else:
                flow[x] += delta
            x = parent[x]

    if side == 1:
        xnode = u
        ynode = v
        shift = -r
    else:
        xnode = v
        ynode = u
        shift = r

    _remove_child(fch, nsib, psib, parent[u_out], u_out)
    prev = ynode
    cur = xnode
    carried = delta
    while True:
        nxt = parent[cur]
        old = flow[cur]
        if cur != u_out:
            _remove_child(fch, nsib, psib, nxt, cur)
        parent[cur] = prev
        flow[cur] = carried
        _add_child(fch, nsib, psib, prev, cur)
        if cur == u_out:
            break
        carried = old
        prev = cur
        cur = nxt

    depth[xnode] = depth[ynode] + 1
    pi[xnode] += shift
    top = 0
    stack[top] = xnode
    top += 1
    while top > 0:
        top -= 1
        p = stack[top]
        c = fch[p]
        while c >= 0:
            depth[c] = depth[p] + 1
            pi[c] += shift
            stack[top] = c
            top += 1
            c = nsib[c]
    return delta


@njit
def simplex_loop(A, B, m, n, root, parent, flow, pi, depth, fch, nsib, psib,
                 stack, eps, max_iter, refresh):
    """Pivot until no arc has reduced cost below ``-eps``.

    Pricing scans whole rows, roughly ``sqrt(m * n)`` arcs per block, and
    takes the most negative arc of the first block that has one. Returns
    ``(pivots, status)`` with status 0 = optimal, 1 = iteration limit.
    """
    kdim = A.shape[1]
    rows_per_block = int(np.sqrt(m * n) / n + 0.5)
    if rows_per_block < 1:
        rows_per_block = 1
    i = 0
    it = 0
    since_refresh = 0
    while it < max_iter:
        best = -eps
        bi = -1
        bj = -1
        rows = 0
        in_block = 0
        while rows < m:
            pii = pi[i]
            for j in range(n):
                s = 0.0
                for t in range(kdim):
                    s += A[i, t] * B[j, t]
                rc = pii - pi[m + j] - s
                if rc < best:
                    best = rc
                    bi = i
                    bj = j
            i += 1
            if i == m:
                i = 0
            rows += 1
            in_block += 1
            if in_block == rows_per_block:
                if bi >= 0:
                    break
                in_block = 0
        if bi < 0:
            # re-derive potentials before declaring optimality
            if since_refresh == 0:
                return it, 0
            rebuild_tree(A, B, m, n, root, parent, pi, depth, fch, nsib, psib, stack)
            since_refresh = 0
            continue
        _pivot(m, bi, bj, best, parent, flow, pi, depth, fch, nsib, psib, stack)
        it += 1
        since_refresh += 1
        if since_refresh >= refresh:
            rebuild_tree(A, B, m, n, root, parent, pi, depth, fch, nsib, psib, stack)
            since_refresh = 0
    return it, 1


@njit
def min_reduced_cost(A, B, m, n, pi):
    """Smallest reduced cost over all arcs, for certification."""
    best = np.inf
    for i in range(m):
        for j in range(n):
            rc = arc_cost(A, B, i, j) + pi[i] - pi[m + j]
            if rc < best:
                best = rc
    return best
