"""Transportation simplex with dense side constraints (primal partitioning).

Solves::

    min  sum_ij f_ij * c_ij,           c_ij = -<Uc_i, Y_j>
    s.t. sum_j f_ij = n,  sum_i f_ij = m,
         sum_ij f_ij * Us_ik * Xs_jl = 0     for every (k, l),
         f >= 0.

A basis is a spanning tree of the bipartite graph plus ``q = d * p`` extra
basic variables: arcs, or artificial columns that absorb side-row residuals.
Tree quantities come from node potentials; the extra variables couple through
the ``q x q`` working matrix ``W`` whose column for variable ``e`` is its side
column minus the side column of the tree path it closes.

Conventions: scalar potentials satisfy ``c_ij + pi_i - pi_{m+j} = 0`` and
vector potentials ``D_ij + P_i - P_{m+j} = 0`` on tree arcs, where
``D_ij[k*p + l] = Us_ik * Xs_jl``. The side-row multipliers ``z`` solve
``W^T z = g``; the reduced cost of arc ``(i, j)`` is
``c_ij - z.D_ij + phi_i - phi_{m+j}`` with ``phi = pi - P z``.

Artificial ``r`` has cost ``esig_r * z0_r + mu``. Along the side row this is
the Lagrangian at ``z0`` plus an exact penalty ``mu * |residual|``, so a
start that is optimal for the Lagrangian at a good ``z0`` stays close to
optimal. ``mu`` grows tenfold while artificials remain positive.
"""

import numpy as np

from ._jit import njit

OPTIMAL = 0
ITERATION_LIMIT = 1
INFEASIBLE = 2
NUMERICAL = 3


@njit
def _side_col(Us, Xs, i, j, out):
    p = Xs.shape[1]
    for k in range(Us.shape[1]):
        u = Us[i, k]
        for l in range(p):
            out[k * p + l] = u * Xs[j, l]


@njit
def _cost(Uc, Y, i, j):
    s = 0.0
    for k in range(Uc.shape[1]):
        s += Uc[i, k] * Y[j, k]
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
def _arc_potentials(Uc, Y, Us, Xs, m, par, c, pi0, P, buf):
    """Potentials of ``c`` implied by the tree arc to its parent ``par``."""
    q = P.shape[1]
    if c >= m:
        pi0[c] = pi0[par] + _cost(Uc, Y, par, c - m)
        _side_col(Us, Xs, par, c - m, buf)
        for r in range(q):
            P[c, r] = P[par, r] + buf[r]
    else:
        pi0[c] = pi0[par] - _cost(Uc, Y, c, par - m)
        _side_col(Us, Xs, c, par - m, buf)
        for r in range(q):
            P[c, r] = P[par, r] - buf[r]


@njit
def _rebuild(Uc, Y, Us, Xs, m, n, root, parent, depth, fch, nsib, psib, order,
             pi0, P, buf):
    """Sibling lists, depths, preorder and potentials from ``parent``."""
    N = m + n
    q = P.shape[1]
    for v in range(N):
        fch[v] = -1
        nsib[v] = -1
        psib[v] = -1
    for v in range(N):
        if v != root:
            _add_child(fch, nsib, psib, parent[v], v)
    pi0[root] = 0.0
    for r in range(q):
        P[root, r] = 0.0
    depth[root] = 0
    # breadth-first: order lists every parent before its children
    order[0] = root
    pos = 0
    top = 1
    while pos < top:
        v = order[pos]
        pos += 1
        c = fch[v]
        while c >= 0:
            depth[c] = depth[v] + 1
            _arc_potentials(Uc, Y, Us, Xs, m, v, c, pi0, P, buf)
            order[top] = c
            top += 1
            c = nsib[c]


@njit
def _peel(m, N, order, parent, supply, out):
    """Tree flows carrying ``supply``; ``order`` lists parents before children."""
    S = supply.copy()
    for idx in range(N - 1, 0, -1):
        v = order[idx]
        if v < m:
            out[v] = S[v]
        else:
            out[v] = -S[v]
        S[parent[v]] += S[v]


@njit
def _working_matrix(Uc, Y, Us, Xs, m, ekind, ei, ej, er, esig, z0, mu, pi0, P,
                    W, g, buf):
    q = W.shape[0]
    for e in range(q):
        if ekind[e] == 0:
            i = ei[e]
            j = m + ej[e]
            _side_col(Us, Xs, ei[e], ej[e], buf)
            for r in range(q):
                W[r, e] = buf[r] + P[i, r] - P[j, r]
            g[e] = _cost(Uc, Y, ei[e], ej[e]) + pi0[i] - pi0[j]
        else:
            for r in range(q):
                W[r, e] = 0.0
            W[er[e], e] = esig[e]
            g[e] = esig[e] * z0[er[e]] + mu


@njit
def _recompute_flows(Us, Xs, m, n, root, parent, order, ekind, ei, ej, W, base,
                     flow, ex, buf):
    """Basic solution for marginals ``base`` from scratch."""
    N = m + n
    q = W.shape[0]
    supply = base.copy()
    f0 = np.zeros(N)
    _peel(m, N, order, parent, supply, f0)
    resid = np.zeros(q)
    for v in range(N):
        if v == root or f0[v] == 0.0:
            continue
        if v >= m:
            _side_col(Us, Xs, parent[v], v - m, buf)
        else:
            _side_col(Us, Xs, v, parent[v] - m, buf)
        for r in range(q):
            resid[r] += f0[v] * buf[r]
    if q > 0:
        xe = np.linalg.solve(W, -resid)
        for e in range(q):
            ex[e] = xe[e]
            if ekind[e] == 0:
                supply[ei[e]] -= xe[e]
                supply[m + ej[e]] += xe[e]
    _peel(m, N, order, parent, supply, flow)
    flow[root] = 0.0


@njit
def _in_subtree(x, u, depth, parent):
    while depth[x] > depth[u]:
        x = parent[x]
    return x == u


@njit
def _cycle_add(m, a, b, amount, depth, parent, dflow, stamp, mark, touched,
               ntouched):
    """Tree flow change from shipping ``amount`` from row ``a`` to column
    ``b`` along the tree path; a negative amount ships the other way."""
    while a != b:
        if depth[a] >= depth[b]:
            x = a
            a = parent[a]
            sgn = 1.0 if x < m else -1.0
        else:
            x = b
            b = parent[b]
            sgn = -1.0 if x < m else 1.0
        if stamp[x] != mark:
            stamp[x] = mark
            dflow[x] = 0.0
            touched[ntouched] = x
            ntouched += 1
        dflow[x] += sgn * amount
    return ntouched


@njit
def side_simplex(Uc, Y, Us, Xs, z0, root, parent, flow, eps, feas_tol, mu,
                 max_mu, perturb, max_iter, refresh, stall_limit, block_rows,
                 ncap, stats):
    """Run the partitioned simplex from a spanning-tree start.

    ``parent``/``flow`` hold a strongly feasible transportation tree on entry
    (e.g. an optimal one for the Lagrangian costs at ``z0``). ``perturb``
    holds small positive node perturbations that break degeneracy; the final
    flows are recomputed with exact marginals. ``stats`` accumulates
    degenerate pivots, Bland pivots, penalty escalations and priced arcs.

    Returns the status, pivot count, multipliers ``z``, potentials ``phi``
    and the extra basic variables ``(ekind, ei, ej, ex)``.
    """
    m = Uc.shape[0]
    n = Y.shape[0]
    d = Us.shape[1]
    p = Xs.shape[1]
    q = d * p
    N = m + n
    kdim = d + p

    depth = np.empty(N, dtype=np.int64)
    fch = np.empty(N, dtype=np.int64)
    nsib = np.empty(N, dtype=np.int64)
    psib = np.empty(N, dtype=np.int64)
    order = np.empty(N, dtype=np.int64)
    stack = np.empty(N, dtype=np.int64)
    pi0 = np.zeros(N)
    P = np.zeros((N, q))
    buf = np.zeros(q)
    shift = np.zeros(q)
    W = np.zeros((q, q))
    g = np.zeros(q)
    z = np.zeros(q)
    phi = np.zeros(N)
    ekind = np.ones(q, dtype=np.int64)
    ei = np.zeros(q, dtype=np.int64)
    ej = np.zeros(q, dtype=np.int64)
    er = np.arange(q)
    esig = np.ones(q)
    efix = np.zeros(q, dtype=np.bool_)
    ex = np.zeros(q)
    Fa = np.zeros((m, kdim))
    Fb = np.zeros((n, kdim))
    for j in range(n):
        for k in range(d):
            Fb[j, k] = Y[j, k]
        for l in range(p):
            Fb[j, d + l] = Xs[j, l]

    _rebuild(Uc, Y, Us, Xs, m, n, root, parent, depth, fch, nsib, psib, order,
             pi0, P, buf)

    # perturbed marginals: every non-root node takes a little extra demand,
    # which keeps all arcs of a strongly feasible start strictly positive
    supply = np.empty(N)
    total = 0.0
    for v in range(N):
        if v == root:
            continue
        base = float(n) if v < m else -float(m)
        supply[v] = base - perturb[v]
        total += perturb[v]
    supply[root] = float(n) + total
    _peel(m, N, order, parent, supply, flow)
    flow[root] = 0.0

    # artificial signs make the starting artificial values nonnegative
    resid = np.zeros(q)
    for v in range(N):
        if v == root or flow[v] == 0.0:
            continue
        if v >= m:
            _side_col(Us, Xs, parent[v], v - m, buf)
        else:
            _side_col(Us, Xs, v, parent[v] - m, buf)
        for r in range(q):
            resid[r] += flow[v] * buf[r]
    for r in range(q):
        esig[r] = 1.0 if resid[r] <= 0.0 else -1.0
        ex[r] = abs(resid[r])
        if ex[r] <= feas_tol:
            efix[r] = True

    _working_matrix(Uc, Y, Us, Xs, m, ekind, ei, ej, er, esig, z0, mu, pi0, P,
                    W, g, buf)

    cand_i = np.empty(ncap, dtype=np.int64)
    cand_j = np.empty(ncap, dtype=np.int64)
    ncand = 0
    dflow = np.zeros(N)
    stamp = np.zeros(N, dtype=np.int64)
    touched = np.empty(N, dtype=np.int64)
    mark = 0
    dvec = np.zeros(q)
    status = ITERATION_LIMIT
    it = 0
    since_refresh = 0
    degenerate_run = 0
    bland = False
    i_next = 0
    need_duals = True
    while it < max_iter:
        if need_duals:
            if q > 0:
                z = np.linalg.solve(np.ascontiguousarray(W.T), g)
            for v in range(N):
                s = pi0[v]
                for r in range(q):
                    s -= P[v, r] * z[r]
                phi[v] = s
            for i in range(m):
                for k in range(d):
                    Fa[i, k] = Uc[i, k]
                for l in range(p):
                    s = 0.0
                    for k in range(d):
                        s += z[k * p + l] * Us[i, k]
                    Fa[i, d + l] = s
            need_duals = False

        # pricing
        best = -eps
        bi = -1
        bj = -1
        if bland:
            for i in range(m):
                for j in range(n):
                    s = 0.0
                    for t in range(kdim):
                        s += Fa[i, t] * Fb[j, t]
                    rc = phi[i] - phi[m + j] - s
                    if rc < -eps:
                        bi = i
                        bj = j
                        best = rc
                        break
                if bi >= 0:
                    break
        else:
            # re-price the candidate list first; rescan only when it runs dry
            kept = 0
            for c in range(ncand):
                i = cand_i[c]
                j = cand_j[c]
                s = 0.0
                for t in range(kdim):
                    s += Fa[i, t] * Fb[j, t]
                rc = phi[i] - phi[m + j] - s
                if rc < -eps:
                    cand_i[kept] = i
                    cand_j[kept] = j
                    if rc < best:
                        best = rc
                        bi = i
                        bj = j
                    kept += 1
            ncand = kept
            if bi < 0:
                rows_per_block = block_rows
                if rows_per_block < 1:
                    rows_per_block = int(np.sqrt(m * n) / n + 0.5)
                if rows_per_block < 1:
                    rows_per_block = 1
                rows = 0
                in_block = 0
                i = i_next
                while rows < m:
                    pii = phi[i]
                    for j in range(n):
                        s = 0.0
                        for t in range(kdim):
                            s += Fa[i, t] * Fb[j, t]
                        rc = pii - phi[m + j] - s
                        if rc < -eps:
                            if ncand < ncap:
                                cand_i[ncand] = i
                                cand_j[ncand] = j
                                ncand += 1
                            if rc < best:
                                best = rc
                                bi = i
                                bj = j
                    i += 1
                    if i == m:
                        i = 0
                    rows += 1
                    stats[3] += n
                    in_block += 1
                    if in_block == rows_per_block:
                        if bi >= 0:
                            break
                        in_block = 0
                i_next = i

        if bi < 0:
            if since_refresh > 0:
                # confirm on freshly computed potentials and flows
                _rebuild(Uc, Y, Us, Xs, m, n, root, parent, depth, fch, nsib,
                         psib, order, pi0, P, buf)
                _working_matrix(Uc, Y, Us, Xs, m, ekind, ei, ej, er, esig, z0,
                                mu, pi0, P, W, g, buf)
                _recompute_flows(Us, Xs, m, n, root, parent, order, ekind, ei,
                                 ej, W, supply, flow, ex, buf)
                since_refresh = 0
                need_duals = True
                continue
            grow = False
            for e in range(q):
                if ekind[e] == 1 and not efix[e]:
                    if ex[e] > feas_tol:
                        grow = True
                    else:
                        efix[e] = True
            if grow:
                mu *= 10.0
                stats[2] += 1
                if mu > max_mu:
                    status = INFEASIBLE
                    break
                for e in range(q):
                    if ekind[e] == 1:
                        g[e] = esig[e] * z0[er[e]] + mu
                need_duals = True
                continue
            status = OPTIMAL
            break

        # direction: entering arc at unit level, extras move by -dvec
        _side_col(Us, Xs, bi, bj, buf)
        for r in range(q):
            buf[r] += P[bi, r] - P[m + bj, r]
        if q > 0:
            dvec = np.linalg.solve(W, buf)
        mark += 1
        ntouched = 0
        # the entering arc ships one unit row -> column, so the tree path
        # carries one unit back; extra arc e gives back dvec[e] and the
        # tree path carries that amount forward
        ntouched = _cycle_add(m, bi, m + bj, -1.0, depth, parent, dflow, stamp,
                              mark, touched, ntouched)
        for e in range(q):
            if ekind[e] == 0 and dvec[e] != 0.0:
                ntouched = _cycle_add(m, ei[e], m + ej[e], dvec[e], depth,
                                      parent, dflow, stamp, mark, touched,
                                      ntouched)

        # ratio test: tree flow moves by +theta*dflow, extras by -theta*dvec
        theta = np.inf
        leave_tree = -1
        leave_ext = -1
        best_rate = 0.0
        best_index = 0
        tol = 1e-9
        for t in range(ntouched):
            v = touched[t]
            rate = -dflow[v]
            if rate > tol:
                x = flow[v] if flow[v] > 0.0 else 0.0
                ratio = x / rate
                if bland:
                    if v >= m:
                        idx = parent[v] * n + (v - m)
                    else:
                        idx = v * n + (parent[v] - m)
                    better = ratio < theta - 1e-12 or (
                        ratio <= theta + 1e-12 and idx < best_index)
                else:
                    better = ratio < theta - 1e-12 or (
                        ratio <= theta + 1e-12 and rate > best_rate)
                    idx = 0
                if better:
                    theta = ratio
                    leave_tree = v
                    leave_ext = -1
                    best_rate = rate
                    best_index = idx
        for e in range(q):
            rate = dvec[e]
            if efix[e] and ekind[e] == 1:
                if abs(rate) <= tol:
                    continue
                ratio = 0.0
                rate = abs(rate)
            elif rate > tol:
                x = ex[e] if ex[e] > 0.0 else 0.0
                ratio = x / rate
            else:
                continue
            if ekind[e] == 0:
                idx = ei[e] * n + ej[e]
            else:
                idx = m * n + er[e]
            if bland:
                better = ratio < theta - 1e-12 or (
                    ratio <= theta + 1e-12 and idx < best_index)
            else:
                better = ratio < theta - 1e-12 or (
                    ratio <= theta + 1e-12 and rate > best_rate)
            if better:
                theta = ratio
                leave_tree = -1
                leave_ext = e
                best_rate = rate
                best_index = idx
        if leave_tree < 0 and leave_ext < 0:
            status = NUMERICAL
            break

        for t in range(ntouched):
            v = touched[t]
            flow[v] += theta * dflow[v]
        for e in range(q):
            ex[e] -= theta * dvec[e]

        if leave_ext >= 0:
            e = leave_ext
            ekind[e] = 0
            ei[e] = bi
            ej[e] = bj
            efix[e] = False
            ex[e] = theta
        else:
            u_out = leave_tree
            in_a = _in_subtree(bi, u_out, depth, parent)
            in_b = _in_subtree(m + bj, u_out, depth, parent)
            if in_a != in_b:
                ar = bi
                ac = bj
                val = theta
            else:
                slot = -1
                for e in range(q):
                    if ekind[e] == 0:
                        ia = _in_subtree(ei[e], u_out, depth, parent)
                        ib = _in_subtree(m + ej[e], u_out, depth, parent)
                        if ia != ib:
                            slot = e
                            break
                if slot < 0:
                    status = NUMERICAL
                    break
                ar = ei[slot]
                ac = ej[slot]
                val = ex[slot]
                ei[slot] = bi
                ej[slot] = bj
                ex[slot] = theta
            if _in_subtree(ar, u_out, depth, parent):
                xnode = ar
                ynode = m + ac
            else:
                xnode = m + ac
                ynode = ar
            # hang the subtree below u_out from ynode, reversing the path
            _remove_child(fch, nsib, psib, parent[u_out], u_out)
            prev = ynode
            cur = xnode
            carried = val
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
            # the moved subtree keeps its internal arcs: shift its potentials
            old0 = pi0[xnode]
            for r in range(q):
                shift[r] = P[xnode, r]
            _arc_potentials(Uc, Y, Us, Xs, m, ynode, xnode, pi0, P, buf)
            d0 = pi0[xnode] - old0
            for r in range(q):
                shift[r] = P[xnode, r] - shift[r]
            depth[xnode] = depth[ynode] + 1
            top = 0
            c = fch[xnode]
            while c >= 0:
                stack[top] = c
                top += 1
                c = nsib[c]
            while top > 0:
                top -= 1
                v = stack[top]
                depth[v] = depth[parent[v]] + 1
                pi0[v] += d0
                for r in range(q):
                    P[v, r] += shift[r]
                c = fch[v]
                while c >= 0:
                    stack[top] = c
                    top += 1
                    c = nsib[c]

        for e in range(q):
            if ekind[e] == 1 and not efix[e] and ex[e] <= feas_tol:
                efix[e] = True
        _working_matrix(Uc, Y, Us, Xs, m, ekind, ei, ej, er, esig, z0, mu,
                        pi0, P, W, g, buf)
        need_duals = True

        it += 1
        since_refresh += 1
        if since_refresh >= refresh:
            _rebuild(Uc, Y, Us, Xs, m, n, root, parent, depth, fch, nsib, psib,
                     order, pi0, P, buf)
            _working_matrix(Uc, Y, Us, Xs, m, ekind, ei, ej, er, esig, z0, mu,
                            pi0, P, W, g, buf)
            _recompute_flows(Us, Xs, m, n, root, parent, order, ekind, ei, ej,
                             W, supply, flow, ex, buf)
            since_refresh = 0
        if bland:
            stats[1] += 1
        if theta * best_rate > 1e-12:
            degenerate_run = 0
            bland = False
        else:
            stats[0] += 1
            degenerate_run += 1
            if degenerate_run > stall_limit:
                bland = True

    if status == OPTIMAL or status == ITERATION_LIMIT:
        # drop the perturbation: same basis, exact marginals
        _rebuild(Uc, Y, Us, Xs, m, n, root, parent, depth, fch, nsib, psib,
                 order, pi0, P, buf)
        _working_matrix(Uc, Y, Us, Xs, m, ekind, ei, ej, er, esig, z0, mu,
                        pi0, P, W, g, buf)
        for v in range(m):
            supply[v] = float(n)
        for v in range(m, N):
            supply[v] = -float(m)
        _recompute_flows(Us, Xs, m, n, root, parent, order, ekind, ei, ej, W,
                         supply, flow, ex, buf)
    return status, it, z, phi, ekind, ei, ej, ex
