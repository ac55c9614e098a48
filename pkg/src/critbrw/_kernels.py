"""Compiled inner loops shared by the tree, graph and walk code."""
import numba as nb
import numpy as np

_jit = nb.njit(cache=True, nogil=True)


@_jit
def decode_parents(offspring):
    """Parent array of the plane tree with the given preorder offspring counts.

    Returns an array whose first entry is -1.  A negative value in position 0
    of a length-1 output, i.e. ``[-2]``, signals an invalid sequence.
    """
    n = offspring.shape[0]
    parent = np.empty(n, np.int64)
    parent[0] = -1
    stack = np.empty(n, np.int64)
    remaining = offspring.copy()
    top = -1
    if offspring[0] > 0:
        top = 0
        stack[0] = 0
    for i in range(1, n):
        while top >= 0 and remaining[stack[top]] == 0:
            top -= 1
        if top < 0:
            bad = np.empty(1, np.int64)
            bad[0] = -2
            return bad
        p = stack[top]
        parent[i] = p
        remaining[p] -= 1
        if offspring[i] > 0:
            top += 1
            stack[top] = i
    while top >= 0 and remaining[stack[top]] == 0:
        top -= 1
    if top >= 0:
        bad = np.empty(1, np.int64)
        bad[0] = -2
        return bad
    return parent


@_jit
def breadth_to_preorder(counts):
    """Preorder permutation of a tree given by breadth-first offspring counts.

    Children of breadth-first vertex j occupy a contiguous block of indices.
    """
    n = counts.shape[0]
    first = np.empty(n, np.int64)
    acc = 1
    for j in range(n):
        first[j] = acc
        acc += counts[j]
    order = np.empty(n, np.int64)
    stack = np.empty(n, np.int64)
    top = 0
    stack[0] = 0
    k = 0
    while top >= 0:
        v = stack[top]
        top -= 1
        order[k] = v
        k += 1
        for c in range(first[v] + counts[v] - 1, first[v] - 1, -1):
            top += 1
            stack[top] = c
    return order


@_jit
def depths_from_parents(parent):
    n = parent.shape[0]
    depth = np.zeros(n, np.int64)
    for i in range(1, n):
        depth[i] = depth[parent[i]] + 1
    return depth


@_jit
def subtree_sizes(parent):
    n = parent.shape[0]
    size = np.ones(n, np.int64)
    for i in range(n - 1, 0, -1):
        size[parent[i]] += size[i]
    return size


@_jit
def accumulate_positions(parent, axis, sign, d):
    """Positions from per-vertex unit steps; parents precede children."""
    n = parent.shape[0]
    pos = np.zeros((n, d), np.int32)
    for i in range(1, n):
        p = parent[i]
        for k in range(d):
            pos[i, k] = pos[p, k]
        pos[i, axis[i]] += sign[i]
    return pos


@_jit
def bridge_search(indptr, indices, edge_of, n_edges, root):
    """Iterative Tarjan low-link search from ``root``.

    Returns (is_bridge per edge, dfs parent, parent edge id, dfs order,
    number of reached vertices).
    """
    n = indptr.shape[0] - 1
    disc = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    parent = np.full(n, -1, np.int64)
    parent_edge = np.full(n, -1, np.int64)
    cursor = indptr[:-1].copy()
    order = np.empty(n, np.int64)
    stack = np.empty(n, np.int64)
    is_bridge = np.zeros(n_edges, np.bool_)
    t = 0
    top = 0
    stack[0] = root
    disc[root] = 0
    low[root] = 0
    order[0] = root
    t = 1
    while top >= 0:
        v = stack[top]
        if cursor[v] < indptr[v + 1]:
            j = cursor[v]
            cursor[v] += 1
            w = indices[j]
            e = edge_of[j]
            if e == parent_edge[v]:
                continue
            if disc[w] < 0:
                disc[w] = t
                low[w] = t
                order[t] = w
                t += 1
                parent[w] = v
                parent_edge[w] = e
                top += 1
                stack[top] = w
            elif disc[w] < low[v]:
                low[v] = disc[w]
        else:
            top -= 1
            p = parent[v]
            if p >= 0:
                if low[v] < low[p]:
                    low[p] = low[v]
                if low[v] > disc[p]:
                    is_bridge[parent_edge[v]] = True
    return is_bridge, parent, parent_edge, order[:t], t


@_jit
def bfs_distances(indptr, indices, source):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    dist[source] = 0
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        for j in range(indptr[v], indptr[v + 1]):
            w = indices[j]
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue[tail] = w
                tail += 1
    return dist


@_jit
def bfs_distances_masked(indptr, indices, source, allowed):
    """Breadth-first distances restricted to vertices with ``allowed`` set."""
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    dist[source] = 0
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        for j in range(indptr[v], indptr[v + 1]):
            w = indices[j]
            if allowed[w] and dist[w] < 0:
                dist[w] = dist[v] + 1
                queue[tail] = w
                tail += 1
    return dist


@_jit
def walk_paths(indptr, indices, start, steps, uniforms):
    """Simple random walks; ``uniforms`` has shape (walkers, steps)."""
    walkers = uniforms.shape[0]
    out = np.empty((walkers, steps + 1), np.int64)
    for w in range(walkers):
        v = start
        out[w, 0] = v
        for s in range(steps):
            deg = indptr[v + 1] - indptr[v]
            k = int(uniforms[w, s] * deg)
            if k == deg:
                k = deg - 1
            v = indices[indptr[v] + k]
            out[w, s + 1] = v
    return out


@_jit
def walk_observables(indptr, indices, coords, start, steps, uniforms, times):
    """Return indicators and Euclidean displacement at the requested times.

    ``times`` must be sorted.  Avoids storing whole trajectories.
    """
    walkers = uniforms.shape[0]
    nt = times.shape[0]
    returned = np.zeros((walkers, nt), np.bool_)
    disp = np.zeros((walkers, nt), np.float64)
    d = coords.shape[1]
    for w in range(walkers):
        v = start
        k = 0
        while k < nt and times[k] == 0:
            returned[w, k] = True
            k += 1
        for s in range(1, steps + 1):
            deg = indptr[v + 1] - indptr[v]
            j = int(uniforms[w, s - 1] * deg)
            if j == deg:
                j = deg - 1
            v = indices[indptr[v] + j]
            while k < nt and times[k] == s:
                returned[w, k] = v == start
                acc = 0.0
                for c in range(d):
                    diff = coords[v, c] - coords[start, c]
                    acc += diff * diff
                disp[w, k] = np.sqrt(acc)
                k += 1
    return returned, disp


@_jit
def propagate_bubble_labels(bubble_parent, bubble_cut, keep, root_label):
    """Nearest kept cut-point above each bubble; bubbles are parent-first."""
    nb_ = bubble_parent.shape[0]
    label = np.empty(nb_, np.int64)
    label[0] = root_label
    for c in range(1, nb_):
        u = bubble_cut[c]
        label[c] = u if keep[u] else label[bubble_parent[c]]
    return label


@_jit
def _bfs_into(indptr, indices, source, allowed, dist, queue):
    """Masked breadth-first search writing into ``dist`` (which must be all
    -1 on entry); returns the number of visited vertices, listed in
    ``queue``.  Callers reset ``dist[queue[:tail]]`` afterwards."""
    dist[source] = 0
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        for j in range(indptr[v], indptr[v + 1]):
            w = indices[j]
            if allowed[w] and dist[w] < 0:
                dist[w] = dist[v] + 1
                queue[tail] = w
                tail += 1
    return tail


@_jit
def _farthest_member(indptr, indices, source, allowed, members, dist, queue):
    tail = _bfs_into(indptr, indices, source, allowed, dist, queue)
    best = source
    far = 0
    for b in range(members.shape[0]):
        if dist[members[b]] > far:
            far = dist[members[b]]
            best = members[b]
    return best, far, tail


@_jit
def subset_diameter(indptr, indices, members, allowed):
    """Largest graph distance between two vertices of ``members``, paths
    restricted to vertices flagged in ``allowed``.

    Exact, using the fringe bound: pairs whose endpoints both lie within
    distance i of a centre vertex are at most 2i apart.
    """
    n = indptr.shape[0] - 1
    k = members.shape[0]
    if k <= 1:
        return 0
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    lower = 0
    if k <= 48:
        for a in range(k):
            best, far, tail = _farthest_member(indptr, indices, members[a], allowed, members, dist, queue)
            lower = max(lower, far)
            for q in range(tail):
                dist[queue[q]] = -1
        return lower
    # double sweep for a long geodesic and its midpoint
    a, far, tail = _farthest_member(indptr, indices, members[0], allowed, members, dist, queue)
    for q in range(tail):
        dist[queue[q]] = -1
    b_far, lower, tail = _farthest_member(indptr, indices, a, allowed, members, dist, queue)
    dist_a = dist.copy()
    for q in range(tail):
        dist[queue[q]] = -1
    _, _, tail = _farthest_member(indptr, indices, b_far, allowed, members, dist, queue)
    half = lower // 2
    centre = a
    for q in range(tail):
        v = queue[q]
        if dist_a[v] == half and dist[v] == lower - half:
            centre = v
            break
    for q in range(tail):
        dist[queue[q]] = -1
    tail = _bfs_into(indptr, indices, centre, allowed, dist, queue)
    level = np.empty(k, np.int64)
    for i in range(k):
        level[i] = dist[members[i]]
    for q in range(tail):
        dist[queue[q]] = -1
    order = np.argsort(-level)
    i = 0
    while i < k:
        current = level[order[i]]
        # pairs left unexamined have both ends within ``current`` of the centre
        if lower >= 2 * current:
            break
        while i < k and level[order[i]] == current:
            _, far, tail = _farthest_member(indptr, indices, members[order[i]], allowed, members, dist, queue)
            lower = max(lower, far)
            for q in range(tail):
                dist[queue[q]] = -1
            i += 1
    return lower


@_jit
def l1_diameter(points):
    """Exact largest l1 distance within a point set."""
    k, d = points.shape
    if k <= 1:
        return 0
    lo = np.empty(d, np.int64)
    hi = np.empty(d, np.int64)
    for c in range(d):
        lo[c] = points[0, c]
        hi[c] = points[0, c]
    for i in range(k):
        for c in range(d):
            if points[i, c] < lo[c]:
                lo[c] = points[i, c]
            if points[i, c] > hi[c]:
                hi[c] = points[i, c]
    # lower bound from repeated farthest-point sweeps
    cur = 0
    lower = 0
    for _ in range(4):
        far = cur
        best = -1
        for i in range(k):
            s = 0
            for c in range(d):
                s += abs(points[i, c] - points[cur, c])
            if s > best:
                best = s
                far = i
        if best > lower:
            lower = best
        cur = far
    # a point can only be in a longer pair if its box bound exceeds it
    cand = np.empty(k, np.int64)
    m = 0
    for i in range(k):
        ub = 0
        for c in range(d):
            ub += max(points[i, c] - lo[c], hi[c] - points[i, c])
        if ub > lower:
            cand[m] = i
            m += 1
    for x in range(m):
        i = cand[x]
        for y in range(x + 1, m):
            j = cand[y]
            s = 0
            for c in range(d):
                s += abs(points[i, c] - points[j, c])
            if s > lower:
                lower = s
    return lower
