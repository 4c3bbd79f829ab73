"""Forest of randomized kd-trees for approximate nearest-neighbor search.

Each tree splits on a dimension drawn at random among the few dimensions of
largest variance, at the mean of the node's points. A query descends every
tree, then keeps expanding the closest unexplored branches (shared priority
queue over the whole forest) until a budget of checked points is spent.

The search loop is compiled with numba and runs in parallel over queries.
"""

import numba
import numpy as np

__all__ = ['KDTreeForest']

LEAF = -1


def _build_tree(points, rng, leaf_size, top_dims, sample_size):
    """Build one randomized kd-tree.

    Returns
    -------
    arrays : tuple of ndarray
        ``(split_dim, split_val, left, right, lo, hi, order)``; leaves have
        ``split_dim == -1`` and own ``order[lo:hi]``.
    """
    n_points = points.shape[0]
    order = np.arange(n_points, dtype=np.int64)
    split_dim, split_val, left, right, lo_list, hi_list = [], [], [], [], [], []

    def new_node(lo, hi):
        split_dim.append(LEAF)
        split_val.append(0.0)
        left.append(-1)
        right.append(-1)
        lo_list.append(lo)
        hi_list.append(hi)
        return len(split_dim) - 1

    stack = [new_node(0, n_points)]
    while stack:
        node = stack.pop()
        lo, hi = lo_list[node], hi_list[node]
        if hi - lo <= leaf_size:
            continue
        members = order[lo:hi]
        if hi - lo > sample_size:
            sample = points[rng.choice(members, sample_size, replace=False)]
        else:
            sample = points[members]
        variance = sample.var(axis=0)
        if not np.any(variance > 0):
            # all sampled points coincide; fall back to the full node
            variance = points[members].var(axis=0)
            if not np.any(variance > 0):
                continue
        candidates = np.argsort(-variance, kind='stable')[:min(top_dims, variance.size)]
        candidates = candidates[variance[candidates] > 0]
        dim = int(rng.choice(candidates))
        values = points[members, dim]
        threshold = values.mean()
        below = values < threshold
        n_below = int(below.sum())
        if n_below == 0 or n_below == members.size:
            # degenerate mean split, split at the median position instead
            ranked = np.argsort(values, kind='stable')
            n_below = members.size // 2
            below = np.zeros(members.size, dtype=bool)
            below[ranked[:n_below]] = True
            threshold = values[ranked[n_below]]
        order[lo:hi] = np.concatenate([members[below], members[~below]])
        split_dim[node] = dim
        split_val[node] = threshold
        left[node] = new_node(lo, lo + n_below)
        right[node] = new_node(lo + n_below, hi)
        stack.append(left[node])
        stack.append(right[node])

    return (np.array(split_dim, dtype=np.int64), np.array(split_val, dtype=np.float64),
            np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
            np.array(lo_list, dtype=np.int64), np.array(hi_list, dtype=np.int64), order)


@numba.njit(cache=True)
def _heap_push(heap_d, heap_node, size, d, node):
    if size >= heap_d.shape[0]:
        return size
    i = size
    heap_d[i] = d
    heap_node[i] = node
    while i > 0:
        parent = (i - 1) // 2
        if heap_d[parent] <= heap_d[i]:
            break
        heap_d[parent], heap_d[i] = heap_d[i], heap_d[parent]
        heap_node[parent], heap_node[i] = heap_node[i], heap_node[parent]
        i = parent
    return size + 1


@numba.njit(cache=True)
def _heap_pop(heap_d, heap_node, size):
    d = heap_d[0]
    node = heap_node[0]
    size -= 1
    heap_d[0] = heap_d[size]
    heap_node[0] = heap_node[size]
    i = 0
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        if child + 1 < size and heap_d[child + 1] < heap_d[child]:
            child += 1
        if heap_d[i] <= heap_d[child]:
            break
        heap_d[child], heap_d[i] = heap_d[i], heap_d[child]
        heap_node[child], heap_node[i] = heap_node[i], heap_node[child]
        i = child
    return d, node, size


@numba.njit(cache=True)
def _insert(best_d, best_i, d, idx):
    """Insert ``idx`` into the sorted candidate list, ties by ascending id."""
    m = best_d.shape[0]
    for j in range(m):
        if best_i[j] == idx:
            return
    last = m - 1
    if d > best_d[last] or (d == best_d[last] and best_i[last] >= 0 and idx > best_i[last]):
        return
    pos = last
    while pos > 0 and (best_d[pos - 1] > d or (best_d[pos - 1] == d and best_i[pos - 1] > idx)):
        best_d[pos] = best_d[pos - 1]
        best_i[pos] = best_i[pos - 1]
        pos -= 1
    best_d[pos] = d
    best_i[pos] = idx


@numba.njit(parallel=True, cache=True)
def _search(points, queries, query_ids, m, checks, roots, split_dim, split_val,
            left, right, lo, hi, order, heap_capacity):
    n_queries = queries.shape[0]
    n_dims = points.shape[1]
    out_i = np.full((n_queries, m), -1, dtype=np.int64)
    out_d = np.full((n_queries, m), np.inf, dtype=np.float64)
    for q in numba.prange(n_queries):
        x = queries[q]
        self_id = query_ids[q]
        best_d = np.full(m, np.inf)
        best_i = np.full(m, -1, dtype=np.int64)
        heap_d = np.empty(heap_capacity)
        heap_node = np.empty(heap_capacity, dtype=np.int64)
        size = 0
        for t in range(roots.shape[0]):
            size = _heap_push(heap_d, heap_node, size, 0.0, roots[t])
        checked = 0
        while size > 0 and checked < checks:
            bound, node, size = _heap_pop(heap_d, heap_node, size)
            if bound > best_d[m - 1]:
                continue
            while split_dim[node] != LEAF:
                diff = x[split_dim[node]] - split_val[node]
                if diff < 0.0:
                    near = left[node]
                    far = right[node]
                else:
                    near = right[node]
                    far = left[node]
                far_bound = max(bound, diff * diff)
                if far_bound <= best_d[m - 1]:
                    size = _heap_push(heap_d, heap_node, size, far_bound, far)
                node = near
            for j in range(lo[node], hi[node]):
                idx = order[j]
                if idx == self_id:
                    continue
                d = 0.0
                for c in range(n_dims):
                    delta = points[idx, c] - x[c]
                    d += delta * delta
                checked += 1
                _insert(best_d, best_i, d, idx)
        out_i[q] = best_i
        out_d[q] = best_d
    return out_i, out_d


class KDTreeForest(object):
    """Forest of randomized kd-trees over a fixed point set.

    Parameters
    ----------
    points : ndarray
        ``(N, M)`` array of points.
    n_trees : int
        Number of trees.
    leaf_size : int
        Maximum points per leaf.
    seed : int
        Seed of the split randomization.
    top_dims : int
        Number of highest-variance dimensions a split dimension is drawn from.
    """
    def __init__(self, points, n_trees=4, leaf_size=16, seed=0, top_dims=5, sample_size=100):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.n_trees = int(n_trees)
        rng = np.random.default_rng(seed)
        trees = [_build_tree(self.points, rng, leaf_size, top_dims, sample_size)
                 for _ in range(self.n_trees)]

        # concatenate the trees into flat node arrays with shifted offsets
        roots, parts = [], [[] for _ in range(7)]
        node_offset = 0
        order_offset = 0
        for split_dim, split_val, left, right, lo, hi, order in trees:
            roots.append(node_offset)
            is_inner = split_dim != LEAF
            parts[0].append(split_dim)
            parts[1].append(split_val)
            parts[2].append(np.where(is_inner, left + node_offset, -1))
            parts[3].append(np.where(is_inner, right + node_offset, -1))
            parts[4].append(lo + order_offset)
            parts[5].append(hi + order_offset)
            parts[6].append(order)
            node_offset += split_dim.size
            order_offset += order.size
        self.roots = np.array(roots, dtype=np.int64)
        (self.split_dim, self.split_val, self.left, self.right,
         self.lo, self.hi, self.order) = [np.concatenate(part) for part in parts]

    def __repr__(self):
        return "<KDTreeForest {} trees over {} points>".format(self.n_trees, self.points.shape[0])

    def query_self(self, k, checks=4096):
        """Approximate ``k`` nearest other points of every indexed point.

        Returns
        -------
        indices : ndarray
            ``(N, k)`` neighbor ids ordered by distance, ties by id.
        sq_distances : ndarray
            ``(N, k)`` squared Euclidean distances.
        """
        query_ids = np.arange(self.points.shape[0], dtype=np.int64)
        return self.query(self.points, k, checks=checks, query_ids=query_ids)

    def query(self, queries, k, checks=4096, query_ids=None):
        """Approximate ``k`` nearest indexed points of each query.

        ``query_ids`` gives, per query, an indexed id to exclude (the query
        itself); ``-1`` excludes nothing.
        """
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        if query_ids is None:
            query_ids = np.full(queries.shape[0], -1, dtype=np.int64)
        heap_capacity = max(1024, 4 * int(checks))
        return _search(self.points, queries, np.asarray(query_ids, dtype=np.int64), int(k),
                       int(checks), self.roots, self.split_dim, self.split_val, self.left,
                       self.right, self.lo, self.hi, self.order, heap_capacity)
