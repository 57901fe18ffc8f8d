"""
Hopcroft-Karp maximum matching on bipartite graphs whose vertices are integers.

Left vertices are scanned in increasing order and their neighbours in increasing order, so
the matching found is a deterministic function of the graph.
"""

from collections import deque

from torus_discretization.errors import MatchingError

UNMATCHED = -1
UNREACHED = -1


class HopcroftKarp:
    """
    Layered augmenting-path matching.

    The constructor accepts one sorted list of right vertices per left vertex.
    """

    def __init__(self, neighbours, num_right):
        self._neighbours = [sorted(set(int(v) for v in adj)) for adj in neighbours]
        self._pair_left = [UNMATCHED] * len(self._neighbours)
        self._pair_right = [UNMATCHED] * num_right
        self._dist = [UNREACHED] * len(self._neighbours)

    def _bfs(self):
        queue = deque()
        for u, partner in enumerate(self._pair_left):
            if partner == UNMATCHED:
                self._dist[u] = 0
                queue.append(u)
            else:
                self._dist[u] = UNREACHED
        found = False
        while queue:
            u = queue.popleft()
            for v in self._neighbours[u]:
                w = self._pair_right[v]
                if w == UNMATCHED:
                    found = True
                elif self._dist[w] == UNREACHED:
                    self._dist[w] = self._dist[u] + 1
                    queue.append(w)
        return found

    def _dfs(self, root, next_edge):
        path, via = [root], []
        while path:
            u = path[-1]
            adj = self._neighbours[u]
            if next_edge[u] == len(adj):
                self._dist[u] = UNREACHED
                path.pop()
                if via:
                    via.pop()
                continue
            v = adj[next_edge[u]]
            next_edge[u] += 1
            w = self._pair_right[v]
            if w == UNMATCHED:
                via.append(v)
                for left, right in zip(path, via):
                    self._pair_left[left] = right
                    self._pair_right[right] = left
                return True
            if self._dist[w] == self._dist[u] + 1:
                via.append(v)
                path.append(w)
        return False

    def run(self):
        """
        Computes a maximum matching.

        Returns:
            list: the right partner of each left vertex, or UNMATCHED.
        """
        while self._bfs():
            next_edge = [0] * len(self._neighbours)
            for u in range(len(self._neighbours)):
                if self._pair_left[u] == UNMATCHED:
                    self._dfs(u, next_edge)
        return list(self._pair_left)

    def hall_witness(self):
        """
        Gets left vertices reachable by alternating paths from the lowest unmatched one.

        After run, their neighbourhood is one smaller than the set itself.

        Returns:
            tuple (list, list): the witness set and its neighbourhood, both sorted.
        """
        start = self._pair_left.index(UNMATCHED)
        left_seen, right_seen = {start}, set()
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self._neighbours[u]:
                if v in right_seen:
                    continue
                right_seen.add(v)
                w = self._pair_right[v]
                if w != UNMATCHED and w not in left_seen:
                    left_seen.add(w)
                    queue.append(w)
        return sorted(left_seen), sorted(right_seen)


def perfect_matching(neighbours, size):
    """
    Finds a perfect matching between two sets of the same size.

    Args:
        neighbours: for each left vertex, the right vertices it may be matched to.
        size: number of vertices on each side.
    Returns:
        list: the right partner of each left vertex; a bijection.
    """
    if len(neighbours) != size:
        raise ValueError("Expected {} neighbour lists, got {}".format(size, len(neighbours)))
    matcher = HopcroftKarp(neighbours, size)
    pairs = matcher.run()
    if UNMATCHED in pairs:
        raise MatchingError(*matcher.hall_witness())
    return pairs
