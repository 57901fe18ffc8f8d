class DisjointSet:
    """
    Disjoint sets over the elements {0, ..., size-1}, with union by rank and path halving.

    Examples:
        >>> ds = DisjointSet(3)  # {{0}, {1}, {2}}
        >>> ds.merge(0, 2)  # {{0, 2}, {1}}
        True
        >>> ds.find(0) == ds.find(2), ds.find(0) == ds.find(1)
        (True, False)
    """

    def __init__(self, size):
        if size < 0:
            raise ValueError("Size must not be negative, got {}".format(size))
        self._parent = list(range(size))
        self._rank = [0] * size
        self.count = size

    def find(self, x):
        """
        Gets the representative of the set containing x.
        """
        parent = self._parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def merge(self, x, y):
        """
        Merges the sets containing x and y.

        Returns:
            bool: True if they were different sets.
        """
        x_root, y_root = self.find(x), self.find(y)
        if x_root == y_root:
            return False
        if self._rank[x_root] < self._rank[y_root]:
            x_root, y_root = y_root, x_root
        self._parent[y_root] = x_root
        if self._rank[x_root] == self._rank[y_root]:
            self._rank[x_root] += 1
        self.count -= 1
        return True
