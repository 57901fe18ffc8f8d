from time import monotonic


class DiscretizationError(Exception):
    """
    Base class for all errors raised by this package.
    """


class CapacityError(DiscretizationError):
    """
    A grid, table or buffer would exceed a configured limit.
    """

    def __init__(self, what, required, available):
        super().__init__(
            "{} needs {} but the configured limit is {}".format(what, required, available)
        )
        self.what = what
        self.required = required
        self.available = available


class DomainError(DiscretizationError, ValueError):
    """
    An argument lies outside the domain of the operation.
    """


class TilingError(DomainError):
    """
    Two resolutions do not divide each other as required.
    """


class UnknownMapError(DiscretizationError, LookupError):
    """
    A map name is not one of the built-in maps.
    """

    def __init__(self, name, valid_names):
        super().__init__(
            "Unknown map '{}', valid names are: {}".format(name, ", ".join(valid_names))
        )
        self.name = name
        self.valid_names = tuple(valid_names)


class MatchingError(DiscretizationError):
    """
    No perfect matching exists for a cube relation.

    The witness is a set of left vertices whose neighbourhood is smaller than the set itself.
    """

    def __init__(self, witness, neighbourhood):
        super().__init__(
            "Hall condition fails: {} left cells reach only {} right cells".format(
                len(witness), len(neighbourhood)
            )
        )
        self.witness = tuple(witness)
        self.neighbourhood = tuple(neighbourhood)


class SearchError(DiscretizationError):
    """
    A bounded search finished without finding what it looked for.
    """

    def __init__(self, message, best_distance):
        super().__init__("{} (best distance found: {})".format(message, best_distance))
        self.best_distance = best_distance


class ConsistencyError(DiscretizationError):
    """
    Two inputs that must describe the same object do not.
    """


class ConfigError(DiscretizationError, ValueError):
    """
    A configuration document does not follow the schema.
    """

    def __init__(self, path, message):
        super().__init__("{}: {}".format(path or "<root>", message))
        self.path = path


class BudgetTimeout(DiscretizationError):
    """
    A computation ran past its time budget.
    """

    def __init__(self, what, max_seconds):
        super().__init__("{} exceeded the budget of {} s".format(what, max_seconds))
        self.what = what
        self.max_seconds = max_seconds


class Deadline:
    """
    A wall-clock budget checked between units of work.
    """

    def __init__(self, what, max_seconds, clock=monotonic):
        self.what = what
        self.max_seconds = max_seconds
        self._clock = clock
        self._start = self._clock()

    def elapsed(self):
        return self._clock() - self._start

    def check(self):
        """
        Raises BudgetTimeout once the budget is spent. A budget of None never expires.
        """
        if self.max_seconds is not None and self.elapsed() > self.max_seconds:
            raise BudgetTimeout(self.what, self.max_seconds)
