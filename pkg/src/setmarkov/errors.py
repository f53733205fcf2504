"""Exception types shared across the package."""


class SetMarkovError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SetMarkovError):
    """Invalid configuration (bad parameters, malformed JSON, unresolved refs)."""


class GridMismatchError(ConfigError):
    """Two objects that must share a grid do not."""


class EmptyRootError(SetMarkovError):
    """The intersection of the generating sets is empty, so no minimal set exists."""


class OrderingOverflowError(SetMarkovError):
    """Consistent-ordering enumeration exceeded the configured cap."""


class ChainEmbeddingError(SetMarkovError):
    """A monotone chain cannot be embedded as prefix unions of the lattice."""


class DecompositionError(SetMarkovError):
    """A target set is not a union of the lattice's left neighbourhoods."""


class TableSizeError(SetMarkovError):
    """An exact joint table would exceed the configured entry cap."""


class UnsupportedKernelError(SetMarkovError):
    """The requested operation needs a finite-state kernel."""
