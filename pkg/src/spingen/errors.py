"""Exception types shared across the package.

Both derive from ValueError so callers can catch bad input generically,
while the CLI maps them to distinct exit codes.
"""


class NumericDomainError(ValueError):
    """A quantity was requested outside its mathematical domain."""


class TableSizeError(ValueError):
    """A full-table operation would exceed the supported system size."""
