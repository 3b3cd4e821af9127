"""Optional compiled kernels. Importing this package never fails: when the
extension is missing (no compiler at install time, or FIRELOG_SKIP_NATIVE),
``native_lof_distinct`` is None and callers fall back to numpy."""

try:
    from ._lofkern import lof_distinct as native_lof_distinct
except ImportError:  # extension not built
    native_lof_distinct = None

__all__ = ["native_lof_distinct"]
