"""Sound, incomplete subtyping for nested polymorphic session types."""

from .rename import Closure, internal_rename, unfold
from .subtype import Checker, Goal, NotSubtype, Subtype, Unknown, check_subtype, validate_eqtypes
from .syntax import format_type, parse_program, parse_type
from .variance import Variance, infer_variances

__all__ = [
    "Checker", "Closure", "Goal", "NotSubtype", "Subtype", "Unknown", "Variance",
    "check_subtype", "format_type", "infer_variances", "internal_rename",
    "parse_program", "parse_type", "unfold", "validate_eqtypes",
]
