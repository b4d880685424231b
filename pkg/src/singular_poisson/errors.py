"""Exception hierarchy.

``ValidationError`` subclasses signal bad inputs (CLI exit code 1); anything
else escaping the library is a runtime failure (exit code 2).
"""


class ValidationError(ValueError):
    pass


class InvalidOrder(ValidationError):
    pass


class NonpositiveIntensity(ValidationError):
    pass


class SmoothPartNonzeroAtOrigin(ValidationError):
    pass


class BadInterval(ValidationError):
    pass


class OutOfInterval(ValidationError):
    pass


class DegenerateGrid(ValidationError):
    pass


class MleUndefinedForNegativeP(ValidationError):
    pass


class AllNodesSingular(RuntimeError):
    pass


class XiUndefinedForNegativeP(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class FingerprintMismatch(ValidationError):
    pass
