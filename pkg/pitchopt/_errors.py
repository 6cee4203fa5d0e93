from msgspec import DecodeError

__all__ = (
    "DecodeError",
    "PitchoptError",
    "ValidationError",
    "InstanceFormatError",
    "SequenceFormatError",
    "TrailingUnitsError",
    "InfeasibleInstanceError",
    "SymmetryOptionError",
    "ModelFormatError",
    "exit_code",
)


class PitchoptError(Exception):
    __slots__ = ("message",)

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


class ValidationError(PitchoptError):
    """
    An argument or a domain invariant is violated (non-positive ratios,
    groove outside (0, 1), empty sequence, K < 1, ...).
    """

class InstanceFormatError(PitchoptError):
    """
    The instance file does not follow the ``key = value`` grammar, or a value
    cannot be converted to the expected type.
    """

class SequenceFormatError(PitchoptError):
    """
    A sequence string holds characters other than type digits, or a type
    outside ``1..r``.
    """

class TrailingUnitsError(PitchoptError, IndexError):
    """
    The number of trailing empty units ``j`` is outside ``L = {0, ..., l_max - l_min}``.
    """

class InfeasibleInstanceError(PitchoptError):
    """
    No pitch sequence satisfies the instance: the occurrence window excludes
    ``N`` or the adjacency and run-length constraints leave nothing.
    """

class SymmetryOptionError(PitchoptError):
    """
    Fixing the first pitch to type 1 is only sound when type 1 must occur,
    that is when ``minOcc_1 >= 1``.
    """

class ModelFormatError(PitchoptError):
    """
    A model file cannot be read, or does not hold a tire noise model.
    """


_exit_codes: dict[type[PitchoptError], int] = {
    InfeasibleInstanceError: 1,
    ValidationError: 2,
    InstanceFormatError: 2,
    SequenceFormatError: 2,
    TrailingUnitsError: 2,
    SymmetryOptionError: 2,
    ModelFormatError: 2,
}


def exit_code(error: PitchoptError) -> int:
    """Process exit code for ``error``: 1 for infeasibility, 2 for usage errors."""
    for error_cls in type(error).__mro__:
        if error_cls in _exit_codes:
            return _exit_codes[error_cls]
    return 2
