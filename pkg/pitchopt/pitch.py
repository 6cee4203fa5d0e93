"""
Pitch catalogs, instances and pitch sequences.

Relative pitch lengths are carried as exact rationals and reduced to integer
lengths in a common unit. Every tire length, start position and sequence
constraint downstream is expressed in that unit.
"""
import math
from collections.abc import Iterable as _Iterable, Sequence as _Sequence
from fractions import Fraction

import msgspec

from pitchopt import _errors

__all__ = (
    "PitchCatalog",
    "Instance",
    "PitchSequence",
    "ValidityReport",
    "canonical_form",
    "default_harmonics",
    "derive_unit",
    "extreme_pair_incompatibility",
    "format_sequence",
    "make_catalog",
    "make_instance",
    "make_sequence",
    "parse_sequence",
    "reversed_sequence",
    "rotations",
    "standard_catalog",
    "standard_instance",
    "validate_sequence",
)

DENOMINATOR_BOUND = 10**6
"""Largest denominator accepted when a floating ratio is read as a rational."""

MAX_HARMONICS = 200


def default_harmonics(n_pitches: int) -> int:
    """Fourier truncation used when none is given: ``floor(1.5 N)``, at most 200."""
    return max(1, min(3 * n_pitches // 2, MAX_HARMONICS))

RatioLike = Fraction | int | float | str


class PitchCatalog(msgspec.Struct, frozen=True):
    """The pitch types available to a tire track."""

    ratios: tuple[Fraction, ...]
    """Relative pitch lengths, strictly increasing."""
    lengths: tuple[int, ...]
    """Reduced integer lengths ``l_1 < ... < l_r``, in units."""
    unit: Fraction
    """Largest length dividing every ratio into an integral number of units."""
    height: float = 100.0
    """Pitch height ``h``."""
    groove: float = 0.1
    """Groove fraction ``q`` of every pitch."""

    def __post_init__(self) -> None:
        if not self.lengths or len(self.lengths) != len(self.ratios):
            raise _errors.ValidationError("ratios and lengths must be nonempty and aligned")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])) or self.lengths[0] < 1:
            raise _errors.ValidationError(f"lengths must be strictly increasing: {self.lengths}")
        if any(ratio != length * self.unit for ratio, length in zip(self.ratios, self.lengths)):
            raise _errors.ValidationError("lengths are not the ratios divided by the unit")
        if not self.height > 0:
            raise _errors.ValidationError(f"height must be positive, got {self.height}")
        if not 0 < self.groove < 1:
            raise _errors.ValidationError(f"groove must lie in (0, 1), got {self.groove}")

    @property
    def r(self) -> int:
        """Number of pitch types."""
        return len(self.lengths)

    def length(self, pitch_type: int) -> int:
        """Reduced length of a 1-based pitch type."""
        return self.lengths[pitch_type - 1]


class Instance(msgspec.Struct, frozen=True):
    """
    A tire noise optimization instance.

    Occurrence bounds, run bounds and incompatibilities are indexed by
    0-based position for 1-based pitch types (``min_occ[p - 1]``).
    """

    catalog: PitchCatalog
    n_pitches: int
    min_occ: tuple[int, ...]
    max_occ: tuple[int, ...]
    max_seq: tuple[int | None, ...]
    """Longest allowed run of a type; ``None`` is unbounded."""
    incompatible: tuple[tuple[int, int], ...] = ()
    """Ordered pairs ``(a, b)``: a pitch of type ``b`` may not follow one of type ``a``."""
    harmonics: int = 0
    """Fourier truncation ``K``; 0 selects :func:`default_harmonics`."""

    def __post_init__(self) -> None:
        r = self.catalog.r
        if self.n_pitches < 1:
            raise _errors.ValidationError(f"n_pitches must be positive, got {self.n_pitches}")
        if not len(self.min_occ) == len(self.max_occ) == len(self.max_seq) == r:
            raise _errors.ValidationError(f"occurrence and run bounds need {r} entries")
        for lo, hi in zip(self.min_occ, self.max_occ):
            if lo < 0 or hi < lo:
                raise _errors.ValidationError(f"invalid occurrence window [{lo}, {hi}]")
        if any(bound is not None and bound < 1 for bound in self.max_seq):
            raise _errors.ValidationError(f"run bounds must be positive: {self.max_seq}")
        for a, b in self.incompatible:
            if not (1 <= a <= r and 1 <= b <= r):
                raise _errors.ValidationError(f"incompatible pair ({a}, {b}) outside 1..{r}")
        if self.harmonics < 0:
            raise _errors.ValidationError(f"harmonics must be positive, got {self.harmonics}")

    @property
    def K(self) -> int:
        """Number of harmonics taken into account."""
        return self.harmonics or default_harmonics(self.n_pitches)

    @property
    def l_min(self) -> int:
        return self.n_pitches * self.catalog.lengths[0]

    @property
    def l_max(self) -> int:
        return self.n_pitches * self.catalog.lengths[-1]

    @property
    def trailing_units(self) -> range:
        """``L``, the admissible numbers of trailing empty units."""
        return range(self.l_max - self.l_min + 1)

    def tire_length(self, j: int) -> int:
        """
        ``T_j = l_max - j``.

        Raises
        ------
        TrailingUnitsError
            If ``j`` is outside ``L``.
        """
        if j not in self.trailing_units:
            raise _errors.TrailingUnitsError(
                f"j={j} outside L = {{0, ..., {self.l_max - self.l_min}}}"
            )
        return self.l_max - j

    def check_feasible(self) -> None:
        """
        Raises
        ------
        InfeasibleInstanceError
            If the occurrence windows cannot add up to ``N``.
        """
        if not sum(self.min_occ) <= self.n_pitches <= sum(self.max_occ):
            raise _errors.InfeasibleInstanceError(
                f"occurrence bounds admit between {sum(self.min_occ)} and "
                f"{sum(self.max_occ)} pitches, not {self.n_pitches}"
            )


class PitchSequence(msgspec.Struct, frozen=True):
    """Pitch types around the tire, with the length of each pitch."""

    types: tuple[int, ...]
    """1-based pitch types."""
    lengths: tuple[int, ...]
    """Reduced length of each pitch, aligned with ``types``."""

    def __post_init__(self) -> None:
        if not self.types:
            raise _errors.ValidationError("empty pitch sequence")
        if len(self.types) != len(self.lengths):
            raise _errors.ValidationError("types and lengths must be aligned")

    def __len__(self) -> int:
        return len(self.types)

    def __str__(self) -> str:
        return format_sequence(self)

    @property
    def start_positions(self) -> tuple[int, ...]:
        """1-based start unit of every pitch."""
        starts: list[int] = []
        position = 1
        for length in self.lengths:
            starts.append(position)
            position += length
        return tuple(starts)

    @property
    def total_length(self) -> int:
        """Tire length ``T`` in units."""
        return sum(self.lengths)


class ValidityReport(msgspec.Struct, frozen=True):
    """
    Per-constraint outcome of :func:`validate_sequence`.

    Adjacency and run-length constraints are reported both cyclically (the
    tire is a circle) and linearly (the non-wrapping form of the MILP).
    """

    min_max_occ: bool
    incompatibility: bool
    max_seq: bool
    incompatibility_linear: bool
    max_seq_linear: bool
    violations: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return self.min_max_occ and self.incompatibility and self.max_seq

    @property
    def valid_linear(self) -> bool:
        return self.min_max_occ and self.incompatibility_linear and self.max_seq_linear

    @property
    def cyclic(self) -> bool:
        """True when a violation only appears across the wrap from last to first pitch."""
        return self.valid_linear and not self.valid


def _to_fraction(value: RatioLike) -> Fraction:
    if isinstance(value, float):
        return Fraction(value).limit_denominator(DENOMINATOR_BOUND)
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise _errors.ValidationError(f"invalid ratio {value!r}") from None


def derive_unit(ratios: _Sequence[RatioLike]) -> tuple[Fraction, tuple[int, ...]]:
    """
    Reduce relative pitch lengths to integers.

    Parameters
    ----------
    ratios : Sequence of Fraction, int, float or str
        Relative pitch lengths, strictly increasing. Floats are read as
        rationals with a denominator of at most ``10**6``.

    Returns
    -------
    tuple[Fraction, tuple[int, ...]]
        The unit ``u`` (largest rational dividing every ratio) and the
        lengths ``ratio / u``.

    Raises
    ------
    ValidationError
        If the ratios are empty, non-positive or not strictly increasing.
    """
    if not ratios:
        raise _errors.ValidationError("empty ratio list")
    values = [_to_fraction(ratio) for ratio in ratios]
    if values[0] <= 0:
        raise _errors.ValidationError(f"ratios must be positive: {list(map(str, values))}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise _errors.ValidationError(
            f"ratios must be strictly increasing: {list(map(str, values))}"
        )
    common = math.lcm(*(value.denominator for value in values))
    scaled = [value.numerator * (common // value.denominator) for value in values]
    divisor = math.gcd(*scaled)
    unit = Fraction(divisor, common)
    return unit, tuple(n // divisor for n in scaled)


def make_catalog(
    ratios: _Sequence[RatioLike],
    height: float = 100.0,
    groove: float = 0.1,
) -> PitchCatalog:
    unit, lengths = derive_unit(ratios)
    return PitchCatalog(
        ratios=tuple(length * unit for length in lengths),
        lengths=lengths,
        unit=unit,
        height=float(height),
        groove=float(groove),
    )


def standard_catalog() -> PitchCatalog:
    """Ratios 1, 1.25 and 1.5 (lengths 4, 5, 6), ``h = 100``, ``q = 0.1``."""
    return make_catalog(("1", "1.25", "1.5"), 100.0, 0.1)


def _per_type(value: int | _Sequence[int | None] | None, r: int, default: int | None):
    if value is None or isinstance(value, int):
        return (default if value is None else value,) * r
    return tuple(value)


def make_instance(
    catalog: PitchCatalog,
    n_pitches: int,
    min_occ: int | _Sequence[int] | None = None,
    max_occ: int | _Sequence[int] | None = None,
    max_seq: int | _Sequence[int | None] | None = None,
    incompatible: _Iterable[tuple[int, int]] = (),
    harmonics: int | None = None,
) -> Instance:
    """
    Build an instance, broadcasting scalar bounds to every pitch type.

    Parameters
    ----------
    catalog : PitchCatalog
        Pitch types.
    n_pitches : int
        Number of pitches ``N``.
    min_occ, max_occ : int or Sequence[int], optional
        Occurrence window per type. Default to ``0`` and ``N``.
    max_seq : int or Sequence[int | None], optional
        Longest same-type run per type. Defaults to unbounded.
    incompatible : Iterable[tuple[int, int]], optional
        Forbidden ordered adjacencies.
    harmonics : int, optional
        Fourier truncation ``K``. Defaults to ``floor(1.5 N)``, capped at 200.
    """
    r = catalog.r
    return Instance(
        catalog=catalog,
        n_pitches=n_pitches,
        min_occ=_per_type(min_occ, r, 0),
        max_occ=_per_type(max_occ, r, n_pitches),
        max_seq=_per_type(max_seq, r, None),
        incompatible=tuple(sorted(set(incompatible))),
        harmonics=harmonics or 0,
    )


def standard_instance(n_pitches: int, min_occ: int, max_occ: int) -> Instance:
    """The instance ``(N, minOcc, maxOcc)`` over :func:`standard_catalog`."""
    return make_instance(standard_catalog(), n_pitches, min_occ, max_occ)


def extreme_pair_incompatibility(r: int) -> tuple[tuple[int, int], ...]:
    """The shortest and the longest pitch types may not be neighbors."""
    return ((1, r), (r, 1))


def make_sequence(types: _Iterable[int], catalog: PitchCatalog) -> PitchSequence:
    types = tuple(int(t) for t in types)
    for pitch_type in types:
        if not 1 <= pitch_type <= catalog.r:
            raise _errors.SequenceFormatError(f"pitch type {pitch_type} outside 1..{catalog.r}")
    return PitchSequence(types, tuple(catalog.lengths[t - 1] for t in types))


def parse_sequence(text: str, catalog: PitchCatalog) -> PitchSequence:
    """
    Parse a sequence written as type digits (``"1311323331"``) or as a comma
    separated list (``"1,3,11,2"``) when there are more than nine types.

    Raises
    ------
    SequenceFormatError
        If the text is empty, holds other characters, or names an unknown type.
    """
    text = text.strip()
    if not text:
        raise _errors.SequenceFormatError("empty sequence string")
    tokens = text.split(",") if "," in text else list(text)
    try:
        types = [int(token) for token in tokens]
    except ValueError:
        raise _errors.SequenceFormatError(f"malformed sequence {text!r}") from None
    return make_sequence(types, catalog)


def format_sequence(seq: PitchSequence) -> str:
    if max(seq.types) <= 9:
        return "".join(map(str, seq.types))
    return ",".join(map(str, seq.types))


def rotations(seq: PitchSequence) -> list[PitchSequence]:
    n = len(seq)
    return [
        PitchSequence(seq.types[s:] + seq.types[:s], seq.lengths[s:] + seq.lengths[:s])
        for s in range(n)
    ]


def reversed_sequence(seq: PitchSequence) -> PitchSequence:
    return PitchSequence(seq.types[::-1], seq.lengths[::-1])


def canonical_form(seq: PitchSequence, reflect: bool = True) -> PitchSequence:
    """
    Lexicographically smallest representative of a sequence's symmetry class.

    Parameters
    ----------
    seq : PitchSequence
        Any nonempty sequence.
    reflect : bool, optional
        Also consider the rotations of the reversed sequence. With ``False``
        the class is the rotation class only; this is the one the noise is
        invariant under, since reversing a tire also moves every groove to
        the front of its pitch.

    Returns
    -------
    PitchSequence
        The minimal representative; equal for equivalent sequences.
    """
    candidates = rotations(seq)
    if reflect:
        candidates += rotations(reversed_sequence(seq))
    return min(candidates, key=lambda candidate: candidate.types)


def _longest_runs(types: _Sequence[int], cyclic: bool) -> dict[int, int]:
    n = len(types)
    longest: dict[int, int] = {}
    if cyclic and all(t == types[0] for t in types):
        return {types[0]: n}
    # start scanning right after a type change so no cyclic run is split
    offset = 0
    if cyclic:
        offset = next(i for i in range(n) if types[i] != types[i - 1])
    run = 0
    previous = None
    for step in range(n):
        current = types[(offset + step) % n]
        run = run + 1 if current == previous else 1
        previous = current
        longest[current] = max(longest.get(current, 0), run)
    return longest


def _forbidden_adjacencies(
    types: _Sequence[int], forbidden: set[tuple[int, int]], cyclic: bool
) -> list[int]:
    n = len(types)
    last = n if cyclic else n - 1
    return [m for m in range(last) if (types[m], types[(m + 1) % n]) in forbidden]


def validate_sequence(seq: PitchSequence, inst: Instance) -> ValidityReport:
    """
    Check a sequence against the industrial constraints of an instance.

    Returns
    -------
    ValidityReport
        Pass/fail per constraint and a readable list of violations.
    """
    violations: list[str] = []
    r = inst.catalog.r

    occurrences = [seq.types.count(p) for p in range(1, r + 1)]
    min_max_occ = len(seq) == inst.n_pitches
    if not min_max_occ:
        violations.append(f"sequence has {len(seq)} pitches, instance requires {inst.n_pitches}")
    for p, count in enumerate(occurrences, start=1):
        if not inst.min_occ[p - 1] <= count <= inst.max_occ[p - 1]:
            min_max_occ = False
            violations.append(
                f"ctMinMaxOcc: type {p} occurs {count} times, "
                f"window [{inst.min_occ[p - 1]}, {inst.max_occ[p - 1]}]"
            )

    forbidden = set(inst.incompatible)
    linear_hits = _forbidden_adjacencies(seq.types, forbidden, cyclic=False)
    cyclic_hits = _forbidden_adjacencies(seq.types, forbidden, cyclic=True)
    for m in cyclic_hits:
        a, b = seq.types[m], seq.types[(m + 1) % len(seq)]
        where = "wrap" if m == len(seq) - 1 else f"position {m + 1}"
        violations.append(f"ctIncompatibility: type {b} follows type {a} at {where}")

    def runs_ok(cyclic: bool) -> bool:
        ok = True
        for p, run in _longest_runs(seq.types, cyclic).items():
            bound = inst.max_seq[p - 1] if 1 <= p <= r else None
            if bound is not None and run > bound:
                ok = False
                if cyclic:
                    violations.append(f"ctMaxSeq: run of {run} pitches of type {p} > {bound}")
        return ok

    max_seq = runs_ok(cyclic=True)
    max_seq_linear = runs_ok(cyclic=False)

    return ValidityReport(
        min_max_occ=min_max_occ,
        incompatibility=not cyclic_hits,
        max_seq=max_seq,
        incompatibility_linear=not linear_hits,
        max_seq_linear=max_seq_linear,
        violations=tuple(violations),
    )
