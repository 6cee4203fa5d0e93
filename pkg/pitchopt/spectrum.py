"""
Fourier spectra of tire profiles.

A one-track profile is a step function: every pitch is elevated at height
``h`` over ``(1 - q)`` of its length and grooved over the remaining ``q``.
Its Fourier coefficients have closed forms, so nothing here samples or
integrates numerically. Phases are reduced modulo the tire length before any
trigonometric evaluation.
"""
import csv
import logging
import math
import os
import threading
from collections.abc import Sequence as _Sequence

import msgspec
import numpy as np
import numpy.typing as npt

from pitchopt import _enums, _errors
from pitchopt.pitch import Instance, PitchCatalog, PitchSequence

__all__ = (
    "Spectrum",
    "NoisePeak",
    "LengthTable",
    "ContributionTables",
    "approx_noise",
    "batch_approx_noise",
    "batch_approx_noise_over_rotations",
    "batch_exact_noise",
    "batch_harmonics",
    "batch_rows",
    "contribution_tables",
    "decay_bound",
    "dirac_spectrum",
    "exact_noise",
    "pitch_contribution",
    "profile_spectrum",
    "sandwich_ratio",
    "write_plot_script",
    "write_spectrum_csv",
)

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

TWO_PI = 2.0 * math.pi

MAX_BATCH_ELEMENTS = 1 << 21
"""Upper bound on ``rows * N * K`` for one vectorized evaluation."""


class Spectrum(msgspec.Struct, frozen=True):
    """
    Fourier coefficients of a periodic profile for ``k = 0..K``.

    All arrays are indexed by ``k``. ``coeff_b[0]`` is always 0 and
    ``coeff_a[0]`` is twice the mean value of the profile.
    """

    tire_length: int
    coeff_a: FloatArray
    coeff_b: FloatArray
    modulus: FloatArray
    """``sqrt(a_k^2 + b_k^2)``, that is ``2|c_k|``."""

    @property
    def harmonics(self) -> int:
        return len(self.coeff_a) - 1

    @property
    def mean(self) -> float:
        return float(self.coeff_a[0]) / 2.0

    @property
    def c_modulus(self) -> FloatArray:
        """``|c_k|``."""
        return self.modulus / 2.0


class NoisePeak(msgspec.Struct, frozen=True):
    """The largest harmonic of a spectrum under one noise measure."""

    value: float
    harmonic: int


def _freeze(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def _make_spectrum(tire_length: int, a: FloatArray, b: FloatArray) -> Spectrum:
    return Spectrum(
        tire_length=tire_length,
        coeff_a=_freeze(a),
        coeff_b=_freeze(b),
        modulus=_freeze(np.hypot(a, b)),
    )


def _phasors(positions: FloatArray, tire_lengths: FloatArray, K: int) -> npt.NDArray[np.complex128]:
    """
    ``exp(2*pi*i*k*x/T)`` for every position ``x`` and ``k = 1..K``.

    ``positions`` has shape ``(B, N)``, ``tire_lengths`` shape ``(B,)``; the
    result has shape ``(B, N, K)``.
    """
    k = np.arange(1, K + 1, dtype=np.float64)
    periods = tire_lengths[:, None, None]
    reduced = np.mod(positions[:, :, None] * k, periods)
    return np.exp(1j * TWO_PI * reduced / periods)


def _harmonic_sums(
    lengths: IntArray,
    groove: float,
    K: int,
    side: _enums.GrooveSide,
) -> tuple[npt.NDArray[np.complex128], FloatArray, FloatArray]:
    lengths_f = lengths.astype(np.float64)
    tire_lengths = lengths_f.sum(axis=1)
    starts = np.cumsum(lengths_f, axis=1) - lengths_f
    if side is _enums.GrooveSide.TRAILING:
        rise, fall = starts, starts + (1.0 - groove) * lengths_f
    else:
        rise, fall = starts + groove * lengths_f, starts + lengths_f
    sums = (_phasors(fall, tire_lengths, K) - _phasors(rise, tire_lengths, K)).sum(axis=1)
    return sums, starts, tire_lengths


def _scale(height: float, K: int) -> FloatArray:
    return height / (np.arange(1, K + 1, dtype=np.float64) * math.pi)


def _check_harmonics(K: int) -> None:
    if K < 1:
        raise _errors.ValidationError(f"at least one harmonic is required, got K={K}")


def batch_rows(n_pitches: int, K: int, limit: int) -> int:
    """Rows per batch: at most ``limit`` and under :data:`MAX_BATCH_ELEMENTS` elements."""
    return max(1, min(limit, MAX_BATCH_ELEMENTS // (n_pitches * K)))


def type_lengths(types: npt.ArrayLike, catalog: PitchCatalog) -> IntArray:
    """Map an array of 1-based pitch types to pitch lengths."""
    table = np.asarray(catalog.lengths, dtype=np.int64)
    return table[np.asarray(types, dtype=np.int64) - 1]


def batch_harmonics(
    types: npt.ArrayLike,
    catalog: PitchCatalog,
    K: int,
    groove: _enums.GrooveSide = _enums.GrooveSide.TRAILING,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """
    ``a_k`` and ``b_k`` (``k = 1..K``) for a batch of sequences.

    Parameters
    ----------
    types : array_like of int, shape (B, N)
        1-based pitch types, one sequence per row.
    catalog : PitchCatalog
        Pitch lengths, height and groove.
    K : int
        Number of harmonics.
    groove : GrooveSide, optional
        Groove placement inside each pitch.

    Returns
    -------
    tuple of ndarray
        ``a`` and ``b`` of shape ``(B, K)`` and the tire lengths, shape ``(B,)``.
    """
    _check_harmonics(K)
    sums, _, tire_lengths = _harmonic_sums(
        type_lengths(np.atleast_2d(types), catalog), catalog.groove, K, groove
    )
    scale = _scale(catalog.height, K)
    return scale * sums.imag, -scale * sums.real, tire_lengths


def batch_exact_noise(
    types: npt.ArrayLike, catalog: PitchCatalog, K: int
) -> tuple[FloatArray, IntArray, FloatArray]:
    """
    Exact noise of a batch of sequences.

    Returns
    -------
    tuple of ndarray
        Noise values, the harmonic ``k`` reaching each value, and the tire lengths.
    """
    _check_harmonics(K)
    sums, _, tire_lengths = _harmonic_sums(
        type_lengths(np.atleast_2d(types), catalog), catalog.groove, K, _enums.GrooveSide.TRAILING
    )
    modulus = np.abs(sums) * _scale(catalog.height, K)
    peak = modulus.argmax(axis=1)
    return modulus[np.arange(len(peak)), peak], peak + 1, tire_lengths


def batch_approx_noise(
    types: npt.ArrayLike, catalog: PitchCatalog, K: int
) -> tuple[FloatArray, IntArray, FloatArray]:
    """Approximated noise of a batch of sequences, same layout as :func:`batch_exact_noise`."""
    a, b, tire_lengths = batch_harmonics(types, catalog, K)
    peaks = np.maximum(np.abs(a), np.abs(b))
    peak = peaks.argmax(axis=1)
    return peaks[np.arange(len(peak)), peak], peak + 1, tire_lengths


def batch_approx_noise_over_rotations(
    types: npt.ArrayLike, catalog: PitchCatalog, K: int
) -> tuple[FloatArray, IntArray, IntArray, FloatArray]:
    """
    Smallest approximated noise among all rotations of each sequence.

    Rotating a sequence so that it starts with pitch ``s`` multiplies every
    complex coefficient by ``exp(-2*pi*i*k*S_s/T)``, where ``S_s`` is the
    offset of that pitch, so all rotations come from one evaluation.

    Returns
    -------
    tuple of ndarray
        Best value per row, the rotation shift ``s`` reaching it (the
        rotated sequence is ``types[s:] + types[:s]``), the harmonic of the
        peak and the tire lengths.
    """
    _check_harmonics(K)
    sums, starts, tire_lengths = _harmonic_sums(
        type_lengths(np.atleast_2d(types), catalog), catalog.groove, K, _enums.GrooveSide.TRAILING
    )
    rotated = sums[:, None, :] * np.conj(_phasors(starts, tire_lengths, K))
    scale = _scale(catalog.height, K)
    peaks = np.maximum(np.abs(rotated.imag), np.abs(rotated.real)) * scale
    harmonic = peaks.argmax(axis=2)
    per_rotation = np.take_along_axis(peaks, harmonic[:, :, None], axis=2)[:, :, 0]
    shift = per_rotation.argmin(axis=1)
    rows = np.arange(len(shift))
    return per_rotation[rows, shift], shift, harmonic[rows, shift] + 1, tire_lengths


def profile_spectrum(
    seq: PitchSequence,
    catalog: PitchCatalog,
    K: int,
    groove: _enums.GrooveSide = _enums.GrooveSide.TRAILING,
) -> Spectrum:
    """
    Spectrum of the step profile of a pitch sequence, over its own length ``T``.

    Parameters
    ----------
    seq : PitchSequence
        The pitch sequence; its total length is the period.
    catalog : PitchCatalog
        Supplies the height ``h`` and the groove fraction ``q``.
    K : int
        Highest harmonic.
    groove : GrooveSide, optional
        ``LEADING`` places the groove at the start of every pitch, which is
        the orientation of the mirrored tire.

    Returns
    -------
    Spectrum
        Coefficients for ``k = 0..K``; ``a_0 = 2h(1 - q)``.

    Raises
    ------
    ValidationError
        If ``K < 1``.
    """
    _check_harmonics(K)
    sums, _, _ = _harmonic_sums(
        np.asarray([seq.lengths], dtype=np.int64), catalog.groove, K, groove
    )
    scale = _scale(catalog.height, K)
    a = np.empty(K + 1)
    b = np.zeros(K + 1)
    a[0] = 2.0 * catalog.height * (1.0 - catalog.groove)
    a[1:] = scale * sums[0].imag
    b[1:] = -scale * sums[0].real
    return _make_spectrum(seq.total_length, a, b)


def exact_noise(spec: Spectrum) -> NoisePeak:
    """``max_k sqrt(a_k^2 + b_k^2)`` over ``k >= 1`` and the harmonic reaching it."""
    k = int(np.argmax(spec.modulus[1:])) + 1
    return NoisePeak(float(spec.modulus[k]), k)


def approx_noise(spec: Spectrum) -> NoisePeak:
    """``max_k max(|a_k|, |b_k|)`` over ``k >= 1`` and the harmonic reaching it."""
    peaks = np.maximum(np.abs(spec.coeff_a[1:]), np.abs(spec.coeff_b[1:]))
    k = int(np.argmax(peaks)) + 1
    return NoisePeak(float(peaks[k - 1]), k)


def sandwich_ratio(spec: Spectrum) -> float:
    """Exact over approximated noise; lies in ``[1, sqrt(2)]`` whenever defined."""
    approx = approx_noise(spec).value
    return exact_noise(spec).value / approx if approx > 0 else math.nan


def decay_bound(n_pitches: int, height: float, K: int) -> FloatArray:
    """Upper bound ``2Nh/(k*pi)`` of ``2|c_k|`` for ``k = 0..K`` (infinite at ``k = 0``)."""
    bound = np.full(K + 1, np.inf)
    bound[1:] = 2.0 * n_pitches * _scale(height, K)
    return bound


def dirac_spectrum(positions: _Sequence[int], T: int, K: int) -> Spectrum:
    """
    Spectrum of a train of unit impulses at ``t_1 < ... < t_N`` on a period ``T``.

    ``a_k`` and ``b_k`` are the cosine and sine sums scaled by ``2/T``, so
    ``modulus[k] / 2`` is ``|c_k|``.

    Raises
    ------
    ValidationError
        If positions are not strictly increasing inside ``[0, T)``.
    """
    _check_harmonics(K)
    if T < 1:
        raise _errors.ValidationError(f"period must be positive, got T={T}")
    points = np.asarray(positions, dtype=np.float64)
    if points.ndim != 1 or len(points) == 0:
        raise _errors.ValidationError("at least one impulse position is required")
    if np.any(np.diff(points) <= 0) or points[0] < 0 or points[-1] >= T:
        raise _errors.ValidationError(f"positions must increase strictly inside [0, {T})")
    phasors = _phasors(points[None, :], np.asarray([float(T)]), K)[0].sum(axis=0)
    a = np.empty(K + 1)
    b = np.zeros(K + 1)
    a[0] = 2.0 * len(points) / T
    a[1:] = 2.0 * phasors.real / T
    b[1:] = 2.0 * phasors.imag / T
    return _make_spectrum(T, a, b)


def pitch_contribution(
    tire_length: int,
    starts: npt.ArrayLike,
    length: int,
    catalog: PitchCatalog,
    K: int,
) -> tuple[FloatArray, FloatArray]:
    """
    Contribution of a single pitch to ``a_k`` and ``b_k`` on a tire of length ``T``.

    Parameters
    ----------
    tire_length : int
        The period ``T``.
    starts : array_like of int
        1-based start units of the pitch.
    length : int
        Reduced length of the pitch.
    catalog : PitchCatalog
        Supplies ``h`` and ``q``.
    K : int
        Highest harmonic.

    Returns
    -------
    tuple of ndarray
        Arrays of shape ``(K + 1, len(starts))``. Row 0 of the ``a`` part is
        ``(1 - q) h l / T``, row 0 of the ``b`` part is 0.
    """
    offsets = np.atleast_1d(np.asarray(starts, dtype=np.float64)) - 1.0
    period = np.asarray([float(tire_length)])
    rise = _phasors(offsets[None, :], period, K)[0]
    fall = _phasors(offsets[None, :] + (1.0 - catalog.groove) * length, period, K)[0]
    delta = (fall - rise).T
    scale = _scale(catalog.height, K)[:, None]
    a = np.empty((K + 1, len(offsets)))
    b = np.zeros((K + 1, len(offsets)))
    a[0] = (1.0 - catalog.groove) * catalog.height * length / tire_length
    a[1:] = scale * delta.imag
    b[1:] = -scale * delta.real
    return a, b


class LengthTable(msgspec.Struct, frozen=True):
    """
    Contribution tables for one tire length ``T_j``.

    ``a[k, i - 1, p - 1]`` is the contribution to ``a_k`` of a pitch of type
    ``p`` starting at unit ``i``; entries for starts beyond ``T_j - l_p + 1``
    are NaN.
    """

    j: int
    tire_length: int
    a: FloatArray
    b: FloatArray


class ContributionTables:
    """
    Per-pitch contributions ``A[k][j][i][p]`` and ``B[k][j][i][p]`` of an instance.

    Tables are built per trailing-unit count ``j`` on first access and cached.
    """

    __slots__ = ("_instance", "_tables", "_lock")

    def __init__(self, instance: Instance) -> None:
        self._instance = instance
        self._tables: dict[int, LengthTable] = {}
        self._lock = threading.Lock()

    @property
    def instance(self) -> Instance:
        return self._instance

    def at(self, j: int) -> LengthTable:
        """
        Raises
        ------
        TrailingUnitsError
            If ``j`` is outside ``L``.
        """
        tire_length = self._instance.tire_length(j)
        with self._lock:
            table = self._tables.get(j)
        if table is None:
            table = self._build(j, tire_length)
            with self._lock:
                self._tables.setdefault(j, table)
        return table

    def _build(self, j: int, tire_length: int) -> LengthTable:
        catalog = self._instance.catalog
        K = self._instance.K
        a = np.full((K + 1, tire_length, catalog.r), np.nan)
        b = np.full((K + 1, tire_length, catalog.r), np.nan)
        for p, length in enumerate(catalog.lengths):
            last = tire_length - length + 1
            if last < 1:
                continue
            a[:, :last, p], b[:, :last, p] = pitch_contribution(
                tire_length, np.arange(1, last + 1), length, catalog, K
            )
        logger.debug("built contribution table j=%d (T=%d, K=%d)", j, tire_length, K)
        return LengthTable(j, tire_length, _freeze(a), _freeze(b))

    def A(self, k: int, j: int, i: int, p: int) -> float:
        """Contribution to ``a_k`` (``k >= 0``) of type ``p`` starting at unit ``i``."""
        return float(self.at(j).a[k, i - 1, p - 1])

    def B(self, k: int, j: int, i: int, p: int) -> float:
        """Contribution to ``b_k`` (``k >= 1``) of type ``p`` starting at unit ``i``."""
        return float(self.at(j).b[k, i - 1, p - 1])


def contribution_tables(inst: Instance) -> ContributionTables:
    return ContributionTables(inst)


def write_spectrum_csv(spec: Spectrum, path: str | os.PathLike[str]) -> None:
    """Write ``k, a_k, b_k, modulus`` with one row per harmonic ``k = 0..K``."""
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(("k", "a_k", "b_k", "modulus"))
        for k in range(spec.harmonics + 1):
            writer.writerow(
                (k, repr(float(spec.coeff_a[k])), repr(float(spec.coeff_b[k])),
                 repr(float(spec.modulus[k])))
            )
    logger.info("wrote spectrum to %s", path)


def write_plot_script(
    csv_path: str | os.PathLike[str],
    script_path: str | os.PathLike[str],
    title: str = "",
) -> None:
    """Write a gnuplot script drawing the modulus column of a spectrum CSV."""
    script = (
        "set datafile separator ','\n"
        f"set title {title!r}\n"
        "set xlabel 'harmonic k'\n"
        "set ylabel 'sqrt(a_k^2 + b_k^2)'\n"
        "set style fill solid 0.6\n"
        "set boxwidth 0.8\n"
        f"plot '{os.fspath(csv_path)}' every ::2 using 1:4 with boxes notitle\n"
    )
    with open(script_path, "w", encoding="utf-8") as file:
        file.write(script)
