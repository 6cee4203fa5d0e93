"""
File formats: JSON documents, instance files and CSV tables.

Instance files are flat ``key = value`` text, one key per line, ``#`` starting
a comment::

    # (10, 1, 8) over the standard catalog
    ratios = 1, 1.25, 1.5
    height = 100
    groove = 0.1
    N = 10
    minOcc = 1            # one value applies to every type
    maxOcc = 8
    maxSeq = -, 3, inf    # "-" and "inf" leave a type unbounded
    incompatible = 1-3, 3-1
    K = 30
    ga.population_size = 300

Only ``ratios`` and ``N`` are required. Keys starting with ``ga.`` are
genetic-algorithm settings and are kept apart from the instance.
"""
import csv
import fractions
import logging
import os
from collections.abc import Iterable as _Iterable
from collections.abc import Sequence as _Sequence
from typing import Any

import msgspec
import numpy as np

from pitchopt import _errors
from pitchopt.pitch import Instance, make_catalog, make_instance

__all__ = ()

logger = logging.getLogger(__name__)

_UNBOUNDED = frozenset(("-", "inf", "none"))
_LIST_KEYS = frozenset(("ratios", "minOcc", "maxOcc", "maxSeq"))
_GA_PREFIX = "ga."


def _enc_hook(obj: Any) -> Any:
    if isinstance(obj, fractions.Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise NotImplementedError(f"Objects of type {type(obj).__name__} are not supported")


encoder = msgspec.json.Encoder(enc_hook=_enc_hook)


def to_json(obj: Any) -> bytes:
    return msgspec.json.format(encoder.encode(obj), indent=2)


def write_json(obj: Any, path: str | os.PathLike[str]) -> None:
    with open(path, "wb") as file:
        file.write(to_json(obj))
        file.write(b"\n")
    logger.info("wrote %s", os.fspath(path))


def write_csv(
    path: str | os.PathLike[str],
    header: _Sequence[str],
    rows: _Iterable[_Sequence[Any]],
) -> int:
    """Write a header and rows; returns the number of rows written."""
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.info("wrote %d rows to %s", count, os.fspath(path))
    return count


def format_minsec(seconds: float) -> str:
    """``125.4`` -> ``"2:05"``."""
    minutes, rest = divmod(int(round(seconds)), 60)
    return f"{minutes}:{rest:02d}"


class InstanceFile(
    msgspec.Struct,
    forbid_unknown_fields=True,
    rename={
        "n_pitches": "N",
        "min_occ": "minOcc",
        "max_occ": "maxOcc",
        "max_seq": "maxSeq",
        "harmonics": "K",
    },
):
    """The contents of an instance file, before any domain validation."""

    ratios: list[str]
    n_pitches: int
    height: float = 100.0
    groove: float = 0.1
    min_occ: list[int] | None = None
    max_occ: list[int] | None = None
    max_seq: list[int | None] | None = None
    incompatible: list[tuple[int, int]] = []
    harmonics: int = 0
    ga: dict[str, str] = {}
    """Genetic-algorithm settings, keyed without the ``ga.`` prefix."""

    def to_instance(self) -> Instance:
        """
        Build the domain instance.

        Raises
        ------
        ValidationError
            If the values are out of range.
        """
        catalog = make_catalog(self.ratios, self.height, self.groove)

        def broadcast(values: list[Any] | None) -> Any:
            if values is not None and len(values) == 1:
                return values[0] if values[0] is not None else [None] * catalog.r
            return values

        return make_instance(
            catalog,
            self.n_pitches,
            broadcast(self.min_occ),
            broadcast(self.max_occ),
            broadcast(self.max_seq),
            self.incompatible,
            self.harmonics or None,
        )


def _parse_value(key: str, raw: str, where: str) -> Any:
    if key == "incompatible":
        pairs: list[list[str]] = []
        for item in filter(None, (part.strip() for part in raw.split(","))):
            a, sep, b = item.partition("-")
            if not sep or not a.strip() or not b.strip():
                raise _errors.InstanceFormatError(
                    f"{where}: expected pairs like '1-3', got {item!r}"
                )
            pairs.append([a.strip(), b.strip()])
        return pairs
    if key in _LIST_KEYS:
        items = [part.strip() for part in raw.split(",")]
        if not all(items):
            raise _errors.InstanceFormatError(f"{where}: empty item in {raw!r}")
        if key == "ratios":
            return items
        return [None if item.lower() in _UNBOUNDED else item for item in items]
    return raw


def parse_instance_text(text: str, source: str = "<string>") -> InstanceFile:
    """
    Parse the instance-file grammar.

    Raises
    ------
    InstanceFormatError
        On syntax errors, unknown or repeated keys, and values of the wrong type.
    """
    raw: dict[str, Any] = {}
    ga: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{number}"
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise _errors.InstanceFormatError(f"{where}: expected 'key = value', got {line!r}")
        if not value:
            raise _errors.InstanceFormatError(f"{where}: missing value for {key!r}")
        if key.startswith(_GA_PREFIX):
            ga[key.removeprefix(_GA_PREFIX)] = value
            continue
        if key in raw:
            raise _errors.InstanceFormatError(f"{where}: {key!r} given twice")
        raw[key] = _parse_value(key, value, where)
    if ga:
        raw["ga"] = ga
    try:
        return msgspec.convert(raw, InstanceFile, strict=False)
    except msgspec.ValidationError as error:
        raise _errors.InstanceFormatError(f"{source}: {error}") from None


def read_instance_file(path: str | os.PathLike[str]) -> InstanceFile:
    try:
        with open(path, encoding="utf-8") as file:
            text = file.read()
    except OSError as error:
        raise _errors.InstanceFormatError(
            f"cannot read {os.fspath(path)}: {error.strerror}"
        ) from None
    return parse_instance_text(text, os.fspath(path))


def load_instance(path: str | os.PathLike[str]) -> Instance:
    return read_instance_file(path).to_instance()


def format_instance(inst: Instance) -> str:
    """Render an instance in the instance-file grammar."""

    def join(values: _Iterable[object]) -> str:
        return ", ".join("-" if value is None else str(value) for value in values)

    catalog = inst.catalog
    lines = [
        f"ratios = {join(catalog.ratios)}",
        f"height = {catalog.height:g}",
        f"groove = {catalog.groove:g}",
        f"N = {inst.n_pitches}",
        f"minOcc = {join(inst.min_occ)}",
        f"maxOcc = {join(inst.max_occ)}",
        f"maxSeq = {join(inst.max_seq)}",
    ]
    if inst.incompatible:
        lines.append("incompatible = " + ", ".join(f"{a}-{b}" for a, b in inst.incompatible))
    lines.append(f"K = {inst.K}")
    return "\n".join(lines) + "\n"
