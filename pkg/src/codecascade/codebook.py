"""Multi-length binary code galleries: bit packing, container format, validation.

Packed layout is LSB-first, row-major: for item ``i`` and code bit ``j``, the
bit lives in 64-bit word ``j // 64`` at position ``j % 64``. Words are
little-endian uint64 and rows are padded to a whole word with zero bits.

Bit convention: a stored 1-bit represents code value +1 and a 0-bit represents
-1. Hamming distances are invariant to this choice; it is fixed here so that
codebooks written by different producers interoperate.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CTFC"
FORMAT_VERSION = 1
WORD_BITS = 64

#: Gallery entries carrying this person id are "junk" and never counted.
JUNK_PERSON_ID = 0xFFFFFFFF


class CodebookFormatError(ValueError):
    """A codebook or threshold file is unreadable: bad magic, version, truncation."""


class InvariantViolation(ValueError):
    """Structurally parseable data that breaks a declared invariant."""


def words_per_row(length: int) -> int:
    """Number of uint64 words holding one code of `length` bits."""
    return (length + WORD_BITS - 1) // WORD_BITS


@dataclass(frozen=True)
class CodeLengthSchedule:
    """Ordered code lengths l_1 < l_2 < ... < l_N, each a multiple of 8 bits."""

    lengths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(l) for l in self.lengths))
        if len(self.lengths) < 1:
            raise InvariantViolation("schedule needs at least one length")
        for l in self.lengths:
            if l <= 0:
                raise InvariantViolation(f"code length {l} not positive")
            if l % 8 != 0:
                raise InvariantViolation(f"code length {l} not a multiple of 8")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise InvariantViolation(f"lengths {self.lengths} not strictly increasing")

    @property
    def n_levels(self) -> int:
        return len(self.lengths)

    def __iter__(self):
        return iter(self.lengths)

    def __len__(self) -> int:
        return len(self.lengths)


class PackedCodeMatrix:
    """Bit-packed binary codes of one fixed length, one row per item."""

    __slots__ = ("words", "length", "n_items")

    def __init__(self, words: np.ndarray, length: int):
        words = np.asarray(words)
        if words.dtype != np.uint64 or words.ndim != 2:
            raise InvariantViolation("packed words must be a 2-D uint64 array")
        if length <= 0 or length % 8 != 0:
            raise InvariantViolation(f"code length {length} not a positive multiple of 8")
        if words.shape[1] != words_per_row(length):
            raise InvariantViolation(
                f"row stride {words.shape[1]} words does not match length {length}"
            )
        self.words = words
        self.length = int(length)
        self.n_items = int(words.shape[0])

    def row(self, i: int) -> np.ndarray:
        return self.words[i]

    def take(self, indices: np.ndarray) -> "PackedCodeMatrix":
        """Gather a row subset into a new matrix (copies the selected rows)."""
        return PackedCodeMatrix(self.words[indices], self.length)

    def padding_violations(self) -> np.ndarray:
        """Row indices whose padding bits beyond `length` are nonzero."""
        tail_bits = self.length % WORD_BITS
        if tail_bits == 0:
            return np.empty(0, dtype=np.int64)
        mask = np.uint64(~((1 << tail_bits) - 1) & 0xFFFFFFFFFFFFFFFF)
        bad = (self.words[:, -1] & mask) != 0
        return np.flatnonzero(bad)

    def __eq__(self, other):
        if not isinstance(other, PackedCodeMatrix):
            return NotImplemented
        return self.length == other.length and np.array_equal(self.words, other.words)


def pack_codes(bits, length: int) -> PackedCodeMatrix:
    """Pack an (n_items, length) matrix of {0,1} into LSB-first uint64 words."""
    bits = np.asarray(bits)
    if length <= 0 or length % 8 != 0:
        raise InvariantViolation(f"code length {length} not a positive multiple of 8")
    if bits.ndim != 2 or bits.shape[1] != length:
        raise InvariantViolation(f"bits must be 2-D with {length} columns, got {bits.shape}")
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise InvariantViolation("bits must contain only 0 and 1")
    n = bits.shape[0]
    wpr = words_per_row(length)
    packed_bytes = np.packbits(bits.astype(np.uint8), axis=1, bitorder="little")
    row_bytes = np.zeros((n, wpr * 8), dtype=np.uint8)
    row_bytes[:, : length // 8] = packed_bytes
    words = row_bytes.view("<u8").astype(np.uint64, copy=False).reshape(n, wpr)
    return PackedCodeMatrix(words, length)


def unpack_codes(matrix: PackedCodeMatrix) -> np.ndarray:
    """Inverse of pack_codes: (n_items, length) uint8 matrix of {0,1}."""
    if matrix.n_items == 0:
        return np.zeros((0, matrix.length), dtype=np.uint8)
    le_words = np.ascontiguousarray(matrix.words).astype("<u8", copy=False)
    row_bytes = le_words.view(np.uint8).reshape(matrix.n_items, -1)
    bits = np.unpackbits(row_bytes, axis=1, bitorder="little")
    return bits[:, : matrix.length]


class MultiLevelCodebook:
    """Aligned packed code matrices of increasing lengths plus item labels."""

    __slots__ = ("schedule", "levels", "person_ids", "camera_ids")

    def __init__(self, schedule: CodeLengthSchedule, levels, person_ids, camera_ids):
        self.schedule = schedule
        self.levels = list(levels)
        self.person_ids = np.ascontiguousarray(person_ids, dtype=np.uint32)
        self.camera_ids = np.ascontiguousarray(camera_ids, dtype=np.uint16)
        problems = validate(self)
        if problems:
            raise InvariantViolation("; ".join(problems))

    @property
    def n_items(self) -> int:
        return self.levels[0].n_items if self.levels else 0

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def __eq__(self, other):
        if not isinstance(other, MultiLevelCodebook):
            return NotImplemented
        return (
            self.schedule == other.schedule
            and self.levels == other.levels
            and np.array_equal(self.person_ids, other.person_ids)
            and np.array_equal(self.camera_ids, other.camera_ids)
        )


def validate(cb: MultiLevelCodebook) -> list[str]:
    """Check every structural invariant; returns human-readable violations."""
    problems: list[str] = []
    if len(cb.levels) != cb.schedule.n_levels:
        problems.append(
            f"{len(cb.levels)} levels but schedule declares {cb.schedule.n_levels}"
        )
    counts = {m.n_items for m in cb.levels}
    if len(counts) > 1:
        problems.append(f"levels disagree on item count: {sorted(counts)}")
    for k, (matrix, length) in enumerate(zip(cb.levels, cb.schedule)):
        if matrix.length != length:
            problems.append(f"level {k} packs {matrix.length} bits, schedule says {length}")
        bad_rows = matrix.padding_violations()
        if bad_rows.size:
            problems.append(f"level {k} row {bad_rows[0]} has nonzero padding bits")
    n = cb.levels[0].n_items if cb.levels else 0
    if len(cb.person_ids) != n:
        problems.append(f"{len(cb.person_ids)} person_ids for {n} items")
    if len(cb.camera_ids) != n:
        problems.append(f"{len(cb.camera_ids)} camera_ids for {n} items")
    return problems


def save_codebook(cb: MultiLevelCodebook, path) -> None:
    """Write the binary container (all fields little-endian)."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HH", FORMAT_VERSION, cb.schedule.n_levels))
        f.write(struct.pack(f"<{cb.schedule.n_levels}I", *cb.schedule))
        f.write(struct.pack("<Q", cb.n_items))
        for matrix in cb.levels:
            f.write(np.ascontiguousarray(matrix.words).astype("<u8", copy=False).tobytes())
        f.write(cb.person_ids.astype("<u4", copy=False).tobytes())
        f.write(cb.camera_ids.astype("<u2", copy=False).tobytes())


def _read_exact(f, nbytes: int, what: str) -> bytes:
    data = f.read(nbytes)
    if len(data) != nbytes:
        raise CodebookFormatError(f"truncated file: expected {nbytes} bytes for {what}")
    return data


def load_codebook(path) -> MultiLevelCodebook:
    """Read and fully validate a codebook container."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise CodebookFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version, n_levels = struct.unpack("<HH", _read_exact(f, 4, "header"))
        if version != FORMAT_VERSION:
            raise CodebookFormatError(f"unsupported format version {version}")
        lengths = struct.unpack(f"<{n_levels}I", _read_exact(f, 4 * n_levels, "lengths"))
        try:
            schedule = CodeLengthSchedule(lengths)
        except InvariantViolation as e:
            raise InvariantViolation(f"schedule in file: {e}") from e
        (n_items,) = struct.unpack("<Q", _read_exact(f, 8, "item count"))
        levels = []
        for k, length in enumerate(schedule):
            nbytes = n_items * words_per_row(length) * 8
            raw = _read_exact(f, nbytes, f"level {k} payload")
            words = np.frombuffer(raw, dtype="<u8").astype(np.uint64, copy=False)
            levels.append(PackedCodeMatrix(words.reshape(n_items, -1), length))
        person_ids = np.frombuffer(_read_exact(f, 4 * n_items, "person_ids"), dtype="<u4")
        camera_ids = np.frombuffer(_read_exact(f, 2 * n_items, "camera_ids"), dtype="<u2")
    return MultiLevelCodebook(schedule, levels, person_ids, camera_ids)


@dataclass(frozen=True)
class ThresholdSet:
    """Calibrated distance cutoffs t_2..t_N gating each cascade stage.

    ``thresholds[k-2]`` gates entry to stage k and is applied to the distances
    of the previous level, so it must not exceed ``lengths[k-2]``. The value -1
    is a test-only sentinel meaning "select nothing"; calibration always
    produces non-negative thresholds.
    """

    lengths: tuple[int, ...]
    thresholds: tuple[int, ...]
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(l) for l in self.lengths))
        object.__setattr__(self, "thresholds", tuple(int(t) for t in self.thresholds))
        if self.beta <= 0:
            raise InvariantViolation(f"beta {self.beta} not positive")
        schedule = CodeLengthSchedule(self.lengths)
        if len(self.thresholds) != schedule.n_levels - 1:
            raise InvariantViolation(
                f"{len(self.thresholds)} thresholds for {schedule.n_levels} levels"
            )
        for k, t in enumerate(self.thresholds):
            gate_length = self.lengths[k]
            if t < -1 or t > gate_length:
                raise InvariantViolation(
                    f"threshold t_{k + 2}={t} outside [-1, {gate_length}]"
                )


def save_thresholds(ts: ThresholdSet, path) -> None:
    payload = {
        "beta": ts.beta,
        "lengths": list(ts.lengths),
        "thresholds": list(ts.thresholds),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_thresholds(path) -> ThresholdSet:
    try:
        payload = json.loads(Path(path).read_text())
        return ThresholdSet(
            lengths=tuple(payload["lengths"]),
            thresholds=tuple(payload["thresholds"]),
            beta=float(payload["beta"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise CodebookFormatError(f"unreadable threshold file {path}: {e}") from e
