"""Modification-ratio experiments: how much worse an archive gets when edited locally instead of recompressed."""

import csv
import io
import logging
import zlib
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from statistics import fmean
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from archive_io import compressed_size
from calibrated_entropy import XI_GRID, CalibratedSpec, corpus_file_name, gen_corpus
from local_edit import EditRequest, modify
from lz_end_core import Archive, ArchiveError, decompress, parse


logger = logging.getLogger(__name__)

REPORT_HEADER = ("file", "operation", "payload", "parameter", "mr")

INCREMENTAL_EDITS = 100
EDIT_FRACTION = 0.005
SWEEP_FRACTIONS = tuple(round(0.05 * k, 2) for k in range(1, 20))
SWEEP_TRIALS = 10
VALIDATION_EDITS = 100
VALIDATION_MAX_FRACTION = 0.05

MEDIUM_TARGET_RATIO = 0.5
MEDIUM_TOLERANCE = 0.05
MEDIUM_MIN_SIZE = 200
MEDIUM_TUNING_STEPS = 40


class OracleMismatchError(ArchiveError):
    pass


class PayloadTuningError(ArchiveError):
    pass


class PayloadClass(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class Operation(str, Enum):
    INSERT = "insert"
    DELETE = "delete"
    REPLACE = "replace"


@dataclass(frozen=True)
class MrRecord:
    file: str
    operation: Operation
    payload: PayloadClass
    parameter: float
    mr: float


@dataclass(frozen=True)
class MrSummary:
    per_file: Dict[str, float]
    per_series: Dict[Tuple[str, str, str], float]


def modification_ratio(after: Archive, edited: bytes) -> float:
    """Size of the locally edited archive over the size of a fresh parse of the same text."""
    if decompress(after) != bytes(edited):
        raise OracleMismatchError("locally edited archive does not decode to the edited text")
    return compressed_size(after) / compressed_size(parse(edited))


# ---------------------------------------------------------------------------
# Payloads


def _repeat_sample(size: int, seed: int, fresh: int) -> bytes:
    """`fresh` seeded random bytes, repeated end to end up to `size` bytes."""
    head = np.random.default_rng(seed).bytes(fresh)
    return (head * -(-size // fresh))[:size]


def _payload_ratio(sample: bytes) -> float:
    return compressed_size(parse(sample)) / len(sample)


@lru_cache(maxsize=1024)
def _medium_sample(size: int, seed: int) -> bytes:
    # Compressed size grows with the length of the fresh prefix.
    lo, hi = 1, size
    for _ in range(MEDIUM_TUNING_STEPS):
        if lo > hi:
            break
        fresh = (lo + hi) // 2
        sample = _repeat_sample(size, seed, fresh)
        ratio = _payload_ratio(sample)
        if abs(ratio - MEDIUM_TARGET_RATIO) <= MEDIUM_TOLERANCE:
            logger.debug("medium payload: %d bytes, %d fresh, ratio %.3f", size, fresh, ratio)
            return sample
        if ratio < MEDIUM_TARGET_RATIO:
            lo = fresh + 1
        else:
            hi = fresh - 1
    raise PayloadTuningError(
        f"could not tune a {size}-byte medium payload to ratio {MEDIUM_TARGET_RATIO} +/- {MEDIUM_TOLERANCE}"
    )


def make_payload(kind: Union[PayloadClass, str], size: int, seed: int) -> bytes:
    kind = PayloadClass(kind)
    if size < 0:
        raise ValueError(f"payload size must be >= 0, got {size}")
    if size == 0:
        return b""
    if kind is PayloadClass.LOW:
        return b"a" * size
    if kind is PayloadClass.HIGH:
        return np.random.default_rng(seed).bytes(size)
    if size < MEDIUM_MIN_SIZE:
        raise PayloadTuningError(f"medium payloads need at least {MEDIUM_MIN_SIZE} bytes, got {size}")
    return _medium_sample(size, seed)


# ---------------------------------------------------------------------------
# Experiments


def _rng(seed: int, file_id: str, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(file_id.encode("utf-8")), *keys])


def _items(corpus: Mapping[str, bytes], progress: bool, desc: str):
    for file_id, data in tqdm(list(corpus.items()), desc=desc, unit="file", disable=not progress):
        if not data:
            raise ValueError(f"corpus file {file_id} is empty")
        yield file_id, bytes(data)


def _place(rng: np.random.Generator, operation: Operation, n: int, size: int) -> int:
    if operation is Operation.INSERT:
        return int(rng.integers(0, n + 1))
    return int(rng.integers(0, n - min(size, n) + 1))


def _request(operation: Operation, start: int, size: int, n: int, payload: bytes) -> EditRequest:
    if operation is Operation.INSERT:
        return EditRequest.insertion(start, payload)
    end = min(start + size, n)
    if operation is Operation.DELETE:
        return EditRequest.deletion(start, end)
    return EditRequest.replacement(start, end, payload)


def _operation_index(operation: Operation) -> int:
    return list(Operation).index(operation)


def _usable_payloads(payloads: Sequence[PayloadClass], size: int) -> Tuple[PayloadClass, ...]:
    return tuple(p for p in payloads if p is not PayloadClass.MEDIUM or not 0 < size < MEDIUM_MIN_SIZE)


def run_incremental(
    corpus: Mapping[str, bytes],
    seed: int,
    *,
    edits: int = INCREMENTAL_EDITS,
    fraction: float = EDIT_FRACTION,
    operations: Sequence[Operation] = tuple(Operation),
    payloads: Sequence[PayloadClass] = tuple(PayloadClass),
    progress: bool = False,
) -> List[MrRecord]:
    """Sequences of `edits` edits, each `fraction` of the original file size, one sequence per operation and payload.

    Deletions ignore the payload class; their sequence runs once and is
    reported under every class. Each edit draws a fresh payload.
    """
    records: List[MrRecord] = []
    for file_id, data in _items(corpus, progress, "incremental"):
        size = max(1, round(len(data) * fraction))
        usable = _usable_payloads(payloads, size)
        if len(usable) < len(payloads):
            logger.warning("%s: %d-byte edits are too short for medium payloads, skipping them", file_id, size)
        base = parse(data)
        for operation in operations:
            series = (None,) if operation is Operation.DELETE else usable
            for payload_class in series:
                rng = _rng(seed, file_id, _operation_index(operation))
                payload_seeds = _rng(seed, file_id, _operation_index(operation), 1).integers(2**32, size=edits)
                labels = usable if payload_class is None else (payload_class,)
                archive, text = base, data
                for step in range(edits):
                    payload = b""
                    if payload_class is not None:
                        payload = make_payload(payload_class, size, int(payload_seeds[step]))
                    start = _place(rng, operation, len(text), size)
                    request = _request(operation, start, size, len(text), payload)
                    archive = modify(archive, request)
                    text = request.apply_to(text)
                    mr = modification_ratio(archive, text)
                    records.extend(MrRecord(file_id, operation, label, float(step), mr) for label in labels)
            logger.debug("%s: %s sequences done", file_id, operation.value)
    return records


def run_sizes(
    corpus: Mapping[str, bytes],
    seed: int,
    *,
    fractions: Sequence[float] = SWEEP_FRACTIONS,
    trials: int = SWEEP_TRIALS,
    operations: Sequence[Operation] = tuple(Operation),
    payloads: Sequence[PayloadClass] = tuple(PayloadClass),
    progress: bool = False,
) -> List[MrRecord]:
    """Single edits of each size fraction at random starts, averaged over `trials`."""
    records: List[MrRecord] = []
    for file_id, data in _items(corpus, progress, "sizes"):
        n = len(data)
        if any(len(_usable_payloads(payloads, round(f * n))) < len(payloads) for f in fractions):
            logger.warning("%s: skipping medium payloads shorter than %d bytes", file_id, MEDIUM_MIN_SIZE)
        base = parse(data)
        for operation in operations:
            for f_index, fraction in enumerate(fractions):
                size = round(fraction * n)
                usable = _usable_payloads(payloads, size)
                totals: Dict[PayloadClass, float] = defaultdict(float)
                for trial in range(trials):
                    rng = _rng(seed, file_id, _operation_index(operation), f_index, trial)
                    start = _place(rng, operation, n, size)
                    if operation is Operation.DELETE:
                        request = _request(operation, start, size, n, b"")
                        mr = modification_ratio(modify(base, request), request.apply_to(data))
                        for label in usable:
                            totals[label] += mr
                        continue
                    for label in usable:
                        request = _request(operation, start, size, n, make_payload(label, size, seed))
                        totals[label] += modification_ratio(modify(base, request), request.apply_to(data))
                for label in usable:
                    records.append(MrRecord(file_id, operation, label, fraction, totals[label] / max(trials, 1)))
    return records


def run_positions(
    corpus: Mapping[str, bytes],
    seed: int,
    *,
    positions: Sequence[float] = SWEEP_FRACTIONS,
    fraction: float = EDIT_FRACTION,
    operations: Sequence[Operation] = tuple(Operation),
    payloads: Sequence[PayloadClass] = tuple(PayloadClass),
    progress: bool = False,
) -> List[MrRecord]:
    """One edit of `fraction` of the file starting at each position fraction; position p starts at byte floor(p * n)."""
    records: List[MrRecord] = []
    for file_id, data in _items(corpus, progress, "positions"):
        n = len(data)
        size = max(1, round(n * fraction))
        usable = _usable_payloads(payloads, size)
        if len(usable) < len(payloads):
            logger.warning("%s: %d-byte edits are too short for medium payloads, skipping them", file_id, size)
        base = parse(data)
        for operation in operations:
            for position in positions:
                start = int(position * n)
                if operation is not Operation.INSERT:
                    start = min(start, n - min(size, n))
                if operation is Operation.DELETE:
                    request = _request(operation, start, size, n, b"")
                    mr = modification_ratio(modify(base, request), request.apply_to(data))
                    records.extend(MrRecord(file_id, operation, label, position, mr) for label in usable)
                    continue
                for label in usable:
                    request = _request(operation, start, size, n, make_payload(label, size, seed))
                    mr = modification_ratio(modify(base, request), request.apply_to(data))
                    records.append(MrRecord(file_id, operation, label, position, mr))
    return records


def run_validation(
    corpus: Mapping[str, bytes],
    seed: int,
    *,
    edits: int = VALIDATION_EDITS,
    progress: bool = False,
) -> int:
    """Random edits of random kind, size and position, each checked against the spliced text.

    Returns the number of verified edits.
    """
    verified = 0
    operations = list(Operation)
    for file_id, data in _items(corpus, progress, "validate"):
        rng = _rng(seed, file_id)
        archive, text = parse(data), data
        for step in range(edits):
            n = len(text)
            operation = operations[int(rng.integers(len(operations)))]
            size = int(rng.integers(1, max(1, int(n * VALIDATION_MAX_FRACTION)) + 1))
            start = _place(rng, operation, n, size)
            if rng.random() < 0.5:
                payload = rng.bytes(size)
            else:
                payload = bytes([int(rng.integers(256))]) * size
            request = _request(operation, start, size, n, payload)
            archive = modify(archive, request)
            text = request.apply_to(text)
            if decompress(archive) != text:
                raise OracleMismatchError(
                    f"{file_id}: edit {step} ({operation.value} [{request.i}, {request.j}) +{len(request.payload)}) decoded wrongly"
                )
            verified += 1
    return verified


# ---------------------------------------------------------------------------
# Reporting and corpora


def summarize(records: Iterable[MrRecord]) -> MrSummary:
    per_file: Dict[str, List[float]] = defaultdict(list)
    per_series: Dict[Tuple[str, str, str], List[float]] = defaultdict(list)
    for record in records:
        per_file[record.file].append(record.mr)
        per_series[(record.file, record.operation.value, record.payload.value)].append(record.mr)
    return MrSummary(
        per_file={k: fmean(v) for k, v in sorted(per_file.items())},
        per_series={k: fmean(v) for k, v in sorted(per_series.items())},
    )


def emit_report(records: Iterable[MrRecord]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    ordered = sorted(records, key=lambda r: (r.file, r.operation.value, r.payload.value, r.parameter))
    for record in ordered:
        writer.writerow([
            record.file,
            record.operation.value,
            record.payload.value,
            f"{record.parameter:.6f}",
            f"{record.mr:.6f}",
        ])
    return buffer.getvalue().encode("utf-8")


def load_corpus(directory: Path) -> Dict[str, bytes]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Corpus directory not found: {directory}")
    corpus: Dict[str, bytes] = {}
    for path in sorted(directory.iterdir()):
        if not path.is_file():
            continue
        data = path.read_bytes()
        if not data:
            logger.warning("skipping empty corpus file %s", path.name)
            continue
        corpus[path.name] = data
    return corpus


def calibrated_corpus(
    n_bytes: int,
    count: int,
    seed: int,
    *,
    fir: bool = False,
    xis: Sequence[float] = XI_GRID,
) -> Dict[str, bytes]:
    corpus: Dict[str, bytes] = {}
    for xi in xis:
        spec = CalibratedSpec(n_bytes=n_bytes, xi=xi, fir=fir, seed=seed)
        for index, data in enumerate(gen_corpus(spec, count)):
            corpus[corpus_file_name(xi, index)] = data
    return corpus


def run_experiment(
    experiment: str,
    *,
    corpus_dir: Optional[Path] = None,
    calibrated: bool = False,
    seed: int = 0,
    out: Optional[Path] = None,
    edits: int = INCREMENTAL_EDITS,
    trials: int = SWEEP_TRIALS,
    n_bytes: int = 50000,
    count: int = 10,
    fir: bool = False,
) -> Union[int, List[MrRecord]]:
    if calibrated:
        corpus = calibrated_corpus(n_bytes, count, seed, fir=fir)
    else:
        corpus = load_corpus(corpus_dir)
    if not corpus:
        raise ValueError("No corpus files to evaluate.")
    logger.info("%s over %d files (seed %d)", experiment, len(corpus), seed)

    if experiment == "validate":
        verified = run_validation(corpus, seed, edits=edits, progress=True)
        logger.info("verified %d edits", verified)
        return verified

    if experiment == "incremental":
        records = run_incremental(corpus, seed, edits=edits, progress=True)
    elif experiment == "sizes":
        records = run_sizes(corpus, seed, trials=trials, progress=True)
    elif experiment == "positions":
        records = run_positions(corpus, seed, progress=True)
    else:
        raise ValueError(f"unknown experiment {experiment!r}")

    if out is not None:
        Path(out).write_bytes(emit_report(records))
        logger.info("wrote %d records to %s", len(records), out)
    for file_id, mean in summarize(records).per_file.items():
        logger.info("%s: mean MR %.3f", file_id, mean)
    return records
