"""Edit an LZ-End archive in place: re-encode only the phrases touched by an edit and the phrases that copy from them."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from lz_end_core import (
    Archive,
    ArchiveCorruptionError,
    ArchiveError,
    Phrase,
    extract,
    parse,
)


logger = logging.getLogger(__name__)


class EditArgumentError(ArchiveError):
    pass


@dataclass(frozen=True)
class EditRequest:
    """Remove text[i:j] and put `payload` in its place."""

    i: int
    j: int
    payload: bytes = b""

    @classmethod
    def insertion(cls, at: int, payload: bytes) -> "EditRequest":
        return cls(at, at, bytes(payload))

    @classmethod
    def deletion(cls, start: int, end: int) -> "EditRequest":
        return cls(start, end, b"")

    @classmethod
    def replacement(cls, start: int, end: int, payload: bytes) -> "EditRequest":
        return cls(start, end, bytes(payload))

    @property
    def is_null(self) -> bool:
        return self.i == self.j and not self.payload

    def check(self, n: int) -> None:
        if self.i < 0 or self.i > self.j:
            raise EditArgumentError(f"edit start {self.i} must lie in [0, {self.j}]")
        if self.j > n:
            raise EditArgumentError(f"edit end {self.j} is past the end of the text ({n})")

    def apply_to(self, text: bytes) -> bytes:
        return text[: self.i] + self.payload + text[self.j :]


@dataclass
class EditStats:
    dependent_visits: int = 0
    replacement_reads: int = 0
    pointer_lookups: int = 0
    max_lookup_comparisons: int = 0
    payload_first: int = 0
    payload_count: int = 0
    payload_start: int = 0
    payload_length: int = 0


class TargetSpan(NamedTuple):
    """Target phrases [first, stop) and the symbols [start, end] they cover."""

    first: int
    stop: int
    start: int
    end: int

    @property
    def count(self) -> int:
        return self.stop - self.first

    def covers(self, lo: int, hi: int) -> bool:
        return self.count > 0 and lo <= self.end and hi >= self.start


@dataclass(frozen=True)
class DependentSet:
    ordinals: Tuple[int, ...] = ()

    def __iter__(self) -> Iterator[int]:
        return iter(self.ordinals)

    def __len__(self) -> int:
        return len(self.ordinals)

    def __contains__(self, k: object) -> bool:
        return k in self.ordinals


@dataclass(frozen=True)
class ReplacementTable:
    phrases: Dict[int, Tuple[Phrase, ...]] = field(default_factory=dict)

    def __getitem__(self, k: int) -> Tuple[Phrase, ...]:
        return self.phrases[k]

    def __contains__(self, k: object) -> bool:
        return k in self.phrases

    def __len__(self) -> int:
        return len(self.phrases)

    def growth(self, k: int) -> int:
        """Net phrases added by re-encoding dependent k."""
        return len(self.phrases[k]) - 1


def target_span(archive: Archive, i: int, j: int) -> TargetSpan:
    EditRequest(i, j).check(archive.n)
    boundaries = archive.boundaries
    count = len(archive)
    if j > i:
        first, stop = boundaries.rank(i), boundaries.rank(j - 1) + 1
    elif i < archive.n:
        first = boundaries.rank(i)
        stop = first + 1
    elif count and archive.phrases[-1].last is None:
        # Nothing may follow a final phrase without an innovation, so it is re-encoded with the payload.
        first, stop = count - 1, count
    else:
        return TargetSpan(count, count, archive.n, archive.n - 1)
    return TargetSpan(first, stop, boundaries.start(first), boundaries.select(stop - 1))


def find_dependent_phrases(
    archive: Archive,
    x: int,
    xe: int,
    *,
    scan_from: Optional[int] = None,
    stats: Optional[EditStats] = None,
) -> DependentSet:
    """Phrases at or after `xe` whose source is a target or whose copy window touches the targets."""
    count = len(archive)
    if not 0 <= x <= xe <= count:
        raise EditArgumentError(f"target ordinals [{x}, {xe}) outside [0, {count}]")
    scan_from = xe if scan_from is None else scan_from
    ends = archive.boundaries.ends
    lo = ends[x - 1] + 1 if x else 0
    hi = ends[xe - 1] if xe > x else lo - 1
    found: List[int] = []
    visits = 0
    for k in range(scan_from, count):
        visits += 1
        if k < xe:
            continue
        phrase = archive.phrases[k]
        if phrase.source is None:
            continue
        if x <= phrase.source < xe:
            found.append(k)
            continue
        end = ends[phrase.source]
        if end - phrase.copy_length + 1 <= hi and end >= lo:
            found.append(k)
    if stats is not None:
        stats.dependent_visits += visits
    return DependentSet(tuple(found))


class _Ref(NamedTuple):
    lo: int
    hi: int
    ordinal: int

    @property
    def length(self) -> int:
        return self.hi - self.lo + 1


_Segment = Union[_Ref, int]


def _window_segments(archive: Archive, span: TargetSpan, lo: int, hi: int, stats: EditStats) -> List[_Segment]:
    """Spell text[lo:hi + 1] as references that avoid the target span, plus literal bytes.

    Every range handled here ends at a phrase boundary, so a range outside the
    targets can be copied from the phrase that ends it. Ranges inside the
    targets are replaced by what those phrases themselves copy.
    """
    boundaries = archive.boundaries
    ends = boundaries.ends
    out: List[_Segment] = []
    pending: List[object] = [(lo, hi)]
    while pending:
        item = pending.pop()
        if isinstance(item, int):
            out.append(item)
            continue
        lo, hi = item
        if lo > hi:
            continue
        if not span.covers(lo, hi):
            ordinal = boundaries.rank(hi)
            if ends[ordinal] != hi:
                raise ArchiveCorruptionError(f"window piece [{lo}, {hi}] does not end at a phrase boundary")
            stats.replacement_reads += 1
            out.append(_Ref(lo, hi, ordinal))
            continue
        if lo < span.start:
            pending.append((span.start, hi))
            pending.append((lo, span.start - 1))
            continue
        if hi > span.end:
            pending.append((span.end + 1, hi))
            pending.append((lo, span.end))
            continue
        for k in range(boundaries.rank(hi), boundaries.rank(lo) - 1, -1):
            stats.replacement_reads += 1
            phrase = archive.phrases[k]
            phrase_end = ends[k]
            phrase_start = phrase_end - phrase.length + 1
            if phrase.last is not None:
                pending.append(phrase.last)
            copy_end = phrase_start + phrase.copy_length - 1
            piece_lo = max(lo, phrase_start)
            if piece_lo <= copy_end:
                source_end = ends[phrase.source]
                pending.append((piece_lo + source_end - copy_end, source_end))
    return out


def _merge_refs(segments: Sequence[_Segment]) -> List[_Segment]:
    merged: List[_Segment] = []
    for segment in segments:
        previous = merged[-1] if merged else None
        if isinstance(segment, _Ref) and isinstance(previous, _Ref) and segment.lo == previous.hi + 1:
            merged[-1] = _Ref(previous.lo, segment.hi, segment.ordinal)
        else:
            merged.append(segment)
    return merged


def _pack_segments(archive: Archive, segments: Sequence[_Segment]) -> List[Phrase]:
    """Turn segments into phrases; a reference takes the next symbol as its innovation."""
    segments = list(segments)
    out: List[Phrase] = []
    index = 0
    while index < len(segments):
        segment = segments[index]
        if isinstance(segment, int):
            out.append(Phrase(None, 1, segment))
            index += 1
            continue
        following = segments[index + 1] if index + 1 < len(segments) else None
        if following is None:
            out.append(Phrase(segment.ordinal, segment.length, None))
            index += 1
        elif isinstance(following, int):
            out.append(Phrase(segment.ordinal, segment.length + 1, following))
            index += 2
        else:
            symbol = extract(archive, following.lo, 1)[0]
            out.append(Phrase(segment.ordinal, segment.length + 1, symbol))
            if following.length == 1:
                index += 2
            else:
                segments[index + 1] = _Ref(following.lo + 1, following.hi, following.ordinal)
                index += 1
    return out


def find_replacement_phrases(
    archive: Archive,
    i: int,
    j: int,
    dep: DependentSet,
    *,
    span: Optional[TargetSpan] = None,
    stats: Optional[EditStats] = None,
) -> ReplacementTable:
    """Re-encode every dependent so that it no longer copies from the target phrases.

    Each replacement list decodes to exactly the dependent's old content and
    ends where the dependent ended.
    """
    if not dep:
        return ReplacementTable()
    span = span or target_span(archive, i, j)
    stats = stats if stats is not None else EditStats()
    table: Dict[int, Tuple[Phrase, ...]] = {}
    for k in dep:
        phrase = archive.phrases[k]
        lo, hi = archive.source_window(k)
        segments = _window_segments(archive, span, lo, hi, stats)
        if phrase.last is not None:
            segments.append(phrase.last)
        table[k] = tuple(_pack_segments(archive, _merge_refs(segments)))
    return ReplacementTable(table)


def encode_str(
    archive: Archive,
    i: int,
    j: int,
    payload: bytes,
    *,
    span: Optional[TargetSpan] = None,
    stats: Optional[EditStats] = None,
) -> List[Phrase]:
    """Parse the target phrases' kept fringes around `payload` as a standalone phrase list."""
    span = span or target_span(archive, i, j)
    if i < span.start or j > span.end + 1:
        raise EditArgumentError(f"edit [{i}, {j}) is not covered by target symbols [{span.start}, {span.end}]")
    prefix = extract(archive, span.start, i - span.start)
    suffix = extract(archive, j, span.end - j + 1)
    block = prefix + bytes(payload) + suffix
    if stats is not None:
        stats.payload_start = span.start
        stats.payload_length = len(block)
    return list(parse(block, open_end=span.stop == len(archive)).phrases)


def _bisect_right(values: Sequence[int], target: int) -> Tuple[int, int]:
    """bisect_right that also reports how many comparisons it made."""
    lo, hi = 0, len(values)
    comparisons = 0
    while lo < hi:
        mid = (lo + hi) // 2
        comparisons += 1
        if target < values[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo, comparisons


def adjust_pointers(
    archive: Archive,
    x: int,
    l: int,
    z: int,
    dep: DependentSet,
    rep: ReplacementTable,
    *,
    stats: Optional[EditStats] = None,
) -> Archive:
    """Rewrite source ordinals of the spliced phrase list from pre-edit to post-edit numbering.

    Phrases [0, x) and the payload block [x, x + z) are already in post-edit
    numbering. Everything after them still names pre-edit ordinals: a source
    at or past the old targets [x, x + l) moves by z - l plus the growth of
    every re-encoded dependent at or before it.
    """
    dependents = list(dep)
    growth: List[int] = [0]
    for k in dependents:
        growth.append(growth[-1] + rep.growth(k))
    phrases = list(archive.phrases)
    lookups = 0
    worst = 0
    for position in range(x + z, len(phrases)):
        phrase = phrases[position]
        source = phrase.source
        if source is None or source < x:
            continue
        if source < x + l:
            raise ArchiveCorruptionError(f"phrase {position} still references removed phrase {source}")
        extra = 0
        if dependents:
            slot, comparisons = _bisect_right(dependents, source)
            lookups += 1
            worst = max(worst, comparisons)
            extra = growth[slot]
        moved = source + z - l + extra
        if moved >= position:
            raise ArchiveCorruptionError(f"phrase {position} would reference phrase {moved}, which does not precede it")
        phrases[position] = Phrase(moved, phrase.length, phrase.last)
    if stats is not None:
        stats.pointer_lookups += lookups
        stats.max_lookup_comparisons = max(stats.max_lookup_comparisons, worst)
    return Archive.from_phrases(phrases)


def modify(archive: Archive, request: EditRequest, *, stats: Optional[EditStats] = None) -> Archive:
    """Apply `request` to `archive` without decoding it as a whole."""
    request.check(archive.n)
    if request.is_null:
        return archive
    stats = stats if stats is not None else EditStats()
    i, j = request.i, request.j
    span = target_span(archive, i, j)
    x, xe = span.first, span.stop
    scan_from = archive.boundaries.rank(j)
    dep = find_dependent_phrases(archive, x, xe, scan_from=scan_from, stats=stats)
    rep = find_replacement_phrases(archive, i, j, dep, span=span, stats=stats)
    comp = encode_str(archive, i, j, request.payload, span=span, stats=stats)
    stats.payload_first = x
    stats.payload_count = len(comp)

    spliced: List[Phrase] = list(archive.phrases[:x])
    for phrase in comp:
        source = None if phrase.source is None else phrase.source + x
        spliced.append(Phrase(source, phrase.length, phrase.last))
    for k in range(xe, len(archive)):
        if k in rep:
            spliced.extend(rep[k])
        else:
            spliced.append(archive.phrases[k])
    logger.debug(
        "edit [%d, %d) +%d: targets %d..%d, %d dependents, %d payload phrases",
        i, j, len(request.payload), x, xe, len(dep), len(comp),
    )
    return adjust_pointers(
        Archive.from_phrases(spliced, validate=False), x, xe - x, len(comp), dep, rep, stats=stats
    )
