import bisect
import logging
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Iterable, List, Optional, Tuple

import numpy as np


logger = logging.getLogger(__name__)


class ArchiveError(ValueError):
    """Base class for every error raised while building, reading or editing an archive."""


class ArchiveRangeError(ArchiveError, IndexError):
    pass


class ArchiveCorruptionError(ArchiveError):
    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class Phrase:
    """One LZ-End factor: copy `copy_length` symbols ending at the end of phrase `source`, then `last`."""

    source: Optional[int]
    length: int
    last: Optional[int] = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError(f"phrase length must be >= 1, got {self.length}")
        if self.last is not None and not 0 <= self.last <= 255:
            raise ValueError(f"innovation must be a byte, got {self.last}")
        if self.source is not None and self.source < 0:
            raise ValueError(f"source ordinal must be >= 0, got {self.source}")
        # A one-symbol phrase with an innovation copies nothing.
        if self.length == 1 and self.last is not None and self.source is not None:
            object.__setattr__(self, "source", None)
        if self.source is None and (self.last is None or self.length != 1):
            raise ValueError("a phrase without a source must be a single literal")

    @property
    def copy_length(self) -> int:
        return self.length - 1 if self.last is not None else self.length

    @property
    def is_literal(self) -> bool:
        return self.source is None


@dataclass(frozen=True)
class BoundaryIndex:
    ends: Tuple[int, ...] = ()

    @classmethod
    def from_lengths(cls, lengths: Iterable[int]) -> "BoundaryIndex":
        return cls(tuple(total - 1 for total in accumulate(lengths)))

    def __len__(self) -> int:
        return len(self.ends)

    @property
    def total(self) -> int:
        return self.ends[-1] + 1 if self.ends else 0

    def rank(self, p: int) -> int:
        if p < 0 or p > self.total:
            raise ArchiveRangeError(f"position {p} outside [0, {self.total}]")
        return bisect.bisect_left(self.ends, p)

    def select(self, k: int) -> int:
        if not 0 <= k < len(self.ends):
            raise ArchiveRangeError(f"phrase ordinal {k} outside [0, {len(self.ends)})")
        return self.ends[k]

    def start(self, k: int) -> int:
        """First symbol position of phrase k."""
        self.select(k)
        return self.ends[k - 1] + 1 if k else 0


def rank(boundaries: BoundaryIndex, p: int) -> int:
    return boundaries.rank(p)


def select(boundaries: BoundaryIndex, k: int) -> int:
    return boundaries.select(k)


@dataclass(frozen=True)
class Archive:
    phrases: Tuple[Phrase, ...] = ()
    boundaries: BoundaryIndex = field(default_factory=BoundaryIndex)
    n: int = 0

    @classmethod
    def from_phrases(cls, phrases: Iterable[Phrase], validate: bool = True) -> "Archive":
        phrases = tuple(phrases)
        boundaries = BoundaryIndex.from_lengths(p.length for p in phrases)
        archive = cls(phrases, boundaries, boundaries.total)
        if validate:
            archive.validate()
        return archive

    def __len__(self) -> int:
        return len(self.phrases)

    def source_window(self, k: int) -> Optional[Tuple[int, int]]:
        """Inclusive range of symbols copied by phrase k, or None for a literal."""
        phrase = self.phrases[k]
        if phrase.source is None:
            return None
        end = self.boundaries.ends[phrase.source]
        return end - phrase.copy_length + 1, end

    def validate(self) -> None:
        if len(self.boundaries) != len(self.phrases):
            raise ArchiveCorruptionError("boundary index does not match the phrase list")
        if self.boundaries.total != self.n:
            raise ArchiveCorruptionError(f"phrases cover {self.boundaries.total} symbols, archive declares {self.n}")
        final = len(self.phrases) - 1
        for k, phrase in enumerate(self.phrases):
            if phrase.last is None and k != final:
                raise ArchiveCorruptionError(f"phrase {k} has no innovation but is not the final phrase")
            if phrase.source is None:
                continue
            if phrase.source >= k:
                raise ArchiveCorruptionError(f"phrase {k} references phrase {phrase.source}, which does not precede it")
            begin, _ = self.source_window(k)
            if begin < 0:
                raise ArchiveCorruptionError(f"phrase {k} copies {phrase.copy_length} symbols before the start of the text")


@dataclass(frozen=True)
class ArchiveStats:
    symbols: int
    phrases: int
    literals: int
    mean_length: float
    max_length: int


def phrase_statistics(archive: Archive) -> ArchiveStats:
    lengths = [p.length for p in archive.phrases]
    return ArchiveStats(
        symbols=archive.n,
        phrases=len(lengths),
        literals=sum(1 for p in archive.phrases if p.is_literal),
        mean_length=archive.n / len(lengths) if lengths else 0.0,
        max_length=max(lengths, default=0),
    )


# ---------------------------------------------------------------------------
# Suffix structures


def suffix_array(text: bytes) -> np.ndarray:
    """Prefix-doubling suffix array; a suffix that runs out of symbols sorts first."""
    n = len(text)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    _, ranks = np.unique(np.frombuffer(text, dtype=np.uint8), return_inverse=True)
    ranks = ranks.astype(np.int64).reshape(-1)
    order = np.argsort(ranks, kind="stable")
    k = 1
    while ranks.max() < n - 1:
        second = np.full(n, -1, dtype=np.int64)
        if k < n:
            second[: n - k] = ranks[k:]
        order = np.lexsort((second, ranks))
        first_sorted = ranks[order]
        second_sorted = second[order]
        changed = (first_sorted[1:] != first_sorted[:-1]) | (second_sorted[1:] != second_sorted[:-1])
        fresh = np.concatenate(([0], np.cumsum(changed)))
        ranks = np.empty(n, dtype=np.int64)
        ranks[order] = fresh
        k *= 2
    return order.astype(np.int64)


def lcp_array(text: bytes, sa: np.ndarray) -> np.ndarray:
    """Kasai: lcp[r] is the longest common prefix of suffixes sa[r-1] and sa[r]; lcp[0] = 0."""
    n = len(text)
    positions = sa.tolist()
    inverse = [0] * n
    for r, pos in enumerate(positions):
        inverse[pos] = r
    out = [0] * n
    h = 0
    for i in range(n):
        r = inverse[i]
        if r == 0:
            h = 0
            continue
        j = positions[r - 1]
        while i + h < n and j + h < n and text[i + h] == text[j + h]:
            h += 1
        out[r] = h
        if h:
            h -= 1
    return np.asarray(out, dtype=np.int64)


def longest_previous_factor(text: bytes, sa: Optional[np.ndarray] = None, lcp: Optional[np.ndarray] = None) -> np.ndarray:
    """lpf[i] is the length of the longest prefix of text[i:] that also starts somewhere before i."""
    n = len(text)
    if sa is None:
        sa = suffix_array(text)
    if lcp is None:
        lcp = lcp_array(text, sa)
    positions = sa.tolist() + [-1]
    heights = lcp.tolist() + [0]
    lpf = [0] * n
    stack: List[int] = [0] if n else []
    for r in range(1, n + 1):
        while stack:
            top = stack[-1]
            if positions[r] < positions[top]:
                lpf[positions[top]] = max(heights[top], heights[r])
                heights[r] = min(heights[top], heights[r])
            elif heights[r] <= heights[top]:
                lpf[positions[top]] = heights[top]
            else:
                break
            stack.pop()
        if r < n:
            stack.append(r)
    return np.asarray(lpf, dtype=np.int64)


# ---------------------------------------------------------------------------
# Parsing

_FIRST_BLOCK = 16


class _EndMatcher:
    """Finds, for a phrase starting at i, the longest prefix of text[i:] that ends at a registered phrase end.

    Walks the suffix array outwards from suffix i in blocks. Every earlier
    suffix s that shares h symbols with suffix i can supply a match ending at
    the last registered end inside [s, s + h - 1]; the walk in one direction
    stops once the running common prefix drops below the best length so far.
    """

    def __init__(self, text: bytes):
        self.n = len(text)
        self.sa = suffix_array(text)
        self.lcp = lcp_array(text, self.sa)
        self.lpf = longest_previous_factor(text, self.sa, self.lcp).tolist()
        self.inverse = np.empty(self.n, dtype=np.int64)
        self.inverse[self.sa] = np.arange(self.n, dtype=np.int64)
        self.ends = np.empty(self.n, dtype=np.int64)
        self.count = 0

    def register(self, end: int) -> None:
        self.ends[self.count] = end
        self.count += 1

    def best_match(self, i: int, cap: int) -> Tuple[int, int]:
        """Return (length, source ordinal); length 0 means no usable match."""
        cap = min(cap, self.lpf[i])
        if cap <= 0 or self.count == 0:
            return 0, -1
        ends = self.ends[: self.count]
        r = int(self.inverse[i])
        best, best_end = 0, -1
        for direction in (-1, 1):
            h = cap
            t = r
            block = _FIRST_BLOCK
            while h > 0 and h >= best:
                if direction < 0:
                    stop = max(t - block, 0)
                    if stop == t:
                        break
                    ranks = np.arange(t - 1, stop - 1, -1)
                    path = self.lcp[ranks + 1]
                else:
                    stop = min(t + block, self.n - 1)
                    if stop == t:
                        break
                    ranks = np.arange(t + 1, stop + 1)
                    path = self.lcp[ranks]
                shared = np.minimum(np.minimum.accumulate(path), h)
                starts = self.sa[ranks]
                upto = np.minimum(starts + shared - 1, i - 1)
                slot = np.searchsorted(ends, upto, side="right") - 1
                found = ends[np.maximum(slot, 0)]
                lengths = np.where(slot >= 0, found - starts + 1, 0)
                top = int(lengths.max())
                if top > 0 and top >= best:
                    end = int(found[lengths == top].min())
                    if top > best:
                        best, best_end = top, end
                    else:
                        best_end = min(best_end, end)
                h = int(shared[-1])
                t = int(ranks[-1])
                block *= 2
        if best == 0:
            return 0, -1
        return best, int(np.searchsorted(ends, best_end))


def parse(text: bytes, *, open_end: bool = True) -> Archive:
    """Greedy LZ-End factorization of `text`.

    With `open_end=False` the final phrase always carries an innovation.
    """
    text = bytes(text)
    n = len(text)
    if n == 0:
        return Archive()
    matcher = _EndMatcher(text)
    phrases: List[Phrase] = []
    i = 0
    while i < n:
        remaining = n - i
        length, source = matcher.best_match(i, remaining if open_end else remaining - 1)
        if length == 0:
            phrase = Phrase(None, 1, text[i])
        elif length == remaining:
            phrase = Phrase(source, length, None)
        else:
            phrase = Phrase(source, length + 1, text[i + length])
        phrases.append(phrase)
        i += phrase.length
        matcher.register(i - 1)
    logger.debug("parsed %d symbols into %d phrases", n, len(phrases))
    return Archive.from_phrases(phrases, validate=False)


def decompress(archive: Archive) -> bytes:
    out = bytearray()
    ends = archive.boundaries.ends
    for k, phrase in enumerate(archive.phrases):
        if phrase.source is not None:
            if not 0 <= phrase.source < k:
                raise ArchiveCorruptionError(f"phrase {k} references phrase {phrase.source}")
            end = ends[phrase.source]
            begin = end - phrase.copy_length + 1
            if begin < 0:
                raise ArchiveCorruptionError(f"phrase {k} copies before the start of the text")
            out += out[begin : end + 1]
        if phrase.last is not None:
            out.append(phrase.last)
    if len(out) != archive.n:
        raise ArchiveCorruptionError(f"decoded {len(out)} symbols, archive declares {archive.n}")
    return bytes(out)


def extract(archive: Archive, start: int, length: int) -> bytes:
    """Decode text[start:start + length] by following source windows, without decoding the rest."""
    if start < 0 or length < 0 or start + length > archive.n:
        raise ArchiveRangeError(f"range [{start}, {start + length}) outside [0, {archive.n})")
    ends = archive.boundaries.ends
    phrases = archive.phrases
    out = bytearray()
    # Pending work, popped from the end: inclusive ranges or single innovation bytes.
    pending: List[object] = [(start, start + length - 1)]
    while pending:
        item = pending.pop()
        if isinstance(item, int):
            out.append(item)
            continue
        lo, hi = item
        if lo > hi:
            continue
        k = bisect.bisect_left(ends, lo)
        phrase = phrases[k]
        phrase_end = ends[k]
        phrase_start = phrase_end - phrase.length + 1
        if hi > phrase_end:
            pending.append((phrase_end + 1, hi))
            hi = phrase_end
        if phrase.last is not None and hi == phrase_end:
            pending.append(phrase.last)
        copy_end = phrase_start + phrase.copy_length - 1
        if lo <= copy_end:
            shift = ends[phrase.source] - copy_end
            pending.append((lo + shift, min(hi, copy_end) + shift))
    return bytes(out)
