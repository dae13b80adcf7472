import random
import unittest

from lz_end_core import (
    Archive,
    ArchiveCorruptionError,
    ArchiveRangeError,
    BoundaryIndex,
    Phrase,
    decompress,
    extract,
    lcp_array,
    longest_previous_factor,
    parse,
    phrase_statistics,
    rank,
    select,
    suffix_array,
)
from tests.oracles import english_text, mixed_texts, random_text, reference_parse, requires_slow


ABAB = [Phrase(None, 1, ord("a")), Phrase(None, 1, ord("b")), Phrase(1, 2, None)]
ABCABD = [Phrase(None, 1, ord("a")), Phrase(None, 1, ord("b")), Phrase(None, 1, ord("c")), Phrase(1, 3, ord("d"))]


class PhraseTestCase(unittest.TestCase):
    def test_copy_length(self):
        self.assertEqual(Phrase(1, 3, ord("d")).copy_length, 2)
        self.assertEqual(Phrase(1, 2, None).copy_length, 2)

    def test_single_symbol_with_source_becomes_literal(self):
        self.assertEqual(Phrase(4, 1, ord("x")), Phrase(None, 1, ord("x")))

    def test_invalid_phrases(self):
        for args in [(None, 0, 1), (None, 2, 1), (None, 1, None), (0, 2, 256), (-1, 2, 0)]:
            with self.subTest(args=args):
                with self.assertRaises(ValueError):
                    Phrase(*args)


class BoundaryIndexTestCase(unittest.TestCase):
    def setUp(self):
        self.index = BoundaryIndex((0, 1, 3))

    def test_rank(self):
        self.assertEqual(rank(self.index, 0), 0)
        self.assertEqual(rank(self.index, 2), 2)
        self.assertEqual(rank(self.index, 3), 2)
        self.assertEqual(rank(self.index, 4), 3)

    def test_rank_past_end(self):
        with self.assertRaises(ArchiveRangeError):
            rank(self.index, 5)

    def test_select(self):
        self.assertEqual(select(self.index, 0), 0)
        self.assertEqual(select(self.index, 2), 3)
        with self.assertRaises(ArchiveRangeError):
            select(BoundaryIndex((5,)), 1)

    def test_from_lengths(self):
        self.assertEqual(BoundaryIndex.from_lengths([1, 1, 2]), self.index)
        self.assertEqual(self.index.total, 4)
        self.assertEqual([self.index.start(k) for k in range(3)], [0, 1, 2])

    def test_rank_select_consistency(self):
        archive = parse(english_text()[:3000])
        boundaries = archive.boundaries
        for k in range(len(archive)):
            self.assertEqual(boundaries.rank(boundaries.select(k)), k)
            self.assertEqual(boundaries.rank(boundaries.select(k) + 1), k + 1)


class ParseTestCase(unittest.TestCase):
    def test_empty(self):
        archive = parse(b"")
        self.assertEqual(archive.phrases, ())
        self.assertEqual(archive.n, 0)

    def test_abab(self):
        archive = parse(b"abab")
        self.assertEqual(list(archive.phrases), ABAB)
        self.assertEqual(archive.boundaries.ends, (0, 1, 3))

    def test_abcabd(self):
        archive = parse(b"abcabd")
        self.assertEqual(list(archive.phrases), ABCABD)
        self.assertEqual(archive.boundaries.ends, (0, 1, 2, 5))

    def test_closed_end_keeps_final_innovation(self):
        archive = parse(b"abab", open_end=False)
        self.assertEqual(archive.phrases[-1], Phrase(0, 2, ord("b")))
        self.assertEqual(decompress(archive), b"abab")

    def test_matches_reference_parser(self):
        for text in mixed_texts(seed=7, count=150, max_length=220):
            with self.subTest(text=text):
                self.assertEqual(list(parse(text).phrases), reference_parse(text))

    def test_closed_end_matches_reference_parser(self):
        for text in mixed_texts(seed=8, count=80, max_length=160):
            with self.subTest(text=text):
                archive = parse(text, open_end=False)
                self.assertEqual(list(archive.phrases), reference_parse(text, open_end=False))
                if text:
                    self.assertIsNotNone(archive.phrases[-1].last)

    def test_greedy_match_cannot_be_extended(self):
        for text in mixed_texts(seed=9, count=40, max_length=256):
            archive = parse(text)
            ends = archive.boundaries.ends
            for k, phrase in enumerate(archive.phrases):
                start = archive.boundaries.start(k)
                matched = phrase.copy_length
                if start + matched >= len(text):
                    continue
                longer = text[start : start + matched + 1]
                for e in ends[:k]:
                    if e + 1 >= len(longer):
                        self.assertNotEqual(text[e - len(longer) + 1 : e + 1], longer)

    def test_round_trip(self):
        for text in mixed_texts(seed=11, count=60, max_length=2000):
            self.assertEqual(decompress(parse(text)), text)

    def test_round_trip_english(self):
        text = english_text()
        self.assertEqual(decompress(parse(text)), text)

    def test_repetitive_text_needs_fewer_phrases(self):
        rng = random.Random(3)
        for m in (64, 500, 2000):
            noise = random_text(rng, m)
            self.assertLess(len(parse(b"a" * m)), len(parse(noise)))

    def test_phrase_statistics(self):
        stats = phrase_statistics(parse(b"abcabd"))
        self.assertEqual((stats.symbols, stats.phrases, stats.literals, stats.max_length), (6, 4, 3, 3))
        self.assertAlmostEqual(stats.mean_length, 1.5)

    @requires_slow("a thousand strings up to 10^4 bytes")
    def test_round_trip_at_scale(self):
        rng = random.Random(2024)
        for _ in range(1000):
            length = rng.randint(0, 10_000)
            text = random_text(rng, length, rng.choice([b"ab", b"acgt", None]))
            self.assertEqual(decompress(parse(text)), text)


class SuffixStructureTestCase(unittest.TestCase):
    def test_suffix_array_lcp_lpf(self):
        for text in mixed_texts(seed=5, count=60, max_length=120):
            n = len(text)
            sa = suffix_array(text)
            self.assertEqual(sa.tolist(), sorted(range(n), key=lambda i: text[i:]))
            lcp = lcp_array(text, sa).tolist()
            for r in range(1, n):
                a, b = text[sa[r - 1] :], text[sa[r] :]
                h = 0
                while h < min(len(a), len(b)) and a[h] == b[h]:
                    h += 1
                self.assertEqual(lcp[r], h)
            lpf = longest_previous_factor(text, sa).tolist()
            for i in range(n):
                best = 0
                for s in range(i):
                    h = 0
                    while i + h < n and text[s + h] == text[i + h]:
                        h += 1
                    best = max(best, h)
                self.assertEqual(lpf[i], best)


class DecompressTestCase(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(decompress(Archive()), b"")
        self.assertEqual(decompress(Archive.from_phrases(ABAB)), b"abab")
        self.assertEqual(decompress(Archive.from_phrases(ABCABD)), b"abcabd")

    def test_window_before_text_start(self):
        archive = Archive.from_phrases([Phrase(None, 1, 97), Phrase(0, 3, 98)], validate=False)
        with self.assertRaises(ArchiveCorruptionError):
            decompress(archive)
        with self.assertRaises(ArchiveCorruptionError):
            archive.validate()

    def test_forward_reference_is_rejected(self):
        with self.assertRaises(ArchiveCorruptionError):
            Archive.from_phrases([Phrase(None, 1, 97), Phrase(1, 2, 98)])

    def test_missing_innovation_before_end_is_rejected(self):
        with self.assertRaises(ArchiveCorruptionError):
            Archive.from_phrases([Phrase(None, 1, 97), Phrase(0, 1, None), Phrase(None, 1, 98)])


class ExtractTestCase(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(extract(parse(b"abcabd"), 0, 0), b"")
        self.assertEqual(extract(parse(b"abcabd"), 3, 3), b"abd")
        self.assertEqual(extract(parse(b"abab"), 2, 2), b"ab")

    def test_out_of_range(self):
        archive = parse(b"abab")
        for start, length in [(-1, 1), (3, 2), (0, 5), (1, -1)]:
            with self.assertRaises(ArchiveRangeError):
                extract(archive, start, length)

    def test_matches_substrings(self):
        rng = random.Random(17)
        for text in mixed_texts(seed=13, count=20, max_length=1500) + [english_text()]:
            archive = parse(text)
            for _ in range(50):
                start = rng.randint(0, len(text))
                length = rng.randint(0, len(text) - start)
                self.assertEqual(extract(archive, start, length), text[start : start + length])

    @requires_slow("ten thousand queries over twenty archives")
    def test_matches_substrings_at_scale(self):
        rng = random.Random(99)
        texts = mixed_texts(seed=21, count=20, max_length=10_000)
        for text in texts:
            archive = parse(text)
            for _ in range(500):
                start = rng.randint(0, len(text))
                length = rng.randint(0, len(text) - start)
                self.assertEqual(extract(archive, start, length), text[start : start + length])


if __name__ == "__main__":
    unittest.main()
