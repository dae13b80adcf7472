"""Calibrated-entropy test strings from a noisy logistic map, optionally smoothed by a five-tap FIR filter."""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Sequence

import numpy as np


logger = logging.getLogger(__name__)

# Accumulation point of the period-doubling cascade: the noiseless orbit has zero entropy rate here.
FEIGENBAUM_POINT = 3.5699456718695445
BURN_IN = 1000
XI_GRID = (0.0001, 0.00025, 0.0005, 0.00075, 0.001, 0.0025, 0.005, 0.0075, 0.01, 0.025)
FIR_TAPS = 5

_EDGE = 1e-12


@dataclass(frozen=True)
class CalibratedSpec:
    n_bytes: int
    xi: float
    c: float = 0.5
    fir: bool = False
    seed: int = 0
    burn_in: int = BURN_IN
    r: float = FEIGENBAUM_POINT

    def __post_init__(self):
        if self.n_bytes < 0:
            raise ValueError(f"n_bytes must be >= 0, got {self.n_bytes}")
        if self.xi < 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"c must lie in [0, 1], got {self.c}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if not 0.0 < self.r <= 4.0:
            raise ValueError(f"r must lie in (0, 4], got {self.r}")

    def for_index(self, index: int) -> "CalibratedSpec":
        return replace(self, seed=self.seed + index)


def _reflect(x: float) -> float:
    if x < 0.0:
        x = -x
    if x > 1.0:
        x = 2.0 - x
    return min(max(x, _EDGE), 1.0 - _EDGE)


def logistic_bits(spec: CalibratedSpec) -> np.ndarray:
    """8 * n_bytes bits: 1 where the noisy orbit x <- r x (1 - x) + xi u sits at or above c."""
    rng = np.random.default_rng(spec.seed)
    x = _reflect(float(rng.random()))
    total = spec.burn_in + 8 * spec.n_bytes
    noise = (spec.xi * rng.uniform(-1.0, 1.0, size=total)).tolist()
    r = spec.r
    orbit = [0.0] * (8 * spec.n_bytes)
    for t in range(total):
        x = _reflect(r * x * (1.0 - x) + noise[t])
        if t >= spec.burn_in:
            orbit[t - spec.burn_in] = x
    return (np.asarray(orbit, dtype=np.float64) >= spec.c).astype(np.uint8)


def fir_filter(bits: Sequence[int]) -> np.ndarray:
    """F_n = 0.5 S_n + 0.1 (S_{n-1} + ... + S_{n-5}) with the five bits before the start taken as 1; emit F_n >= 0.4."""
    s = np.asarray(bits, dtype=np.int64)
    padded = np.concatenate((np.ones(FIR_TAPS, dtype=np.int64), s))
    previous = np.convolve(padded, np.ones(FIR_TAPS, dtype=np.int64), mode="valid")[: len(s)]
    # Scaled by 10 so the 0.4 threshold is compared exactly.
    return (5 * s + previous >= 4).astype(np.uint8)


def pack_bits(bits: Sequence[int]) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def generate(spec: CalibratedSpec) -> bytes:
    bits = logistic_bits(spec)
    if spec.fir:
        bits = fir_filter(bits)
    return pack_bits(bits)


def gen_corpus(spec: CalibratedSpec, count: int) -> List[bytes]:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    corpus = [generate(spec.for_index(index)) for index in range(count)]
    logger.debug("generated %d strings of %d bytes at xi=%g (fir=%s)", count, spec.n_bytes, spec.xi, spec.fir)
    return corpus


def corpus_file_name(xi: float, index: int) -> str:
    return f"cal_xi{xi:g}_{index}.bin"


def write_corpus(spec: CalibratedSpec, count: int, out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for index, data in enumerate(gen_corpus(spec, count)):
        path = out_dir / corpus_file_name(spec.xi, index)
        path.write_bytes(data)
        paths.append(path)
    return paths
