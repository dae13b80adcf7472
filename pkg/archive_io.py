import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from rich.console import Console
from rich.logging import RichHandler

from local_edit import EditArgumentError, EditRequest, modify
from lz_end_core import (
    Archive,
    ArchiveCorruptionError,
    ArchiveError,
    ArchiveRangeError,
    Phrase,
    decompress,
    extract,
    parse,
    phrase_statistics,
)


MAGIC = b"LZE1"
VERSION = 1
FLAG_FINAL_INNOVATION = 0x01
_MAX_VARINT = (1 << 64) - 1

EXIT_ARGUMENT = 2
EXIT_CORRUPT = 3

logger = logging.getLogger(__name__)
console = Console(stderr=True)


class ArchiveFormatError(ArchiveError):
    pass


def encode_uvarint(value: int) -> bytes:
    if value < 0:
        raise ValueError(f"cannot encode negative value {value}")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_uvarint(data: bytes, offset: int = 0) -> Tuple[int, int]:
    """Decode one minimal LEB128 value at `offset`; returns (value, next offset)."""
    start = offset
    value = 0
    shift = 0
    while True:
        if offset >= len(data):
            raise ArchiveCorruptionError("truncated varint", offset=start)
        byte = data[offset]
        offset += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            break
        shift += 7
        if shift > 63:
            raise ArchiveCorruptionError("varint longer than 64 bits", offset=start)
    if byte == 0 and offset - start > 1:
        raise ArchiveCorruptionError("overlong varint", offset=start)
    if value > _MAX_VARINT:
        raise ArchiveCorruptionError("varint overflows 64 bits", offset=start)
    return value, offset


def serialize(archive: Archive) -> bytes:
    phrases = archive.phrases
    flags = FLAG_FINAL_INNOVATION if phrases and phrases[-1].last is not None else 0
    out = bytearray(MAGIC)
    out.append(VERSION)
    out.append(flags)
    out += encode_uvarint(archive.n)
    out += encode_uvarint(len(phrases))
    for phrase in phrases:
        out += encode_uvarint(0 if phrase.source is None else phrase.source + 1)
        out += encode_uvarint(phrase.length)
        if phrase.last is not None:
            out.append(phrase.last)
    return bytes(out)


def deserialize(data: bytes) -> Archive:
    data = bytes(data)
    if len(data) < len(MAGIC) + 2:
        if data[: len(MAGIC)] != MAGIC[: len(data)]:
            raise ArchiveFormatError("not an LZ-End archive (bad magic)")
        raise ArchiveCorruptionError("truncated header", offset=len(data))
    if data[: len(MAGIC)] != MAGIC:
        raise ArchiveFormatError("not an LZ-End archive (bad magic)")
    version, flags = data[4], data[5]
    if version != VERSION:
        raise ArchiveFormatError(f"unsupported archive version {version}")
    if flags & ~FLAG_FINAL_INNOVATION:
        raise ArchiveFormatError(f"unknown flags 0x{flags:02x}")
    offset = 6
    n, offset = decode_uvarint(data, offset)
    count, offset = decode_uvarint(data, offset)
    if count == 0 and flags:
        raise ArchiveFormatError("empty archive cannot flag a final innovation")
    phrases: List[Phrase] = []
    for k in range(count):
        record = offset
        source_field, offset = decode_uvarint(data, offset)
        length, offset = decode_uvarint(data, offset)
        last: Optional[int] = None
        if k < count - 1 or flags & FLAG_FINAL_INNOVATION:
            if offset >= len(data):
                raise ArchiveCorruptionError(f"truncated phrase {k}", offset=offset)
            last = data[offset]
            offset += 1
        try:
            phrases.append(Phrase(source_field - 1 if source_field else None, length, last))
        except ValueError as e:
            raise ArchiveCorruptionError(f"invalid phrase {k}: {e}", offset=record) from e
    if offset != len(data):
        raise ArchiveFormatError(f"{len(data) - offset} trailing bytes after phrase {count - 1}")
    archive = Archive.from_phrases(phrases, validate=False)
    if archive.n != n:
        raise ArchiveCorruptionError(f"phrases cover {archive.n} symbols, header declares {n}", offset=6)
    archive.validate()
    return archive


def compressed_size(archive: Archive) -> int:
    return len(serialize(archive))


def read_archive(path: Path) -> Archive:
    return deserialize(Path(path).read_bytes())


def write_archive(path: Path, archive: Archive) -> int:
    data = serialize(archive)
    Path(path).write_bytes(data)
    return len(data)


# ---------------------------------------------------------------------------
# Command line


def setup_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_time=False)],
    )


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Path not found: {p}")
    return p


def _cmd_compress(args) -> None:
    text = _existing(args.input).read_bytes()
    archive = parse(text)
    size = write_archive(Path(args.output), archive)
    logger.info("%s: %d bytes -> %d bytes in %d phrases", args.input, len(text), size, len(archive))


def _cmd_decompress(args) -> None:
    text = decompress(read_archive(_existing(args.input)))
    Path(args.output).write_bytes(text)
    logger.info("%s: %d bytes restored", args.input, len(text))


def _cmd_extract(args) -> None:
    data = extract(read_archive(_existing(args.input)), args.start, args.len)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()


def _edit_payload(args) -> bytes:
    if args.insert_file:
        return _existing(args.insert_file).read_bytes()
    if args.insert_hex is not None:
        try:
            return bytes.fromhex(args.insert_hex)
        except ValueError as e:
            raise EditArgumentError(f"--insert-hex is not valid hex: {e}") from e
    return b""


def _cmd_edit(args) -> None:
    source = _existing(args.input)
    archive = read_archive(source)
    request = EditRequest(args.at, args.end, _edit_payload(args))
    edited = modify(archive, request)
    target = Path(args.out) if args.out else source
    size = write_archive(target, edited)
    logger.info(
        "%s: replaced [%d, %d) with %d bytes; %d phrases, %d bytes",
        target, request.i, request.j, len(request.payload), len(edited), size,
    )


def _cmd_info(args) -> None:
    archive = read_archive(_existing(args.input))
    stats = phrase_statistics(archive)
    print(f"symbols:         {stats.symbols}")
    print(f"phrases:         {stats.phrases}")
    print(f"literals:        {stats.literals}")
    print(f"mean length:     {stats.mean_length:.3f}")
    print(f"longest phrase:  {stats.max_length}")
    print(f"compressed size: {compressed_size(archive)}")


def _cmd_gen(args) -> None:
    from calibrated_entropy import CalibratedSpec, write_corpus

    spec = CalibratedSpec(n_bytes=args.bytes, xi=args.xi, c=args.c, fir=args.fir, seed=args.seed)
    paths = write_corpus(spec, args.count, Path(args.out_dir))
    logger.info("wrote %d files to %s", len(paths), args.out_dir)


def _cmd_eval(args) -> None:
    from eval_harness import run_experiment

    run_experiment(
        args.experiment,
        corpus_dir=Path(args.corpus) if args.corpus else None,
        calibrated=args.calibrated,
        seed=args.seed,
        out=Path(args.out) if args.out else None,
        edits=args.edits,
        trials=args.trials,
        n_bytes=args.bytes,
        count=args.count,
        fir=args.fir,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="LZ-End archives with local extraction and local editing.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="Parse a file into an archive.")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=_cmd_compress)

    p = sub.add_parser("decompress", help="Restore the original bytes of an archive.")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=_cmd_decompress)

    p = sub.add_parser("extract", help="Decode a byte range without decoding the whole archive.")
    p.add_argument("input")
    p.add_argument("--start", type=int, required=True, help="First byte to decode.")
    p.add_argument("--len", type=int, required=True, help="Number of bytes to decode.")
    p.add_argument("--out", help="Write to this file instead of stdout.")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("edit", help="Replace bytes [at, end) of the archived text in place.")
    p.add_argument("input")
    p.add_argument("--at", type=int, required=True, help="First removed byte.")
    p.add_argument("--end", type=int, required=True, help="First kept byte after the removed range.")
    payload = p.add_mutually_exclusive_group(required=True)
    payload.add_argument("--insert-file", help="Insert the contents of this file.")
    payload.add_argument("--insert-hex", help="Insert these hex-encoded bytes.")
    payload.add_argument("--empty", action="store_true", help="Insert nothing (pure deletion).")
    p.add_argument("--out", help="Write the edited archive here instead of rewriting the input.")
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("info", help="Print phrase statistics of an archive.")
    p.add_argument("input")
    p.set_defaults(func=_cmd_info)

    p = sub.add_parser("gen", help="Generate calibrated-entropy strings.")
    p.add_argument("--bytes", type=int, required=True, help="Length of each string in bytes.")
    p.add_argument("--count", type=int, default=1, help="Number of strings (default: 1)")
    p.add_argument("--xi", type=float, required=True, help="Noise amplitude.")
    p.add_argument("--c", type=float, default=0.5, help="Bipartition threshold (default: 0.5)")
    p.add_argument("--seed", type=int, default=0, help="Seed of the first string (default: 0)")
    p.add_argument("--fir", action="store_true", help="Apply the five-tap FIR filter.")
    p.add_argument("--out-dir", required=True, help="Directory for cal_xi<xi>_<index>.bin files.")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("eval", help="Measure modification ratios over a corpus.")
    p.add_argument("experiment", choices=["incremental", "sizes", "positions", "validate"])
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--corpus", help="Directory of corpus files.")
    source.add_argument("--calibrated", action="store_true", help="Generate the calibrated-entropy corpus in process.")
    p.add_argument("--seed", type=int, default=0, help="Experiment seed (default: 0)")
    p.add_argument("--out", help="CSV report path (required except for validate).")
    p.add_argument("--edits", type=int, default=100, help="Edits per sequence (default: 100)")
    p.add_argument("--trials", type=int, default=10, help="Trials per size fraction (default: 10)")
    p.add_argument("--bytes", type=int, default=50000, help="Calibrated string length (default: 50000)")
    p.add_argument("--count", type=int, default=10, help="Calibrated strings per noise level (default: 10)")
    p.add_argument("--fir", action="store_true", help="FIR-filter the calibrated corpus.")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="Enable debug logging.")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    if args.command == "eval" and args.experiment != "validate" and not args.out:
        parser.error("eval needs --out for this experiment")
    try:
        args.func(args)
    except (EditArgumentError, ArchiveRangeError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_ARGUMENT
    except ArchiveError as e:
        logger.error("%s", e)
        return EXIT_CORRUPT
    except ValueError as e:
        logger.error("%s", e)
        return EXIT_ARGUMENT
    return 0


if __name__ == "__main__":
    sys.exit(main())
