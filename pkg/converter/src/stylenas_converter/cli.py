"""Command line: stylenas-convert --checkpoint PATH --manifest PATH --out PATH."""

import argparse
import sys

from .convert import ConversionError, convert, verify_written_file
from .manifest import ManifestError, parse_manifest


def cli_dispatch(argv):
    parser = argparse.ArgumentParser(prog="stylenas-convert")
    parser.add_argument("--checkpoint", required=True, help=".npz / .pt / .pth checkpoint")
    parser.add_argument("--manifest", required=True, help="plain-text layer mapping")
    parser.add_argument("--out", required=True, help="output PNWT file")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        manifest = parse_manifest(args.manifest)
        report = convert(args.checkpoint, manifest, args.out)
        problems = verify_written_file(report)
        if problems:
            for problem in problems:
                print(f"error: {problem}", file=sys.stderr)
            return 1
    except (ManifestError, ConversionError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(f"out={report.out_path}")
    print(f"base_width={report.base_width}")
    print(f"tensors={len(report.tensors)}")
    for entry in report.tensors:
        dims = "x".join(str(d) for d in entry.shape)
        print(f"tensor={entry.name} shape={dims} crc32={entry.checksum:08x}")
    return 0


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
