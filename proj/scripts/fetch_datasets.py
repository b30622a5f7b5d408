#!/usr/bin/env python3
"""Download and convert the datasets that are not committed to data/.

Writes headerless CSVs (features, then an integer label) next to
data/registry.txt. Archive checksums are recorded in scripts/datasets.sha256
the first time an archive is fetched and verified on every later run.

    python3 scripts/fetch_datasets.py                 # all datasets
    python3 scripts/fetch_datasets.py pendigit chess  # a subset
    python3 scripts/fetch_datasets.py --archive-dir ~/Downloads   # no network
"""

import argparse
import csv
import hashlib
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
CHECKSUMS = Path(__file__).resolve().parent / "datasets.sha256"

ARCHIVES = {
    "bank": "https://archive.ics.uci.edu/static/public/222/bank+marketing.zip",
    "pendigit": "https://archive.ics.uci.edu/static/public/81/pen+based+recognition+of+handwritten+digits.zip",
    "chess": "https://archive.ics.uci.edu/static/public/23/chess+king+rook+vs+king.zip",
}

CHESS_CLASSES = ["draw", "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
                 "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen"]


def load_checksums(path):
    sums = {}
    if path.exists():
        for line in path.read_text().splitlines():
            if line.strip():
                digest, name = line.split()
                sums[name] = digest
    return sums


def save_checksums(path, sums):
    path.write_text("".join(f"{d}  {n}\n" for n, d in sorted(sums.items())))


def fetch(name, archive_dir, checksums):
    url = ARCHIVES[name]
    filename = url.rsplit("/", 1)[1]
    if archive_dir:
        blob = (Path(archive_dir) / filename).read_bytes()
    else:
        with urllib.request.urlopen(url, timeout=120) as resp:
            blob = resp.read()
    digest = hashlib.sha256(blob).hexdigest()
    sums = load_checksums(checksums)
    if filename in sums and sums[filename] != digest:
        sys.exit(f"{filename}: sha256 {digest} does not match recorded {sums[filename]}")
    if filename not in sums:
        sums[filename] = digest
        save_checksums(checksums, sums)
        print(f"{filename}: recorded sha256 {digest}")
    return zipfile.ZipFile(io.BytesIO(blob))


def member(archive, suffix):
    for n in archive.namelist():
        if n.endswith(suffix):
            return archive.read(n)
    raise KeyError(f"{suffix} not found in archive")


def write_rows(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def encode_columns(records):
    """Numeric columns pass through; other columns get codes 0..k-1 in sorted order."""
    columns = list(zip(*records))
    encoded = []
    for col in columns:
        try:
            encoded.append([float(v) for v in col])
        except ValueError:
            codes = {v: i for i, v in enumerate(sorted(set(col)))}
            encoded.append([codes[v] for v in col])
    return [list(r) for r in zip(*encoded)]


def convert_bank(archive, out):
    # The 20-attribute variant lives in a nested archive.
    inner = zipfile.ZipFile(io.BytesIO(member(archive, "bank-additional.zip")))
    text = member(inner, "bank-additional-full.csv").decode()
    rows = list(csv.reader(io.StringIO(text), delimiter=";"))
    header, body = rows[0], [r for r in rows[1:] if r]
    assert len(header) == 21, header
    features = encode_columns([r[:-1] for r in body])
    labels = [1 if r[-1] == "yes" else 0 for r in body]
    write_rows(out / "bank.csv", [f + [y] for f, y in zip(features, labels)])


def convert_pendigit(archive, out):
    for suffix, name in ((".tra", "pendigits_train.csv"), (".tes", "pendigits_test.csv")):
        text = member(archive, "pendigits" + suffix).decode()
        rows = []
        for line in text.splitlines():
            parts = [p.strip() for p in line.split(",") if p.strip()]
            if parts:
                assert len(parts) == 17, line
                rows.append([int(p) for p in parts])
        write_rows(out / name, rows)


def convert_chess(archive, out):
    text = member(archive, "krkopt.data").decode()
    rows = []
    for line in text.splitlines():
        parts = line.strip().split(",")
        if len(parts) != 7:
            continue
        # Files a..h become 1..8; ranks are already 1..8.
        coords = [ord(p) - ord("a") + 1 if p.isalpha() else int(p) for p in parts[:6]]
        rows.append(coords + [CHESS_CLASSES.index(parts[6])])
    write_rows(out / "chess.csv", rows)


CONVERTERS = {"bank": convert_bank, "pendigit": convert_pendigit, "chess": convert_chess}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("datasets", nargs="*", help="any of: " + ", ".join(ARCHIVES))
    parser.add_argument("--archive-dir", help="read the UCI zip files from this directory instead of downloading")
    parser.add_argument("--out-dir", type=Path, default=DATA)
    parser.add_argument("--checksums", type=Path, default=CHECKSUMS)
    args = parser.parse_args()
    unknown = [d for d in args.datasets if d not in ARCHIVES]
    if unknown:
        parser.error("unknown dataset: " + ", ".join(unknown))
    for name in args.datasets or list(ARCHIVES):
        CONVERTERS[name](fetch(name, args.archive_dir, args.checksums), args.out_dir)


if __name__ == "__main__":
    main()
