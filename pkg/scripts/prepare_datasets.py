"""Rebuild the bundled Adult, COMPAS and Titanic CSVs from their raw sources.

The raw files are not redistributed by this script; point it at local copies
(or let it download them from the canonical URLs below). Each raw file is
checked against the expected SHA-256 digest before conversion, and the
written CSVs are gzip-compressed with a fixed mtime so their digests are
stable.

    python scripts/prepare_datasets.py --raw-dir /path/to/raw --out-dir src/fairmiss/data

Raw sources used for the bundled copies:

* ``adult.data`` / ``adult.test``: UCI Machine Learning Repository.
* ``compas-scores-two-years.csv``: ProPublica compas-analysis repository.
* ``titanic.arff``: OpenML dataset 40945 (the 1309-passenger ``titanic3``
  table from Vanderbilt Biostatistics).
"""

import argparse
import csv
import gzip
import hashlib
import io
import json
import sys
import urllib.request
from pathlib import Path

RAW_SOURCES = {
    "adult.data": (
        "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data",
        "5b00264637dbfec36bdeaab5676b0b309ff9eb788d63554ca0a249491c86603d",
    ),
    "adult.test": (
        "https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.test",
        "a2a9044bc167a35b2361efbabec64e89d69ce82d9790d2980119aac5fd7e9c05",
    ),
    "compas-scores-two-years.csv": (
        "https://raw.githubusercontent.com/propublica/compas-analysis/master/compas-scores-two-years.csv",
        "c451db85908b2f7fef1d83203bedf6b71ecda0d5af468d82ae62178f91d0cc7d",
    ),
    "titanic.arff": (
        "https://www.openml.org/data/v1/download/16826755/titanic.arff",
        "c56e3785c96cd8aceac85f11bff21c2bf72841426f50903a6f27be8f334a7d03",
    ),
}

ADULT_COLUMNS = [
    ("age", "numeric"),
    ("workclass", "categorical"),
    ("fnlwgt", "numeric"),
    ("education", "categorical"),
    ("education_num", "numeric"),
    ("marital_status", "categorical"),
    ("occupation", "categorical"),
    ("relationship", "categorical"),
    ("race", "categorical"),
    ("sex", "categorical"),
    ("capital_gain", "numeric"),
    ("capital_loss", "numeric"),
    ("hours_per_week", "numeric"),
    ("native_country", "categorical"),
    ("income", "categorical"),
]

COMPAS_COLUMNS = [
    ("sex", "categorical"),
    ("age", "numeric"),
    ("age_cat", "categorical"),
    ("race", "categorical"),
    ("juv_fel_count", "numeric"),
    ("juv_misd_count", "numeric"),
    ("juv_other_count", "numeric"),
    ("priors_count", "numeric"),
    ("days_b_screening_arrest", "numeric"),
    ("c_days_from_compas", "numeric"),
    ("c_charge_degree", "categorical"),
    ("c_charge_desc", "categorical"),
    ("two_year_recid", "categorical"),
]

TITANIC_COLUMNS = [
    ("pclass", "categorical"),
    ("sex", "categorical"),
    ("age", "numeric"),
    ("sibsp", "numeric"),
    ("parch", "numeric"),
    ("fare", "numeric"),
    ("embarked", "categorical"),
    ("survived", "categorical"),
]

LABELS = {"adult": "income", "compas": "two_year_recid", "titanic": "survived"}


def sha256(data):
    return hashlib.sha256(data).hexdigest()


def fetch(raw_dir, name, download):
    url, digest = RAW_SOURCES[name]
    path = raw_dir / name
    if path.exists():
        data = path.read_bytes()
    elif download:
        with urllib.request.urlopen(url, timeout=60) as resp:
            data = resp.read()
        path.write_bytes(data)
    else:
        sys.exit(f"missing raw file {path} (canonical source: {url})")
    if sha256(data) != digest:
        sys.exit(f"digest mismatch for {name}: got {sha256(data)}, expected {digest}")
    return data.decode("utf-8")


def adult_rows(train_text, test_text):
    rows = []
    for text in (train_text, test_text):
        for line in text.splitlines():
            if not line.strip() or line.startswith("|"):
                continue
            cells = [c.strip() for c in line.split(",")]
            cells[-1] = cells[-1].rstrip(".")
            rows.append(cells)
    return rows


def compas_rows(text):
    reader = csv.DictReader(io.StringIO(text))
    names = [name for name, _ in COMPAS_COLUMNS]
    return [[rec[n] for n in names] for rec in reader]


def titanic_rows(text):
    header, _, body = text.partition("@data")
    attrs = [line.split()[1].strip("'") for line in header.splitlines()
             if line.lower().startswith("@attribute")]
    wanted = [attrs.index(name) for name, _ in TITANIC_COLUMNS]
    rows = []
    for rec in csv.reader(io.StringIO(body.strip()), quotechar='"', skipinitialspace=True):
        if rec:
            rows.append([rec[i] for i in wanted])
    return rows


def write(out_dir, name, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([c for c, _ in columns])
    writer.writerows(rows)
    payload = buf.getvalue().encode("utf-8")
    gz = io.BytesIO()
    with gzip.GzipFile(filename="", mode="wb", fileobj=gz, mtime=0) as fh:
        fh.write(payload)
    (out_dir / f"{name}.csv.gz").write_bytes(gz.getvalue())
    schema = {c: {"kind": k, "is_label": c == LABELS[name]} for c, k in columns}
    (out_dir / f"{name}.schema.json").write_text(json.dumps(schema, indent=2) + "\n")
    return sha256(payload), len(rows)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--raw-dir", type=Path, required=True)
    parser.add_argument("--out-dir", type=Path, required=True)
    parser.add_argument("--download", action="store_true",
                        help="fetch raw files that are absent from --raw-dir")
    args = parser.parse_args(argv)
    args.raw_dir.mkdir(parents=True, exist_ok=True)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    raw = {name: fetch(args.raw_dir, name, args.download) for name in RAW_SOURCES}
    digests = {}
    for name, columns, rows in [
        ("adult", ADULT_COLUMNS, adult_rows(raw["adult.data"], raw["adult.test"])),
        ("compas", COMPAS_COLUMNS, compas_rows(raw["compas-scores-two-years.csv"])),
        ("titanic", TITANIC_COLUMNS, titanic_rows(raw["titanic.arff"])),
    ]:
        digest, n = write(args.out_dir, name, columns, rows)
        digests[name] = {"csv_sha256": digest, "n_rows": n}
        print(f"{name}: {n} rows, sha256 {digest}")
    (args.out_dir / "digests.json").write_text(json.dumps(digests, indent=2) + "\n")


if __name__ == "__main__":
    main()
