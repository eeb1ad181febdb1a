"""Stream file formats: JSON-lines event streams and sidecar manifests.

A dataset file starts with one header object declaring the vocabulary size,
followed by one object per event with keys ``ts`` (float hours), optional
``cluster`` (integer ground-truth label) and ``tokens`` (array of integer
token ids in [0, vocab_size)).
"""

import json
from dataclasses import dataclass
from typing import Optional


class DataFormatError(ValueError):
    """Malformed stream or artifact file; message carries the line number."""


@dataclass
class TimedDocument:
    """One stream event: timestamp (hours), token ids, optional label."""

    ts: float
    tokens: list
    label: Optional[int] = None


def write_dataset(path, documents, vocab_size, extra_header=None):
    header = {"vocab_size": int(vocab_size), "n_events": len(documents)}
    if extra_header:
        header.update(extra_header)
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for doc in documents:
            rec = {"ts": float(doc.ts), "tokens": [int(t) for t in doc.tokens]}
            if doc.label is not None:
                rec["cluster"] = int(doc.label)
            fh.write(json.dumps(rec) + "\n")


def read_dataset(path, vocab_size=None, ts_unit="hours"):
    """Parse a stream file; returns (documents, vocab_size).

    ``vocab_size`` overrides or replaces a missing header;
    ``ts_unit='seconds'`` converts epoch-second timestamps to hours.
    """
    scale = 1.0 if ts_unit == "hours" else 1.0 / 3600.0
    documents = []
    header_vocab = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if lineno == 1 and "ts" not in rec:
                if "vocab_size" not in rec:
                    raise DataFormatError(
                        f"{path}:1: header must declare vocab_size"
                    )
                header_vocab = int(rec["vocab_size"])
                continue
            if "ts" not in rec or "tokens" not in rec:
                raise DataFormatError(
                    f"{path}:{lineno}: event needs 'ts' and 'tokens'"
                )
            tokens = rec["tokens"]
            if not isinstance(tokens, list) or not tokens:
                raise DataFormatError(
                    f"{path}:{lineno}: tokens must be a non-empty array"
                )
            label = rec.get("cluster")
            documents.append(
                TimedDocument(
                    ts=float(rec["ts"]) * scale,
                    tokens=[int(t) for t in tokens],
                    label=None if label is None else int(label),
                )
            )
    v = vocab_size if vocab_size is not None else header_vocab
    if v is None:
        raise DataFormatError(
            f"{path}: no vocab_size header and no --vocab-size override"
        )
    for i, doc in enumerate(documents):
        for tok in doc.tokens:
            if not (0 <= tok < v):
                raise DataFormatError(
                    f"{path}: event {i}: token id {tok} outside vocabulary "
                    f"of size {v}"
                )
    if not documents:
        raise DataFormatError(f"{path}: no events")
    times = [d.ts for d in documents]
    if any(b < a for a, b in zip(times, times[1:])):
        raise DataFormatError(f"{path}: timestamps must be non-decreasing")
    return documents, int(v)


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
