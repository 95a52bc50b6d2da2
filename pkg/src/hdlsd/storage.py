"""Binary container for path and matrix arrays, plus CSV helpers.

Container layout: one ASCII header line with eight space-separated fields

    HDLSD1 <p> <n> <q> <kind> <R|C> <seed> <model_hash>

followed by the ``p x n`` array in column-major order, little-endian
float64 (``R``) or complex128 (``C``).
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAGIC = "HDLSD1"


@dataclass
class ContainerHeader:
    p: int
    n: int
    q: int
    kind: str
    is_complex: bool
    seed: int
    model_hash: str


def write_container(path, array: np.ndarray, *, kind: str, q: int = 0, seed: int = 0,
                    model_hash: str = "-") -> None:
    array = np.asarray(array)
    if array.ndim != 2:
        raise ValueError("container stores 2-d arrays only")
    for token in (kind, model_hash):
        if not token or any(ch.isspace() for ch in token):
            raise ValueError(f"header field {token!r} must be a nonempty token")
    is_complex = np.iscomplexobj(array)
    dtype = "<c16" if is_complex else "<f8"
    p, n = array.shape
    header = f"{MAGIC} {p} {n} {q} {kind} {'C' if is_complex else 'R'} {seed} {model_hash}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.asarray(array, dtype=dtype).ravel(order="F").tobytes())


def read_container(path) -> tuple[ContainerHeader, np.ndarray]:
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii")
        fields = line.split()
        if len(fields) != 8 or fields[0] != MAGIC:
            raise ValueError(f"{path}: not an {MAGIC} container")
        header = ContainerHeader(
            p=int(fields[1]), n=int(fields[2]), q=int(fields[3]), kind=fields[4],
            is_complex=fields[5] == "C", seed=int(fields[6]), model_hash=fields[7],
        )
        dtype = "<c16" if header.is_complex else "<f8"
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != header.p * header.n:
        raise ValueError(f"{path}: expected {header.p * header.n} entries, found {data.size}")
    return header, data.reshape((header.p, header.n), order="F").copy()


def fmt(x: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(x))


def write_csv(path, header: Sequence[str], columns: Iterable[Sequence[float]],
              comments: Sequence[str] = ()) -> None:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([fmt(v) for v in row])
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def read_csv(path) -> tuple[dict, dict]:
    """Return ``(columns, comments)``; ``key=value`` comment lines are parsed into ``comments``."""
    comments: dict[str, str] = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            text = line[1:].strip()
            if "=" in text:
                key, value = text.split("=", 1)
                comments[key.strip()] = value.strip()
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    names = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(names))
    return {name: data[:, k] for k, name in enumerate(names)}, comments
