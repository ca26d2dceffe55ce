"""Delimited-text datasets and the DETv1 tree file format.

A tree file is line oriented::

    DETv1 dims=<D> leaves=<L> total_weight=<w>
    # key=<json value>                (optional metadata lines)
    dim <name> <lo> <hi>              (one per dimension)
    I <dim> <threshold>               (preorder node lines)
    L <density> [nosupport]

Floats use Python's shortest round-trip repr, so every value survives a
save/load cycle bit for bit. Dimension names are percent-encoded.
"""

from __future__ import annotations

import csv
import json
import math
from typing import Optional, Sequence
from urllib.parse import quote, unquote

import numpy as np

from .core import Dataset, DensityTree, HyperRect, validate
from .errors import (
    CorruptFile,
    DETError,
    IoFailure,
    MissingColumn,
    NegativeWeight,
    ParseError,
    UnsupportedVersion,
)

__all__ = ["load_dataset", "save_tree", "load_tree", "dumps_tree", "loads_tree",
           "FORMAT_VERSION"]

FORMAT_VERSION = 1
MAGIC = "DET"


def load_dataset(path, delimiter: str = ",", has_header: bool = True,
                 columns: Optional[Sequence[str]] = None,
                 weight_column: Optional[str] = None) -> Dataset:
    """Read a delimited text file into a :class:`Dataset`.

    Without ``columns`` every column except ``weight_column`` is used.
    Files without a header get names ``c0, c1, ...``; columns may then also
    be selected by those names.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(0, None, "file is empty")
    if has_header:
        header = [h.strip() for h in rows[0]]
        body = rows[1:]
        first = 2
    else:
        header = [f"c{k}" for k in range(len(rows[0]))]
        body = rows
        first = 1
    index = {h: k for k, h in enumerate(header)}
    if columns is None:
        columns = [h for h in header if h != weight_column]
    for c in list(columns) + ([weight_column] if weight_column else []):
        if c not in index:
            raise MissingColumn(f"column {c!r} not found; available: {', '.join(header)}")
    sel = [index[c] for c in columns]
    wk = index[weight_column] if weight_column else None

    points = np.empty((len(body), len(sel)))
    weights = np.ones(len(body))
    for r, row in enumerate(body):
        line = first + r
        if len(row) != len(header):
            raise ParseError(line, None, f"expected {len(header)} fields, found {len(row)}")
        for j, k in enumerate(sel):
            points[r, j] = _parse_float(row[k], line, header[k])
        if wk is not None:
            wv = _parse_float(row[wk], line, header[wk])
            if wv < 0:
                raise NegativeWeight(f"row {line}: weight {wv} in column {header[wk]!r} is negative")
            weights[r] = wv
    return Dataset(tuple(columns), points, weights)


def _parse_float(text, line, column):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(line, column, f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(line, column, f"non-finite value {text.strip()!r}")
    return v


def dumps_tree(tree: DensityTree, metadata: Optional[dict] = None) -> str:
    meta = dict(tree.metadata)
    if metadata:
        meta.update(metadata)
    out = [f"{MAGIC}v{FORMAT_VERSION} dims={len(tree.dims)} leaves={tree.n_leaves} "
           f"total_weight={tree.total_weight!r}"]
    for k in sorted(meta):
        out.append(f"# {quote(str(k), safe='')}={json.dumps(meta[k], sort_keys=True)}")
    for name, lo, hi in zip(tree.dims, tree.root_box.lo, tree.root_box.hi):
        out.append(f"dim {quote(name, safe='')} {lo!r} {hi!r}")
    f = tree.feature.tolist()
    t = tree.threshold.tolist()
    v = tree.value.tolist()
    ns = tree.no_support.tolist()
    for i in _preorder(tree):
        if f[i] >= 0:
            out.append(f"I {f[i]} {t[i]!r}")
        elif ns[i]:
            out.append(f"L {v[i]!r} nosupport")
        else:
            out.append(f"L {v[i]!r}")
    return "\n".join(out) + "\n"


def _preorder(tree: DensityTree):
    # trees built by this package are already stored in preorder
    stack = [0]
    order = []
    f, l, r = tree.feature, tree.left, tree.right
    while stack:
        i = stack.pop()
        order.append(i)
        if f[i] >= 0:
            stack.append(int(r[i]))
            stack.append(int(l[i]))
    return order


def save_tree(tree: DensityTree, path, metadata: Optional[dict] = None) -> None:
    """Write ``tree`` to ``path``; ``metadata`` is merged into the tree's own."""
    text = dumps_tree(tree, metadata)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def loads_tree(text: str) -> DensityTree:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorruptFile("empty file")
    head = lines[0].split()
    if not head or not head[0].startswith(MAGIC + "v"):
        raise CorruptFile("missing DET header")
    try:
        version = int(head[0][len(MAGIC) + 1:])
    except ValueError:
        raise CorruptFile(f"bad header tag {head[0]!r}") from None
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version} is not supported (expected {FORMAT_VERSION})")
    try:
        fields = dict(kv.split("=", 1) for kv in head[1:])
        D = int(fields["dims"])
        L = int(fields["leaves"])
        total_weight = float(fields["total_weight"])
    except (KeyError, ValueError) as exc:
        raise CorruptFile(f"malformed header: {exc}") from None
    if D < 1 or L < 1:
        raise CorruptFile(f"header declares dims={D}, leaves={L}")

    pos = 1
    meta = {}
    while pos < len(lines) and lines[pos].startswith("#"):
        body = lines[pos][1:].strip()
        if "=" in body:
            k, val = body.split("=", 1)
            try:
                meta[unquote(k)] = json.loads(val)
            except json.JSONDecodeError:
                meta[unquote(k)] = val
        pos += 1

    dims, lo, hi = [], [], []
    for _ in range(D):
        if pos >= len(lines):
            raise CorruptFile(f"truncated: expected {D} dim lines")
        parts = lines[pos].split()
        if len(parts) != 4 or parts[0] != "dim":
            raise CorruptFile(f"line {pos + 1}: expected 'dim <name> <lo> <hi>'")
        try:
            lo.append(float(parts[2]))
            hi.append(float(parts[3]))
        except ValueError:
            raise CorruptFile(f"line {pos + 1}: bad bounds") from None
        dims.append(unquote(parts[1]))
        pos += 1
    try:
        box = HyperRect(lo, hi)
    except DETError as exc:
        raise CorruptFile(f"invalid root box: {exc}") from None

    node_lines = lines[pos:]
    expected = 2 * L - 1
    if len(node_lines) != expected:
        raise CorruptFile(
            f"node-count mismatch: header declares {L} leaves ({expected} nodes), "
            f"file holds {len(node_lines)} node lines")
    n = expected
    feature = np.full(n, -1, np.int64)
    threshold = np.zeros(n)
    left = np.full(n, -1, np.int64)
    right = np.full(n, -1, np.int64)
    value = np.zeros(n)
    flags = np.zeros(n, dtype=bool)
    # stack of internal nodes still waiting for a child
    pending = []
    for i, line in enumerate(node_lines):
        parts = line.split()
        if i > 0:
            if not pending:
                raise CorruptFile(f"node line {i + 1}: nodes after the tree is complete")
            p = pending[-1]
            if left[p] < 0:
                left[p] = i
            else:
                right[p] = i
                pending.pop()
        try:
            if parts[0] == "I" and len(parts) == 3:
                feature[i] = int(parts[1])
                threshold[i] = float(parts[2])
                if not 0 <= feature[i] < D:
                    raise CorruptFile(f"node line {i + 1}: split dimension {feature[i]} out of range")
                pending.append(i)
            elif parts[0] == "L" and len(parts) in (2, 3):
                value[i] = float(parts[1])
                if len(parts) == 3:
                    if parts[2] != "nosupport":
                        raise CorruptFile(f"node line {i + 1}: unknown leaf flag {parts[2]!r}")
                    flags[i] = True
            else:
                raise CorruptFile(f"node line {i + 1}: cannot parse {line!r}")
        except CorruptFile:
            raise
        except (ValueError, IndexError):
            raise CorruptFile(f"node line {i + 1}: cannot parse {line!r}") from None
    if pending:
        raise CorruptFile("truncated: some internal nodes lack children")

    tree = DensityTree(dims, box, feature, threshold, left, right, value, flags,
                       total_weight, meta)
    problems = validate(tree)
    if problems:
        raise CorruptFile(f"invalid tree: {problems[0]}")
    return tree


def load_tree(path) -> DensityTree:
    """Read and re-validate a tree written by :func:`save_tree`."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return loads_tree(text)
