"""``det`` command line front end.

Exit status is 0 on success, 1 on usage errors (nothing is computed) and 2
when a data or model error is raised by the library.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .algebra import CompactionPolicy, combine, efficiency_tree
from .core import HyperRect, SliceSpec, evaluate
from .errors import DETError
from .integrate import SliceIntegralQuery, integrate_box, integrate_slice, project
from .io import load_dataset, load_tree, save_tree
from .sample import build_sampler
from .train import TrainConfig, train

EXIT_USAGE = 1
EXIT_MODEL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError("values must be finite")
    return vals


def _ranges(text):
    lo, hi = [], []
    for part in text.split(","):
        try:
            a, b = part.split(":")
            lo.append(float(a))
            hi.append(float(b))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected lo:hi,... got {text!r}") from None
    try:
        return HyperRect(lo, hi)
    except DETError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _min_width(text):
    return "auto" if text == "auto" else _positive_list(text)


def _positive_list(text):
    vals = _floats(text)
    if not all(v > 0 for v in vals):
        raise argparse.ArgumentTypeError("widths must be positive")
    return vals


def _fixes(text):
    out = []
    for part in text.split(","):
        name, sep, val = part.partition("=")
        if not sep or not name:
            raise argparse.ArgumentTypeError(f"expected dim=value,... got {text!r}")
        try:
            v = float(val)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad value in {part!r}") from None
        if not np.isfinite(v):
            raise argparse.ArgumentTypeError("fixed values must be finite")
        out.append((name, v))
    return out


def _pos_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _nonneg(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (v >= 0 and np.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def _columns(text):
    cols = [c.strip() for c in text.split(",")]
    if not all(cols):
        raise argparse.ArgumentTypeError("empty column name")
    return cols


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="det", description="Density estimation trees.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("train", help="grow a tree from a delimited text file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--weight-col")
    s.add_argument("--columns", type=_columns)
    s.add_argument("--delimiter", default=",")
    s.add_argument("--no-header", action="store_true")
    s.add_argument("--min-width", type=_min_width, default="auto")
    s.add_argument("--min-count", type=_nonneg, default=0.0)
    s.add_argument("--max-depth", type=_pos_int, default=64)
    s.add_argument("--box", type=_ranges)
    s.add_argument("--jobs", type=_pos_int, default=1)
    s.add_argument("--out", required=True)

    s = sub.add_parser("eval", help="density at a point")
    s.add_argument("--model", required=True)
    s.add_argument("--point", type=_floats, required=True)

    s = sub.add_parser("integrate", help="integral over a box (default: whole support)")
    s.add_argument("--model", required=True)
    s.add_argument("--region", type=_ranges)

    s = sub.add_parser("slice", help="integral over the free dimensions of a slice")
    s.add_argument("--model", required=True)
    s.add_argument("--fix", type=_fixes, required=True)
    s.add_argument("--region", type=_ranges, help="lo:hi per free dimension")

    s = sub.add_parser("combine", help="leafwise binary operation of two trees")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--op", choices=["add", "sub", "mul", "div"], required=True)
    s.add_argument("--tol", type=_nonneg, default=1e-6)
    s.add_argument("--out", required=True)

    s = sub.add_parser("ratio", help="efficiency tree pass/all")
    s.add_argument("--pass", dest="pass_", required=True)
    s.add_argument("--all", dest="all_", required=True)
    s.add_argument("--pass-weight", type=_nonneg, required=True)
    s.add_argument("--all-weight", type=_nonneg, required=True)
    s.add_argument("--tol", type=_nonneg, default=1e-6)
    s.add_argument("--out", required=True)

    s = sub.add_parser("sample", help="conditional samples of the free dimensions")
    s.add_argument("--model", required=True)
    s.add_argument("--fix", type=_fixes, required=True)
    s.add_argument("--n", type=_pos_int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--paper-volume-weights", action="store_true",
                   help="choose leaves by intersection volume only")
    s.add_argument("--out", required=True)

    s = sub.add_parser("project", help="1D marginal histogram of a tree")
    s.add_argument("--model", required=True)
    s.add_argument("--dim", required=True)
    s.add_argument("--bins", type=_pos_int, required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("info", help="summary of a tree")
    s.add_argument("--model", required=True)
    return p


def _slice(tree, fixes):
    return SliceSpec({tree.dim_index(_dim_key(tree, name)): v for name, v in fixes})


def _dim_key(tree, name):
    if name in tree.dims:
        return name
    if name.isdigit():
        return int(name)
    return name


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def _run(args, out):
    cmd = args.command
    if cmd == "train":
        data = load_dataset(args.input, delimiter=args.delimiter,
                            has_header=not args.no_header, columns=args.columns,
                            weight_column=args.weight_col)
        config = TrainConfig(min_leaf_width=args.min_width, min_leaf_weight=args.min_count,
                             max_depth=args.max_depth, root_box=args.box)
        tree = train(data, config, jobs=args.jobs)
        save_tree(tree, args.out)
        print(f"leaves={tree.n_leaves} depth={tree.depth}", file=out)
    elif cmd == "eval":
        tree = load_tree(args.model)
        print(repr(evaluate(tree, args.point)), file=out)
    elif cmd == "integrate":
        tree = load_tree(args.model)
        print(repr(integrate_box(tree, args.region or tree.root_box)), file=out)
    elif cmd == "slice":
        tree = load_tree(args.model)
        query = SliceIntegralQuery(_slice(tree, args.fix), args.region)
        print(repr(integrate_slice(tree, query)), file=out)
    elif cmd == "combine":
        a = load_tree(args.a)
        b = load_tree(args.b)
        tree = combine(a, b, args.op, CompactionPolicy(args.tol, "relative"))
        save_tree(tree, args.out)
        print(f"leaves={tree.n_leaves}", file=out)
    elif cmd == "ratio":
        tree = efficiency_tree(load_tree(args.pass_), load_tree(args.all_),
                               args.pass_weight, args.all_weight,
                               CompactionPolicy(args.tol, "relative"))
        save_tree(tree, args.out)
        print(f"leaves={tree.n_leaves}", file=out)
    elif cmd == "sample":
        tree = load_tree(args.model)
        sampler = build_sampler(tree, _slice(tree, args.fix), seed=args.seed,
                                volume_only=args.paper_volume_weights)
        _write_rows(args.out, sampler.free_dims, sampler.sample(args.n))
    elif cmd == "project":
        tree = load_tree(args.model)
        _write_rows(args.out, ["bin_lo", "bin_hi", "density"],
                    project(tree, _dim_key(tree, args.dim), args.bins))
    elif cmd == "info":
        tree = load_tree(args.model)
        print(f"dims: {','.join(tree.dims)}", file=out)
        print(f"leaves: {tree.n_leaves}", file=out)
        print(f"depth: {tree.depth}", file=out)
        print("box: " + ",".join(f"{a!r}:{b!r}" for a, b in zip(tree.root_box.lo, tree.root_box.hi)),
              file=out)
        print(f"total_weight: {tree.total_weight!r}", file=out)
        print(f"integral: {integrate_box(tree, tree.root_box)!r}", file=out)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else EXIT_USAGE
    try:
        _run(args, out)
    except (DETError, OSError, ValueError) as exc:
        print(f"det {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    return 0


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
