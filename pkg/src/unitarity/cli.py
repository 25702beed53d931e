"""Command-line entry point.

Examples::

    unitarity estimate --channel builtin:shift_mixture,d=4 --access incoherent --repeats 20
    unitarity oracle --channel my_channel.json
    unitarity scaling --channel builtin:depolarizing,d=2 --dims 2,4,8,16,32 --out scaling.csv --format csv
    unitarity distinguish --dim 4 --repeats 100

Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 unparsable input.
"""

from __future__ import annotations

import argparse
import sys

from .errors import IoError, ParseError, ValidationError
from .estimators import ACCESS_MODES, INCOHERENT, VARIANTS
from .experiments import ChannelSpec, ExperimentConfig, run_experiment
from .io import FORMATS, dumps_result, emit_result, read_channel_spec

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_PARSE = 4


def parse_channel_arg(text: str) -> ChannelSpec:
    """``builtin:name,k=v,...`` (dimension as ``d=`` or ``dim=``, default 2) or a path to a JSON file."""
    if not text.startswith("builtin:"):
        return read_channel_spec(text)
    name, *pairs = text[len("builtin:"):].split(",")
    params: dict = {}
    dim = 2
    for pair in filter(None, pairs):
        key, sep, value = pair.partition("=")
        if not sep:
            raise ParseError(f"expected key=value in channel argument, got {pair!r}")
        try:
            number = float(value)
        except ValueError:
            raise ParseError(f"parameter {key} is not a number: {value!r}") from None
        if key in ("d", "dim"):
            if number != int(number):
                raise ParseError(f"dimension must be an integer, got {value!r}")
            dim = int(number)
        else:
            params[key.strip()] = int(number) if key == "seed" and number == int(number) else number
    if not name:
        raise ParseError("missing builtin name")
    return ChannelSpec(dim=dim, builtin=name, params=params)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--channel", help="builtin:name,k=v,...,d=<dim> or a channel JSON file")
    shared.add_argument("--access", choices=ACCESS_MODES, default=INCOHERENT)
    shared.add_argument("--epsilon", type=float, default=None, help="default 0.1 (0.2 for distinguish)")
    shared.add_argument("--delta", type=float, default=1.0 / 3.0)
    shared.add_argument("--variant", choices=VARIANTS, default="u")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--repeats", type=int, default=1, help="repeats, grid-cell repeats or trials")
    shared.add_argument("--out", help="output file; stdout (JSON) if omitted")
    shared.add_argument("--format", choices=FORMATS, default="json")
    shared.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(prog="unitarity", description="Unitarity estimation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("estimate", parents=[shared], help="repeated end-to-end unitarity estimates")
    sub.add_parser("oracle", parents=[shared], help="exact unitarity and index values")
    sub.add_parser("bounds", parents=[shared], help="unitary-approximability bounds")
    p = sub.add_parser("scaling", parents=[shared], help="query counts and errors over a (d, epsilon) grid")
    p.add_argument("--dims", type=_int_list, default=[2, 4, 8, 16, 32])
    p.add_argument("--epsilons", type=_float_list, default=None)
    p = sub.add_parser("distinguish", parents=[shared], help="depolarizing vs Haar unitary by thresholding")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--max-queries", type=int, default=None)
    return parser


def config_from_args(args) -> ExperimentConfig:
    kind = args.command
    channel = parse_channel_arg(args.channel) if args.channel else None
    extra: dict = {"repeats": args.repeats, "output": args.out, "format": args.format}
    dim = None
    epsilon = args.epsilon if args.epsilon is not None else (0.2 if kind == "distinguish" else 0.1)
    if kind == "scaling":
        extra["dims"] = args.dims
        extra["epsilons"] = args.epsilons or [epsilon]
    elif kind == "distinguish":
        dim = args.dim
        extra.update(dims=[dim], epsilons=[epsilon], max_queries=args.max_queries)
    elif channel is None:
        raise ValidationError(f"{kind} needs --channel")
    if kind == "scaling" and channel is None:
        raise ValidationError("scaling needs --channel with a builtin")
    return ExperimentConfig.create(
        kind,
        channel,
        dim=dim,
        access=args.access,
        epsilon=epsilon,
        delta=args.delta,
        variant=args.variant,
        seed=args.seed,
        **extra,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        record = run_experiment(cfg, workers=args.workers)
        if args.out:
            emit_result(record, args.out, args.format)
        else:
            sys.stdout.write(dumps_result(record))
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
