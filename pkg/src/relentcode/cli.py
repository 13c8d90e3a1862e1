"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 format or usage error,
3 codec error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from typing import Sequence

from .container import Container, decode_records, encode_records, format_records, parse_records
from .errors import CodecError, FormatError
from .models import (AdditiveUnimodalMechanism, CategoricalMechanism, GaussianGaussianMechanism,
                     Mechanism, UniformAdditiveMechanism)
from .records import CODECS, SELECTION_CODECS, check_codec
from .selection import UNLIMITED, Budget

EXIT_OK, EXIT_VERIFY, EXIT_FORMAT, EXIT_CODEC = 0, 1, 2, 3

MECHANISM_NAMES = {
    "categorical": CategoricalMechanism,
    "gaussian": GaussianGaussianMechanism,
    "uniform-additive": UniformAdditiveMechanism,
    "additive-unimodal": AdditiveUnimodalMechanism,
}

DEFAULT_PARAMS = {
    "categorical": [2, 2, 0.5, 0.5, 0.8, 0.2, 0.2, 0.8],
    "gaussian": [1.0, 0.5],
    "uniform-additive": [16],
    # source kind, a, b, noise kind, c, d; kinds: 0 normal, 1 levels, 2 laplace, 3 uniform
    "additive-unimodal": [0, 0.0, 1.0, 0, 0.0, 0.5],
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    mechanism: str = "uniform-additive"
    params: list[float] = field(default_factory=list)
    codec: str = "dq"
    seed: int = 0
    budget: Budget = UNLIMITED
    force: bool = False
    trials: int | None = None
    suites: list[str] = field(default_factory=list)
    fault: str | None = None
    input: str | None = None
    out: str | None = None

    def build_mechanism(self) -> Mechanism:
        cls = MECHANISM_NAMES[self.mechanism]
        params = self.params or DEFAULT_PARAMS[self.mechanism]
        try:
            return cls.from_params(params)
        except (ValueError, IndexError, TypeError) as exc:
            raise UsageError(f"bad --params for {self.mechanism}: {exc}") from exc

    def validate(self, mech: Mechanism) -> None:
        try:
            check_codec(mech, self.codec)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if (mech.needs_budget and self.codec in SELECTION_CODECS
                and self.budget.unlimited and not self.force):
            raise UsageError(f"{self.codec} on the {self.mechanism} mechanism has infinite expected "
                             "runtime; pass --budget N (or --force)")


def _parse_params(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--params must be comma separated numbers, got {text!r}")


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path: str | None, data: bytes | str) -> None:
    if path is None or path == "-":
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
        else:
            sys.stdout.write(data)
        return
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(data)


def cmd_encode(cfg: RunConfig) -> int:
    mech = cfg.build_mechanism()
    cfg.validate(mech)
    try:
        xs = parse_records(_read_text(cfg.input))
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    container = encode_records(mech, cfg.codec, xs, cfg.seed, cfg.budget)
    _write(cfg.out, container.to_bytes())
    h = container.header
    rate = h.payload_bits / h.record_count if h.record_count else 0.0
    print(f"encoded {h.record_count} records, {h.payload_bits} payload bits "
          f"({rate:.3f} bits/record)", file=sys.stderr)
    return EXIT_OK


def cmd_decode(cfg: RunConfig) -> int:
    if cfg.input == "-":
        blob = sys.stdin.buffer.read()
    else:
        with open(cfg.input, "rb") as fh:
            blob = fh.read()
    values = decode_records(Container.from_bytes(blob))
    _write(cfg.out, format_records(values))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .harness import write_csv
    from .verification import run_suites

    try:
        checks = run_suites(cfg.suites or None, cfg.trials, cfg.fault)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if cfg.out:
        rows = []
        for c in checks:
            rows.append((c.name, float(c.value), c.stderr, c.n))
            rows.append((c.name + "/passed", float(c.passed), 0.0, c.n))
        with open(cfg.out, "w", newline="") as fh:
            write_csv(rows, fh)
    return EXIT_VERIFY if failed else EXIT_OK


def bench_cells(selection_budget: int = 100_000):
    from .verification import binary_channel, gaussian_additive
    from .dither import laplace_smsu
    from .models import Laplace, Normal

    cells = []
    for levels in (2, 4, 8, 16, 32, 64):
        mech = UniformAdditiveMechanism(levels)
        for codec in ("dq", "rejection", "pfr"):
            cells.append((f"uniform-additive(L={levels})", mech, codec, UNLIMITED))
    cells.append(("categorical(0.8/0.2)", binary_channel(), "rejection", UNLIMITED))
    cells.append(("categorical(0.8/0.2)", binary_channel(), "pfr", UNLIMITED))
    degenerate = CategoricalMechanism.independent([0.5, 0.5])
    cells.append(("degenerate", degenerate, "rejection", UNLIMITED))
    cells.append(("degenerate", degenerate, "pfr", UNLIMITED))
    capped = Budget(selection_budget, approximate=True)
    cells.append(("gaussian(s=1,r=0.5)", GaussianGaussianMechanism(1.0, 0.5), "pfr", capped))
    for rho in (1.0, 0.5, 0.25, 0.125, 0.0625):
        cells.append((f"gaussian-additive(r={rho})", gaussian_additive(rho), "lq", UNLIMITED))
    cells.append(("laplace-additive(b=0.5)",
                  AdditiveUnimodalMechanism(Normal(0.0, 1.0), Laplace(0.0, 0.5), laplace_smsu(0.5)),
                  "lq", UNLIMITED))
    return cells


def run_bench(trials: int, seed: int = 0):
    from .harness import RateReport, lq_conditional_information, rate_experiment
    from .models import Normal
    from .records import source_of

    reports, rows = [], []
    for name, mech, codec, budget in bench_cells():
        try:
            r = rate_experiment(mech, codec, trials, seed, budget, name=name)
        except Exception as exc:  # keep sweeping; the failure becomes its own row
            rows.append((f"{name}/{codec}/error", math.nan, 0.0, trials))
            print(f"{name}/{codec}: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        if codec in SELECTION_CODECS and not math.isnan(r.log_ratio_sup):
            r.extras["steps_over_2^E[lb r]"] = r.steps / 2 ** r.log_ratio_sup
        if codec == "lq" and isinstance(source_of(mech), Normal):
            r.extras["conditional_information"] = lq_conditional_information(mech, 200, seed)
        reports.append(r)
        rows.extend(r.rows())
    assert all(isinstance(r, RateReport) for r in reports)
    return reports, rows


def cmd_bench(cfg: RunConfig) -> int:
    from .harness import summary_table, write_csv

    reports, rows = run_bench(cfg.trials or 2000, cfg.seed)
    print(summary_table(reports))
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            write_csv(rows, fh)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relentcode", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)

    def coding_flags(sp):
        sp.add_argument("--mechanism", choices=sorted(MECHANISM_NAMES), default="uniform-additive")
        sp.add_argument("--params", type=_parse_params, default=[],
                        help="comma separated mechanism parameters (see README)")
        sp.add_argument("--codec", choices=CODECS, default="dq")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--budget", type=int, default=None, help="max proposals per record")
        sp.add_argument("--approximate", action="store_true",
                        help="on budget exhaustion return the best candidate instead of failing")
        sp.add_argument("--force", action="store_true",
                        help="allow an unlimited budget where the expected runtime is infinite")

    enc = sub.add_parser("encode", help="encode a file of decimal records into a container")
    enc.add_argument("input", help="newline separated records, or - for stdin")
    coding_flags(enc)
    enc.add_argument("--out", default="-")

    dec = sub.add_parser("decode", help="decode a container into reconstructions")
    dec.add_argument("input")
    dec.add_argument("--out", default="-")

    ver = sub.add_parser("verify", help="run the acceptance suites")
    ver.add_argument("--suite", action="append", default=[],
                     help="suite name (repeatable or comma separated); default: all")
    ver.add_argument("--trials", type=int, default=None, help="cap on per-check sample sizes")
    ver.add_argument("--inject-fault", dest="fault", default=None,
                     help="deliberately break the build (biased-uniform) to exercise failure paths")
    ver.add_argument("--out", default=None, help="CSV output path")

    ben = sub.add_parser("bench", help="rate/runtime sweep over mechanisms and codecs")
    ben.add_argument("--trials", type=int, default=2000)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--out", default=None, help="CSV output path")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(ns.subcommand, input=getattr(ns, "input", None), out=getattr(ns, "out", None))
    if ns.subcommand == "encode":
        budget = UNLIMITED if ns.budget is None else Budget(ns.budget, ns.approximate)
        cfg.mechanism, cfg.params, cfg.codec = ns.mechanism, ns.params, ns.codec
        cfg.seed, cfg.budget, cfg.force = ns.seed, budget, ns.force
    elif ns.subcommand == "verify":
        cfg.suites = [s for arg in ns.suite for s in arg.split(",") if s]
        cfg.trials, cfg.fault = ns.trials, ns.fault
    elif ns.subcommand == "bench":
        cfg.trials, cfg.seed = ns.trials, ns.seed
    return cfg


COMMANDS = {"encode": cmd_encode, "decode": cmd_decode, "verify": cmd_verify, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.subcommand](cfg)
    except (UsageError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except CodecError as exc:
        print(f"codec error: {exc}", file=sys.stderr)
        return EXIT_CODEC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
