"""The acceptance suite, shared by ``relentcode verify`` and the test-suite.

Each suite returns a list of :class:`Check`; a suite passes when all of its
checks pass.  ``trials`` caps the per-check sample sizes for quick runs; by
default every check runs at its full size.
"""

from __future__ import annotations

import contextlib
import math
import os
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from typing import Callable, Iterator
from unittest import mock

import numpy as np

from . import randomness
from .codes import BitCursor, BitString, elias_delta_decode, elias_delta_encode, elias_delta_encode_many
from .container import Container, decode_records, encode_records, format_records
from .dither import gaussian_smsu
from .harness import (collect_steps, correctness_experiment, ks_2samp_test, ks_test,
                      log_ratio_sup_experiment, mean_and_stderr, rate_experiment, smsu_experiment,
                      theorem1_experiment)
from .models import (LOG2E, AdditiveUnimodalMechanism, CategoricalMechanism, GaussianGaussianMechanism,
                     Normal, UniformAdditiveMechanism)
from .randomness import DeterministicStream

SEED = 20240917


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float = math.nan
    stderr: float = 0.0
    n: int = 0
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def binary_channel() -> CategoricalMechanism:
    return CategoricalMechanism([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]])


def gaussian_additive(rho: float = 0.5) -> AdditiveUnimodalMechanism:
    return AdditiveUnimodalMechanism(Normal(0.0, 1.0), Normal(0.0, rho), gaussian_smsu(rho))


def _n(default: int, cap: int | None) -> int:
    return default if cap is None else max(min(default, cap), 100)


def _gof_check(name: str, gof) -> Check:
    return Check(name, gof.passed, gof.statistic, 0.0, gof.n,
                 f"{gof.kind} statistic {gof.statistic:.4g} < {gof.threshold:.4g}"
                 if gof.passed else
                 f"{gof.kind} statistic {gof.statistic:.4g} >= {gof.threshold:.4g}")


def _within_se(name: str, values, target: float, k: float = 3.0) -> Check:
    mean, se = mean_and_stderr(values)
    ok = abs(mean - target) <= k * se if se > 0 else mean == target
    return Check(name, ok, mean, se, len(values),
                 f"mean {mean:.4f} ± {se:.4f}, target {target:.4f} ({(mean - target) / se if se else 0:+.2f} SE)")


def suite_exactness(trials: int | None = None) -> list[Check]:
    """Rejection and pfr codes reproduce P_{Y|X=0} for the binary channel."""
    mech = binary_channel()
    n = _n(100_000, trials)
    return [_gof_check(f"exactness/{algo}", correctness_experiment(mech, 0, algo, n, SEED))
            for algo in ("rejection", "pfr")]


def suite_runtime(trials: int | None = None) -> list[Check]:
    """Mean runtime equals ||r_x||; rejection and pfr runtimes share one law."""
    checks = []
    cases = [(binary_channel(), 0, 1.6, _n(100_000, trials), "categorical"),
             (UniformAdditiveMechanism(16), 7, 16.0, _n(10_000, trials), "uniform16")]
    for mech, x, target, n, tag in cases:
        steps = {}
        for j, algo in enumerate(("rejection", "pfr")):
            steps[algo], _ = collect_steps(mech, x, algo, n, SEED + 10 * j)
            checks.append(_within_se(f"runtime/{tag}/{algo}/mean-K", steps[algo], target))
        m = _n(10_000, trials)
        checks.append(_gof_check(f"runtime/{tag}/K-equal-in-law",
                                 ks_2samp_test(steps["rejection"][:m], steps["pfr"][:m])))
    return checks


def suite_theorem1(trials: int | None = None) -> list[Check]:
    """Normalised Poisson arrivals behave like sorted uniforms."""
    n = _n(10_000, trials)
    checks = []
    for k in (2, 3):
        for i, gof in enumerate(theorem1_experiment(k, n, SEED + k), 1):
            checks.append(_gof_check(f"theorem1/k={k}/T{i}/T{k + 1}~Beta({i},{k + 1 - i})", gof))
    return checks


def suite_dither(trials: int | None = None) -> list[Check]:
    """Dithered quantiser error is bracketed and exactly uniform."""
    n = _n(100_000, trials)
    mech = UniformAdditiveMechanism(16)
    report = rate_experiment(mech, "dq", n, SEED, keep_errors=True)
    err = report.extras["_errors"]
    inside = int(np.sum((err > -0.5) & (err <= 0.5)))
    return [
        Check("dither/bracket", inside == n, inside / n, 0.0, n,
              f"{inside}/{n} errors in (-1/2, 1/2]"),
        _gof_check("dither/uniform-error", ks_test(err, lambda t: np.clip(t + 0.5, 0.0, 1.0))),
    ]


def suite_dq_rate(trials: int | None = None) -> list[Check]:
    """Dithered quantiser payload sits within 3 bits of I = lb L."""
    n = _n(10_000, trials)
    checks, rates = [], []
    for levels in (4, 16, 64):
        r = rate_experiment(UniformAdditiveMechanism(levels), "dq", n, SEED + levels)
        info = r.mutual_information
        rates.append(r.payload_bits)
        checks.append(Check(f"dq-rate/L={levels}", info <= r.payload_bits <= info + 3,
                            r.payload_bits, r.payload_stderr, n,
                            f"payload {r.payload_bits:.3f} bits, I = {info:.1f}, allowed [{info:.1f}, {info + 3:.1f}]"))
    for (a, b), (ra, rb) in zip(((4, 16), (16, 64)), zip(rates, rates[1:])):
        step = rb - ra
        checks.append(Check(f"dq-rate/step L={a}->{b}", abs(step - 2.0) <= 0.2, step, 0.0, n,
                            f"rate increase {step:.3f} bits (target 2.0 ± 0.2)"))
    return checks


def suite_smsu(trials: int | None = None) -> list[Check]:
    """S * U with S = 2 chi(3) is standard normal."""
    return [_gof_check("smsu/gaussian", smsu_experiment(gaussian_smsu(), max(_n(100_000, trials), 10_000), SEED))]


def suite_lq(trials: int | None = None) -> list[Check]:
    """Layered quantiser simulates N(0, rho^2) noise at a near-optimal rate."""
    rho = 0.5
    mech = gaussian_additive(rho)
    n_err = _n(100_000, trials)
    report = rate_experiment(mech, "lq", n_err, SEED, keep_errors=True)
    err = report.extras["_errors"]
    normal = Normal(0.0, rho)
    checks = [_gof_check("lq/error~N(0,rho^2)", ks_test(err, normal.cdf))]
    n_rate = _n(10_000, trials)
    rate = rate_experiment(mech, "lq", n_rate, SEED + 1)
    info = 0.5 * math.log2(1 + 1 / rho ** 2)
    limit = info + math.log2(info + 1) + 8
    checks.append(Check("lq/rate", rate.payload_bits <= limit, rate.payload_bits, rate.payload_stderr,
                        n_rate, f"payload {rate.payload_bits:.3f} bits <= {limit:.3f}; "
                        f"gap over I = {rate.payload_bits - info:.3f} bits, "
                        f"over I + lb(I+1) = {rate.payload_bits - info - math.log2(info + 1):.3f} bits"))
    return checks


def suite_gaussian_logsup(trials: int | None = None) -> list[Check]:
    """E[lb ||r_X||] = I + (1/2) lb e for the Gaussian channel."""
    mech = GaussianGaussianMechanism(1.0, 0.5)
    n = _n(100_000, trials)
    mean, se = log_ratio_sup_experiment(mech, n, SEED)
    target = mech.mutual_information() + 0.5 * LOG2E
    ok = abs(mean - target) <= 3 * se
    return [Check("gaussian-logsup", ok, mean, se, n,
                  f"E[lb ||r||] = {mean:.4f} ± {se:.4f}, target {target:.4f}")]


def suite_elias(trials: int | None = None) -> list[Check]:
    """Elias delta: roundtrip, length bound and prefix freedom."""
    top = _n(1_000_000, trials)
    ks = range(1, top + 1)
    bits = elias_delta_encode_many(ks)
    cursor = BitCursor(bits)
    bad = over = 0
    for k in ks:
        start = cursor.position
        bad += elias_delta_decode(bits, cursor) != k
        over += cursor.position - start > math.log2(k) + 2 * math.log2(1 + math.log2(k)) + 1
    roundtrip = Check("elias/roundtrip", bad == 0 and cursor.remaining == 0, bad, 0.0, top,
                      f"{top - bad}/{top} integers recovered")
    length = Check("elias/length-bound", over == 0, over, 0.0, top, f"{over} codewords exceed the bound")
    stream = DeterministicStream(SEED, 0)
    n_pairs = _n(10_000, trials)
    clashes = pairs = 0
    while pairs < n_pairs:
        a = 1 + stream.next_u64() % top
        b = 1 + stream.next_u64() % top
        if a == b:
            continue
        pairs += 1
        ca, cb = _delta_str(a), _delta_str(b)
        clashes += ca.startswith(cb) or cb.startswith(ca)
    prefix = Check("elias/prefix-free", clashes == 0, clashes, 0.0, pairs,
                   f"{clashes} prefix clashes in {pairs} random pairs")
    return [roundtrip, length, prefix]


def _delta_str(k: int) -> str:
    return elias_delta_encode(k).to_str()


def suite_selection_rate(trials: int | None = None) -> list[Check]:
    """pfr payload stays within E + 2 lb(E + 1) + 6 bits."""
    n = _n(10_000, trials)
    checks = []
    cases = [("categorical", binary_channel()),
             ("uniform4", UniformAdditiveMechanism(4)),
             ("uniform16", UniformAdditiveMechanism(16))]
    for tag, mech in cases:
        r = rate_experiment(mech, "pfr", n, SEED)
        bound = r.selection_bound + 6
        checks.append(Check(f"selection-rate/{tag}", r.payload_bits <= bound, r.payload_bits,
                            r.payload_stderr, n,
                            f"payload {r.payload_bits:.3f} bits <= {bound:.3f}; residual constant "
                            f"{r.gap_to_selection_bound:.3f} bits"))
    return checks


def suite_determinism(trials: int | None = None) -> list[Check]:
    """Byte-identical containers and reconstructions; records are isolated."""
    n = _n(2_000, trials)
    checks = []
    cases = [(UniformAdditiveMechanism(16), "dq"), (gaussian_additive(), "lq"),
             (UniformAdditiveMechanism(16), "pfr"), (binary_channel(), "rejection")]
    for mech, codec in cases:
        xs = [mech.source_sample(DeterministicStream(SEED, (1 << 62) + i)) for i in range(n)]
        first = encode_records(mech, codec, xs, SEED).to_bytes()
        second = encode_records(mech, codec, xs, SEED).to_bytes()
        checks.append(Check(f"determinism/encode/{codec}", first == second, 0.0, 0.0, n,
                            "identical containers" if first == second else "containers differ"))
        here = format_records(decode_records(Container.from_bytes(first)))
        there = _decode_in_subprocess(first)
        checks.append(Check(f"determinism/decode/{codec}", here == there, 0.0, 0.0, n,
                            "identical reconstructions across processes" if here == there
                            else "reconstructions differ across processes"))
    checks.append(_isolation_check(n))
    return checks


def _decode_in_subprocess(blob: bytes) -> str:
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "in.recb")
        with open(path, "wb") as fh:
            fh.write(blob)
        code = ("import sys; from relentcode.container import *; "
                "sys.stdout.write(format_records(decode_records(Container.from_bytes(open(sys.argv[1],'rb').read()))))")
        env = dict(os.environ)
        pkg_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        env["PYTHONPATH"] = pkg_root + os.pathsep + env.get("PYTHONPATH", "")
        out = subprocess.run([sys.executable, "-c", code, path], capture_output=True, text=True,
                             check=True, env=env)
        return out.stdout


def _isolation_check(n: int) -> Check:
    """Flip a mantissa bit of one pfr record; every later record must decode unchanged.

    The flipped bit keeps the codeword length, so parsing stays aligned and only
    substream isolation is under test.
    """
    mech = UniformAdditiveMechanism(16)
    xs = [mech.source_sample(DeterministicStream(SEED, (1 << 61) + i)) for i in range(n)]
    container = encode_records(mech, "pfr", xs, SEED)
    original = decode_records(container)
    cursor = BitCursor(container.payload)
    target = None
    for i in range(n // 2):
        if elias_delta_decode(container.payload, cursor) >= 2:
            target = (i, cursor.position - 1)
            break
    if target is None:
        return Check("determinism/isolation", False, detail="no record with a mantissa bit found")
    record, bit = target
    raw = bytearray(container.payload.data)
    raw[bit >> 3] ^= 0x80 >> (bit & 7)
    damaged = Container(container.header, BitString(bytes(raw), container.payload.length))
    decoded = decode_records(damaged)
    later_ok = decoded[record + 1:] == original[record + 1:]
    earlier_ok = decoded[:record] == original[:record]
    return Check("determinism/isolation", later_ok and earlier_ok, record, 0.0, n,
                 f"record {record} damaged; {n - record - 1} later records "
                 f"{'unchanged' if later_ok else 'CHANGED'}")


SUITES: dict[str, Callable[[int | None], list[Check]]] = {
    "exactness": suite_exactness,
    "runtime": suite_runtime,
    "theorem1": suite_theorem1,
    "dither": suite_dither,
    "dq-rate": suite_dq_rate,
    "smsu": suite_smsu,
    "lq": suite_lq,
    "gaussian-logsup": suite_gaussian_logsup,
    "elias": suite_elias,
    "selection-rate": suite_selection_rate,
    "determinism": suite_determinism,
}

FAULTS = ("biased-uniform",)


@contextlib.contextmanager
def injected_fault(name: str | None) -> Iterator[None]:
    """Deliberately break the randomness layer to prove the suite can fail."""
    if name is None:
        yield
        return
    if name != "biased-uniform":
        raise ValueError(f"unknown fault {name!r}; choose from {', '.join(FAULTS)}")
    original = randomness.uniform_from_bits

    def biased(bits: int) -> float:
        return original(bits) ** 0.9

    with mock.patch.object(randomness, "uniform_from_bits", biased):
        yield


def run_suites(names: list[str] | None = None, trials: int | None = None,
               fault: str | None = None) -> list[Check]:
    names = names or list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    checks = []
    with injected_fault(fault):
        for name in names:
            checks.extend(SUITES[name](trials))
    return checks
