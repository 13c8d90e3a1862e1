"""Every acceptance criterion at its stated sample size and tolerance.

One PASS/FAIL line per check is printed in the terminal summary (and to
stdout when run with ``-s`` or as a script).
"""

import pytest

from relentcode.verification import SUITES

# criterion number -> suite that implements it
CRITERIA = {
    1: "exactness",
    2: "runtime",
    3: "theorem1",
    4: "dither",
    5: "dq-rate",
    6: "smsu",
    7: "lq",
    8: "gaussian-logsup",
    9: "elias",
    10: "selection-rate",
    11: "determinism",
}

RESULTS: list[str] = []


def test_every_suite_is_mapped():
    assert sorted(CRITERIA.values()) == sorted(SUITES)


@pytest.mark.slow
@pytest.mark.parametrize("number,suite", sorted(CRITERIA.items()), ids=lambda v: str(v))
def test_criterion(number, suite):
    checks = SUITES[suite](None)
    assert checks
    for c in checks:
        line = f"criterion {number:>2} {c.line()}"
        RESULTS.append(line)
        print(line)
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)


if __name__ == "__main__":
    bad = 0
    for number, suite in sorted(CRITERIA.items()):
        for c in SUITES[suite](None):
            print(f"criterion {number:>2} {c.line()}")
            bad += not c.passed
    raise SystemExit(1 if bad else 0)
