import time
from contextlib import contextmanager
from fractions import Fraction as F
from pathlib import Path

from degenerate_ek.polynomial import parse_poly
from degenerate_ek.potential import CriticalPoint, parse_spec

DATA = Path(__file__).resolve().parent.parent / "data"


def point(nu, t, location=None, value=0, U=None, name="", label=0):
    d = len(nu)
    loc = tuple(F(c) for c in (location or [0] * d))
    maps = None if U is None else tuple(parse_poly(u, d) for u in U)
    return CriticalPoint(loc, F(value), tuple(nu), tuple(F(v) for v in t), maps, name, label)


def morse_min(d, t=None, location=None, value=0, label=0):
    return point([2] * d, t or [1] * d, location, value, label=label)


def load(name, validate=True):
    return parse_spec((DATA / name).read_text(), validate=validate)


ACCEPTANCE_RESULTS = []


@contextmanager
def criterion(number, title, limit_seconds):
    """Time one acceptance criterion and record a PASS/FAIL line for it.
    Overrunning the runtime limit fails the criterion."""
    start = time.perf_counter()
    failure = None
    try:
        yield
    except Exception as exc:
        message = str(exc).splitlines()[0] if str(exc) else "failed"
        failure = f"{type(exc).__name__}: {message}"
        raise
    finally:
        elapsed = time.perf_counter() - start
        if failure is None and elapsed > limit_seconds:
            failure = f"runtime over the {limit_seconds} s limit"
        line = f"ACCEPTANCE {number:>2} {'FAIL' if failure else 'PASS'}  {title}  ({elapsed:.2f} s)"
        if failure:
            line += f"  [{failure}]"
        ACCEPTANCE_RESULTS.append(line)
        print(line)
    assert elapsed <= limit_seconds, f"criterion {number} took {elapsed:.1f} s (limit {limit_seconds} s)"
