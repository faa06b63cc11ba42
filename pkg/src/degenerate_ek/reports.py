"""Text and CSV renderings of labeling and asymptotic results."""

from __future__ import annotations

from fractions import Fraction

from .asymptotics import AsymptoticLaw, format_ext
from .labeling import LabelingResult


def _q(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, (Fraction, int)):
        return format_ext(Fraction(value))
    return format_ext(value)


def labeling_report(result: LabelingResult) -> str:
    lines = [result.table(), ""]
    saddles = ", ".join(s.display_name for s in result.separating_saddles) or "none"
    lines.append(f"separating saddles: {saddles}")
    lines.append(f"global minimum: {result.underline.display_name}")
    lines.extend(result.gener.lines())
    return "\n".join(lines) + "\n"


def asymptotics_table(law: AsymptoticLaw) -> str:
    rows = ["minimum | S | mu | v | beta | alpha | tilde_j"]
    for e in law.entries:
        name = e.minimum.display_name
        if e.is_underline:
            rows.append(f"{name} | inf | - | - | - | - | -")
            continue
        tilde = "{" + ", ".join(s.display_name for s in e.tilde_j) + "}"
        rows.append(f"{name} | {_q(e.S)} | {_q(e.mu)} | {e.v!r} | {_q(e.beta)} | {_q(e.alpha)} | {tilde}")
    return "\n".join(rows)


def asymptotics_report(law: AsymptoticLaw) -> str:
    lines = [asymptotics_table(law), ""]
    lines.append(f"alpha0: {_q(law.alpha0)}")
    lines.append(f"gap exponent: {_q(law.gap_exponent)} (nu_bar = {law.nu_bar})")
    for e in law.finite():
        for c in e.classes:
            lines.append(f"saddle {c.saddle.display_name}: class {c.kind}, gamma {_q(c.gamma)}")
    for saddle, criteria in law.certification.items():
        lines.append(f"certification {saddle}: {'; '.join(criteria)}")
    lines.append(f"assumption alpha0 > 0: {'ok' if law.alpha0 > 0 else 'violated'}")
    return "\n".join(lines) + "\n"


def asymptotics_csv(law: AsymptoticLaw) -> str:
    rows = ["minimum,S,mu,v,beta,alpha,tilde_j"]
    for e in law.entries:
        if e.is_underline:
            rows.append(f"{e.minimum.display_name},inf,,,,,")
            continue
        tilde = " ".join(s.display_name for s in e.tilde_j)
        rows.append(",".join([e.minimum.display_name, _q(e.S), _q(e.mu), repr(float(e.v)), _q(e.beta),
                              _q(e.alpha), tilde]))
    return "\n".join(rows) + "\n"
