"""Fit lambda(h) = v h^mu e^{-2S/h} to computed eigenvalues and grade the
result against the predicted law."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .asymptotics import AsymptoticLaw, MinimumLaw, eyring_kramers_values
from .errors import FloorError, InvariantError
from .spectrum import SpectralTable, track_branches

MIN_POINTS = 4
OVERLAP_THRESHOLD = 0.9


@dataclass
class Thresholds:
    S_rel: float = 0.01
    mu_abs: float = 0.15
    prefactor_rel: float = 0.20
    gap_band: float = 4.0
    match_rel: float = 0.10


@dataclass
class FitResult:
    branch: int
    S: float
    mu: float
    v: float
    stderr: dict                  # standard errors of S, mu, log_v
    covariance: np.ndarray        # stage-1 covariance of (log_v, mu, S)
    h: np.ndarray                 # h values used, descending
    values: np.ndarray
    residuals: np.ndarray         # ln lambda - model
    overlap: float = 1.0          # worst eigenvector overlap along the branch

    @property
    def log_v(self):
        return math.log(self.v)

    def model(self, h):
        h = np.asarray(h, dtype=float)
        return self.v * h ** self.mu * np.exp(-2.0 * self.S / h)


def _design(hs):
    return np.vstack([np.ones_like(hs), np.log(hs), -2.0 / hs]).T


def fit_arrays(h_values: Sequence[float], values: Sequence[float], branch: int = 0,
               floors: Sequence[float] | None = None, overlap: float = 1.0) -> FitResult:
    """Two-stage fit on explicit (h, lambda) samples.

    Stage 1 regresses ln lambda on (1, ln h, -2/h) and keeps S.  Stage 2
    regresses ln lambda + 2S/h on (1, ln h) for mu and ln v.
    """
    hs = np.asarray(h_values, dtype=float)
    lam = np.asarray(values, dtype=float)
    order = np.argsort(-hs)
    hs, lam = hs[order], lam[order]
    floor = np.zeros_like(hs) if floors is None else np.asarray(floors, dtype=float)[order]
    usable = np.isfinite(lam) & (lam > floor) & (lam > 0)
    if not usable.all():
        raise FloorError(f"branch {branch} is below the floating floor at h = "
                         f"{', '.join(f'{h:g}' for h in hs[~usable])}", tuple(hs[usable]))
    if len(hs) < MIN_POINTS:
        raise InvariantError("points", f"the fit needs at least {MIN_POINTS} values of h, got {len(hs)}")
    if np.any(np.diff(lam) >= 0):
        raise InvariantError("monotone", f"branch {branch} does not decrease as h decreases")
    y = np.log(lam)
    A = _design(hs)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = max(len(hs) - 3, 1)
    sigma2 = float(np.sum((A @ coef - y) ** 2)) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    S = float(coef[2])
    B = A[:, :2]
    z = y + 2.0 * S / hs
    coef2, *_ = np.linalg.lstsq(B, z, rcond=None)
    log_v, mu = float(coef2[0]), float(coef2[1])
    resid = y - (log_v + mu * np.log(hs) - 2.0 * S / hs)
    stderr = {"S": math.sqrt(cov[2, 2]), "mu": math.sqrt(cov[1, 1]), "log_v": math.sqrt(cov[0, 0])}
    return FitResult(branch, S, mu, math.exp(log_v), stderr, cov, hs, lam, resid, overlap)


def fit_law(table: SpectralTable, branch: int, track: bool = True) -> FitResult:
    """Fit one eigenvalue branch of a sweep.  With ``track`` the branch
    follows eigenvector overlap; a branch whose overlap drops below 0.9 is
    rejected."""
    rows = [r for r in table.rows if r.ok]
    if not 0 <= branch < table.k:
        raise ValueError(f"branch must lie in [0, {table.k})")
    overlap = 1.0
    indices = [branch] * len(rows)
    if track and all(r.vectors is not None for r in rows) and len(rows) > 1:
        assignments, worst = track_branches(SpectralTable(rows, table.k, table.scheme))
        indices = [a[branch] for a in assignments]
        overlap = float(worst[branch])
        if overlap < OVERLAP_THRESHOLD:
            raise InvariantError("branch-tracking", f"eigenvector overlap along branch {branch} "
                                                    f"drops to {overlap:.3f}")
    hs = [r.h for r in rows]
    vals = [r.values[i] for r, i in zip(rows, indices)]
    floors = [r.floor for r in rows]
    return fit_arrays(hs, vals, branch, floors, overlap)


def usable_h(table: SpectralTable, branch: int):
    """h values where the branch sits above the floating floor."""
    return [r.h for r in table.rows if r.ok and r.values[branch] > max(r.floor, 0.0)]


@dataclass
class GapCheck:
    h: np.ndarray
    scaled: np.ndarray       # lambda_{n0+1} h^{-exponent}
    exponent: Fraction
    band: float

    @property
    def spread(self):
        return float(self.scaled.max() / self.scaled.min())

    @property
    def ok(self):
        return bool(np.all(self.scaled > 0)) and self.spread <= self.band


def gap_check(table: SpectralTable, n0: int, exponent, band: float = 4.0) -> GapCheck:
    """lambda_{n0+1} h^{-exponent} must stay in a band of the given factor."""
    if n0 >= table.k:
        raise ValueError("the table holds too few eigenvalues for the gap check")
    rows = [r for r in table.rows if r.ok]
    hs = np.array([r.h for r in rows])
    scaled = np.array([r.values[n0] for r in rows]) * hs ** (-float(exponent))
    return GapCheck(hs, scaled, Fraction(exponent), band)


@dataclass
class Verdict:
    minimum: str
    predicted: MinimumLaw
    fit: FitResult
    dS_rel: float
    dmu: float
    dv_rel: float
    prefactor_ratio: float      # lambda / law at the smallest usable h
    S_ok: bool
    mu_ok: bool
    prefactor_ok: bool          # advisory

    @property
    def ok(self):
        return self.S_ok and self.mu_ok


@dataclass
class VerdictReport:
    verdicts: list
    gap: GapCheck | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)

    @property
    def ok(self):
        return all(v.ok for v in self.verdicts) and (self.gap is None or self.gap.ok)

    def text(self) -> str:
        t = self.thresholds
        out = []
        for v in self.verdicts:
            f = v.fit
            out.append(f"minimum {v.minimum} (branch {f.branch + 1}, {len(f.h)} points, "
                       f"h in [{f.h.min():g}, {f.h.max():g}])")
            out.append(f"  S   fit {f.S:.6g} +- {f.stderr['S']:.2g}  predicted {float(v.predicted.S):.6g}  "
                       f"rel delta {v.dS_rel:.3g}  {'PASS' if v.S_ok else 'FAIL'} (<= {t.S_rel:g})")
            out.append(f"  mu  fit {f.mu:.6g} +- {f.stderr['mu']:.2g}  predicted {v.predicted.mu}  "
                       f"delta {v.dmu:.3g}  {'PASS' if v.mu_ok else 'FAIL'} (<= {t.mu_abs:g})")
            out.append(f"  v   fit {f.v:.6g}  predicted {v.predicted.v:.6g}  rel delta {v.dv_rel:.3g}")
            out.append(f"  lambda / law at h = {f.h.min():g}: {v.prefactor_ratio:.6g}  "
                       f"{'ok' if v.prefactor_ok else 'advisory'} (within {t.prefactor_rel:g})")
        if self.gap is not None:
            g = self.gap
            out.append(f"gap: lambda_(n0+1) h^-{g.exponent} in [{g.scaled.min():.6g}, {g.scaled.max():.6g}], "
                       f"spread {g.spread:.3g}  {'PASS' if g.ok else 'FAIL'} (band {g.band:g})")
        out.append(f"verdict: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(out) + "\n"

    def csv(self) -> str:
        head = "minimum,branch,S_fit,S_pred,dS_rel,mu_fit,mu_pred,dmu,v_fit,v_pred,dv_rel,ratio_smallest_h,ok"
        rows = [head]
        for v in self.verdicts:
            f = v.fit
            rows.append(",".join([v.minimum, str(f.branch + 1), repr(f.S), repr(float(v.predicted.S)),
                                  repr(v.dS_rel), repr(f.mu), str(v.predicted.mu), repr(v.dmu), repr(f.v),
                                  repr(v.predicted.v), repr(v.dv_rel), repr(v.prefactor_ratio),
                                  "1" if v.ok else "0"]))
        return "\n".join(rows) + "\n"


def match_minimum(fit: FitResult, law: AsymptoticLaw, rel: float = 0.10) -> MinimumLaw:
    """The finite-barrier minimum closest in S; none within ``rel`` is an error."""
    best = None
    for e in law.finite():
        d = abs(fit.S - float(e.S)) / float(e.S)
        if best is None or d < best[0]:
            best = (d, e)
    if best is None or best[0] > rel:
        raise InvariantError("match", f"no minimum with S within {rel:.0%} of the fitted {fit.S:.6g}")
    return best[1]


def compare(fit: FitResult, law: AsymptoticLaw, thresholds: Thresholds | None = None,
            minimum: MinimumLaw | None = None) -> Verdict:
    t = thresholds or Thresholds()
    entry = minimum or match_minimum(fit, law, t.match_rel)
    S, mu = float(entry.S), float(entry.mu)
    dS = abs(fit.S - S) / S
    dmu = abs(fit.mu - mu)
    dv = fit.v / entry.v - 1
    h_min = float(fit.h.min())
    ratio = float(fit.values[np.argmin(fit.h)]) / eyring_kramers_values(entry.v, entry.mu, entry.S, h_min)
    return Verdict(entry.minimum.display_name, entry, fit, dS, dmu, dv, ratio,
                   dS <= t.S_rel, dmu <= t.mu_abs, abs(ratio - 1) <= t.prefactor_rel)


def branches_for(law: AsymptoticLaw):
    """Eigenvalue index per finite-barrier minimum: higher barriers give
    smaller eigenvalues, index 0 is the ground state."""
    finite = sorted(law.finite(), key=lambda e: (-float(e.S), -float(e.mu)))
    return [(i + 1, e) for i, e in enumerate(finite)]


def verify_table(table: SpectralTable, law: AsymptoticLaw, thresholds: Thresholds | None = None,
                 gap: bool = True) -> VerdictReport:
    t = thresholds or Thresholds()
    verdicts = []
    for index, entry in branches_for(law):
        if index >= table.k:
            break
        fit = fit_law(table, index)
        verdicts.append(compare(fit, law, t))
    n0 = len(law.entries)
    g = gap_check(table, n0, law.gap_exponent, t.gap_band) if gap and n0 < table.k else None
    return VerdictReport(verdicts, g, t)


def plot_data(fit: FitResult):
    """Two gnuplot-ready tables: ln lambda against 1/h, and
    ln lambda + 2S/h against ln h."""
    pairs = [(float(h), float(v)) for h, v in zip(fit.h, fit.values)]
    first = "".join(f"{1 / h!r} {math.log(v)!r}\n" for h, v in pairs)
    second = "".join(f"{math.log(h)!r} {math.log(v) + 2 * fit.S / h!r}\n" for h, v in pairs)
    return ("# 1/h  ln(lambda)\n" + first, "# ln(h)  ln(lambda) + 2S/h\n" + second)
