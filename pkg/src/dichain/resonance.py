"""Self-interaction resonance analysis.

A carrier wave (omega, theta) regenerates itself at (2 omega, 2 theta);
whether that point again satisfies the dispersion relation decides
between plain transport of the envelope and coupled amplitude dynamics.
This module locates acoustic->optical resonances, solves the explicit
one-parameter family for an exact resonance at prescribed wavenumber,
and verifies numerically that the remaining second- and third-order
resonances cannot occur.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .model import ChainParams, make_params, validate_params
from .spectrum import ACOUSTIC, OPTICAL, Wave, det_h, omega

ROOT_TOL = 1e-12
GRID_SIZE = 2048


class DomainError(ValueError):
    """A family-ratio solution failed its dispersion-level verification."""


class NotResonant(ValueError):
    """Raised when a wave pair does not form an exact resonant pair."""


class ModeMismatch(ValueError):
    """Raised when a wave pair fails the claimed resonance-mode conditions."""


@dataclass(frozen=True)
class ReducedCoords:
    """Substituted coordinates in which the resonance conditions are scalar
    equations: c = (cos theta + 1)/2, f = 16 v11 v21, d1 = (c1+c2)^2/f,
    d2 = (c1-c2)^2/f."""

    c: float
    d1: float
    d2: float
    f: float

    def omega_sq(self, branch: str) -> float:
        s = 1.0 if branch == OPTICAL else -1.0
        return 0.5 * np.sqrt(self.f) * (np.sqrt(self.d1) + s * np.sqrt(self.d2 + self.c))


def reduced_coords(p: ChainParams, theta: float) -> ReducedCoords:
    f = 16.0 * p.V1.k1 * p.V2.k1
    return ReducedCoords(
        c=float((np.cos(theta) + 1.0) / 2.0),
        d1=float((p.c1 + p.c2) ** 2 / f),
        d2=float((p.c1 - p.c2) ** 2 / f),
        f=float(f),
    )


def _resonance_defect(p: ChainParams, theta):
    """h(theta) = 2 omega_-(theta) - omega_+(2 theta)."""
    return 2.0 * omega(p, ACOUSTIC, theta) - omega(p, OPTICAL, 2.0 * np.asarray(theta))


def find_acoustic_optical_resonance(p: ChainParams, n_grid: int = GRID_SIZE):
    """All theta in [0, pi] with 2 omega_-(theta) = omega_+(2 theta).

    Sign changes of the defect on a uniform grid are refined by bisection
    until |h| <= 1e-12; grid points already below the tolerance (tangent
    roots such as theta=0 in the exactly-resonant family) are kept as is.
    Negative roots are the mirror images and are not returned.
    """
    thetas = np.linspace(0.0, np.pi, n_grid)
    h = _resonance_defect(p, thetas)
    roots = [float(t) for t, hv in zip(thetas, h) if abs(hv) <= ROOT_TOL]
    for i in range(n_grid - 1):
        if abs(h[i]) <= ROOT_TOL or abs(h[i + 1]) <= ROOT_TOL:
            continue
        if h[i] * h[i + 1] < 0.0:
            root = brentq(lambda t: _resonance_defect(p, t), thetas[i], thetas[i + 1],
                          xtol=1e-15, rtol=8.9e-16)
            if abs(_resonance_defect(p, root)) <= ROOT_TOL:
                roots.append(float(root))
    roots.sort()
    dedup = []
    for r in roots:
        if not dedup or r - dedup[-1] > 1e-9:
            dedup.append(r)
    return dedup


def family_params(gamma: float, b: float, a: float = 1.0, N: int = 0) -> ChainParams:
    """The explicit parameter family v11=a, v21=gamma*a, w11=w21=b."""
    p = make_params(v1=(a, 0.0, 0.0), v2=(gamma * a, 0.0, 0.0),
                    w1=(b, 0.0, 0.0), w2=(b, 0.0, 0.0), N=N, validate=False)
    validate_params(p)
    return p


def solve_family_ratio(gamma: float, c: float):
    """Ratio b/a making 2 omega_-(theta(c)) = omega_+(2 theta(c)) exact in
    the family v11=a, v21=gamma*a, w11=w21=b.

    Solves 9*d1(r) = 17*delta + 16c + (2c-1)^2 + 8*sqrt(delta+c)*
    sqrt(delta+(2c-1)^2) with the direct expansion
    d1(r) = ((1+gamma)+r)^2/(4*gamma), delta = (gamma-1)^2/(4*gamma).
    Returns the positive root, or None when no positive root exists.
    Every returned value is verified against the dispersion relation.
    """
    if gamma <= 1.0:
        raise ValueError("family requires gamma > 1")
    if not 0.0 <= c <= 1.0:
        raise ValueError("c must lie in [0, 1]")
    delta = (gamma - 1.0) ** 2 / (4.0 * gamma)
    rhs = (17.0 * delta + 16.0 * c + (2.0 * c - 1.0) ** 2
           + 8.0 * np.sqrt(delta + c) * np.sqrt(delta + (2.0 * c - 1.0) ** 2))
    disc = 4.0 * gamma * rhs / 9.0
    if disc < 0.0:
        return None
    r = -(1.0 + gamma) + np.sqrt(disc)
    if r <= 0.0:
        return None
    theta = float(np.arccos(2.0 * c - 1.0))
    p = family_params(gamma, r)
    defect = abs(_resonance_defect(p, theta))
    if defect > 1e-9:
        raise DomainError(
            f"family ratio {r} fails the dispersion oracle: |2w_-(th)-w_+(2th)|={defect:.3e}")
    return float(r)


def optical_closure_margin(p: ChainParams, n_grid: int = GRID_SIZE) -> float:
    """min over theta of the distance of 2 omega_+(theta) from both
    branches at 2 theta; strictly positive means an optical wave cannot
    generate any wave by self-interaction."""
    thetas = np.linspace(0.0, np.pi, n_grid)
    two_opt = 2.0 * omega(p, OPTICAL, thetas)
    m = np.minimum(np.abs(two_opt - omega(p, OPTICAL, 2.0 * thetas)),
                   np.abs(two_opt - omega(p, ACOUSTIC, 2.0 * thetas)))
    return float(m.min())


def third_order_margin(p: ChainParams, n_grid: int = GRID_SIZE) -> float:
    """min over theta of omega_-(theta) + omega_+(2 theta) - omega_+(3 theta);
    strictly positive rules out this third-order resonance."""
    thetas = np.linspace(0.0, np.pi, n_grid)
    m = omega(p, ACOUSTIC, thetas) + omega(p, OPTICAL, 2.0 * thetas) - omega(p, OPTICAL, 3.0 * thetas)
    return float(m.min())


def acoustic_acoustic_scan(gamma: float, n_grid: int = 1024):
    """Scan the acoustic->acoustic resonance obstruction over the family.

    Returns (c_e, max_g) where g~(c) = 8 delta - 9 + 16c + (2c-1)^2
    - 8 sqrt(delta+c) sqrt(delta+(2c-1)^2) and c_e is the lower end of
    the interval on which the pre-squaring right-hand side is
    nonnegative.  max_g <= 0 (up to roundoff) certifies that no
    acoustic->acoustic resonance exists in the family; the maximum sits
    at c=1 where g~ vanishes identically.
    """
    if gamma <= 1.0:
        raise ValueError("family requires gamma > 1")
    delta = (gamma - 1.0) ** 2 / (4.0 * gamma)
    c_e = max(0.0, (5.0 - np.sqrt(15.0 * delta + 24.0)) / 2.0)

    def g(c):
        return (8.0 * delta - 9.0 + 16.0 * c + (2.0 * c - 1.0) ** 2
                - 8.0 * np.sqrt(delta + c) * np.sqrt(delta + (2.0 * c - 1.0) ** 2))

    cs = np.linspace(c_e, 1.0, n_grid)
    gv = g(cs)
    i = int(np.argmax(gv))
    lo = cs[max(i - 1, 0)]
    hi = cs[min(i + 1, n_grid - 1)]
    best = gv[i]
    if hi > lo:
        res = minimize_scalar(lambda c: -g(c), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
        best = max(best, -res.fun)
    return float(c_e), float(best)


@dataclass(frozen=True)
class ResonanceCheck:
    label: str
    omega: float
    theta: float
    det: complex
    tol: float

    @property
    def ok(self) -> bool:
        return abs(self.det) >= self.tol


@dataclass(frozen=True)
class NonResonanceReport:
    mode: str
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)


def _tol_res(omega_val: float) -> float:
    return 1e-6 * (1.0 + omega_val ** 4)


def wrap_theta(theta: float) -> float:
    """Wrap a wavenumber to (-pi, pi]."""
    t = (theta + np.pi) % (2.0 * np.pi) - np.pi
    if t <= -np.pi + 1e-15:
        t = np.pi
    return float(t)


NON_RESONANT = "NonResonant"
RESONANT = "Resonant"


def check_nonresonance(p: ChainParams, w1: Wave, w2: Wave, mode: str) -> NonResonanceReport:
    """Verify the determinant conditions backing the claimed regime.

    NonResonant: |det H| away from zero at (2w1), (2w2), (w1+-w2).
    Resonant: (omega2, theta2) = (2 omega1, 2 theta1 mod 2pi) exactly and
    |det H(k omega1, k theta1)| away from zero for k = 3, 4.
    Raises ModeMismatch when the claimed mode's conditions fail.
    """
    for w in (w1, w2):
        if abs(det_h(p, w.omega, w.theta)) > 1e-10 * (1.0 + w.omega ** 4):
            raise ValueError(f"wave {w} does not satisfy the dispersion relation")
    checks = []
    if mode == NON_RESONANT:
        pts = [("2*w1", 2 * w1.omega, 2 * w1.theta),
               ("2*w2", 2 * w2.omega, 2 * w2.theta),
               ("w1+w2", w1.omega + w2.omega, w1.theta + w2.theta),
               ("w1-w2", w1.omega - w2.omega, w1.theta - w2.theta)]
    elif mode == RESONANT:
        if abs(w2.omega - 2.0 * w1.omega) > 1e-10:
            raise ModeMismatch(
                f"not a resonant pair: omega2={w2.omega} vs 2*omega1={2 * w1.omega}")
        if abs(wrap_theta(w2.theta - 2.0 * w1.theta)) > 1e-10:
            raise ModeMismatch(
                f"not a resonant pair: theta2={w2.theta} vs 2*theta1 mod 2pi")
        pts = [("3*w1", 3 * w1.omega, 3 * w1.theta),
               ("4*w1", 4 * w1.omega, 4 * w1.theta)]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    for label, om_v, th_v in pts:
        checks.append(ResonanceCheck(label, float(om_v), float(th_v),
                                     complex(det_h(p, om_v, th_v)), _tol_res(om_v)))
    report = NonResonanceReport(mode, tuple(checks))
    if not report.passed:
        bad = [c.label for c in checks if not c.ok]
        raise ModeMismatch(f"{mode} determinant condition fails at {', '.join(bad)}")
    return report
