"""Diatomic chain model: parameters, forces, and the norms used by the
error-scaling experiments.

The chain consists of alternating atoms with nearest-neighbor bond forces
and stabilizing on-site forces.  Atoms are grouped into cells of two,
``u[j] = (u_{j,1}, u_{j,2})``; the equations of motion split into a linear
stencil ``L`` and the quadratic/cubic remainder ``M``:

    udotdot = L(u) + M(u)

with periodic boundary conditions in the cell index.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class StabilityError(ValueError):
    """Raised when chain parameters violate a stability inequality."""


@dataclass(frozen=True)
class PotentialCoeffs:
    """Force coefficients of one interaction or on-site potential.

    The force is F(x) = k1*x + k2*x**2 + k3*x**3; the potential is its
    antiderivative k1*x^2/2 + k2*x^3/3 + k3*x^4/4.  Higher terms are
    deliberately absent (they sit below the error budget of every
    experiment carried out here).
    """

    k1: float
    k2: float = 0.0
    k3: float = 0.0

    def force(self, x):
        return x * (self.k1 + x * (self.k2 + x * self.k3))

    def potential(self, x):
        return x * x * (self.k1 / 2.0 + x * (self.k2 / 3.0 + x * self.k3 / 4.0))


@dataclass(frozen=True)
class ChainParams:
    """All chain coefficients plus the derived constants.

    V1/W1 act on the first atom of a cell, V2/W2 on the second.  The
    mass weights are normalized with v_ref = V2.k1 so that m_w = 1.
    """

    V1: PotentialCoeffs
    V2: PotentialCoeffs
    W1: PotentialCoeffs
    W2: PotentialCoeffs
    N: int = 0

    @property
    def c1(self) -> float:
        return 2.0 * self.V1.k1 + self.W1.k1

    @property
    def c2(self) -> float:
        return 2.0 * self.V2.k1 + self.W2.k1

    @property
    def v_ref(self) -> float:
        return self.V2.k1

    @property
    def M_w(self) -> float:
        return self.v_ref / self.V1.k1

    @property
    def m_w(self) -> float:
        return self.v_ref / self.V2.k1


def make_params(v1=(1.0, 0.0, 0.0), v2=(2.0, 0.0, 0.0), w1=(1.0, 0.0, 0.0),
                w2=(1.0, 0.0, 0.0), N=0, validate=True) -> ChainParams:
    """Convenience constructor from (k1, k2, k3) triples."""
    p = ChainParams(PotentialCoeffs(*v1), PotentialCoeffs(*v2),
                    PotentialCoeffs(*w1), PotentialCoeffs(*w2), N=N)
    if validate:
        validate_params(p)
    return p


def validate_params(p: ChainParams) -> None:
    """Check every stability inequality; raise StabilityError naming the
    first violated one."""
    checks = [
        (p.V1.k1 > 0, "v_{1,1}>0"),
        (p.V2.k1 > 0, "v_{2,1}>0"),
        (p.W1.k1 > 0, "w_{1,1}>0"),
        (p.W2.k1 > 0, "w_{2,1}>0"),
        (4.0 * p.V1.k1 + p.W1.k1 > 0, "4v_{1,1}+w_{1,1}>0"),
        (4.0 * p.V2.k1 + p.W2.k1 > 0, "4v_{2,1}+w_{2,1}>0"),
        (p.c2 > p.c1, "c2>c1"),
        (p.c1 * p.c2 > 4.0 * p.V1.k1 * p.V2.k1, "c1*c2>4*v_{1,1}*v_{2,1}"),
    ]
    for ok, name in checks:
        if not ok:
            raise StabilityError(
                f"{name} violated (c1={p.c1}, c2={p.c2}, "
                f"v11={p.V1.k1}, v21={p.V2.k1}, w11={p.W1.k1}, w21={p.W2.k1})")


@dataclass
class LatticeState:
    """Positions and velocities of N cells, two atoms each."""

    pos: np.ndarray
    vel: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float)
        self.vel = np.asarray(self.vel, dtype=float)
        if self.pos.shape != self.vel.shape or self.pos.ndim != 2 or self.pos.shape[1] != 2:
            raise ValueError("pos and vel must both have shape (N, 2)")

    @classmethod
    def zeros(cls, N: int, t: float = 0.0) -> "LatticeState":
        return cls(np.zeros((N, 2)), np.zeros((N, 2)), t)

    def copy(self) -> "LatticeState":
        return LatticeState(self.pos.copy(), self.vel.copy(), self.t)

    @property
    def N(self) -> int:
        return self.pos.shape[0]


def cell_pack(x) -> np.ndarray:
    """Pack a flat atom array of length 2N into cells: u_{j,1}=x_{2j+1},
    u_{j,2}=x_{2j}."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size % 2 != 0:
        raise ValueError(f"expected a flat array of even length, got shape {x.shape}")
    u = np.empty((x.size // 2, 2))
    u[:, 0] = x[1::2]
    u[:, 1] = x[0::2]
    return u


def cell_unpack(u) -> np.ndarray:
    """Inverse of cell_pack."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != 2:
        raise ValueError(f"expected shape (N, 2), got {u.shape}")
    x = np.empty(2 * u.shape[0])
    x[1::2] = u[:, 0]
    x[0::2] = u[:, 1]
    return x


def _stretches(pos):
    """Bond stretches around cell j.

    s_a[j] = u_{j+1,2} - u_{j,1}   (bond to the right of atom (j,1))
    s_b[j] = u_{j,1}   - u_{j,2}   (bond inside cell j)
    s_c[j] = u_{j,2}   - u_{j-1,1} (bond to the left of atom (j,2)) = s_a[j-1]
    """
    u1 = pos[:, 0]
    u2 = pos[:, 1]
    s_a = np.roll(u2, -1) - u1
    s_b = u1 - u2
    s_c = np.roll(s_a, 1)
    return s_a, s_b, s_c


def linear_apply(p: ChainParams, pos) -> np.ndarray:
    """Apply the linear operator L.

    Row 1: v11*(u_{j+1,2} - 2u_{j,1} + u_{j,2}) - w11*u_{j,1}
    Row 2: v21*(u_{j,1} - 2u_{j,2} + u_{j-1,1}) - w21*u_{j,2}

    The sign of the u_{j-1,1} term is plus: that is what the substitution
    from the two-atom displacement equations produces, and what the
    dispersion matrix encodes.
    """
    pos = np.asarray(pos, dtype=float)
    s_a, s_b, s_c = _stretches(pos)
    out = np.empty_like(pos)
    out[:, 0] = p.V1.k1 * (s_a - s_b) - p.W1.k1 * pos[:, 0]
    out[:, 1] = p.V2.k1 * (s_b - s_c) - p.W2.k1 * pos[:, 1]
    return out


def nonlinear_apply(p: ChainParams, pos) -> np.ndarray:
    """Apply the quadratic+cubic force remainder M(u)."""
    pos = np.asarray(pos, dtype=float)
    s_a, s_b, s_c = _stretches(pos)

    def fnl(c: PotentialCoeffs, x):
        return x * x * (c.k2 + c.k3 * x)

    out = np.empty_like(pos)
    out[:, 0] = fnl(p.V1, s_a) - fnl(p.V1, s_b) - fnl(p.W1, pos[:, 0])
    out[:, 1] = fnl(p.V2, s_b) - fnl(p.V2, s_c) - fnl(p.W2, pos[:, 1])
    return out


def force(p: ChainParams, pos) -> np.ndarray:
    """Full right-hand side L(u) + M(u): literally the sum of the two
    operators, so integrator forces agree with them bit for bit."""
    return linear_apply(p, pos) + nonlinear_apply(p, pos)


def energy_norm(s: LatticeState, p: ChainParams) -> float:
    """Energy norm ||(u, udot)||_Y preserved exactly by the linear flow.

    Position part: sum_j v_ref*(|u_{j+1,2}-u_{j,1}|^2 + |u_{j,1}-u_{j,2}|^2)
    + M_w*w11*|u_{j,1}|^2 + m_w*w21*|u_{j,2}|^2; velocity part weighted by
    (M_w, m_w).
    """
    return float(np.sqrt(energy_norm_sq_pos(s.pos, p) + norm_m_sq(s.vel, p)))


def energy_norm_sq_pos(pos, p: ChainParams) -> float:
    pos = np.asarray(pos)
    s_a, s_b, _ = _stretches(pos)
    e = p.v_ref * (np.abs(s_a) ** 2 + np.abs(s_b) ** 2)
    e = e + p.M_w * p.W1.k1 * np.abs(pos[:, 0]) ** 2
    e = e + p.m_w * p.W2.k1 * np.abs(pos[:, 1]) ** 2
    return float(np.sum(e))


def norm_m_sq(arr, p: ChainParams) -> float:
    """Squared mass-weighted l2 norm sum_j M_w*|a_{j,1}|^2 + m_w*|a_{j,2}|^2."""
    arr = np.asarray(arr)
    return float(p.M_w * np.sum(np.abs(arr[:, 0]) ** 2)
                 + p.m_w * np.sum(np.abs(arr[:, 1]) ** 2))


def norm_m(arr, p: ChainParams) -> float:
    return float(np.sqrt(norm_m_sq(arr, p)))


def norm_l2_pair(pos, vel) -> float:
    """Plain (l2)^4 norm of a (positions, velocities) pair."""
    return float(np.sqrt(np.sum(np.abs(pos) ** 2) + np.sum(np.abs(vel) ** 2)))


def hamiltonian_energy(s: LatticeState, p: ChainParams) -> float:
    """Energy diagnostic for the Newtonian flow.

    Weighted so that the first row carries unit weight: with
    mu = v11/v21,

        H = sum_j [ udot_{j,1}^2/2 + mu*udot_{j,2}^2/2 ]
          + sum_j [ V1(s_a) + V1(s_b) + W1(u_{j,1}) + mu*W2(u_{j,2}) ]

    This is exactly conserved when the bond nonlinearities are
    mass-consistent (mu*V2' = V1' as functions, automatic for the
    harmonic part); on-site nonlinearities never break conservation.
    """
    mu = p.V1.k1 / p.V2.k1
    s_a, s_b, _ = _stretches(s.pos)
    kin = 0.5 * np.sum(s.vel[:, 0] ** 2) + 0.5 * mu * np.sum(s.vel[:, 1] ** 2)
    pot = np.sum(p.V1.potential(s_a)) + np.sum(p.V1.potential(s_b))
    pot += np.sum(p.W1.potential(s.pos[:, 0])) + mu * np.sum(p.W2.potential(s.pos[:, 1]))
    return float(kin + pot)


def lipschitz_constant(p: ChainParams, c0: float = 0.5) -> float:
    """Explicit constant C such that

        ||M(u) - M(w)||_M <= C*(||u||_inf + ||w||_inf)*||u - w||_M

    whenever ||u||_inf, ||w||_inf <= c0.  Crude but valid: stretches are
    bounded by twice the sup norm, |x^2-y^2| <= (|x|+|y|)|x-y|, and
    |x^3-y^3| <= (|x|+|y|)^2|x-y| within the ball.
    """
    weight_ratio = np.sqrt(max(p.M_w, p.m_w) / min(p.M_w, p.m_w))
    cv = max(abs(p.V1.k2) + 4 * c0 * abs(p.V1.k3), abs(p.V2.k2) + 4 * c0 * abs(p.V2.k3))
    cw = max(abs(p.W1.k2) + 2 * c0 * abs(p.W1.k3), abs(p.W2.k2) + 2 * c0 * abs(p.W2.k3))
    # row-wise: 2 bond differences (each spreading over <= 4 site values) + 1 on-site
    return float(weight_ratio * (16.0 * cv + 2.0 * cw))


def norm_equivalence_interval(p: ChainParams, n_theta: int = 720):
    """Equivalence constants between ||.||_Y and the plain (l2)^4 norm.

    Returns (kappa_lo, kappa_hi, sqrt of min eig, sqrt of max eig over the
    position/velocity symbols).  Computed from the extreme eigenvalues of
    the Fourier symbol of the position form and the diagonal velocity
    weights.
    """
    thetas = np.linspace(-np.pi, np.pi, n_theta)
    v = p.v_ref
    d1 = 2 * v + p.M_w * p.W1.k1
    d2 = 2 * v + p.m_w * p.W2.k1
    off = v * np.abs(1.0 + np.exp(1j * thetas))
    tr = d1 + d2
    disc = np.sqrt((d1 - d2) ** 2 + 4 * off ** 2)
    lam_min = ((tr - disc) / 2).min()
    lam_max = ((tr + disc) / 2).max()
    lo = np.sqrt(min(lam_min, p.M_w, p.m_w))
    hi = np.sqrt(max(lam_max, p.M_w, p.m_w))
    return float(lo), float(hi), float(np.sqrt(lam_min)), float(np.sqrt(lam_max))


# Reference parameter set used throughout the tests: v11=1, v21=2,
# w11=w21=1, purely harmonic.
def p0(N: int = 0, **nl) -> ChainParams:
    """The harmonic reference chain (c1=3, c2=5), optionally with
    nonlinear coefficients passed as v1=(k1,k2,k3) style overrides."""
    kw = dict(v1=(1.0, 0.0, 0.0), v2=(2.0, 0.0, 0.0),
              w1=(1.0, 0.0, 0.0), w2=(1.0, 0.0, 0.0))
    kw.update(nl)
    return make_params(N=N, **kw)
