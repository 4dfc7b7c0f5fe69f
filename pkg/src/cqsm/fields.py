"""Profile functions, internal direction fields, and the pointwise
operator-valued coefficients of the Hamiltonian.

A mass-field configuration bundles a radial profile F, an iso-spin triple,
a direction field n(x), and the mass M. All evaluators are pure and accept
arrays of points with shape (..., 3); scalars broadcast in the obvious way.
Lengths are femtometres, energies inverse femtometres (M = 1 by default).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algebra import DiracAlgebra, IsoSpinTriple
from .errors import HypothesisViolationError, SingularPointError


# ----------------------------------------------------------------------------
# radial profiles
# ----------------------------------------------------------------------------

class Profile:
    """Radial profile: F(0) = -pi for the builtin solitonic shapes, F -> 0
    at infinity. Subclasses implement value/derivative, vectorized in r."""

    scale: float  # characteristic decay length, used for box/cutoff heuristics

    def value(self, r):
        raise NotImplementedError

    def derivative(self, r):
        raise NotImplementedError


class ExpProfile(Profile):
    """F(r) = -pi * exp(-r/R)."""

    def __init__(self, R: float = 0.55, length_unit: float = 1.0):
        if R <= 0 or length_unit <= 0:
            raise ValueError("R and length_unit must be positive")
        self.R = R * length_unit
        self.scale = self.R

    def value(self, r):
        return -np.pi * np.exp(-np.asarray(r, dtype=float) / self.R)

    def derivative(self, r):
        return (np.pi / self.R) * np.exp(-np.asarray(r, dtype=float) / self.R)


class MixedProfile(Profile):
    """F(r) = -pi * (a1*exp(-r/R1) + a2*exp(-r^2/R2^2)).

    With the default constants a1 + a2 = 1 exactly, so F(0) = -pi."""

    def __init__(self, a1: float = 0.65, R1: float = 0.58,
                 a2: float = 0.35, R2: float = np.sqrt(0.3),
                 length_unit: float = 1.0):
        if R1 <= 0 or R2 <= 0 or length_unit <= 0:
            raise ValueError("R1, R2 and length_unit must be positive")
        self.a1, self.a2 = float(a1), float(a2)
        self.R1, self.R2 = R1 * length_unit, R2 * length_unit
        self.scale = max(self.R1, self.R2)

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return -np.pi * (self.a1 * np.exp(-r / self.R1)
                         + self.a2 * np.exp(-(r / self.R2) ** 2))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return np.pi * (self.a1 / self.R1 * np.exp(-r / self.R1)
                        + 2.0 * self.a2 * r / self.R2 ** 2 * np.exp(-(r / self.R2) ** 2))


class RationalProfile(Profile):
    """F(r) = -pi * (1 - r / sqrt(lam^2 + r^2)); algebraic 1/r^2 tail."""

    def __init__(self, lam: float = np.sqrt(0.4), length_unit: float = 1.0):
        if lam <= 0 or length_unit <= 0:
            raise ValueError("lam and length_unit must be positive")
        self.lam = lam * length_unit
        self.scale = self.lam

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return -np.pi * (1.0 - r / np.hypot(self.lam, r))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return np.pi * self.lam ** 2 / np.hypot(self.lam, r) ** 3


class CustomRadialProfile(Profile):
    """Tabulated profile: linear interpolation between strictly increasing
    radii, constant extrapolation beyond the last sample. Radii below the
    first sample are an error (the table is the only source of truth there).
    """

    def __init__(self, radii, values):
        radii = np.asarray(radii, dtype=float)
        values = np.asarray(values, dtype=float)
        if radii.ndim != 1 or radii.shape != values.shape or radii.size < 2:
            raise ValueError("need two equal-length 1D arrays with >= 2 samples")
        if not np.all(np.diff(radii) > 0):
            raise ValueError("radii must be strictly increasing")
        if not (np.all(np.isfinite(radii)) and np.all(np.isfinite(values))):
            raise ValueError("samples must be finite")
        self.radii, self.values = radii, values
        self.slopes = np.diff(values) / np.diff(radii)
        self.scale = float(radii[-1]) / 3.0

    @classmethod
    def from_csv(cls, path) -> "CustomRadialProfile":
        table = np.loadtxt(path, delimiter=",", dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (radius, value)")
        return cls(table[:, 0], table[:, 1])

    def _check_range(self, r):
        if np.any(r < self.radii[0]):
            raise ValueError(
                f"radius below tabulated range (min {self.radii[0]})")

    def value(self, r):
        r = np.asarray(r, dtype=float)
        self._check_range(r)
        return np.interp(r, self.radii, self.values)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        self._check_range(r)
        idx = np.clip(np.searchsorted(self.radii, r, side="right") - 1,
                      0, self.slopes.size - 1)
        out = self.slopes[idx]
        return np.where(r >= self.radii[-1], 0.0, out)


class AmplitudeScaled(Profile):
    """F = amplitude * F_base. Keeps the decay at infinity but gives up the
    F(0) = -pi boundary value; used to reach the no-bound-state regime."""

    def __init__(self, base: Profile, amplitude: float):
        self.base = base
        self.amplitude = float(amplitude)
        self.scale = base.scale

    def value(self, r):
        return self.amplitude * self.base.value(r)

    def derivative(self, r):
        return self.amplitude * self.base.derivative(r)


def eval_profile(profile: Profile, radius):
    """F at |x| = radius (radius >= 0)."""
    radius = np.asarray(radius, dtype=float)
    if np.any(radius < 0):
        raise ValueError("radius must be >= 0")
    return profile.value(radius)


def grad_profile(profile: Profile, x) -> np.ndarray:
    """grad F(x) = F'(|x|) * x/|x| for radial profiles; undefined at x = 0."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularPointError("gradient direction undefined at the origin")
    return profile.derivative(r)[..., None] * (x / r[..., None])


# ----------------------------------------------------------------------------
# direction fields n(x)
# ----------------------------------------------------------------------------

class DirectionField:
    """Unit iso-vector field n(x). unit(xs) maps (..., 3) points to (..., 3)
    unit vectors; deriv_sq(xs) returns the scalar s(x) with
    sum_j (D_j T(x))^2 = s(x) * I for T = n . T."""

    def unit(self, xs) -> np.ndarray:
        raise NotImplementedError

    def deriv_sq(self, xs) -> np.ndarray:
        raise NotImplementedError

    scale_invariant: bool = False


class ConstantField(DirectionField):
    """Fixed direction; T(x) is constant in space."""

    scale_invariant = True

    def __init__(self, direction=(0.0, 0.0, 1.0)):
        d = np.asarray(direction, dtype=float)
        nrm = np.linalg.norm(d)
        if nrm == 0:
            raise ValueError("direction must be nonzero")
        self.direction = d / nrm

    def unit(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.broadcast_to(self.direction, xs.shape).copy()

    def deriv_sq(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.zeros(xs.shape[:-1])


def _cylinder(xs):
    xs = np.asarray(xs, dtype=float)
    r = np.hypot(xs[..., 0], xs[..., 1])
    z = xs[..., 2]
    theta = np.arctan2(xs[..., 1], xs[..., 0])
    return r, z, theta


class HedgehogField(DirectionField):
    """Winding field n = (sin(Th) cos(m th), sin(Th) sin(m th), cos(Th)).

    Th(r, z) defaults to the polar angle (the radial hedgehog), which is
    scale invariant: Th(eps r, eps z) = Th(r, z). A custom Th is any callable
    of cylindrical (r, z); its gradient is then taken by centered finite
    differences with step 1e-5 * local scale.
    """

    def __init__(self, m: int = 1,
                 theta: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
                 scale_invariant: bool | None = None):
        if m < 1 or int(m) != m:
            raise ValueError("winding m must be a positive integer")
        self.m = int(m)
        self.theta = theta
        self.scale_invariant = (theta is None) if scale_invariant is None else scale_invariant

    def _theta(self, r, z):
        if self.theta is None:
            return np.arctan2(r, z)  # polar angle from the +z axis
        return np.asarray(self.theta(r, z), dtype=float)

    def unit(self, xs):
        r, z, th = _cylinder(xs)
        if np.any((r == 0) & (z == 0)):
            raise SingularPointError("hedgehog field undefined at the origin")
        big = self._theta(r, z)
        sin_b = np.sin(big)
        return np.stack([sin_b * np.cos(self.m * th),
                         sin_b * np.sin(self.m * th),
                         np.cos(big)], axis=-1)

    def _grad_theta_sq(self, r, z):
        if self.theta is None:
            return 1.0 / (r * r + z * z)  # |grad polar angle|^2
        rho = np.hypot(r, z)
        h = 1e-5 * np.where(rho > 0, rho, 1.0)
        dthdr = (self._theta(r + h, z) - self._theta(r - h, z)) / (2 * h)
        dthdz = (self._theta(r, z + h) - self._theta(r, z - h)) / (2 * h)
        return dthdr ** 2 + dthdz ** 2

    def deriv_sq(self, xs):
        # sum_j |D_j n|^2 = |grad Th|^2 + m^2 sin^2(Th) / r^2
        r, z, _ = _cylinder(xs)
        if np.any((r == 0) & (z == 0)):
            raise SingularPointError("hedgehog field undefined at the origin")
        big = self._theta(r, z)
        with np.errstate(divide="ignore"):
            axis_term = np.where(r > 0, (self.m * np.sin(big)) ** 2 / np.where(r > 0, r, 1.0) ** 2, np.inf)
        return self._grad_theta_sq(r, z) + axis_term


class PlanarField(DirectionField):
    """Direction rotating in the plane spanned by (1, c, 0)/sqrt(1+c^2) and
    (0, 0, 1): n = (sin(chi)/sqrt(1+c^2), c sin(chi)/sqrt(1+c^2), cos(chi))
    for a radial angle chi(r).

    This is exactly the family whose anticommutator with the constant
    involution (c*T1 - T2)/sqrt(1+c^2) vanishes pointwise, so the grading
    operator built from that involution anticommutes with the Hamiltonian.
    Smooth at the origin (n depends on x only through |x|).
    """

    scale_invariant = False

    def __init__(self, c: float, angle: Profile):
        if c == 0:
            raise ValueError("c must be nonzero")
        self.c = float(c)
        self.angle = angle

    def unit(self, xs):
        xs = np.asarray(xs, dtype=float)
        r = np.linalg.norm(xs, axis=-1)
        chi = self.angle.value(r)
        root = np.sqrt(1.0 + self.c ** 2)
        s = np.sin(chi) / root
        return np.stack([s, self.c * s, np.cos(chi)], axis=-1)

    def deriv_sq(self, xs):
        xs = np.asarray(xs, dtype=float)
        r = np.linalg.norm(xs, axis=-1)
        return self.angle.derivative(r) ** 2


# ----------------------------------------------------------------------------
# mass-field configuration and pointwise coefficients
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class MassFieldConfig:
    profile: Profile
    triple: IsoSpinTriple
    direction: DirectionField
    M: float = 1.0

    @property
    def dim_k(self) -> int:
        return self.triple.dim_k


def eval_T(mf: MassFieldConfig, x) -> np.ndarray:
    """T(x) = n(x) . T; Hermitian with T(x)^2 = I. Shape (..., dk, dk)."""
    n = mf.direction.unit(x)
    t1, t2, t3 = mf.triple.matrices
    return (n[..., 0, None, None] * t1
            + n[..., 1, None, None] * t2
            + n[..., 2, None, None] * t3)


def eval_PhiF(mf: MassFieldConfig, x, eps: float = 1.0) -> np.ndarray:
    """Chiral mass block Phi = cos(F) I + i sin(F) T(x) on the internal
    space (unitary since T^2 = I). With eps != 1 the whole coefficient is
    dilated: F(eps|x|), T(eps x)."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    f = mf.profile.value(eps * r)
    t = eval_T(mf, eps * x)
    eye = np.eye(mf.dim_k, dtype=complex)
    return (np.cos(f)[..., None, None] * eye
            + 1j * np.sin(f)[..., None, None] * t)


def eval_UF(mf: MassFieldConfig, alg: DiracAlgebra, x) -> np.ndarray:
    """Full mass factor cos(F) I + i sin(F) gamma5 (x) T(x) on C^4 (x) K."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    f = mf.profile.value(r)
    t = eval_T(mf, x)
    dk = mf.dim_k
    eye = np.eye(4 * dk, dtype=complex)
    g5t = np.kron(alg.gamma5, np.eye(dk))  # gamma5 (x) I, then per-point T
    # build gamma5 (x) T(x) pointwise
    block = np.zeros(x.shape[:-1] + (4 * dk, 4 * dk), dtype=complex)
    for i in range(4):
        sgn = alg.gamma5[i, i].real
        block[..., i * dk:(i + 1) * dk, i * dk:(i + 1) * dk] = sgn * t
    del g5t
    return np.cos(f)[..., None, None] * eye + 1j * np.sin(f)[..., None, None] * block


def eval_VF(mf: MassFieldConfig, x) -> np.ndarray:
    """Scalar potential sqrt(|grad F|^2 + s(x) sin^2 F) entering the
    eigenvalue-count bound, where s(x)*I = sum_j (D_j T)^2."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0) and not isinstance(mf.direction, (ConstantField, PlanarField)):
        raise SingularPointError("V_F undefined at the origin for winding fields")
    fp = mf.profile.derivative(r)
    f = mf.profile.value(r)
    s = mf.direction.deriv_sq(x)
    return np.sqrt(fp ** 2 + s * np.sin(f) ** 2)


def vf_radial(mf: MassFieldConfig) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized V_F as a function of radius alone.

    Valid when the direction field makes s(x) radial: constant fields (s=0),
    the polar hedgehog (s = (1+m^2)/r^2), and planar fields (s = chi'(r)^2).
    """
    if isinstance(mf.direction, ConstantField):
        s_of_r = lambda r: np.zeros_like(r)
    elif isinstance(mf.direction, HedgehogField) and mf.direction.theta is None:
        m2 = 1.0 + mf.direction.m ** 2
        s_of_r = lambda r: m2 / r ** 2
    elif isinstance(mf.direction, PlanarField):
        s_of_r = lambda r: mf.direction.angle.derivative(r) ** 2
    else:
        raise HypothesisViolationError(
            "V_F is not radial for this direction field; use the Monte Carlo path")

    def v(r):
        r = np.asarray(r, dtype=float)
        return np.sqrt(mf.profile.derivative(r) ** 2
                       + s_of_r(r) * np.sin(mf.profile.value(r)) ** 2)

    return v


def check_deriv_sq_scalar(mf: MassFieldConfig, points, tol: float = 1e-10,
                          h: float = 1e-6) -> float:
    """Verify sum_j (D_j T)^2 = s(x) I by finite differences of T.

    Returns the worst relative deviation from scalarity over the sample
    points; raises if it exceeds tol."""
    points = np.asarray(points, dtype=float)
    worst = 0.0
    eye = np.eye(mf.dim_k)
    for x in points.reshape(-1, 3):
        acc = np.zeros((mf.dim_k, mf.dim_k), dtype=complex)
        for j in range(3):
            dx = np.zeros(3)
            dx[j] = h * max(1.0, np.linalg.norm(x))
            dt = (eval_T(mf, x + dx) - eval_T(mf, x - dx)) / (2 * dx[j])
            acc += dt @ dt
        s = np.trace(acc).real / mf.dim_k
        dev = np.max(np.abs(acc - s * eye)) / max(abs(s), 1.0)
        worst = max(worst, float(dev))
    if worst > tol:
        raise HypothesisViolationError(
            f"sum_j (D_j T)^2 deviates from scalar*I by {worst:.2e} (tol {tol:.2e})")
    return worst
