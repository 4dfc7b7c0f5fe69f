"""Matrix-free operators on the periodic grid and their dense counterparts.

State arrays have shape (4, dim_k, n, n, n): spinor component, internal
(iso-spin) component, then the three spatial axes. Kinetic terms act through
FFT-based spectral differentiation; every coefficient term is a precomputed
per-node table. Operators are immutable after assembly and their apply() is
pure, so concurrent matvecs are safe.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as _sfft
from scipy.sparse.linalg import LinearOperator

from .algebra import DiracAlgebra, IsoSpinTriple, XiOperator
from .errors import UnsupportedConfigurationError
from .fields import (ConstantField, MassFieldConfig, eval_PhiF, eval_T,
                     grad_profile)
from .grid import GridSpec, state_shape, state_size

_SPATIAL_AXES = (2, 3, 4)
_SIGMA = np.stack([
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
])


# pocketfft computes each 1D transform of a batch independently, so results
# are bitwise reproducible for any worker count
_FFT_WORKERS = 2


def _fft(psi):
    return _sfft.fftn(psi, axes=_SPATIAL_AXES, workers=_FFT_WORKERS)


def _ifft(psi):
    return _sfft.ifftn(psi, axes=_SPATIAL_AXES, workers=_FFT_WORKERS)


def _axis_derivative(arr, spatial_axis: int, k: np.ndarray):
    """Spectral d/dx_j along one spatial axis of a table or state array.

    spatial_axis counts 0..2; the actual array axis is ndim-3+spatial_axis,
    so the same helper serves (dk,dk,n,n,n) tables and (4,dk,n,n,n) states.
    """
    ax = arr.ndim - 3 + spatial_axis
    hat = _sfft.fft(arr, axis=ax, workers=_FFT_WORKERS)
    shape = [1] * arr.ndim
    shape[ax] = k.size
    hat *= (1j * k).reshape(shape)
    return _sfft.ifft(hat, axis=ax, workers=_FFT_WORKERS)


class DiscreteOperator:
    """Base for matrix-free grid operators (flattened dimension self.dim)."""

    kind = "generic"

    def __init__(self, grid: GridSpec, dim_k: int):
        self.grid = grid
        self.dim_k = dim_k
        self.shape = state_shape(grid, dim_k)
        self.dim = state_size(grid, dim_k)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def matvec(self, flat: np.ndarray) -> np.ndarray:
        if flat.size != self.dim:
            raise ValueError(f"dimension mismatch: {flat.size} != {self.dim}")
        return self.apply(flat.reshape(self.shape)).ravel()

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dim, self.dim), matvec=self.matvec,
                              dtype=complex)


class DiracHamiltonian(DiscreteOperator):
    """-i alpha . grad (x) I + (M/eps) (beta (x) I) U_{F_eps}.

    The mass block is stored as the internal-space table Phi(x) (the mass
    term is [[0, M Phi*], [M Phi, 0]] in the chiral block form), so memory
    is dim_k^2 complex numbers per node regardless of the spinor structure.
    """

    kind = "H"

    def __init__(self, grid: GridSpec, mf: MassFieldConfig, alg: DiracAlgebra,
                 eps: float = 1.0):
        if eps <= 0:
            raise ValueError("eps must be positive")
        from .fields import HedgehogField
        if (eps != 1.0 and isinstance(mf.direction, HedgehogField)
                and not mf.direction.scale_invariant):
            raise UnsupportedConfigurationError(
                "dilated hedgehog requires a scale-invariant polar angle")
        super().__init__(grid, mf.dim_k)
        self.mf = mf
        self.alg = alg
        self.eps = float(eps)
        self.mass_coeff = mf.M / self.eps
        self.gap_edge = self.mass_coeff  # continuum essential-spectrum edge
        # -1 moves (dk, dk) in front of the spatial axes
        self.phi = np.moveaxis(eval_PhiF(mf, grid.points(), eps=self.eps),
                               (-2, -1), (0, 1))
        # node-major copy (n_nodes, dk, dk) for the batched mass matmul
        self._phi_nodes = np.ascontiguousarray(
            np.moveaxis(self.phi.reshape(self.dim_k, self.dim_k, -1), 2, 0))
        k = grid.wavenumbers()
        self._k1 = k.reshape(-1, 1, 1)
        self._k2 = k.reshape(1, -1, 1)
        self._k3 = k.reshape(1, 1, -1)

    def _kinetic_hat(self, psi_hat):
        k1, k2, k3 = self._k1, self._k2, self._k3
        km, kp = k1 - 1j * k2, k1 + 1j * k2
        out = np.empty_like(psi_hat)
        out[0] = k3 * psi_hat[0] + km * psi_hat[1]
        out[1] = kp * psi_hat[0] - k3 * psi_hat[1]
        out[2] = -(k3 * psi_hat[2] + km * psi_hat[3])
        out[3] = -(kp * psi_hat[2] - k3 * psi_hat[3])
        return out

    def apply_kinetic(self, psi):
        return _ifft(self._kinetic_hat(_fft(psi)))

    def apply_mass(self, psi):
        # upper chirality <- M Phi^dagger lower, lower <- M Phi upper,
        # as node-batched (spin, iso) x (iso, iso) products
        dk = self.dim_k
        nn = self.grid.n_nodes
        ps = psi.reshape(4, dk, nn)
        upper = np.ascontiguousarray(np.moveaxis(ps[0:2], 2, 0))  # (nn, s, b)
        lower = np.ascontiguousarray(np.moveaxis(ps[2:4], 2, 0))
        p = self._phi_nodes
        c = self.mass_coeff
        out = np.empty_like(ps)
        # out_u[s,a] = sum_b conj(P[b,a]) psi_l[s,b];  out_l[s,a] = sum_b P[a,b] psi_u[s,b]
        out[0:2] = np.moveaxis(c * np.matmul(lower, p.conj()), 0, 2)
        out[2:4] = np.moveaxis(c * np.matmul(upper, p.transpose(0, 2, 1)), 0, 2)
        return out.reshape(psi.shape)

    def apply(self, psi):
        return self.apply_kinetic(psi) + self.apply_mass(psi)


def assemble_H(grid: GridSpec, mf: MassFieldConfig, alg: DiracAlgebra) -> DiracHamiltonian:
    return DiracHamiltonian(grid, mf, alg, eps=1.0)


def assemble_H_eps(grid: GridSpec, mf: MassFieldConfig, alg: DiracAlgebra,
                   eps: float) -> DiracHamiltonian:
    """Dilated family: profile F(eps x), mass amplitude M/eps. For a
    scale-invariant direction field the internal table is reused verbatim,
    so T is bitwise identical to the eps = 1 operator."""
    op = DiracHamiltonian(grid, mf, alg, eps=eps)
    op.kind = "H_eps"
    return op


class GradingOperator(DiscreteOperator):
    """Constant grading i gamma5 beta (x) xi; Hermitian involution."""

    kind = "Gamma"

    def __init__(self, grid: GridSpec, xi: XiOperator, dim_k: int):
        super().__init__(grid, dim_k)
        if xi.xi.shape != (dim_k, dim_k):
            raise ValueError("xi dimension does not match dim_k")
        self.xi = xi

    def apply(self, psi):
        out = np.empty_like(psi)
        x = self.xi.xi
        out[0:2] = 1j * np.einsum("ab,sb...->sa...", x, psi[2:4])
        out[2:4] = -1j * np.einsum("ab,sb...->sa...", x, psi[0:2])
        return out


class K3Operator(DiscreteOperator):
    """Total third angular momentum: L3 + Sigma3/2 + (m/2) T3.

    L3 = -i (x1 D2 - x2 D1) with spectral derivatives; the coordinate
    factors act along different axes than their paired derivative, so each
    product is exactly skew-adjoint on the grid and no extra symmetrization
    is needed (the symmetrized form is identical term by term).
    """

    kind = "K3"

    def __init__(self, grid: GridSpec, triple: IsoSpinTriple, m: int):
        super().__init__(grid, triple.dim_k)
        self.m = int(m)
        self.t3 = triple.t3
        ax = grid.axis()
        self._x1 = ax.reshape(-1, 1, 1)
        self._x2 = ax.reshape(1, -1, 1)
        self._k = grid.wavenumbers()
        self._sigma3 = np.array([0.5, -0.5, 0.5, -0.5])

    def apply(self, psi):
        d2 = _axis_derivative(psi, 1, self._k)
        d1 = _axis_derivative(psi, 0, self._k)
        out = -1j * (self._x1 * d2 - self._x2 * d1)
        out += self._sigma3.reshape(4, 1, 1, 1, 1) * psi
        out += (self.m / 2.0) * np.einsum("ab,sb...->sa...", self.t3, psi)
        return out


class FieldTransform:
    """Pointwise unitary exp(+i F T / 2) on the upper chirality and
    exp(-i F T / 2) on the lower one. Uses the closed form
    exp(i a T) = cos(a) + i sin(a) T, valid because T(x)^2 = I."""

    def __init__(self, grid: GridSpec, mf: MassFieldConfig):
        self.grid = grid
        self.dim_k = mf.dim_k
        pts = grid.points()
        half = 0.5 * mf.profile.value(np.linalg.norm(pts, axis=-1))
        t = eval_T(mf, pts)
        eye = np.eye(mf.dim_k, dtype=complex)
        blk = (np.cos(half)[..., None, None] * eye
               + 1j * np.sin(half)[..., None, None] * t)
        self._upper = np.moveaxis(blk, (-2, -1), (0, 1))

    def apply(self, psi, inverse: bool = False):
        up = self._upper
        out = np.empty_like(psi)
        if inverse:
            # inverse of a unitary block is its conjugate transpose
            out[0:2] = np.einsum("ba...,sb...->sa...", up.conj(), psi[0:2])
            out[2:4] = np.einsum("ab...,sb...->sa...", up, psi[2:4])
        else:
            out[0:2] = np.einsum("ab...,sb...->sa...", up, psi[0:2])
            out[2:4] = np.einsum("ba...,sb...->sa...", up.conj(), psi[2:4])
        return out


def apply_XF(grid: GridSpec, mf: MassFieldConfig, psi, inverse: bool = False):
    return FieldTransform(grid, mf).apply(psi, inverse=inverse)


class MagneticHamiltonian(DiscreteOperator):
    """-i alpha . grad + M beta - Sigma . B with B_j = (D_j F) T / 2 for a
    constant internal direction. Sigma_j acts as diag(sigma_j, sigma_j) on
    the spinor components."""

    kind = "HB"

    def __init__(self, grid: GridSpec, mf: MassFieldConfig, alg: DiracAlgebra):
        if not isinstance(mf.direction, ConstantField):
            raise UnsupportedConfigurationError(
                "the transformed Hamiltonian requires a constant direction field")
        super().__init__(grid, mf.dim_k)
        self.mf = mf
        self.M = mf.M
        pts = grid.points()
        self.b = 0.5 * np.moveaxis(grad_profile(mf.profile, pts), -1, 0)  # (3,n,n,n)
        self.t_const = eval_T(mf, np.array([0.0, 0.0, 1.0]))  # any point: constant
        k = grid.wavenumbers()
        self._k1 = k.reshape(-1, 1, 1)
        self._k2 = k.reshape(1, -1, 1)
        self._k3 = k.reshape(1, 1, -1)

    def _kinetic_hat(self, psi_hat):
        k1, k2, k3 = self._k1, self._k2, self._k3
        km, kp = k1 - 1j * k2, k1 + 1j * k2
        out = np.empty_like(psi_hat)
        out[0] = k3 * psi_hat[0] + km * psi_hat[1]
        out[1] = kp * psi_hat[0] - k3 * psi_hat[1]
        out[2] = -(k3 * psi_hat[2] + km * psi_hat[3])
        out[3] = -(kp * psi_hat[2] - k3 * psi_hat[3])
        return out

    def apply(self, psi):
        out = _ifft(self._kinetic_hat(_fft(psi)))
        # mass beta: swap chiralities
        out[0:2] += self.M * psi[2:4]
        out[2:4] += self.M * psi[0:2]
        # -Sigma . B: same 2x2 spin structure on both chiralities, T on iso
        tpsi = np.einsum("ab,sb...->sa...", self.t_const, psi)
        b1, b2, b3 = self.b
        bm, bp = b1 - 1j * b2, b1 + 1j * b2
        for base in (0, 2):
            out[base + 0] -= b3 * tpsi[base + 0] + bm * tpsi[base + 1]
            out[base + 1] -= bp * tpsi[base + 0] - b3 * tpsi[base + 1]
        return out


def assemble_HB(grid: GridSpec, mf: MassFieldConfig, alg: DiracAlgebra) -> MagneticHamiltonian:
    return MagneticHamiltonian(grid, mf, alg)


class ScalarSchrodinger(DiscreteOperator):
    """-Laplacian + V(x) on scalar grid functions (shape (n, n, n))."""

    kind = "schrodinger"

    def __init__(self, grid: GridSpec, potential: np.ndarray):
        DiscreteOperator.__init__(self, grid, dim_k=1)
        self.shape = (grid.n, grid.n, grid.n)
        self.dim = grid.n_nodes
        self.potential = potential
        k = grid.wavenumbers()
        self._ksq = (k.reshape(-1, 1, 1) ** 2 + k.reshape(1, -1, 1) ** 2
                     + k.reshape(1, 1, -1) ** 2)

    def apply(self, psi):
        return np.fft.ifftn(self._ksq * np.fft.fftn(psi)) + self.potential * psi


# ----------------------------------------------------------------------------
# identity residuals (grid checks of the structural theorems)
# ----------------------------------------------------------------------------

def _norm(psi) -> float:
    return float(np.linalg.norm(psi.ravel()))


def _gamma5(psi):
    out = psi.copy()
    out[2:4] *= -1.0
    return out


def chiral_commutator_residual(op: DiracHamiltonian, psi) -> float:
    """|| [gamma5, H] psi - 2 M gamma5 beta U_F psi || / ||psi||.

    Pointwise-algebraic identity: gamma5 commutes exactly with the spectral
    kinetic term, so the residual is pure roundoff."""
    comm = _gamma5(op.apply(psi)) - op.apply(_gamma5(psi))
    rhs = np.empty_like(psi)
    c = 2.0 * op.mass_coeff
    rhs[0:2] = c * np.einsum("ba...,sb...->sa...", op.phi.conj(), psi[2:4])
    rhs[2:4] = -c * np.einsum("ab...,sb...->sa...", op.phi, psi[0:2])
    return _norm(comm - rhs) / _norm(psi)


def susy_residual(op: DiracHamiltonian, gamma_op: GradingOperator, psi) -> float:
    """|| {Gamma, H} psi || / ||psi||; vanishes (to roundoff) when the
    constant involution anticommutes with T(x) pointwise."""
    acomm = op.apply(gamma_op.apply(psi)) + gamma_op.apply(op.apply(psi))
    return _norm(acomm) / _norm(psi)


def h_squared_residual(op: DiracHamiltonian, psi) -> float:
    """Residual of H^2 = (-Lap + M^2) + M [[0, W*], [W, 0]], W = i sigma . grad Phi.

    grad Phi is taken by spectral differentiation of the sampled mass block
    (not analytically), so the residual is aliasing-limited and must shrink
    under grid refinement. The (T^2 - I) term is identically zero for
    involutive internal fields and is omitted.
    """
    c = op.mass_coeff
    k = op.grid.wavenumbers()
    ksq = (k.reshape(-1, 1, 1) ** 2 + k.reshape(1, -1, 1) ** 2
           + k.reshape(1, 1, -1) ** 2)
    rhs = _ifft((ksq + c ** 2) * _fft(psi))
    dphi = np.stack([_axis_derivative(op.phi, j, k) for j in range(3)])
    # W psi_u = i sigma_j (D_j Phi) psi_u ; W* psi_l = -i sigma_j (D_j Phi)^dag psi_l
    rhs[0:2] += -1j * c * np.einsum("jpq,jba...,qb...->pa...",
                                    _SIGMA, dphi.conj(), psi[2:4])
    rhs[2:4] += 1j * c * np.einsum("jpq,jab...,qb...->pa...",
                                   _SIGMA, dphi, psi[0:2])
    return _norm(op.apply(op.apply(psi)) - rhs) / _norm(psi)


def k3_commutator_residual(op: DiscreteOperator, k3: K3Operator, psi) -> float:
    """|| [H, K3] psi || / ||psi||; exact in the continuum for axisymmetric
    configurations, approximate on the grid (the coordinate factors in L3
    are periodized sawtooths)."""
    comm = op.apply(k3.apply(psi)) - k3.apply(op.apply(psi))
    return _norm(comm) / _norm(psi)


def transform_conjugation_residual(opH: DiracHamiltonian,
                                   opHB: MagneticHamiltonian,
                                   xf: FieldTransform, psi) -> float:
    """|| X_F H X_F^{-1} psi - H(B) psi || / ||psi||; equality holds in the
    continuum for constant T, on the grid up to product-rule aliasing."""
    lhs = xf.apply(opH.apply(xf.apply(psi, inverse=True)))
    return _norm(lhs - opHB.apply(psi)) / _norm(psi)


def symmetry_residual(op: DiscreteOperator, rng: np.random.Generator,
                      trials: int = 3) -> float:
    """max |<phi, A psi> - <A phi, psi>| / (||phi|| ||psi||) over random pairs."""
    worst = 0.0
    for _ in range(trials):
        phi = (rng.standard_normal(op.shape) + 1j * rng.standard_normal(op.shape))
        psi = (rng.standard_normal(op.shape) + 1j * rng.standard_normal(op.shape))
        lhs = np.vdot(phi, op.apply(psi))
        rhs = np.vdot(op.apply(phi), psi)
        worst = max(worst, abs(lhs - rhs) / (_norm(phi) * _norm(psi)))
    return float(worst)


# ----------------------------------------------------------------------------
# dense oracle assembly (independent of the FFT apply path)
# ----------------------------------------------------------------------------

def dense_derivative_1d(grid: GridSpec) -> np.ndarray:
    """n x n spectral differentiation matrix built from explicit DFT columns."""
    n = grid.n
    k = grid.wavenumbers()
    f = np.fft.fft(np.eye(n), axis=0)
    return np.fft.ifft((1j * k)[:, None] * f, axis=0)


def _dense_derivatives_3d(grid: GridSpec) -> list[np.ndarray]:
    d = dense_derivative_1d(grid)
    n = grid.n
    eye = np.eye(n)
    return [
        np.kron(d, np.kron(eye, eye)),
        np.kron(eye, np.kron(d, eye)),
        np.kron(eye, np.kron(eye, d)),
    ]


def dense_matrix(op: DiscreteOperator) -> np.ndarray:
    """Materialize the operator as a dense Hermitian matrix.

    Assembled from explicit differentiation matrices and coefficient tables,
    not by probing apply() with basis vectors, so it cross-checks the
    matrix-free path. Intended for small grids only (dimension <= ~6000).
    """
    if isinstance(op, DiracHamiltonian):
        return _dense_dirac(op)
    if isinstance(op, MagneticHamiltonian):
        return _dense_hb(op)
    if isinstance(op, K3Operator):
        return _dense_k3(op)
    if isinstance(op, GradingOperator):
        nn = op.grid.n_nodes
        from .algebra import weyl_matrices
        alg = weyl_matrices()
        kern = np.kron(1j * alg.gamma5 @ alg.beta, op.xi.xi)
        return np.kron(kern, np.eye(nn))
    raise TypeError(f"no dense assembly for {type(op).__name__}")


def _alloc_dense(op: DiscreteOperator):
    nn = op.grid.n_nodes
    c = 4 * op.dim_k
    h = np.zeros((c, nn, c, nn), dtype=complex)
    return h, nn, c


def _dense_kinetic_into(h, op, alg: DiracAlgebra):
    derivs = _dense_derivatives_3d(op.grid)
    dk = op.dim_k
    for j in range(3):
        a = alg.alpha[j]
        for i in range(4):
            for l in range(4):
                if a[i, l] == 0:
                    continue
                for q in range(dk):
                    h[i * dk + q, :, l * dk + q, :] += -1j * a[i, l] * derivs[j]


def _dense_pointwise_into(h, blocks):
    """blocks: (n_nodes, c, c) per-node matrices added on the diagonal."""
    nn = blocks.shape[0]
    idx = np.arange(nn)
    c = blocks.shape[1]
    for i in range(c):
        for l in range(c):
            h[i, idx, l, idx] += blocks[:, i, l]


def _dense_dirac(op: DiracHamiltonian) -> np.ndarray:
    from .algebra import weyl_matrices
    alg = weyl_matrices()
    h, nn, c = _alloc_dense(op)
    _dense_kinetic_into(h, op, alg)
    dk = op.dim_k
    phi = np.moveaxis(op.phi, (0, 1), (-2, -1)).reshape(nn, dk, dk)
    blocks = np.zeros((nn, c, c), dtype=complex)
    m = op.mass_coeff
    # upper-right: M Phi^dagger on iso, identity on spin; lower-left: M Phi
    for s in range(2):
        sl_u = slice(s * dk, (s + 1) * dk)
        sl_l = slice((2 + s) * dk, (3 + s) * dk)
        blocks[:, sl_u, sl_l] = m * np.conj(np.swapaxes(phi, -2, -1))
        blocks[:, sl_l, sl_u] = m * phi
    _dense_pointwise_into(h, blocks)
    return h.reshape(c * nn, c * nn)


def _dense_hb(op: MagneticHamiltonian) -> np.ndarray:
    from .algebra import weyl_matrices
    alg = weyl_matrices()
    h, nn, c = _alloc_dense(op)
    _dense_kinetic_into(h, op, alg)
    dk = op.dim_k
    blocks = np.zeros((nn, c, c), dtype=complex)
    eye2dk = np.eye(2 * dk)
    blocks[:, 0:2 * dk, 2 * dk:4 * dk] += op.M * eye2dk
    blocks[:, 2 * dk:4 * dk, 0:2 * dk] += op.M * eye2dk
    b = op.b.reshape(3, nn)
    sigma_b = np.einsum("jpq,jx->xpq", _SIGMA, b)  # (nn, 2, 2)
    sb_kron = np.einsum("xpq,ab->xpaqb", sigma_b, op.t_const).reshape(nn, 2 * dk, 2 * dk)
    blocks[:, 0:2 * dk, 0:2 * dk] -= sb_kron
    blocks[:, 2 * dk:4 * dk, 2 * dk:4 * dk] -= sb_kron
    _dense_pointwise_into(h, blocks)
    return h.reshape(c * nn, c * nn)


def _dense_k3(op: K3Operator) -> np.ndarray:
    grid = op.grid
    nn = grid.n_nodes
    derivs = _dense_derivatives_3d(grid)
    pts = grid.points().reshape(nn, 3)
    l3 = -1j * (pts[:, 0, None] * derivs[1] - pts[:, 1, None] * derivs[0])
    dk = op.dim_k
    c = 4 * dk
    h = np.zeros((c, nn, c, nn), dtype=complex)
    sigma3 = np.array([0.5, -0.5, 0.5, -0.5])
    idx = np.arange(nn)
    for i in range(4):
        for q in range(dk):
            comp = i * dk + q
            h[comp, :, comp, :] += l3
            h[comp, idx, comp, idx] += sigma3[i]
    t3 = op.t3
    for i in range(4):
        for q in range(dk):
            for p in range(dk):
                if t3[q, p] == 0:
                    continue
                h[i * dk + q, idx, i * dk + p, idx] += (op.m / 2.0) * t3[q, p]
    return h.reshape(c * nn, c * nn)


def dense_transform(xf: FieldTransform) -> np.ndarray:
    """Dense unitary of the pointwise field transform (small grids only)."""
    nn = xf.grid.n_nodes
    dk = xf.dim_k
    up = np.moveaxis(xf._upper, (0, 1), (-2, -1)).reshape(nn, dk, dk)
    c = 4 * dk
    x = np.zeros((c, nn, c, nn), dtype=complex)
    idx = np.arange(nn)
    low = np.conj(np.swapaxes(up, -2, -1))
    for s in range(2):
        for q in range(dk):
            for p in range(dk):
                x[s * dk + q, idx, s * dk + p, idx] += up[:, q, p]
                x[(2 + s) * dk + q, idx, (2 + s) * dk + p, idx] += low[:, q, p]
    return x.reshape(c * nn, c * nn)


def state_to_flat(psi: np.ndarray) -> np.ndarray:
    return psi.ravel()


def flat_to_state(flat: np.ndarray, grid: GridSpec, dim_k: int) -> np.ndarray:
    return flat.reshape(state_shape(grid, dim_k))
