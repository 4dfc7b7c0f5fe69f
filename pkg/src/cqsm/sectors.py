"""Angular-momentum sector machinery: classification of eigenvectors by the
conserved K3, the reduced 2D comparison operators on the (r, z) half-plane,
and dense small-grid checks that sector-wise and full spectra agree.

The reduced operator for angular index l and spin sign s is

    L_s(G, l) = -d2/dr2 - (1/r) d/dr + l^2/r^2 - d2/dz2 + s M Dz cos G

acting in L^2((0, inf) x R, r dr dz). The z second derivative enters with a
negative sign: that is what the cylindrical decomposition of -Laplacian
gives and what keeps the free operator bounded below (the alternate sign is
available behind z_sign for comparison, and is unbounded below already for
G = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import NonConvergenceError
from .fields import MassFieldConfig
from .grid import GridSpec
from .operators import K3Operator, dense_matrix
from .spectra import SpectrumResult


@dataclass(frozen=True)
class SectorLabel:
    l: int
    s: int
    t: int
    m: int

    @property
    def k3_value(self) -> float:
        return self.l + self.s / 2.0 + self.m * self.t / 2.0


@dataclass(frozen=True)
class CylGrid:
    """Half-plane grid: r_i = (i+1/2) dr, z centered, measure r dr dz."""

    r_max: float
    z_max: float
    n_r: int
    n_z: int

    def __post_init__(self):
        if min(self.r_max, self.z_max) <= 0 or min(self.n_r, self.n_z) < 4:
            raise ValueError("need positive extents and at least 4 points per axis")

    @property
    def dr(self) -> float:
        return self.r_max / self.n_r

    @property
    def dz(self) -> float:
        return 2.0 * self.z_max / self.n_z

    def r_nodes(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.dr

    def z_nodes(self) -> np.ndarray:
        return -self.z_max + (np.arange(self.n_z) + 0.5) * self.dz

    def weights(self) -> np.ndarray:
        """Quadrature weight r dr dz per node, shape (n_r, n_z)."""
        return np.repeat(self.r_nodes()[:, None], self.n_z, axis=1) * self.dr * self.dz


@dataclass
class CylOperator:
    """Reduced 2D operator; `sym` is the similarity transform
    diag(sqrt(r))^-1-conjugated matrix, symmetric in the plain l2 sense."""

    grid: CylGrid
    label_l: int
    label_s: int
    sym: sp.csr_matrix
    potential: np.ndarray

    @property
    def dim(self) -> int:
        return self.grid.n_r * self.grid.n_z


def _radial_flux_matrix(grid: CylGrid) -> sp.csr_matrix:
    """Flux-form -(1/r) d/dr (r d/dr) in the sqrt(r)-transformed basis:
    exactly symmetric, natural (zero-flux) at r -> 0, Dirichlet at r_max."""
    n = grid.n_r
    dr = grid.dr
    r = grid.r_nodes()
    r_half_up = r + 0.5 * dr    # r_{i+1/2}
    r_half_dn = r - 0.5 * dr    # r_{i-1/2}; equals 0 at i = 0
    diag = (r_half_up + r_half_dn) / (r * dr * dr)
    off = -r_half_up[:-1] / (dr * dr * np.sqrt(r[:-1] * r[1:]))
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr")


def _z_second_derivative(grid: CylGrid) -> sp.csr_matrix:
    n = grid.n_z
    dz = grid.dz
    main = np.full(n, 2.0 / dz ** 2)
    off = np.full(n - 1, -1.0 / dz ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def assemble_Ls(G: Callable[[np.ndarray, np.ndarray], np.ndarray], l: int,
                s: int, M: float, grid: CylGrid, *, z_sign: int = -1,
                mass_coeff: float | None = None) -> CylOperator:
    """Reduced operator for angular index l and spin sign s = +-1.

    G is the profile as a function of cylindrical (r, z); Dz cos G is taken
    by centered differences of cos(G) with the grid step. mass_coeff
    overrides M for the dilated family (M/eps with G dilated).
    """
    if s not in (+1, -1):
        raise ValueError("s must be +-1")
    if z_sign not in (+1, -1):
        raise ValueError("z_sign must be +-1 (coefficient of d2/dz2)")
    r = grid.r_nodes()
    z = grid.z_nodes()
    rr, zz = np.meshgrid(r, z, indexing="ij")
    coeff = M if mass_coeff is None else mass_coeff
    dz = grid.dz
    dzcos = (np.cos(G(rr, zz + dz)) - np.cos(G(rr, zz - dz))) / (2.0 * dz)
    pot = s * coeff * dzcos + (l * l) / rr ** 2
    lr = _radial_flux_matrix(grid)
    lz = _z_second_derivative(grid)
    eye_r = sp.identity(grid.n_r, format="csr")
    eye_z = sp.identity(grid.n_z, format="csr")
    mat = sp.kron(lr, eye_z) - z_sign * sp.kron(eye_r, lz)
    mat = mat + sp.diags(pot.ravel())
    return CylOperator(grid, int(l), int(s), mat.tocsr(), pot)


def sector_ground(op: CylOperator, tol: float = 1e-10) -> float:
    """Smallest eigenvalue (the discrete variational infimum over the grid)."""
    if op.dim <= 4096:
        w = np.linalg.eigvalsh(op.sym.toarray())
        return float(w[0])
    try:
        w = eigsh(op.sym, k=1, which="SA", tol=tol, maxiter=5000,
                  return_eigenvectors=False)
    except Exception as exc:  # ArpackNoConvergence and friends
        raise NonConvergenceError(f"sector ground state solve failed: {exc}")
    return float(w[0])


def radial_profile_as_G(profile) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Wrap a radial profile as G(r, z) = F(sqrt(r^2 + z^2))."""
    return lambda r, z: profile.value(np.hypot(r, z))


# ----------------------------------------------------------------------------
# classification of 3D eigenvectors by K3
# ----------------------------------------------------------------------------

@dataclass
class Classification:
    label: SectorLabel | None
    k3_expectation: float
    k3_variance: float
    mixed: bool


def _k3_moments(k3: K3Operator, vec: np.ndarray):
    kv = k3.matvec(vec)
    e1 = float(np.real(np.vdot(vec, kv)))
    e2 = float(np.real(np.vdot(kv, kv)))
    return e1, max(e2 - e1 * e1, 0.0)


def _nearest_label(k3_val: float, s_sign: float, t_sign: float, m: int) -> SectorLabel:
    s = 1 if s_sign >= 0 else -1
    t = 1 if t_sign >= 0 else -1
    l = round(k3_val - s / 2.0 - m * t / 2.0)
    return SectorLabel(int(l), s, t, m)


def classify_by_k3(res: SpectrumResult, k3: K3Operator, triple, m: int,
                   tol: float = 1e-4, cluster_tol: float | None = None
                   ) -> list[Classification]:
    """Assign (l, s, t) to each retained eigenvector.

    Degenerate eigenvalue clusters are rotated to diagonalize K3 inside the
    cluster first (eigenvectors of a degenerate level are otherwise
    arbitrary mixtures). A vector is 'mixed' when its K3 variance exceeds
    tol; s and t come from the signs of the spin-third and internal-third
    expectations.
    """
    if res.eigenvectors is None:
        raise ValueError("classification needs retained eigenvectors")
    lam = res.eigenvalues
    vecs = res.eigenvectors.copy()
    if cluster_tol is None:
        cluster_tol = 100.0 * float(res.solver_info.get("tol", 1e-8))
    # rotate within clusters of (numerically) equal eigenvalues
    start = 0
    while start < lam.size:
        stop = start + 1
        while stop < lam.size and abs(lam[stop] - lam[start]) <= cluster_tol:
            stop += 1
        if stop - start > 1:
            block = vecs[:, start:stop]
            g = block.conj().T @ np.column_stack(
                [k3.matvec(block[:, j]) for j in range(stop - start)])
            _, u = np.linalg.eigh(0.5 * (g + g.conj().T))
            vecs[:, start:stop] = block @ u
        start = stop
    out = []
    dk = triple.dim_k
    n = k3.grid.n
    sigma3 = np.array([1.0, -1.0, 1.0, -1.0])
    for j in range(lam.size):
        vec = vecs[:, j]
        e, var = _k3_moments(k3, vec)
        psi = vec.reshape(4, dk, n, n, n)
        s_sign = float(np.sum(sigma3 @ np.sum(np.abs(psi) ** 2, axis=(1, 2, 3, 4))))
        dens_k = np.sum(np.abs(psi) ** 2, axis=(0, 2, 3, 4))
        t_sign = float(np.real(np.trace(triple.t3 @ np.diag(dens_k))))
        mixed = var > tol
        label = None if mixed else _nearest_label(e, s_sign, t_sign, m)
        out.append(Classification(label, e, var, mixed))
    return out


@dataclass
class EquivalenceReport:
    off_block_residual: float
    spectrum_mismatch: float
    k3_lattice_deviation: float
    sector_sizes: dict
    details: dict = field(default_factory=dict)


def sector_equivalence_check(grid: GridSpec, mf: MassFieldConfig, alg, m: int,
                             tol: float = 1e-6) -> EquivalenceReport:
    """Dense simultaneous block-diagonalization of (H, K3) on a small grid.

    K3 is diagonalized exactly; its eigenvalues are clustered to the
    (l, s, t) lattice and H is rotated into that eigenbasis. Reported:
    the largest H matrix element between different clusters (relative to
    the spectral width), the mismatch between the full spectrum and the
    union of per-sector spectra, and how far K3 eigenvalues sit from the
    lattice. On a finite grid the commutation is approximate, so these are
    measured quantities, not exact zeros.
    """
    from .operators import assemble_H
    h = dense_matrix(assemble_H(grid, mf, alg))
    k3 = dense_matrix(K3Operator(grid, mf.triple, m))
    kw, kv = np.linalg.eigh(k3)
    lattice = np.round(kw * 2.0) / 2.0  # half-integer lattice for any m
    k3_dev = float(np.max(np.abs(kw - lattice)))
    h_rot = kv.conj().T @ h @ kv
    values = np.unique(lattice)
    spectra = []
    sizes = {}
    off = 0.0
    for val in values:
        mask = lattice == val
        block = h_rot[np.ix_(mask, ~mask)]
        if block.size:
            off = max(off, float(np.max(np.abs(block))))
        sub = h_rot[np.ix_(mask, mask)]
        spectra.append(np.linalg.eigvalsh(0.5 * (sub + sub.conj().T)))
        sizes[float(val)] = int(np.count_nonzero(mask))
    union = np.sort(np.concatenate(spectra))
    full = np.sort(np.linalg.eigvalsh(h))
    mismatch = float(np.max(np.abs(union - full)))
    width = float(full[-1] - full[0])
    return EquivalenceReport(
        off_block_residual=off / max(width, 1.0),
        spectrum_mismatch=mismatch,
        k3_lattice_deviation=k3_dev,
        sector_sizes=sizes,
        details={"spectral_width": width, "tol": tol},
    )


@dataclass
class SectorScanRow:
    l: int
    s: int
    t: int
    eps: float
    e0: float
    converged: bool


def sector_epsilon_scan(G, l_values, s_values, t_values, M: float, eps_list,
                        grid: CylGrid, tol: float = 1e-10, *,
                        z_sign: int = -1) -> list[SectorScanRow]:
    """Ground energy of the reduced comparison operator for the dilated
    family over a task grid of (l, s, t, eps).

    The dilated operator uses G(eps r, eps z) and the amplified mass M/eps;
    the reduced operator does not involve t (it only sets the internal
    eigenspace), so rows differing only in t share the ground energy.
    """
    rows: list[SectorScanRow] = []
    for eps in eps_list:
        if eps <= 0:
            raise ValueError("eps values must be positive")
        g_eps = (lambda e: (lambda r, z: G(e * r, e * z)))(float(eps))
        for l in l_values:
            for s in s_values:
                op = assemble_Ls(g_eps, l, s, M, grid, z_sign=z_sign,
                                 mass_coeff=M / float(eps))
                try:
                    e0 = sector_ground(op, tol)
                    ok = True
                except NonConvergenceError:
                    e0, ok = float("nan"), False
                for t in t_values:
                    rows.append(SectorScanRow(int(l), int(s), int(t),
                                              float(eps), e0, ok))
    return rows
