"""Finite-dimensional operator algebra: Dirac matrices, internal involution
triples, and grading operators.

Everything here is a small dense complex matrix (at most 4*dim_k square).
Construction is exact integer/rational arithmetic up to one square-root
normalization, so identities are asserted at near machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PAULI_1 = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_3 = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiracAlgebra:
    """The three alpha matrices, beta, and the derived gamma5 (all 4x4)."""

    alpha: tuple[np.ndarray, np.ndarray, np.ndarray]
    beta: np.ndarray
    gamma5: np.ndarray


@dataclass(frozen=True)
class IsoSpinTriple:
    """Hermitian involutions t1, t2, t3 on the internal space with the
    quaternion-like products t1 t2 = i t3 (cyclically)."""

    dim_k: int
    t1: np.ndarray
    t2: np.ndarray
    t3: np.ndarray

    @property
    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.t1, self.t2, self.t3)


@dataclass(frozen=True)
class XiOperator:
    """Constant Hermitian involution xi = (c*t1 - t2)/sqrt(1+c^2).

    By construction xi anticommutes with every direction field of the form
    n = (f, c*f, g): the coefficient vector (c, -1, 0) is orthogonal to
    (f, c*f, g) for any f, g.
    """

    c: float
    xi: np.ndarray


def weyl_matrices() -> DiracAlgebra:
    """Chiral block representation: alpha_j = diag(sigma_j, -sigma_j),
    beta = antidiag(I, I). gamma5 is computed as -i*a1*a2*a3 and checked
    against diag(1, 1, -1, -1) to guard against representation slips."""
    zeros = np.zeros((2, 2), dtype=complex)
    alpha = tuple(
        _frozen(np.block([[s, zeros], [zeros, -s]]))
        for s in (PAULI_1, PAULI_2, PAULI_3)
    )
    beta = _frozen(np.block([[zeros, ID2], [ID2, zeros]]))
    gamma5 = -1j * alpha[0] @ alpha[1] @ alpha[2]
    expected = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    if not np.allclose(gamma5, expected, atol=1e-14):
        raise AssertionError("gamma5 = -i a1 a2 a3 does not reduce to diag(1,1,-1,-1)")
    return DiracAlgebra(alpha=alpha, beta=beta, gamma5=_frozen(gamma5))


def pauli_triple() -> IsoSpinTriple:
    """The canonical dim_k = 2 triple (the Pauli matrices)."""
    return IsoSpinTriple(dim_k=2, t1=_frozen(PAULI_1), t2=_frozen(PAULI_2),
                         t3=_frozen(PAULI_3))


def kron_identity_triple(base: IsoSpinTriple, copies: int) -> IsoSpinTriple:
    """Tensor a triple with an identity factor (dim_k -> dim_k * copies).

    Preserves all triple relations; used to probe how bounds scale with the
    internal dimension."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    eye = np.eye(copies, dtype=complex)
    return IsoSpinTriple(
        dim_k=base.dim_k * copies,
        t1=_frozen(np.kron(base.t1, eye)),
        t2=_frozen(np.kron(base.t2, eye)),
        t3=_frozen(np.kron(base.t3, eye)),
    )


@dataclass
class Violation:
    relation: str
    residual: float


def _max_entry(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def verify_triple(triple: IsoSpinTriple, tol: float) -> list[Violation]:
    """Check every triple invariant; returns one record per failed relation
    (empty list means the triple is valid within tol, max-entry norm)."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    t = triple.matrices
    eye = np.eye(triple.dim_k, dtype=complex)
    out: list[Violation] = []

    def check(name: str, resid: float) -> None:
        if resid > tol:
            out.append(Violation(name, resid))

    for j in range(3):
        check(f"T{j+1} hermitian", _max_entry(t[j] - t[j].conj().T))
        check(f"T{j+1}^2 = I", _max_entry(t[j] @ t[j] - eye))
    cyclic = [("T1T2=iT3", 0, 1, 2), ("T2T3=iT1", 1, 2, 0), ("T3T1=iT2", 2, 0, 1)]
    for name, a, b, c in cyclic:
        check(name, _max_entry(t[a] @ t[b] - 1j * t[c]))
    for j in range(3):
        for k in range(j + 1, 3):
            check(f"{{T{j+1},T{k+1}}} = 0", _max_entry(t[j] @ t[k] + t[k] @ t[j]))
    # each T must carry both +1 and -1, i.e. be neither I nor -I
    for j in range(3):
        tr = np.trace(t[j]).real
        if abs(abs(tr) - triple.dim_k) <= tol * triple.dim_k:
            out.append(Violation(f"T{j+1} = +/-I (spectrum not {{+1,-1}})", 0.0))
    return out


def xi_operator(c: float, triple: IsoSpinTriple) -> XiOperator:
    """Constant involution (c*T1 - T2)/sqrt(1+c^2)."""
    if c == 0:
        raise ValueError("c must be nonzero")
    norm = np.sqrt(1.0 + c * c)
    xi = (c * triple.t1 - triple.t2) / norm
    return XiOperator(c=float(c), xi=_frozen(xi))


def grading_matrix(alg: DiracAlgebra, xi: XiOperator) -> np.ndarray:
    """Pointwise grading kernel i*gamma5*beta (x) xi on C^4 (x) K.

    Hermitian and involutory whenever xi is."""
    return np.kron(1j * alg.gamma5 @ alg.beta, xi.xi)
