"""Liouville-space algebra for small quantum systems.

Density matrices are vectorized row-major: the operator ``|j><j'|`` sits at
index ``j * d + j'``.  For a two-level system the basis order is therefore
``|11>, |12>, |21>, |22>`` (states labelled from 1 as in the usual notation,
index 0 and 1 in code).

A superoperator is a plain ``(d*d, d*d)`` complex ndarray.  Propagators are
written as ``exp(-A t)`` with ``A = i H_hat + R_hat`` (the generator), so the
coherent propagator is ``exp(-i H_hat t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

HERMITIAN_ATOL = 1e-12
EIGVEC_COND_MAX = 1e8
BRANCH_CUT_ATOL = 1e-12


class DefectiveMatrixError(np.linalg.LinAlgError):
    """Raised when an eigendecomposition is too ill-conditioned to trust."""


class BranchCutError(ValueError):
    """Raised when a spectrum touches the branch cut of a fractional power."""


@dataclass(frozen=True)
class RelaxationParams:
    """Population relaxation rate ``w_d`` and dephasing rate ``w_p``."""

    w_d: float = 0.0
    w_p: float = 0.0

    def __post_init__(self):
        if self.w_d < 0 or self.w_p < 0:
            raise ValueError(f"relaxation rates must be non-negative, got w_d={self.w_d}, w_p={self.w_p}")
        if self.w_p < 0.5 * self.w_d:
            raise ValueError(
                f"w_p={self.w_p} < w_d/2={0.5 * self.w_d}: the density matrix would lose positivity"
            )


@dataclass(frozen=True)
class TwoLevelParams:
    """Half-splitting ``epsilon`` and coupling ``v`` of a two-level system."""

    epsilon: float
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"coupling v must be positive, got {self.v}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")

    @property
    def epsilon_bar(self) -> float:
        return self.epsilon / self.v

    @property
    def energy(self) -> float:
        """Eigen-energy ``E = sqrt(epsilon^2 + v^2)``."""
        return float(np.hypot(self.epsilon, self.v))


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Hamiltonian, measured state and optional relaxation of a d-level system."""

    hamiltonian: np.ndarray
    measured_index: int = 0
    relaxation: Optional[RelaxationParams] = None
    dim: int = field(init=False)

    def __post_init__(self):
        H = np.array(self.hamiltonian, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError(f"hamiltonian must be square, got shape {H.shape}")
        d = H.shape[0]
        if d < 2:
            raise ValueError("need at least two levels")
        check_hermitian(H)
        if not 0 <= self.measured_index < d:
            raise ValueError(f"measured_index {self.measured_index} out of range for dim {d}")
        if self.relaxation is not None and d != 2:
            raise ValueError("the relaxation model is only defined for two-level systems")
        H.setflags(write=False)
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "dim", d)

    @classmethod
    def two_level(cls, params: TwoLevelParams, relaxation: Optional[RelaxationParams] = None):
        """Two-level model measured in state ``|1>`` (index 0)."""
        return cls(build_hamiltonian(params), 0, relaxation)


def check_hermitian(H, atol=HERMITIAN_ATOL):
    H = np.asarray(H)
    gap = np.max(np.abs(H - H.conj().T))
    if gap > atol:
        raise ValueError(f"matrix is not Hermitian (max |H - H^dagger| = {gap:.3g} > {atol})")


def build_hamiltonian(p: TwoLevelParams) -> np.ndarray:
    """``H = epsilon (|1><1| - |2><2|) + v (|1><2| + |2><1|)``."""
    return np.array([[p.epsilon, p.v], [p.v, -p.epsilon]], dtype=complex)


def commutator_superop(H) -> np.ndarray:
    """Superoperator of ``rho -> [H, rho]`` in the row-major basis.

    Elements are ``<kk'|H_hat|jj'> = H_kj delta_{j'k'} - H_{j'k'} delta_{jk}``.
    """
    H = np.asarray(H, dtype=complex)
    check_hermitian(H)
    eye = np.eye(H.shape[0])
    return np.kron(H, eye) - np.kron(eye, H.T)


def projector_superops(m: int, d: int):
    """Return ``(P_m, Q_m)``: projection onto ``|mm>`` and its complement."""
    if not 0 <= m < d:
        raise ValueError(f"state index {m} out of range for dimension {d}")
    n = d * d
    P = np.zeros((n, n), dtype=complex)
    k = m * d + m
    P[k, k] = 1.0
    return P, np.eye(n, dtype=complex) - P


def relaxation_superop(r: RelaxationParams, d: int = 2) -> np.ndarray:
    """Population relaxation (rate ``w_d``) plus dephasing (rate ``w_p``)."""
    if d != 2:
        raise ValueError("relaxation superoperator is defined for d=2 only")
    R = np.zeros((4, 4), dtype=complex)
    pop = np.array([1.0, 0.0, 0.0, -1.0])
    R += r.w_d * np.outer(pop, pop)
    R[1, 1] += r.w_p
    R[2, 2] += r.w_p
    return R


def generator(model: SystemModel) -> np.ndarray:
    """``L = i H_hat + R_hat``; the density matrix obeys ``d rho/dt = -L rho``."""
    L = 1j * commutator_superop(model.hamiltonian)
    if model.relaxation is not None:
        L = L + relaxation_superop(model.relaxation, model.dim)
    return L


def superop_exp(A, t: float) -> np.ndarray:
    """``exp(-A t)`` by scaling-and-squaring Pade (safe for non-normal ``A``)."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    A = np.asarray(A, dtype=complex)
    return scipy.linalg.expm(-t * A)


def eig_checked(A, cond_max=EIGVEC_COND_MAX):
    """Eigendecomposition ``A = V diag(w) V^-1`` with a conditioning guard.

    Works on stacks of matrices (leading batch axes).
    """
    A = np.asarray(A, dtype=complex)
    w, V = np.linalg.eig(A)
    # condition number of V with columns normalized (eig already gives unit columns)
    cond = np.linalg.cond(V)
    worst = np.max(cond)
    if not np.isfinite(worst) or worst > cond_max:
        raise DefectiveMatrixError(
            f"eigenvector matrix condition number {worst:.3g} exceeds {cond_max:.3g}; "
            "matrix is (nearly) defective"
        )
    return w, V


def _reassemble(V, fw):
    # V diag(fw) V^-1, via solve(V^T, (V diag(fw))^T)^T
    VF = V * fw[..., None, :]
    return np.linalg.solve(V.swapaxes(-1, -2), VF.swapaxes(-1, -2)).swapaxes(-1, -2)


def matrix_function(A, func, cond_max=EIGVEC_COND_MAX):
    """Apply a scalar function to a diagonalizable matrix (or stack of them)."""
    w, V = eig_checked(A, cond_max)
    return _reassemble(V, func(w))


def superop_fractional_power(A, beta: float, cond_max=EIGVEC_COND_MAX) -> np.ndarray:
    """Principal-branch ``A**beta`` through the eigendecomposition.

    Raises
    ------
    DefectiveMatrixError
        If the eigenvector matrix condition number exceeds ``cond_max``.
    BranchCutError
        If an eigenvalue lies on (or within 1e-12 of) the closed negative
        real axis, where the principal branch is discontinuous.
    """
    A = np.asarray(A, dtype=complex)
    if beta == 1:
        return A.copy()
    w, V = eig_checked(A, cond_max)
    scale = max(1.0, float(np.max(np.abs(w))))
    on_cut = (w.real <= 0) & (np.abs(w.imag) <= BRANCH_CUT_ATOL * scale)
    if np.any(on_cut):
        raise BranchCutError(f"eigenvalue(s) {w[on_cut]} on the branch cut of z**{beta}")
    return _reassemble(V, np.exp(beta * np.log(w)))


def survival_no_measurement(model: SystemModel, t: float) -> float:
    """Survival ``<mm| exp(-L t) |mm>`` without any measurement."""
    d, m = model.dim, model.measured_index
    k = m * d + m
    U = superop_exp(generator(model), t)
    return float(U[k, k].real)


def stationary_overlap(model: SystemModel) -> float:
    """Long-time average of the unmeasured survival, ``sum_j |<m|phi_j>|^4``."""
    if model.relaxation is not None:
        raise ValueError("stationary overlap is defined for dynamic (relaxation-free) models")
    _, phi = np.linalg.eigh(model.hamiltonian)
    return float(np.sum(np.abs(phi[model.measured_index, :]) ** 4))


class SpectralSurvival:
    """Vectorized evaluation of the unmeasured survival ``p1(t)``.

    Uses the eigendecomposition of the generator when it is well conditioned
    and falls back to batched matrix exponentials otherwise.
    """

    def __init__(self, model: SystemModel):
        self.model = model
        d, m = model.dim, model.measured_index
        self._k = m * d + m
        self._L = generator(model)
        try:
            w, V = eig_checked(self._L)
        except DefectiveMatrixError:
            self.rates = None
            self.weights = None
        else:
            Vinv = np.linalg.inv(V)
            self.rates = w
            self.weights = V[self._k, :] * Vinv[:, self._k]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.rates is not None:
            vals = np.exp(-np.multiply.outer(t, self.rates)) @ self.weights
            return vals.real
        flat = t.ravel()
        U = scipy.linalg.expm(-flat[:, None, None] * self._L[None, :, :])
        return U[:, self._k, self._k].real.reshape(t.shape)
