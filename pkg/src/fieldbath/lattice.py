"""Periodic lattice geometry, difference operators, and the Fourier mode basis.

The spatial domain is a ring of length ``ell`` sampled at ``2N`` points
``x_i = i*dx`` for ``i = -N, ..., N-1`` with ``dx = ell/(2N)``.  Plane waves

    u_n(x_i) = exp(-i k_n x_i) / sqrt(ell),    k_n = 2*pi*n/ell,

for ``n = -N, ..., N-1`` are orthonormal (with weight ``1/dx``), complete,
and diagonalize the periodic difference operators.  The first derivative is
the central stencil with entries ``+-1/(2 dx)`` at offsets ``+-1``; the
second derivative is its square, which couples sites two apart and has
eigenvalues ``-lambda_n**2`` with

    lambda_n = sin(k_n * dx) / dx.

Because the squared stencil only connects sites at distance ``2 dx``, the
even and odd sublattices decouple and every ``lambda_n**2`` value appears
twice in the spectrum; the mode basis resolves the degeneracy.

Modes are stored in the order ``n = -N..N-1`` at array index ``n + N``.
On the lattice ``k_N`` and ``k_{-N}`` are the same wave, so the map
``k -> -k`` sends ``n`` to ``-n`` with the Nyquist mode ``n = -N`` fixed.
The modes ``n = 0`` and ``n = -N`` are therefore self-conjugate: a real
field forces their amplitudes to be real.

A real field and its conjugate expand as

    Phi(x_i) = sqrt(dk) * sum_n phi(k_n) u_n(x_i),      dk = 2*pi/ell,

with the reality constraint ``phi(-k_n) = conj(phi(k_n))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    """Grid geometry, physical constants, and mode bookkeeping.

    Parameters
    ----------
    N : int
        Half the number of grid points (``2N`` sites, ``N >= 1``).
    ell : float
        Total length of the periodic domain.
    c : float
        Wave speed.
    hbar : float
        Action scale; ``0`` is permitted only for classical-limit analytics.
    beta : float
        Inverse temperature ``1/(kB*T)``.
    kB : float
        Boltzmann constant (default 1).
    """

    N: int
    ell: float
    c: float = 1.0
    hbar: float = 1.0
    beta: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not self.ell > 0:
            raise ValueError(f"ell must be positive, got {self.ell}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.hbar < 0:
            raise ValueError(f"hbar must be >= 0, got {self.hbar}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.kB > 0:
            raise ValueError(f"kB must be positive, got {self.kB}")
        n = np.arange(-self.N, self.N)
        object.__setattr__(self, "_mode_numbers", n)
        conj = np.where(-n == self.N, -self.N, -n) + self.N
        object.__setattr__(self, "_conjugate_indices", conj)

    @property
    def npoints(self) -> int:
        return 2 * self.N

    @property
    def dx(self) -> float:
        return self.ell / (2 * self.N)

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.ell

    @property
    def temperature(self) -> float:
        return 1.0 / (self.kB * self.beta)

    @property
    def mode_numbers(self) -> np.ndarray:
        """Mode integers n = -N..N-1, at array index n + N."""
        return self._mode_numbers

    @property
    def positions(self) -> np.ndarray:
        return self._mode_numbers * self.dx

    @property
    def k_values(self) -> np.ndarray:
        return self._mode_numbers * self.dk

    @property
    def kabs(self) -> np.ndarray:
        return np.abs(self.k_values)

    @property
    def lambdas(self) -> np.ndarray:
        """lambda_n = sin(k_n dx)/dx for every mode."""
        return np.sin(self.k_values * self.dx) / self.dx

    @property
    def conjugate_indices(self) -> np.ndarray:
        """Array index of the mode paired under k -> -k (Nyquist maps to itself)."""
        return self._conjugate_indices

    @property
    def self_conjugate_mask(self) -> np.ndarray:
        """True for modes with k = -k on the lattice (n = 0 and n = -N)."""
        return self._conjugate_indices == np.arange(2 * self.N)


@dataclass(frozen=True)
class DerivativeOperator:
    """Dense circulant difference operator of order 1 or 2."""

    order: int
    matrix: np.ndarray
    dx: float


def build_derivative(spec: LatticeSpec, order: int) -> DerivativeOperator:
    """Build the periodic first- or second-difference operator.

    Order 1 has ``+-1/(2 dx)`` at index offsets ``+-1``; order 2 has
    ``-2/(2 dx)^2`` on the diagonal and ``+1/(2 dx)^2`` at offsets ``+-2``
    (entries accumulate where offsets coincide on small grids, so the
    identity ``order2 == order1 @ order1`` holds for every N).
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if spec.N < 2:
        raise ValueError("derivative stencils need N >= 2 (the stencil wraps onto itself)")
    m = spec.npoints
    mat = np.zeros((m, m))
    idx = np.arange(m)
    if order == 1:
        h = 1.0 / (2.0 * spec.dx)
        np.add.at(mat, (idx, (idx + 1) % m), h)
        np.add.at(mat, (idx, (idx - 1) % m), -h)
    else:
        h = 1.0 / (2.0 * spec.dx) ** 2
        np.add.at(mat, (idx, idx), -2.0 * h)
        np.add.at(mat, (idx, (idx + 2) % m), h)
        np.add.at(mat, (idx, (idx - 2) % m), h)
    return DerivativeOperator(order=order, matrix=mat, dx=spec.dx)


@dataclass(frozen=True)
class ModeBasis:
    """Plane-wave basis table and its difference-operator eigenvalues.

    ``vectors[j, i] = u_{n_j}(x_i)`` with ``n_j = j - N``; ``lambdas[j]``
    is the corresponding ``sin(k dx)/dx`` eigenvalue factor.
    """

    vectors: np.ndarray
    lambdas: np.ndarray
    dx: float
    dk: float


def eigenbasis(spec: LatticeSpec) -> ModeBasis:
    """All 2N plane-wave vectors and their lambda values."""
    k = spec.k_values
    x = spec.positions
    vectors = np.exp(-1j * np.outer(k, x)) / np.sqrt(spec.ell)
    return ModeBasis(vectors=vectors, lambdas=spec.lambdas, dx=spec.dx, dk=spec.dk)


def to_modes(field_x: np.ndarray, basis: ModeBasis) -> np.ndarray:
    """Mode coefficients phi(k_n) of a position-space field.

    Inverse of :func:`from_modes`; accepts leading batch axes.
    """
    field_x = np.asarray(field_x)
    m = basis.vectors.shape[0]
    if field_x.shape[-1] != m:
        raise ValueError(f"field length {field_x.shape[-1]} != 2N = {m}")
    return (basis.dx / np.sqrt(basis.dk)) * (field_x @ basis.vectors.conj().T)


def from_modes(phi_k: np.ndarray, basis: ModeBasis) -> np.ndarray:
    """Position-space field Phi(x_i) = sqrt(dk) sum_n phi(k_n) u_n(x_i)."""
    phi_k = np.asarray(phi_k)
    m = basis.vectors.shape[0]
    if phi_k.shape[-1] != m:
        raise ValueError(f"mode vector length {phi_k.shape[-1]} != 2N = {m}")
    return np.sqrt(basis.dk) * (phi_k @ basis.vectors)


def project_reality(modes: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Project mode amplitudes onto the real-field constraint.

    Enforces ``f(-k_n) = conj(f(k_n))`` by symmetrization; self-conjugate
    modes come out exactly real.  Accepts leading batch axes.
    """
    modes = np.asarray(modes, dtype=complex)
    return 0.5 * (modes + modes[..., spec.conjugate_indices].conj())


def reality_defect(modes: np.ndarray, spec: LatticeSpec) -> float:
    """Max-norm violation of the reality pairing."""
    return float(
        np.max(np.abs(modes - modes[..., spec.conjugate_indices].conj()), initial=0.0)
    )
