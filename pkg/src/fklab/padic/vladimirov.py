"""A finite matrix model for the norm-multiplier Hamiltonian on Q_p.

The operator is conjugation of multiplication by |xi|^b with the Fourier
transform, plus a radial potential.  Truncating Q_p to the finite group
p^{-M} Z_p / p^{M'} Z_p (support radius p^M, resolution p^{-M'}) turns the
Fourier multiplier into a circulant matrix: the group is cyclic of order
p^(M+M') and the additive character restricted to it is exactly the
discrete Fourier kernel.  The model serves as a dense oracle for the
p-adic Feynman-Kac estimator; kernel densities are matrix entries scaled
by the cell volume p^(-M'), i.e. density = p^M' * entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..qops import HermitianOperator, PotentialSpec, eigendecompose
from .numbers import _is_prime

MAX_STATES = 10**4


@dataclass(frozen=True)
class VladimirovSpec:
    """Finite model parameters: prime, multiplier exponent, truncation, V."""

    p: int
    b: float
    M: int
    Mp: int
    V: PotentialSpec

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ValueError(f"p must be prime, got {self.p}")
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if self.M < 0:
            raise ValueError("support exponent M must be >= 0")
        if self.Mp < 1:
            raise ValueError("resolution exponent M' must be >= 1")
        if self.p ** (self.M + self.Mp) > MAX_STATES:
            raise ValueError(
                f"state count p**(M+M') = {self.p**(self.M + self.Mp)} "
                f"exceeds {MAX_STATES}")

    @property
    def n_states(self) -> int:
        return self.p ** (self.M + self.Mp)


def _valuations(n: np.ndarray, p: int) -> np.ndarray:
    v = np.zeros(len(n), dtype=np.int64)
    x = n.copy()
    mask = x > 0
    while np.any(mask):
        div = mask & (x % p == 0)
        v[div] += 1
        x[div] //= p
        mask = div
    return v


def coset_norms(p: int, shift: int, count: int) -> np.ndarray:
    """|representative| for cosets k = 0..count-1 of a cyclic model.

    Element k stands for k * p**(-shift); the zero coset has norm 0.
    """
    k = np.arange(count)
    v = _valuations(k, p)
    norms = np.float64(p) ** (shift - v)
    norms[0] = 0.0
    return norms


def vladimirov_hamiltonian(vs: VladimirovSpec) -> HermitianOperator:
    """H = F diag(|xi|^b) F^(-1) + diag(V(|x|)) on the finite group.

    The kinetic part is circulant (c[r] is the inverse DFT of the
    multiplier), real symmetric, and positive semidefinite; V is evaluated
    at the norms of the position cosets.
    """
    n = vs.n_states
    mult = coset_norms(vs.p, vs.Mp, n) ** vs.b
    c = np.fft.ifft(mult)
    if np.max(np.abs(c.imag)) > 1e-12 * max(np.max(np.abs(c.real)), 1.0):
        raise ArithmeticError("circulant profile unexpectedly complex")
    r = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    H = c.real[r]
    H[np.diag_indices_from(H)] += vs.V.evaluate_radius(coset_norms(vs.p, vs.M, n))
    return HermitianOperator(0.5 * (H + H.T))


def vladimirov_kernel_matrix(vs: VladimirovSpec, T: float) -> np.ndarray:
    """Kernel density values of e^{-T H} in the finite model.

    Matrix entries are rescaled by the cell volume p^(-M'), so entry (i, j)
    approximates the continuum kernel density at the coset representatives.
    """
    if not T > 0:
        raise ValueError(f"time must be positive, got {T}")
    dec = eigendecompose(vladimirov_hamiltonian(vs))
    U = dec.eigenvectors
    S = (U * np.exp(-T * dec.eigenvalues)) @ U.T
    return float(vs.p) ** vs.Mp * S
