"""Finite-dimensional operators: position, momentum, Hamiltonians, semigroups.

Two finite Hamiltonians approximate H = (1/2)p^2 + V(q):

* the spectral one, (1/2)p_N^2 + V(q_N), where p_N is the grid position
  operator conjugated by the centered discrete Fourier transform;
* the walk one, -(1/2)Delta_eps + V, whose kinetic part is the second
  difference operator with conservative (reflecting) truncation at the grid
  edge, so the free part generates a probability-preserving random walk.

Everything is dense and double precision; eigendecompositions are the
workhorse for semigroups, traces, and trace norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GridSpec, enumerate_points, positions

HERMITICITY_RTOL = 1e-12
RECONSTRUCTION_RTOL = 1e-10
MAX_DENSE_DIM = 16384


class HermitianOperator:
    """A dense self-adjoint matrix with a validated hermiticity budget."""

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if m.shape[0] > MAX_DENSE_DIM:
            raise ValueError(f"dense dimension {m.shape[0]} exceeds {MAX_DENSE_DIM}")
        scale = np.max(np.abs(m)) if m.size else 0.0
        dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if dev > HERMITICITY_RTOL * scale:
            raise ValueError(
                f"matrix is not Hermitian: max deviation {dev:.3e} "
                f"exceeds {HERMITICITY_RTOL:.0e} * max|A| = {HERMITICITY_RTOL * scale:.3e}"
            )
        # drop an all-zero imaginary part so real operators stay real
        if np.iscomplexobj(m) and not np.any(m.imag):
            m = m.real
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim}, dtype={self.matrix.dtype})"


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and a unitary matrix of column eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class PotentialSpec:
    """A potential V, one of three kinds.

    * ``polynomial``: V(x) = sum over axes a of sum_j c_j * x_a**j
    * ``radial_power``: V(x) = c * r**m with r the Euclidean norm of x
      (or the p-adic norm when evaluated through ``evaluate_radius``)
    * ``tabulated``: an arbitrary caller-supplied function of the position

    Growth conditions (V -> infinity faster than log r) are a documented
    convention for the convergence experiments, not enforced here.
    """

    def __init__(self, kind: str, **params):
        if kind not in ("polynomial", "radial_power", "tabulated"):
            raise ValueError(f"unknown potential kind {kind!r}")
        self.kind = kind
        self.params = params

    # -- constructors -------------------------------------------------

    @classmethod
    def polynomial(cls, coeffs) -> "PotentialSpec":
        """Per-axis polynomial with coefficients [c0, c1, ...]."""
        c = [float(v) for v in coeffs]
        return cls("polynomial", coeffs=c)

    @classmethod
    def radial_power(cls, c: float, m: float) -> "PotentialSpec":
        """V = c * r**m."""
        return cls("radial_power", c=float(c), m=float(m))

    @classmethod
    def harmonic(cls) -> "PotentialSpec":
        """V = r**2 / 2."""
        return cls.radial_power(0.5, 2.0)

    @classmethod
    def constant(cls, c: float) -> "PotentialSpec":
        return cls.radial_power(float(c), 0.0)

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls.constant(0.0)

    @classmethod
    def tabulated(cls, fn) -> "PotentialSpec":
        """Wrap a caller-supplied function of the position (or radius)."""
        if not callable(fn):
            raise ValueError("tabulated potential needs a callable")
        return cls("tabulated", fn=fn)

    # -- evaluation ----------------------------------------------------

    def evaluate(self, x) -> np.ndarray:
        """V at positions x, shape (..., d) or (d,); returns shape (...)."""
        pts = np.asarray(x, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
            squeeze = True
        else:
            squeeze = False
        if self.kind == "polynomial":
            out = np.zeros(pts.shape[:-1])
            for j, c in enumerate(self.params["coeffs"]):
                if c != 0.0:
                    out += c * np.sum(pts**j, axis=-1)
        elif self.kind == "radial_power":
            r = np.sqrt(np.sum(pts**2, axis=-1))
            out = self.params["c"] * r ** self.params["m"]
        else:
            fn = self.params["fn"]
            out = np.asarray([fn(row) for row in pts.reshape(-1, pts.shape[-1])],
                             dtype=np.float64).reshape(pts.shape[:-1])
        return out[0] if squeeze else out

    def evaluate_radius(self, r) -> np.ndarray:
        """V as a function of the radius alone (radial kinds only)."""
        rr = np.asarray(r, dtype=np.float64)
        if self.kind == "radial_power":
            return self.params["c"] * rr ** self.params["m"]
        if self.kind == "polynomial":
            out = np.zeros_like(rr)
            for j, c in enumerate(self.params["coeffs"]):
                if c != 0.0:
                    out = out + c * rr**j
            return out
        fn = self.params["fn"]
        if rr.ndim == 0:
            return np.float64(fn(float(rr)))
        return np.asarray([fn(float(v)) for v in rr.ravel()]).reshape(rr.shape)

    @property
    def is_harmonic(self) -> bool:
        if self.kind == "radial_power":
            return self.params["c"] == 0.5 and self.params["m"] == 2.0
        if self.kind == "polynomial":
            c = self.params["coeffs"]
            return (len(c) >= 3 and c[2] == 0.5
                    and all(v == 0.0 for i, v in enumerate(c) if i != 2))
        return False

    def describe(self) -> dict:
        if self.kind == "tabulated":
            return {"kind": "tabulated"}
        return {"kind": self.kind, **self.params}

    def __repr__(self):
        return f"PotentialSpec({self.describe()})"


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def potential_on_grid(g: GridSpec, V: PotentialSpec) -> np.ndarray:
    """V evaluated at the physical grid positions, in canonical order."""
    return V.evaluate(positions(g))


def position_operators(g: GridSpec) -> list[HermitianOperator]:
    """The d diagonal position operators, entry epsilon*coords[a] per point."""
    pos = positions(g)
    return [HermitianOperator(np.diag(pos[:, a])) for a in range(g.d)]


def _dft_1d(N: int) -> np.ndarray:
    """Centered unitary DFT, F[j, l] = exp(2*pi*i*j*l/N)/sqrt(N), j,l in [-k, k]."""
    k = (N - 1) // 2
    m = np.arange(-k, k + 1)
    return np.exp(2j * np.pi * np.outer(m, m) / N) / np.sqrt(N)


def dft_matrix(g: GridSpec) -> np.ndarray:
    """Unitary DFT on the grid: centered per-axis transforms, tensored."""
    F1 = _dft_1d(g.N)
    F = F1
    for _ in range(g.d - 1):
        F = np.kron(F, F1)
    return F


def momentum_operators(g: GridSpec) -> list[HermitianOperator]:
    """Momentum per axis: the DFT conjugate of the position operator."""
    F1 = _dft_1d(g.N)
    q1 = g.epsilon * np.arange(-g.k, g.k + 1)
    p1 = (F1 * q1) @ F1.conj().T
    p1 = 0.5 * (p1 + p1.conj().T)
    ops = []
    for a in range(g.d):
        left = np.eye(g.N**a)
        right = np.eye(g.N ** (g.d - 1 - a))
        ops.append(HermitianOperator(np.kron(np.kron(left, p1), right)))
    return ops


def _kinetic_spectral_1d(N: int) -> np.ndarray:
    """(1/2) p^2 on one axis, built as (1/2) F q^2 F^dagger.

    The conjugated square is real symmetric: its entries are cosine sums,
    K[j, l] = (eps^2 / 2N) * sum_m m^2 cos(2*pi*(j - l)*m / N).  Building it
    directly keeps the matrix exactly real and avoids an extra matmul's
    rounding relative to squaring the momentum operator.
    """
    k = (N - 1) // 2
    eps2 = 2.0 * np.pi / N
    m = np.arange(-k, k + 1)
    diff = np.subtract.outer(m, m)
    ang = (2.0 * np.pi / N) * diff[..., None] * m
    K = (eps2 / (2.0 * N)) * np.sum(m**2 * np.cos(ang), axis=-1)
    return 0.5 * (K + K.T)


def schwinger_hamiltonian(g: GridSpec, V: PotentialSpec) -> HermitianOperator:
    """(1/2) sum_a p_a^2 + V(q): the spectral finite Hamiltonian."""
    ke1 = _kinetic_spectral_1d(g.N)
    H = np.zeros((g.size, g.size))
    for a in range(g.d):
        left = np.eye(g.N**a)
        right = np.eye(g.N ** (g.d - 1 - a))
        H += np.kron(np.kron(left, ke1), right)
    H[np.diag_indices_from(H)] += potential_on_grid(g, V)
    return HermitianOperator(0.5 * (H + H.T))


def stochastic_hamiltonian(g: GridSpec, V: PotentialSpec) -> HermitianOperator:
    """-(1/2)Delta_eps + V with conservative truncation at the grid edge.

    Delta_eps f(x) = sum_a [f(x + eps e_a) + f(x - eps e_a) - 2 f(x)] / eps^2.
    At a boundary face both the missing off-diagonal term and its matching
    diagonal contribution are dropped, so the free part has zero row sums and
    the associated walk is conservative inside the grid.
    """
    n = g.size
    if n > MAX_DENSE_DIM:
        raise ValueError(f"grid with {n} points is too large for a dense matrix")
    coords = enumerate_points(g)
    coeff = 1.0 / (2.0 * g.epsilon**2)
    H = np.zeros((n, n))
    # strides of the flattened lexicographic order, axis 0 slowest
    strides = [g.N ** (g.d - 1 - a) for a in range(g.d)]
    idx = np.arange(n)
    for a in range(g.d):
        for sign in (-1, +1):
            inside = np.abs(coords[:, a] + sign) <= g.k
            src = idx[inside]
            dst = src + sign * strides[a]
            H[src, dst] -= coeff
            H[src, src] += coeff
    H[np.diag_indices_from(H)] += potential_on_grid(g, V)
    return HermitianOperator(H)


def eigendecompose(A: HermitianOperator) -> SpectralDecomposition:
    """Full spectral decomposition, eigenvalues ascending; deterministic."""
    if not isinstance(A, HermitianOperator):
        A = HermitianOperator(A)
    w, U = np.linalg.eigh(A.matrix)
    scale = max(float(np.max(np.abs(A.matrix))), np.finfo(float).tiny)
    recon = (U * w) @ U.conj().T
    err = float(np.max(np.abs(A.matrix - recon)))
    if err > RECONSTRUCTION_RTOL * scale:
        raise ArithmeticError(
            f"eigendecomposition failed its reconstruction budget: {err:.3e}"
        )
    return SpectralDecomposition(eigenvalues=w, eigenvectors=U)


def semigroup(A: HermitianOperator, t: float) -> HermitianOperator:
    """e^{-tA} via functional calculus; positive definite for t > 0."""
    if not t > 0:
        raise ValueError(f"semigroup time must be positive, got {t}")
    dec = eigendecompose(A)
    U = dec.eigenvectors
    M = (U * np.exp(-t * dec.eigenvalues)) @ U.conj().T
    return HermitianOperator(0.5 * (M + M.conj().T))


def trace_norm_distance(A: HermitianOperator, B: HermitianOperator) -> float:
    """||A - B||_1: sum of singular values of the (Hermitian) difference."""
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    w = np.linalg.eigvalsh(A.matrix - B.matrix)
    return float(np.sum(np.abs(w)))


def mehler_reference(g: GridSpec, t: float) -> HermitianOperator:
    """Grid-sampled exact heat kernel of the harmonic oscillator (d = 1).

    M[a, b] = eps * K_t(x_a, x_b) with
    K_t(x, y) = (2*pi*sinh t)^{-1/2} exp(-[(x^2+y^2) cosh t - 2xy]/(2 sinh t)),
    the closed-form kernel of e^{-tH} for H = (1/2)(p^2 + q^2).  This is the
    continuum reference the spectral Hamiltonian's semigroup converges to in
    trace norm.
    """
    if g.d != 1:
        raise ValueError("the closed-form reference kernel is 1-dimensional")
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    x = g.epsilon * np.arange(-g.k, g.k + 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    sh, ch = np.sinh(t), np.cosh(t)
    K = np.exp(-((X**2 + Y**2) * ch - 2.0 * X * Y) / (2.0 * sh))
    K /= np.sqrt(2.0 * np.pi * sh)
    return HermitianOperator(g.epsilon * K)


def harmonic_trace_exact(t: float) -> float:
    """Trace of e^{-tH} for the harmonic oscillator: e^{-t/2}/(1 - e^{-t})."""
    return float(np.exp(-t / 2.0) / (1.0 - np.exp(-t)))
