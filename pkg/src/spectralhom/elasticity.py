"""Mandel-notation tensor algebra and the elastic Green operator.

Symmetric second-order tensors are stored as Mandel vectors of length
D = d (d + 1) / 2 with components

    d = 2:  (e11, e22, sqrt(2) e12)
    d = 3:  (e11, e22, e33, sqrt(2) e12, sqrt(2) e13, sqrt(2) e23)

so that the Euclidean inner product of two Mandel vectors equals the full
tensor contraction, and fourth-order tensors become plain D x D matrices
acting by matrix-vector products.

The reference Green operator maps a polarization stress to the compatible
strain of the homogeneous reference problem, frequency by frequency.  With
the symmetrised-gradient matrix S(k) (so that the strain of a displacement
amplitude u at frequency k is i S(k) u) it reads

    G0(k) = S(k) (S(k)^T C0 S(k))^{-1} S(k)^T,        G0(0) = 0,

a real, symmetric, positive-semidefinite Mandel matrix.  It is invariant
under scaling of k: the middle inverse is (-2)-homogeneous and cancels the
two gradient factors, so any consistent 2 pi convention in the frequency
variable drops out.  The zero-frequency entry is set to zero, which pins the
mean of the fluctuation strain to zero while the prescribed macroscopic
strain carries the mean.

The periodised Green operator of a generator rule accumulates weighted
class sums m sum_z G0(h + M^T z) |c_{h + M^T z}|^2 over the dual generating
set.  For the orthonormalised Dirichlet rule (|c|^2 = 1/m on its support)
the table reproduces G0 on G(M^T) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .lattice import PatternMatrix, frequency_set
from .translates import CoefficientRule, GeneratorSpec

__all__ = [
    "mandel_dim",
    "shear_pairs",
    "iso_stiffness",
    "sym_grad_matrix",
    "sym_grad_hat",
    "green_coeff",
    "green_coeff_batch",
    "GreenTable",
    "periodized_green",
]

_SHEAR_PAIRS = {1: (), 2: ((0, 1),), 3: ((0, 1), (0, 2), (1, 2))}
_SQRT2 = np.sqrt(2.0)


def mandel_dim(d: int) -> int:
    return d * (d + 1) // 2


def shear_pairs(d: int) -> tuple:
    return _SHEAR_PAIRS[d]


def _check_spd(C: np.ndarray, what: str) -> None:
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ShapeError(f"{what} must be a square Mandel matrix, got shape {C.shape}")
    if not np.allclose(C, C.T, atol=1e-12 * max(1.0, float(np.abs(C).max()))):
        raise DomainError(f"{what} must be symmetric")
    if np.linalg.eigvalsh(C).min() <= 0.0:
        raise DomainError(f"{what} must be positive definite")


def iso_stiffness(lam: float, mu: float, d: int) -> np.ndarray:
    """Mandel matrix of the isotropic stiffness with Lame parameters lam, mu."""
    if d not in (2, 3):
        raise DomainError(f"elasticity supports d in (2, 3), got {d}")
    if not (mu > 0.0 and d * lam + 2.0 * mu > 0.0):
        raise DomainError(f"non-elliptic parameters lam = {lam}, mu = {mu} (d = {d})")
    D = mandel_dim(d)
    C = np.zeros((D, D))
    C[:d, :d] = lam
    C[:d, :d] += 2.0 * mu * np.eye(d)
    for i in range(d, D):
        C[i, i] = 2.0 * mu
    return C


def sym_grad_matrix(k) -> np.ndarray:
    """Real D x d matrix S(k) with sym-gradient amplitude i S(k) u."""
    k = np.asarray(k, dtype=np.float64)
    d = k.shape[0]
    D = mandel_dim(d)
    S = np.zeros((D, d))
    for a in range(d):
        S[a, a] = k[a]
    for row, (a, b) in enumerate(_SHEAR_PAIRS[d], start=d):
        S[row, b] += k[a] / _SQRT2
        S[row, a] += k[b] / _SQRT2
    return S


def sym_grad_hat(k, u_hat) -> np.ndarray:
    """Mandel vector of the symmetrised gradient (i/2)(k u^T + u k^T)."""
    u_hat = np.asarray(u_hat)
    return 1j * (sym_grad_matrix(k) @ u_hat)


def _batched_sym_grad(ks: np.ndarray) -> np.ndarray:
    n, d = ks.shape
    D = mandel_dim(d)
    S = np.zeros((n, D, d))
    for a in range(d):
        S[:, a, a] = ks[:, a]
    for row, (a, b) in enumerate(_SHEAR_PAIRS[d], start=d):
        S[:, row, b] += ks[:, a] / _SQRT2
        S[:, row, a] += ks[:, b] / _SQRT2
    return S


def green_coeff_batch(C0: np.ndarray, ks: np.ndarray, check: bool = True) -> np.ndarray:
    """Green operator matrices for an (n, d) batch of integer frequencies."""
    ks = np.asarray(ks, dtype=np.float64)
    if ks.ndim != 2:
        raise ShapeError(f"expected an (n, d) frequency batch, got shape {ks.shape}")
    n, d = ks.shape
    if check:
        _check_spd(C0, "reference stiffness")
        if np.asarray(C0).shape != (mandel_dim(d), mandel_dim(d)):
            raise ShapeError("reference stiffness does not match the spatial dimension")
    S = _batched_sym_grad(ks)
    A = np.einsum("nai,ab,nbj->nij", S, C0, S)
    zero = np.all(ks == 0.0, axis=1)
    A[zero] = np.eye(d)
    G = np.einsum("nai,nij,nbj->nab", S, np.linalg.inv(A), S)
    G[zero] = 0.0
    return G


def green_coeff(C0: np.ndarray, k) -> np.ndarray:
    """Green operator matrix at a single integer frequency (zero at k = 0)."""
    k = np.asarray(k, dtype=np.int64)
    return green_coeff_batch(C0, k[None, :])[0]


@dataclass(frozen=True, eq=False)
class GreenTable:
    """Periodised Green operator over the dual generating set.

    One real symmetric PSD Mandel matrix per frequency class, in canonical
    order; the entry for the class of h = 0 is zero.
    """

    matrix: PatternMatrix
    table: np.ndarray  # (m, D, D) float64, read-only
    reference: np.ndarray  # (D, D) reference stiffness
    generator: GeneratorSpec
    periods: int
    tail_estimate: float

    @property
    def m(self) -> int:
        return self.matrix.m

    def apply_hat(self, tau_hat: np.ndarray) -> np.ndarray:
        """Multiply frequency-domain Mandel vectors by the per-class matrices."""
        if tau_hat.shape[0] != self.table.shape[0]:
            raise ShapeError("frequency field does not match the Green table")
        return np.einsum("hij,hj->hi", self.table, tau_hat)


def periodized_green(
    C0: np.ndarray,
    rule: CoefficientRule,
    M: PatternMatrix | None = None,
    periods: int | None = None,
) -> GreenTable:
    """Build the generator-weighted periodisation of the Green operator.

    ``rule`` must be orthonormalised.  ``periods`` bounds the class sums at
    |z|_inf <= periods; the default covers finitely supported rules exactly
    and uses 8 translates for space-compact (B-spline) generators, recording
    the resulting tail estimate on the table.
    """
    if M is None:
        M = rule.matrix
    elif M != rule.matrix:
        raise ShapeError("pattern matrix does not match the generator rule")
    if not rule.orthonormalized:
        raise DomainError("periodised Green operator requires an orthonormalised generator")
    _check_spd(C0, "reference stiffness")
    d = M.d
    if np.asarray(C0).shape != (mandel_dim(d), mandel_dim(d)):
        raise ShapeError("reference stiffness does not match the spatial dimension")
    if periods is None:
        periods = rule.support_periods if rule.support_periods is not None else 8
    freqs = frequency_set(M).freqs
    D = mandel_dim(d)
    acc = np.zeros((M.m, D, D))
    rng = range(-periods, periods + 1)
    shifts = np.stack(np.meshgrid(*([list(rng)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    for shift in shifts:
        ks = freqs + (shift @ M.array)[None, :]
        weights = np.abs(rule.coefficients(ks)) ** 2
        live = weights > 0.0
        if not np.any(live):
            continue
        acc[live] += green_coeff_batch(C0, ks[live], check=False) * weights[live, None, None]
    acc *= M.m
    acc[0] = 0.0  # class of h = 0 is always first in canonical order
    acc.setflags(write=False)
    return GreenTable(
        matrix=M,
        table=acc,
        reference=np.array(C0, dtype=np.float64),
        generator=rule.spec(),
        periods=int(periods),
        tail_estimate=rule.truncation_tail(int(periods)),
    )
