"""Generators of pattern-translation-invariant spaces.

A generator f is represented by the rule k -> c_k(f) for its Fourier
coefficients on integer frequencies.  Three families are provided:

* ``dirichlet``  -- indicator of the dual generating set G(M^T); spans the
  truncated-Fourier space of classical FFT homogenization.
* ``dlvp``       -- de la Vallee Poussin means: a tensor product of centred
  trapezoids with plateau 1 - alpha_j and support width 1 + alpha_j in the
  scaled frequency M^{-T} k.  alpha = 0 degenerates to the Dirichlet rule.
* ``bspline``    -- tensor-product cardinal B-spline of order p on the unit
  cell M^{-1} [-1/2, 1/2)^d, i.e. c_k = m^{-1/2} prod_j sinc^p(pi (M^{-T}k)_j).

Scaled frequencies are handled as exact integer numerators over det(M), so
support and boundary decisions never depend on floating-point rounding.
The cell [-1/2, 1/2)^d is half open toward -1/2: the Dirichlet rule and the
degenerate (alpha_j = 0) trapezoid factor count a boundary frequency once,
on the -1/2 side, so the alpha -> 0 limit of the trapezoid family is the
Dirichlet rule itself.  For alpha_j > 0 the trapezoid is the continuous one
and carries the value 1/2 at |xi_j| = 1/2, sharing the weight of a boundary
frequency with its congruent mirror.

Bracket sums (sums over a congruence class k + M^T Z^d) are evaluated
exactly: the Dirichlet and trapezoid rules have finite support, and for the
B-spline rules the tensor structure collapses each class sum into a finite
cosine polynomial whose weights are integer samples of a higher-order
cardinal B-spline.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DegenerateGeneratorError, DomainError, ShapeError
from .lattice import PatternMatrix, frequency_set
from .pfft import plan as fft_plan

__all__ = [
    "GeneratorSpec",
    "CoefficientRule",
    "dirichlet_rule",
    "dlvp_rule",
    "bspline_rule",
    "make_rule",
    "bracket_sum",
    "orthonormalize",
    "fundamental_interpolant",
    "synthesize",
    "nodal_synthesis",
]


@dataclass(frozen=True)
class GeneratorSpec:
    """Parsed description of a generator choice."""

    kind: str  # "dirichlet" | "dlvp" | "bspline"
    alpha: tuple | None = None
    order: int | None = None

    @classmethod
    def from_json(cls, doc) -> "GeneratorSpec":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise DomainError(f"generator spec must be an object with a 'kind': {doc!r}")
        kind = doc["kind"]
        if kind == "dirichlet":
            return cls(kind="dirichlet")
        if kind == "dlvp":
            alpha = tuple(float(a) for a in doc.get("alpha", ()))
            return cls(kind="dlvp", alpha=alpha)
        if kind == "bspline":
            return cls(kind="bspline", order=int(doc.get("order", 1)))
        raise DomainError(f"unknown generator kind {kind!r}")

    def to_json(self) -> dict:
        if self.kind == "dirichlet":
            return {"kind": "dirichlet"}
        if self.kind == "dlvp":
            return {"kind": "dlvp", "alpha": list(self.alpha)}
        return {"kind": "bspline", "order": self.order}


def _cardinal_bspline(order: int, x: Fraction) -> Fraction:
    """Cardinal B-spline N_order on [0, order], exact at rational arguments."""
    if order == 1:
        return Fraction(1) if 0 <= x < 1 else Fraction(0)
    if x <= 0 or x >= order:
        return Fraction(0)
    n = order
    return (x * _cardinal_bspline(n - 1, x) + (n - x) * _cardinal_bspline(n - 1, x - 1)) / (n - 1)


@lru_cache(maxsize=32)
def _centred_bspline_samples(order: int) -> tuple:
    """Integer samples of the centred cardinal B-spline of the given order.

    Returns (b_0, b_1, ..., b_r) with b_j the value at +-j; by Poisson
    summation sum_t sinc^order(pi (xi + t)) = b_0 + 2 sum_j b_j cos(2 pi j xi).
    """
    half = Fraction(order, 2)
    vals = []
    for j in range(order // 2 + 1):
        vals.append(float(_cardinal_bspline(order, Fraction(j) + half)))
    while len(vals) > 1 and vals[-1] == 0.0:
        vals.pop()
    return tuple(vals)


def _sampled_autocos(order: int, xi: np.ndarray) -> np.ndarray:
    """sum_t sinc^order(pi (xi + t)) evaluated through the finite cosine form."""
    b = _centred_bspline_samples(order)
    out = np.full(xi.shape, b[0])
    for j in range(1, len(b)):
        out += 2.0 * b[j] * np.cos(2.0 * np.pi * j * xi)
    return out


def _trapezoid(nums: np.ndarray, den: int, alpha: float) -> np.ndarray:
    """Centred trapezoid factor at xi = nums/den.

    For alpha = 0 the factor degenerates to the half-open cell indicator
    (exactly the Dirichlet factor); for alpha > 0 it is the continuous
    trapezoid, which carries the value 1/2 at the cell boundary |xi| = 1/2,
    splitting the weight of a boundary frequency with its congruent mirror.
    """
    out = np.zeros(nums.shape)
    if alpha == 0.0:
        inside = (2 * nums >= -den) & (2 * nums < den)
        out[inside] = 1.0
        return out
    xi = np.abs(nums / den)
    plateau = xi <= (1.0 - alpha) / 2.0
    ramp = ~plateau & (xi < (1.0 + alpha) / 2.0)
    out[plateau] = 1.0
    out[ramp] = ((1.0 + alpha) / 2.0 - xi[ramp]) / alpha
    return out


class CoefficientRule:
    """Fourier-coefficient rule of a generator, optionally orthonormalised.

    Orthonormalisation stores one positive scale per congruence class; the
    effective coefficients are c_k / scale(class of k).  Instances are
    immutable and safe to share.
    """

    def __init__(self, M: PatternMatrix, kind: str, alpha=None, order=None, class_scale=None):
        self.matrix = M
        self.kind = kind
        self.alpha = None if alpha is None else tuple(float(a) for a in alpha)
        self.order = None if order is None else int(order)
        self._freqs = frequency_set(M)
        if class_scale is not None:
            class_scale = np.asarray(class_scale, dtype=np.float64)
            if class_scale.shape != (M.m,):
                raise ShapeError("class scale table must have one entry per frequency class")
            class_scale.setflags(write=False)
        self._class_scale = class_scale
        adj = np.array(M.adjugate, dtype=np.int64)
        den = M.det
        if den < 0:
            adj, den = -adj, -den
        self._adj = adj
        self._den = int(den)

    # -- basic properties ---------------------------------------------------

    @property
    def m(self) -> int:
        return self.matrix.m

    @property
    def orthonormalized(self) -> bool:
        return self._class_scale is not None

    @property
    def class_scale(self):
        return self._class_scale

    @property
    def support_periods(self):
        """Translates of M^T Z^d covering the support; None if unbounded."""
        if self.kind == "dirichlet":
            return 0
        if self.kind == "dlvp":
            return 1
        return None

    def spec(self) -> GeneratorSpec:
        return GeneratorSpec(kind=self.kind, alpha=self.alpha, order=self.order)

    # -- evaluation ----------------------------------------------------------

    def _scaled_nums(self, k: np.ndarray) -> np.ndarray:
        """Integer numerators of M^{-T} k over the positive denominator."""
        return k @ self._adj

    def _raw(self, k: np.ndarray) -> np.ndarray:
        nums = self._scaled_nums(k)
        den = self._den
        if self.kind == "dirichlet":
            inside = np.all((2 * nums >= -den) & (2 * nums < den), axis=1)
            return inside.astype(np.float64)
        if self.kind == "dlvp":
            out = np.ones(k.shape[0])
            for axis, a in enumerate(self.alpha):
                out *= _trapezoid(nums[:, axis], den, a)
            return out / np.sqrt(self.m)
        xi = nums / den
        return np.prod(np.sinc(xi) ** self.order, axis=1) / np.sqrt(self.m)

    def coefficients(self, k) -> np.ndarray:
        """c_k for one integer vector or an (n, d) batch of them."""
        arr = np.asarray(k, dtype=np.int64)
        single = arr.ndim == 1
        kk = np.atleast_2d(arr)
        if kk.shape[1] != self.matrix.d:
            raise ShapeError(f"expected frequency vectors of length {self.matrix.d}")
        vals = self._raw(kk)
        if self._class_scale is not None:
            vals = vals / self._class_scale[self._freqs.class_index(kk)]
        return vals[0] if single else vals

    # -- exact class sums ----------------------------------------------------

    def _raw_class_sum(self, power: int) -> np.ndarray:
        """[c^power] over every congruence class, for the unscaled rule."""
        nums = self._scaled_nums(self._freqs.freqs)
        den = self._den
        if self.kind == "bspline":
            per_axis = _sampled_autocos(power * self.order, nums / den)
            return np.prod(per_axis, axis=1) / self.m ** (power / 2.0)
        acc = np.zeros(self.m)
        periods = self.support_periods
        rng = range(-periods, periods + 1)
        z = np.stack(np.meshgrid(*([list(rng)] * self.matrix.d), indexing="ij"), axis=-1)
        for shift in z.reshape(-1, self.matrix.d):
            ks = self._freqs.freqs + (shift @ self.matrix.array)[None, :]
            acc += self._raw(ks) ** power
        return acc

    def gram_bracket(self) -> np.ndarray:
        """m [|c|^2] per frequency class (1.0 everywhere iff orthonormal)."""
        vals = self.m * self._raw_class_sum(2)
        if self._class_scale is not None:
            vals = vals / self._class_scale**2
        return vals

    def coeff_bracket(self) -> np.ndarray:
        """[c] per frequency class (the interpolation denominators)."""
        vals = self._raw_class_sum(1)
        if self._class_scale is not None:
            vals = vals / self._class_scale
        return vals

    def truncation_tail(self, periods: int) -> float:
        """Bound on the |c|^2 mass outside |z|_inf <= periods translates."""
        sp = self.support_periods
        if sp is not None:
            if periods < sp:
                raise DomainError(f"truncation below the rule's support ({sp} periods)")
            return 0.0
        if periods < 1:
            raise DomainError("B-spline class sums need at least one period")
        p2 = 2 * self.order
        t = np.arange(1, periods + 1)
        inner = 1.0 + 2.0 * np.sum((np.pi * (t - 0.5)) ** (-p2))
        tail_1d = 2.0 / (np.pi**p2 * (p2 - 1) * (periods - 0.5) ** (p2 - 1))
        d = self.matrix.d
        return float(((inner + tail_1d) ** d - inner**d) / self.m)


def dirichlet_rule(M: PatternMatrix) -> CoefficientRule:
    """Indicator rule of the dual generating set (c_k = 1 on G(M^T))."""
    return CoefficientRule(M, "dirichlet")


def dlvp_rule(M: PatternMatrix, alpha) -> CoefficientRule:
    """De la Vallee Poussin rule with per-axis slopes alpha in [0, 1]."""
    alpha = tuple(float(a) for a in np.atleast_1d(alpha))
    if len(alpha) != M.d:
        raise DomainError(f"alpha must have {M.d} components, got {alpha!r}")
    if any(a < 0.0 or a > 1.0 for a in alpha):
        raise DomainError(f"alpha components must lie in [0, 1], got {alpha!r}")
    return CoefficientRule(M, "dlvp", alpha=alpha)


def bspline_rule(M: PatternMatrix, order: int) -> CoefficientRule:
    """Tensor-product cardinal B-spline rule of the given order (>= 1)."""
    if int(order) < 1:
        raise DomainError(f"B-spline order must be >= 1, got {order!r}")
    return CoefficientRule(M, "bspline", order=int(order))


def make_rule(spec: GeneratorSpec, M: PatternMatrix) -> CoefficientRule:
    if spec.kind == "dirichlet":
        return dirichlet_rule(M)
    if spec.kind == "dlvp":
        return dlvp_rule(M, spec.alpha)
    return bspline_rule(M, spec.order)


def bracket_sum(values, M: PatternMatrix, h, periods: int):
    """Truncated class sum sum_{|z|_inf <= periods} a(h + M^T z).

    ``values`` maps an (n, d) integer array to n sequence values.  Exact
    whenever the sequence is supported within ``periods`` translates.
    """
    if periods < 0:
        raise DomainError("truncation radius must be >= 0")
    h = np.asarray(h, dtype=np.int64).reshape(1, -1)
    rng = range(-periods, periods + 1)
    z = np.stack(np.meshgrid(*([list(rng)] * M.d), indexing="ij"), axis=-1).reshape(-1, M.d)
    ks = h + z @ M.array
    return complex(np.sum(values(ks)))


def orthonormalize(rule: CoefficientRule) -> CoefficientRule:
    """Rescale a rule so its translates become an orthonormal basis.

    Divides c_k by sqrt(m [|c|^2]) of its class; idempotent.  Raises when a
    class sum vanishes, naming the offending frequency.
    """
    gram = rule.gram_bracket()
    worst = int(np.argmin(gram))
    if gram[worst] <= 1e-300:
        h = rule._freqs.freqs[worst]
        raise DegenerateGeneratorError(
            f"generator does not span the translate space: class sum vanishes at h = {h.tolist()}"
        )
    scale = np.sqrt(gram)
    if rule.class_scale is not None:
        scale = scale * rule.class_scale
    return CoefficientRule(
        rule.matrix, rule.kind, alpha=rule.alpha, order=rule.order, class_scale=scale
    )


def fundamental_interpolant(rule: CoefficientRule) -> np.ndarray:
    """Frequency coefficients of the cardinal interpolant of the rule's space.

    The returned a_hat solve the nodal interpolation problem: synthesising
    sum_h a_hat_h [c]_h e^{i h^T x} gives 1 at the origin node and 0 at every
    other pattern node.
    """
    brackets = rule.coeff_bracket()
    worst = int(np.argmin(np.abs(brackets)))
    if abs(brackets[worst]) < 1e-14:
        h = rule._freqs.freqs[worst]
        raise DegenerateGeneratorError(
            f"interpolation is degenerate: coefficient class sum vanishes at h = {h.tolist()}"
        )
    return 1.0 / (rule.m * brackets)


def synthesize(rule: CoefficientRule, ahat: np.ndarray, x, periods=None):
    """Evaluate g(x) = sum_h sum_z ahat_h c_{h + M^T z} exp(i (h + M^T z)^T x).

    ``x`` is a point (or array of points) on the torus [-pi, pi)^d.  The
    period sum is truncated at |z|_inf <= periods; exact when the rule's
    support fits (the default covers finitely supported rules).
    """
    M = rule.matrix
    ahat = np.asarray(ahat)
    if ahat.shape != (M.m,):
        raise ShapeError(f"expected {M.m} frequency coefficients, got {ahat.shape}")
    if periods is None:
        periods = rule.support_periods
        if periods is None:
            periods = 8
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    freqs = rule._freqs.freqs
    rng = range(-periods, periods + 1)
    z = np.stack(np.meshgrid(*([list(rng)] * M.d), indexing="ij"), axis=-1).reshape(-1, M.d)
    out = np.zeros(pts.shape[0], dtype=np.complex128)
    for shift in z:
        ks = freqs + (shift @ M.array)[None, :]
        weights = ahat * rule.coefficients(ks)
        out += np.exp(1j * (pts @ ks.T)) @ weights
    return out[0] if single else out


def nodal_synthesis(rule: CoefficientRule, ahat: np.ndarray) -> np.ndarray:
    """Values of the synthesised function at all pattern nodes x = 2 pi y.

    Uses the class-sum identity: at nodes every translate in a congruence
    class carries the same character value, so the period sum collapses to
    the coefficient bracket and one inverse transform.
    """
    M = rule.matrix
    ahat = np.asarray(ahat)
    if ahat.shape != (M.m,):
        raise ShapeError(f"expected {M.m} frequency coefficients, got {ahat.shape}")
    return fft_plan(M).ifft(ahat * rule.coeff_bracket()) * np.sqrt(M.m)
