"""Discrete cell-problem solvers on pattern-translation spaces.

Nodal unknowns are the fluctuation strain coefficients E, one Mandel vector
per pattern node, with the prescribed macroscopic strain eps0 carrying the
mean.  Two schemes are provided:

* ``ls_fixed_point`` iterates the Neumann series of the fixed-point form
  E <- -G((C - C0) : (E + eps0)), the classical basic scheme of Moulinec
  and Suquet generalised to an arbitrary periodised Green table.
* ``ve_krylov`` solves the projected form G(C : (E + eps0)) = 0 as a linear
  system.  After the substitution w = C^{1/2} E the operator
  w -> C^{1/2} G (C^{1/2} w) is Hermitian positive semidefinite, so a
  conjugate-gradient iteration applies; a minimal-residual solve takes over
  on the (round-off only) event of nonpositive curvature.  The constant
  reference factor C0 in front of the equation is invertible and is dropped
  from the solve; the reported residual retains it.

Coefficient fields are complex.  Generators whose coefficient magnitudes
are even in k (B-splines, trapezoids with positive slopes) and any pattern
with odd Smith factors give solutions that are real to round-off; the
half-open frequency cell of a Dirichlet-type rule on an even pattern is not
closed under conjugation, and there the exact discrete solution carries a
small imaginary component on the boundary (Nyquist) rows, reported as
``imbalance``.  Keeping it is what makes the fixed-point and projected
solutions coincide exactly on the Dirichlet space.

All norms are root-mean-square over nodes so tolerances are resolution
independent; reductions use numpy's fixed pairwise summation, making
repeated runs bit-identical.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .elasticity import GreenTable
from .errors import CapacityError, DomainError, ShapeError, SingularSystemError
from .pfft import plan as fft_plan

__all__ = [
    "SolverConfig",
    "SolveReport",
    "ErrorMetrics",
    "ls_fixed_point",
    "ve_krylov",
    "dense_oracle",
    "effective_stiffness",
    "error_metrics",
    "field_norm",
    "apply_stiffness",
]

_DENSE_LIMIT = 2048


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls and scheme selection."""

    tolerance: float = 1e-8
    max_iterations: int = 10000
    scheme: str = "ls_fixed_point"  # or "ve_krylov"
    reference: str = "phase_mean"  # reference-stiffness choice rule (used by the CLI)

    def __post_init__(self):
        if not self.tolerance > 0.0:
            raise DomainError("tolerance must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if self.scheme not in ("ls_fixed_point", "ve_krylov"):
            raise DomainError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Converged (or partial) state of one cell-problem solve."""

    strain: np.ndarray  # (m, D) complex fluctuation coefficients, space domain
    iterations: int
    residuals: tuple
    effective_action: np.ndarray  # (D,) real effective stiffness applied to eps0
    converged: bool
    scheme: str
    wall_time: float

    @property
    def imbalance(self) -> float:
        """Relative size of the imaginary (Nyquist) component of the strain."""
        scale = float(np.linalg.norm(self.strain))
        if scale == 0.0:
            return 0.0
        return float(np.linalg.norm(self.strain.imag) / scale)


@dataclass(frozen=True, eq=False)
class ErrorMetrics:
    """Relative field and effective-stiffness errors against a reference."""

    e_l2: float | None
    e_eff: float | None
    e_log: np.ndarray | None  # (m,) per-node logarithmic error field
    log_form: str


def field_norm(values: np.ndarray) -> float:
    """Root-mean-square norm over nodes (a constant field keeps its vector norm)."""
    values = np.asarray(values)
    return float(np.linalg.norm(values) / np.sqrt(values.shape[0]))


def apply_stiffness(C: np.ndarray, strain: np.ndarray) -> np.ndarray:
    """Pointwise stress C(y) : strain(y) over a pattern-indexed field."""
    return np.einsum("hij,hj->hi", C, strain)


def _green_convolve(G: GreenTable, tau: np.ndarray) -> np.ndarray:
    """Action of the periodised Green operator on a nodal field (complex)."""
    p = fft_plan(G.matrix)
    return p.ifft(G.apply_hat(p.fft(tau)))


def _validate_problem(C, C0, eps0, G: GreenTable):
    C = np.asarray(C, dtype=np.float64)
    C0 = np.asarray(C0, dtype=np.float64)
    eps0 = np.asarray(eps0, dtype=np.float64)
    m = G.m
    D = G.table.shape[1]
    if C.shape != (m, D, D):
        raise ShapeError(f"stiffness field must have shape {(m, D, D)}, got {C.shape}")
    if C0.shape != (D, D):
        raise ShapeError(f"reference stiffness must have shape {(D, D)}, got {C0.shape}")
    if eps0.shape != (D,):
        raise ShapeError(f"macroscopic strain must have shape {(D,)}, got {eps0.shape}")
    return C, C0, eps0


def effective_stiffness(C: np.ndarray, strain: np.ndarray, eps0: np.ndarray) -> np.ndarray:
    """Equal-weight cell average of C : (total strain) under loading eps0.

    Accepts complex strain coefficients; the returned action is the real
    part (the response of a real material to a real mean strain; any
    imaginary content is a Nyquist artifact that averages out to round-off).
    """
    C = np.asarray(C, dtype=np.float64)
    strain = np.asarray(strain)
    eps0 = np.asarray(eps0, dtype=np.float64)
    if strain.shape != C.shape[:2]:
        raise ShapeError("strain field does not match the stiffness field")
    action = apply_stiffness(C, strain + eps0[None, :]).mean(axis=0)
    return np.real(action)


def ls_fixed_point(C, C0, eps0, G: GreenTable, cfg: SolverConfig | None = None) -> SolveReport:
    """Fixed-point (Neumann series) solve of the nodal cell problem.

    Iterates E <- -G((C - C0) : (E + eps0)) from E = 0 and stops when the
    relative nodal residual ||E + G((C - C0)(E + eps0))|| / ||eps0|| drops
    below the tolerance.  On non-convergence the partial field is returned
    with the flag cleared.
    """
    cfg = cfg or SolverConfig()
    C, C0, eps0 = _validate_problem(C, C0, eps0, G)
    start = time.perf_counter()
    dC = C - C0[None, :, :]
    scale = float(np.linalg.norm(eps0))
    E = np.zeros(C.shape[:2], dtype=np.complex128)
    residuals: list[float] = []
    converged = False
    iterations = 0
    if scale == 0.0:
        converged = True
        residuals.append(0.0)
    else:
        for iterations in range(1, cfg.max_iterations + 1):
            E_next = -_green_convolve(G, apply_stiffness(dC, E + eps0[None, :]))
            r = field_norm(E - E_next) / scale
            residuals.append(r)
            E = E_next
            if r <= cfg.tolerance:
                converged = True
                break
    return SolveReport(
        strain=E,
        iterations=iterations,
        residuals=tuple(residuals),
        effective_action=effective_stiffness(C, E, eps0),
        converged=converged,
        scheme="ls_fixed_point",
        wall_time=time.perf_counter() - start,
    )


def _stiffness_square_roots(C: np.ndarray):
    w, v = np.linalg.eigh(C)
    if w.min() <= 0.0:
        raise DomainError("stiffness field is not uniformly elliptic")
    W = np.einsum("hij,hj,hkj->hik", v, np.sqrt(w), v)
    Winv = np.einsum("hij,hj,hkj->hik", v, 1.0 / np.sqrt(w), v)
    return W, Winv


def ve_krylov(C, C0, eps0, G: GreenTable, cfg: SolverConfig | None = None) -> SolveReport:
    """Krylov solve of the projected nodal equation C0 G (C : (E + eps0)) = 0.

    Solves the Hermitian PSD system C^{1/2} G C^{1/2} w = -C^{1/2} G (C eps0)
    with conjugate gradients; the reported residual is the projected one,
    ||C0 G C (E + eps0)|| / ||C0 G C eps0||.
    """
    cfg = cfg or SolverConfig()
    C, C0, eps0 = _validate_problem(C, C0, eps0, G)
    start = time.perf_counter()
    W, Winv = _stiffness_square_roots(C)

    def operator(w_vec: np.ndarray) -> np.ndarray:
        return apply_stiffness(W, _green_convolve(G, apply_stiffness(W, w_vec)))

    def projected_norm(r_vec: np.ndarray) -> float:
        # nodal VE residual carries the constant reference factor
        return field_norm(apply_stiffness(Winv, r_vec) @ C0.T)

    eps0_field = np.tile(eps0.astype(np.complex128), (G.m, 1))
    b = -apply_stiffness(W, _green_convolve(G, apply_stiffness(C, eps0_field)))
    rho0 = projected_norm(b)
    residuals: list[float] = []
    x = np.zeros_like(b)
    converged = False
    iterations = 0
    if rho0 == 0.0:
        converged = True
        residuals.append(0.0)
    else:
        r = b.copy()
        p = r.copy()
        rs = float(np.vdot(r, r).real)
        for iterations in range(1, cfg.max_iterations + 1):
            Lp = operator(p)
            curvature = float(np.vdot(p, Lp).real)
            if curvature <= 0.0:
                x, _ = _minres_fallback(operator, b, x, cfg)
                r = b - operator(x)
                residuals.append(projected_norm(r) / rho0)
                converged = residuals[-1] <= cfg.tolerance
                break
            alpha = rs / curvature
            x = x + alpha * p
            r = r - alpha * Lp
            rho = projected_norm(r) / rho0
            residuals.append(rho)
            if rho <= cfg.tolerance:
                converged = True
                break
            rs_next = float(np.vdot(r, r).real)
            p = r + (rs_next / rs) * p
            rs = rs_next
    strain = apply_stiffness(Winv, x)
    return SolveReport(
        strain=strain,
        iterations=iterations,
        residuals=tuple(residuals),
        effective_action=effective_stiffness(C, strain, eps0),
        converged=converged,
        scheme="ve_krylov",
        wall_time=time.perf_counter() - start,
    )


def _minres_fallback(operator, b, x0, cfg: SolverConfig):
    """Minimal-residual rescue for (round-off) loss of positive curvature.

    scipy's minres is real-symmetric; the Hermitian operator is lifted to
    the equivalent real system on stacked real/imaginary parts.
    """
    from scipy.sparse.linalg import LinearOperator, minres

    shape = b.shape

    def matvec(vec):
        half = vec.size // 2
        w = (vec[:half] + 1j * vec[half:]).reshape(shape)
        out = operator(w).ravel()
        return np.concatenate([out.real, out.imag])

    n = 2 * b.size
    A = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    rhs = np.concatenate([b.ravel().real, b.ravel().imag])
    start = np.concatenate([x0.ravel().real, x0.ravel().imag])
    sol, info = minres(A, rhs, x0=start, rtol=cfg.tolerance * 1e-2, maxiter=cfg.max_iterations)
    half = sol.size // 2
    return (sol[:half] + 1j * sol[half:]).reshape(shape), info == 0


def dense_oracle(C, C0, eps0, G: GreenTable) -> np.ndarray:
    """Direct dense solve of the fixed-point equations on small instances.

    Assembles the (m D) x (m D) matrix of E -> E + G((C - C0) : E) column by
    column, solves against -G((C - C0) : eps0), and returns the fluctuation
    strain.  Guarded to m D <= 2048.
    """
    C, C0, eps0 = _validate_problem(C, C0, eps0, G)
    m = G.m
    D = C.shape[1]
    n = m * D
    if n > _DENSE_LIMIT:
        raise CapacityError(f"dense oracle limited to m*D <= {_DENSE_LIMIT}, got {n}")
    dC = C - C0[None, :, :]
    eps0_field = np.tile(eps0.astype(np.complex128), (m, 1))
    const = _green_convolve(G, apply_stiffness(dC, eps0_field))
    A = np.empty((n, n), dtype=np.complex128)
    basis = np.zeros((m, D), dtype=np.complex128)
    for i in range(n):
        basis.reshape(-1)[i] = 1.0
        A[:, i] = (basis + _green_convolve(G, apply_stiffness(dC, basis))).reshape(-1)
        basis.reshape(-1)[i] = 0.0
    try:
        solution = np.linalg.solve(A, -const.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"dense system is singular (condition estimate {np.linalg.cond(A):.3e})"
        ) from exc
    residual = np.linalg.norm(A @ solution + const.reshape(-1))
    if not np.isfinite(residual) or residual > 1e-6 * max(1.0, float(np.linalg.norm(const))):
        raise SingularSystemError(
            f"dense solve unreliable (condition estimate {np.linalg.cond(A):.3e})"
        )
    return solution.reshape(m, D)


def error_metrics(
    strain,
    ref_strain=None,
    effective_action=None,
    ref_effective_action=None,
    log_form: str = "difference",
) -> ErrorMetrics:
    """Relative errors of a solution against reference data.

    e_l2 compares strain fields over all nodes and Mandel components; e_eff
    compares effective-stiffness actions; e_log is the per-node logarithmic
    deviation log(1 + |e - e_ref|).  ``log_form = "sum"`` switches the last
    to log(1 + |e + e_ref|) for compatibility with that printed convention.
    Complex strain coefficients are compared in full.
    """
    if log_form not in ("difference", "sum"):
        raise DomainError(f"unknown log-error form {log_form!r}")
    e_l2 = None
    e_log = None
    if ref_strain is not None:
        strain = np.asarray(strain)
        ref_strain = np.asarray(ref_strain)
        if strain.shape != ref_strain.shape:
            raise ShapeError("strain fields have mismatched shapes")
        e_l2 = float(np.linalg.norm(strain - ref_strain) / np.linalg.norm(ref_strain))
        mixed = strain - ref_strain if log_form == "difference" else strain + ref_strain
        e_log = np.log1p(np.linalg.norm(mixed, axis=1))
    e_eff = None
    if ref_effective_action is not None:
        if effective_action is None:
            raise ShapeError("effective action required to compare against its reference")
        effective_action = np.asarray(effective_action, dtype=np.float64)
        ref_effective_action = np.asarray(ref_effective_action, dtype=np.float64)
        if effective_action.shape != ref_effective_action.shape:
            raise ShapeError("effective actions have mismatched shapes")
        e_eff = float(
            np.linalg.norm(effective_action - ref_effective_action)
            / np.linalg.norm(ref_effective_action)
        )
    return ErrorMetrics(e_l2=e_l2, e_eff=e_eff, e_log=e_log, log_form=log_form)
