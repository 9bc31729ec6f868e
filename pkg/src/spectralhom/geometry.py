"""Microstructure definitions, stiffness sampling and reference data.

Microstructures are phase maps on the torus [-pi, pi)^d; stiffness fields
are obtained by evaluating the phase at every pattern node x = 2 pi y (or by
averaging the phase stiffness over a subsampled node cell).  Point-in-region
tests use the quadratic form of each ellipse with boundary points assigned
to the inner region, so lattice nodes are classified deterministically.

Reference solutions for error metrics come from two routes: the axis-aligned
two-phase laminate solved in closed form from the interface conditions, and
externally produced data ingested from disk.  Sampled reference strain
fields use the little-endian PFLD container:

    magic "PFLD" | uint32 version | uint32 d | int64 M (row-major) |
    uint32 component count D | uint32 domain flag (0 space, 1 frequency) |
    m * D float64 values in canonical pattern order

Effective-action references are JSON documents; ``load_reference_values``
accepts either a bare PFLD file or a JSON object pointing at one.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .elasticity import iso_stiffness, mandel_dim
from .errors import DomainError, GeometryError, IngestionError, ShapeError
from .lattice import PatternMatrix, pattern

__all__ = [
    "IsoPhase",
    "Laminate",
    "HashinEllipses",
    "Inclusion",
    "VoxelMap",
    "microstructure_from_json",
    "sample_stiffness",
    "ReferenceSolution",
    "laminate_reference",
    "load_reference_values",
    "write_field",
    "read_field",
]

_PFLD_MAGIC = b"PFLD"
_PFLD_VERSION = 1
DOMAIN_SPACE = 0
DOMAIN_FREQUENCY = 1


@dataclass(frozen=True)
class IsoPhase:
    """Isotropic phase described by its Lame parameters."""

    lam: float
    mu: float

    def stiffness(self, d: int) -> np.ndarray:
        return iso_stiffness(self.lam, self.mu, d)

    @classmethod
    def from_json(cls, doc) -> "IsoPhase":
        try:
            return cls(lam=float(doc["lambda"]), mu=float(doc["mu"]))
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"phase must provide 'lambda' and 'mu': {doc!r}") from exc


def _wrap_torus(x: np.ndarray) -> np.ndarray:
    """Reduce coordinates into [-pi, pi) componentwise."""
    return np.mod(x + np.pi, 2.0 * np.pi) - np.pi


def _unit_coords(x: np.ndarray) -> np.ndarray:
    """Torus coordinates mapped to [0, 1)^d."""
    return np.mod(x / (2.0 * np.pi) + 0.5, 1.0)


class Laminate:
    """Two-phase layering orthogonal to a coordinate axis."""

    def __init__(self, axis: int, fraction: float, phases):
        if not 0.0 <= fraction <= 1.0:
            raise GeometryError(f"layer fraction must lie in [0, 1], got {fraction}")
        if len(phases) != 2:
            raise GeometryError("a laminate needs exactly two phases")
        self.axis = int(axis)
        self.fraction = float(fraction)
        self.phases = tuple(phases)

    def phase_index(self, x: np.ndarray) -> np.ndarray:
        if self.axis >= x.shape[1]:
            raise GeometryError(f"laminate axis {self.axis} exceeds dimension {x.shape[1]}")
        t = _unit_coords(x)[:, self.axis]
        return np.where(t < self.fraction, 0, 1)


def _ellipse_quadric(semi_axes, rotation: float, d: int) -> np.ndarray:
    semi_axes = np.asarray(semi_axes, dtype=np.float64)
    if semi_axes.shape != (d,) or np.any(semi_axes <= 0.0):
        raise GeometryError(f"semi-axes must be {d} positive numbers, got {semi_axes!r}")
    Q = np.diag(1.0 / semi_axes**2)
    if rotation and d == 2:
        c, s = np.cos(rotation), np.sin(rotation)
        R = np.array([[c, -s], [s, c]])
        Q = R @ Q @ R.T
    elif rotation and d != 2:
        raise GeometryError("rotation is only supported for planar ellipses")
    return Q


class HashinEllipses:
    """Confocal core and coating ellipses embedded in a matrix phase."""

    def __init__(self, core_semi_axes, coating_semi_axes, center, rotation, core, coating, matrix):
        self.center = np.asarray(center, dtype=np.float64)
        d = self.center.shape[0]
        if d != 2:
            raise GeometryError("the confocal double inclusion is planar (d = 2)")
        a_c, b_c = (float(v) for v in core_semi_axes)
        a_e, b_e = (float(v) for v in coating_semi_axes)
        if not (a_e > a_c and b_e > b_c):
            raise GeometryError("coating ellipse must strictly contain the core ellipse")
        focal_c = a_c**2 - b_c**2
        focal_e = a_e**2 - b_e**2
        if abs(focal_e - focal_c) > 1e-9 * max(1.0, abs(focal_c)):
            raise GeometryError(
                f"ellipses are not confocal: a^2 - b^2 differs ({focal_c} vs {focal_e})"
            )
        self.rotation = float(rotation)
        self.core_q = _ellipse_quadric((a_c, b_c), self.rotation, d)
        self.coating_q = _ellipse_quadric((a_e, b_e), self.rotation, d)
        self.phases = (core, coating, matrix)

    def phase_index(self, x: np.ndarray) -> np.ndarray:
        rel = _wrap_torus(x - self.center[None, :])
        in_core = np.einsum("ni,ij,nj->n", rel, self.core_q, rel) <= 1.0
        in_coating = np.einsum("ni,ij,nj->n", rel, self.coating_q, rel) <= 1.0
        return np.where(in_core, 0, np.where(in_coating, 1, 2))


class Inclusion:
    """Single inclusion (ellipse/ellipsoid or axis-aligned box) in a matrix."""

    def __init__(self, shape: str, semi_axes, center, rotation, inclusion, matrix):
        self.shape = shape
        self.center = np.asarray(center, dtype=np.float64)
        d = self.center.shape[0]
        self.phases = (inclusion, matrix)
        if shape == "ellipse":
            self.quadric = _ellipse_quadric(semi_axes, rotation, d)
        elif shape == "box":
            half = np.asarray(semi_axes, dtype=np.float64)
            if half.shape != (d,) or np.any(half <= 0.0):
                raise GeometryError("box half-widths must be positive")
            self.half = half
        else:
            raise GeometryError(f"unknown inclusion shape {shape!r}")

    def phase_index(self, x: np.ndarray) -> np.ndarray:
        rel = _wrap_torus(x - self.center[None, :])
        if self.shape == "ellipse":
            inside = np.einsum("ni,ij,nj->n", rel, self.quadric, rel) <= 1.0
        else:
            inside = np.all(np.abs(rel) <= self.half[None, :], axis=1)
        return np.where(inside, 0, 1)


class VoxelMap:
    """Phase ids on a regular voxel grid covering the unit cell."""

    def __init__(self, grid, phase_table):
        self.grid = np.asarray(grid, dtype=np.int64)
        self.phases = tuple(phase_table)
        if self.grid.min() < 0 or self.grid.max() >= len(self.phases):
            raise GeometryError("voxel grid references a phase id outside the phase table")

    def phase_index(self, x: np.ndarray) -> np.ndarray:
        d = x.shape[1]
        if self.grid.ndim != d:
            raise GeometryError(f"voxel grid dimension {self.grid.ndim} does not match d = {d}")
        u = _unit_coords(x)
        idx = tuple(
            np.minimum((u[:, a] * self.grid.shape[a]).astype(np.int64), self.grid.shape[a] - 1)
            for a in range(d)
        )
        return self.grid[idx]


def microstructure_from_json(doc: dict):
    """Build a microstructure from its JSON description."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise GeometryError(f"microstructure must be an object with a 'kind': {doc!r}")
    kind = doc["kind"]
    if kind == "laminate":
        phases = [IsoPhase.from_json(p) for p in doc["phases"]]
        return Laminate(axis=doc.get("axis", 0), fraction=doc["fraction"], phases=phases)
    if kind == "hashin_ellipses":
        ph = doc["phases"]
        return HashinEllipses(
            core_semi_axes=doc["core_semi_axes"],
            coating_semi_axes=doc["coating_semi_axes"],
            center=doc.get("center", (0.0, 0.0)),
            rotation=doc.get("rotation", 0.0),
            core=IsoPhase.from_json(ph["core"]),
            coating=IsoPhase.from_json(ph["coating"]),
            matrix=IsoPhase.from_json(ph["matrix"]),
        )
    if kind == "inclusion":
        ph = doc["phases"]
        return Inclusion(
            shape=doc.get("shape", "ellipse"),
            semi_axes=doc["semi_axes"],
            center=doc.get("center", tuple(0.0 for _ in doc["semi_axes"])),
            rotation=doc.get("rotation", 0.0),
            inclusion=IsoPhase.from_json(ph["inclusion"]),
            matrix=IsoPhase.from_json(ph["matrix"]),
        )
    if kind == "voxel_map":
        return VoxelMap(doc["grid"], [IsoPhase.from_json(p) for p in doc["phase_table"]])
    raise GeometryError(f"unknown microstructure kind {kind!r}")


def _cell_offsets(M: PatternMatrix, subsamples: int) -> np.ndarray:
    """Subcell offsets (in torus coordinates) covering one node cell of M."""
    d = M.d
    steps = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    grid = np.stack(np.meshgrid(*([steps] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return 2.0 * np.pi * (grid @ np.linalg.inv(M.array.astype(float)).T)


def sample_stiffness(ms, M: PatternMatrix, mode: str = "node", subsamples: int = 3) -> np.ndarray:
    """Stiffness field (m, D, D) of a microstructure on the pattern of M.

    ``mode = "node"`` evaluates the phase at each node x = 2 pi y; ``mode =
    "cell_average"`` arithmetically averages the phase stiffness over an
    s^d subsampling of each node cell.
    """
    d = M.d
    D = mandel_dim(d)
    nodes = 2.0 * np.pi * pattern(M).points
    tables = np.stack([p.stiffness(d) for p in ms.phases])
    if mode == "node":
        return tables[ms.phase_index(nodes)]
    if mode != "cell_average":
        raise DomainError(f"unknown sampling mode {mode!r}")
    if subsamples < 1:
        raise DomainError("cell averaging needs at least one subsample per axis")
    acc = np.zeros((M.m, D, D))
    offsets = _cell_offsets(M, subsamples)
    for off in offsets:
        acc += tables[ms.phase_index(nodes + off[None, :])]
    return acc / len(offsets)


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    """Reference data for error metrics; at least one part is present."""

    strain: np.ndarray | None  # (m, D) fluctuation strain sampled on the pattern
    effective_action: np.ndarray | None  # (D,)
    note: str = ""


def _acoustic_matrix(phase: IsoPhase, normal: np.ndarray) -> np.ndarray:
    d = normal.shape[0]
    return phase.mu * np.eye(d) + (phase.lam + phase.mu) * np.outer(normal, normal)


def _mandel_rank_one(a: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Mandel vector of sym(a x n)."""
    d = n.shape[0]
    out = np.zeros(mandel_dim(d))
    for i in range(d):
        out[i] = a[i] * n[i]
    pairs = {2: ((0, 1),), 3: ((0, 1), (0, 2), (1, 2))}[d]
    for row, (i, j) in enumerate(pairs, start=d):
        out[row] = (a[i] * n[j] + a[j] * n[i]) / np.sqrt(2.0)
    return out


def laminate_reference(ms: Laminate, M: PatternMatrix, eps0) -> ReferenceSolution:
    """Closed-form two-phase laminate solution under a mean strain.

    The strain is constant per layer with a rank-one jump across the
    interface; the jump amplitude solves the d x d traction-continuity
    system, with tangential strain continuity and the prescribed mean built
    into the ansatz.  Axis-aligned normals and isotropic phases only.
    """
    d = M.d
    if d not in (2, 3):
        raise DomainError("laminate reference supports d in (2, 3)")
    eps0 = np.asarray(eps0, dtype=np.float64)
    if eps0.shape != (mandel_dim(d),):
        raise ShapeError("macroscopic strain does not match the spatial dimension")
    normal = np.zeros(d)
    normal[ms.axis] = 1.0
    theta = ms.fraction
    p0, p1 = ms.phases
    C0m = p0.stiffness(d)
    C1m = p1.stiffness(d)

    # traction continuity: [(1-theta) A_0 + theta A_1] a = -((C_0 - C_1) eps0) . n
    A = (1.0 - theta) * _acoustic_matrix(p0, normal) + theta * _acoustic_matrix(p1, normal)
    jump_stress = (C0m - C1m) @ eps0
    rhs = -_mandel_traction(jump_stress, normal)
    a = np.linalg.solve(A, rhs)
    eta = _mandel_rank_one(a, normal)
    strain0 = (1.0 - theta) * eta  # fluctuation in phase 0
    strain1 = -theta * eta
    effective = theta * (C0m @ (eps0 + strain0)) + (1.0 - theta) * (C1m @ (eps0 + strain1))

    nodes = 2.0 * np.pi * pattern(M).points
    which = ms.phase_index(nodes)
    field = np.where(which[:, None] == 0, strain0[None, :], strain1[None, :])
    return ReferenceSolution(
        strain=field,
        effective_action=effective,
        note=f"axis-{ms.axis} laminate, fraction {theta}",
    )


def _mandel_traction(stress: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Traction vector (stress tensor dotted with a unit normal)."""
    d = normal.shape[0]
    t = np.zeros(d)
    for i in range(d):
        t[i] += stress[i] * normal[i]
    pairs = {2: ((0, 1),), 3: ((0, 1), (0, 2), (1, 2))}[d]
    for row, (i, j) in enumerate(pairs, start=d):
        t[i] += stress[row] * normal[j] / np.sqrt(2.0)
        t[j] += stress[row] * normal[i] / np.sqrt(2.0)
    return t


# -- field container ---------------------------------------------------------


def write_field(path, M: PatternMatrix, values: np.ndarray, domain: int = DOMAIN_SPACE) -> None:
    """Write a pattern-indexed field in the PFLD binary container."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != M.m:
        raise ShapeError(f"field must have shape (m, D) with m = {M.m}, got {values.shape}")
    if domain not in (DOMAIN_SPACE, DOMAIN_FREQUENCY):
        raise DomainError(f"domain flag must be 0 or 1, got {domain}")
    d = M.d
    with open(path, "wb") as fh:
        fh.write(_PFLD_MAGIC)
        fh.write(struct.pack("<II", _PFLD_VERSION, d))
        fh.write(M.array.astype("<i8").tobytes())
        fh.write(struct.pack("<II", values.shape[1], domain))
        fh.write(values.astype("<f8").tobytes())


def read_field(path, expected: PatternMatrix | None = None):
    """Read a PFLD field; returns (PatternMatrix, values, domain)."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"field file {path} does not exist")
    raw = path.read_bytes()
    if raw[:4] != _PFLD_MAGIC:
        raise IngestionError(f"{path}: not a PFLD file")
    version, d = struct.unpack_from("<II", raw, 4)
    if version != _PFLD_VERSION:
        raise IngestionError(f"{path}: unsupported PFLD version {version}")
    off = 12
    rows = np.frombuffer(raw, dtype="<i8", count=d * d, offset=off).reshape(d, d)
    off += 8 * d * d
    ncomp, domain = struct.unpack_from("<II", raw, off)
    off += 8
    M = PatternMatrix.from_any(rows)
    values = np.frombuffer(raw, dtype="<f8", offset=off)
    if values.size != M.m * ncomp:
        raise IngestionError(f"{path}: payload has {values.size} values, expected {M.m * ncomp}")
    values = values.reshape(M.m, ncomp).copy()
    if expected is not None and M != expected:
        raise IngestionError(f"{path}: pattern matrix {M} does not match the expected {expected}")
    return M, values, int(domain)


def load_reference_values(path, M: PatternMatrix) -> ReferenceSolution:
    """Ingest reference data (sampled strain and/or effective action).

    ``path`` is either a PFLD strain field or a JSON object with optional
    keys "effective_action" (a Mandel vector) and "strain_field" (a path to
    a PFLD file, resolved relative to the JSON document).
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"reference file {path} does not exist")
    if path.suffix.lower() == ".pfld":
        _, values, domain = read_field(path, expected=M)
        if domain != DOMAIN_SPACE:
            raise IngestionError("reference strain fields must be in the space domain")
        _check_components(values, M)
        return ReferenceSolution(strain=values, effective_action=None, note=str(path))
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise IngestionError(f"{path}: expected a JSON object")
    strain = None
    action = None
    if "strain_field" in doc:
        _, strain, domain = read_field(path.parent / doc["strain_field"], expected=M)
        if domain != DOMAIN_SPACE:
            raise IngestionError("reference strain fields must be in the space domain")
        _check_components(strain, M)
    if "effective_action" in doc:
        action = np.asarray(doc["effective_action"], dtype=np.float64)
        if action.shape != (mandel_dim(M.d),):
            raise IngestionError(
                f"effective action must have {mandel_dim(M.d)} components, got {action.shape}"
            )
    if strain is None and action is None:
        raise IngestionError(f"{path}: reference provides neither a strain field nor an action")
    return ReferenceSolution(strain=strain, effective_action=action, note=doc.get("note", str(path)))


def _check_components(values: np.ndarray, M: PatternMatrix) -> None:
    if values.shape[1] != mandel_dim(M.d):
        raise IngestionError(
            f"field has {values.shape[1]} components, expected {mandel_dim(M.d)} for d = {M.d}"
        )
