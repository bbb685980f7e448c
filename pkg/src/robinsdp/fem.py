"""P1 finite-element forward solver for the Robin transmission problem.

The model domain is the unit disk with a closed interface curve strictly
inside it. The potential is harmonic away from the interface, has a
prescribed Neumann current on the outer boundary, is continuous across the
interface, and its normal-derivative jump across the interface equals the
(piecewise-constant) transmission coefficient times the potential.

Weak form, for a trial/test space V subset H^1:

    a(u, v) = integral grad u . grad v dx
              + sum_j  coeff_j * integral_{arc j} u v ds
            = integral_{outer boundary} g v ds.

Discretizing with P1 elements on an interface-conforming triangulation
gives the matrix system A(coeff) = K0 + sum_j coeff_j M_j, and the
measurement matrix (currents tested against measured boundary voltages)

    measurements(coeff) = B^T A(coeff)^{-1} B,

whose directional derivative in a coefficient direction d is the exact
resolvent derivative -W^T (sum_j d_j M_j) W with W = A^{-1} B. Because
A is affine in the coefficients and each M_j is positive semidefinite,
the discrete measurement map is monotonically non-increasing and convex
in the Loewner order, exactly, not just up to discretization error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .symmat import SymMatrix
from .validation import as_coefficient_vector, as_direction_vector

__all__ = [
    "MeshError",
    "Geometry",
    "Mesh",
    "DiscreteForwardMap",
    "build_disk_geometry",
    "triangulate",
    "assemble",
    "boundary_current",
    "mesh_to_text",
]

# Relative residual enforced on the multi-right-hand-side solves.
SOLVE_RTOL = 1e-12

# 3-point Gauss-Legendre rule on [0, 1]; exact through degree 5.
_GAUSS_T = np.array([0.5 - 0.5 * math.sqrt(3.0 / 5.0), 0.5, 0.5 + 0.5 * math.sqrt(3.0 / 5.0)])
_GAUSS_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


class MeshError(RuntimeError):
    """Raised when mesh generation or assembly cannot produce a valid mesh."""


@dataclass(frozen=True, eq=False)
class Geometry:
    """Polygonal description of the domain: outer boundary, interface, arcs.

    ``outer_boundary`` and ``interface`` are closed polygons given as
    (k, 2) vertex arrays in counterclockwise order (the closing edge from
    the last vertex back to the first is implicit). ``arc_ranges`` assigns
    interface segments to arcs: entry j is a half-open segment index range
    [start, stop) and the ranges must be disjoint and cover every segment.

    ``interface_radius`` is set for concentric-disk geometries produced by
    :func:`build_disk_geometry`; the structured mesher requires it. The
    region between interface and outer boundary is assumed connected.
    """

    outer_boundary: np.ndarray
    interface: np.ndarray
    arc_ranges: tuple[tuple[int, int], ...]
    interface_radius: float | None = None

    def __post_init__(self) -> None:
        outer = np.array(self.outer_boundary, dtype=float)
        inner = np.array(self.interface, dtype=float)
        for name, poly in (("outer_boundary", outer), ("interface", inner)):
            if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
                raise ValueError(f"{name} must be a (k, 2) polygon with k >= 3")
        n_seg = inner.shape[0]
        ranges = tuple((int(s), int(e)) for s, e in self.arc_ranges)
        if len(ranges) < 2:
            raise ValueError("at least two interface arcs are required")
        covered = np.zeros(n_seg, dtype=int)
        for start, stop in ranges:
            if not 0 <= start < stop <= n_seg:
                raise ValueError(f"arc range ({start}, {stop}) out of bounds")
            covered[start:stop] += 1
        if np.any(covered != 1):
            raise ValueError("arc ranges must partition the interface segments")
        if not np.all(_points_strictly_inside(outer, inner)):
            raise ValueError("interface must lie strictly inside the outer boundary")
        outer.setflags(write=False)
        inner.setflags(write=False)
        object.__setattr__(self, "outer_boundary", outer)
        object.__setattr__(self, "interface", inner)
        object.__setattr__(self, "arc_ranges", ranges)

    @property
    def n_arcs(self) -> int:
        return len(self.arc_ranges)

    def segment_arcs(self) -> np.ndarray:
        """Arc index of every interface segment."""
        arcs = np.empty(self.interface.shape[0], dtype=int)
        for j, (start, stop) in enumerate(self.arc_ranges):
            arcs[start:stop] = j
        return arcs


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with tagged interface and boundary edges.

    ``interface_edges`` rows are (v0, v1, arc index); ``boundary_edges``
    rows are (v0, v1) in counterclockwise order along the outer boundary.
    All triangles are counterclockwise (positive area).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    interface_edges: np.ndarray
    boundary_edges: np.ndarray

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]


def build_disk_geometry(n_arcs: int, radius_interface: float, segments_per_arc: int) -> Geometry:
    """Unit-disk geometry with a concentric circular interface.

    The interface circle is split into ``n_arcs`` equal arcs in
    counterclockwise order starting at angle 0, each discretized by
    ``segments_per_arc`` straight segments.
    """
    if not isinstance(n_arcs, (int, np.integer)) or n_arcs < 2:
        raise ValueError(f"n_arcs must be an integer >= 2, got {n_arcs!r}")
    if not 0.0 < radius_interface < 1.0:
        raise ValueError(f"radius_interface must lie in (0, 1), got {radius_interface!r}")
    if not isinstance(segments_per_arc, (int, np.integer)) or segments_per_arc < 2:
        raise ValueError(f"segments_per_arc must be an integer >= 2, got {segments_per_arc!r}")

    n_seg = int(n_arcs) * int(segments_per_arc)
    theta = 2.0 * np.pi * np.arange(n_seg) / n_seg
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    arcs = tuple(
        (j * segments_per_arc, (j + 1) * segments_per_arc) for j in range(int(n_arcs))
    )
    return Geometry(
        outer_boundary=ring,
        interface=float(radius_interface) * ring,
        arc_ranges=arcs,
        interface_radius=float(radius_interface),
    )


def triangulate(geometry: Geometry, mesh_size: float) -> Mesh:
    """Structured polar-grid triangulation of a concentric-disk geometry.

    Vertex rings are placed at equispaced radii inside and outside the
    interface circle so that the interface is resolved exactly by mesh
    edges; the angular count is a multiple of the number of interface
    segments so that every interface edge belongs to exactly one arc.
    """
    if mesh_size <= 0:
        raise ValueError(f"mesh_size must be positive, got {mesh_size!r}")
    radius = geometry.interface_radius
    if radius is None:
        raise MeshError(
            "the structured mesher supports concentric-disk geometries only "
            "(interface_radius metadata missing)"
        )

    n_seg = geometry.interface.shape[0]
    n_theta = n_seg * max(1, math.ceil(2.0 * np.pi / (mesh_size * n_seg)))
    rings_in = max(1, math.ceil(radius / mesh_size))
    rings_out = max(1, math.ceil((1.0 - radius) / mesh_size))
    radii = np.concatenate(
        [
            np.linspace(0.0, radius, rings_in + 1)[1:],
            np.linspace(radius, 1.0, rings_out + 1)[1:],
        ]
    )
    n_rings = radii.shape[0]

    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    vertices = np.empty((1 + n_rings * n_theta, 2))
    vertices[0] = 0.0
    for i, r in enumerate(radii):
        block = 1 + i * n_theta
        vertices[block : block + n_theta, 0] = r * cos_t
        vertices[block : block + n_theta, 1] = r * sin_t

    def ring_ids(i: int) -> np.ndarray:
        return 1 + i * n_theta + np.arange(n_theta)

    ks = np.arange(n_theta)
    knext = (ks + 1) % n_theta
    tris = [np.column_stack([np.zeros(n_theta, dtype=int), ring_ids(0)[ks], ring_ids(0)[knext]])]
    for i in range(n_rings - 1):
        lo, hi = ring_ids(i), ring_ids(i + 1)
        tris.append(np.column_stack([lo[ks], hi[ks], hi[knext]]))
        tris.append(np.column_stack([lo[ks], hi[knext], lo[knext]]))
    triangles = np.vstack(tris)

    area2 = _signed_areas_doubled(vertices, triangles)
    if np.any(area2 <= 1e-14):
        raise MeshError("mesh generation produced degenerate triangles")

    interface_ring = ring_ids(rings_in - 1)
    edges_per_segment = n_theta // n_seg
    segment_arcs = geometry.segment_arcs()
    edge_arcs = segment_arcs[ks // edges_per_segment]
    interface_edges = np.column_stack([interface_ring[ks], interface_ring[knext], edge_arcs])

    boundary_ring = ring_ids(n_rings - 1)
    boundary_edges = np.column_stack([boundary_ring[ks], boundary_ring[knext]])

    vertices.setflags(write=False)
    triangles.setflags(write=False)
    interface_edges.setflags(write=False)
    boundary_edges.setflags(write=False)
    return Mesh(vertices, triangles, interface_edges, boundary_edges)


@dataclass(frozen=True, eq=False)
class DiscreteForwardMap:
    """Assembled operators for one geometry, mesh, and current count.

    Fields: ``stiffness`` is the Laplace bilinear form K0; ``interface_mass``
    holds one boundary mass matrix M_j per arc (each positive semidefinite
    and nonzero); ``load_map`` is the N-by-m matrix whose k-th column is the
    load vector of the k-th boundary current. The transmission system matrix
    A(coeff) = K0 + sum_j coeff_j M_j is symmetric positive definite for any
    strictly positive coefficient vector.

    Instances are immutable after assembly and may be shared across threads;
    all evaluation methods are pure.
    """

    stiffness: sp.csr_matrix
    interface_mass: tuple[sp.csr_matrix, ...]
    load_map: np.ndarray
    num_currents: int
    mesh: Mesh

    @property
    def n_arcs(self) -> int:
        return len(self.interface_mass)

    def _csc_template(self):
        """CSC skeleton of the system matrix with, for every mass matrix, the
        positions of its entries inside the skeleton's data array. The mass
        patterns are subsets of the stiffness pattern because interface
        edges are triangle edges, so A(coeff) assembles by data arithmetic
        alone."""
        cached = getattr(self, "_csc_cache", None)
        if cached is not None:
            return cached
        base = self.stiffness.tocsc()
        base.sort_indices()
        embeddings = []
        for mass in self.interface_mass:
            entries = mass.tocsc().tocoo()
            positions = np.empty(entries.nnz, dtype=np.int64)
            for idx, (row, col) in enumerate(zip(entries.row, entries.col)):
                start, stop = base.indptr[col], base.indptr[col + 1]
                offset = np.searchsorted(base.indices[start:stop], row)
                if offset == stop - start or base.indices[start + offset] != row:
                    raise MeshError("mass matrix entry outside the stiffness pattern")
                positions[idx] = start + offset
            embeddings.append((positions, entries.data.copy()))
        cached = (base, tuple(embeddings))
        object.__setattr__(self, "_csc_cache", cached)
        return cached

    def system_matrix(self, coeff: np.ndarray) -> sp.csc_matrix:
        base, embeddings = self._csc_template()
        data = base.data.copy()
        for c, (positions, values) in zip(coeff, embeddings):
            np.add.at(data, positions, c * values)
        return sp.csc_matrix((data, base.indices, base.indptr), shape=base.shape)

    def solution(self, coeff) -> np.ndarray:
        """Nodal solutions for all m boundary currents, as an N-by-m array.

        Solves A(coeff) W = B by sparse LU with the factorization reused
        across right-hand sides, plus one step of iterative refinement if
        the relative residual exceeds 1e-12.
        """
        coeff = as_coefficient_vector(coeff, self.n_arcs)
        a = self.system_matrix(coeff)
        lu = splu(a)
        w = lu.solve(self.load_map)
        rhs_norm = np.linalg.norm(self.load_map)
        for _ in range(2):
            residual = self.load_map - a @ w
            if np.linalg.norm(residual) <= SOLVE_RTOL * rhs_norm:
                break
            w = w + lu.solve(residual)
        return w

    def measurements(self, coeff) -> SymMatrix:
        """Measurement matrix B^T A(coeff)^{-1} B (currents vs. voltages)."""
        w = self.solution(coeff)
        return SymMatrix(self.load_map.T @ w)

    def directional_derivative(self, coeff, direction) -> SymMatrix:
        """Exact derivative of :meth:`measurements` in coefficient direction d:
        -W^T (sum_j d_j M_j) W with W = A(coeff)^{-1} B."""
        direction = as_direction_vector(direction, self.n_arcs)
        w = self.solution(coeff)
        acc = np.zeros_like(w)
        for d, mass in zip(direction, self.interface_mass):
            if d != 0.0:
                acc += d * (mass @ w)
        return SymMatrix(-(w.T @ acc))

    def measurements_and_partials(self, coeff) -> tuple[SymMatrix, tuple[SymMatrix, ...]]:
        """Measurement matrix together with all n coordinate partials,
        sharing a single factorization."""
        w = self.solution(coeff)
        f = SymMatrix(self.load_map.T @ w)
        partials = tuple(SymMatrix(-(w.T @ (mass @ w))) for mass in self.interface_mass)
        return f, partials


def boundary_current(k: int, theta: np.ndarray) -> np.ndarray:
    """k-th boundary current (0-based) of the orthonormal trigonometric
    family on the outer circle, evaluated at boundary angles theta.

    Index 0 is the constant 1/sqrt(2 pi); indices 2l-1 and 2l are
    cos(l theta)/sqrt(pi) and sin(l theta)/sqrt(pi).
    """
    if k == 0:
        return np.full_like(theta, 1.0 / math.sqrt(2.0 * np.pi))
    freq = (k + 1) // 2
    if k % 2 == 1:
        return np.cos(freq * theta) / math.sqrt(np.pi)
    return np.sin(freq * theta) / math.sqrt(np.pi)


def assemble(geometry: Geometry, mesh_size: float, num_currents: int) -> DiscreteForwardMap:
    """Mesh the geometry and assemble stiffness, interface mass matrices,
    and the load map for the first ``num_currents`` boundary currents."""
    if not isinstance(num_currents, (int, np.integer)) or num_currents < 1:
        raise ValueError(f"num_currents must be an integer >= 1, got {num_currents!r}")
    mesh = triangulate(geometry, mesh_size)
    n = mesh.num_vertices

    stiffness = _assemble_stiffness(mesh)
    interface_mass = tuple(
        _assemble_edge_mass(mesh, mesh.interface_edges[mesh.interface_edges[:, 2] == j, :2], n)
        for j in range(geometry.n_arcs)
    )
    load_map = _assemble_load_map(mesh, int(num_currents))
    load_map.setflags(write=False)
    return DiscreteForwardMap(
        stiffness=stiffness,
        interface_mass=interface_mass,
        load_map=load_map,
        num_currents=int(num_currents),
        mesh=mesh,
    )


def mesh_to_text(mesh: Mesh) -> str:
    """Plain-text mesh dump, one record per line.

    Line 1: ``num_vertices num_triangles``; then one ``x y`` line per
    vertex and one ``i j k`` line of vertex indices per triangle.
    """
    lines = [f"{mesh.num_vertices} {mesh.triangles.shape[0]}"]
    lines.extend(f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices)
    lines.extend(f"{int(i)} {int(j)} {int(k)}" for i, j, k in mesh.triangles)
    return "\n".join(lines) + "\n"


def _signed_areas_doubled(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (
        p1[:, 1] - p0[:, 1]
    )


def _assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    verts, tris = mesh.vertices, mesh.triangles
    x = verts[:, 0][tris]
    y = verts[:, 1][tris]
    # P1 gradient coefficients: grad phi_i = (b_i, c_i) / (2 area).
    b = y[:, [1, 2, 0]] - y[:, [2, 0, 1]]
    c = x[:, [2, 0, 1]] - x[:, [1, 2, 0]]
    area2 = _signed_areas_doubled(verts, tris)
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        2.0 * area2[:, None, None]
    )
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.num_vertices,) * 2)
    return mat.tocsr()


def _assemble_edge_mass(mesh: Mesh, edges: np.ndarray, n: int) -> sp.csr_matrix:
    p0 = mesh.vertices[edges[:, 0]]
    p1 = mesh.vertices[edges[:, 1]]
    length = np.linalg.norm(p1 - p0, axis=1)
    # Exact P1 mass on a straight edge: L/6 * [[2, 1], [1, 2]].
    i0, i1 = edges[:, 0], edges[:, 1]
    rows = np.concatenate([i0, i1, i0, i1])
    cols = np.concatenate([i0, i1, i1, i0])
    vals = np.concatenate([length / 3.0, length / 3.0, length / 6.0, length / 6.0])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _assemble_load_map(mesh: Mesh, num_currents: int) -> np.ndarray:
    edges = mesh.boundary_edges
    p0 = mesh.vertices[edges[:, 0]]
    p1 = mesh.vertices[edges[:, 1]]
    length = np.linalg.norm(p1 - p0, axis=1)
    load = np.zeros((mesh.num_vertices, num_currents))
    for t, weight in zip(_GAUSS_T, _GAUSS_W):
        points = p0 + t * (p1 - p0)
        theta = np.arctan2(points[:, 1], points[:, 0])
        for k in range(num_currents):
            values = boundary_current(k, theta) * (weight * length)
            np.add.at(load[:, k], edges[:, 0], values * (1.0 - t))
            np.add.at(load[:, k], edges[:, 1], values * t)
    return load


def _points_strictly_inside(polygon: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Crossing-number test; points on the polygon boundary count as outside."""
    x0 = polygon[:, 0]
    y0 = polygon[:, 1]
    x1 = np.roll(x0, -1)
    y1 = np.roll(y0, -1)
    inside = np.zeros(points.shape[0], dtype=bool)
    for idx, (px, py) in enumerate(points):
        spans = (y0 > py) != (y1 > py)
        if not np.any(spans):
            continue
        x_cross = x0[spans] + (py - y0[spans]) * (x1[spans] - x0[spans]) / (y1[spans] - y0[spans])
        if np.any(np.isclose(x_cross, px, atol=1e-14)):
            continue
        inside[idx] = (np.count_nonzero(x_cross > px) % 2) == 1
    return inside
