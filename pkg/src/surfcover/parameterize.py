"""Fixed-boundary harmonic UV charts with bidirectional UV <-> 3D lookup.

The boundary loop of a disk-topology region is parameterized by cumulative
chord length, pinned onto either the square [-1,1]^2 or the unit circle,
and the interior is solved from the discrete Laplace equation. Cotangent
weights are the default; uniform (graph) weights are the guaranteed-
injective fallback for convex boundaries and are substituted automatically
whenever the cotangent solve flips a triangle.

Interior holes are tolerated: each extra boundary loop is sealed with a
virtual centroid fan for the solve only, and the chart records the hole
polygons so downstream consumers can mask them.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg, splu

from .mesh import BoundaryLoop, TriangleMesh, boundary_loops, extract_boundary

SQUARE = "square"
DISK = "disk"

# Barycentric slack for point-in-triangle tests.
EDGE_TOL = 1e-12
# Above this vertex count the solver switches from direct LU to Jacobi-CG.
DIRECT_SOLVE_LIMIT = 50_000
GRID_BINS = 64


def chordal_parameterize(loop: BoundaryLoop) -> np.ndarray:
    """Boundary parameters t_i in [0, 1): cumulative chord length over perimeter.

    t_0 is 0 and the sequence is strictly increasing; a zero-length loop
    edge (repeated position or repeated vertex) is an error.
    """
    if len(loop) < 3:
        raise ValueError("boundary loop needs at least 3 vertices")
    if len(np.unique(loop.vertex_indices)) != len(loop):
        raise ValueError("boundary loop has a repeated vertex")
    t = loop.cumulative_lengths / loop.perimeter
    if np.any(np.diff(loop.cumulative_lengths) <= 0.0) or loop.perimeter <= loop.cumulative_lengths[-1]:
        raise ValueError("zero-length edge in boundary loop")
    return t


def map_boundary_square(t):
    """Map t in [0, 1] onto the [-1,1]^2 boundary, counterclockwise from (-1,-1).

    Piecewise linear over four quarter-perimeter branches: bottom edge,
    right edge, top edge, left edge. Accepts scalars or arrays.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ValueError("t outside [0, 1]")
    x = np.empty_like(t_arr)
    y = np.empty_like(t_arr)
    b0 = t_arr < 0.25
    b1 = (t_arr >= 0.25) & (t_arr < 0.5)
    b2 = (t_arr >= 0.5) & (t_arr < 0.75)
    b3 = t_arr >= 0.75
    x[b0] = 8.0 * t_arr[b0] - 1.0
    y[b0] = -1.0
    x[b1] = 1.0
    y[b1] = 8.0 * t_arr[b1] - 3.0
    x[b2] = 5.0 - 8.0 * t_arr[b2]
    y[b2] = 1.0
    x[b3] = -1.0
    y[b3] = 7.0 - 8.0 * t_arr[b3]
    out = np.stack([x, y], axis=-1)
    return out if t_arr.ndim else out.reshape(2)


def map_boundary_circle(t):
    """Map t in [0, 1] onto the unit circle: (cos 2*pi*t, sin 2*pi*t)."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ValueError("t outside [0, 1]")
    ang = 2.0 * np.pi * t_arr
    out = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    return out if t_arr.ndim else out.reshape(2)


def map_boundary(t, domain: str):
    if domain == SQUARE:
        return map_boundary_square(t)
    if domain == DISK:
        return map_boundary_circle(t)
    raise ValueError(f"unknown domain {domain!r}")


@dataclass
class UVChart:
    """Per-vertex UV coordinates plus lookup structures.

    uv rows correspond one-to-one to mesh vertices and `faces` is
    index-identical to the mesh faces, so barycentric weights transfer
    between the two directly. `hole_loops` lists the vertex rings of
    interior holes (their UV polygons bound unmapped regions).
    """

    uv: np.ndarray
    faces: np.ndarray
    domain: str
    boundary_vertices: np.ndarray
    boundary_params: np.ndarray
    hole_loops: list = field(default_factory=list)
    _bins: dict = field(default=None, repr=False, compare=False)
    _bin_geom: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=np.float64)
        self.faces = np.asarray(self.faces, dtype=np.int32)

    # -- spatial index -------------------------------------------------

    def _build_index(self):
        lo = self.uv.min(axis=0) - 1e-9
        hi = self.uv.max(axis=0) + 1e-9
        cell = (hi - lo) / GRID_BINS
        cell[cell == 0.0] = 1.0
        bins: dict[tuple[int, int], list[int]] = {}
        tri_uv = self.uv[self.faces]
        mins = tri_uv.min(axis=1) - 1e-9
        maxs = tri_uv.max(axis=1) + 1e-9
        i0 = np.clip(((mins - lo) / cell).astype(np.int64), 0, GRID_BINS - 1)
        i1 = np.clip(((maxs - lo) / cell).astype(np.int64), 0, GRID_BINS - 1)
        for f in range(len(self.faces)):
            for bx in range(i0[f, 0], i1[f, 0] + 1):
                for by in range(i0[f, 1], i1[f, 1] + 1):
                    bins.setdefault((bx, by), []).append(f)
        self._bins = {k: np.asarray(v, dtype=np.int64) for k, v in bins.items()}
        self._bin_geom = (lo, cell)

    def _candidates(self, u, v):
        if self._bins is None:
            self._build_index()
        lo, cell = self._bin_geom
        bx = int(np.clip((u - lo[0]) / cell[0], 0, GRID_BINS - 1))
        by = int(np.clip((v - lo[1]) / cell[1], 0, GRID_BINS - 1))
        return self._bins.get((bx, by), np.empty(0, dtype=np.int64))

    def locate(self, u: float, v: float):
        """Containing face id and barycentric weights, or (-1, None).

        Candidate faces come from a uniform bin grid; ties on shared edges
        go to the lowest face index.
        """
        cand = self._candidates(u, v)
        if len(cand) == 0:
            return -1, None
        tri = self.uv[self.faces[cand]]
        bary = _barycentric(tri, np.array([u, v]))
        inside = np.all(bary >= -EDGE_TOL, axis=1)
        if not np.any(inside):
            return -1, None
        order = np.argsort(cand)
        for k in order:
            if inside[k]:
                return int(cand[k]), bary[k]
        return -1, None

    def locate_batch(self, points: np.ndarray):
        """Vectorized `locate` over an (n, 2) array.

        Returns (face_ids, bary) with face_id -1 where the point is outside
        the chart.
        """
        points = np.asarray(points, dtype=np.float64)
        if self._bins is None:
            self._build_index()
        lo, cell = self._bin_geom
        n = len(points)
        face_ids = np.full(n, -1, dtype=np.int64)
        bary_out = np.zeros((n, 3), dtype=np.float64)
        bx = np.clip(((points[:, 0] - lo[0]) / cell[0]).astype(np.int64), 0, GRID_BINS - 1)
        by = np.clip(((points[:, 1] - lo[1]) / cell[1]).astype(np.int64), 0, GRID_BINS - 1)
        key = bx * GRID_BINS + by
        order = np.argsort(key, kind="stable")
        sorted_key = key[order]
        starts = np.searchsorted(sorted_key, np.unique(sorted_key))
        bounds = np.append(starts, n)
        for s, e in zip(bounds[:-1], bounds[1:]):
            idx = order[s:e]
            cand = self._bins.get((int(bx[idx[0]]), int(by[idx[0]])))
            if cand is None:
                continue
            cand = np.sort(cand)
            tri = self.uv[self.faces[cand]]  # (c, 3, 2)
            pts = points[idx]  # (p, 2)
            bary = _barycentric_many(tri, pts)  # (p, c, 3)
            inside = np.all(bary >= -EDGE_TOL, axis=2)  # (p, c)
            hit = inside.any(axis=1)
            first = np.argmax(inside, axis=1)
            rows = np.nonzero(hit)[0]
            face_ids[idx[rows]] = cand[first[rows]]
            bary_out[idx[rows]] = bary[rows, first[rows]]
        return face_ids, bary_out

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean chart-membership mask for an (n, 2) array of UV points."""
        face_ids, _ = self.locate_batch(np.atleast_2d(points))
        return face_ids >= 0

    def signed_areas(self) -> np.ndarray:
        tri = self.uv[self.faces]
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def hole_polygons(self) -> list[np.ndarray]:
        """UV polygons (closed rings as (k, 2) arrays) of the interior holes."""
        return [self.uv[loop] for loop in self.hole_loops]

    # -- serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "format_version": 1,
            "domain": self.domain,
            "uv": self.uv.tolist(),
            "faces": self.faces.tolist(),
            "boundary_vertices": np.asarray(self.boundary_vertices).tolist(),
            "boundary_params": np.asarray(self.boundary_params).tolist(),
            "hole_loops": [np.asarray(h).tolist() for h in self.hole_loops],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "UVChart":
        return cls(
            uv=np.asarray(d["uv"], dtype=np.float64),
            faces=np.asarray(d["faces"], dtype=np.int32),
            domain=d["domain"],
            boundary_vertices=np.asarray(d["boundary_vertices"], dtype=np.int64),
            boundary_params=np.asarray(d["boundary_params"], dtype=np.float64),
            hole_loops=[np.asarray(h, dtype=np.int64) for h in d.get("hole_loops", [])],
        )


def save_chart(chart: UVChart, path, extra: dict | None = None) -> None:
    d = chart.to_json_dict()
    if extra:
        d.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d, fh)


def load_chart(path) -> UVChart:
    with open(path, "r", encoding="utf-8") as fh:
        return UVChart.from_json_dict(json.load(fh))


def _barycentric(tri: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Barycentric weights of one point w.r.t. (c, 3, 2) triangles."""
    return _barycentric_many(tri, p.reshape(1, 2))[0]


def _barycentric_many(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Weights of (p, 2) points w.r.t. (c, 3, 2) triangles -> (p, c, 3)."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = b - a
    e2 = c - a
    denom = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]  # (c,)
    denom = np.where(denom == 0.0, 1e-300, denom)
    d = pts[:, None, :] - a[None, :, :]  # (p, c, 2)
    wb = (d[:, :, 0] * e2[None, :, 1] - d[:, :, 1] * e2[None, :, 0]) / denom
    wc = (e1[None, :, 0] * d[:, :, 1] - e1[None, :, 1] * d[:, :, 0]) / denom
    wa = 1.0 - wb - wc
    return np.stack([wa, wb, wc], axis=2)


def _edge_weights(vertices: np.ndarray, faces: np.ndarray, scheme: str):
    """(i, j, w) arrays over undirected edges for the chosen weight scheme."""
    if scheme == "uniform":
        und = np.sort(
            np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1
        )
        edges = np.unique(und, axis=0)
        return edges[:, 0], edges[:, 1], np.ones(len(edges))
    if scheme != "cotangent":
        raise ValueError(f"unknown weight scheme {scheme!r}")

    acc: dict[tuple[int, int], float] = {}
    v = vertices
    for face in faces:
        for k in range(3):
            i, j, o = int(face[k]), int(face[(k + 1) % 3]), int(face[(k + 2) % 3])
            e1 = v[i] - v[o]
            e2 = v[j] - v[o]
            cos_a = float(np.dot(e1, e2))
            sin_a = float(np.linalg.norm(np.cross(e1, e2)))
            cot = cos_a / max(sin_a, 1e-300)
            key = (i, j) if i < j else (j, i)
            acc[key] = acc.get(key, 0.0) + 0.5 * cot
    ii = np.fromiter((k[0] for k in acc), dtype=np.int64, count=len(acc))
    jj = np.fromiter((k[1] for k in acc), dtype=np.int64, count=len(acc))
    ww = np.fromiter(acc.values(), dtype=np.float64, count=len(acc))
    return ii, jj, ww


def _laplacian(n: int, ii, jj, ww) -> sparse.csr_matrix:
    rows = np.concatenate([ii, jj, ii, jj])
    cols = np.concatenate([jj, ii, ii, jj])
    vals = np.concatenate([-ww, -ww, ww, ww])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _seal_holes(mesh: TriangleMesh, outer: np.ndarray):
    """Virtual centroid fans over every non-outer boundary loop.

    Returns (vertices, faces, hole_loops) where the appended rows exist
    only for the Laplace solve; `hole_loops` holds the original vertex
    rings of the sealed holes.
    """
    loops = boundary_loops(mesh)
    outer_set = set(int(i) for i in outer)
    holes = [lp for lp in loops if set(int(i) for i in lp) != outer_set]
    if not holes:
        return mesh.vertices, mesh.faces, []
    verts = [mesh.vertices]
    fill = []
    next_id = mesh.n_vertices
    for lp in holes:
        centroid = mesh.vertices[lp].mean(axis=0, keepdims=True)
        verts.append(centroid)
        k = len(lp)
        for a in range(k):
            fill.append([next_id, int(lp[a]), int(lp[(a + 1) % k])])
        next_id += 1
    vertices = np.concatenate(verts, axis=0)
    faces = np.concatenate([mesh.faces, np.asarray(fill, dtype=np.int32)], axis=0)
    return vertices, faces, holes


def harmonic_solve(
    mesh: TriangleMesh,
    loop: BoundaryLoop,
    domain: str = SQUARE,
    weights: str = "cotangent",
) -> UVChart:
    """Solve the fixed-boundary harmonic map of the mesh onto `domain`.

    Boundary vertices are pinned by chordal parameter; interior vertices
    solve L uv = 0. If the cotangent solve produces any flipped UV
    triangle, the solve silently cannot be trusted to be injective, so it
    is redone with uniform weights (warning emitted). Interior holes are
    sealed with virtual fans for the solve and reported on the chart.

    Raises:
        RuntimeError: singular system or residual above 1e-8.
    """
    t = chordal_parameterize(loop)
    boundary_uv = map_boundary(t, domain)

    vertices, faces, holes = _seal_holes(mesh, loop.vertex_indices)
    n = len(vertices)
    b_idx = np.asarray(loop.vertex_indices, dtype=np.int64)
    interior = np.setdiff1d(np.arange(n), b_idx)

    def solve(scheme: str) -> np.ndarray:
        ii, jj, ww = _edge_weights(vertices, faces, scheme)
        L = _laplacian(n, ii, jj, ww).tocsr()
        uv = np.zeros((n, 2))
        uv[b_idx] = boundary_uv
        if len(interior):
            lii = L[interior][:, interior].tocsc()
            rhs = -L[interior][:, b_idx] @ boundary_uv
            if len(interior) < DIRECT_SOLVE_LIMIT:
                try:
                    lu = splu(lii)
                except RuntimeError as exc:
                    raise RuntimeError(f"singular harmonic system: {exc}") from exc
                uv[interior, 0] = lu.solve(rhs[:, 0])
                uv[interior, 1] = lu.solve(rhs[:, 1])
            else:
                pre = sparse.diags(1.0 / lii.diagonal())
                for k in range(2):
                    sol, info = cg(lii, rhs[:, k], rtol=1e-10, atol=0.0, M=pre)
                    if info != 0:
                        raise RuntimeError(f"conjugate gradient failed (info={info})")
                    uv[interior, k] = sol
            residual = np.abs(L[interior] @ uv).max()
            if residual >= 1e-8:
                raise RuntimeError(f"harmonic residual {residual:.3e} above 1e-8")
        return uv

    uv = solve(weights)
    chart = UVChart(
        uv=uv[: mesh.n_vertices],
        faces=mesh.faces,
        domain=domain,
        boundary_vertices=b_idx,
        boundary_params=t,
        hole_loops=holes,
    )
    if weights == "cotangent" and np.any(chart.signed_areas() <= 0.0):
        warnings.warn(
            "cotangent weights flipped a UV triangle; falling back to uniform weights",
            RuntimeWarning,
            stacklevel=2,
        )
        uv = solve("uniform")
        chart = UVChart(
            uv=uv[: mesh.n_vertices],
            faces=mesh.faces,
            domain=domain,
            boundary_vertices=b_idx,
            boundary_params=t,
            hole_loops=holes,
        )
    return chart


def build_chart(
    mesh: TriangleMesh,
    domain: str = SQUARE,
    weights: str = "cotangent",
    start_vertex: int | None = None,
) -> UVChart:
    """Extract the outer boundary and run the harmonic solve.

    For a mesh with interior holes the longest loop (by perimeter) is taken
    as the outer boundary; pass `start_vertex` to anchor t = 0.
    """
    loops = boundary_loops(mesh)
    if len(loops) == 0:
        raise ValueError("no boundary (closed surface)")
    if len(loops) == 1:
        loop = extract_boundary(mesh, start_vertex=start_vertex)
    else:
        perims = []
        for lp in loops:
            pts = mesh.vertices[lp]
            perims.append(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())
        outer = loops[int(np.argmax(perims))]
        loop = _loop_from_indices(mesh, outer, start_vertex)
    return harmonic_solve(mesh, loop, domain=domain, weights=weights)


def _loop_from_indices(mesh: TriangleMesh, loop: np.ndarray, start_vertex: int | None) -> BoundaryLoop:
    if not _loop_is_ccw_subset(mesh, loop):
        loop = loop[::-1].copy()
    if start_vertex is None:
        start_vertex = int(loop.min())
    where = np.nonzero(loop == start_vertex)[0]
    if len(where) == 0:
        raise ValueError(f"start vertex {start_vertex} is not on the outer boundary")
    loop = np.roll(loop, -int(where[0]))
    pts = mesh.vertices[loop]
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    closing = float(np.linalg.norm(pts[0] - pts[-1]))
    cumulative = np.concatenate([[0.0], np.cumsum(seg)])
    return BoundaryLoop(loop, cumulative, float(cumulative[-1] + closing))


def _loop_is_ccw_subset(mesh: TriangleMesh, loop: np.ndarray) -> bool:
    from .mesh import _loop_is_ccw

    return _loop_is_ccw(mesh, loop)


def surface_point(chart: UVChart, mesh: TriangleMesh, u: float, v: float):
    """3D point and unit normal at chart coordinates (u, v).

    Barycentric interpolation of the containing triangle's vertices and
    vertex normals; a degenerate interpolated normal falls back to the face
    normal.

    Raises:
        ValueError: (u, v) outside the chart (or inside a hole).
    """
    face_id, bary = chart.locate(u, v)
    if face_id < 0:
        raise ValueError(f"({u}, {v}) is outside the chart")
    idx = mesh.faces[face_id]
    point = bary @ mesh.vertices[idx]
    normal = bary @ mesh.vertex_normals[idx]
    nn = np.linalg.norm(normal)
    if nn < 1e-12:
        normal = mesh.face_normals[face_id]
    else:
        normal = normal / nn
    return point, normal


def uv_of_point(chart: UVChart, mesh: TriangleMesh, face_id: int, barycentric) -> np.ndarray:
    """UV coordinates of barycentric weights on a mesh face.

    Weights must be nonnegative and sum to 1 (within 1e-9); the same
    weights apply to the UV triangle with the same index.
    """
    if face_id < 0 or face_id >= len(chart.faces):
        raise ValueError(f"invalid face id {face_id}")
    w = np.asarray(barycentric, dtype=np.float64)
    if w.shape != (3,):
        raise ValueError("barycentric weights must have shape (3,)")
    if np.any(w < -EDGE_TOL):
        raise ValueError("barycentric weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"barycentric weights sum to {w.sum()}, expected 1")
    return w @ chart.uv[chart.faces[face_id]]
