"""Triangle meshes: OBJ I/O, validation, boundary loops, and region extraction.

Meshes are immutable after construction. Vertex positions are in meters,
faces are 0-based index triples with consistent counterclockwise winding
(normals point toward the viewer when the triangle reads counterclockwise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Faces thinner than this (in m^2) are rejected at validation time.
DEGENERATE_AREA = 1e-12


class TriangleMesh:
    """A validated triangle mesh.

    Attributes:
        vertices: (n, 3) float64 positions in meters.
        faces: (m, 3) int32 vertex-index triples.
        face_normals: (m, 3) unit normals.
        face_areas: (m,) areas in m^2.
        parent_vertices / parent_faces: index maps into the mesh this one
            was extracted from, or None for a mesh built directly.
    """

    def __init__(self, vertices, faces, parent_vertices=None, parent_faces=None):
        self.vertices = np.asarray(vertices, dtype=np.float64)
        self.faces = np.asarray(faces, dtype=np.int32)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be an (n, 3) array")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be an (m, 3) array")
        if len(self.faces) == 0:
            raise ValueError("mesh has no faces")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise ValueError("face index out of range")

        v0 = self.vertices[self.faces[:, 0]]
        e1 = self.vertices[self.faces[:, 1]] - v0
        e2 = self.vertices[self.faces[:, 2]] - v0
        cross = np.cross(e1, e2)
        double_area = np.linalg.norm(cross, axis=1)
        if np.any(double_area * 0.5 <= DEGENERATE_AREA):
            bad = int(np.argmin(double_area))
            raise ValueError(f"degenerate face {bad} (area <= {DEGENERATE_AREA} m^2)")
        self.face_areas = 0.5 * double_area
        self.face_normals = cross / double_area[:, None]

        self._validate_topology()
        self.parent_vertices = parent_vertices
        self.parent_faces = parent_faces
        self._vertex_normals = None

    def _validate_topology(self):
        directed = self._directed_edges()
        # Manifoldness: an undirected edge may belong to at most two faces.
        undirected = np.sort(directed, axis=1)
        _, counts = np.unique(undirected, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise ValueError("non-manifold edge (shared by more than two faces)")
        # Winding consistency: no directed edge may repeat, otherwise two
        # adjacent faces traverse their shared edge in the same direction.
        _, dcounts = np.unique(directed, axis=0, return_counts=True)
        if np.any(dcounts > 1):
            raise ValueError("inconsistent face winding")

    def _directed_edges(self):
        f = self.faces
        return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=0)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def total_area(self) -> float:
        return float(self.face_areas.sum())

    @property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted average of incident face normals, renormalized."""
        if self._vertex_normals is None:
            acc = np.zeros_like(self.vertices)
            weighted = self.face_normals * self.face_areas[:, None]
            for k in range(3):
                np.add.at(acc, self.faces[:, k], weighted)
            norms = np.linalg.norm(acc, axis=1)
            norms[norms == 0.0] = 1.0
            self._vertex_normals = acc / norms[:, None]
        return self._vertex_normals

    def edge_set(self):
        """Unique undirected edges as an (e, 2) sorted-index array."""
        und = np.sort(self._directed_edges(), axis=1)
        return np.unique(und, axis=0)


@dataclass
class BoundaryLoop:
    """An ordered ring of boundary vertices.

    cumulative_lengths[i] is the chord length walked from the first loop
    vertex to vertex i (so cumulative_lengths[0] == 0); perimeter includes
    the closing edge back to the start.
    """

    vertex_indices: np.ndarray
    cumulative_lengths: np.ndarray
    perimeter: float

    def __len__(self):
        return len(self.vertex_indices)


def boundary_loops(mesh: TriangleMesh) -> list[np.ndarray]:
    """All boundary loops of the mesh, each in face-winding order.

    With counterclockwise face winding the outer loop comes out
    counterclockwise (surface on the left) and interior hole loops come
    out clockwise.
    """
    directed = mesh._directed_edges()
    edge_keys = {(int(a), int(b)) for a, b in directed}
    boundary_edges = [(a, b) for (a, b) in edge_keys if (b, a) not in edge_keys]
    if not boundary_edges:
        return []

    nxt: dict[int, int] = {}
    for a, b in boundary_edges:
        if a in nxt:
            raise ValueError(f"boundary is not a simple loop at vertex {a}")
        nxt[a] = b

    loops = []
    remaining = set(nxt)
    while remaining:
        start = min(remaining)
        loop = [start]
        cur = nxt[start]
        while cur != start:
            if cur not in remaining:
                raise ValueError("boundary walk failed (open or tangled loop)")
            loop.append(cur)
            cur = nxt[cur]
        remaining.difference_update(loop)
        loops.append(np.asarray(loop, dtype=np.int64))
    return loops


def _loop_is_ccw(mesh: TriangleMesh, loop: np.ndarray) -> bool:
    """Signed area of the loop projected on the mean-normal plane."""
    normal = (mesh.face_normals * mesh.face_areas[:, None]).sum(axis=0)
    nn = np.linalg.norm(normal)
    if nn == 0.0:
        return True
    normal = normal / nn
    # Build an orthonormal in-plane basis.
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    bu = np.cross(helper, normal)
    bu /= np.linalg.norm(bu)
    bv = np.cross(normal, bu)
    pts = mesh.vertices[loop]
    x = pts @ bu
    y = pts @ bv
    area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return area2 >= 0.0


def extract_boundary(mesh: TriangleMesh, start_vertex: int | None = None) -> BoundaryLoop:
    """The single boundary loop of a disk-topology mesh.

    The loop is returned counterclockwise with respect to the average
    outward face normal and rotated so it starts at `start_vertex`
    (default: the boundary vertex with the lowest index).

    Raises:
        ValueError: if the mesh is closed or has more than one loop.
    """
    loops = boundary_loops(mesh)
    if len(loops) == 0:
        raise ValueError("no boundary (closed surface)")
    if len(loops) > 1:
        raise ValueError(f"multiple boundary loops ({len(loops)}); not disk-homeomorphic")
    loop = loops[0]
    if not _loop_is_ccw(mesh, loop):
        loop = loop[::-1].copy()

    if start_vertex is None:
        start_vertex = int(loop.min())
    where = np.nonzero(loop == start_vertex)[0]
    if len(where) == 0:
        raise ValueError(f"start vertex {start_vertex} is not on the boundary")
    loop = np.roll(loop, -int(where[0]))

    pts = mesh.vertices[loop]
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    closing = float(np.linalg.norm(pts[0] - pts[-1]))
    cumulative = np.concatenate([[0.0], np.cumsum(seg)])
    return BoundaryLoop(
        vertex_indices=loop,
        cumulative_lengths=cumulative,
        perimeter=float(cumulative[-1] + closing),
    )


def extract_region(mesh: TriangleMesh, face_ids) -> TriangleMesh:
    """Submesh of the given faces, with vertices reindexed.

    The selection must be non-empty and edge-connected. The returned mesh
    records `parent_vertices` and `parent_faces` index maps.
    """
    face_ids = np.unique(np.asarray(face_ids, dtype=np.int64))
    if len(face_ids) == 0:
        raise ValueError("empty face selection")
    if face_ids.min() < 0 or face_ids.max() >= mesh.n_faces:
        raise ValueError("face id out of range")

    # Connectivity over shared edges, restricted to the selection.
    sel_faces = mesh.faces[face_ids]
    edge_to_face: dict[tuple[int, int], int] = {}
    parent = np.arange(len(face_ids))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for fi, face in enumerate(sel_faces):
        a, b, c = int(face[0]), int(face[1]), int(face[2])
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            other = edge_to_face.get(key)
            if other is None:
                edge_to_face[key] = fi
            else:
                ra, rb = find(fi), find(other)
                if ra != rb:
                    parent[ra] = rb
    roots = {find(i) for i in range(len(face_ids))}
    if len(roots) > 1:
        raise ValueError(f"face selection is not edge-connected ({len(roots)} islands)")

    used = np.unique(sel_faces.reshape(-1))
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriangleMesh(
        vertices=mesh.vertices[used],
        faces=remap[sel_faces],
        parent_vertices=used,
        parent_faces=face_ids,
    )


def load_obj(path, triangulate: bool = False) -> TriangleMesh:
    """Read an ASCII OBJ file (``v``/``f`` records; normals are recomputed).

    Faces with more than three vertices are fan-triangulated when
    `triangulate` is set and rejected otherwise. Negative OBJ indices are
    resolved relative to the vertices read so far.
    """
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            tag = tokens[0]
            if tag == "v":
                if len(tokens) < 4:
                    raise ValueError(f"{path}:{lineno}: malformed vertex record")
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif tag == "f":
                idx = []
                for tok in tokens[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise ValueError(f"{path}:{lineno}: bad face index {tok!r}") from exc
                    if i < 0:
                        i = len(vertices) + i
                    else:
                        i = i - 1
                    idx.append(i)
                if len(idx) < 3:
                    raise ValueError(f"{path}:{lineno}: face with fewer than 3 vertices")
                if len(idx) > 3 and not triangulate:
                    raise ValueError(
                        f"{path}:{lineno}: non-triangular face ({len(idx)} vertices); "
                        "pass triangulate=True to fan-triangulate"
                    )
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
            # vn/vt/o/g/s/usemtl/mtllib records are ignored.
    if not vertices:
        raise ValueError(f"{path}: no vertices found")
    return TriangleMesh(np.asarray(vertices), np.asarray(faces))


def save_obj(mesh: TriangleMesh, path) -> None:
    """Write vertices and faces as ASCII OBJ with round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def read_face_selection(path) -> np.ndarray:
    """Newline-separated face indices; blank lines and ``#`` comments skipped."""
    ids = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                ids.append(int(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad face index {line!r}") from exc
    return np.asarray(ids, dtype=np.int64)
