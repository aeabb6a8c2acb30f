"""Conforming 2D triangular meshes with explicit boundary structure.

A :class:`TriMesh` stores vertices, CCW triangles, oriented boundary edges
(domain on the left of ``i -> j``) and the ordered list of boundary vertices.
Meshes are immutable after construction and safe to share between threads.
"""

from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Invalid mesh parameters or violated mesh invariants."""


class MeshParseError(MeshError):
    """Malformed mesh file; carries the 1-based line number."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray        # (nv, 2) float64
    triangles: np.ndarray       # (nt, 3) int, CCW
    boundary_edges: np.ndarray  # (nb, 3) int: (i, j, marker), domain left of i->j
    boundary_vertices: np.ndarray  # ordered along the boundary
    interior_vertices: np.ndarray
    # vertex index -> position in boundary_vertices, -1 for interior
    boundary_pos: np.ndarray = field(init=False)

    def __post_init__(self):
        pos = np.full(len(self.vertices), -1, dtype=np.int64)
        pos[self.boundary_vertices] = np.arange(len(self.boundary_vertices))
        object.__setattr__(self, "boundary_pos", pos)
        for arr in (self.vertices, self.triangles, self.boundary_edges,
                    self.boundary_vertices, self.interior_vertices,
                    self.boundary_pos):
            arr.flags.writeable = False

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def nt(self):
        return len(self.triangles)

    @property
    def n_boundary(self):
        return len(self.boundary_vertices)

    def signed_areas(self):
        p = self.vertices[self.triangles]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    def edge_lengths(self):
        """Lengths of all undirected edges (each counted once)."""
        e = _undirected_edges(self.triangles)
        d = self.vertices[e[:, 0]] - self.vertices[e[:, 1]]
        return np.hypot(d[:, 0], d[:, 1])

    def boundary_edge_lengths(self):
        d = (self.vertices[self.boundary_edges[:, 0]]
             - self.vertices[self.boundary_edges[:, 1]])
        return np.hypot(d[:, 0], d[:, 1])


def _undirected_edges(triangles):
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]],
                   triangles[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def _make_mesh(vertices, triangles, boundary_edges, boundary_order):
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
    boundary_order = np.asarray(boundary_order, dtype=np.int64)
    interior = np.setdiff1d(np.arange(len(vertices)), boundary_order)
    return TriMesh(vertices, triangles, boundary_edges, boundary_order,
                   interior)


def generate_disk_mesh(radius, target_h):
    """Structured polar mesh of the disk of given radius centered at 0.

    Ring counts are snapped to powers of two so that halving ``target_h``
    provably at least doubles the boundary vertex count while every edge
    stays below ``1.5 * target_h``.  Output is deterministic.
    """
    if radius <= 0 or target_h <= 0:
        raise MeshError("radius and target_h must be positive")
    if target_h >= radius:
        raise MeshError("target_h must be smaller than radius")

    # pi*R/(3h) rings give angular spacing <= h on the outermost ring
    x = np.pi * radius / (3.0 * target_h)
    n_rings = 1 << int(np.ceil(np.log2(x)))

    verts = [(0.0, 0.0)]
    ring_start = [None]  # index of first vertex of ring j
    for j in range(1, n_rings + 1):
        ring_start.append(len(verts))
        r = radius * j / n_rings
        m = 6 * j
        ang = 2.0 * np.pi * np.arange(m) / m
        verts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    verts = np.array(verts)

    tris = []
    # central fan
    for m in range(6):
        tris.append((0, 1 + m, 1 + (m + 1) % 6))
    # annulus strips, merged by angle
    for j in range(2, n_rings + 1):
        p, q = 6 * (j - 1), 6 * j
        istart, ostart = ring_start[j - 1], ring_start[j]
        i = o = 0
        while i < p or o < q:
            a_in = 2.0 * np.pi * (i + 1) / p if i < p else np.inf
            a_out = 2.0 * np.pi * (o + 1) / q if o < q else np.inf
            if a_out <= a_in and o < q:
                tris.append((istart + i % p, ostart + o % q,
                             ostart + (o + 1) % q))
                o += 1
            else:
                tris.append((istart + i % p, ostart + o % q,
                             istart + (i + 1) % p))
                i += 1

    m_out = 6 * n_rings
    ostart = ring_start[n_rings]
    boundary = np.arange(ostart, ostart + m_out)
    bedges = np.column_stack([boundary, np.roll(boundary, -1),
                              np.zeros(m_out, dtype=np.int64)])
    return _make_mesh(verts, np.array(tris), bedges, boundary)


def generate_square_mesh(side, n):
    """Structured n x n grid on [0, side]^2, each cell split into 2 triangles."""
    if side <= 0:
        raise MeshError("side must be positive")
    if n < 1:
        raise MeshError("n must be at least 1")

    xs = np.linspace(0.0, side, n + 1)
    xx, yy = np.meshgrid(xs, xs)
    verts = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))

    # CCW walk: bottom, right, top, left
    bottom = [vid(i, 0) for i in range(n + 1)]
    right = [vid(n, j) for j in range(1, n + 1)]
    top = [vid(i, n) for i in range(n - 1, -1, -1)]
    left = [vid(0, j) for j in range(n - 1, 0, -1)]
    boundary = np.array(bottom + right + top + left)
    nb = len(boundary)
    bedges = np.column_stack([boundary, np.roll(boundary, -1),
                              np.zeros(nb, dtype=np.int64)])
    return _make_mesh(verts, np.array(tris), bedges, boundary)


def validate(mesh):
    """Check all structural mesh invariants; raise MeshError naming the first
    violated one."""
    nv, nt = mesh.nv, mesh.nt

    if mesh.triangles.min(initial=0) < 0 or mesh.triangles.max(initial=-1) >= nv:
        raise MeshError("triangle vertex index out of range")
    if len(mesh.boundary_edges) and (mesh.boundary_edges[:, :2].min() < 0
                                     or mesh.boundary_edges[:, :2].max() >= nv):
        raise MeshError("boundary edge vertex index out of range")

    areas = mesh.signed_areas()
    if np.any(areas <= 0):
        raise MeshError("non-positive triangle signed area (triangle %d)"
                        % int(np.argmin(areas)))

    # undirected edge incidence counts
    e_dir = np.vstack([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                       mesh.triangles[:, [2, 0]]])
    e_und = np.sort(e_dir, axis=1)
    uniq, counts = np.unique(e_und, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("edge shared by more than two triangles")

    edge_count = {(int(a), int(b)): int(c) for (a, b), c in zip(uniq, counts)}
    directed = set(map(tuple, e_dir.tolist()))

    listed = set()
    for i, j, _ in mesh.boundary_edges:
        key = (int(min(i, j)), int(max(i, j)))
        if key not in edge_count:
            raise MeshError(f"boundary edge {key} is not a mesh edge")
        if edge_count[key] != 1:
            raise MeshError(f"boundary edge {key} belongs to two triangles")
        if (int(i), int(j)) not in directed:
            raise MeshError(f"boundary edge ({i},{j}) has the domain on its "
                            "right (wrong orientation)")
        listed.add(key)
    from_tris = {(int(a), int(b)) for (a, b), c in zip(uniq, counts) if c == 1}
    if listed != from_tris:
        raise MeshError("boundary edge list does not match the set of "
                        "single-triangle edges")

    n_edges = len(uniq)
    if nv - n_edges + nt != 1:
        raise MeshError("Euler formula V - E + T = 1 violated "
                        f"({nv} - {n_edges} + {nt} != 1)")

    on_boundary = {int(v) for i, j, _ in mesh.boundary_edges for v in (i, j)}
    if set(mesh.boundary_vertices.tolist()) != on_boundary:
        raise MeshError("boundary_vertices does not match vertices incident "
                        "to boundary edges")
    both = np.intersect1d(mesh.boundary_vertices, mesh.interior_vertices)
    if len(both):
        raise MeshError("boundary/interior vertex lists overlap")
    if len(mesh.boundary_vertices) + len(mesh.interior_vertices) != nv:
        raise MeshError("boundary/interior vertex lists do not partition "
                        "the vertex set")
    return True


def save_mesh(mesh):
    """Serialize to the plain-text mesh format; round-trips exactly."""
    lines = [f"mesh2d {mesh.nv} {mesh.nt} {len(mesh.boundary_edges)}"]
    for x, y in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r}")
    for i, j, k in mesh.triangles:
        lines.append(f"t {int(i)} {int(j)} {int(k)}")
    for i, j, m in mesh.boundary_edges:
        lines.append(f"b {int(i)} {int(j)} {int(m)}")
    return "\n".join(lines) + "\n"


def load_mesh(text):
    """Parse the plain-text mesh format and validate the mesh.

    Raises MeshParseError with a line number on malformed input and
    MeshError if the parsed mesh violates a structural invariant.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    rows = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((line_no, body.split()))
    if not rows:
        raise MeshParseError(1, "empty mesh file")

    line_no, head = rows[0]
    if head[0] != "mesh2d" or len(head) != 4:
        raise MeshParseError(line_no, "expected header 'mesh2d <nv> <nt> <nb>'")
    try:
        nv, nt, nb = (int(tok) for tok in head[1:])
    except ValueError:
        raise MeshParseError(line_no, "non-integer counts in header") from None
    if len(rows) != 1 + nv + nt + nb:
        raise MeshParseError(line_no, f"expected {nv + nt + nb} record lines, "
                             f"found {len(rows) - 1}")

    def parse(section, count, tag, n_fields, conv, start):
        out = []
        for line_no, toks in rows[start:start + count]:
            if toks[0] != tag or len(toks) != n_fields + 1:
                raise MeshParseError(line_no, f"expected '{tag}' record with "
                                     f"{n_fields} fields in {section} section")
            try:
                out.append([conv(tok) for tok in toks[1:]])
            except ValueError:
                raise MeshParseError(line_no,
                                     f"malformed {section} record") from None
        return out

    verts = parse("vertex", nv, "v", 2, float, 1)
    tris = parse("triangle", nt, "t", 3, int, 1 + nv)
    bedges = parse("boundary", nb, "b", 3, int, 1 + nv + nt)

    for off, recs, width in ((1 + nv, tris, 3), (1 + nv + nt, bedges, 2)):
        for k, rec in enumerate(recs):
            for idx in rec[:width]:
                if not 0 <= idx < nv:
                    raise MeshParseError(rows[off + k][0],
                                         f"vertex index {idx} out of range")

    boundary_order = _chain_boundary(np.array(bedges, dtype=np.int64))
    mesh = _make_mesh(np.array(verts, dtype=np.float64).reshape(nv, 2),
                      np.array(tris, dtype=np.int64).reshape(nt, 3),
                      np.array(bedges, dtype=np.int64).reshape(nb, 3),
                      boundary_order)
    validate(mesh)
    return mesh


def _chain_boundary(bedges):
    """Order boundary vertices by walking the directed edge cycle, starting
    from the smallest vertex index (canonical and deterministic)."""
    if len(bedges) == 0:
        return np.array([], dtype=np.int64)
    nxt = {}
    for i, j, _ in bedges:
        if int(i) in nxt:
            raise MeshError(f"vertex {i} starts two boundary edges")
        nxt[int(i)] = int(j)
    start = min(nxt)
    order = [start]
    while True:
        cur = nxt.get(order[-1])
        if cur is None:
            raise MeshError("boundary edges do not form a closed chain")
        if cur == start:
            break
        order.append(cur)
        if len(order) > len(bedges):
            raise MeshError("boundary edges do not form a single cycle")
    if len(order) != len(bedges):
        raise MeshError("boundary edges form more than one cycle")
    return np.array(order, dtype=np.int64)
