"""Grid containers for the subdomains of a mixed-dimensional mesh.

A 2d grid stores general polygonal cells through face/cell connectivity in
CSR form; 1d grids live on (poly)lines embedded in the plane and 0d grids
are single points of unit measure. Face normals are area weighted and point
out of the face's owner cell (``face_cells[0]``); boundary faces always have
the interior cell as owner so their normals point out of the domain.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps

# Codes for tags["domain_side"]
SIDE_NONE, SIDE_LEFT, SIDE_RIGHT, SIDE_BOTTOM, SIDE_TOP = 0, 1, 2, 3, 4
SIDE_NAMES = {"left": SIDE_LEFT, "right": SIDE_RIGHT, "bottom": SIDE_BOTTOM, "top": SIDE_TOP}


class MeshError(ValueError):
    """Raised for topologically or geometrically invalid mesh input."""


class SubdomainGrid:
    """One subdomain of the mixed-dimensional grid.

    Attributes of a 2d grid:
        nodes: (2, n_nodes) coordinates.
        face_nodes: (2, n_faces) node indices of each face segment.
        face_cells: (2, n_faces) owner / neighbour (-1 on boundaries).
        cell_nodes: list of node-index arrays, counterclockwise per cell.
    1d grids use single-node faces (``face_nodes`` of shape (1, n_faces)),
    0d grids carry a single cell and no faces.
    """

    def __init__(self, dim: int, sd_id: int = -1):
        self.dim = dim
        self.id = sd_id
        self.num_cells = 0
        self.num_faces = 0
        self.num_nodes = 0
        self.nodes = np.zeros((2, 0))
        self.face_nodes = np.zeros((2, 0), dtype=int)
        self.face_cells = np.zeros((2, 0), dtype=int)
        self.cell_nodes: list[np.ndarray] = []
        # geometry, filled by compute_geometry
        self.cell_centers = np.zeros((2, 0))
        self.cell_volumes = np.zeros(0)
        self.face_centers = np.zeros((2, 0))
        self.face_normals = np.zeros((2, 0))
        self.face_areas = np.zeros(0)
        self.tags: dict[str, np.ndarray] = {}
        # fracture index within the mixed-dimensional grid (1d grids)
        self.frac_num = -1

    # ------------------------------------------------------------------
    def compute_geometry(self) -> None:
        if self.dim == 2:
            self._geometry_2d()
        elif self.dim == 1:
            self._geometry_1d()
        else:
            self.cell_volumes = np.ones(self.num_cells)
        self._default_tags()

    def _default_tags(self):
        for key, dtype in (("domain_side", np.int8), ("internal", bool)):
            if key not in self.tags:
                self.tags[key] = np.zeros(self.num_faces, dtype=dtype)

    def _geometry_2d(self):
        x = self.nodes
        self.cell_centers = np.zeros((2, self.num_cells))
        self.cell_volumes = np.zeros(self.num_cells)
        for c, poly in enumerate(self.cell_nodes):
            px, py = x[0, poly], x[1, poly]
            cross = px * np.roll(py, -1) - np.roll(px, -1) * py
            area = 0.5 * cross.sum()
            if area <= 0:
                raise MeshError(f"cell {c} has nonpositive area {area}")
            cx = ((px + np.roll(px, -1)) * cross).sum() / (6.0 * area)
            cy = ((py + np.roll(py, -1)) * cross).sum() / (6.0 * area)
            self.cell_volumes[c] = area
            self.cell_centers[:, c] = (cx, cy)

        a, b = self.face_nodes
        self.face_centers = 0.5 * (x[:, a] + x[:, b])
        t = x[:, b] - x[:, a]
        self.face_areas = np.hypot(t[0], t[1])
        if np.any(self.face_areas <= 0):
            raise MeshError("degenerate face of zero length")
        normals = np.vstack([t[1], -t[0]])
        # orient out of the owner cell
        owner = self.face_cells[0]
        to_face = self.face_centers - self.cell_centers[:, owner]
        flip = (normals * to_face).sum(axis=0) < 0
        normals[:, flip] *= -1.0
        self.face_normals = normals

    def _geometry_1d(self):
        x = self.nodes
        fn = self.face_nodes[0]
        self.face_centers = x[:, fn]
        self.face_areas = np.ones(self.num_faces)
        # cell geometry from the stored endpoint nodes
        self.cell_centers = np.zeros((2, self.num_cells))
        self.cell_volumes = np.zeros(self.num_cells)
        for c, poly in enumerate(self.cell_nodes):
            pa, pb = x[:, poly[0]], x[:, poly[1]]
            self.cell_centers[:, c] = 0.5 * (pa + pb)
            self.cell_volumes[c] = np.hypot(*(pb - pa))
        if np.any(self.cell_volumes <= 0):
            raise MeshError("degenerate 1d cell of zero length")
        owner = self.face_cells[0]
        t = self.face_centers - self.cell_centers[:, owner]
        norm = np.hypot(t[0], t[1])
        self.face_normals = t / norm

    # ------------------------------------------------------------------
    def cell_faces_csr(self) -> tuple[sps.csr_matrix, sps.csr_matrix]:
        """Signed and unsigned cell-face incidence (cells x faces).

        The signed matrix carries +1 where the face normal points out of the
        cell and -1 where it points in; its transpose is the discrete
        divergence acting on face quantities.
        """
        owner, nbr = self.face_cells
        rows = [owner]
        cols = [np.arange(self.num_faces)]
        vals = [np.ones(self.num_faces)]
        interior = nbr >= 0
        rows.append(nbr[interior])
        cols.append(np.arange(self.num_faces)[interior])
        vals.append(-np.ones(interior.sum()))
        signed = sps.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.num_cells, self.num_faces),
        )
        unsigned = signed.copy()
        unsigned.data = np.abs(unsigned.data)
        return signed, unsigned

    def boundary_faces(self) -> np.ndarray:
        return np.where(self.face_cells[1] < 0)[0]

    def exterior_faces(self) -> np.ndarray:
        """Boundary faces on the domain boundary (not fracture walls)."""
        return np.where((self.face_cells[1] < 0) & ~self.tags["internal"])[0]

    def check_closure(self, tol: float = 1e-12) -> float:
        """Max relative defect of the per-cell sum of outward area normals."""
        signed, _ = self.cell_faces_csr()
        if self.num_faces == 0:
            return 0.0
        defect = np.abs(signed @ self.face_normals.T)
        scale = np.maximum((np.abs(signed) @ self.face_areas)[:, None], 1e-300)
        return float((defect / scale).max())

    def __repr__(self):
        return (
            f"SubdomainGrid(dim={self.dim}, cells={self.num_cells}, "
            f"faces={self.num_faces}, nodes={self.num_nodes})"
        )


def make_2d_grid(nodes: np.ndarray, cell_nodes: list[np.ndarray]) -> SubdomainGrid:
    """Assemble a 2d grid from node coordinates and ccw cell polygons."""
    g = SubdomainGrid(2)
    g.nodes = np.asarray(nodes, dtype=float)
    g.num_nodes = g.nodes.shape[1]
    g.cell_nodes = [np.asarray(p, dtype=int) for p in cell_nodes]
    g.num_cells = len(g.cell_nodes)

    face_of = {}
    face_nodes = []
    face_cells = []
    for c, poly in enumerate(g.cell_nodes):
        for k in range(len(poly)):
            a, b = int(poly[k]), int(poly[(k + 1) % len(poly)])
            key = (a, b) if a < b else (b, a)
            f = face_of.get(key)
            if f is None:
                face_of[key] = len(face_nodes)
                face_nodes.append(key)
                face_cells.append([c, -1])
            else:
                if face_cells[f][1] >= 0:
                    raise MeshError(f"face {key} shared by more than two cells")
                face_cells[f][1] = c
    g.face_nodes = np.array(face_nodes, dtype=int).T.reshape(2, -1)
    g.face_cells = np.array(face_cells, dtype=int).T.reshape(2, -1)
    g.num_faces = g.face_nodes.shape[1]
    g.compute_geometry()
    return g


def make_0d_grid(point: np.ndarray, sd_id: int = -1) -> SubdomainGrid:
    g = SubdomainGrid(0, sd_id)
    g.num_cells = 1
    g.nodes = np.asarray(point, dtype=float).reshape(2, 1)
    g.num_nodes = 1
    g.cell_centers = g.nodes.copy()
    g.compute_geometry()
    return g
