"""Subcell topology for node-based finite-volume discretisations on 2d grids.

Every face is halved at its midpoint into two subfaces, one per end node.
The interaction region of a node collects the adjacent subcells (one per
incident cell) and subfaces; gradients are piecewise constant per subcell
and continuity is enforced at a point on each subface, placed a relative
offset ``eta`` from the face centre towards the node.
"""

from __future__ import annotations

import numpy as np

from mdthm.mdmesh.grids import MeshError, SubdomainGrid


class SubcellTopology:
    def __init__(self, grid: SubdomainGrid, eta: float = 1.0 / 3.0):
        if grid.dim != 2:
            raise MeshError("subcell topology requires a 2d grid")
        self.grid = grid
        self.eta = eta

        # subcells: unique (cell, node) incidences sorted by (node, cell)
        cells, nodes = [], []
        for c, poly in enumerate(grid.cell_nodes):
            cells.extend([c] * len(poly))
            nodes.extend(poly.tolist())
        cells = np.asarray(cells)
        nodes = np.asarray(nodes)
        order = np.lexsort((cells, nodes))
        self.sc_cell = cells[order]
        self.sc_node = nodes[order]
        self.num_subcells = self.sc_cell.size
        self._sc_keys = self.sc_node * grid.num_cells + self.sc_cell

        # subfaces sorted by node
        nf = grid.num_faces
        sf_face = np.repeat(np.arange(nf), 2)
        sf_node = grid.face_nodes.T.ravel()
        order = np.lexsort((sf_face, sf_node))
        self.sf_face = sf_face[order]
        self.sf_node = sf_node[order]
        self.num_subfaces = self.sf_face.size
        self.sf_owner = grid.face_cells[0, self.sf_face]
        self.sf_nbr = grid.face_cells[1, self.sf_face]
        self.sf_boundary = self.sf_nbr < 0
        self.sc_of_owner = self.subcell_index(self.sf_owner, self.sf_node)
        self.sc_of_nbr = np.full(self.num_subfaces, -1)
        interior = ~self.sf_boundary
        self.sc_of_nbr[interior] = self.subcell_index(
            self.sf_nbr[interior], self.sf_node[interior]
        )

        # geometry: half normals (owner-outward) and continuity points
        self.sf_normal = 0.5 * grid.face_normals[:, self.sf_face]
        fc = grid.face_centers[:, self.sf_face]
        xn = grid.nodes[:, self.sf_node]
        self.sf_cont_pt = fc + eta * (xn - fc)

        # group subcells and subfaces by node
        self.node_ids, sc_counts = np.unique(self.sc_node, return_counts=True)
        self.sc_node_ptr = np.concatenate([[0], np.cumsum(sc_counts)])
        # position of each node in the compressed node list
        node_pos = np.full(grid.num_nodes, -1)
        node_pos[self.node_ids] = np.arange(self.node_ids.size)
        self.node_pos = node_pos
        self.sc_local = np.arange(self.num_subcells) - self.sc_node_ptr[
            node_pos[self.sc_node]
        ]
        sf_counts = np.bincount(node_pos[self.sf_node], minlength=self.node_ids.size)
        self.sf_node_ptr = np.concatenate([[0], np.cumsum(sf_counts)])

        # subcell volumes (cell centre, face centres, node quadrilateral)
        self.sc_volume = self._subcell_volumes()

    def subcell_index(self, cell, node):
        keys = np.asarray(node) * self.grid.num_cells + np.asarray(cell)
        idx = np.searchsorted(self._sc_keys, keys)
        if np.any(self._sc_keys[np.clip(idx, 0, self.num_subcells - 1)] != keys):
            raise MeshError("unknown (cell, node) incidence")
        return idx

    def _subcell_volumes(self):
        g = self.grid
        vol = np.zeros(self.num_subcells)
        # the two subfaces adjacent to each subcell supply the face centres
        corners = {}
        for sf in range(self.num_subfaces):
            for sc in (self.sc_of_owner[sf], self.sc_of_nbr[sf]):
                if sc >= 0:
                    corners.setdefault(sc, []).append(g.face_centers[:, self.sf_face[sf]])
        for sc, pts in corners.items():
            if len(pts) != 2:
                raise MeshError(
                    f"node {self.sc_node[sc]} of cell {self.sc_cell[sc]} has "
                    f"{len(pts)} incident subfaces, expected 2"
                )
            xc = g.cell_centers[:, self.sc_cell[sc]]
            xn = g.nodes[:, self.sc_node[sc]]
            quad = np.array([xc, pts[0], xn, pts[1]])
            x, y = quad[:, 0], quad[:, 1]
            vol[sc] = 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        return vol

    def equation_layout(self, is_dir: np.ndarray):
        """Row bookkeeping of the per-node local systems.

        Interior subfaces carry a flux and a potential continuity equation,
        boundary subfaces carry one equation whose kind depends on the face's
        boundary condition. Returns per-subface primary row ids (the flux /
        boundary row) plus, for interior subfaces, the potential row, along
        with the per-node equation offsets.
        """
        n_eq_sf = np.where(self.sf_boundary, 1, 2)
        node_eq_counts = np.zeros(self.node_ids.size, dtype=int)
        np.add.at(node_eq_counts, self.node_pos[self.sf_node], n_eq_sf)
        # a gradient has two components, so each subcell balances two
        # continuity conditions
        node_unknowns = 2 * np.diff(self.sc_node_ptr)
        if not np.array_equal(node_eq_counts, node_unknowns):
            bad = self.node_ids[node_eq_counts != node_unknowns]
            raise MeshError(f"unbalanced interaction region at nodes {bad[:5]}")
        node_eq_ptr = np.concatenate([[0], np.cumsum(node_eq_counts)])

        row_primary = np.zeros(self.num_subfaces, dtype=int)
        row_secondary = np.full(self.num_subfaces, -1)
        for pos in range(self.node_ids.size):
            lo, hi = self.sf_node_ptr[pos], self.sf_node_ptr[pos + 1]
            nxt = 0
            for sf in range(lo, hi):
                row_primary[sf] = nxt
                nxt += 1
                if not self.sf_boundary[sf]:
                    row_secondary[sf] = nxt
                    nxt += 1
        return row_primary, row_secondary, node_eq_ptr

    def overdetermined_layout(self, conditions_interior: int):
        """Row bookkeeping with several conditions per interior subface.

        Used by the vector scheme, whose interior subfaces carry one traction
        condition plus continuity at two points; the resulting rectangular
        local systems are solved by least squares, which removes the spurious
        rotation modes of perfectly repetitive lattices. Boundary subfaces
        keep a single condition. Returns per-subface condition offsets of
        shape (n_subfaces, conditions_interior) (-1 where absent) and the
        per-node condition offsets.
        """
        n_eq_sf = np.where(self.sf_boundary, 1, conditions_interior)
        node_eq_counts = np.zeros(self.node_ids.size, dtype=int)
        np.add.at(node_eq_counts, self.node_pos[self.sf_node], n_eq_sf)
        node_eq_ptr = np.concatenate([[0], np.cumsum(node_eq_counts)])
        rows = np.full((self.num_subfaces, conditions_interior), -1)
        for pos in range(self.node_ids.size):
            lo, hi = self.sf_node_ptr[pos], self.sf_node_ptr[pos + 1]
            nxt = 0
            for sf in range(lo, hi):
                count = 1 if self.sf_boundary[sf] else conditions_interior
                for k in range(count):
                    rows[sf, k] = nxt
                    nxt += 1
        return rows, node_eq_ptr
