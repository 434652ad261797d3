"""File output: legacy-ASCII VTK snapshots and deterministic CSV series."""

from __future__ import annotations

import os

import numpy as np

from mdthm.constitutive import gap as gap_fn
from mdthm.contact import classify
from mdthm.mdmesh import MixedDimGrid, SubdomainGrid
from mdthm.system import Assembler, State

VTK_TYPES = {1: 1, 2: 3, 3: 5, 4: 9}  # nodes per cell -> vtk cell type


def _fmt(x):
    return np.format_float_scientific(x, precision=17)


def write_vtk(path, sd: SubdomainGrid, cell_data: dict):
    """One subdomain snapshot as a legacy unstructured-grid VTK file."""
    lines = ["# vtk DataFile Version 3.0", "mdthm snapshot", "ASCII",
             "DATASET UNSTRUCTURED_GRID"]
    if sd.dim == 0:
        pts = sd.cell_centers
        lines.append(f"POINTS 1 double")
        lines.append(f"{_fmt(pts[0, 0])} {_fmt(pts[1, 0])} 0.0")
        lines.append("CELLS 1 2")
        lines.append("1 0")
        lines.append("CELL_TYPES 1")
        lines.append("1")
    else:
        lines.append(f"POINTS {sd.num_nodes} double")
        for i in range(sd.num_nodes):
            lines.append(f"{_fmt(sd.nodes[0, i])} {_fmt(sd.nodes[1, i])} 0.0")
        conn = sd.cell_nodes
        total = sum(len(p) + 1 for p in conn)
        lines.append(f"CELLS {sd.num_cells} {total}")
        for poly in conn:
            lines.append(str(len(poly)) + " " + " ".join(str(int(n)) for n in poly))
        lines.append(f"CELL_TYPES {sd.num_cells}")
        for poly in conn:
            lines.append(str(VTK_TYPES[len(poly)]))
    lines.append(f"CELL_DATA {sd.num_cells}")
    for name, values in cell_data.items():
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 2:
            lines.append(f"VECTORS {name} double")
            for c in range(sd.num_cells):
                lines.append(f"{_fmt(arr[0, c])} {_fmt(arr[1, c])} 0.0")
        else:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            for c in range(sd.num_cells):
                lines.append(_fmt(arr[c]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def snapshot_fields(assembler: Assembler, state: State) -> dict:
    """Cellwise output fields per subdomain at the current state."""
    mdg, dofs, mat = assembler.mdg, assembler.dofs, assembler.mat
    out = {}
    for sd in mdg.subdomains:
        data = {
            "pressure": state.current[dofs.sd(sd.id, "p")],
            "temperature": state.current[dofs.sd(sd.id, "T")],
        }
        if sd.dim == 2:
            u = state.current[dofs.sd(sd.id, "u")]
            data["displacement"] = np.vstack([u[0::2], u[1::2]])
        elif sd.dim == 1:
            lam = state.current[dofs.sd(sd.id, "lam")]
            jn, jt = assembler.jumps_of(state.current, sd.id)
            jn_prev, jt_prev = assembler.jumps_of(state.prev_step, sd.id)
            g = gap_fn(jt, assembler.model, mat.dilation_angle)
            a = assembler.aperture_of(jt, jn)
            states = classify(lam[0::2], lam[1::2], jt, jn, jt_prev, g,
                              assembler.c_num[sd.id], mat.friction_coefficient)
            cumulative = classify(lam[0::2], lam[1::2], jt, jn,
                                  np.zeros_like(jt), g,
                                  assembler.c_num[sd.id], mat.friction_coefficient)
            n_vec, tau_vec = assembler.basis[sd.id]
            data["traction"] = (tau_vec * lam[0::2] + n_vec * lam[1::2])
            data["jump"] = tau_vec * jt + n_vec * jn
            data["jump_tangential"] = jt
            data["jump_normal"] = jn
            data["aperture"] = a
            data["contact_state"] = states.astype(float)
            data["contact_state_cumulative"] = cumulative.astype(float)
        else:
            cache_aps = {}
            for f in mdg.subdomains_of_dim(1):
                jnf, jtf = assembler.jumps_of(state.current, f.id)
                cache_aps[f.id] = assembler.aperture_of(jtf, jnf)
            data["aperture"] = mdg.inherit_aperture(sd.id, cache_aps)
        out[sd.id] = data
    return out


class RunWriter:
    """Collects per-step outputs of one simulation run."""

    def __init__(self, out_dir, assembler: Assembler, every: int = 1):
        self.out_dir = out_dir
        self.assembler = assembler
        self.every = max(int(every), 1)
        self.count = 0
        self.rows = []
        self.balance_rows = []
        os.makedirs(os.path.join(out_dir, "vtk"), exist_ok=True)

    def write_snapshot(self, state: State, time: float):
        fields = snapshot_fields(self.assembler, state)
        for sd in self.assembler.mdg.subdomains:
            path = os.path.join(
                self.out_dir, "vtk",
                f"subdomain_{sd.id}_step_{self.count:05d}.vtk",
            )
            write_vtk(path, sd, fields[sd.id])

    def observe(self, record, state: State):
        mdg, dofs = self.assembler.mdg, self.assembler.dofs
        for sd in mdg.subdomains_of_dim(1):
            jn, jt = self.assembler.jumps_of(state.current, sd.id)
            w = sd.cell_volumes / sd.cell_volumes.sum()
            l2_t = float(np.sqrt(np.sum(jt**2 * w)))
            l2_n = float(np.sqrt(np.sum(jn**2 * w)))
            self.rows.append((record.time, sd.frac_num, l2_t, l2_n,
                              record.newton.iterations))
        if record.balance is not None:
            self.balance_rows.append(
                (record.time, record.balance.mass_residual,
                 record.balance.energy_residual)
            )
        if self.count % self.every == 0:
            self.write_snapshot(state, record.time)
        self.count += 1

    def finalize(self):
        path = os.path.join(self.out_dir, "timeseries.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("time_s,fracture_id,l2_jump_t_m,l2_jump_n_m,newton_iters\n")
            for t, fid, l2t, l2n, iters in self.rows:
                fh.write(f"{_fmt(t)},{fid},{_fmt(l2t)},{_fmt(l2n)},{iters}\n")
        if self.balance_rows:
            path = os.path.join(self.out_dir, "balance.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("time_s,mass_residual_m3,energy_residual_J\n")
                for t, m, e in self.balance_rows:
                    fh.write(f"{_fmt(t)},{_fmt(m)},{_fmt(e)}\n")
