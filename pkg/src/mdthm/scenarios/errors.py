"""Grid-refinement error metrics for the convergence studies.

Coarse solutions are projected onto the reference grid through the nested
containment map (piecewise-constant injection); the error of a variable is

    e = || projected difference ||_2 / (N_ref * k)

with N_ref the number of reference cells of the subdomain and k the
variable's characteristic magnitude taken from the boundary data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mdthm.mdmesh import MixedDimGrid, containment_map


def weighted_l2_error(diff: np.ndarray, n_ref: int, k: float) -> float:
    d = np.asarray(diff, dtype=float)
    if d.ndim == 2:
        d = np.hypot(d[0], d[1])
    return float(np.sqrt(np.sum(d * d)) / (n_ref * k))


@dataclass
class ErrorReport:
    """Errors per refinement level and observed orders between them.

    errors[level][key] with key = (subdomain index, variable name);
    orders[key] lists log2 ratios of consecutive level errors.
    """

    levels: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    orders: dict = field(default_factory=dict)

    def observed_orders(self):
        keys = set()
        for table in self.errors:
            keys.update(table)
        out = {}
        for key in sorted(keys):
            seq = [table.get(key) for table in self.errors]
            vals = []
            for a, b in zip(seq[:-1], seq[1:]):
                if a is None or b is None or a <= 1e-14 or b <= 1e-14:
                    vals.append(None)
                else:
                    vals.append(float(np.log2(a / b)))
            out[key] = vals
        self.orders = out
        return out

    def minimum_order(self, variables, exclude_subdomains=()):
        worst = np.inf
        for (sd, var), seq in self.orders.items():
            if var not in variables or sd in exclude_subdomains:
                continue
            tail = [v for v in seq if v is not None]
            if tail:
                worst = min(worst, tail[-1])
        return worst


def project_field(maps, sd_index, values):
    """Inject a coarse cellwise field onto the reference grid's cells."""
    idx = maps[sd_index]
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 2:
        return vals[:, idx]
    return vals[idx]


def compare_states(coarse_mdg: MixedDimGrid, ref_mdg: MixedDimGrid,
                   coarse_fields: dict, ref_fields: dict, weights: dict) -> dict:
    """Weighted errors of all shared fields between one level and the
    reference. Fields are keyed (subdomain index, variable)."""
    maps = containment_map(coarse_mdg, ref_mdg)
    out = {}
    for key, coarse_vals in coarse_fields.items():
        sd_index, var = key
        ref_vals = ref_fields[key]
        proj = project_field(maps, sd_index, coarse_vals)
        n_ref = ref_mdg.subdomains[sd_index].num_cells
        k = weights[var]
        diff = np.asarray(ref_vals) - proj
        out[key] = weighted_l2_error(diff, n_ref, k)
    return out
