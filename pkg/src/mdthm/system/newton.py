"""Monolithic semismooth Newton iteration and the direct linear solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from mdthm import contact as ct
from mdthm.system.assembly import Assembler, IterationCache, Loads
from mdthm.system.dofs import LAM, State


class SolverFailure(RuntimeError):
    pass


class DirectSolver:
    """Sparse LU with row/column equilibration and a verified residual bound.

    Column scales carry the characteristic magnitude of each unknown
    (displacements in metres against tractions in pascals differ by many
    orders); without them the traction columns are numerically invisible
    after row equilibration.
    """

    def __init__(self, tol: float = 1e-10):
        self.tol = tol

    def solve(self, A: sps.spmatrix, b: np.ndarray,
              col_scale: np.ndarray | None = None) -> np.ndarray:
        b_norm = np.linalg.norm(b)
        if b_norm == 0.0:
            return np.zeros_like(b)
        A = A.tocsr()
        cs = np.ones(A.shape[1]) if col_scale is None else np.asarray(col_scale)
        ac = A @ sps.diags(cs)
        row_max = np.maximum(np.abs(ac).max(axis=1).toarray().ravel(), 1e-300)
        scaled = (sps.diags(1.0 / row_max) @ ac).tocsc()
        try:
            lu = spla.splu(scaled)
            bs = b / row_max
            y = lu.solve(bs)
            # two rounds of iterative refinement push the componentwise
            # error towards the roundoff of the equilibrated system
            for _ in range(2):
                y += lu.solve(bs - scaled @ y)
        except RuntimeError as err:
            raise SolverFailure(f"sparse factorisation failed: {err}") from err
        x = cs * y
        rel = np.linalg.norm(A @ x - b) / b_norm
        if not np.isfinite(rel) or rel > self.tol:
            raise SolverFailure(
                f"linear solve residual {rel:.3e} exceeds {self.tol:.1e}"
            )
        return x


@dataclass
class NewtonParams:
    max_iterations: int = 50
    increment_tol: float = 1e-10
    contact_tol: float = 1e-8
    residual_floor: float = 1e-11
    scales: dict = field(default_factory=dict)
    damping: float = 1.0
    damping_threshold: float = 0.1


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    increment_history: list
    residual_history: list
    contact_residual: float
    failure: str = ""


def contact_residual_norm(assembler: Assembler, x: np.ndarray,
                          x_prev_step: np.ndarray) -> float:
    """Worst scaled complementarity residual over all fracture cells."""
    mat, dofs = assembler.mat, assembler.dofs
    worst = 0.0
    for sd in assembler.mdg.subdomains_of_dim(1):
        lam = x[dofs.sd(sd.id, LAM)]
        lam_t, lam_n = lam[0::2], lam[1::2]
        jn, jt = _jumps(assembler, x, sd.id)
        jn_prev, jt_prev = _jumps(assembler, x_prev_step, sd.id)
        from mdthm.constitutive import gap as gap_fn

        g = gap_fn(jt, assembler.model, mat.dilation_angle)
        c_n, c_t = ct.residuals(
            lam_t, lam_n, jt, jn, jt_prev, g,
            assembler.c_num[sd.id], mat.friction_coefficient,
        )
        scale = np.maximum(1.0, np.hypot(lam_t, lam_n))
        if c_n.size:
            worst = max(worst, float(np.max(np.abs(c_n) / scale)))
            worst = max(worst, float(np.max(np.abs(c_t) / scale**2)))
    return worst


def _jumps(assembler, x, frac_id):
    return assembler.jumps_of(x, frac_id)


PRIMARY_VARIABLES = ("u", "u_m", "p", "T", "lam")


def scaled_increment(assembler: Assembler, dx: np.ndarray,
                     scales: dict) -> float:
    """Scaled infinity norm of the primary-variable update.

    The convergence weights cover displacement, pressure, temperature and
    contact traction; the interface fluxes are linear consequences of those
    fields and follow them to the solver's precision floor.
    """
    worst = 0.0
    for (kind, ident, var), sl in assembler.dofs.blocks():
        if var not in PRIMARY_VARIABLES:
            continue
        k = scales.get(var, 1.0)
        if sl.stop > sl.start:
            worst = max(worst, float(np.abs(dx[sl]).max()) / k)
    return worst


def newton_solve(assembler: Assembler, state: State, dt: float, steady: bool,
                 loads: Loads, params: NewtonParams,
                 solver: DirectSolver | None = None) -> NewtonReport:
    """Iterate the lagged-coefficient linearisation to a fixed point.

    Each iteration reclassifies the contact sets, refreshes apertures,
    specific volumes, densities, fracture permeabilities and advective
    fluxes from the previous iterate, reassembles and solves the monolithic
    system for the full next iterate.
    """
    solver = solver or DirectSolver()
    cache: IterationCache | None = None
    inc_hist, res_hist = [], []
    last_inc = np.inf

    for it in range(params.max_iterations + 1):
        state.start_iteration()
        cache = assembler.build_cache(
            state, loads, prev_cache=cache, damping=params.damping,
            damping_threshold=params.damping_threshold,
        )
        A, b = assembler.assemble(state, cache, dt, steady, loads)
        residual = A @ state.current - b
        row_scale = np.abs(A) @ _scale_vector(assembler, params.scales) + 1e-300
        res_scaled = float(np.max(np.abs(residual) / row_scale))
        res_hist.append(res_scaled)
        contact_res = contact_residual_norm(assembler, state.current, state.prev_step)

        contact_ok = contact_res <= params.contact_tol
        converged = (it > 0 and last_inc <= params.increment_tol and contact_ok) or (
            res_scaled <= params.residual_floor and contact_ok
        )
        if converged:
            _check_apertures(assembler, state.current)
            return NewtonReport(True, it, inc_hist, res_hist, contact_res)
        if it == params.max_iterations:
            return NewtonReport(
                False, it, inc_hist, res_hist, contact_res,
                failure="iteration cap exceeded",
            )
        try:
            x_new = solver.solve(A, b, _scale_vector(assembler, params.scales))
        except SolverFailure as err:
            return NewtonReport(
                False, it, inc_hist, res_hist, contact_res, failure=str(err)
            )
        dx = x_new - state.current
        last_inc = scaled_increment(assembler, dx, params.scales)
        inc_hist.append(last_inc)
        state.current[:] = x_new
    return NewtonReport(False, params.max_iterations, inc_hist, res_hist,
                        np.inf, failure="unreachable")


def _scale_vector(assembler: Assembler, scales: dict) -> np.ndarray:
    out = np.ones(assembler.dofs.num_dofs)
    for (kind, ident, var), sl in assembler.dofs.blocks():
        out[sl] = scales.get(var, 1.0)
    return out


def _check_apertures(assembler: Assembler, x: np.ndarray):
    """Converged states must satisfy nonpenetration strictly."""
    for sd in assembler.mdg.subdomains_of_dim(1):
        jn, jt = assembler.jumps_of(x, sd.id)
        a = assembler.aperture_of(jt, jn)
        if np.any(a <= 0):
            raise ct.ContactError(
                f"nonpositive aperture on fracture subdomain {sd.id} at a "
                "converged state: nonpenetration is violated"
            )
