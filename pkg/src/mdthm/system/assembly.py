"""Monolithic assembly of the coupled mixed-dimensional system.

One call produces the sparse matrix and right-hand side of the linearised
system in all unknowns at the next iterate. Nonlinear coefficients
(apertures, specific volumes, densities, advective fluxes, fracture
permeabilities, contact sets) are taken from the previous iterate through
an :class:`IterationCache`; the volume-change term of the fracture balances
keeps its mortar-displacement part implicit, with the slip-dependent
remainder of the one-way dilation model lagged on the right-hand side.

Sign conventions: mortar fluid/heat fluxes are total fluxes per mortar cell,
positive from the higher-dimensional side into the lower-dimensional one;
they enter the high side as Neumann data on the duplicated faces and the
low side as a source. Boundary Neumann data is the total outward flux or
traction per face.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from mdthm import contact as ct
from mdthm.constitutive import (
    DilationModel,
    MaterialSet,
    cubic_law,
    dgap as dgap_fn,
    fluid_density,
    gap as gap_fn,
    specific_volume,
)
from mdthm.fvm import (
    BoundaryCondition,
    mpfa_discretize,
    mpsa_discretize,
    onedim_discretize,
    upwind_matrices,
)
from mdthm.mdmesh import MixedDimGrid
from mdthm.system.dofs import LAM, NU, NU_ADV, NU_COND, P, T, U, U_MORTAR, DofMap, State

MECH, FLOW, HEAT = "mech", "flow", "heat"


@dataclass
class Loads:
    """Boundary data and sources for one time step (external slots only)."""

    bc_mech: np.ndarray
    bc_mech_prev: np.ndarray
    bc_flow: dict[int, np.ndarray]
    bc_heat: dict[int, np.ndarray]
    well_rates: dict[int, np.ndarray] = field(default_factory=dict)
    well_T_injection: dict[int, np.ndarray] = field(default_factory=dict)


@dataclass
class IterationCache:
    """Lagged nonlinear quantities evaluated at the previous iterate."""

    jumps: dict  # frac id -> (jump_t, jump_n)
    gaps: dict
    dgaps: dict
    apertures: dict  # sd id -> cellwise aperture (fractures and points)
    spec_vol: dict  # sd id -> cellwise specific volume (all subdomains)
    density: dict  # sd id -> cellwise fluid density
    face_flux: dict  # sd id -> cached (possibly damped) fluid face fluxes
    mortar_flux: dict  # intf id -> cached mortar fluid fluxes
    frac_flow_ops: dict
    frac_heat_ops: dict
    contact_state: dict
    sign_flip_fraction: float = 0.0


class Assembler:
    def __init__(self, mdg: MixedDimGrid, mat: MaterialSet,
                 dilation_model: DilationModel, bc_types: dict,
                 c_num: dict | None = None, use_stabilization: bool = True):
        self.mdg = mdg
        self.mat = mat
        self.model = dilation_model
        self.dofs = DofMap(mdg)
        self.use_stabilization = use_stabilization

        g2 = mdg.matrix
        self.matrix = g2
        self.div2, _ = g2.cell_faces_csr()
        self.div2_vec = sps.kron(self.div2, sps.eye(2)).tocsr()

        # boundary condition types; internal faces are mechanical Dirichlet
        # and scalar Neumann by construction
        internal = g2.tags["internal"]
        mech_dir = bc_types[MECH].copy()
        mech_dir[internal] = True
        flow_dir = bc_types[FLOW].copy()
        flow_dir[internal] = False
        heat_dir = bc_types[HEAT].copy()
        heat_dir[internal] = False
        self.bc = {MECH: BoundaryCondition(mech_dir),
                   FLOW: BoundaryCondition(flow_dir),
                   HEAT: BoundaryCondition(heat_dir)}
        self.frac_bc = {}
        for sd in mdg.subdomains_of_dim(1):
            fdir = bc_types.get(("frac", sd.id, FLOW))
            hdir = bc_types.get(("frac", sd.id, HEAT))
            fdir = np.zeros(sd.num_faces, bool) if fdir is None else fdir.copy()
            hdir = np.zeros(sd.num_faces, bool) if hdir is None else hdir.copy()
            fdir[sd.tags["internal"]] = False
            hdir[sd.tags["internal"]] = False
            self.frac_bc[sd.id] = {FLOW: BoundaryCondition(fdir),
                                   HEAT: BoundaryCondition(hdir)}

        lam2d = mat.lame_lambda
        self.mech_ops = mpsa_discretize(
            g2, mat.shear_modulus, lam2d, mat.biot_alpha,
            mat.thermal_stress_coefficient, self.bc[MECH],
        )
        self.flow_ops = mpfa_discretize(
            g2, mat.matrix_permeability / mat.viscosity, self.bc[FLOW]
        )
        kappa_eff = mat.effective(mat.conductivity_solid, mat.conductivity_fluid)
        self.heat_ops = mpfa_discretize(g2, kappa_eff, self.bc[HEAT])

        # fracture bases and projections
        self.basis = {sd.id: mdg.fracture_basis(sd.id)
                      for sd in mdg.subdomains_of_dim(1)}
        # The traction/displacement scaling c of the contact conditions is a
        # numerical parameter; taking it of the order of the elastic wall
        # stiffness G / (fracture length) keeps the active-set iteration out
        # of stick/glide limit cycles, which appear when c far exceeds that
        # stiffness. Grid-independent on purpose.
        self.c_num = {}
        for sd in mdg.subdomains_of_dim(1):
            if c_num and sd.id in c_num:
                self.c_num[sd.id] = np.broadcast_to(
                    np.asarray(c_num[sd.id], float), (sd.num_cells,)
                )
            else:
                length = float(np.sum(sd.cell_volumes))
                self.c_num[sd.id] = np.full(
                    sd.num_cells, mat.shear_modulus / length
                )

        self.mf_interfaces = [i for i in mdg.interfaces
                              if mdg.subdomain(i.high_id).dim == 2]
        self.f0_interfaces = [i for i in mdg.interfaces
                              if mdg.subdomain(i.high_id).dim == 1]
        self._precompute_static()

    def _precompute_static(self):
        """Freeze every state-independent sparse composition.

        The matrix discretisations never change during a run, so products of
        divergences, boundary operators and mortar projections are built
        once; only the fracture operators are recomposed per iteration.
        """
        mdg = self.mdg
        nf, nc = self.matrix.num_faces, self.matrix.num_cells
        self.proj_scalar = {}
        self.proj_vec = {}
        self.lift_scalar = {}
        self.lift_vec = {}
        for intf in mdg.interfaces:
            high = mdg.subdomain(intf.high_id)
            self.proj_scalar[intf.id] = intf.from_mortar_high(high.num_faces)
            self.lift_scalar[intf.id] = intf.to_mortar_high(high.num_faces)
            if high.dim == 2:
                self.proj_vec[intf.id] = intf.from_mortar_high(nf, nd=2)
                self.lift_vec[intf.id] = intf.to_mortar_high(nf, nd=2)
        self.low_proj = {
            intf.id: intf.from_mortar_low(mdg.subdomain(intf.low_id).num_cells)
            for intf in mdg.interfaces
        }

        def traction_bundle(lift):
            ops = self.mech_ops
            bundle = {
                "stress": (lift @ ops.stress).tocsr(),
                "bound": (lift @ ops.bound_stress).tocsr(),
                "grad_p": (lift @ ops.grad_p).tocsr(),
                "grad_T": (lift @ ops.grad_T).tocsr(),
            }
            bundle["bound_proj"] = {
                intf.id: (bundle["bound"] @ self.proj_vec[intf.id]).tocsr()
                for intf in self.mf_interfaces
            }
            return bundle

        self.mom = traction_bundle(self.div2_vec)
        self.traction_lift = {
            intf.id: traction_bundle(self.lift_vec[intf.id])
            for intf in self.mf_interfaces
        }

        self.scalar_static = {}
        for var, ops in ((FLOW, self.flow_ops), (HEAT, self.heat_ops)):
            div_flux = (self.div2 @ ops.flux).tocsr()
            div_bound = (self.div2 @ ops.bound_flux).tocsr()
            entry = {
                "div_flux": div_flux,
                "div_bound": div_bound,
                "div_vsrc": (self.div2 @ ops.vector_source).tocsr(),
                "div_bound_proj": {
                    intf.id: (div_bound @ self.proj_scalar[intf.id]).tocsr()
                    for intf in self.mf_interfaces
                },
            }
            self.scalar_static[var] = entry

        ops = self.mech_ops
        self.divu_static = {
            "bound_proj": {
                intf.id: (ops.bound_div_u @ self.proj_vec[intf.id]).tocsr()
                for intf in self.mf_interfaces
            },
        }

        self.trace_static = {}
        for var, ops in ((FLOW, self.flow_ops), (HEAT, self.heat_ops)):
            for intf in self.mf_interfaces:
                lift = self.lift_scalar[intf.id]
                tf = (lift @ ops.trace_face).tocsr()
                self.trace_static[(var, intf.id)] = {
                    "cell": (lift @ ops.trace_cell).tocsr(),
                    "face": tf,
                    "face_proj": {
                        other.id: (tf @ self.proj_scalar[other.id]).tocsr()
                        for other in self.mf_interfaces
                    },
                    "vsrc": (lift @ ops.trace_vector_source).tocsr(),
                }

    # ------------------------------------------------------------------
    # lagged quantities
    # ------------------------------------------------------------------
    def jumps_of(self, x: np.ndarray, frac_id: int):
        dofs, mdg = self.dofs, self.mdg
        intf_j, intf_k = mdg.fracture_interfaces(frac_id)
        u_j = x[dofs.intf(intf_j.id, U_MORTAR)]
        u_k = x[dofs.intf(intf_k.id, U_MORTAR)]
        return mdg.jump_normal_tangential(frac_id, u_j, u_k)

    def aperture_of(self, jump_t, jump_n):
        mat, model = self.mat, self.model
        a = mat.residual_aperture + jump_n
        if model is DilationModel.ONE_WAY:
            a = a + np.tan(mat.dilation_angle) * np.abs(jump_t)
        return a

    def coefficient_aperture(self, a):
        """Aperture entering coefficients, floored during iteration.

        Intermediate iterates may overshoot into penetration before the
        active set settles; a small positive floor keeps permeabilities and
        interface weights defined. Converged states must satisfy
        nonpenetration, which the Newton driver verifies separately.
        """
        return np.maximum(a, 1e-3 * self.mat.residual_aperture)

    def build_cache(self, state: State, loads: Loads,
                    prev_cache: IterationCache | None = None,
                    damping: float = 1.0,
                    damping_threshold: float = 0.1) -> IterationCache:
        mdg, mat, dofs = self.mdg, self.mat, self.dofs
        x = state.prev_iter
        jumps, gaps, dgaps, apertures, spec_vol = {}, {}, {}, {}, {}
        density, contact_state = {}, {}
        frac_flow_ops, frac_heat_ops = {}, {}

        spec_vol[0] = np.ones(self.matrix.num_cells)
        density[0] = fluid_density(
            x[dofs.sd(0, P)], x[dofs.sd(0, T)], mat
        )
        for sd in mdg.subdomains_of_dim(1):
            jn_jt = self.jumps_of(x, sd.id)
            jump_n, jump_t = jn_jt[0], jn_jt[1]
            jumps[sd.id] = (jump_t, jump_n)
            gaps[sd.id] = gap_fn(jump_t, self.model, mat.dilation_angle)
            dgaps[sd.id] = dgap_fn(jump_t, self.model, mat.dilation_angle)
            a = self.coefficient_aperture(self.aperture_of(jump_t, jump_n))
            apertures[sd.id] = a
            spec_vol[sd.id] = specific_volume(a, 1)
            density[sd.id] = fluid_density(x[dofs.sd(sd.id, P)], x[dofs.sd(sd.id, T)], mat)
            d_flow = spec_vol[sd.id] * cubic_law(a) / mat.viscosity
            d_heat = spec_vol[sd.id] * mat.conductivity_fluid
            frac_flow_ops[sd.id] = onedim_discretize(sd, d_flow, self.frac_bc[sd.id][FLOW])
            frac_heat_ops[sd.id] = onedim_discretize(sd, d_heat, self.frac_bc[sd.id][HEAT])
            # contact classification at the previous iterate
            lam = x[dofs.sd(sd.id, LAM)]
            jn_prev = self.jumps_of(state.prev_step, sd.id)
            contact_state[sd.id] = ct.classify(
                lam[0::2], lam[1::2], jump_t, jump_n, jn_prev[1],
                gaps[sd.id], self.c_num[sd.id], mat.friction_coefficient,
            )
        for sd in mdg.subdomains_of_dim(0):
            a = self.coefficient_aperture(mdg.inherit_aperture(sd.id, apertures))
            apertures[sd.id] = a
            spec_vol[sd.id] = specific_volume(a, 0)
            density[sd.id] = fluid_density(x[dofs.sd(sd.id, P)], x[dofs.sd(sd.id, T)], mat)

        # fluid face fluxes from the previous iterate, optionally damped
        face_flux, mortar_flux = {}, {}
        grav = np.asarray(mat.gravity, float)
        n_flip = n_total = 0
        for sd in mdg.subdomains:
            if sd.dim == 0:
                continue
            ops = self.flow_ops if sd.dim == 2 else frac_flow_ops[sd.id]
            bvals = self._scalar_boundary_values(sd.id, FLOW, loads, x)
            r = np.zeros(2 * sd.num_cells)
            r[0::2] = density[sd.id] * grav[0]
            r[1::2] = density[sd.id] * grav[1]
            q = ops.flux @ x[dofs.sd(sd.id, P)] + ops.bound_flux @ bvals \
                + ops.vector_source @ r
            face_flux[sd.id] = q
        for intf in mdg.interfaces:
            mortar_flux[intf.id] = x[dofs.intf(intf.id, NU)].copy()

        if prev_cache is not None:
            old = prev_cache.face_flux
            flips = sum(
                int(np.sum((np.sign(face_flux[k]) * np.sign(old[k])) < 0))
                for k in face_flux
            )
            total = sum(v.size for v in face_flux.values())
            frac_flipped = flips / max(total, 1)
            if damping < 1.0 and frac_flipped > damping_threshold:
                for k in face_flux:
                    face_flux[k] = damp_advective_flux(old[k], face_flux[k], damping)
                for k in mortar_flux:
                    mortar_flux[k] = damp_advective_flux(
                        prev_cache.mortar_flux[k], mortar_flux[k], damping
                    )
            n_flip, n_total = flips, total

        return IterationCache(
            jumps=jumps, gaps=gaps, dgaps=dgaps, apertures=apertures,
            spec_vol=spec_vol, density=density, face_flux=face_flux,
            mortar_flux=mortar_flux, frac_flow_ops=frac_flow_ops,
            frac_heat_ops=frac_heat_ops, contact_state=contact_state,
            sign_flip_fraction=n_flip / max(n_total, 1),
        )

    def _ext_scalar(self, sd_id, var, loads: Loads):
        """External boundary data with internal (mortar) slots zeroed."""
        sd = self.mdg.subdomain(sd_id)
        table = loads.bc_flow if var == FLOW else loads.bc_heat
        vals = np.array(table.get(sd_id, np.zeros(sd.num_faces)), dtype=float)
        vals[sd.tags["internal"]] = 0.0
        return vals

    def _ext_mech(self, loads_vec):
        vals = np.array(loads_vec, dtype=float)
        internal = np.where(self.matrix.tags["internal"])[0]
        vals[2 * internal] = 0.0
        vals[2 * internal + 1] = 0.0
        return vals

    def _scalar_boundary_values(self, sd_id, var, loads: Loads, x: np.ndarray):
        """External boundary data plus mortar Neumann data on internal faces."""
        vals = self._ext_scalar(sd_id, var, loads)
        mckey = NU if var == FLOW else NU_COND
        for intf in self.mdg.interfaces_of_high(sd_id):
            vals[intf.high_faces] = x[self.dofs.intf(intf.id, mckey)]
        return vals

    def mech_boundary_values(self, loads_vec: np.ndarray, x: np.ndarray):
        vals = self._ext_mech(loads_vec)
        for intf in self.mf_interfaces:
            um = x[self.dofs.intf(intf.id, U_MORTAR)]
            vals[2 * intf.high_faces] = um[0::2]
            vals[2 * intf.high_faces + 1] = um[1::2]
        return vals

    # ------------------------------------------------------------------
    # assembly
    # ------------------------------------------------------------------
    def assemble(self, state: State, cache: IterationCache, dt: float,
                 steady: bool, loads: Loads):
        dofs, mdg, mat = self.dofs, self.mdg, self.mat
        n = dofs.num_dofs
        acc = _Coo(n)
        b = np.zeros(n)
        xp = state.prev_step

        self._matrix_momentum(acc, b, loads)
        self._matrix_mass(acc, b, state, cache, dt, steady, loads)
        self._matrix_energy(acc, b, state, cache, dt, steady, loads)
        for sd in mdg.subdomains_of_dim(1):
            self._fracture_mass(acc, b, sd, state, cache, dt, steady, loads)
            self._fracture_energy(acc, b, sd, state, cache, dt, steady, loads)
            self._contact_rows(acc, b, sd, state, cache)
        for sd in mdg.subdomains_of_dim(0):
            self._point_mass(acc, b, sd, state, cache, dt, steady)
            self._point_energy(acc, b, sd, state, cache, dt, steady)
        for intf in self.mf_interfaces:
            self._traction_balance(acc, b, intf, loads)
        self._interface_flux_rows(acc, b, state, cache, loads)
        return acc.matrix(), b

    # -- matrix equations ------------------------------------------------
    def _momentum_traction_terms(self, acc, b, rows, bundle, loads, sign=1.0):
        """Add sign * (lifted face tractions) to the given rows."""
        dofs, mat = self.dofs, self.mat
        acc.add_mat(rows, dofs.sd(0, U), sign * bundle["stress"])
        acc.add_mat(rows, dofs.sd(0, P), sign * bundle["grad_p"])
        acc.add_mat(rows, dofs.sd(0, T), sign * bundle["grad_T"])
        for intf in self.mf_interfaces:
            acc.add_mat(rows, dofs.intf(intf.id, U_MORTAR),
                        sign * bundle["bound_proj"][intf.id])
        ext = self._ext_mech(loads.bc_mech)
        ones = np.ones(self.matrix.num_cells)
        b_contrib = -sign * (bundle["bound"] @ ext)
        b_contrib += sign * (bundle["grad_p"] @ (mat.reference_pressure * ones))
        b_contrib += sign * (bundle["grad_T"] @ (mat.reference_temperature * ones))
        _add_to(b, rows, b_contrib)

    def _matrix_momentum(self, acc, b, loads):
        g, mat = self.matrix, self.mat
        rows = np.arange(*_span(self.dofs.sd(0, U)))
        self._momentum_traction_terms(acc, b, rows, self.mom, loads)
        grav = np.asarray(mat.gravity, float)
        f = np.zeros(2 * g.num_cells)
        f[0::2] = mat.density_solid * grav[0] * g.cell_volumes
        f[1::2] = mat.density_solid * grav[1] * g.cell_volumes
        _add_to(b, rows, f)

    def _div_u_terms(self, acc, b, rows, weight, state, dt, loads):
        """weight/dt * (div u at new state minus at previous step)."""
        dofs = self.dofs
        ops = self.mech_ops
        w = sps.diags(weight / dt)
        acc.add_mat(rows, dofs.sd(0, U), w @ ops.div_u)
        bd = w @ ops.bound_div_u
        for intf in self.mf_interfaces:
            acc.add_mat(rows, dofs.intf(intf.id, U_MORTAR),
                        w @ self.divu_static["bound_proj"][intf.id])
        if self.use_stabilization:
            acc.add_mat(rows, dofs.sd(0, P), w @ ops.stab_p)
            acc.add_mat(rows, dofs.sd(0, T), w @ ops.stab_T)
        # previous-step value, including its boundary data
        xp = state.prev_step
        prev_bc = self.mech_boundary_values(loads.bc_mech_prev, xp)
        prev = ops.div_u @ xp[dofs.sd(0, U)] + ops.bound_div_u @ prev_bc
        if self.use_stabilization:
            prev = prev + ops.stab_p @ xp[dofs.sd(0, P)] + ops.stab_T @ xp[dofs.sd(0, T)]
        _add_to(b, rows, weight / dt * prev)
        _add_to(b, rows, -(bd @ self._ext_mech(loads.bc_mech)))

    def _matrix_mass(self, acc, b, state, cache, dt, steady, loads):
        g, mat, dofs = self.matrix, self.mat, self.dofs
        rows = np.arange(*_span(dofs.sd(0, P)))
        xp = state.prev_step
        if not steady:
            cm = mat.porosity / mat.bulk_fluid + (
                mat.biot_alpha - mat.porosity
            ) / mat.bulk_solid
            beta_eff = mat.effective(
                mat.thermal_expansion_solid, mat.thermal_expansion_fluid
            )
            wvol = g.cell_volumes / dt
            acc.add_diag(rows, dofs.sd(0, P), cm * wvol)
            acc.add_diag(rows, dofs.sd(0, T), -beta_eff * wvol)
            _add_to(b, rows, cm * wvol * xp[dofs.sd(0, P)]
                    - beta_eff * wvol * xp[dofs.sd(0, T)])
            self._div_u_terms(acc, b, rows, mat.biot_alpha * np.ones(g.num_cells),
                              state, dt, loads)
        self._scalar_flux_divergence(acc, b, rows, 0, FLOW, cache, loads, state)
        rates = loads.well_rates.get(0)
        if rates is not None:
            _add_to(b, rows, rates)

    def _scalar_flux_divergence(self, acc, b, rows, sd_id, var, cache, loads, state):
        """div of diffusive (+gravity) fluxes of one scalar on a subdomain."""
        dofs, mat = self.dofs, self.mat
        sd = self.mdg.subdomain(sd_id)
        if sd.dim == 2:
            static = self.scalar_static[var]
            div_flux, bfl = static["div_flux"], static["div_bound"]
            div_vsrc = static["div_vsrc"]
            bfl_proj = static["div_bound_proj"]
        else:
            div, _ = sd.cell_faces_csr()
            ops = (cache.frac_flow_ops if var == FLOW else cache.frac_heat_ops)[sd_id]
            div_flux = div @ ops.flux
            bfl = div @ ops.bound_flux
            div_vsrc = div @ ops.vector_source
            bfl_proj = {
                intf.id: bfl @ self.proj_scalar[intf.id]
                for intf in self.mdg.interfaces_of_high(sd_id)
            }
        acc.add_mat(rows, dofs.sd(sd_id, P if var == FLOW else T), div_flux)
        mckey = NU if var == FLOW else NU_COND
        for intf in self.mdg.interfaces_of_high(sd_id):
            acc.add_mat(rows, dofs.intf(intf.id, mckey), bfl_proj[intf.id])
        ext = self._ext_scalar(sd_id, var, loads)
        _add_to(b, rows, -(bfl @ ext))
        if var == FLOW and np.any(np.asarray(mat.gravity)):
            grav = np.asarray(mat.gravity, float)
            r = np.zeros(2 * sd.num_cells)
            r[0::2] = cache.density[sd_id] * grav[0]
            r[1::2] = cache.density[sd_id] * grav[1]
            _add_to(b, rows, -(div_vsrc @ r))

    def _advective_divergence(self, acc, b, rows, sd_id, cache, loads, state):
        """Upwinded advective heat fluxes, implicit in temperature."""
        dofs, mat = self.dofs, self.mat
        sd = self.mdg.subdomain(sd_id)
        div = self.div2 if sd.dim == 2 else sd.cell_faces_csr()[0]
        exclude = sd.tags["internal"]
        u_cell, u_face = upwind_matrices(sd, cache.face_flux[sd_id], exclude)
        w = mat.heat_capacity_fluid * cache.density[sd_id]
        acc.add_mat(rows, dofs.sd(sd_id, T), div @ u_cell @ sps.diags(w))
        # boundary inflow carries the boundary temperature where given
        heat_bc = self.frac_bc[sd_id][HEAT] if sd.dim == 1 else self.bc[HEAT]
        ext_T = self._ext_scalar(sd_id, HEAT, loads)
        owner = sd.face_cells[0]
        rho_b = fluid_density(
            state.prev_iter[dofs.sd(sd_id, P)][owner], ext_T, mat
        )
        w_bc = np.where(heat_bc.is_dir, mat.heat_capacity_fluid * rho_b * ext_T, 0.0)
        _add_to(b, rows, -(div @ u_face @ w_bc))
        # advective transfer through internal faces enters via the mortar
        # advective unknowns
        for intf in self.mdg.interfaces_of_high(sd_id):
            acc.add_mat(rows, dofs.intf(intf.id, NU_ADV),
                        div @ self.proj_scalar[intf.id])

    def _energy_accumulation(self, acc, b, rows, sd_id, state, cache, dt,
                             use_effective):
        """(rho c)_eff dT/dt plus the expanded coefficient-change term.

        The lower-dimensional balances are fluid-filled, so their heat
        capacities skip the porosity average.
        """
        dofs, mat = self.dofs, self.mat
        sd = self.mdg.subdomain(sd_id)
        xp, xi = state.prev_step, state.prev_iter
        rho_f = cache.density[sd_id]
        vols = sd.cell_volumes * cache.spec_vol[sd_id] / dt

        def eff(vs, vf):
            return mat.effective(vs, vf) if use_effective else vf

        rc_eff = eff(mat.density_solid * mat.heat_capacity_solid,
                     rho_f * mat.heat_capacity_fluid)
        rck_eff = eff(mat.density_solid * mat.heat_capacity_solid / mat.bulk_solid,
                      rho_f * mat.heat_capacity_fluid / mat.bulk_fluid)
        rcb_eff = eff(
            mat.density_solid * mat.heat_capacity_solid * mat.thermal_expansion_solid,
            rho_f * mat.heat_capacity_fluid * mat.thermal_expansion_fluid,
        )
        T_lag = xi[dofs.sd(sd_id, T)]
        coef_T = vols * (rc_eff - T_lag * rcb_eff)
        coef_p = vols * T_lag * rck_eff
        acc.add_diag(rows, dofs.sd(sd_id, T), coef_T)
        acc.add_diag(rows, dofs.sd(sd_id, P), coef_p)
        _add_to(b, rows, coef_T * xp[dofs.sd(sd_id, T)] + coef_p * xp[dofs.sd(sd_id, P)])

    def _matrix_energy(self, acc, b, state, cache, dt, steady, loads):
        g, mat, dofs = self.matrix, self.mat, self.dofs
        rows = np.arange(*_span(dofs.sd(0, T)))
        if not steady:
            self._energy_accumulation(acc, b, rows, 0, state, cache, dt, True)
            weight = (mat.thermal_stress_coefficient * mat.reference_temperature
                      * np.ones(g.num_cells))
            self._div_u_terms(acc, b, rows, weight, state, dt, loads)
        self._scalar_flux_divergence(acc, b, rows, 0, HEAT, cache, loads, state)
        self._advective_divergence(acc, b, rows, 0, cache, loads, state)
        self._well_energy(acc, b, rows, 0, cache, loads, state)

    def _well_energy(self, acc, b, rows, sd_id, cache, loads, state):
        mat, dofs = self.mat, self.dofs
        rates = loads.well_rates.get(sd_id)
        if rates is None:
            return
        t_inj = loads.well_T_injection.get(sd_id)
        inject = rates > 0
        if np.any(inject):
            rho_in = fluid_density(
                state.prev_iter[dofs.sd(sd_id, P)][inject], t_inj[inject], mat
            )
            src = np.zeros(rates.size)
            src[inject] = rho_in * mat.heat_capacity_fluid * t_inj[inject] * rates[inject]
            _add_to(b, rows, src)
        produce = rates < 0
        if np.any(produce):
            # upwind: produced energy carries the local (implicit) temperature
            coef = np.zeros(rates.size)
            coef[produce] = (mat.heat_capacity_fluid * cache.density[sd_id][produce]
                             * rates[produce])
            acc.add_diag(rows, dofs.sd(sd_id, T), -coef)

    # -- fracture equations ------------------------------------------------
    def _volume_change_terms(self, acc, b, rows, sd, state, cache, dt, weight):
        """weight/dt * (V_new - V_old): the mortar-linear part implicit.

        V = a0 + jump_n (+ one-way slip remainder, lagged). ``weight`` is 1
        for the mass balance and the lagged rho c T for the energy balance.
        """
        dofs, mdg, mat = self.dofs, self.mdg, self.mat
        vols = sd.cell_volumes / dt * weight
        n_vec, _ = self.basis[sd.id]
        intf_j, intf_k = mdg.fracture_interfaces(sd.id)
        for intf, sgn in ((intf_j, -1.0), (intf_k, 1.0)):
            cols = np.arange(*_span(dofs.intf(intf.id, U_MORTAR)))
            lc = intf.low_cells
            mortar = np.arange(intf.num_cells)
            # jump_n contribution of this side: sgn * n . u_m per cell
            rr = np.repeat(rows[lc], 2)
            cc = cols[np.stack([2 * mortar, 2 * mortar + 1], 1).ravel()]
            vv = (vols[lc, None] * (sgn * n_vec.T[lc])).ravel()
            acc.add(rr, cc, vv)
        jn_prev, jt_prev = self.jumps_of(state.prev_step, sd.id)
        # previous-step V without a0 (the constant cancels in the difference)
        v_prev = jn_prev.copy()
        rem_new = np.zeros(sd.num_cells)
        if self.model is DilationModel.ONE_WAY:
            tanp = np.tan(mat.dilation_angle)
            v_prev = v_prev + tanp * np.abs(jt_prev)
            rem_new = tanp * np.abs(cache.jumps[sd.id][0])
        _add_to(b, rows, vols * (v_prev - rem_new))

    def _fracture_mass(self, acc, b, sd, state, cache, dt, steady, loads):
        mat, dofs = self.mat, self.dofs
        rows = np.arange(*_span(dofs.sd(sd.id, P)))
        xp = state.prev_step
        if not steady:
            v_lag = cache.spec_vol[sd.id]
            wvol = sd.cell_volumes * v_lag / dt
            acc.add_diag(rows, dofs.sd(sd.id, P), wvol / mat.bulk_fluid)
            acc.add_diag(rows, dofs.sd(sd.id, T), -wvol * mat.thermal_expansion_fluid)
            _add_to(b, rows, wvol / mat.bulk_fluid * xp[dofs.sd(sd.id, P)]
                    - wvol * mat.thermal_expansion_fluid * xp[dofs.sd(sd.id, T)])
            self._volume_change_terms(acc, b, rows, sd, state, cache, dt,
                                      np.ones(sd.num_cells))
        self._scalar_flux_divergence(acc, b, rows, sd.id, FLOW, cache, loads, state)
        for intf in self.mdg.interfaces_of_low(sd.id):
            acc.add_mat(rows, dofs.intf(intf.id, NU), -self.low_proj[intf.id])
        rates = loads.well_rates.get(sd.id)
        if rates is not None:
            _add_to(b, rows, rates)

    def _fracture_energy(self, acc, b, sd, state, cache, dt, steady, loads):
        mat, dofs = self.mat, self.dofs
        rows = np.arange(*_span(dofs.sd(sd.id, T)))
        if not steady:
            self._energy_accumulation(acc, b, rows, sd.id, state, cache, dt, False)
            weight = (mat.heat_capacity_fluid * cache.density[sd.id]
                      * state.prev_iter[dofs.sd(sd.id, T)])
            self._volume_change_terms(acc, b, rows, sd, state, cache, dt, weight)
        self._scalar_flux_divergence(acc, b, rows, sd.id, HEAT, cache, loads, state)
        self._advective_divergence(acc, b, rows, sd.id, cache, loads, state)
        for intf in self.mdg.interfaces_of_low(sd.id):
            proj = self.low_proj[intf.id]
            acc.add_mat(rows, dofs.intf(intf.id, NU_ADV), -proj)
            acc.add_mat(rows, dofs.intf(intf.id, NU_COND), -proj)
        self._well_energy(acc, b, rows, sd.id, cache, loads, state)

    def _contact_rows(self, acc, b, sd, state, cache):
        mat, dofs, mdg = self.mat, self.dofs, self.mdg
        xi = state.prev_iter
        lam = xi[dofs.sd(sd.id, LAM)]
        jump_t, jump_n = cache.jumps[sd.id]
        jt_prev = self.jumps_of(state.prev_step, sd.id)[1]
        coeffs = ct.row_coefficients(
            cache.contact_state[sd.id], lam[0::2], lam[1::2], jump_t, jump_n,
            jt_prev, cache.gaps[sd.id], self.c_num[sd.id], mat.friction_coefficient,
        )
        a_lam, a_jump, rhs = ct.assemble_rows(
            coeffs, jump_t, jt_prev, cache.gaps[sd.id], cache.dgaps[sd.id],
            mat.friction_coefficient,
        )
        rows = np.arange(*_span(dofs.sd(sd.id, LAM)))
        nc = sd.num_cells
        rows2 = rows.reshape(nc, 2)
        _add_blocks(acc, rows2, rows2, a_lam)
        # jump at the new iterate, rotated to the cell basis:
        # jump_loc = R (Pi_k u_k - Pi_j u_j)
        n_vec, tau_vec = self.basis[sd.id]
        rot = np.stack([tau_vec.T, n_vec.T], axis=1)  # (nc, 2, 2), rows (tau, n)
        intf_j, intf_k = mdg.fracture_interfaces(sd.id)
        for intf, sgn in ((intf_j, -1.0), (intf_k, 1.0)):
            cols = np.arange(*_span(dofs.intf(intf.id, U_MORTAR)))
            lc = intf.low_cells
            block = sgn * np.einsum("cij,cjk->cik", a_jump[lc], rot[lc])
            mortar = np.arange(intf.num_cells)
            cols2 = np.stack([cols[2 * mortar], cols[2 * mortar + 1]], axis=1)
            _add_blocks(acc, rows2[lc], cols2, block)
        _add_to(b, rows, rhs.ravel())

    # -- 0d equations -------------------------------------------------------
    def _point_mass(self, acc, b, sd, state, cache, dt, steady):
        mat, dofs = self.mat, self.dofs
        rows = np.arange(*_span(dofs.sd(sd.id, P)))
        xp = state.prev_step
        if not steady:
            v_lag = cache.spec_vol[sd.id]
            wvol = sd.cell_volumes * v_lag / dt
            acc.add_diag(rows, dofs.sd(sd.id, P), wvol / mat.bulk_fluid)
            acc.add_diag(rows, dofs.sd(sd.id, T), -wvol * mat.thermal_expansion_fluid)
            _add_to(b, rows, wvol / mat.bulk_fluid * xp[dofs.sd(sd.id, P)]
                    - wvol * mat.thermal_expansion_fluid * xp[dofs.sd(sd.id, T)])
            # volume change fully lagged
            v_old = self._point_spec_vol(sd.id, state.prev_step)
            _add_to(b, rows, -sd.cell_volumes / dt * (cache.spec_vol[sd.id] - v_old))
        for intf in self.mdg.interfaces_of_low(sd.id):
            acc.add_mat(rows, dofs.intf(intf.id, NU), -self.low_proj[intf.id])

    def _point_energy(self, acc, b, sd, state, cache, dt, steady):
        mat, dofs = self.mat, self.dofs
        rows = np.arange(*_span(dofs.sd(sd.id, T)))
        if not steady:
            self._energy_accumulation(acc, b, rows, sd.id, state, cache, dt, False)
            v_old = self._point_spec_vol(sd.id, state.prev_step)
            w = (mat.heat_capacity_fluid * cache.density[sd.id]
                 * state.prev_iter[dofs.sd(sd.id, T)])
            _add_to(b, rows, -sd.cell_volumes / dt * w * (cache.spec_vol[sd.id] - v_old))
        for intf in self.mdg.interfaces_of_low(sd.id):
            proj = self.low_proj[intf.id]
            acc.add_mat(rows, dofs.intf(intf.id, NU_ADV), -proj)
            acc.add_mat(rows, dofs.intf(intf.id, NU_COND), -proj)

    def _point_spec_vol(self, sd_id, x):
        apertures = {}
        for f in self.mdg.subdomains_of_dim(1):
            jn, jt = self.jumps_of(x, f.id)
            apertures[f.id] = self.coefficient_aperture(self.aperture_of(jt, jn))
        a = self.coefficient_aperture(self.mdg.inherit_aperture(sd_id, apertures))
        return specific_volume(a, 0)

    # -- interface rows ------------------------------------------------------
    def _traction_balance(self, acc, b, intf, loads):
        """Rows of the mortar displacement: contact traction balances the
        projected matrix traction minus the fracture pressure."""
        dofs, mdg = self.dofs, self.mdg
        frac = mdg.subdomain(intf.low_id)
        sgn = 1.0 if intf.side == 0 else -1.0
        rows = np.arange(*_span(dofs.intf(intf.id, U_MORTAR)))
        nm = intf.num_cells
        rows2 = rows.reshape(nm, 2)
        lc = intf.low_cells
        areas = intf.cell_volumes
        n_vec, tau_vec = self.basis[frac.id]

        # A * Xi lam_global: lam stored in (tau, n) basis per fracture cell
        lam_cols = np.arange(*_span(dofs.sd(frac.id, LAM)))
        l2g = np.stack([tau_vec.T, n_vec.T], axis=2)  # (nc, 2(xy), 2(tau,n))
        lam_cols2 = np.stack([lam_cols[2 * lc], lam_cols[2 * lc + 1]], axis=1)
        _add_blocks(acc, rows2, lam_cols2, areas[:, None, None] * l2g[lc])

        # -A * Xi p_l * n (fracture normal, j-side convention)
        p_cols = np.arange(*_span(dofs.sd(frac.id, P)))
        acc.add(rows, np.repeat(p_cols[lc], 2),
                (-areas[:, None] * n_vec.T[lc]).ravel())

        # -sgn * Xi_h (face tractions)
        self._momentum_traction_terms(acc, b, rows, self.traction_lift[intf.id],
                                      loads, sign=-sgn)

    def _interface_flux_rows(self, acc, b, state, cache, loads):
        dofs, mdg, mat = self.dofs, self.mdg, self.mat
        for intf in mdg.interfaces:
            high = mdg.subdomain(intf.high_id)
            low = mdg.subdomain(intf.low_id)
            if high.dim == 2:
                v_high = np.ones(intf.num_cells)
                static = {var: self.trace_static[(var, intf.id)]
                          for var in (FLOW, HEAT)}
            else:
                flow_ops = cache.frac_flow_ops[high.id]
                heat_ops = cache.frac_heat_ops[high.id]
                v_high = cache.spec_vol[high.id][high.face_cells[0, intf.high_faces]]
                lift = self.lift_scalar[intf.id]
                static = {}
                for var, ops in ((FLOW, flow_ops), (HEAT, heat_ops)):
                    tf = lift @ ops.trace_face
                    static[var] = {
                        "cell": lift @ ops.trace_cell,
                        "face": tf,
                        "face_proj": {
                            other.id: tf @ self.proj_scalar[other.id]
                            for other in mdg.interfaces_of_high(high.id)
                        },
                        "vsrc": lift @ ops.trace_vector_source,
                    }
            a_low = cache.apertures[low.id][intf.low_cells]
            k_low = cubic_law(cache.apertures[low.id])[intf.low_cells]
            areas = intf.cell_volumes
            w_flow = areas * v_high * (k_low / mat.viscosity) * 2.0 / a_low
            w_heat = areas * v_high * mat.conductivity_fluid * 2.0 / a_low

            for var, svar, key, w in ((P, FLOW, NU, w_flow), (T, HEAT, NU_COND, w_heat)):
                rows = np.arange(*_span(dofs.intf(intf.id, key)))
                acc.add_diag(rows, dofs.intf(intf.id, key), np.ones(intf.num_cells))
                low_cols = np.arange(*_span(dofs.sd(low.id, var)))
                acc.add(rows, low_cols[intf.low_cells], w)
                wd = sps.diags(w)
                tr = static[svar]
                acc.add_mat(rows, dofs.sd(high.id, var), -(wd @ tr["cell"]))
                for other_id, mat_proj in tr["face_proj"].items():
                    acc.add_mat(rows, dofs.intf(other_id, key), -(wd @ mat_proj))
                ext = self._ext_scalar(high.id, svar, loads)
                _add_to(b, rows, w * (tr["face"] @ ext))
                if var == P and np.any(np.asarray(mat.gravity)):
                    grav = np.asarray(mat.gravity, float)
                    r = np.zeros(2 * high.num_cells)
                    r[0::2] = cache.density[high.id] * grav[0]
                    r[1::2] = cache.density[high.id] * grav[1]
                    _add_to(b, rows, w * (tr["vsrc"] @ r))
                    # gravity term of the interface law itself
                    n_unit = (high.face_normals[:, intf.high_faces]
                              / high.face_areas[intf.high_faces])
                    rho_l = cache.density[low.id][intf.low_cells]
                    gn = (grav[:, None] * n_unit).sum(axis=0)
                    coef = areas * v_high * (k_low / mat.viscosity) * rho_l * gn
                    _add_to(b, rows, coef)

            # advective rows: nu_adv = nu_lagged * c rho T(upstream side)
            rows = np.arange(*_span(dofs.intf(intf.id, NU_ADV)))
            acc.add_diag(rows, dofs.intf(intf.id, NU_ADV), np.ones(intf.num_cells))
            nu_lag = cache.mortar_flux[intf.id]
            upstream_high = nu_lag > 0
            w_high = mat.heat_capacity_fluid * cache.density[high.id][
                high.face_cells[0, intf.high_faces]
            ]
            w_low = mat.heat_capacity_fluid * cache.density[low.id][intf.low_cells]
            coef_h = np.where(upstream_high, -nu_lag * w_high, 0.0)
            coef_l = np.where(~upstream_high, -nu_lag * w_low, 0.0)
            t_high_cols = np.arange(*_span(dofs.sd(high.id, T)))
            t_low_cols = np.arange(*_span(dofs.sd(low.id, T)))
            acc.add(rows, t_high_cols[high.face_cells[0, intf.high_faces]], coef_h)
            acc.add(rows, t_low_cols[intf.low_cells], coef_l)


def damp_advective_flux(flux_prev, flux_new, omega):
    """Relaxed flux update q = omega q_new + (1 - omega) q_prev."""
    return omega * np.asarray(flux_new, float) + (1.0 - omega) * np.asarray(
        flux_prev, float
    )


class _Coo:
    def __init__(self, n):
        self.n = n
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, vals):
        self.rows.append(np.asarray(rows, dtype=int))
        self.cols.append(np.asarray(cols, dtype=int))
        self.vals.append(np.asarray(vals, dtype=float))

    def add_diag(self, rows, col_slice, vals):
        cols = np.arange(col_slice.start, col_slice.stop)
        self.add(rows, cols, vals)

    def add_mat(self, row_index, col_slice, mat):
        m = sps.coo_matrix(mat)
        if m.nnz == 0:
            return
        cols = np.arange(col_slice.start, col_slice.stop)
        self.add(np.asarray(row_index)[m.row], cols[m.col], m.data)

    def matrix(self):
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        vals = np.concatenate(self.vals)
        return sps.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))


def _span(sl: slice):
    return sl.start, sl.stop


def _add_to(b, rows, vals):
    np.add.at(b, rows, vals)


def _add_blocks(acc: _Coo, rows2, cols2, blocks):
    """Scatter per-cell 2x2 blocks; rows2/cols2 are (nc, 2) global indices."""
    rr = np.repeat(rows2, 2, axis=1).ravel()
    cc = np.tile(cols2, (1, 2)).ravel()
    acc.add(rr, cc, blocks.ravel())
