import numpy as np
import pytest
import scipy.sparse.linalg as spla

from helpers import default_bc_types, default_params, make_loads, make_problem

from mdthm.constitutive import DilationModel, MaterialSet, gap as gap_fn
from mdthm.contact import classify, complementarity_report
from mdthm.fvm import BoundaryCondition, mpfa_discretize
from mdthm.system import (
    LAM,
    P,
    T,
    DirectSolver,
    Loads,
    PhaseSpec,
    SolverFailure,
    TimeLoopOptions,
    balance_report,
    damp_advective_flux,
    interface_flux_consistency,
    newton_solve,
    time_loop,
)
from mdthm.system.newton import contact_residual_norm

MAT = MaterialSet()
FR = [((0.25, 0.5), (0.75, 0.5))]


class TestDirectSolver:
    def test_residual_contract(self):
        import scipy.sparse as sps

        rng = np.random.default_rng(0)
        n = 60
        A = sps.random(n, n, density=0.2, random_state=1) + sps.eye(n) * 5
        x_ref = rng.standard_normal(n)
        b = A @ x_ref
        x = DirectSolver().solve(A.tocsr(), b)
        assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-10

    def test_failure_reported(self):
        import scipy.sparse as sps

        A = sps.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-16]]))
        with pytest.raises(SolverFailure):
            DirectSolver().solve(A, np.array([1.0, -1.0]))

    def test_zero_rhs(self):
        import scipy.sparse as sps

        x = DirectSolver().solve(sps.eye(4).tocsr(), np.zeros(4))
        assert np.all(x == 0)


class TestDampAdvectiveFlux:
    def test_identity_at_full_weight(self):
        q = np.array([1.0, -2.0])
        assert np.allclose(damp_advective_flux(np.array([5.0, 5.0]), q, 1.0), q)

    def test_midpoint(self):
        assert damp_advective_flux(2.0, 0.0, 0.5) == 1.0

    def test_oscillating_fixed_point(self):
        # toy alternating map q -> -q + 1: undamped it cycles between 0 and 1,
        # damped with omega = 1/2 it contracts to the fixed point 0.5
        def step(q):
            return -q + 1.0

        q_plain, q_damped = 0.0, 0.0
        seen = []
        for _ in range(40):
            q_plain = step(q_plain)
            q_damped = damp_advective_flux(q_damped, step(q_damped), 0.5)
            seen.append(q_plain)
        assert abs(q_damped - 0.5) < 1e-10
        assert abs(seen[-1] - seen[-2]) == 1.0  # still alternating


class TestSteadyNoFracture:
    def test_darcy_matches_standalone_mpfa(self):
        mdg, asm, state = make_problem(nx=6, ny=6, perturb=0.15, seed=4)
        loads = make_loads(asm, p_left=4e7)
        rep = newton_solve(asm, state, 1.0, True, loads, default_params(increment_tol=1e-9))
        assert rep.converged
        g = mdg.matrix
        ops = mpfa_discretize(
            g, MAT.matrix_permeability / MAT.viscosity, asm.bc["flow"]
        )
        div, _ = g.cell_faces_csr()
        bc_flow = loads.bc_flow[0]
        p_oracle = spla.spsolve(
            (div @ ops.flux).tocsc(), -div @ (ops.bound_flux @ bc_flow)
        )
        p_sys = state.current[asm.dofs.sd(0, P)]
        assert np.abs(p_sys - p_oracle).max() < 1e-10 * 4e7

    def test_uniform_temperature_without_forcing(self):
        mdg, asm, state = make_problem(nx=5, ny=5)
        loads = make_loads(asm)
        rep = newton_solve(asm, state, 1.0, True, loads, default_params())
        assert rep.converged
        T_sol = state.current[asm.dofs.sd(0, T)]
        assert np.abs(T_sol - MAT.reference_temperature).max() < 1e-8


class TestFracturedContactSolve:
    def solve(self, model=DilationModel.TWO_WAY, shear=5e-4):
        mdg, asm, state = make_problem(FR, model=model)
        loads = make_loads(asm, top_displacement=(shear, -2e-4))
        rep = newton_solve(asm, state, 1.0, True, loads,
                           default_params(increment_tol=1e-9))
        return mdg, asm, state, rep, loads

    def test_converges_quickly(self):
        *_, rep, _ = self.solve()
        assert rep.converged
        assert rep.iterations <= 10

    def test_coulomb_and_dilation_at_solution(self):
        mdg, asm, state, rep, loads = self.solve()
        frac = mdg.subdomains[1]
        lam = state.current[asm.dofs.sd(frac.id, LAM)]
        jn, jt = asm.jumps_of(state.current, frac.id)
        g = gap_fn(jt, DilationModel.TWO_WAY, MAT.dilation_angle)
        # gliding cells: |lam_t| = -F lam_n, jn = gap, slip parallel to lam_t
        assert np.abs(np.abs(lam[0::2]) + 0.5 * lam[1::2]).max() < 1e-6 * np.abs(lam).max()
        assert np.abs(jn - g).max() < 1e-12
        assert np.all(np.sign(jt) == np.sign(lam[0::2]))
        report = complementarity_report(
            lam[0::2], lam[1::2], jt, jn, np.zeros_like(jt), g,
            asm.c_num[frac.id], MAT.friction_coefficient,
        )
        assert report <= 1e-8

    def test_pure_compression_sticks(self):
        mdg, asm, state, rep, _ = self.solve(shear=0.0)
        assert rep.converged
        frac = mdg.subdomains[1]
        lam = state.current[asm.dofs.sd(frac.id, LAM)]
        jn, jt = asm.jumps_of(state.current, frac.id)
        assert np.all(lam[1::2] < 0)
        assert np.abs(jt).max() < 1e-12
        assert np.abs(jn).max() < 1e-12

    def test_interface_flux_consistency(self):
        mdg, asm, state, rep, loads = self.solve()
        assert interface_flux_consistency(asm, state, loads) < 1e-12

    def test_all_open_contact_block_is_identity(self):
        # tension opens every cell; the lam block must reduce to the identity
        mdg, asm, state = make_problem(FR)
        loads = make_loads(asm, top_displacement=(0.0, 2e-4))
        rep = newton_solve(asm, state, 1.0, True, loads, default_params(increment_tol=1e-9))
        assert rep.converged
        frac = mdg.subdomains[1]
        lam = state.current[asm.dofs.sd(frac.id, LAM)]
        assert np.abs(lam).max() < 1e-6
        jn, _ = asm.jumps_of(state.current, frac.id)
        assert np.all(jn > 0)
        # assemble at the converged state and inspect the lam-lam block
        state.start_iteration()
        cache = asm.build_cache(state, loads)
        A, b = asm.assemble(state, cache, 1.0, True, loads)
        sl = asm.dofs.sd(frac.id, LAM)
        block = A.tocsr()[sl.start:sl.stop].toarray()
        eye_part = block[:, sl.start:sl.stop]
        assert np.allclose(eye_part, np.eye(sl.stop - sl.start))
        other = np.delete(block, np.arange(sl.start, sl.stop), axis=1)
        assert np.abs(other).max() == 0.0
        assert np.abs(b[sl]).max() == 0.0


class TestNewtonBehaviour:
    def test_linear_problem_single_iteration(self):
        # a purely mechanical load without fractures or flow keeps every
        # lagged coefficient at its initial value: one solve reaches the
        # solution, detected at the next residual evaluation
        mdg, asm, state = make_problem(nx=4, ny=4)
        loads = make_loads(asm, top_displacement=(2e-4, -1e-4))
        rep = newton_solve(asm, state, 1.0, True, loads, default_params())
        assert rep.converged
        assert rep.iterations == 1

    def test_reentering_converged_state(self):
        mdg, asm, state = make_problem(nx=4, ny=4)
        loads = make_loads(asm, p_left=1e6)
        rep1 = newton_solve(asm, state, 1.0, True, loads, default_params())
        assert rep1.converged
        rep2 = newton_solve(asm, state, 1.0, True, loads, default_params())
        assert rep2.converged
        assert rep2.iterations == 0

    def test_iteration_cap_reported(self):
        mdg, asm, state = make_problem(FR)
        loads = make_loads(asm, top_displacement=(5e-4, -2e-4))
        params = default_params(max_iterations=1)
        rep = newton_solve(asm, state, 1.0, True, loads, params)
        assert not rep.converged
        assert "cap" in rep.failure


class TestTimeLoop:
    def test_zero_forcing_constant_trajectory(self):
        mdg, asm, state = make_problem(nx=4, ny=4)
        loads = make_loads(asm)
        x0 = state.current.copy()
        records = time_loop(
            asm, state, [PhaseSpec("hold", duration=4.0, dt=2.0)],
            lambda t, tp: loads, TimeLoopOptions(newton=default_params()),
        )
        assert len(records) == 2
        assert np.abs(state.current - x0).max() < 1e-8

    def test_step_response_reaches_steady_state(self):
        mdg, asm, state = make_problem(nx=4, ny=4)

        def provider(t, tp):
            return make_loads(asm, top_displacement=(1e-4, -1e-4),
                              prev_top_displacement=(1e-4, -1e-4))

        # long steps let the diffusive transient die out
        records = time_loop(
            asm, state, [PhaseSpec("load", duration=4e13, dt=1e13)],
            provider, TimeLoopOptions(newton=default_params()),
        )
        before = state.current.copy()
        time_loop(asm, state, [PhaseSpec("again", duration=1e13, dt=1e13)],
                  provider, TimeLoopOptions(newton=default_params()))
        scale = np.abs(before).max()
        assert np.abs(state.current - before).max() < 1e-10 * scale

    def test_backward_euler_first_order(self):
        # spatially uniform pressure rise: with a ramped uniform injection
        # into a sealed square, cm dp/dt = s(t) / V has a time-quadratic
        # solution and the implicit Euler error is O(dt)
        mat = MaterialSet(thermal_expansion_fluid=0.0)
        from mdthm.mdmesh import build_triangular_fractured
        from mdthm.system import Assembler, State

        mdg = build_triangular_fractured(2, 2)
        g = mdg.matrix
        side = g.tags["domain_side"]
        # fully clamped boundary: with uniform pressure the displacement and
        # its divergence vanish identically, leaving the pure storage ODE
        bc_types = {
            "mech": np.isin(side, (1, 2, 3, 4)),
            "flow": np.zeros(g.num_faces, dtype=bool),
            "heat": np.isin(side, (1, 2)),
        }
        asm = Assembler(mdg, mat, DilationModel.TWO_WAY, bc_types)
        state = State(asm.dofs)
        state.set_initial({("sd", 0, "T"): mat.reference_temperature})
        cm = mat.porosity / mat.bulk_fluid + (mat.biot_alpha - mat.porosity) / mat.bulk_solid
        vol = g.cell_volumes.sum()

        def exact_p(t):
            # source rate s(t) = s0 * t over the whole domain
            return 1e-6 * t**2 / 2.0 / (cm * vol)

        def run(dt):
            st = State(asm.dofs)
            st.set_initial({("sd", 0, "T"): mat.reference_temperature})
            t_end = 100.0

            def provider(t_new, t_prev):
                loads = make_loads(asm, mat=mat)
                rate = 1e-6 * t_new * g.cell_volumes / vol
                loads.well_rates = {0: rate}
                loads.well_T_injection = {0: np.full(g.num_cells, 300.0)}
                return loads

            time_loop(asm, st, [PhaseSpec("inject", duration=t_end, dt=dt)],
                      provider,
                      TimeLoopOptions(newton=default_params(mat=mat),
                                      compute_balance=False))
            return st.current[asm.dofs.sd(0, P)].mean()

        errs = []
        for dt in (25.0, 12.5, 6.25):
            errs.append(abs(run(dt) - exact_p(100.0)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 0.85)

    def test_dt_halving_disabled_raises(self):
        from mdthm.system import NonConvergence

        mdg, asm, state = make_problem(FR)
        loads = make_loads(asm, top_displacement=(5e-4, -2e-4))
        opts = TimeLoopOptions(newton=default_params(max_iterations=1),
                               allow_dt_halving=False)
        with pytest.raises(NonConvergence):
            time_loop(asm, state, [PhaseSpec("load", duration=1.0, dt=1.0)],
                      lambda t, tp: loads, opts)


class TestConservation:
    def test_injection_balance(self):
        mdg, asm, state = make_problem(FR, nx=8, ny=8)
        frac = mdg.subdomains[1]
        rate = np.zeros(frac.num_cells)
        rate[1] = 1e-8
        t_inj = np.full(frac.num_cells, 290.0)

        def provider(t, tp):
            loads = make_loads(asm, top_displacement=(1e-4, -1e-4),
                               prev_top_displacement=(1e-4, -1e-4))
            loads.well_rates = {frac.id: rate}
            loads.well_T_injection = {frac.id: t_inj}
            return loads

        records = time_loop(
            asm, state, [PhaseSpec("inject", duration=2e5, dt=1e5)],
            provider, TimeLoopOptions(newton=default_params(increment_tol=1e-9)),
        )
        injected_mass = 1e-8 * 1e5
        injected_energy = injected_mass * 1e3 * MAT.heat_capacity_fluid * 290.0
        for rec in records:
            assert rec.newton.converged
            assert abs(rec.balance.mass_residual) < 1e-8 * injected_mass
            assert abs(rec.balance.energy_residual) < 1e-8 * injected_energy

    def test_equilibrium_zero_residual(self):
        mdg, asm, state = make_problem(nx=4, ny=4)
        loads = make_loads(asm)
        rep = balance_report(asm, state, 1.0, loads)
        assert rep.mass_residual == pytest.approx(0.0, abs=1e-20)
        assert rep.energy_residual == pytest.approx(0.0, abs=1e-12)
