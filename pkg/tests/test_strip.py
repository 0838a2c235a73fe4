import numpy as np
import pytest
import scipy.linalg

from wavebranch import spectrum1d as sp1
from wavebranch import stream as st
from wavebranch import strip
from wavebranch.errors import BelowCriticalError, StagnationBreachError
from wavebranch.vorticity import VorticitySpec


def uniform_field(spec, theta, grid):
    H = st.stream_profile(spec, theta, grid.p)
    R = st.R_of_theta(spec, theta)
    return strip.StripField(grid, np.tile(H, (grid.nq, 1)), R, theta)


def smooth_unit_direction(grid, seed=7, n_modes=4):
    """Seeded smooth random direction, unit Euclidean norm, zero on pinned rows."""
    rng = np.random.default_rng(seed)
    qs, ps = np.meshgrid(grid.q, grid.p, indexing="ij")
    v = np.zeros((grid.nq, grid.np))
    for _ in range(n_modes):
        aq = rng.uniform(0.2, 0.8)
        ap = rng.integers(1, 3)
        ph = rng.uniform(0, 2 * np.pi)
        v += rng.normal() * np.sin(ap * np.pi * ps) * np.cos(aq * qs + ph)
    v[-1, :] = 0.0
    v[:, 0] = 0.0
    vec = v[: grid.nq - 1, 1:].ravel()
    return vec / np.linalg.norm(vec)


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            strip.StripGrid(L=-1.0, nq=41, np=17)
        with pytest.raises(ValueError):
            strip.StripGrid(L=1.0, nq=5, np=17)

    def test_spacings(self):
        g = strip.StripGrid(L=10.0, nq=101, np=21)
        assert g.dq == pytest.approx(0.1)
        assert g.dp == pytest.approx(0.05)
        assert g.q[0] == 0.0 and g.q[-1] == 10.0
        assert g.p[0] == 0.0 and g.p[-1] == 1.0


class TestResidual:
    def test_irrotational_linear_field_exact(self, irrot):
        theta = 1.3
        g = strip.StripGrid(L=10.0, nq=41, np=17)
        f = uniform_field(irrot, theta, g)
        r = strip.residual(f, irrot)
        assert np.abs(r.interior).max() < 1e-13
        assert np.abs(r.surface).max() < 1e-13

    def test_surface_closed_form_cancellation(self, irrot):
        # h = p/theta gives surface value theta^2/2 + 1/theta - R exactly
        theta = 1.3
        g = strip.StripGrid(L=10.0, nq=41, np=17)
        f = uniform_field(irrot, theta, g)
        f.R += 0.25
        r = strip.residual(f, irrot)
        assert np.abs(r.surface + 0.25).max() < 1e-13

    def test_rotational_stream_second_order(self, const_one):
        theta = 1.8
        sups = []
        for npp in (17, 33):
            g = strip.StripGrid(L=5.0, nq=21, np=npp)
            sups.append(strip.residual(uniform_field(const_one, theta, g), const_one).sup)
        assert 3.5 <= sups[0] / sups[1] <= 4.5

    def test_stagnation_breach(self, irrot):
        g = strip.StripGrid(L=10.0, nq=41, np=17)
        f = uniform_field(irrot, 1.3, g)
        f.h[5, 6] -= 0.5  # sign-flipped bump kills monotonicity in p
        with pytest.raises(StagnationBreachError):
            strip.residual(f, irrot)


class TestJacobian:
    def test_taylor_directional_derivative(self, const_one):
        theta = 1.8
        g = strip.StripGrid(L=12.0, nq=61, np=17)
        f = uniform_field(const_one, theta, g)
        f.h *= 1 + 0.15 * np.exp(-(((g.q[:, None] - 3) / 2.0) ** 2)) * g.p[None, :]
        v = smooth_unit_direction(g)
        J = strip.assemble_jacobian(f, const_one)

        def defect(eps):
            xp = strip.unpack(f, strip.pack(f) + eps * v)
            xm = strip.unpack(f, strip.pack(f) - eps * v)
            cd = (strip.residual_vector(xp, const_one) - strip.residual_vector(xm, const_one)) / (
                2 * eps
            )
            return np.abs(cd - J @ v).max()

        assert defect(1e-5) < 1e-8
        # O(eps^2) scaling measured above the rounding floor of the differences
        assert defect(2e-4) / defect(1e-4) == pytest.approx(4.0, rel=0.2)

    def test_linearity_on_zero(self, irrot):
        g = strip.StripGrid(L=10.0, nq=41, np=17)
        f = uniform_field(irrot, 1.3, g)
        J = strip.assemble_jacobian(f, irrot)
        assert np.abs(J @ np.zeros(g.n_unknowns)).max() == 0.0

    def test_q_independent_reduction_matches_1d_edge(self, irrot):
        """Summing Jacobian columns over q reduces to the 1-D operator; its
        lowest eigenvalue under the 1/H_p weight approaches nu0."""
        theta = st.solve_theta_for_R(irrot, 2.0, "supercritical")
        errs = []
        for npp in (33, 65):
            g = strip.StripGrid(L=30.0, nq=41, np=npp)
            f = uniform_field(irrot, theta, g)
            J = strip.assemble_jacobian(f, irrot).toarray()
            npu = g.np - 1
            i_mid = g.nq // 2
            rows = slice(i_mid * npu, (i_mid + 1) * npu)
            block = J[rows, :].reshape(npu, g.nq - 1, npu).sum(axis=1)
            # generalized pencil with weight 1/H_p on interior rows
            W = np.zeros((npu, npu))
            hp = 1.0 / theta
            for j in range(npu - 1):
                W[j, j] = 1.0 / hp
            vals = scipy.linalg.eig(block, W, right=False)
            vals = np.array(sorted(v.real for v in vals if np.isfinite(v.real)))
            s = st.stream_at(irrot, theta)
            nu0 = sp1.nu0(sp1.robin_problem(s, irrot, grid_n=2048))
            errs.append(abs(vals[0] - nu0))
        assert errs[0] > errs[1]  # improves under p-refinement
        assert errs[1] < 5e-3


class TestNewton:
    def test_exact_stream_zero_iterations(self, irrot):
        g = strip.StripGrid(L=10.0, nq=41, np=17)
        f = uniform_field(irrot, 1.3, g)
        sol, info = strip.newton_solve(f, irrot, tol=1e-10, return_info=True)
        assert info.iterations <= 1
        assert info.residual_sup < 1e-13

    def test_solitary_wave_solve(self, irrot, wave153_small):
        sol = wave153_small
        r = strip.residual(sol, irrot)
        assert r.sup < 1e-10
        d_far = st.depth(irrot, sol.theta)
        assert sol.xi[0] > d_far  # elevation wave
        assert np.all(np.diff(sol.xi[:-1]) < 0.0)  # monotone decay for q > 0

    def test_guess_positivity_guard(self, irrot):
        g = strip.StripGrid(L=10.0, nq=41, np=17)
        f = uniform_field(irrot, 1.3, g)
        f.h[3, 8] -= 0.4
        with pytest.raises(StagnationBreachError):
            strip.newton_solve(f, irrot)


class TestInitialGuess:
    def test_far_field_column_exact(self, irrot):
        grid = strip.default_grid(irrot, 1.53, nq=61, npp=17, L_factor=12.0)
        guess = strip.initial_guess(irrot, 1.53, grid)
        H = st.stream_profile(irrot, guess.theta, grid.p)
        assert np.array_equal(guess.h[-1], H)

    def test_critical_reduces_to_stream(self, irrot):
        grid = strip.StripGrid(L=12.0, nq=61, np=17)
        guess = strip.initial_guess(irrot, 1.5, grid)
        r = strip.residual(guess, irrot)
        assert r.sup < 1e-9  # exact critical stream at machine scale

    def test_below_critical_error(self, irrot):
        grid = strip.StripGrid(L=12.0, nq=61, np=17)
        with pytest.raises(BelowCriticalError):
            strip.initial_guess(irrot, 1.45, grid)


class TestConvergenceInvariants:
    def test_grid_refinement_second_order(self, irrot):
        # xi(0) increments shrink by ~4 when both spacings are halved
        vals = []
        for nq, npp in ((61, 11), (121, 21), (241, 41)):
            grid = strip.StripGrid(L=15.0, nq=nq, np=npp)
            sol = strip.newton_solve(strip.initial_guess(irrot, 1.53, grid), irrot, tol=1e-11)
            vals.append(sol.xi[0])
        incs = np.abs(np.diff(vals))
        assert 2.5 <= incs[0] / incs[1] <= 6.0

    def test_truncation_insensitivity(self, irrot):
        # doubling L changes xi(0) by less than the discretization increment
        vals = {}
        for L in (10.0, 20.0):
            grid = strip.StripGrid(L=L, nq=int(L * 8) + 1, np=17)
            sol = strip.newton_solve(strip.initial_guess(irrot, 1.53, grid), irrot, tol=1e-11)
            vals[L] = sol.xi[0]
        trunc_change = abs(vals[20.0] - vals[10.0])
        grid_a = strip.StripGrid(L=10.0, nq=81, np=17)
        grid_b = strip.StripGrid(L=10.0, nq=161, np=33)
        xa = strip.newton_solve(strip.initial_guess(irrot, 1.53, grid_a), irrot, tol=1e-11).xi[0]
        xb = strip.newton_solve(strip.initial_guess(irrot, 1.53, grid_b), irrot, tol=1e-11).xi[0]
        assert trunc_change < abs(xb - xa)


class TestCheckpoint:
    def test_round_trip_exact(self, irrot, wave153_small, tmp_path):
        path = tmp_path / "w.txt"
        strip.write_checkpoint(str(path), wave153_small, irrot)
        fld, omega = strip.read_checkpoint(str(path))
        assert omega.coeffs == irrot.coeffs
        assert np.array_equal(fld.h, wave153_small.h)
        assert fld.R == wave153_small.R and fld.theta == wave153_small.theta
        path2 = tmp_path / "w2.txt"
        strip.write_checkpoint(str(path2), fld, omega)
        assert path.read_bytes() == path2.read_bytes()

    def test_malformed_rejected(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("not a checkpoint\n")
        from wavebranch.errors import CheckpointFormatError

        with pytest.raises(CheckpointFormatError):
            strip.read_checkpoint(str(p))


from hypothesis import given, settings
from hypothesis import strategies as st_h


@given(
    vals=st_h.lists(
        st_h.floats(min_value=-10, max_value=10, allow_nan=False).map(
            lambda x: x if x != 0 else 0.125
        ),
        min_size=4,
        max_size=4,
    ),
    Rval=st_h.floats(min_value=0.1, max_value=5.0, allow_nan=False),
)
@settings(max_examples=25, deadline=None)
def test_checkpoint_floats_round_trip_exactly(tmp_path_factory, vals, Rval):
    """Arbitrary double values survive the decimal checkpoint format exactly."""
    g = strip.StripGrid(L=3.0, nq=9, np=9)
    h = np.linspace(0.0, 1.0, 9)[None, :] * np.ones((9, 1))
    h[3, 4] += vals[0] * 1e-18
    h[4, 5] += vals[1] * 1e-9
    h[5, 6] += abs(vals[2]) * 1e-3
    f = strip.StripField(g, h, float(Rval), 1.0 + abs(vals[3]))
    spec = VorticitySpec([vals[0], vals[1]])
    path = tmp_path_factory.mktemp("ckpt") / "c.txt"
    strip.write_checkpoint(str(path), f, spec)
    fld, omega = strip.read_checkpoint(str(path))
    assert np.array_equal(fld.h, f.h)
    assert fld.R == f.R and fld.theta == f.theta
    assert omega.coeffs == spec.coeffs
