"""Pseudo-arclength continuation of the solitary branch (h(t), R(t)), spectral
monitoring (mu0, mu1 against the continuous-spectrum edge nu0), and detection
of turning points and candidate eigenvalue crossings.

The stepping core is generic over a small system protocol (residual, jacobian,
parameter derivative, inner-product weight) so it can be exercised in isolation
on closed-form fold problems; the PDE system wraps the strip discretization
and re-pins the far-field column to the supercritical stream of the current R
at every corrector iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigs, spsolve

from .errors import (
    BranchStallError,
    DegenerateTangentError,
    NonConvergenceError,
    NumericalError,
    StagnationBreachError,
    WavebranchError,
)
from . import spectrum1d
from .stream import (
    R_prime_of_theta,
    solve_theta_for_R,
    stream_at,
    stream_profile,
    stream_profile_dtheta,
)
from .strip import (
    StripField,
    StripGrid,
    assemble_jacobian,
    cached_summary,
    initial_guess,
    pack,
    residual_vector,
)
from .vorticity import VorticitySpec

__all__ = [
    "StepControl",
    "Diagnostics",
    "BranchPoint",
    "SpectrumInfo",
    "Turning",
    "EigenCrossing",
    "MarginBreach",
    "AcceptedStep",
    "arclength_continue",
    "SolitarySystem",
    "branch_point_from_field",
    "continue_branch",
    "tangent",
    "spectrum_at",
    "localized_fraction",
    "diagnostics_of",
    "loop_closure",
    "detect_events",
    "replay_checkpoint",
    "point_at_arclength",
]


@dataclass
class StepControl:
    """Adaptive step-control parameters for the continuation driver."""

    newton_tol: float = 1e-10
    max_newton_iters: int = 12
    ds_min_factor: float = 1.0 / 64.0
    ds_max_factor: float = 8.0
    grow: float = 1.3
    fast_iters: int = 4
    margin_fraction: float = 1e-2
    constraint_tol: float = 1e-11


@dataclass(frozen=True)
class Diagnostics:
    """Stagnation/overhang proxies monitored along the branch."""

    max_surface_slope: float
    surface_margin: float  # min over q of R - xi(q)
    bottom_margin: float  # min over q of Psi_Y at the bottom
    min_hp: float  # global minimum of the forward-difference h_p


@dataclass
class BranchPoint:
    """One accepted continuation point with its spectral data and diagnostics."""

    field: StripField | None
    t: float
    R: float
    mu0: float | None
    mu1: float
    nu0: float
    diag: Diagnostics | None = None
    tangent_x: np.ndarray | None = None
    tangent_lam: float | None = None
    ds: float = 0.0


@dataclass(frozen=True)
class Turning:
    t: float
    R: float
    bracket: tuple


@dataclass(frozen=True)
class EigenCrossing:
    t: float
    m_estimate: int | None
    bracket: tuple


@dataclass(frozen=True)
class MarginBreach:
    kind: str
    t: float


# ---------------------------------------------------------------------------
# generic pseudo-arclength driver
# ---------------------------------------------------------------------------


@dataclass
class AcceptedStep:
    x: np.ndarray
    lam: float
    t: float
    ds: float
    n_iters: int
    tangent_x: np.ndarray
    tangent_lam: float


def _ip(weight, a, b) -> float:
    return float(np.sum(weight * a * b))


def _norm_product(weight, dx, dlam) -> float:
    return float(np.sqrt(_ip(weight, dx, dx) + dlam * dlam))


def tangent(prev, curr, weight=1.0):
    """Normalized secant direction between two accepted points in (x, lambda).

    Accepts AcceptedStep/BranchPoint-like objects exposing packed state via
    (x, lam) attributes or (field, R); returns (tan_x, tan_lam) with unit norm
    in the weighted product inner product.
    """

    def state(p):
        if hasattr(p, "x"):
            return p.x, p.lam
        return pack(p.field), p.R

    x0, l0 = state(prev)
    x1, l1 = state(curr)
    dx = x1 - x0
    dlam = l1 - l0
    n = _norm_product(weight, dx, dlam)
    if n < 1e-14 * (1.0 + abs(l1)):
        raise DegenerateTangentError("coincident branch points; secant undefined")
    return dx / n, dlam / n


def _solve_bordered(J, F_lam, w_tan_x, tan_lam, rhs_top, rhs_bot):
    """Solve [[J, F_lam], [w_tan_x^T, tan_lam]] [dx; dlam] = [rhs_top; rhs_bot]."""
    n = rhs_top.shape[0]
    if sp.issparse(J):
        border = sp.bmat(
            [
                [J, sp.csc_matrix(F_lam.reshape(-1, 1))],
                [sp.csc_matrix(w_tan_x.reshape(1, -1)), sp.csc_matrix([[tan_lam]])],
            ],
            format="csc",
        )
        sol = spsolve(border, np.concatenate([rhs_top, [rhs_bot]]))
    else:
        border = np.block(
            [[np.atleast_2d(J), F_lam.reshape(-1, 1)], [w_tan_x.reshape(1, -1), tan_lam]]
        )
        sol = np.linalg.solve(border, np.concatenate([rhs_top, [rhs_bot]]))
    return sol[:n], float(sol[n])


def _corrector(sys_, x0, lam0, x_prev, lam_prev, tan_x, tan_lam, ds, ctrl):
    """Bordered Newton iteration onto {residual = 0} cap the arclength plane."""
    weight = sys_.ip_weight
    x, lam = x0.copy(), lam0
    for it in range(ctrl.max_newton_iters + 1):
        F = sys_.residual(x, lam)
        c = _ip(weight, tan_x, x - x_prev) + tan_lam * (lam - lam_prev) - ds
        sup = float(np.abs(F).max())
        if sup <= ctrl.newton_tol and abs(c) <= ctrl.constraint_tol:
            if sup > 1e-14:
                # polish: one more full step to push the residual to rounding level
                J = sys_.jacobian(x, lam)
                Fl = sys_.dresidual_dlam(x, lam)
                dx, dlam = _solve_bordered(J, Fl, weight * tan_x, tan_lam, -F, -c)
                x_try, lam_try = x + dx, lam + dlam
                try:
                    if np.abs(sys_.residual(x_try, lam_try)).max() < sup:
                        x, lam = x_try, lam_try
                except StagnationBreachError:
                    pass
            return x, lam, it
        if it == ctrl.max_newton_iters:
            break
        J = sys_.jacobian(x, lam)
        Fl = sys_.dresidual_dlam(x, lam)
        dx, dlam = _solve_bordered(J, Fl, weight * tan_x, tan_lam, -F, -c)
        x = x + dx
        lam = lam + dlam
    raise NonConvergenceError(
        f"bordered Newton did not converge in {ctrl.max_newton_iters} iterations"
    )


def arclength_continue(sys_, x0, lam0, tan0, ds, steps, ctrl=None, on_accept=None):
    """Generic pseudo-arclength continuation.

    sys_ must provide residual(x, lam), jacobian(x, lam), dresidual_dlam(x, lam)
    and an ip_weight attribute.  Returns (accepted steps, status); status is
    'completed' or the stop reason returned by on_accept.  Repeated corrector
    failure at the minimal step raises BranchStallError carrying the last
    accepted step.
    """
    ctrl = ctrl or StepControl()
    weight = sys_.ip_weight
    tan_x, tan_lam = tan0
    n0 = _norm_product(weight, tan_x, tan_lam)
    tan_x, tan_lam = tan_x / n0, tan_lam / n0

    accepted: list[AcceptedStep] = []
    x_prev, lam_prev, t = x0, lam0, 0.0
    ds_cur = ds
    ds_min = ds * ctrl.ds_min_factor
    ds_max = ds * ctrl.ds_max_factor

    for _ in range(steps):
        while True:
            x_pred = x_prev + ds_cur * tan_x
            lam_pred = lam_prev + ds_cur * tan_lam
            try:
                x_new, lam_new, iters = _corrector(
                    sys_, x_pred, lam_pred, x_prev, lam_prev, tan_x, tan_lam, ds_cur, ctrl
                )
                break
            except (WavebranchError, RuntimeError) as exc:
                if isinstance(exc, BranchStallError):
                    raise
                ds_cur *= 0.5
                if ds_cur < ds_min:
                    raise BranchStallError(
                        f"continuation stalled at ds={ds_cur:.3e} (minimum {ds_min:.3e}); "
                        f"last corrector failure: {exc.__class__.__name__}: {exc}",
                        last_good=accepted[-1] if accepted else None,
                    ) from exc
        t += ds_cur
        new_tan_x, new_tan_lam = tangent(
            _XL(x_prev, lam_prev), _XL(x_new, lam_new), weight=weight
        )
        # keep orientation along the branch
        if _ip(weight, new_tan_x, tan_x) + new_tan_lam * tan_lam < 0:
            new_tan_x, new_tan_lam = -new_tan_x, -new_tan_lam
        tan_x, tan_lam = new_tan_x, new_tan_lam
        step = AcceptedStep(
            x=x_new, lam=lam_new, t=t, ds=ds_cur, n_iters=iters,
            tangent_x=tan_x, tangent_lam=tan_lam,
        )
        accepted.append(step)
        x_prev, lam_prev = x_new, lam_new
        if iters <= ctrl.fast_iters:
            ds_cur = min(ds_cur * ctrl.grow, ds_max)
        if on_accept is not None:
            reason = on_accept(step)
            if reason:
                return accepted, reason
    return accepted, "completed"


@dataclass
class _XL:
    x: np.ndarray
    lam: float


# ---------------------------------------------------------------------------
# PDE system: strip residual with the far-field column re-pinned from R
# ---------------------------------------------------------------------------


class SolitarySystem:
    """Strip problem as a continuation system in (h-unknowns, R)."""

    def __init__(self, spec: VorticitySpec, grid: StripGrid):
        self.spec = spec
        self.grid = grid
        self.summary = cached_summary(spec)
        self.ip_weight = grid.dq * grid.dp
        self._theta_cache: dict[float, float] = {}
        self._col_cache: dict[float, np.ndarray] = {}
        self._dcol_cache: dict[float, np.ndarray] = {}
        npp = grid.np
        i = np.arange(grid.nq - 1)
        self.surface_rows = i * (npp - 1) + (npp - 2)

    def theta_of(self, R: float) -> float:
        if R not in self._theta_cache:
            self._trim()
            self._theta_cache[R] = solve_theta_for_R(
                self.spec, R, "supercritical", summary=self.summary
            )
        return self._theta_cache[R]

    def far_column(self, R: float) -> np.ndarray:
        if R not in self._col_cache:
            self._col_cache[R] = stream_profile(self.spec, self.theta_of(R), self.grid.p)
        return self._col_cache[R]

    def dfar_dR(self, R: float) -> np.ndarray:
        if R not in self._dcol_cache:
            theta = self.theta_of(R)
            dH = stream_profile_dtheta(self.spec, theta, self.grid.p)
            self._dcol_cache[R] = dH / R_prime_of_theta(self.spec, theta)
        return self._dcol_cache[R]

    def _trim(self):
        if len(self._theta_cache) > 512:
            self._theta_cache.clear()
            self._col_cache.clear()
            self._dcol_cache.clear()

    def field_of(self, x: np.ndarray, R: float) -> StripField:
        grid = self.grid
        h = np.zeros((grid.nq, grid.np))
        h[: grid.nq - 1, 1:] = x.reshape(grid.nq - 1, grid.np - 1)
        h[grid.nq - 1, :] = self.far_column(R)
        return StripField(grid=grid, h=h, R=R, theta=self.theta_of(R))

    def residual(self, x: np.ndarray, R: float) -> np.ndarray:
        return residual_vector(self.field_of(x, R), self.spec)

    def jacobian(self, x: np.ndarray, R: float):
        return assemble_jacobian(self.field_of(x, R), self.spec)

    def dresidual_dlam(self, x: np.ndarray, R: float) -> np.ndarray:
        _, J_bnd = assemble_jacobian(self.field_of(x, R), self.spec, with_boundary_cols=True)
        fr = np.asarray(J_bnd @ self.dfar_dR(R)).ravel()
        fr[self.surface_rows] -= 1.0
        return fr


def loop_closure(points, field: StripField, t: float, min_arc: float, tol: float) -> bool:
    """True when the new state revisits an earlier accepted point within tol
    (sup norm in h and in R) after travelling at least min_arc in arclength:
    the branch is a closed loop."""
    for p in points:
        if p.field is None:
            continue
        if t - p.t < min_arc:
            continue
        if abs(field.R - p.R) < tol and np.abs(field.h - p.field.h).max() < tol:
            return True
    return False


def diagnostics_of(field: StripField) -> Diagnostics:
    grid = field.grid
    h = field.h
    dq, dp = grid.dq, grid.dp
    xi = h[:, -1]
    slope_int = np.abs(xi[2:] - xi[:-2]) / (2.0 * dq)
    slope_end = abs(3.0 * xi[-1] - 4.0 * xi[-2] + xi[-3]) / (2.0 * dq)
    max_slope = float(max(slope_int.max(initial=0.0), slope_end))
    surface_margin = float((field.R - xi).min())
    hp_bottom = (4.0 * h[:, 1] - h[:, 2]) / (2.0 * dp)  # h(:,0) = 0
    bottom_margin = float((1.0 / hp_bottom).min())
    min_hp = float((np.diff(h, axis=1) / dp).min())
    return Diagnostics(
        max_surface_slope=max_slope,
        surface_margin=surface_margin,
        bottom_margin=bottom_margin,
        min_hp=min_hp,
    )


@dataclass
class SpectrumInfo:
    eigenvalues: np.ndarray
    localized: np.ndarray
    mu0: float | None
    mu1: float
    nu0: float


def localized_fraction(grid: StripGrid, vec: np.ndarray) -> float:
    """Fraction of the squared mass of an eigenvector (in unknown ordering)
    carried by the inner half-strip q < L/2."""
    nq, npp = grid.nq, grid.np
    scale = np.abs(vec).max()
    if scale == 0.0 or not np.isfinite(scale):
        return 0.0
    mass = (vec.reshape(nq - 1, npp - 1) / scale) ** 2
    inner = grid.q[: nq - 1] < 0.5 * grid.L
    total = mass.sum()
    if total == 0.0:
        return 0.0
    return float(mass[inner].sum() / total)


def spectrum_at(
    field: StripField,
    spec: VorticitySpec,
    k: int = 8,
    nu0_grid_n: int = 1024,
    sigma: float | None = None,
    localization_threshold: float = 0.99,
) -> SpectrumInfo:
    """k eigenvalues of the discrete linearization nearest the shift, with
    localization flags; mu0/mu1 extraction and the 1-D spectral edge nu0.

    The eigenproblem is the generalized pencil J w = mu B w with B the diagonal
    of 1/h_p at interior nodes and zero on the surface-condition rows: that
    weighting makes the discrete spectrum match the physical-plane linearized
    operator, whose continuous spectrum starts at nu0 (the plain hodograph
    eigenproblem differs by the factor h_p and would not be comparable to the
    1-D edge).  Eigenvectors with at least `localization_threshold` of their
    mass in q < L/2 are classified localized; mu1 falls back to the sentinel
    nu0 when no second localized eigenvalue lies below nu0.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    grid = field.grid
    nq, npp = grid.nq, grid.np
    s = stream_at(spec, field.theta, n_profile=65)
    nu0 = spectrum1d.nu0(spectrum1d.robin_problem(s, spec, grid_n=nu0_grid_n))

    J = assemble_jacobian(field, spec)
    hp_c = (field.h[: nq - 1, 2:] - field.h[: nq - 1, :-2]) / (2.0 * grid.dp)
    bmat = np.zeros((nq - 1, npp - 1))
    bmat[:, : npp - 2] = 1.0 / hp_c
    B = sp.diags(bmat.ravel())

    fixed_shift = sigma is not None
    if sigma is None:
        sigma = -1.5 * nu0
    # deterministic but unstructured start vector: a symmetric one (constant)
    # can span an invariant subspace at uniform streams and break Arnoldi
    v0 = np.random.default_rng(1234).standard_normal(J.shape[0])
    v0 /= np.linalg.norm(v0)
    Jc, Bc = J.tocsc(), B.tocsc()
    for attempt in range(4):
        try:
            vals, vecs = eigs(Jc, k=k, M=Bc, sigma=sigma, which="LM", v0=v0)
        except (ArpackError, ArpackNoConvergence) as exc:
            raise NumericalError(f"shift-invert eigensolve failed: {exc}") from exc
        scale = 1.0 + np.abs(vals.real).max()
        if np.abs(vals.imag).max() > 1e-6 * scale:
            raise NumericalError(
                f"unexpected complex eigenvalues (max imag {np.abs(vals.imag).max():.3e})"
            )
        order = np.argsort(vals.real)
        vals = vals.real[order]
        vecs = vecs.real[:, order]

        frac = np.array(
            [localized_fraction(grid, vecs[:, j]) for j in range(vecs.shape[1])]
        )
        localized = frac >= localization_threshold
        if fixed_shift or np.any(localized & (vals < 0.0)):
            break
        # the lowest mode may sit far below the shift (steep waves): deepen
        sigma *= 4.0

    loc_vals = vals[localized]
    mu0 = float(loc_vals[0]) if loc_vals.size else None
    below = loc_vals[1:][loc_vals[1:] < nu0 * (1.0 - 1e-9)] if loc_vals.size else np.array([])
    mu1 = float(below[0]) if below.size else float(nu0)
    return SpectrumInfo(eigenvalues=vals, localized=localized, mu0=mu0, mu1=mu1, nu0=float(nu0))


def branch_point_from_field(
    field: StripField,
    spec: VorticitySpec,
    t: float = 0.0,
    k: int = 8,
    nu0_grid_n: int = 1024,
) -> BranchPoint:
    info = spectrum_at(field, spec, k=k, nu0_grid_n=nu0_grid_n)
    return BranchPoint(
        field=field,
        t=t,
        R=field.R,
        mu0=info.mu0,
        mu1=info.mu1,
        nu0=info.nu0,
        diag=diagnostics_of(field),
    )


def _initial_tangent(spec: VorticitySpec, start: StripField, weight: float):
    """First-step direction (d guess / dR, 1), normalized."""
    R = start.R
    summary = cached_summary(spec)
    delta = max(1e-7, 1e-6 * (R - summary.R_c))
    gp = initial_guess(spec, R + delta, start.grid)
    gm = initial_guess(spec, R - delta, start.grid)
    dx = (pack(gp) - pack(gm)) / (2.0 * delta)
    n = _norm_product(weight, dx, 1.0)
    return dx / n, 1.0 / n


def continue_branch(
    start: BranchPoint,
    spec: VorticitySpec,
    steps: int,
    ds: float,
    ctrl: StepControl | None = None,
    k_eigs: int = 8,
    nu0_grid_n: int = 1024,
    direction: int = +1,
):
    """Continue the solitary branch from a solved, spectrally-tagged start point.

    direction +1 follows increasing R initially; -1 walks down the branch
    toward the critical stream.  Returns (points, status): points includes the
    start (t = 0); status is 'completed' or 'margin-breach:<kind>' naming the
    proxied stagnation or overhang alternative that terminated the run.
    """
    ctrl = ctrl or StepControl()
    if start.field is None:
        raise ValueError("start point must carry a solved field")
    sys_ = SolitarySystem(spec, start.field.grid)
    x0 = pack(start.field)
    tan0 = _initial_tangent(spec, start.field, sys_.ip_weight)
    if direction < 0:
        tan0 = (-tan0[0], -tan0[1])
    if start.diag is None:
        start.diag = diagnostics_of(start.field)
    init_diag = start.diag

    points: list[BranchPoint] = [start]

    def margin_breach(diag: Diagnostics):
        frac = ctrl.margin_fraction
        if diag.surface_margin < frac * init_diag.surface_margin:
            return "margin-breach:surface-stagnation"
        if diag.bottom_margin < frac * init_diag.bottom_margin:
            return "margin-breach:bottom-stagnation"
        if diag.min_hp < frac * init_diag.min_hp:
            return "margin-breach:unidirectionality"
        slope_ref = max(init_diag.max_surface_slope, 1e-3)
        if diag.max_surface_slope > slope_ref / frac:
            return "margin-breach:overhanging"
        return None

    def on_accept(step: AcceptedStep):
        fld = sys_.field_of(step.x, step.lam)
        if loop_closure(points, fld, step.t + start.t, min_arc=3.0 * ds,
                        tol=10.0 * ctrl.newton_tol):
            points.append(
                BranchPoint(field=fld, t=start.t + step.t, R=step.lam, mu0=None,
                            mu1=np.nan, nu0=np.nan, diag=diagnostics_of(fld),
                            tangent_x=step.tangent_x, tangent_lam=step.tangent_lam,
                            ds=step.ds)
            )
            return "loop-closure"
        diag = diagnostics_of(fld)
        breach = margin_breach(diag)
        if breach:
            # diagnostics already signal physical breakdown; spectral data at
            # the terminal point is best-effort only
            try:
                info = spectrum_at(fld, spec, k=k_eigs, nu0_grid_n=nu0_grid_n)
                mu0, mu1, nu0 = info.mu0, info.mu1, info.nu0
            except NumericalError:
                mu0, mu1, nu0 = None, np.nan, np.nan
        else:
            info = spectrum_at(fld, spec, k=k_eigs, nu0_grid_n=nu0_grid_n)
            mu0, mu1, nu0 = info.mu0, info.mu1, info.nu0
        pt = BranchPoint(
            field=fld,
            t=start.t + step.t,
            R=step.lam,
            mu0=mu0,
            mu1=mu1,
            nu0=nu0,
            diag=diag,
            tangent_x=step.tangent_x,
            tangent_lam=step.tangent_lam,
            ds=step.ds,
        )
        points.append(pt)
        if breach:
            return breach
        if pt.mu0 is None or pt.mu0 >= 0.0:
            raise NumericalError(
                f"lowest localized eigenvalue not negative at t={pt.t}: {pt.mu0}"
            )
        if pt.mu1 - pt.mu0 <= 1e-8:
            raise NumericalError(f"mu0 simplicity gap violated at t={pt.t}")
        if pt.nu0 <= 0.0:
            raise NumericalError(f"nu0 not positive at t={pt.t}")
        return None

    try:
        _, status = arclength_continue(
            sys_, x0, start.R, tan0, ds, steps, ctrl=ctrl, on_accept=on_accept
        )
    except (BranchStallError, NumericalError) as exc:
        exc.last_good = points[-1] if points else None
        exc.partial_points = points
        raise
    return points, status


def replay_checkpoint(field: StripField, spec: VorticitySpec) -> float:
    """Sup-norm movement of one undamped Newton step at fixed R and far field.

    Converged checkpoints must replay below 1e-12.
    """
    J = assemble_jacobian(field, spec)
    rhs = -residual_vector(field, spec)
    dx = spsolve(J.tocsc(), rhs)
    return float(np.abs(dx).max())


def point_at_arclength(
    from_point: BranchPoint,
    spec: VorticitySpec,
    t_target: float,
    ctrl: StepControl | None = None,
    with_spectrum: bool = True,
    k_eigs: int = 8,
    nu0_grid_n: int = 1024,
) -> BranchPoint:
    """Re-solve the branch at a prescribed arclength by one bordered step from
    an accepted point, using its stored tangent."""
    if from_point.field is None or from_point.tangent_x is None:
        raise ValueError("from_point must carry a field and a stored tangent")
    ctrl = ctrl or StepControl()
    sys_ = SolitarySystem(spec, from_point.field.grid)
    ds = t_target - from_point.t
    x_prev = pack(from_point.field)
    tan_x, tan_lam = from_point.tangent_x, from_point.tangent_lam
    x_pred = x_prev + ds * tan_x
    lam_pred = from_point.R + ds * tan_lam
    x_new, lam_new, _ = _corrector(
        sys_, x_pred, lam_pred, x_prev, from_point.R, tan_x, tan_lam, ds, ctrl
    )
    fld = sys_.field_of(x_new, lam_new)
    if with_spectrum:
        info = spectrum_at(fld, spec, k=k_eigs, nu0_grid_n=nu0_grid_n)
        mu0, mu1, nu0 = info.mu0, info.mu1, info.nu0
    else:
        mu0, mu1, nu0 = None, np.nan, np.nan
    return BranchPoint(
        field=fld,
        t=t_target,
        R=lam_new,
        mu0=mu0,
        mu1=mu1,
        nu0=nu0,
        diag=diagnostics_of(fld),
        tangent_x=tan_x,
        tangent_lam=tan_lam,
        ds=ds,
    )


# ---------------------------------------------------------------------------
# event detection on accepted sequences (PDE or synthetic)
# ---------------------------------------------------------------------------


def _refine_extremum(ts, Rs, k, r_eval):
    """Refine a turning point inside [ts[k-1], ts[k+1]]."""
    a, b = ts[k - 1], ts[k + 1]
    if r_eval is None:
        if len(ts) >= 4:
            spl = CubicSpline(ts, Rs)
            dspl = spl.derivative()
            roots = [r for r in np.atleast_1d(dspl.roots()) if a <= r <= b and abs(r.imag) == 0]
            if roots:
                t_star = float(min(roots, key=lambda r: abs(r - ts[k])))
                return t_star, float(spl(t_star))
        # parabola vertex through the three bracketing samples
        t3 = np.asarray(ts[k - 1 : k + 2], dtype=float)
        r3 = np.asarray(Rs[k - 1 : k + 2], dtype=float)
        coef = np.polyfit(t3, r3, 2)
        t_star = float(-coef[1] / (2.0 * coef[0]))
        return t_star, float(np.polyval(coef, t_star))
    # bisection on the centered-difference slope of the re-solving evaluator
    delta = (b - a) / 16.0

    def slope(t):
        return (r_eval(t + delta) - r_eval(t - delta)) / (2.0 * delta)

    lo, hi = a + delta, b - delta
    slo, shi = slope(lo), slope(hi)
    if slo * shi > 0:
        return ts[k], Rs[k]
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        sm = slope(mid)
        if slo * sm <= 0:
            hi, shi = mid, sm
        else:
            lo, slo = mid, sm
        if hi - lo < 1e-12 * max(1.0, abs(mid)):
            break
    t_star = 0.5 * (lo + hi)
    return float(t_star), float(r_eval(t_star))


def _secant_root(f, ta, tb, fa=None, fb=None, tol=1e-13, max_iter=80):
    """Secant iteration with bracket projection; (ta, tb) must bracket a root."""
    fa = f(ta) if fa is None else fa
    fb = f(tb) if fb is None else fb
    lo, hi = (ta, tb) if ta < tb else (tb, ta)
    t0, f0, t1, f1 = ta, fa, tb, fb
    for _ in range(max_iter):
        if f1 == f0:
            t2 = 0.5 * (lo + hi)
        else:
            t2 = t1 - f1 * (t1 - t0) / (f1 - f0)
            if not (lo <= t2 <= hi):
                t2 = 0.5 * (lo + hi)
        f2 = f(t2)
        if f2 == 0.0 or abs(t2 - t1) < tol * max(1.0, abs(t2)):
            return t2
        if (f2 < 0) == (f1 < 0):
            t0, f0 = t1, f1
        t1, f1 = t2, f2
        # shrink the projection bracket
        if f2 * f(lo) <= 0:
            hi = t2
        else:
            lo = t2
    return t1


def _estimate_crossing_order(ts, mu1s, t_star):
    """Log-log slope of |mu1| against |t - t_star| over the 6 nearest samples."""
    ts = np.asarray(ts, dtype=float)
    mu = np.asarray(mu1s, dtype=float)
    d = np.abs(ts - t_star)
    ok = (d > 1e-12) & (np.abs(mu) > 0)
    if ok.sum() < 2:
        return None
    idx = np.argsort(d[ok])[:6]
    x = np.log(d[ok][idx])
    y = np.log(np.abs(mu[ok][idx]))
    if len(x) < 2:
        return None
    slope = np.polyfit(x, y, 1)[0]
    return int(round(slope))


def detect_events(
    points,
    r_eval=None,
    mu1_eval=None,
    margin_fraction: float | None = None,
):
    """Scan an accepted branch for turning points, eigenvalue crossings, and
    margin breaches.

    points: sequence of BranchPoint (synthetic traces may use field=None).
    r_eval / mu1_eval: optional callables t -> value used for refinement; by
    default refinement interpolates the sampled trace.  Returns a list of
    Turning / EigenCrossing / MarginBreach events (possibly empty).
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need at least 3 accepted points")
    ts = np.array([p.t for p in pts])
    Rs = np.array([p.R for p in pts])
    events = []

    dR = np.diff(Rs)
    signs = np.sign(dR)
    nz = np.nonzero(signs != 0)[0]
    for a, c in zip(nz[:-1], nz[1:]):
        # a zero increment between opposite-signed neighbours (symmetric
        # samples around the extremum) still marks a fold
        if signs[a] == signs[c]:
            continue
        k = (a + c + 1) // 2
        k = min(max(k, 1), len(pts) - 2)
        t_star, R_star = _refine_extremum(ts, Rs, k, r_eval)
        events.append(Turning(t=t_star, R=R_star, bracket=(pts[a], pts[c + 1])))

    mu1s = np.array([p.mu1 for p in pts], dtype=float)
    nu0s = np.array([p.nu0 for p in pts], dtype=float)
    strict = mu1s < nu0s - 1e-12 * np.maximum(1.0, np.abs(nu0s))
    for k in range(len(pts) - 1):
        if not (strict[k] and strict[k + 1]):
            continue
        if mu1s[k] == 0.0:
            # a sample sitting exactly on the crossing: confirm the sign flip
            # around it and report it directly
            if 0 < k and strict[k - 1] and mu1s[k - 1] * mu1s[k + 1] < 0:
                m_est = _estimate_crossing_order(ts, mu1s, ts[k])
                events.append(
                    EigenCrossing(t=float(ts[k]), m_estimate=m_est,
                                  bracket=(pts[k - 1], pts[k + 1]))
                )
            continue
        if mu1s[k + 1] == 0.0 or (mu1s[k] > 0) == (mu1s[k + 1] > 0):
            continue
        if mu1_eval is not None:
            f = mu1_eval
        else:
            spl = CubicSpline(ts, mu1s)
            f = lambda t: float(spl(t))  # noqa: E731
        t_star = _secant_root(f, ts[k], ts[k + 1], mu1s[k], mu1s[k + 1])
        m_est = _estimate_crossing_order(ts, mu1s, t_star)
        events.append(EigenCrossing(t=float(t_star), m_estimate=m_est, bracket=(pts[k], pts[k + 1])))

    if margin_fraction is not None and pts[0].diag is not None:
        init = pts[0].diag
        seen = set()
        for p in pts[1:]:
            if p.diag is None:
                continue
            checks = [
                ("surface-stagnation", p.diag.surface_margin < margin_fraction * init.surface_margin),
                ("bottom-stagnation", p.diag.bottom_margin < margin_fraction * init.bottom_margin),
                ("unidirectionality", p.diag.min_hp < margin_fraction * init.min_hp),
                (
                    "overhanging",
                    p.diag.max_surface_slope
                    > max(init.max_surface_slope, 1e-3) / margin_fraction,
                ),
            ]
            for kind, hit in checks:
                if hit and kind not in seen:
                    seen.add(kind)
                    events.append(MarginBreach(kind=kind, t=p.t))
    return events
