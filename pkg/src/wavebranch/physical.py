"""Inverse hodograph reconstruction, flow-force evaluation and invariant
checks, and same-Bernoulli-constant pair finding.

The flow force is evaluated per q-column directly in hodograph variables,

    S(q) = int_0^1 [ (1 - h_q^2) / (2 h_p^2) + Omega(1) - Omega(p) - h + R ] h_p dp,

which is the depth-integrated momentum flux after the exact change of
variables dY = h_p dp; constancy of S across q is an invariant of every
steady flow and is reported as flow_force_variation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import PchipInterpolator

from .errors import PreconditionError
from .stream import depth as stream_depth, flow_force_of_R
from .strip import StripField
from .vorticity import VorticitySpec, eval_Omega

__all__ = [
    "WaveProfile",
    "WavePair",
    "reconstruct",
    "profile_csv",
    "verify_flow_force_selection",
    "find_pairs",
]


@dataclass(frozen=True)
class WaveProfile:
    """Physical-plane data of one strip solution."""

    X: np.ndarray
    xi: np.ndarray
    psi_y_surface: np.ndarray
    psi_y_bottom: np.ndarray
    depth_far: float
    R: float
    flow_force: float
    flow_force_variation: float
    flow_force_columns: np.ndarray
    mass_flux_defect: float
    surface_identity_defect: float


@dataclass(frozen=True)
class WavePair:
    """Two distinct solitary waves sharing one Bernoulli constant.

    Members are canonically ordered by arclength so that swapping the inputs
    yields an identical record.
    """

    t1: float
    t2: float
    R: float
    provenance: str  # 'TurningPoint' | 'SecondaryBranch'
    distance: float | None = None

    def __post_init__(self):
        if self.t2 < self.t1:
            lo, hi = self.t2, self.t1
            object.__setattr__(self, "t1", lo)
            object.__setattr__(self, "t2", hi)


def _node_derivatives(field: StripField):
    """h_q and h_p at all nodes: central in the interior, one-sided second
    order at boundaries, with the even-symmetry ghost at q = 0."""
    h = field.h
    grid = field.grid
    dq, dp = grid.dq, grid.dp
    nq = grid.nq

    hq = np.empty_like(h)
    hq[1:-1] = (h[2:] - h[:-2]) / (2.0 * dq)
    hq[0] = 0.0  # even symmetry
    hq[-1] = (3.0 * h[-1] - 4.0 * h[-2] + h[-3]) / (2.0 * dq)

    hp = np.empty_like(h)
    hp[:, 1:-1] = (h[:, 2:] - h[:, :-2]) / (2.0 * dp)
    hp[:, 0] = (-3.0 * h[:, 0] + 4.0 * h[:, 1] - h[:, 2]) / (2.0 * dp)
    hp[:, -1] = (3.0 * h[:, -1] - 4.0 * h[:, -2] + h[:, -3]) / (2.0 * dp)
    return hq, hp


def reconstruct(field: StripField, spec: VorticitySpec) -> WaveProfile:
    """Physical profile, velocities, per-column flow force, and invariants."""
    grid = field.grid
    h = field.h
    R = field.R
    hq, hp = _node_derivatives(field)
    if hp.min() <= 0.0:
        from .errors import StagnationBreachError

        raise StagnationBreachError("h_p <= 0 in reconstruction")

    xi = h[:, -1].copy()
    psi_y_surface = 1.0 / hp[:, -1]
    psi_y_bottom = 1.0 / hp[:, 0]

    om1 = eval_Omega(spec, 1.0)
    om = eval_Omega(spec, grid.p)
    integrand = ((1.0 - hq**2) / (2.0 * hp**2) + om1 - om[None, :] - h + R) * hp
    S_cols = simpson(integrand, x=grid.p, axis=1)
    flow_force = float(S_cols.mean())
    variation = float(np.abs(S_cols - flow_force).max())

    # mass flux per column: trapezoid of Psi_Y dY over the reconstructed samples
    Y = h
    psi_y = 1.0 / hp
    flux = np.sum(0.5 * (psi_y[:, 1:] + psi_y[:, :-1]) * np.diff(Y, axis=1), axis=1)
    mass_defect = float(np.abs(flux - 1.0).max())

    # surface Bernoulli identity: Psi_Y^2 (1 + xi'^2) = 2 (R - xi)
    xi_q = hq[:, -1]
    surf_defect = float(
        np.abs(psi_y_surface**2 * (1.0 + xi_q**2) - 2.0 * (R - xi)).max()
    )

    theta = field.theta
    d_far = stream_depth(spec, theta)
    return WaveProfile(
        X=grid.q.copy(),
        xi=xi,
        psi_y_surface=psi_y_surface,
        psi_y_bottom=psi_y_bottom,
        depth_far=float(d_far),
        R=R,
        flow_force=flow_force,
        flow_force_variation=variation,
        flow_force_columns=S_cols,
        mass_flux_defect=mass_defect,
        surface_identity_defect=surf_defect,
    )


def profile_csv(profile: WaveProfile) -> str:
    """CSV of the plotting columns (X, xi, psi_y_surface)."""
    lines = ["X,xi,psi_y_surface"]
    for x, xi, py in zip(profile.X, profile.xi, profile.psi_y_surface):
        lines.append(f"{float(x)!r},{float(xi)!r},{float(py)!r}")
    return "\n".join(lines) + "\n"


def verify_flow_force_selection(profile: WaveProfile, spec: VorticitySpec) -> float:
    """|S(profile) - S_-(R)|: the solitary wave must carry the supercritical
    stream's flow force at its own Bernoulli constant."""
    return abs(profile.flow_force - flow_force_of_R(spec, profile.R, "supercritical"))


def _fold_epsilon(ts, Rs, k_star, t_star):
    """One-sided R-interval width from the observed fold curvature.

    A parabola R ~ R* + c (t - t*)^2 is fitted through the three samples
    around the event; the interval covers the curvature drop over the shorter
    one-sided segment span, so both roots t1(R), t2(R) stay within the data.
    """
    t3 = np.asarray(ts[max(k_star - 1, 0) : k_star + 2], dtype=float)
    r3 = np.asarray(Rs[max(k_star - 1, 0) : k_star + 2], dtype=float)
    if len(t3) < 3:
        return None
    coef = np.polyfit(t3, r3, 2)
    curv = coef[0]
    if curv == 0.0:
        return None
    window = min(t_star - ts[0], ts[-1] - t_star)
    if window <= 0:
        return None
    return abs(curv) * window**2


def find_pairs(
    branch_summary,
    events,
    n_r: int = 10,
    resolve=None,
    secondary_summary=None,
    equal_R_tol: float = 1e-10,
):
    """Locate pairs of distinct solutions sharing one Bernoulli constant.

    branch_summary: sequence of (t, R, checkpoint) triples along the primary
    branch (checkpoint may be any reference object, or None for synthetic
    traces).  events: output of detect_events.

    TurningPoint mode: around each Turning event, R values are sampled on the
    one-sided interval selected by the local increasing/decreasing pattern and
    inverted on the pre-fold and post-fold segments by monotone interpolation.
    With `resolve(R, checkpoint)` given, both members are re-solved at exactly
    the shared R and the sup-norm distance of the fields is recorded.

    SecondaryBranch mode: with secondary_summary given and an EigenCrossing
    event present, R values are matched across the two branches near the
    crossing.
    """
    from .branch import EigenCrossing, Turning  # local import to avoid a cycle

    summary = [(float(t), float(R), ref) for (t, R, ref) in branch_summary]
    summary.sort(key=lambda z: z[0])
    ts = np.array([z[0] for z in summary])
    Rs = np.array([z[1] for z in summary])
    pairs: list[WavePair] = []

    for ev in events:
        if isinstance(ev, Turning):
            k_star = int(np.argmin(np.abs(ts - ev.t)))
            R_star = ev.R
            left = ts <= ev.t
            right = ts >= ev.t
            if left.sum() < 2 or right.sum() < 2:
                continue
            increasing_first = Rs[left][-1] >= Rs[left][0]
            eps = _fold_epsilon(ts, Rs, k_star, ev.t)
            if eps is None or eps <= 0:
                continue
            seg_l_t, seg_l_R = ts[left], Rs[left]
            seg_r_t, seg_r_R = ts[right], Rs[right]
            # usable R range must be reachable on both segments
            if increasing_first:
                lo = max(seg_l_R.min(), seg_r_R.min())
                eps = min(eps, 0.999 * (R_star - lo))
                R_grid = R_star - np.linspace(eps, eps / n_r, n_r)
            else:
                hi = min(seg_l_R.max(), seg_r_R.max())
                eps = min(eps, 0.999 * (hi - R_star))
                R_grid = R_star + np.linspace(eps, eps / n_r, n_r)
            if eps <= 0:
                continue
            inv_l = _monotone_inverse(seg_l_t, seg_l_R)
            inv_r = _monotone_inverse(seg_r_t, seg_r_R)
            for Rv in R_grid:
                t1 = inv_l(Rv)
                t2 = inv_r(Rv)
                if t1 is None or t2 is None:
                    continue
                dist = None
                if resolve is not None:
                    ref1 = summary[int(np.argmin(np.abs(ts - t1)))][2]
                    ref2 = summary[int(np.argmin(np.abs(ts - t2)))][2]
                    f1 = resolve(Rv, ref1)
                    f2 = resolve(Rv, ref2)
                    if abs(f1.R - f2.R) > equal_R_tol:
                        raise PreconditionError(
                            f"re-solved pair members differ in R by {abs(f1.R - f2.R):.3e}"
                        )
                    dist = float(np.abs(f1.h - f2.h).max())
                pairs.append(
                    WavePair(t1=float(t1), t2=float(t2), R=float(Rv),
                             provenance="TurningPoint", distance=dist)
                )
        elif isinstance(ev, EigenCrossing) and secondary_summary is not None:
            sec = sorted(((float(t), float(R), ref) for (t, R, ref) in secondary_summary),
                         key=lambda z: z[0])
            st = np.array([z[0] for z in sec])
            sR = np.array([z[1] for z in sec])
            prim_win = (ts >= ev.t) & (ts <= ev.t + (st.max() - st.min()))
            if prim_win.sum() < 2 or len(sec) < 2:
                continue
            inv_p = _monotone_inverse(ts[prim_win], Rs[prim_win])
            inv_s = _monotone_inverse(st, sR)
            lo = max(min(Rs[prim_win].min(), Rs[prim_win].max()), min(sR.min(), sR.max()))
            hi = min(max(Rs[prim_win].min(), Rs[prim_win].max()), max(sR.min(), sR.max()))
            if hi <= lo:
                continue
            for Rv in np.linspace(lo + (hi - lo) / (n_r + 1), hi - (hi - lo) / (n_r + 1), n_r):
                t1 = inv_p(Rv)
                t2 = inv_s(Rv)
                if t1 is None or t2 is None:
                    continue
                pairs.append(
                    WavePair(t1=float(t1), t2=float(t2), R=float(Rv),
                             provenance="SecondaryBranch", distance=None)
                )
    return pairs


def _monotone_inverse(ts, Rs):
    """Inverse of a sampled monotone segment R(t) via PCHIP + bisection.

    Returns a callable R -> t (or None when R is outside the segment range).
    The returned t satisfies |R(t) - R| below 1e-12 on the interpolant.
    """
    ts = np.asarray(ts, dtype=float)
    Rs = np.asarray(Rs, dtype=float)
    if Rs[-1] < Rs[0]:
        sgn = -1.0
    else:
        sgn = 1.0
    order = np.argsort(ts)
    ts, Rs = ts[order], Rs[order]
    interp = PchipInterpolator(ts, Rs)

    def inv(Rv: float):
        lo, hi = ts[0], ts[-1]
        flo, fhi = Rs[0] - Rv, Rs[-1] - Rv
        if flo * fhi > 0:
            return None
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = float(interp(mid)) - Rv
            if abs(fm) < 1e-13 or hi - lo < 1e-15 * max(1.0, abs(mid)):
                return mid
            if (fm > 0) == (sgn > 0):
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    return inv
