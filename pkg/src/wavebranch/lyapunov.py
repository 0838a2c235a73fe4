"""Lyapunov-Schmidt reduction at a simple eigenvalue and branch switching.

The reduction is implemented generically over finite-dimensional analytic
systems F(x, lambda) = 0 with F(0, lambda) = 0: the state is split along the
crossing eigenvector v(lambda) and its complement, the complement equation is
solved by Newton iteration, and the scalar reduced map

    B(s, lambda) = s mu(lambda) + <Fhat(s v + w(s, lambda), lambda), what>

is sampled on a lattice.  Zero curves of B are traced by sign scan plus
secant-type refinement and classified (vertical / degenerate-eigenvalue /
regular); the same machinery seeds branch switching at a PDE eigenvalue
crossing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigs

from .errors import (
    IllPosedProjectorError,
    NoSecondaryBranchError,
    NumericalError,
    OutsideChartError,
    PreconditionError,
    ResolutionError,
)

__all__ = [
    "EigenData",
    "AnalyticFamily",
    "finite_family",
    "project",
    "solve_complement",
    "reduced_map",
    "ReducedProblem",
    "reduced_problem",
    "BranchCurve",
    "LocalBranches",
    "local_branches",
    "seed_from_family",
    "switch_branch",
    "pitchfork_family",
    "cubic_mu_family",
    "vertical_family",
    "even_mu_family",
    "MODEL_GALLERY",
]


@dataclass(frozen=True)
class EigenData:
    """Crossing eigenpair at one lambda: eigenvalue, right eigenvector v, and
    adjoint w normalized so <v, w> = 1 in the family inner product."""

    mu: float
    v: np.ndarray
    w: np.ndarray


@dataclass
class AnalyticFamily:
    """Analytic system F: R^n x R -> R^n with the trivial solution line
    F(0, lambda) = 0 and a simple eigenvalue of D_x F(0, lambda) crossing 0 at
    lambda = 0."""

    n: int
    f: Callable[[np.ndarray, float], np.ndarray]
    df: Callable[[np.ndarray, float], np.ndarray]
    eigendata: Callable[[float], EigenData]
    ip_weight: float | np.ndarray = 1.0

    def ip(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(self.ip_weight * a * b))


def finite_family(f, df, n, ip_weight=1.0) -> AnalyticFamily:
    """AnalyticFamily with eigen-data computed by dense eigensolves of
    A(lambda) = D_x F(0, lambda); selects the eigenvalue nearest zero (valid on
    the small-lambda charts used here)."""

    def eigendata(lam: float) -> EigenData:
        A = np.asarray(df(np.zeros(n), lam), dtype=float)
        vals, vecs = np.linalg.eig(A)
        k = int(np.argmin(np.abs(vals)))
        if abs(vals[k].imag) > 1e-10 * (1 + abs(vals[k])):
            raise NumericalError("crossing eigenvalue is not real")
        mu = float(vals[k].real)
        v = vecs[:, k].real
        lvals, lvecs = np.linalg.eig(A.T)
        kl = int(np.argmin(np.abs(lvals - vals[k])))
        w = lvecs[:, kl].real
        # deterministic orientation
        imax = int(np.argmax(np.abs(v)))
        if v[imax] < 0:
            v = -v
        v = v / np.sqrt(float(np.sum(ip_weight * v * v)))
        denom = float(np.sum(ip_weight * v * w))
        if abs(denom) < 1e-8 * np.linalg.norm(w):
            raise IllPosedProjectorError("eigen-normalization <v, z> degenerate")
        return EigenData(mu=mu, v=v, w=w / denom)

    return AnalyticFamily(n=n, f=f, df=df, eigendata=eigendata, ip_weight=ip_weight)


def project(family: AnalyticFamily, lam: float, x: np.ndarray):
    """Split x = s*v + complement along the crossing eigenvector at lambda."""
    ed = family.eigendata(lam)
    s = family.ip(x, ed.w)
    return s, x - s * ed.v


def _phat(family: AnalyticFamily, ed: EigenData, y: np.ndarray) -> np.ndarray:
    return family.ip(y, ed.w) * ed.v


def solve_complement(
    family: AnalyticFamily,
    s: float,
    lam: float,
    tol: float = 1e-12,
    max_iter: int = 60,
) -> np.ndarray:
    """Solve the range-complement equation (I - P)(A w + Fhat(s v + w)) = 0
    with P w = 0, by bordered Newton iteration from w = 0."""
    ed = family.eigendata(lam)
    w = np.zeros(family.n)
    wipz = np.asarray(family.ip_weight * ed.w, dtype=float)
    if np.ndim(wipz) == 0:
        wipz = np.full(family.n, float(wipz))
    for _ in range(max_iter):
        x = s * ed.v + w
        F = family.f(x, lam)
        G = F - _phat(family, ed, F)
        con = family.ip(w, ed.w)
        if max(np.abs(G).max(), abs(con)) <= tol:
            return w
        M = np.asarray(family.df(x, lam), dtype=float)
        # bordered regularization of the singular complement Jacobian
        border = np.block(
            [[M, ed.v.reshape(-1, 1)], [wipz.reshape(1, -1), np.zeros((1, 1))]]
        )
        rhs = np.concatenate([-F, [-con]])
        try:
            sol = np.linalg.solve(border, rhs)
        except np.linalg.LinAlgError as exc:
            raise OutsideChartError(f"complement solve failed: {exc}") from exc
        w = w + sol[: family.n]
    raise OutsideChartError(
        f"complement Newton did not converge at (s, lambda) = ({s}, {lam})"
    )


def reduced_map(family: AnalyticFamily, s: float, lam: float, tol: float = 1e-12):
    """Value of the scalar reduced map B(s, lambda) and the complement w."""
    ed = family.eigendata(lam)
    w = solve_complement(family, s, lam, tol=tol)
    x = s * ed.v + w
    A0 = np.asarray(family.df(np.zeros(family.n), lam), dtype=float)
    fhat = family.f(x, lam) - A0 @ x
    return s * ed.mu + family.ip(fhat, ed.w), w


@dataclass
class ReducedProblem:
    """Sampled reduction on |s| <= s_max, |lambda| <= lam_max."""

    s_vals: np.ndarray
    lam_vals: np.ndarray
    B: np.ndarray  # (ns, nlam)
    w_norms: np.ndarray  # (ns, nlam)
    w_scaling_exponent: float
    m: int | None
    mu_m: float | None


def _estimate_m(family: AnalyticFamily, lam_max: float):
    """Crossing order from log-log growth of |mu(lambda)|; None when mu is
    identically zero at sampling resolution."""
    lams = lam_max * np.geomspace(0.02, 1.0, 8)
    mus = np.array([family.eigendata(l).mu for l in lams])
    if np.abs(mus).max() < 1e-12:
        return None, None
    ok = np.abs(mus) > 1e-14
    if ok.sum() < 2:
        return None, None
    slope, _ = np.polyfit(np.log(lams[ok]), np.log(np.abs(mus[ok])), 1)
    m = int(round(slope))
    mu_m = float(mus[-1] / lams[-1] ** m)
    return m, mu_m


def reduced_problem(
    family: AnalyticFamily,
    s_max: float,
    lam_max: float,
    ns: int = 11,
    nlam: int = 11,
    tol: float = 1e-12,
) -> ReducedProblem:
    s_vals = np.linspace(-s_max, s_max, ns)
    lam_vals = np.linspace(-lam_max, lam_max, nlam)
    B = np.empty((ns, nlam))
    w_norms = np.empty((ns, nlam))
    for i, s in enumerate(s_vals):
        for j, lam in enumerate(lam_vals):
            b, w = reduced_map(family, s, lam, tol=tol)
            B[i, j] = b
            w_norms[i, j] = np.linalg.norm(w)
    # w = O(s^2): fitted exponent over a decade of s at lambda = 0
    svals = s_max * np.geomspace(1e-3 / s_max if s_max > 1e-3 else 0.1, 1.0, 7)
    svals = s_max * np.geomspace(0.01, 1.0, 7)
    norms = np.array([np.linalg.norm(solve_complement(family, s, 0.0, tol=tol)) for s in svals])
    ok = norms > 1e-300
    expo = float(np.polyfit(np.log(svals[ok]), np.log(norms[ok]), 1)[0]) if ok.sum() >= 2 else np.nan
    m, mu_m = _estimate_m(family, lam_max)
    return ReducedProblem(
        s_vals=s_vals, lam_vals=lam_vals, B=B, w_norms=w_norms,
        w_scaling_exponent=expo, m=m, mu_m=mu_m,
    )


@dataclass
class BranchCurve:
    """One traced zero curve of the reduced map, on one side of s = 0."""

    side: int  # +1 or -1
    s: np.ndarray
    lam: np.ndarray
    classification: str  # 'vertical' | 'degenerate-eigenvalue' | 'regular'
    partner: int | None = None  # index of the paired curve on the other side


@dataclass
class LocalBranches:
    curves: list
    m_estimate: int | None
    mu_m: float | None
    certified: bool  # branch-count bounds certified only for odd m


def _column_roots(family, s, lam_vals, B_col, tol, zero_tol):
    """Roots of lambda -> B(s, lambda) from lattice sign changes."""
    roots = []
    for j in range(len(lam_vals) - 1):
        b0, b1 = B_col[j], B_col[j + 1]
        if abs(b0) <= zero_tol and abs(b1) <= zero_tol:
            continue  # handled by the identically-zero column test
        if abs(b0) <= zero_tol:
            roots.append(lam_vals[j])
            continue
        if b0 * b1 < 0:
            lo, hi = lam_vals[j], lam_vals[j + 1]
            flo = b0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm, _ = reduced_map(family, s, mid, tol=tol)
                if fm == 0.0:
                    lo = hi = mid
                    break
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
                if hi - lo < 1e-13 * max(1.0, abs(mid)):
                    break
            roots.append(0.5 * (lo + hi))
    if abs(B_col[-1]) <= zero_tol and (len(roots) == 0 or abs(roots[-1] - lam_vals[-1]) > 1e-12):
        roots.append(lam_vals[-1])
    return roots


def local_branches(
    family: AnalyticFamily,
    s_max: float,
    lam_max: float,
    ns: int = 17,
    nlam: int = 41,
    tol: float = 1e-12,
    zero_tol: float = 1e-10,
) -> LocalBranches:
    """Trace zero curves of the reduced map on |s| <= s_max, |lambda| <= lam_max.

    The lattice sign scan is refined by bisection in lambda per s-column; the
    refined roots are chained across adjacent columns into curves, grouped by
    the side of s = 0, paired index-wise in increasing-lambda order, and
    classified.  Columns on which B vanishes identically signal a vertical
    family (lambda-independent solutions).
    """
    m, mu_m = _estimate_m(family, lam_max)
    s_side = np.linspace(s_max / ns, s_max, ns)
    lam_vals = np.linspace(-lam_max, lam_max, nlam)

    def trace_side(side: int):
        cols = []
        vertical_cols = 0
        for s_abs in s_side:
            s = side * s_abs
            B_col = np.empty(nlam)
            for j, lam in enumerate(lam_vals):
                B_col[j], _ = reduced_map(family, s, lam, tol=tol)
            scale = max(1.0, np.abs(B_col).max())
            if np.abs(B_col).max() <= zero_tol:
                vertical_cols += 1
                cols.append("vertical")
                continue
            cols.append(sorted(_column_roots(family, s, lam_vals, B_col, tol, zero_tol)))
        if vertical_cols == len(s_side):
            return [
                BranchCurve(
                    side=side,
                    s=side * s_side,
                    lam=np.zeros_like(s_side),
                    classification="vertical",
                )
            ]
        # chain roots across columns by nearest-lambda matching; the jump
        # tolerance must cover the per-column advance of a steep curve
        dlam = lam_vals[1] - lam_vals[0]
        jump_tol = max(3.0 * dlam, 4.0 * lam_max / ns)
        curves: list[list[tuple[float, float]]] = []
        open_curves: list[list[tuple[float, float]]] = []
        for idx, roots in enumerate(cols):
            if roots == "vertical":
                continue
            s = side * s_side[idx]
            new_open = []
            used = [False] * len(roots)
            for curve in open_curves:
                last_lam = curve[-1][1]
                best, bestd = None, None
                for rj, r in enumerate(roots):
                    if used[rj]:
                        continue
                    dd = abs(r - last_lam)
                    if bestd is None or dd < bestd:
                        best, bestd = rj, dd
                if best is not None and bestd <= jump_tol:
                    curve.append((s, roots[best]))
                    used[best] = True
                    new_open.append(curve)
                else:
                    curves.append(curve)
            for rj, r in enumerate(roots):
                if not used[rj]:
                    new_open.append([(s, r)])
            open_curves = new_open
        curves.extend(open_curves)
        out = []
        for c in curves:
            if len(c) < max(3, ns // 4):
                continue  # too short to classify: lattice noise
            arr = np.asarray(c)
            out.append(
                BranchCurve(side=side, s=arr[:, 0], lam=arr[:, 1], classification="")
            )
        return out

    curves = trace_side(+1) + trace_side(-1)
    if m is not None and m % 2 == 1 and not any(c.side == +1 for c in curves):
        raise ResolutionError(
            "odd crossing order but no zero curve found: lattice too coarse"
        )

    # classify
    for c in curves:
        if c.classification == "vertical":
            continue
        lam_span = c.lam.max() - c.lam.min()
        if lam_span < 1e-9 * max(1.0, lam_max):
            c.classification = "vertical"
        elif all(abs(family.eigendata(l).mu) < 1e-8 for l in c.lam[:: max(1, len(c.lam) // 4)]):
            c.classification = "degenerate-eigenvalue"
        else:
            c.classification = "regular"

    # pair positive and negative side curves in increasing-lambda order
    pos = [i for i, c in enumerate(curves) if c.side == +1]
    neg = [i for i, c in enumerate(curves) if c.side == -1]

    def order_key(ci):
        c = curves[ci]
        k = int(np.argmin(np.abs(c.s)))
        return c.lam[k]

    pos.sort(key=order_key)
    neg.sort(key=order_key)
    for a, b in zip(pos, neg):
        curves[a].partner = b
        curves[b].partner = a

    certified = m is not None and m % 2 == 1 and (mu_m is not None and mu_m != 0.0)
    return LocalBranches(curves=curves, m_estimate=m, mu_m=mu_m, certified=certified)


def seed_from_family(
    family: AnalyticFamily,
    s_max: float,
    lam_max: float,
    ns: int = 7,
    nlam: int = 9,
    s_min_frac: float = 0.2,
    tol: float = 1e-12,
    zero_tol: float = 1e-9,
):
    """Pick a non-trivial zero (s0, lambda0) of the reduced map on a coarse
    lattice and assemble the corresponding state s0*v + w(s0, lambda0).

    Raises NoSecondaryBranchError when every lattice zero lies on the trivial
    branch s = 0.
    """
    lam_vals = np.linspace(-lam_max, lam_max, nlam)
    s_abs = np.linspace(s_min_frac * s_max, s_max, ns)
    candidates = []
    for s_a in s_abs:
        for side in (+1, -1):
            s = side * s_a
            B_col = np.empty(nlam)
            for j, lam in enumerate(lam_vals):
                B_col[j], _ = reduced_map(family, s, lam, tol=tol)
            if np.abs(B_col).max() <= zero_tol:
                candidates.append((s, 0.0))
                continue
            roots = _column_roots(family, s, lam_vals, B_col, tol, zero_tol)
            for r in roots:
                candidates.append((s, r))
        if candidates:
            break
    if not candidates:
        raise NoSecondaryBranchError(
            "all reduced-map lattice zeros lie on the trivial branch"
        )
    s0, lam0 = min(candidates, key=lambda c: (abs(c[0]), abs(c[1])))
    ed = family.eigendata(lam0)
    w0 = solve_complement(family, s0, lam0, tol=tol)
    return s0, lam0, s0 * ed.v + w0


# ---------------------------------------------------------------------------
# PDE-level branch switching
# ---------------------------------------------------------------------------


def _pencil_eigendata(J, M, ip_weight, sigma=1e-10):
    """Right/left eigenpair of the constrained pencil J w = mu M w nearest 0,
    normalized <v, v> = 1 and <v, w> = 1 in the grid inner product."""
    v0 = np.ones(J.shape[0]) / np.sqrt(J.shape[0])
    vals, vecs = eigs(J.tocsc(), k=1, M=M.tocsc(), sigma=sigma, which="LM", v0=v0)
    lvals, lvecs = eigs(J.T.tocsc(), k=1, M=M.tocsc(), sigma=sigma, which="LM", v0=v0)
    mu = float(vals[0].real)
    v = vecs[:, 0].real
    w = lvecs[:, 0].real
    imax = int(np.argmax(np.abs(v)))
    if v[imax] < 0:
        v = -v
    v = v / np.sqrt(float(np.sum(ip_weight * v * v)))
    denom = float(np.sum(ip_weight * v * w))
    if abs(denom) < 1e-10 * np.linalg.norm(w):
        raise IllPosedProjectorError("PDE eigen-normalization degenerate")
    return EigenData(mu=mu, v=v, w=w / denom)


def family_from_branch(bracket, spec, t_star, ctrl=None):
    """AnalyticFamily for the strip problem around the refined crossing t_star:
    x = deviation from the primary branch state h(t_star + lambda), so that
    F(0, lambda) = 0 along the branch."""
    from . import branch as branch_mod
    from .strip import assemble_jacobian, pack, residual_vector, unpack

    a, _ = bracket
    grid = a.field.grid
    weight = grid.dq * grid.dp
    npp = grid.np
    interior = np.ones((grid.nq - 1, npp - 1))
    interior[:, npp - 2] = 0.0
    M = sp.diags(interior.ravel())
    base_cache: dict[float, object] = {}

    def base(lam: float):
        if lam not in base_cache:
            base_cache[lam] = branch_mod.point_at_arclength(
                a, spec, t_star + lam, ctrl=ctrl, with_spectrum=False
            )
        return base_cache[lam]

    def f(x, lam):
        pt = base(lam)
        fld = unpack(pt.field, pack(pt.field) + x)
        return residual_vector(fld, spec)

    def df(x, lam):
        pt = base(lam)
        fld = unpack(pt.field, pack(pt.field) + x)
        return assemble_jacobian(fld, spec)

    def eigendata(lam: float) -> EigenData:
        J = df(np.zeros(M.shape[0]), lam)
        return _pencil_eigendata(J, M, weight)

    n = (grid.nq - 1) * (npp - 1)
    fam = AnalyticFamily(n=n, f=f, df=df, eigendata=eigendata, ip_weight=weight)
    fam.base = base  # used by switch_branch to rebuild fields
    return fam


def switch_branch(
    bracket,
    spec,
    s_max: float = 1e-2,
    lam_max: float | None = None,
    newton_tol: float = 1e-10,
    ctrl=None,
):
    """Construct a converged off-branch seed at an eigenvalue crossing.

    bracket: pair of BranchPoint with a sign change of mu1, both values
    strictly below nu0, and stored tangents.  Returns the seed StripField after
    it re-converges under the plain Newton solver at the selected R; raises
    NoSecondaryBranchError when the reduced map shows only trivial zeros at
    lattice resolution.
    """
    from . import branch as branch_mod
    from .strip import newton_solve

    a, b = bracket
    if a.field is None or b.field is None or a.tangent_x is None:
        raise PreconditionError("bracket points must carry fields and tangents")
    if not (np.isfinite(a.mu1) and np.isfinite(b.mu1)):
        raise PreconditionError("bracket points lack mu1 data")
    if a.mu1 == 0.0 or (a.mu1 > 0) == (b.mu1 > 0):
        raise PreconditionError("bracket has no sign change of mu1")
    for p in (a, b):
        if not p.mu1 < p.nu0 * (1.0 - 1e-9):
            raise PreconditionError("mu1 is the sentinel nu0 on one side: not a crossing")

    # refine t* by secant on mu1(t), re-solving the branch at each iterate
    cache: dict[float, float] = {a.t: a.mu1, b.t: b.mu1}

    def mu1_of(t: float) -> float:
        if t not in cache:
            pt = branch_mod.point_at_arclength(a, spec, t, ctrl=ctrl, with_spectrum=True)
            cache[t] = pt.mu1
        return cache[t]

    t_star = branch_mod._secant_root(mu1_of, a.t, b.t, a.mu1, b.mu1, tol=1e-10, max_iter=30)

    fam = family_from_branch((a, b), spec, t_star, ctrl=ctrl)
    if lam_max is None:
        lam_max = 0.5 * (b.t - a.t)
    s0, lam0, x0 = seed_from_family(fam, s_max=s_max, lam_max=lam_max)
    base_pt = fam.base(lam0)
    from .strip import pack as _pack, unpack as _unpack

    seed = _unpack(base_pt.field, _pack(base_pt.field) + x0)
    converged = newton_solve(seed, spec, tol=newton_tol)
    dist = float(np.abs(converged.h - base_pt.field.h).max())
    if dist <= 10.0 * newton_tol:
        raise NoSecondaryBranchError(
            f"seed re-converged onto the primary branch (distance {dist:.3e})"
        )
    return converged


# ---------------------------------------------------------------------------
# model gallery
# ---------------------------------------------------------------------------


def pitchfork_family() -> AnalyticFamily:
    """F = (lam*x1 - x1^3 + x1*x2^2, -x2 + x1^2): crossing order m = 1."""

    def f(x, lam):
        return np.array([lam * x[0] - x[0] ** 3 + x[0] * x[1] ** 2, -x[1] + x[0] ** 2])

    def df(x, lam):
        return np.array(
            [[lam - 3 * x[0] ** 2 + x[1] ** 2, 2 * x[0] * x[1]], [2 * x[0], -1.0]]
        )

    return finite_family(f, df, 2)


def cubic_mu_family() -> AnalyticFamily:
    """F = (lam^3*x1 - x1^3 + x1*x2^2, -x2 + x1^2): crossing order m = 3."""

    def f(x, lam):
        return np.array(
            [lam**3 * x[0] - x[0] ** 3 + x[0] * x[1] ** 2, -x[1] + x[0] ** 2]
        )

    def df(x, lam):
        return np.array(
            [[lam**3 - 3 * x[0] ** 2 + x[1] ** 2, 2 * x[0] * x[1]], [2 * x[0], -1.0]]
        )

    return finite_family(f, df, 2)


def vertical_family() -> AnalyticFamily:
    """F = (-x1^3 + x1*x2, -x2 + x1^2): lambda-independent, so the bifurcating
    set is vertical (solutions at every lambda); mu(lambda) = 0 identically."""

    def f(x, lam):
        return np.array([-x[0] ** 3 + x[0] * x[1], -x[1] + x[0] ** 2])

    def df(x, lam):
        return np.array([[-3 * x[0] ** 2 + x[1], x[0]], [2 * x[0], -1.0]])

    return finite_family(f, df, 2)


def even_mu_family() -> AnalyticFamily:
    """F = (lam^2*x1 - x1^3 + x1*x2^2, -x2 + x1^2): even crossing order m = 2,
    for which branch counts are not certified."""

    def f(x, lam):
        return np.array(
            [lam**2 * x[0] - x[0] ** 3 + x[0] * x[1] ** 2, -x[1] + x[0] ** 2]
        )

    def df(x, lam):
        return np.array(
            [[lam**2 - 3 * x[0] ** 2 + x[1] ** 2, 2 * x[0] * x[1]], [2 * x[0], -1.0]]
        )

    return finite_family(f, df, 2)


MODEL_GALLERY = {
    "pitchfork": pitchfork_family,
    "cubic": cubic_mu_family,
    "vertical": vertical_family,
    "even": even_mu_family,
}
