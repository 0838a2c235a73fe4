"""Lowest eigenvalue nu0 of the one-dimensional Robin problem on (0, d):

    -v'' - omega'(U(Y)) v = nu v,   v(0) = 0,   v'(d) = rho0 v(d),

where U is the uniform-stream velocity profile and rho0 the surface Robin
coefficient.  nu0 marks the edge of the continuous spectrum of the linearized
strip operator and is consumed by the branch monitor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal

from numpy.polynomial import polynomial as npoly

from .errors import NumericalError, SurfaceStagnationError
from .stream import StreamSolution
from .vorticity import VorticitySpec, eval_Omega, eval_omega, eval_omega_prime

__all__ = ["RobinEigenProblem", "rho0_of_stream", "robin_problem", "nu0", "nu0_eigenpair"]


@dataclass(frozen=True)
class RobinEigenProblem:
    """Discretized Robin problem: Y-grid on [0, d], potential omega'(U(Y_j)), rho0.

    qprime_surface is d/dY of the potential at Y = d, used by the corrected
    ghost-node surface row.
    """

    stream: StreamSolution
    rho0: float
    grid_n: int
    y: np.ndarray
    potential: np.ndarray
    qprime_surface: float


def rho0_of_stream(s: StreamSolution, spec: VorticitySpec) -> float:
    """Robin coefficient (1 + U_Y U_YY) / U_Y^2 at the surface Y = d.

    Uses U_Y(d) = sqrt(theta^2 - 2*Omega(1)) and U_YY(d) = -omega(1), both exact
    consequences of the stream ODE U'' + omega(U) = 0.
    """
    uy2 = s.theta * s.theta - 2.0 * eval_Omega(spec, 1.0)
    if uy2 <= 0.0:
        raise SurfaceStagnationError(f"theta^2 - 2*Omega(1) = {uy2} <= 0")
    return (1.0 - np.sqrt(uy2) * eval_omega(spec, 1.0)) / uy2


def robin_problem(s: StreamSolution, spec: VorticitySpec, grid_n: int = 1024) -> RobinEigenProblem:
    """Build the discrete problem: integrate U'' = -omega(U) onto a uniform Y-grid."""
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    y = np.linspace(0.0, s.depth, grid_n + 1)

    def rhs(_, z):
        return [z[1], -eval_omega(spec, min(max(z[0], 0.0), 1.0))]

    sol = solve_ivp(
        rhs,
        (0.0, s.depth),
        [0.0, s.theta],
        t_eval=y,
        rtol=1e-12,
        atol=1e-13,
        method="DOP853",
    )
    if not sol.success:
        raise NumericalError(f"stream ODE integration failed: {sol.message}")
    U = sol.y[0]
    if abs(U[-1] - 1.0) > 1e-8:
        raise NumericalError(f"U(d) = {U[-1]} deviates from 1; inconsistent stream")
    potential = eval_omega_prime(spec, np.clip(U, 0.0, 1.0))
    # d/dY omega'(U) at the surface: omega''(1) * U_Y(d), with U_Y(d) exact
    cs2 = npoly.polyder(np.asarray(spec.coeffs, dtype=float), 2) if len(spec.coeffs) > 2 else [0.0]
    uy_d = np.sqrt(s.theta**2 - 2.0 * eval_Omega(spec, 1.0))
    qprime = float(npoly.polyval(1.0, cs2)) * uy_d
    return RobinEigenProblem(
        stream=s,
        rho0=rho0_of_stream(s, spec),
        grid_n=grid_n,
        y=y,
        potential=potential,
        qprime_surface=qprime,
    )


def _tridiagonal(problem: RobinEigenProblem, rho0: float | None = None):
    """Symmetrized tridiagonal (diag, off) for the ghost-node discretization.

    The surface row eliminates the ghost node with the Robin condition plus the
    ODE-based third-derivative correction v''' = -(nu + q)rho0*v - q'*v, which
    pushes the boundary contribution to the eigenvalue error to O(dy^3).  The
    result is a generalized problem A v = nu M v with
    M = diag(1, ..., 1, (1 - dy*rho0/3)/2); the similarity transform by
    M^(-1/2) keeps the matrix symmetric tridiagonal.  Overall accuracy stays
    second order (interior dispersion).
    """
    r0 = problem.rho0 if rho0 is None else rho0
    n = problem.grid_n
    dy = problem.y[1] - problem.y[0]
    q = problem.potential
    if abs(r0) * dy <= 0.1:
        m_n = 0.5 * (1.0 - dy * r0 / 3.0)
        a_nn = (1.0 - dy * r0) / dy**2 + 0.5 * (
            q[n] * (dy * r0 / 3.0 - 1.0) + (dy / 3.0) * problem.qprime_surface
        )
    else:
        # the third-derivative correction is only valid for |rho0| dy << 1;
        # extreme Robin coefficients (Dirichlet penalty) use the plain ghost row
        m_n = 0.5
        a_nn = (1.0 - dy * r0) / dy**2 - 0.5 * q[n]
    diag = np.empty(n)
    diag[:-1] = 2.0 / dy**2 - q[1:n]
    diag[-1] = a_nn / m_n
    off = np.full(n - 1, -1.0 / dy**2)
    off[-1] = -1.0 / (dy**2 * np.sqrt(m_n))
    return diag, off, dy, m_n


def nu0(problem: RobinEigenProblem, rho0: float | None = None) -> float:
    """Smallest eigenvalue of the discrete Robin problem.

    LAPACK's selected-eigenvalue path (bisection plus inverse iteration) is used
    on the symmetrized tridiagonal matrix.
    """
    diag, off, _, _ = _tridiagonal(problem, rho0)
    try:
        vals = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0), eigvals_only=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"tridiagonal eigensolve failed: {exc}") from exc
    return float(vals[0])


def nu0_eigenpair(problem: RobinEigenProblem) -> tuple[float, np.ndarray]:
    """Lowest eigenvalue and its eigenfunction samples v(Y_j), j = 0..grid_n."""
    diag, off, _, m_n = _tridiagonal(problem)
    vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    u = vecs[:, 0]
    v = np.concatenate([[0.0], u])
    v[-1] /= np.sqrt(m_n)  # undo the M^(-1/2) scaling of the surface node
    if v[1] < 0:
        v = -v
    return float(vals[0]), v
