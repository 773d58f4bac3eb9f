"""One-dimensional reductions of the energy for the symmetric ansaetze.

Both reductions have the form

    E[f] = C * integral (f')^2 sin(f)^2 W(x) dx

because for a field whose target polar angle is f(x) and whose azimuth is
linear in the two symmetry angles, F_{mu nu} F^{mu nu} = 2 (f' sin f)^2 *
(sum of inverse-metric products), and the two angles integrate to (2 pi)^2.

* A_mn on S3, profile alpha(r), r in [0, pi/2]:
  C = 1/8, W = m^2 tan r + n^2 cot r.
* Vortex-antivortex on S2xS1, profile f(theta), theta in [0, pi]:
  C = kappa * 8 pi^2 = L / (4 sqrt 2), W = 1 / (L^2 sin theta) + sin theta.

Profiles are piecewise linear in the angle on a uniform grid (a Ritz
discretization: each interval is integrated with Gauss-Legendre, so the
discrete minimum is an upper bound that can only drop under refinement).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar

from .geometry import ManifoldSpec, bound_value  # noqa: F401  (re-exported)

GAUSS_POINTS = 6
L_BRACKET = (0.5, 3.0)


class ConvergenceError(RuntimeError):
    pass


@dataclass
class ProfileSolution:
    grid: np.ndarray
    f: np.ndarray
    kind: str  # "vav" or "amn"
    L: float | None = None
    energy: float | None = None
    m: int | None = None
    n: int | None = None
    boundary: dict = field(default_factory=dict)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.f) >= -1e-12))

    def to_csv(self, path) -> None:
        head = "theta,f" if self.kind == "vav" else "r,alpha"
        np.savetxt(path, np.column_stack([self.grid, self.f]), delimiter=",", header=head, comments="")


def _gauss():
    x, w = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    return 0.5 * (x + 1.0), 0.5 * w


def _ritz(f, x, weight, hess=False):
    """Energy integral, gradient and tridiagonal Hessian of sum int f'^2 sin^2 f W."""
    tau, wq = _gauss()
    h = np.diff(x)[:, None]
    a, b = f[:-1, None], f[1:, None]
    g = (b - a) / h
    fq = a + (b - a) * tau
    W = weight(x[:-1, None] + h * tau) * wq * h  # quadrature weights folded in
    S, S1 = np.sin(fq) ** 2, np.sin(2 * fq)
    e = np.sum(W * g * g * S)
    ca, cb = 1.0 - tau, tau
    da = np.sum(W * (-2 * g * S / h + g * g * S1 * ca), axis=1)
    db = np.sum(W * (2 * g * S / h + g * g * S1 * cb), axis=1)
    grad = np.zeros_like(f)
    grad[:-1] += da
    grad[1:] += db
    if not hess:
        return e, grad
    S2 = 2 * np.cos(2 * fq)
    haa = np.sum(W * (2 * S / h**2 - 4 * g * S1 * ca / h + g * g * S2 * ca * ca), axis=1)
    hbb = np.sum(W * (2 * S / h**2 + 4 * g * S1 * cb / h + g * g * S2 * cb * cb), axis=1)
    hab = np.sum(W * (-2 * S / h**2 + 2 * g * S1 * (ca - cb) / h + g * g * S2 * ca * cb), axis=1)
    diag = np.zeros_like(f)
    diag[:-1] += haa
    diag[1:] += hbb
    return e, grad, (diag, hab)


def _newton(f0, x, weight, fixed, tol=1e-11, max_iter=200):
    """Minimize the Ritz integral over the free nodes by damped Newton steps."""
    f = f0.copy()
    free = np.ones(len(f), dtype=bool)
    free[list(fixed)] = False
    e, grad, (diag, off) = _ritz(f, x, weight, hess=True)
    for _ in range(max_iter):
        gfree = np.where(free, grad, 0.0)
        if np.abs(gfree).max() <= tol * max(1.0, e):
            return f, e
        # banded Hessian restricted to free nodes (fixed rows become identity)
        d = np.where(free, diag, 1.0)
        up = np.where(free[:-1] & free[1:], off, 0.0)
        shift = 0.0
        while True:
            ab = np.zeros((3, len(f)))
            ab[0, 1:] = up
            ab[1] = d + np.where(free, shift, 0.0)
            ab[2, :-1] = up
            step = -solve_banded((1, 1), ab, gfree)
            slope = float(gfree @ step)
            if slope < 0:
                break
            shift = max(1e-8 * np.abs(d).max(), 10 * shift)
        t = 1.0
        while t > 1e-12:
            trial = f + t * step
            e_new, g_new, h_new = _ritz(trial, x, weight, hess=True)
            if e_new <= e + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            raise ConvergenceError("1D line search failed")
        f, e, grad, (diag, off) = trial, e_new, g_new, h_new
    raise ConvergenceError(f"1D profile minimization did not converge in {max_iter} iterations")


def _amn_weight(m, n):
    return lambda r: m * m * np.tan(r) + n * n / np.tan(r)


def _vav_weight(L):
    return lambda th: 1.0 / (L * L * np.sin(th)) + np.sin(th)


def _vav_prefactor(L):
    return L / (4.0 * math.sqrt(2.0))


def _check_vav_bc(profile: ProfileSolution):
    grid, f = profile.grid, profile.f
    for th, val in ((0.0, 0.0), (0.5 * math.pi, math.pi), (math.pi, 2 * math.pi)):
        idx = np.flatnonzero(np.isclose(grid, th, atol=1e-12))
        if idx.size == 0 or abs(f[idx[0]] - val) > 1e-9:
            raise ValueError(f"profile violates f({th:.4f}) = {val:.4f}")


def vav_energy(profile: ProfileSolution, L: float) -> float:
    """Reduced energy of the S2xS1 vortex-antivortex field for this profile."""
    _check_vav_bc(profile)
    e, _ = _ritz(np.asarray(profile.f, float), np.asarray(profile.grid, float), _vav_weight(L))
    return _vav_prefactor(L) * e


def _vav_solve(n_theta: int, L: float) -> ProfileSolution:
    grid = np.linspace(0.0, math.pi, n_theta + 1)
    f, e = _newton(2.0 * grid, grid, _vav_weight(L), fixed=(0, n_theta // 2, n_theta))
    return ProfileSolution(
        grid=grid,
        f=f,
        kind="vav",
        L=L,
        energy=_vav_prefactor(L) * e,
        boundary={"f(0)": 0.0, "f(pi/2)": math.pi, "f(pi)": 2 * math.pi},
    )


def vav_minimize(n_theta: int = 1024, L: float | str = "auto") -> ProfileSolution:
    """Optimal vortex-antivortex profile; with L="auto" also the optimal radius."""
    if n_theta < 64 or n_theta % 2:
        raise ValueError("n_theta must be even and >= 64")
    if L != "auto":
        return _vav_solve(n_theta, float(L))
    lo, hi = L_BRACKET
    res = minimize_scalar(
        lambda x: _vav_solve(n_theta, x).energy, bounds=(lo, hi), method="bounded", options={"xatol": 1e-5}
    )
    if not res.success or min(res.x - lo, hi - res.x) < 1e-3:
        raise ConvergenceError(f"optimal L not bracketed in {L_BRACKET}: {res.x}")
    return _vav_solve(n_theta, float(res.x))


def amn_energy_formula(m: int, n: int) -> float:
    """Closed-form energy of the A_mn field with the optimal profile."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if m == n:
        return float(m * n)
    p = m / n
    return (p - 1.0 / p) / (2.0 * math.log(p)) * m * n


def amn_energy(profile: ProfileSolution, m: int, n: int) -> float:
    """Reduced S3 energy of w = cot(alpha/2) exp(i(ms - nt)) for the profile alpha(r)."""
    e, _ = _ritz(np.asarray(profile.f, float), np.asarray(profile.grid, float), _amn_weight(m, n))
    return e / 8.0


def amn_profile_minimize(m: int, n: int, n_r: int = 2000) -> ProfileSolution:
    """Optimal profile alpha(r), alpha(0) = 0, alpha(pi/2) = pi, for A_mn."""
    if n_r < 64:
        raise ValueError("n_r must be >= 64")
    grid = np.linspace(0.0, 0.5 * math.pi, n_r + 1)
    f, e = _newton(2.0 * grid, grid, _amn_weight(m, n), fixed=(0, n_r))
    return ProfileSolution(
        grid=grid,
        f=f,
        kind="amn",
        energy=e / 8.0,
        m=m,
        n=n,
        boundary={"alpha(0)": 0.0, "alpha(pi/2)": math.pi},
    )
