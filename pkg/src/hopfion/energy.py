"""Discrete Skyrme energy E4, the regularizer E2, and their gradients.

Each lattice plaquette maps to a spherical quadrilateral on the target; its
signed area A discretizes F_{ab} h_a h_b.  E4 sums w * A^2 over plaquettes,
where w carries the metric, the cell volume and the normalization, so that
E4 -> kappa * integral of F_{mu nu} F^{mu nu} (ordered index pairs, hence the
factor 2 in the plaquette weights).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import ILL_CONDITIONED_TOL, plane_energy
from .field import Field
from .geometry import LatticeGeometry, build_geometry, extend, extend_backward


class IllConditionedPlaquette(ArithmeticError):
    """A plaquette has (nearly) antipodal neighbours: the field is discontinuous."""


@dataclass
class EnergyReport:
    E4: float
    E2: float
    beta: float
    directional: tuple[float, ...]
    density: np.ndarray = field(repr=False)
    kappa: float

    @property
    def E_total(self) -> float:
        return self.E4 + self.beta * self.E2

    @property
    def density_min(self) -> float:
        return float(self.density.min())

    @property
    def density_max(self) -> float:
        return float(self.density.max())


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _cross(a, b):
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def triangle_area(a, b, c, grad: bool = False):
    """Signed solid angle of the geodesic triangle (a, b, c), optionally with its gradient."""
    bc = _cross(b, c)
    num = _dot(a, bc)
    ab, bcd, ca = _dot(a, b), _dot(b, c), _dot(c, a)
    den = 1.0 + ab + bcd + ca
    r2 = num * num + den * den
    if np.any(r2 < ILL_CONDITIONED_TOL):
        raise IllConditionedPlaquette("antipodal neighbours in a plaquette")
    area = 2.0 * np.arctan2(num, den)
    if not grad:
        return area
    s = (2.0 / r2)[..., None]
    dn, nn = den[..., None], num[..., None]
    ga = s * (dn * bc - nn * (b + c))
    gb = s * (dn * _cross(c, a) - nn * (a + c))
    gc = s * (dn * _cross(a, b) - nn * (a + b))
    return area, (ga, gb, gc)


def plaquette_area(v1, v2, v3, v4, grad: bool = False):
    """Signed area of the spherical quadrilateral v1 v2 v3 v4, split along v1-v3."""
    if not grad:
        return triangle_area(v1, v2, v3) + triangle_area(v1, v3, v4)
    a1, (g1a, g2, g3a) = triangle_area(v1, v2, v3, grad=True)
    a2, (g1b, g3b, g4) = triangle_area(v1, v3, v4, grad=True)
    return a1 + a2, (g1a + g1b, g2, g3a + g3b, g4)


def _corners(ext: np.ndarray, geom: LatticeGeometry, a: int, b: int):
    """The four corners (counter-clockwise in the (a, b) plane) of every plaquette."""
    if geom.capped and a == 0:
        lo, hi = ext[:-1], ext[1:]
        return lo, hi, np.roll(hi, -1, axis=b), np.roll(lo, -1, axis=b)
    base = ext[1:-1] if geom.capped else ext
    va = np.roll(base, -1, axis=a)
    return base, va, np.roll(va, -1, axis=b), np.roll(base, -1, axis=b)


def _scatter(grad_ext: np.ndarray, geom: LatticeGeometry, a: int, b: int, g):
    """Accumulate per-corner gradients back onto the (extended) sites."""
    g1, g2, g3, g4 = g
    if geom.capped and a == 0:
        grad_ext[:-1] += g1 + np.roll(g4, 1, axis=b)
        grad_ext[1:] += g2 + np.roll(g3, 1, axis=b)
        return
    target = grad_ext[1:-1] if geom.capped else grad_ext
    g_va = g2 + np.roll(g3, 1, axis=b)
    target += g1 + np.roll(g4, 1, axis=b) + np.roll(g_va, 1, axis=a)


def plaquette_areas(field: Field, geom: LatticeGeometry | None = None) -> dict:
    """Signed plaquette areas per plane ``(a, b)``, including boundary closures."""
    geom = geom or build_geometry(field.spec)
    ext = extend(field.data, geom)
    return {(a, b): plaquette_area(*_corners(ext, geom, a, b)) for a, b in geom.planes()}


def _link_diffs(ext, geom, a):
    if geom.capped and a == 0:
        return ext[1:] - ext[:-1]
    base = ext[1:-1] if geom.capped else ext
    return np.roll(base, -1, axis=a) - base


def evaluate(data: np.ndarray, geom: LatticeGeometry, beta: float = 0.0, grad: bool = True):
    """E4, E2 and (if requested) the tangent gradient of E4 + beta * E2.

    ``data`` has shape ``dims + (3,)``.  The gradient is projected onto each
    site's tangent plane.  E2 is only computed when ``beta`` is non-zero.
    """
    ext = np.ascontiguousarray(extend(data, geom))
    g_ext = np.zeros_like(ext) if grad else None
    ext3 = ext if geom.ndim == 3 else ext[:, :, None, :]
    g_flat = g_ext.reshape(-1, 3) if grad else np.zeros((1, 3))
    e4 = 0.0
    for a, b in geom.planes():
        cap0 = geom.capped and a == 0
        w = np.ascontiguousarray(geom.plaquette_weight[(a, b)].ravel())
        e = plane_energy(ext3, g_flat, a, b, cap0, int(geom.capped), w, grad)
        if np.isnan(e):
            raise IllConditionedPlaquette("antipodal neighbours in a plaquette")
        e4 += e
    return _finish(data, geom, beta, grad, ext, g_ext, e4)


def evaluate_reference(data: np.ndarray, geom: LatticeGeometry, beta: float = 0.0, grad: bool = True):
    """Vectorized numpy version of :func:`evaluate` (slower; used as a cross-check)."""
    ext = extend(data, geom)
    g_ext = np.zeros_like(ext) if grad else None
    e4 = 0.0
    for a, b in geom.planes():
        corners = _corners(ext, geom, a, b)
        w = geom.plaquette_weight[(a, b)]
        if grad:
            area, g = plaquette_area(*corners, grad=True)
            coef = (2.0 * w * area)[..., None]
            _scatter(g_ext, geom, a, b, [coef * gi for gi in g])
        else:
            area = plaquette_area(*corners)
        e4 += float(np.sum(w * area * area))
    return _finish(data, geom, beta, grad, ext, g_ext, e4)


def _finish(data, geom, beta, grad, ext, g_ext, e4):
    """Add the E2 term and pull the gradient back onto tangent vectors of the real sites."""
    e2 = 0.0
    if beta != 0.0:
        for a in range(geom.ndim):
            d = _link_diffs(ext, geom, a)
            w = geom.link_weight[a]
            e2 += float(np.sum(w * _dot(d, d)))
            if grad:
                gd = (2.0 * beta * w)[..., None] * d
                if geom.capped and a == 0:
                    g_ext[1:] += gd
                    g_ext[:-1] -= gd
                else:
                    target = g_ext[1:-1] if geom.capped else g_ext
                    target += np.roll(gd, 1, axis=a) - gd
    if not grad:
        return e4, e2, None
    g = extend_backward(g_ext, data, geom)
    g -= _dot(g, data)[..., None] * data
    return e4, e2, g


def energy_e4(field: Field, geom: LatticeGeometry | None = None, beta: float = 0.0) -> EnergyReport:
    """Full energy report: totals, directional split and per-cell density."""
    geom = geom or build_geometry(field.spec)
    ext = extend(field.data, geom)
    nd = geom.ndim
    per_plane = {}
    for a, b in geom.planes():
        area = plaquette_area(*_corners(ext, geom, a, b))
        per_plane[(a, b)] = geom.plaquette_weight[(a, b)] * area * area
    e4 = float(sum(v.sum() for v in per_plane.values()))
    if nd == 3:
        # E_c collects the plaquettes of the plane normal to axis c
        directional = tuple(float(per_plane[tuple(x for x in range(3) if x != c)].sum()) for c in range(3))
    else:
        directional = (e4,)
    return EnergyReport(
        E4=e4,
        E2=energy_e2(field, geom),
        beta=beta,
        directional=directional,
        density=_cell_density(per_plane, geom),
        kappa=geom.kappa,
    )


def _cell_density(per_plane: dict, geom: LatticeGeometry) -> np.ndarray:
    """Energy density on the cells between real sites (face-averaged)."""
    nd = geom.ndim
    vol = {}
    for (a, b), e in per_plane.items():
        # energy -> density: divide by the dual volume of each plaquette
        if geom.capped and a == 0:
            span0 = geom.pair_widths.reshape((-1,) + (1,) * (nd - 1))
            c = geom.pair_centers
        else:
            span0 = geom.h[0]
            c = geom.coords[0] if geom.capped else None
        sg = _sqrtg(geom, c)
        dv = sg * np.prod([geom.h[x] for x in range(1, nd)]) * span0
        vol[(a, b)] = e / dv
    dens = 0.0
    for (a, b), d in vol.items():
        if geom.capped and a == 0:
            d = d[1:-1]  # pairs between real rows only
        elif geom.capped:
            d = 0.5 * (d[:-1] + d[1:])
        if nd == 3:
            c = 3 - a - b
            if not (geom.capped and c == 0):
                d = 0.5 * (d + np.roll(d, -1, axis=c))
        dens = dens + d
    return np.asarray(dens)


def _sqrtg(geom: LatticeGeometry, c):
    from .geometry import _metric

    nd = geom.ndim
    if c is None:
        return 1.0
    sg, _ = _metric(geom.spec.kind, np.asarray(c, dtype=float), geom.spec.L)
    return sg.reshape((-1,) + (1,) * (nd - 1))


def energy_e2(field: Field, geom: LatticeGeometry | None = None) -> float:
    """Chordal Dirichlet energy (1/32 pi^2) * integral |d phi|^2."""
    geom = geom or build_geometry(field.spec)
    ext = extend(field.data, geom)
    total = 0.0
    for a in range(geom.ndim):
        d = _link_diffs(ext, geom, a)
        total += float(np.sum(geom.link_weight[a] * _dot(d, d)))
    return total


def gradient(field: Field, geom: LatticeGeometry | None = None, beta: float = 0.0) -> np.ndarray:
    """Tangent gradient of E4 + beta * E2 at every site."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    geom = geom or build_geometry(field.spec)
    return evaluate(field.data, geom, beta, grad=True)[2]


def anisotropy_first_order(E_x: float, E_y: float, E_z: float, eps_y: float, eps_z: float) -> float:
    """First-order energy change when the y and z periods shrink by eps_y, eps_z."""
    return (E_x - E_y + E_z) * eps_y + (E_x - E_z + E_y) * eps_z


def period_stable(E_x: float, E_y: float, E_z: float) -> bool:
    """True when shrinking either transverse period raises the energy to first order."""
    return (E_x - E_y + E_z) > 0 and (E_x - E_z + E_y) > 0
