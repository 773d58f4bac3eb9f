"""Lattice discretizations of the supported source manifolds.

Every manifold is described by coordinates whose metric is diagonal and depends
only on the first coordinate.  The first axis of S3, S2xS1 and S2 is a polar
coordinate on a closed interval; it is sampled on a staggered grid and closed
off at both ends by a virtual row of sites (see :func:`extend`).  All other
axes are periodic.

Coordinates and metrics
-----------------------
=======  =================  ===============================================
kind     axes               line element
=======  =================  ===============================================
T3       (x, y, z)          dx^2 + dy^2 + dz^2, periods 2*pi*periods[a]
T2       (x, y)             dx^2 + dy^2
S3       (r, s, t)          dr^2 + cos(r)^2 ds^2 + sin(r)^2 dt^2
S2xS1    (theta, phi, chi)  L^2 dtheta^2 + L^2 sin(theta)^2 dphi^2 + dchi^2
S2       (theta, phi)       dtheta^2 + sin(theta)^2 dphi^2
=======  =================  ===============================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi


class Kind(str, Enum):
    S3 = "S3"
    T3 = "T3"
    S2xS1 = "S2xS1"
    S2 = "S2"
    T2 = "T2"

    @property
    def ndim(self) -> int:
        return 2 if self in (Kind.S2, Kind.T2) else 3

    @property
    def is_torus(self) -> bool:
        return self in (Kind.T3, Kind.T2)


class ManifoldError(ValueError):
    """Invalid manifold specification."""


@dataclass(frozen=True)
class ManifoldSpec:
    """Which manifold, at what resolution.

    ``periods`` rescales the periods of a flat torus: axis ``a`` has period
    ``2*pi*periods[a]``.  ``L`` is the radius of the S2 factor of S2xS1.
    """

    kind: Kind
    dims: tuple[int, ...]
    L: float | None = None
    periods: tuple[float, ...] | None = None

    def __post_init__(self):
        try:
            kind = Kind(self.kind)
        except ValueError:
            raise ManifoldError(f"unknown manifold kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) != kind.ndim:
            raise ManifoldError(f"{kind.value} needs {kind.ndim} dims, got {len(dims)}")
        if min(dims) < 4:
            raise ManifoldError(f"all dims must be >= 4, got {dims}")
        if kind is Kind.S2xS1:
            if self.L is None:
                raise ManifoldError("S2xS1 requires the sphere radius L")
            if not self.L > 0:
                raise ManifoldError(f"L must be positive, got {self.L}")
            object.__setattr__(self, "L", float(self.L))
        elif self.L is not None:
            raise ManifoldError(f"L is only meaningful for S2xS1, not {kind.value}")
        if self.periods is not None:
            if not kind.is_torus:
                raise ManifoldError("periods are only meaningful for flat tori")
            periods = tuple(float(p) for p in self.periods)
            if len(periods) != kind.ndim or min(periods) <= 0:
                raise ManifoldError(f"bad periods {periods}")
            object.__setattr__(self, "periods", periods)

    @property
    def ndim(self) -> int:
        return self.kind.ndim

    @property
    def nsites(self) -> int:
        return math.prod(self.dims)

    def to_header(self) -> dict:
        out = {"manifold": self.kind.value, "dims": list(self.dims)}
        if self.L is not None:
            out["L"] = self.L
        if self.periods is not None:
            out["periods"] = list(self.periods)
        return out

    @classmethod
    def from_header(cls, header: dict) -> "ManifoldSpec":
        periods = header.get("periods")
        return cls(
            Kind(header["manifold"]),
            tuple(header["dims"]),
            L=header.get("L"),
            periods=tuple(periods) if periods is not None else None,
        )


def eigenvalue(spec: ManifoldSpec) -> float:
    """Smallest positive eigenvalue of the Hodge Laplacian on co-closed 1-forms.

    Hard-coded per manifold; only meaningful in three dimensions.
    """
    if spec.kind is Kind.S3:
        return 4.0
    if spec.kind is Kind.T3:
        return 1.0 / max(spec.periods or (1.0,)) ** 2
    if spec.kind is Kind.S2xS1:
        return 2.0 / spec.L**2
    raise ManifoldError(f"no Hopf normalization eigenvalue for {spec.kind.value}")


def analytic_volume(spec: ManifoldSpec) -> float:
    kind = spec.kind
    if kind is Kind.S3:
        return 2.0 * math.pi**2
    if kind is Kind.S2xS1:
        return 8.0 * math.pi**2 * spec.L**2
    if kind is Kind.S2:
        return 4.0 * math.pi
    periods = spec.periods or (1.0,) * spec.ndim
    return math.prod(TWO_PI * p for p in periods)


def normalization_kappa(spec: ManifoldSpec) -> float:
    """Energy prefactor: 1/(32 pi^2 sqrt(lambda)) in 3D, V/(32 pi^2) in 2D."""
    if spec.ndim == 2:
        return analytic_volume(spec) / (32.0 * math.pi**2)
    return 1.0 / (32.0 * math.pi**2 * math.sqrt(eigenvalue(spec)))


def bound_value(spec: ManifoldSpec, Q: int) -> float:
    """Topological lower bound on the normalized energy: |Q| in 3D, Q^2 in 2D."""
    return float(Q * Q) if spec.ndim == 2 else float(abs(Q))


@dataclass(frozen=True)
class LatticeGeometry:
    """Spacings, metric weights and normalization for one :class:`ManifoldSpec`.

    Weight arrays depend only on the first coordinate and are shaped to
    broadcast against per-plaquette or per-link arrays.  For a capped first
    axis, plaquettes and links along axis 0 are indexed by *row pairs* of the
    extended lattice (``dims[0] + 1`` of them, the outermost two half-width).
    """

    spec: ManifoldSpec
    h: tuple[float, ...]
    coords: tuple[np.ndarray, ...]
    capped: bool
    collapse: tuple[int, int] | None  # axis collapsed at the low / high end of axis 0
    kappa: float
    lam: float | None
    volume: float
    pair_centers: np.ndarray | None
    pair_widths: np.ndarray | None
    site_volume: np.ndarray
    plaquette_weight: dict = field(repr=False)
    link_weight: dict = field(repr=False)

    @property
    def ndim(self) -> int:
        return self.spec.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return self.spec.dims

    def planes(self) -> list[tuple[int, int]]:
        if self.ndim == 2:
            return [(0, 1)]
        return [(0, 1), (0, 2), (1, 2)]

    def plaquette_count(self, plane: tuple[int, int]) -> int:
        n = list(self.dims)
        if self.capped and plane[0] == 0:
            n[0] += 1
        return math.prod(n)

    def periodic(self, axis: int) -> bool:
        return not (self.capped and axis == 0)


def _metric(kind: Kind, c: np.ndarray, L: float | None):
    """sqrt(g) and the diagonal inverse metric at first-coordinate values c."""
    one = np.ones_like(c)
    if kind is Kind.S3:
        cr, sr = np.cos(c), np.sin(c)
        return cr * sr, (one, 1.0 / cr**2, 1.0 / sr**2)
    if kind is Kind.S2xS1:
        st = np.sin(c)
        return L**2 * st, (one / L**2, 1.0 / (L * st) ** 2, one)
    if kind is Kind.S2:
        st = np.sin(c)
        return st, (one, 1.0 / st**2)
    return one, (one,) * kind.ndim


_POLAR_RANGE = {Kind.S3: 0.5 * math.pi, Kind.S2xS1: math.pi, Kind.S2: math.pi}
# axis that degenerates at the low / high end of the polar axis
_COLLAPSE = {Kind.S3: (2, 1), Kind.S2xS1: (1, 1), Kind.S2: (1, 1)}


def build_geometry(spec: ManifoldSpec) -> LatticeGeometry:
    kind = spec.kind
    nd = spec.ndim
    dims = spec.dims
    capped = kind in _POLAR_RANGE

    h = []
    coords = []
    for a, n in enumerate(dims):
        if capped and a == 0:
            step = _POLAR_RANGE[kind] / n
            coords.append((np.arange(n) + 0.5) * step)
        else:
            period = TWO_PI * (spec.periods[a] if spec.periods else 1.0)
            step = period / n
            coords.append(np.arange(n) * step)
        h.append(step)

    row = coords[0] if capped else np.zeros(1)
    sg_row, ginv_row = _metric(kind, row, spec.L)

    if capped:
        h0 = h[0]
        top = _POLAR_RANGE[kind]
        centers = np.concatenate([[0.25 * h0], np.arange(1, dims[0]) * h0, [top - 0.25 * h0]])
        widths = np.concatenate([[0.5 * h0], np.full(dims[0] - 1, h0), [0.5 * h0]])
        sg_pair, ginv_pair = _metric(kind, centers, spec.L)
    else:
        centers = widths = None

    kappa = normalization_kappa(spec)
    lam = eigenvalue(spec) if nd == 3 else None

    def shaped(v):
        # broadcast a per-row (axis 0) vector against arrays of shape (n0, n1[, n2])
        return np.asarray(v, dtype=float).reshape((-1,) + (1,) * (nd - 1))

    plaquette_weight = {}
    for a, b in ([(0, 1)] if nd == 2 else [(0, 1), (0, 2), (1, 2)]):
        other = [c for c in range(nd) if c not in (a, b)]
        dual = math.prod(h[c] for c in other)
        if capped and a == 0:
            w = sg_pair * ginv_pair[a] * ginv_pair[b] * dual / (widths * h[b])
        else:
            w = sg_row * ginv_row[a] * ginv_row[b] * dual / (h[a] * h[b])
        plaquette_weight[(a, b)] = shaped(2.0 * kappa * w)

    link_weight = {}
    e2_norm = 1.0 / (32.0 * math.pi**2)
    for a in range(nd):
        dual = math.prod(h[c] for c in range(nd) if c != a)
        if capped and a == 0:
            w = sg_pair * ginv_pair[0] * dual / widths
        else:
            w = sg_row * ginv_row[a] * dual / h[a]
        link_weight[a] = shaped(e2_norm * w)

    site_volume = shaped(sg_row * math.prod(h)) * np.ones(dims)

    return LatticeGeometry(
        spec=spec,
        h=tuple(h),
        coords=tuple(coords),
        capped=capped,
        collapse=_COLLAPSE.get(kind),
        kappa=kappa,
        lam=lam,
        volume=analytic_volume(spec),
        pair_centers=centers,
        pair_widths=widths,
        site_volume=site_volume,
        plaquette_weight=plaquette_weight,
        link_weight=link_weight,
    )


def extend(data: np.ndarray, geom: LatticeGeometry) -> np.ndarray:
    """Append the virtual boundary rows of a capped first axis.

    Where a coordinate circle degenerates (r -> 0 and r -> pi/2 on S3, the poles
    of S2), the boundary value is the normalized mean of the adjacent row over
    the collapsing axis, repeated along that axis.  Plaquettes touching the
    virtual row then close the lattice with zero-width edges.
    Tori are returned unchanged.
    """
    if not geom.capped:
        return data
    lo_axis, hi_axis = geom.collapse
    lo = _collapsed_mean(data[0], lo_axis - 1)
    hi = _collapsed_mean(data[-1], hi_axis - 1)
    return np.concatenate([lo[None], data, hi[None]], axis=0)


def _collapsed_mean(row: np.ndarray, axis: int) -> np.ndarray:
    m = row.mean(axis=axis, keepdims=True)
    m = m / np.linalg.norm(m, axis=-1, keepdims=True)
    return np.broadcast_to(m, row.shape).copy()


def extend_backward(grad_ext: np.ndarray, data: np.ndarray, geom: LatticeGeometry) -> np.ndarray:
    """Pull a gradient on the extended lattice back onto the real sites."""
    if not geom.capped:
        return grad_ext
    grad = grad_ext[1:-1].copy()
    lo_axis, hi_axis = geom.collapse
    grad[0] += _collapsed_mean_vjp(grad_ext[0], data[0], lo_axis - 1)
    grad[-1] += _collapsed_mean_vjp(grad_ext[-1], data[-1], hi_axis - 1)
    return grad


def _collapsed_mean_vjp(g_virtual: np.ndarray, row: np.ndarray, axis: int) -> np.ndarray:
    n = row.shape[axis]
    m = row.mean(axis=axis, keepdims=True)
    norm = np.linalg.norm(m, axis=-1, keepdims=True)
    p = m / norm
    g = g_virtual.sum(axis=axis, keepdims=True)
    g_m = (g - np.sum(g * p, axis=-1, keepdims=True) * p) / norm
    return np.broadcast_to(g_m / n, row.shape)
