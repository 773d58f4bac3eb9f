"""Topological diagnostics: degree, vortex flux, Hopf charge, preimages, linking.

Orientation conventions (fixed here once):

* Lattice coordinates are ordered ``(axis 0, axis 1, axis 2)`` and taken to be
  right-handed.  A plaquette in the plane (a, b), a < b, is traversed
  a-then-b, and its signed target area is positive when the image is
  counter-clockwise seen from outside the unit sphere.
* The flux through the cross-section normal to axis c uses the cyclic
  orientation: planes (1, 2), (2, 0), (0, 1), so the (0, 2) plane enters
  with a minus sign.
* A preimage curve runs along grad(Re d) x grad(Im d) where d is the
  stereographic coordinate of the field in a chart centred on the regular
  value (positively oriented on the target).
* ``ORIENTATION`` multiplies every Hopf charge and linking number so that the
  standard Hopf map w = z1 / z2 has Q = +1.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .energy import plaquette_areas
from .field import Field
from .geometry import Kind, LatticeGeometry, build_geometry, extend

ORIENTATION = 1.0
FOUR_PI = 4.0 * math.pi
TRUST_RESIDUAL = 0.05
# cyclic sign of each plane as the cross-section normal to the remaining axis
_PLANE_SIGN = {(1, 2): 1.0, (0, 2): -1.0, (0, 1): 1.0}


class TopologyError(ValueError):
    """A topological precondition failed (nonzero flux, discontinuity, open curve)."""


@dataclass
class ChargeReport:
    Q_numeric: float
    net_fluxes: tuple[int, ...] = ()

    @property
    def Q(self) -> int:
        return int(round(self.Q_numeric))

    @property
    def residual(self) -> float:
        return abs(self.Q_numeric - self.Q)

    @property
    def trusted(self) -> bool:
        return self.residual < TRUST_RESIDUAL and all(f == 0 for f in self.net_fluxes)


@dataclass
class PreimageCurve:
    """Closed polylines (first point repeated last) making up the preimage of ``value``."""

    value: np.ndarray
    components: list[np.ndarray] = field(default_factory=list)
    projection: str = "none"

    def __len__(self) -> int:
        return len(self.components)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "vertex", "x", "y", "z"])
            for cid, comp in enumerate(self.components):
                for vid, (x, y, z) in enumerate(comp):
                    w.writerow([cid, vid, repr(float(x)), repr(float(y)), repr(float(z))])


# ---------------------------------------------------------------- degree and flux


def degree_2d(field: Field, geom: LatticeGeometry | None = None) -> ChargeReport:
    """Degree of a 2D field: total signed plaquette area over 4 pi."""
    if field.spec.ndim != 2:
        raise TopologyError("degree_2d needs a two-dimensional field")
    areas = plaquette_areas(field, geom)
    return ChargeReport(float(areas[(0, 1)].sum()) / FOUR_PI)


def _closed_sections(kind: Kind) -> tuple[int, ...]:
    return {Kind.T3: (0, 1, 2), Kind.S2xS1: (0, 2), Kind.S3: (0,)}[kind]


def flux_profile(field: Field, direction: int, geom: LatticeGeometry | None = None) -> np.ndarray:
    """Flux (in units of 4 pi) through every cross-section normal to ``direction``."""
    spec = field.spec
    if spec.ndim != 3:
        raise TopologyError("net_flux needs a three-dimensional field")
    if direction not in _closed_sections(spec.kind):
        raise TopologyError(f"cross-sections normal to axis {direction} are not closed on {spec.kind.value}")
    plane = tuple(a for a in range(3) if a != direction)
    area = plaquette_areas(field, geom)[plane]
    other = tuple(a for a in range(3) if a != direction)
    return _PLANE_SIGN[plane] * area.sum(axis=other) / FOUR_PI


def net_flux(field: Field, direction: int, geom: LatticeGeometry | None = None) -> int:
    """Net vortex number through the cross-sections normal to ``direction``."""
    prof = flux_profile(field, direction, geom)
    rounded = np.rint(prof)
    if np.any(rounded != rounded[0]):
        raise TopologyError("cross-sections disagree on the vortex flux: field is discontinuous")
    return int(rounded[0])


# ---------------------------------------------------------------- Hopf charge on T3


def _wavevectors(shape):
    ks = [2.0 * math.pi * np.fft.fftfreq(n) for n in shape]
    return np.meshgrid(*ks, indexing="ij")


def _solve_potential(bhat: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Coexact A with d x A = B, mode by mode; the zero mode is left at 0."""
    dd = np.sum(np.abs(d) ** 2, axis=0)
    dd[0, 0, 0] = 1.0
    dbar = np.conj(d)
    cross = np.stack(
        [
            dbar[1] * bhat[2] - dbar[2] * bhat[1],
            dbar[2] * bhat[0] - dbar[0] * bhat[2],
            dbar[0] * bhat[1] - dbar[1] * bhat[0],
        ]
    )
    ahat = -cross / dd
    ahat[:, 0, 0, 0] = 0.0
    return ahat


def _curl(d, a):
    return np.stack([d[1] * a[2] - d[2] * a[1], d[2] * a[0] - d[0] * a[2], d[0] * a[1] - d[1] * a[0]])


def face_fluxes(field: Field, geom: LatticeGeometry | None = None) -> np.ndarray:
    """Target area through the three faces at each T3 site, shape (3,) + dims.

    Component a is the face normal to axis a with corner at the site,
    oriented by the cyclic convention.
    """
    areas = plaquette_areas(field, geom)
    return np.stack([areas[(1, 2)], -areas[(0, 2)], areas[(0, 1)]])


def hopf_charge_t3(field: Field, geom: LatticeGeometry | None = None) -> ChargeReport:
    """Hopf charge (1/16 pi^2) sum B.A of a T3 field with zero net fluxes."""
    spec = field.spec
    if spec.kind is not Kind.T3:
        raise TopologyError("the spectral Hopf charge is only defined on T3")
    geom = geom or build_geometry(spec)
    B = face_fluxes(field, geom)
    fluxes = tuple(int(np.rint(B[a].sum(axis=tuple(x for x in range(3) if x != a)).mean() / FOUR_PI)) for a in range(3))
    div = sum(np.roll(B[a], -1, axis=a) - B[a] for a in range(3))
    if np.abs(div).max() > 1e-6:
        raise TopologyError("target area is not conserved through a cell: field is discontinuous")
    if any(fluxes):
        raise TopologyError(f"net fluxes {fluxes} are nonzero: the field is algebraically essential")
    shape = B.shape[1:]
    k = _wavevectors(shape)
    d = np.stack([np.exp(1j * ka) - 1.0 for ka in k])
    bhat = np.fft.fftn(B, axes=(1, 2, 3))
    ahat = _solve_potential(bhat, d)
    # reconstruction check: dA must give back F on every mode
    err = np.abs(_curl(d, ahat) - bhat)
    err[:, 0, 0, 0] = 0.0
    scale = max(np.abs(bhat).max(), 1e-300)
    if err.max() > 1e-10 * scale:
        raise TopologyError(f"vector potential does not reproduce the flux (error {err.max() / scale:.2e})")
    # B_a lives at the face centre, offset (1 - e_a)/2 from the site; A_a at the
    # edge midpoint, offset e_a/2.  Shift B onto the edge before pairing.
    total = 0.0
    for a in range(3):
        off = [0.5] * 3
        off[a] = -0.5
        phase = np.exp(-1j * sum(o * ka for o, ka in zip(off, k)))
        total += float(np.real(np.sum(bhat[a] * phase * np.conj(ahat[a]))))
    n = math.prod(shape)
    q = ORIENTATION * total / n / (16.0 * math.pi**2)
    return ChargeReport(q, fluxes)


# ---------------------------------------------------------------- preimages


def _rotation_to_north(p: np.ndarray) -> np.ndarray:
    """Rotation matrix taking the unit vector p to (0, 0, 1)."""
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(p, z)
    c = float(p @ z)
    if np.linalg.norm(v) < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def _chart(vals, p):
    """Stereographic coordinate about p at every site, with the chart mask.

    A symmetric field can put a coordinate exactly at zero on a lattice
    site; then p is nudged by a tiny fixed rotation so the zero set meets
    no vertex.
    """
    axis = np.array([0.5773, -0.2887, 0.7638])
    for attempt in range(6):
        rot = vals @ _rotation_to_north(p).T
        zc = rot[..., 2]
        good = zc > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(good, rot[..., 0] / (1.0 + zc), 1.0)
            v = np.where(good, rot[..., 1] / (1.0 + zc), 1.0)
        if not (np.any(u == 0.0) or np.any(v == 0.0)):
            return u, v, good
        angle = 1e-9 * 10**attempt
        p = p * math.cos(angle) + np.cross(axis / np.linalg.norm(axis), p) * math.sin(angle)
        p = p / np.linalg.norm(p)
    raise ValueError("p is attained at a lattice site; choose another regular value")


_KUHN = [
    [np.array([0, 0, 0])] + [np.array(sum((np.eye(3, dtype=int)[perm[j]] for j in range(i + 1)))) for i in range(3)]
    for perm in itertools.permutations(range(3))
]


def _coordinate_lattice(geom: LatticeGeometry):
    """Per-axis coordinate of each extended index and the index period (0 if none)."""
    coords, periods = [], []
    for a in range(geom.ndim):
        c = geom.coords[a]
        if geom.capped and a == 0:
            top = c[-1] + 0.5 * geom.h[0]
            coords.append(np.concatenate([[0.0], c, [top]]))
            periods.append(0)
        else:
            coords.append(np.append(c, c[-1] + geom.h[a]))
            periods.append(len(c))
    return coords, periods


def preimage(field: Field, p, projection: str = "none", geom: LatticeGeometry | None = None) -> PreimageCurve:
    """Preimage of the regular value ``p`` as closed polylines.

    Each lattice cell is cut into the six Kuhn tetrahedra sharing its main
    diagonal.  In a tetrahedron the stereographic coordinate about ``p`` is
    interpolated linearly; its zero set is one segment, whose ends lie on two
    faces.  Segments are joined across shared faces into closed curves.
    ``projection`` is "none" (lattice coordinates) or "stereo3" (S3 by
    stereographic projection, S2xS1 into a solid torus, T3 unchanged).
    """
    spec = field.spec
    if spec.ndim != 3:
        raise TopologyError("preimage curves need a three-dimensional field")
    if projection not in ("none", "stereo3"):
        raise ValueError("projection must be 'none' or 'stereo3'")
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or abs(np.linalg.norm(p) - 1.0) > 1e-9:
        raise ValueError("p must be a unit 3-vector")
    geom = geom or build_geometry(spec)
    ext = extend(field.data, geom)
    coords, periods = _coordinate_lattice(geom)
    # close the periodic axes by wrapping one layer
    pad = [(0, 1 if periods[a] else 0) for a in range(3)] + [(0, 0)]
    vals = np.pad(ext, pad, mode="wrap")
    u, v, good = _chart(vals, p)

    shape = np.array(vals.shape[:3])
    ncell = shape - 1
    # candidate cells: all corners in the chart and both functions change sign
    corner_slices = [tuple(slice(o[a], o[a] + ncell[a]) for a in range(3)) for o in itertools.product((0, 1), repeat=3)]

    def reduce(arr, fn):
        out = arr[corner_slices[0]]
        for s in corner_slices[1:]:
            out = fn(out, arr[s])
        return out

    cand = reduce(good, np.logical_and)
    cand &= (reduce(u, np.minimum) <= 0) & (reduce(u, np.maximum) >= 0)
    cand &= (reduce(v, np.minimum) <= 0) & (reduce(v, np.maximum) >= 0)
    cells = np.argwhere(cand)

    def gid(idx):
        # global vertex id with periodic identification
        idx = idx.copy()
        for a in range(3):
            if periods[a]:
                idx[..., a] %= periods[a]
        return np.ravel_multi_index(tuple(idx[..., a] for a in range(3)), tuple(shape))

    segments = {}
    for tet in _KUHN:
        verts = cells[:, None, :] + np.stack(tet)[None]  # (n, 4, 3)
        ids = gid(verts)
        vi = tuple(verts[..., a] for a in range(3))
        uu, vv = u[vi], v[vi]
        pts_all, keys_all, hit_all = [], [], []
        for face in ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)):
            fids = ids[:, face]
            order = np.argsort(fids, axis=1)  # canonical order so both tets agree
            f = np.take_along_axis(np.array(face)[None].repeat(len(ids), 0), order, axis=1)
            rows = np.arange(len(ids))[:, None]
            fu, fv = uu[rows, f], vv[rows, f]
            fx = verts[rows, f].astype(float)
            # solve l1 (u1-u0) + l2 (u2-u0) = -u0, same for v
            a11, a12 = fu[:, 1] - fu[:, 0], fu[:, 2] - fu[:, 0]
            a21, a22 = fv[:, 1] - fv[:, 0], fv[:, 2] - fv[:, 0]
            det = a11 * a22 - a12 * a21
            with np.errstate(divide="ignore", invalid="ignore"):
                l1 = (-fu[:, 0] * a22 + fv[:, 0] * a12) / det
                l2 = (-fv[:, 0] * a11 + fu[:, 0] * a21) / det
                l0 = 1.0 - l1 - l2
                pts = l0[:, None] * fx[:, 0] + l1[:, None] * fx[:, 1] + l2[:, None] * fx[:, 2]
            hit = (det != 0) & (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
            pts_all.append(pts)
            keys_all.append(np.sort(fids, axis=1))
            hit_all.append(hit)
        hits = np.stack(hit_all, axis=1)
        count = hits.sum(axis=1)
        if np.any((count != 0) & (count != 2)):
            warnings.warn("degenerate tetrahedron in preimage extraction; p may not be regular", stacklevel=2)
        # orientation: grad u x grad v in index space
        x = verts.astype(float)
        m = x[:, 1:] - x[:, :1]
        minv = np.linalg.inv(m)
        gu = np.einsum("nij,nj->ni", minv, uu[:, 1:] - uu[:, :1])
        gv = np.einsum("nij,nj->ni", minv, vv[:, 1:] - vv[:, :1])
        tdir = np.cross(gu, gv)
        for n in np.flatnonzero(count == 2):
            fa, fb = np.flatnonzero(hits[n])
            pa, pb = pts_all[fa][n], pts_all[fb][n]
            ka, kb = tuple(keys_all[fa][n]), tuple(keys_all[fb][n])
            if np.dot(pb - pa, tdir[n]) < 0:
                ka, kb, pa, pb = kb, ka, pb, pa
            segments[ka] = (kb, pa, cells[n])

    comps, open_count = _stitch(segments)
    if open_count:
        warnings.warn(f"{open_count} preimage component(s) did not close: field may be discontinuous", stacklevel=2)
    out = []
    for comp in comps:
        pts = np.array([_to_coordinates(q, coords, periods) for q in comp])
        pts = _project(pts, spec, projection)
        out.append(np.vstack([pts, pts[:1]]))
    return PreimageCurve(value=p, components=out, projection=projection)


def _stitch(segments: dict):
    """Follow start-face -> end-face links into closed loops."""
    seen = set()
    comps = []
    open_count = 0
    for start in sorted(segments):
        if start in seen:
            continue
        pts = []
        key = start
        closed = False
        while key in segments and key not in seen:
            seen.add(key)
            nxt, pt, _ = segments[key]
            pts.append(pt)
            key = nxt
            if key == start:
                closed = True
                break
        if closed:
            comps.append(pts)
        else:
            open_count += 1
    return comps, open_count


def _to_coordinates(q, coords, periods):
    out = np.empty(3)
    for a in range(3):
        c = coords[a]
        out[a] = np.interp(q[a], np.arange(len(c)), c)
        if periods[a]:
            span = c[-1] - c[0]
            out[a] = c[0] + (out[a] - c[0]) % span
    return out


def _project(pts: np.ndarray, spec, projection: str) -> np.ndarray:
    if projection == "none" or spec.kind is Kind.T3:
        return pts
    a, b, c = pts.T
    if spec.kind is Kind.S3:
        # (cos r e^{is}, sin r e^{it}) in C2, projected from X4 = 1
        x1, x2 = np.cos(a) * np.cos(b), np.cos(a) * np.sin(b)
        x3, x4 = np.sin(a) * np.cos(c), np.sin(a) * np.sin(c)
        return np.stack([x1, x2, x3], axis=-1) / (1.0 - x4)[:, None]
    # S2xS1: the polar disk of radius theta spun around the z axis
    R0 = math.pi + 1.0
    rho = R0 + a * np.cos(b)
    return np.stack([rho * np.cos(c), rho * np.sin(c), a * np.sin(b)], axis=-1)


# ---------------------------------------------------------------- linking


def _as_list(c):
    if isinstance(c, PreimageCurve):
        return list(c.components)
    if isinstance(c, np.ndarray):
        return [c]
    return [np.asarray(x, dtype=float) for x in c]


def _segments(curves):
    a = np.concatenate([c[:-1] for c in curves])
    b = np.concatenate([c[1:] for c in curves])
    return a, b


def _gauss_open_space(c1, c2) -> float:
    """Exact Gauss double integral for closed polylines in R3."""
    a, b = _segments(c1)
    c, d = _segments(c2)
    total = 0.0
    for s in range(0, len(a), 256):
        A, B = a[s : s + 256, None], b[s : s + 256, None]
        r13, r14 = c[None] - A, d[None] - A
        r23, r24 = c[None] - B, d[None] - B

        def unit(x):
            n = np.linalg.norm(x, axis=-1, keepdims=True)
            return np.divide(x, n, out=np.zeros_like(x), where=n > 0)

        n1 = unit(np.cross(r13, r14))
        n2 = unit(np.cross(r14, r24))
        n3 = unit(np.cross(r24, r23))
        n4 = unit(np.cross(r23, r13))

        def asin(x, y):
            return np.arcsin(np.clip(np.sum(x * y, axis=-1), -1.0, 1.0))

        omega = asin(n1, n2) + asin(n2, n3) + asin(n3, n4) + asin(n4, n1)
        sign = np.sign(np.sum(np.cross(d[None] - c[None], B - A) * r13, axis=-1))
        total += float(np.sum(omega * sign))
    return total / FOUR_PI


def _lattice_chain(curves, box, m, dual):
    """Snap closed curves onto the grid (or its dual) as integer 1-chains, shape (3, m, m, m)."""
    chain = np.zeros((3, m, m, m))
    box = np.asarray(box, dtype=float)
    for c in curves:
        q = c / box * m
        # split long steps so consecutive points are < half a grid cell apart
        dq = np.diff(q, axis=0)
        dq -= m * np.round(dq / m)
        steps = np.maximum(1, np.ceil(2.0 * np.abs(dq).max(axis=1)).astype(int))
        fine = [q[0]]
        for i, k in enumerate(steps):
            fine.extend(q[i] + dq[i] * (j / k) for j in range(1, k + 1))
        fine = np.array(fine)
        site = np.floor(fine).astype(int) if dual else np.rint(fine).astype(int)
        site = np.cumsum(np.vstack([site[:1], _wrap(np.diff(site, axis=0), m)]), axis=0)
        for s0, s1 in zip(site[:-1], site[1:]):
            cur = s0.copy()
            for a in range(3):
                while cur[a] != s1[a]:
                    step = 1 if s1[a] > cur[a] else -1
                    if dual:
                        # dual edge crossing the face normal to a at the larger site
                        face = cur.copy()
                        if step == 1:
                            face[a] += 1
                        chain[(a, *(face % m))] += step
                    else:
                        base = cur.copy() if step == 1 else cur - np.eye(3, dtype=int)[a]
                        chain[(a, *(base % m))] += step
                    cur[a] += step
    return chain


def _wrap(d, m):
    return d - m * np.round(d / m).astype(int)


def _gauss_periodic(c1, c2, box, grid) -> float:
    """Linking of null-homologous cycles in a periodic box via a lattice potential."""
    j = _lattice_chain(c1, box, grid, dual=False)
    kappa = _lattice_chain(c2, box, grid, dual=True)
    for name, ch in (("first", j), ("second", kappa)):
        # total steps along each axis = grid * winding number
        if np.any(np.abs(ch.sum(axis=(1, 2, 3))) > 0.5):
            raise TopologyError(f"{name} curve set winds around the box: linking is undefined")
    k = _wavevectors((grid,) * 3)
    d = np.stack([np.exp(1j * ka) - 1.0 for ka in k])
    sig = _solve_potential(np.fft.fftn(kappa, axes=(1, 2, 3)), d)
    jhat = np.fft.fftn(j, axes=(1, 2, 3))
    return float(np.real(np.sum(jhat * np.conj(sig)))) / grid**3


def _min_distance(c1, c2, box=None) -> float:
    a = np.concatenate([c[:-1] for c in c1])
    b = np.concatenate([c[:-1] for c in c2])
    best = math.inf
    for s in range(0, len(a), 512):
        diff = a[s : s + 512, None] - b[None]
        if box is not None:
            bx = np.asarray(box, dtype=float)
            diff -= bx * np.round(diff / bx)
        best = min(best, float(np.sqrt((diff**2).sum(-1)).min()))
    return best


def gauss_linking(c1, c2, box=None, grid: int = 128) -> float:
    """Real-valued linking integral of two sets of closed polylines.

    In open space (``box=None``) this is the exact Gauss double sum over
    segment pairs.  With ``box`` = edge lengths of a periodic box, curves are
    snapped onto a grid of ``grid``^3 cells and its dual and the linking is
    computed through a lattice vector potential; each set must then be
    null-homologous in the torus.
    """
    l1, l2 = _as_list(c1), _as_list(c2)
    if not l1 or not l2:
        return 0.0
    if box is None:
        return ORIENTATION * _gauss_open_space(l1, l2)
    return ORIENTATION * _gauss_periodic(l1, l2, box, grid)


def linking_number(c1, c2, box=None, grid: int = 128, spacing: float | None = None) -> int:
    """Integer linking number of two closed curves (or sets of components).

    Warns when the curves come closer than ``spacing`` (the lattice spacing,
    or one grid cell in a periodic box): the result is then unreliable.
    """
    l1, l2 = _as_list(c1), _as_list(c2)
    if not l1 or not l2:
        return 0
    for c in l1 + l2:
        if c.ndim != 2 or c.shape[1] != 3 or not np.allclose(c[0], c[-1]) and box is None:
            raise ValueError("curves must be closed polylines of 3D points")
    if spacing is None and box is not None:
        spacing = math.sqrt(3.0) * max(box) / grid
    if spacing is not None and _min_distance(l1, l2, box) < spacing:
        warnings.warn("curves closer than one lattice spacing: linking number unreliable", stacklevel=2)
    val = gauss_linking(l1, l2, box, grid)
    if abs(val - round(val)) > 0.1:
        warnings.warn(f"linking integral {val:.3f} is far from an integer", stacklevel=2)
    return int(round(val))
