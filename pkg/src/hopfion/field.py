"""Unit-vector fields on the lattice and the initial configurations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Kind, LatticeGeometry, ManifoldError, ManifoldSpec, build_geometry

NORTH = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, -1.0])


@dataclass
class Field:
    """Unit 3-vectors on the lattice sites; ``data`` has shape ``dims + (3,)``."""

    spec: ManifoldSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.shape != tuple(self.spec.dims) + (3,):
            raise ValueError(f"field shape {self.data.shape} does not match dims {self.spec.dims}")

    @classmethod
    def from_vectors(cls, spec: ManifoldSpec, vectors: np.ndarray) -> "Field":
        return cls(spec, normalize(np.asarray(vectors, dtype=np.float64)))

    def copy(self) -> "Field":
        return Field(self.spec, self.data.copy())

    def max_norm_error(self) -> float:
        return float(np.abs(np.linalg.norm(self.data, axis=-1) - 1.0).max())


def normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def stereo_to_vector(w) -> np.ndarray:
    """Unit vector for the stereographic coordinate w = (p1 + i p2) / (1 + p3).

    ``w`` may be an array; infinite entries map to the south pole.
    """
    w = np.asarray(w, dtype=complex)
    inf = ~np.isfinite(w)
    wf = np.where(inf, 0.0, w)
    r2 = np.abs(wf) ** 2
    out = np.stack([2 * wf.real, 2 * wf.imag, 1 - r2], axis=-1) / (1 + r2)[..., None]
    out[inf] = SOUTH
    return out


def vector_to_stereo(v) -> np.ndarray:
    """Inverse of :func:`stereo_to_vector`; the south pole maps to ``inf``."""
    v = np.asarray(v, dtype=float)
    den = 1.0 + v[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (v[..., 0] + 1j * v[..., 1]) / den
    return np.where(den == 0.0, complex(np.inf, 0.0), w)


def _polar_vectors(theta, psi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(st * np.cos(psi), st * np.sin(psi), np.cos(theta)), axis=-1)


def _mesh(spec: ManifoldSpec):
    return np.meshgrid(*build_geometry(spec).coords, indexing="ij")


def _require(spec: ManifoldSpec, kind: Kind, what: str):
    if spec.kind is not kind:
        raise ManifoldError(f"{what} needs a {kind.value} lattice, got {spec.kind.value}")


def init_amn(spec: ManifoldSpec, m: int, n: int, profile=None) -> Field:
    """Doubly-symmetric S3 field w = cot(alpha(r)/2) exp(i(m s - n t)), Hopf charge m*n.

    ``profile`` is a :class:`~hopfion.ansatz1d.ProfileSolution` giving alpha(r) with
    alpha(0) = 0, alpha(pi/2) = pi; the default alpha = 2r reproduces
    w = cot(r) exp(i n (s - t)) for m = n.
    """
    _require(spec, Kind.S3, "init_amn")
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    r, s, t = _mesh(spec)
    if profile is None:
        alpha = 2.0 * r
    else:
        alpha = np.interp(r, profile.grid, profile.f)
    # target polar angle is pi - alpha
    return Field.from_vectors(spec, _polar_vectors(math.pi - alpha, m * s - n * t))


def init_vav_s2s1(spec: ManifoldSpec, profile) -> Field:
    """Vortex-antivortex field on S2xS1 with profile f(theta), Hopf charge 2.

    The azimuth is phi + chi for theta < pi/2 and phi - chi beyond.
    """
    _require(spec, Kind.S2xS1, "init_vav_s2s1")
    grid = np.asarray(profile.grid, dtype=float)
    f = np.asarray(profile.f, dtype=float)
    checks = [(0.0, 0.0), (0.5 * math.pi, math.pi), (math.pi, 2.0 * math.pi)]
    for theta0, f0 in checks:
        val = np.interp(theta0, grid, f)
        if grid[0] > 1e-12 or grid[-1] < math.pi - 1e-12 or abs(val - f0) > 1e-9:
            raise ValueError(f"profile must satisfy f({theta0:.4f}) = {f0:.4f}")
    theta, phi, chi = _mesh(spec)
    ft = np.interp(theta, grid, f)
    psi = np.where(theta < 0.5 * math.pi, phi + chi, phi - chi)
    return Field.from_vectors(spec, _polar_vectors(ft, psi))


def linear_vav_profile(n: int = 256):
    """The admissible profile f = 2 theta (a ProfileSolution without energy)."""
    from .ansatz1d import ProfileSolution

    grid = np.linspace(0.0, math.pi, n + 1)
    return ProfileSolution(grid=grid, f=2.0 * grid, kind="vav")


def _tube(y, z, center, radius, sign, twist):
    dy = (y - center[0] + math.pi) % (2 * math.pi) - math.pi
    dz = (z - center[1] + math.pi) % (2 * math.pi) - math.pi
    rho = np.hypot(dy, dz)
    inside = rho < radius
    theta = np.where(inside, math.pi * (1.0 - rho / radius), 0.0)
    psi = sign * (np.arctan2(dz, dy) + twist)
    return inside, theta, psi


def init_t3_vav(spec: ManifoldSpec, pairs: int = 1) -> Field:
    """Parallel vortex-antivortex tubes along x on T3, Hopf charge 2 * pairs.

    Each tube is a compact degree +-1 lump in the (y, z) torus whose phase
    turns once along x in the same sense as its degree, so every tube adds +1
    to the Hopf charge while the net flux through every coordinate plane
    vanishes.  A single pair sits on the diagonal y = z; more pairs fill a
    2 x pairs grid in (y, z) with checkerboard signs.
    """
    _require(spec, Kind.T3, "init_t3_vav")
    if pairs < 1:
        raise ValueError("pairs must be positive")
    x, y, z = _mesh(spec)
    px, py, pz = spec.periods or (1.0, 1.0, 1.0)
    # work in unit-period coordinates so the tubes scale with the box
    xs, ys, zs = x / px, y / py, z / pz
    if pairs == 1:
        tubes = [((0.5 * math.pi, 0.5 * math.pi), 1.0), ((1.5 * math.pi, 1.5 * math.pi), -1.0)]
        radius = 0.95 * math.pi / math.sqrt(2.0)
    else:
        dz = 2 * math.pi / pairs
        tubes = [
            (((i + 0.5) * math.pi, (j + 0.5) * dz), (-1.0) ** (i + j))
            for i in range(2)
            for j in range(pairs)
        ]
        radius = 0.95 * 0.5 * min(math.pi, dz)
    theta = np.zeros_like(x)
    psi = np.zeros_like(x)
    for centre, sign in tubes:
        inside, th, ps = _tube(ys, zs, centre, radius, sign, -xs)
        theta = np.where(inside, th, theta)
        psi = np.where(inside, ps, psi)
    return Field.from_vectors(spec, _polar_vectors(theta, psi))


def init_baby_s2(spec: ManifoldSpec, Q: int) -> Field:
    """w = z^Q / |z|^(Q-1) on the unit sphere: degree Q with constant density."""
    _require(spec, Kind.S2, "init_baby_s2")
    if Q < 1:
        raise ValueError("Q must be positive")
    theta, phi = _mesh(spec)
    return Field.from_vectors(spec, _polar_vectors(theta, Q * phi))


def init_baby_t2(spec: ManifoldSpec) -> Field:
    """The degree-2 torus field with constant energy density."""
    _require(spec, Kind.T2, "init_baby_t2")
    x, y = _mesh(spec)
    px, py = spec.periods or (1.0, 1.0)
    xs, ys = x / px, y / py
    p1 = 1.0 - (2.0 / math.pi) * np.abs(xs - math.pi)
    f = np.sqrt(np.clip(1.0 - p1**2, 0.0, None))
    p2 = np.sign(xs - math.pi) * f * np.cos(ys)
    p3 = f * np.sin(ys)
    return Field.from_vectors(spec, np.stack([p1, p2, p3], axis=-1))


def init_lump_t2(spec: ManifoldSpec, degree: int = 1) -> Field:
    """A single compact lump of the given degree centred on the T2 lattice."""
    _require(spec, Kind.T2, "init_lump_t2")
    x, y = _mesh(spec)
    px, py = spec.periods or (1.0, 1.0)
    inside, theta, psi = _tube(x / px, y / py, (math.pi, math.pi), 0.95 * math.pi, 1.0, 0.0)
    # the polar angle falls outward, so the azimuth turns backwards for positive degree
    psi = -degree * psi
    return Field.from_vectors(spec, _polar_vectors(np.where(inside, theta, 0.0), psi))


def perturb(field: Field, amplitude: float, seed: int) -> Field:
    """Add a random tangent displacement and project back onto the sphere.

    Components are drawn from numpy's PCG64 generator seeded with ``seed``
    (stable across platforms), projected onto each tangent plane and scaled
    by ``amplitude``.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if amplitude == 0:
        return field.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal(field.data.shape)
    noise -= np.sum(noise * field.data, axis=-1, keepdims=True) * field.data
    return Field.from_vectors(field.spec, field.data + amplitude * noise)


def continuity_check(field: Field, geom: LatticeGeometry | None = None) -> float:
    """Largest angle between neighbouring site vectors, over all lattice links."""
    geom = geom or build_geometry(field.spec)
    d = field.data
    worst = 0.0
    for a in range(field.spec.ndim):
        if geom.periodic(a):
            nb = np.roll(d, -1, axis=a)
            cur = d
        else:
            nb = np.take(d, range(1, d.shape[a]), axis=a)
            cur = np.take(d, range(d.shape[a] - 1), axis=a)
        # atan2 keeps accuracy for tiny angles
        cross = np.linalg.norm(np.cross(cur, nb), axis=-1)
        dot = np.sum(cur * nb, axis=-1)
        worst = max(worst, float(np.arctan2(cross, dot).max()))
    return worst
