"""Worked examples for each operation, including the derived reference values."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopfion import cli
from hopfion.ansatz1d import amn_energy_formula, amn_profile_minimize, vav_energy, vav_minimize
from hopfion.energy import anisotropy_first_order, energy_e2, energy_e4, gradient, plaquette_area, period_stable
from hopfion.field import (
    Field,
    continuity_check,
    init_amn,
    init_baby_s2,
    init_baby_t2,
    init_vav_s2s1,
    linear_vav_profile,
    perturb,
    stereo_to_vector,
)
from hopfion.fieldfile import read_field
from hopfion.geometry import ManifoldSpec, build_geometry
from hopfion.topology import degree_2d, net_flux, preimage

P1 = np.array([0.48, 0.36, 0.8])


def constant(spec, v=(0.0, 0.6, 0.8)):
    return Field(spec, np.broadcast_to(np.asarray(v), tuple(spec.dims) + (3,)).copy())


# ---------------------------------------------------------------- geometry


@pytest.mark.parametrize(
    "spec, volume",
    [
        (ManifoldSpec("S3", (32, 32, 32)), 2 * math.pi**2),
        (ManifoldSpec("T3", (32, 32, 32), periods=(1.0, 0.5, 2.0)), (2 * math.pi) ** 3),
        (ManifoldSpec("S2xS1", (32, 32, 32), L=1.51), 8 * math.pi**2 * 1.51**2),
        (ManifoldSpec("S2", (32, 32)), 4 * math.pi),
        (ManifoldSpec("T2", (32, 32)), 4 * math.pi**2),
    ],
    ids=lambda x: getattr(getattr(x, "kind", None), "value", ""),
)
def test_volume_weights(spec, volume):
    geom = build_geometry(spec)
    assert geom.volume == pytest.approx(volume)
    assert geom.site_volume.sum() == pytest.approx(volume, rel=1e-3)


def test_flat_torus_spacing():
    geom = build_geometry(ManifoldSpec("T3", (16, 16, 16)))
    assert geom.h == pytest.approx((2 * math.pi / 16,) * 3)
    assert np.allclose(geom.site_volume, (2 * math.pi / 16) ** 3)


# ---------------------------------------------------------------- fields


def test_stereo_reference_points():
    assert np.allclose(stereo_to_vector(0), [0, 0, 1])
    assert np.allclose(stereo_to_vector(1), [1, 0, 0])


def test_amn_energies_on_lattice():
    spec = ManifoldSpec("S3", (32, 32, 32))
    assert energy_e4(init_amn(spec, 1, 1)).E4 == pytest.approx(1.0, rel=1e-2)
    e32 = energy_e4(init_amn(spec, 3, 2, amn_profile_minimize(3, 2, 400))).E4
    assert e32 == pytest.approx(1.0276 * 6, rel=1e-2)


def test_amn_22_density_level():
    rep = energy_e4(init_amn(ManifoldSpec("S3", (16, 64, 64)), 2, 2))
    assert rep.density.mean() == pytest.approx(4 / (2 * math.pi**2), rel=1e-2)


def test_vav_lattice_energy_and_fluxes():
    prof = vav_minimize(1024, 1.51)
    spec = ManifoldSpec("S2xS1", (64, 64, 64), L=1.51)
    f = init_vav_s2s1(spec, prof)
    assert energy_e4(f).E4 == pytest.approx(1.0670 * 2, rel=3e-3)
    assert net_flux(f, 0) == 0 and net_flux(f, 2) == 0
    lin = init_vav_s2s1(spec, linear_vav_profile(1024))
    assert energy_e4(lin).E4 == pytest.approx(vav_energy(linear_vav_profile(1024), 1.51), rel=5e-3)


def test_single_vortex_flux_on_s2s1():
    spec = ManifoldSpec("S2xS1", (24, 24, 8), L=1.0)
    theta, phi, _ = np.meshgrid(*build_geometry(spec).coords, indexing="ij")
    f = Field(spec, stereo_to_vector(np.tan(theta / 2) * np.exp(1j * phi)))
    assert abs(net_flux(f, 2)) == 1


def test_baby_s2_examples():
    spec = ManifoldSpec("S2", (64, 64))
    assert energy_e4(init_baby_s2(spec, 1)).E4 == pytest.approx(1.0, rel=1e-2)
    assert degree_2d(init_baby_s2(spec, 3)).Q_numeric == pytest.approx(3, abs=1e-3)
    # the density is constant up to a second-order discretization error
    spreads = []
    for n in (64, 128):
        d = energy_e4(init_baby_s2(ManifoldSpec("S2", (n, n)), 2)).density
        spreads.append((d.max() - d.min()) / d.mean())
    assert spreads[0] < 0.02
    assert spreads[1] < spreads[0] / 3.5


def test_baby_t2_examples():
    f = init_baby_t2(ManifoldSpec("T2", (64, 64)))
    assert degree_2d(f).Q_numeric == pytest.approx(2, abs=1e-3)
    # the largest jump sits on the non-smooth lines x = 0, pi where the polar
    # angle grows like the square root of the distance
    assert continuity_check(f) <= math.pi / 32 * 4


def test_perturbing_a21_raises_energy():
    spec = ManifoldSpec("S3", (16, 16, 16))
    f = init_amn(spec, 2, 1, amn_profile_minimize(2, 1, 200))
    assert energy_e4(perturb(f, 0.1, 1)).E4 > energy_e4(f).E4


# ---------------------------------------------------------------- energy


def lhuilier(a, b, c):
    """Signed triangle area from side lengths (L'Huilier's theorem)."""
    # atan2 keeps short arcs accurate where acos of a dot product near 1 does not
    x, y, z = (math.atan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)) for u, v in ((b, c), (c, a), (a, b)))
    s = 0.5 * (x + y + z)
    t = math.tan(s / 2) * math.tan((s - x) / 2) * math.tan((s - y) / 2) * math.tan((s - z) / 2)
    return math.copysign(4 * math.atan(math.sqrt(max(t, 0.0))), np.dot(a, np.cross(b, c)))


def dense_quad_area(verts, level=10):
    """Fan of thin triangles from the centroid to each edge cut into 2**level geodesic pieces."""
    centre = np.mean(verts, axis=0)
    centre /= np.linalg.norm(centre)
    total = 0.0
    for p, q in zip(verts, np.roll(verts, -1, axis=0)):
        omega = math.acos(np.clip(np.dot(p, q), -1, 1))
        t = np.linspace(0, 1, 2**level + 1)[:, None]
        pts = (np.sin((1 - t) * omega) * p + np.sin(t * omega) * q) / math.sin(omega)
        total += sum(lhuilier(centre, pts[i], pts[i + 1]) for i in range(len(pts) - 1))
    return total


@given(
    seed=st.integers(0, 10_000),
    spread=st.floats(0.2, 1.0),
)
def test_plaquette_area_matches_dense_triangulation(seed, spread):
    rng = np.random.default_rng(seed)
    # a convex quadrilateral inside a cap around a random axis
    angles = np.sort(rng.uniform(0, 2 * math.pi, 4))
    if np.max(np.diff(np.r_[angles, angles[0] + 2 * math.pi])) > math.pi * 0.9:
        return
    radius = spread * rng.uniform(0.5, 1.0)
    local = np.stack([np.sin(radius) * np.cos(angles), np.sin(radius) * np.sin(angles), np.full(4, np.cos(radius))], -1)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    verts = local @ q.T
    got = plaquette_area(*verts)
    assert got == pytest.approx(dense_quad_area(verts), abs=1e-9)


def test_plaquette_trivial_cases():
    e = np.eye(3)
    assert plaquette_area(e[0], e[0], e[0], e[0]) == 0.0
    mid = (e[0] + e[2]) / math.sqrt(2)
    assert plaquette_area(e[0], e[1], e[2], mid) == pytest.approx(math.pi / 2)


def test_constant_fields_have_no_gradient():
    spec = ManifoldSpec("S3", (8, 8, 8))
    assert np.abs(gradient(constant(spec), beta=0.5)).max() < 1e-14


def test_e2_single_flip_t3():
    # six links change by |dphi|^2 = 4, each with weight h / (32 pi^2)
    spec = ManifoldSpec("T3", (16, 16, 16))
    f = constant(spec, (0.0, 0.0, 1.0))
    f.data[3, 4, 5] = [0.0, 0.0, -1.0]
    h = 2 * math.pi / 16
    assert energy_e2(f) == pytest.approx(6 * 4 * h / (32 * math.pi**2))


def test_e2_of_hopf_map_converges_to_half():
    # the Hopf map stretches two directions by 2: |dphi|^2 = 8, volume 2 pi^2
    vals = [energy_e2(init_amn(ManifoldSpec("S3", (n, n, n)), 1, 1)) for n in (16, 32, 64)]
    richardson = (4 * vals[2] - vals[1]) / 3
    assert all(v > 0 for v in vals)
    assert richardson == pytest.approx(0.5, rel=2e-3)
    assert abs(vals[2] - 0.5) < abs(vals[1] - 0.5) < abs(vals[0] - 0.5)


def test_anisotropy_examples():
    assert anisotropy_first_order(0.906, 0.587, 0.587, 0.0, 0.0) == 0.0
    assert anisotropy_first_order(0.906, 0.587, 0.587, 0.01, 0.0) == pytest.approx(0.00906)
    assert period_stable(0.906, 0.587, 0.587)


# ---------------------------------------------------------------- topology


def test_constant_field_topology():
    assert degree_2d(constant(ManifoldSpec("S2", (16, 16)))).Q_numeric == 0.0
    assert net_flux(constant(ManifoldSpec("T3", (8, 8, 8))), 0) == 0
    assert len(preimage(constant(ManifoldSpec("S3", (8, 8, 8))), P1)) == 0


def test_a32_preimage_is_one_curve():
    spec = ManifoldSpec("S3", (32, 64, 64))
    f = init_amn(spec, 3, 2, amn_profile_minimize(3, 2, 400))
    assert len(preimage(f, P1)) == 1


# ---------------------------------------------------------------- one-dimensional problems


def test_profile_examples():
    p11 = amn_profile_minimize(1, 1, 400)
    assert np.allclose(p11.f, 2 * p11.grid, atol=1e-6)
    assert p11.energy == pytest.approx(1.0, abs=1e-4)
    for (m, n), e in (((3, 2), 1.0276 * 6), ((4, 3), 1.0139 * 12)):
        assert amn_profile_minimize(m, n).energy == pytest.approx(e, rel=3e-3)
    assert amn_energy_formula(2, 1) == pytest.approx(2.1640, abs=1e-4)
    # the reported value is per unit charge to four decimals
    assert round(amn_energy_formula(3, 1) / 3, 4) == 1.2137


def test_vav_radius_dependence():
    best = vav_minimize(512, "auto")
    assert vav_minimize(512, 1.0).energy > best.energy
    assert vav_minimize(512, 1.51).energy == pytest.approx(1.0670 * 2, rel=3e-3)


# ---------------------------------------------------------------- command line


def test_cli_examples(tmp_path, capsys):
    a21 = tmp_path / "a21.hpf"
    assert cli.main(["init", "--manifold", "s3", "--size", "32", "--ansatz", "amn", "--m", "2", "--n", "1", "-o", str(a21)]) == 0
    assert read_field(a21)[0].data.shape == (32, 32, 32, 3)
    t2 = tmp_path / "t2.hpf"
    cli.main(["init", "--manifold", "t2", "--size", "64", "--ansatz", "baby-t2", "-o", str(t2)])
    capsys.readouterr()
    cli.main(["charge", "-i", str(t2)])
    assert '"Q": 2' in capsys.readouterr().out
    assert cli.main(["init", "--manifold", "s2s1", "--ansatz", "vav", "-o", str(tmp_path / "x.hpf")]) == 2
    capsys.readouterr()
    cli.main(["profile", "amn", "--m", "3", "--n", "2"])
    out = capsys.readouterr().out
    assert "6.1656" in out or '"E": 6.1657' in out or '"formula": 6.165758' in out
    cli.main(["profile", "vav", "--L", "auto", "--n-theta", "512"])
    assert '"L": 1.5' in capsys.readouterr().out
    a22 = tmp_path / "a22.hpf"
    cli.main(["init", "--manifold", "s3", "--dims", "32,64,64", "--ansatz", "amn", "--m", "2", "--n", "2", "-o", str(a22)])
    capsys.readouterr()
    cli.main(["preimage", "-i", str(a22), "--value", "0.48,0.36,0.8", "-o", str(tmp_path / "c.csv")])
    assert '"components": 2' in capsys.readouterr().out
