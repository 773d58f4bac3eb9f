import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import SMALL_SPECS, directional_fd, random_field, smooth_random_field
from hopfion.energy import (
    IllConditionedPlaquette,
    anisotropy_first_order,
    energy_e2,
    energy_e4,
    evaluate,
    evaluate_reference,
    gradient,
    period_stable,
    plaquette_area,
    triangle_area,
)
from hopfion.field import Field, init_amn, init_baby_s2, init_baby_t2, init_t3_vav, perturb
from hopfion.geometry import ManifoldSpec, build_geometry

unit = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1).map(
    lambda v: np.asarray(v) / np.linalg.norm(v)
)


def girard_area(a, b, c):
    """Spherical excess from the three vertex angles, signed by orientation."""

    def angle(p, q, r):
        tq = q - np.dot(p, q) * p
        tr = r - np.dot(p, r) * p
        return math.atan2(np.linalg.norm(np.cross(tq, tr)), np.dot(tq, tr))

    excess = angle(a, b, c) + angle(b, c, a) + angle(c, a, b) - math.pi
    return math.copysign(excess, np.dot(a, np.cross(b, c)))


def test_octant_triangle():
    e = np.eye(3)
    assert triangle_area(e[0], e[1], e[2]) == pytest.approx(math.pi / 2)
    assert triangle_area(e[0], e[2], e[1]) == pytest.approx(-math.pi / 2)


@given(unit, unit, unit)
def test_triangle_area_matches_girard(a, b, c):
    # keep away from degenerate and near-antipodal configurations
    if min(np.linalg.norm(a - b), np.linalg.norm(b - c), np.linalg.norm(c - a)) < 1e-3:
        return
    if min(np.linalg.norm(a + b), np.linalg.norm(b + c), np.linalg.norm(c + a)) < 0.1:
        return
    if abs(np.dot(a, np.cross(b, c))) < 1e-6:
        return
    assert triangle_area(a, b, c) == pytest.approx(girard_area(a, b, c), abs=1e-9)


@given(unit, unit, unit, unit)
def test_plaquette_area_independent_of_diagonal(v1, v2, v3, v4):
    try:
        a = plaquette_area(v1, v2, v3, v4)
        b = plaquette_area(v2, v3, v4, v1)
    except IllConditionedPlaquette:
        return
    d = (a - b) % (4 * math.pi)
    # atan2 loses digits as a triangle approaches the degenerate configuration
    assert min(d, 4 * math.pi - d) < 1e-7


def test_antipodal_plaquette_raises():
    e = np.eye(3)
    with pytest.raises(IllConditionedPlaquette):
        triangle_area(e[2], -e[2], e[0])


@pytest.mark.parametrize("spec", SMALL_SPECS, ids=lambda s: s.kind.value)
@pytest.mark.parametrize("beta", [0.0, 0.3])
def test_kernel_matches_reference(spec, beta):
    geom = build_geometry(spec)
    f = smooth_random_field(spec, 3)
    e4, e2, g = evaluate(f.data, geom, beta)
    r4, r2, rg = evaluate_reference(f.data, geom, beta)
    assert e4 == pytest.approx(r4, rel=1e-12)
    assert e2 == pytest.approx(r2, rel=1e-12)
    assert np.allclose(g, rg, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("spec", SMALL_SPECS, ids=lambda s: s.kind.value)
@given(seed=st.integers(0, 10_000))
def test_gradient_matches_finite_differences(spec, seed):
    geom = build_geometry(spec)
    f = random_field(spec, seed)
    beta = 0.2
    try:
        g = gradient(f, geom, beta)
    except IllConditionedPlaquette:
        return
    rng = np.random.default_rng(seed + 1)
    d = rng.standard_normal(f.data.shape)
    d -= np.sum(d * f.data, axis=-1, keepdims=True) * f.data

    def total(x):
        e4, e2, _ = evaluate(x / np.linalg.norm(x, axis=-1, keepdims=True), geom, beta, grad=False)
        return e4 + beta * e2

    fd = directional_fd(total, f.data, d)
    assume(fd is not None)
    an = float(np.sum(g * d))
    assert an == pytest.approx(fd, rel=1e-6, abs=1e-9 * np.abs(g).sum())


def test_gradient_is_tangent(small_spec):
    f = smooth_random_field(small_spec, 5)
    g = gradient(f, beta=0.1)
    assert np.abs(np.sum(g * f.data, axis=-1)).max() < 1e-12
    with pytest.raises(ValueError):
        gradient(f, beta=-1.0)


def test_constant_field_has_zero_energy(small_spec):
    data = np.zeros(tuple(small_spec.dims) + (3,))
    data[..., 0] = 1.0
    rep = energy_e4(Field(small_spec, data))
    assert rep.E4 == 0.0 and rep.E2 == 0.0


def test_e2_single_flip():
    # hand count: a flipped site changes four unit-weight links by |dphi|^2 = 4
    spec = ManifoldSpec("T2", (16, 16))
    data = np.zeros(spec.dims + (3,))
    data[..., 2] = 1.0
    data[5, 7, 2] = -1.0
    assert energy_e2(Field(spec, data)) == pytest.approx(16 / (32 * math.pi**2))


def test_standard_hopf_map_energy_converges_second_order():
    errs = []
    for n in (16, 32):
        spec = ManifoldSpec("S3", (n, n, n))
        errs.append(abs(energy_e4(init_amn(spec, 1, 1)).E4 - 1.0))
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] > 3.5


@pytest.mark.parametrize("Q", [1, 2, 3])
def test_baby_s2_saturates_bound(Q):
    rep = energy_e4(init_baby_s2(ManifoldSpec("S2", (64, 64)), Q))
    assert rep.E4 == pytest.approx(Q * Q, rel=1e-2)


def test_baby_t2_saturates_bound():
    assert energy_e4(init_baby_t2(ManifoldSpec("T2", (64, 64)))).E4 == pytest.approx(4.0, rel=1e-2)


def test_report_fields():
    spec = ManifoldSpec("T3", (16, 16, 16))
    rep = energy_e4(init_t3_vav(spec), beta=0.5)
    assert sum(rep.directional) == pytest.approx(rep.E4)
    assert rep.E_total == pytest.approx(rep.E4 + 0.5 * rep.E2)
    assert rep.kappa == pytest.approx(1 / (32 * math.pi**2))
    assert rep.density.shape == spec.dims
    assert rep.density_min >= 0
    # tubes along x: the (y, z) plaquettes carry the largest share
    assert rep.directional[0] > rep.directional[1]
    assert rep.directional[1] == pytest.approx(rep.directional[2], rel=1e-10)


def test_perturbation_raises_energy_of_exact_solution():
    spec = ManifoldSpec("S2", (32, 32))
    base = init_baby_s2(spec, 2)
    assert energy_e4(perturb(base, 0.05, 7)).E4 > energy_e4(base).E4


@given(
    ex=st.floats(0.1, 2.0),
    ey=st.floats(0.1, 2.0),
    ez=st.floats(0.1, 2.0),
    eps=st.floats(1e-4, 1e-2),
)
def test_period_rescaling_matches_first_order(ex, ey, ez, eps):
    # the lattice energy scales exactly as E_x/(1-e) + E_y(1-e) + E_z/(1-e) under y -> (1-e) y
    exact = ex / (1 - eps) + ey * (1 - eps) + ez / (1 - eps) - (ex + ey + ez)
    assert anisotropy_first_order(ex, ey, ez, eps, 0.0) == pytest.approx(exact, abs=2 * (ex + ey + ez) * eps**2)


def test_period_rescaling_on_lattice():
    base = ManifoldSpec("T3", (16, 16, 16))
    f = perturb(init_t3_vav(base), 0.05, 1)
    rep = energy_e4(f)
    # shrinking keeps the largest period at 2 pi, so kappa is unchanged
    for eps in (1e-3, 1e-2):
        spec = ManifoldSpec("T3", base.dims, periods=(1.0, 1.0 - eps, 1.0))
        e = energy_e4(Field(spec, f.data)).E4
        ex, ey, ez = rep.directional
        predicted = ex / (1 - eps) + ey * (1 - eps) + ez / (1 - eps)
        assert e == pytest.approx(predicted, rel=1e-12)
        assert e - rep.E4 == pytest.approx(anisotropy_first_order(ex, ey, ez, eps, 0.0), rel=3 * eps)


def test_period_stability_of_reported_split():
    assert period_stable(0.906, 0.587, 0.587)
    assert not period_stable(0.1, 0.9, 0.3)
