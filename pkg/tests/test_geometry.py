import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopfion.geometry import (
    Kind,
    ManifoldError,
    ManifoldSpec,
    bound_value,
    build_geometry,
    eigenvalue,
    extend,
    normalization_kappa,
)


def test_kappa_values():
    assert normalization_kappa(ManifoldSpec("T3", (8, 8, 8))) == pytest.approx(1 / (32 * math.pi**2))
    assert normalization_kappa(ManifoldSpec("S3", (8, 8, 8))) == pytest.approx(1 / (64 * math.pi**2))
    assert normalization_kappa(ManifoldSpec("S2xS1", (8, 8, 8), L=2.0)) == pytest.approx(
        2 / (32 * math.pi**2 * math.sqrt(2))
    )


def test_kappa_uses_largest_period():
    spec = ManifoldSpec("T3", (8, 8, 8), periods=(1.0, 0.9, 0.95))
    assert eigenvalue(spec) == 1.0
    assert normalization_kappa(spec) == pytest.approx(1 / (32 * math.pi**2))


def test_kappa_2d_is_volume_prefactor():
    assert normalization_kappa(ManifoldSpec("S2", (8, 8))) == pytest.approx(4 * math.pi / (32 * math.pi**2))
    assert normalization_kappa(ManifoldSpec("T2", (8, 8))) == pytest.approx(4 * math.pi**2 / (32 * math.pi**2))


def test_bounds():
    assert bound_value(ManifoldSpec("S2", (8, 8)), 3) == 9
    assert bound_value(ManifoldSpec("T3", (8, 8, 8)), -2) == 2


@pytest.mark.parametrize(
    "kind, dims, kwargs",
    [
        ("K3", (8, 8, 8), {}),
        ("T3", (8, 8), {}),
        ("T3", (8, 3, 8), {}),
        ("S2xS1", (8, 8, 8), {}),
        ("S2xS1", (8, 8, 8), {"L": -1.0}),
        ("S3", (8, 8, 8), {"L": 1.0}),
        ("S3", (8, 8, 8), {"periods": (1, 1, 1)}),
        ("T2", (8, 8), {"periods": (1.0, 0.0)}),
    ],
)
def test_invalid_specs(kind, dims, kwargs):
    with pytest.raises(ManifoldError):
        ManifoldSpec(kind, dims, **kwargs)


def test_no_eigenvalue_in_2d():
    with pytest.raises(ManifoldError):
        eigenvalue(ManifoldSpec("S2", (8, 8)))


@given(
    kind=st.sampled_from(list(Kind)),
    n=st.integers(4, 40),
    L=st.floats(0.3, 4.0),
    scale=st.floats(0.5, 2.0),
)
def test_header_round_trip(kind, n, L, scale):
    dims = (n,) * kind.ndim
    kwargs = {}
    if kind is Kind.S2xS1:
        kwargs["L"] = L
    if kind.is_torus:
        kwargs["periods"] = (scale,) * kind.ndim
    spec = ManifoldSpec(kind, dims, **kwargs)
    assert ManifoldSpec.from_header(spec.to_header()) == spec


@pytest.mark.parametrize(
    "spec",
    [
        ManifoldSpec("S3", (48, 48, 48)),
        ManifoldSpec("S2xS1", (48, 32, 32), L=1.5),
        ManifoldSpec("S2", (64, 64)),
        ManifoldSpec("T3", (16, 16, 16), periods=(1.0, 0.8, 1.2)),
    ],
    ids=lambda s: s.kind.value,
)
def test_site_volumes_sum_to_volume(spec):
    geom = build_geometry(spec)
    assert geom.site_volume.sum() == pytest.approx(geom.volume, rel=2e-3)


def test_virtual_rows_are_unit_and_constant():
    spec = ManifoldSpec("S3", (8, 10, 12))
    geom = build_geometry(spec)
    data = np.random.default_rng(0).standard_normal(spec.dims + (3,))
    data /= np.linalg.norm(data, axis=-1, keepdims=True)
    ext = extend(data, geom)
    assert ext.shape == (10, 10, 12, 3)
    assert np.allclose(np.linalg.norm(ext, axis=-1), 1.0)
    # r -> 0 collapses t (axis 2), r -> pi/2 collapses s (axis 1)
    assert np.allclose(ext[0], ext[0][:, :1])
    assert np.allclose(ext[-1], ext[-1][:1])


def test_plaquette_count_includes_closures():
    geom = build_geometry(ManifoldSpec("S2", (10, 12)))
    assert geom.plaquette_count((0, 1)) == 11 * 12
    assert not geom.periodic(0) and geom.periodic(1)
