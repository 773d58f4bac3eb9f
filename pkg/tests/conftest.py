import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hopfion.field import Field
from hopfion.geometry import ManifoldSpec, build_geometry

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile(
    "stress", deadline=None, max_examples=400, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_field(spec: ManifoldSpec, seed: int) -> Field:
    rng = np.random.default_rng(seed)
    return Field.from_vectors(spec, rng.standard_normal(tuple(spec.dims) + (3,)))


def smooth_random_field(spec: ManifoldSpec, seed: int, modes: int = 2) -> Field:
    """A random field built from a few low Fourier modes (no antipodal neighbours)."""
    geom = build_geometry(spec)
    grids = np.meshgrid(*geom.coords, indexing="ij")
    rng = np.random.default_rng(seed)
    v = np.zeros(tuple(spec.dims) + (3,))
    v[..., 2] = 1.5
    for c in range(3):
        for _ in range(modes):
            k = rng.integers(-2, 3, size=len(grids))
            phase = sum(ki * g for ki, g in zip(k, grids))
            v[..., c] += rng.normal() * np.cos(phase + rng.uniform(0, 2 * np.pi))
    return Field.from_vectors(spec, v)


SMALL_SPECS = [
    ManifoldSpec("T3", (8, 8, 8)),
    ManifoldSpec("S3", (8, 8, 8)),
    ManifoldSpec("S2xS1", (8, 8, 8), L=1.5),
    ManifoldSpec("S2", (10, 12)),
    ManifoldSpec("T2", (10, 12)),
]


@pytest.fixture(params=SMALL_SPECS, ids=lambda s: s.kind.value)
def small_spec(request):
    return request.param


# acceptance criterion -> latest (passed, detail); printed in the terminal summary
ACCEPTANCE: dict = {}


def record_acceptance(criterion, passed: bool, detail: str) -> None:
    ACCEPTANCE[str(criterion)] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("m")), k)):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


def directional_fd(total, x, d, eps=1e-5):
    """Richardson-extrapolated central difference of ``total`` at ``x`` along ``d``.

    Returns None when the three central differences at eps, eps/2, eps/4 do not
    shrink like eps^2, i.e. the segment crosses a jump of the energy (a plaquette
    area passing the +-2 pi branch), where no derivative exists.
    """
    c = [(total(x + e * d) - total(x - e * d)) / (2 * e) for e in (eps, eps / 2, eps / 4)]
    d1, d2 = c[0] - c[1], c[1] - c[2]
    scale = 1e-10 * max(abs(c[2]), 1.0)
    if abs(d1) > scale and (d2 == 0 or not 3.0 < d1 / d2 < 5.0):
        return None
    return (4 * c[2] - c[1]) / 3
