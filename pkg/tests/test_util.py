import numpy as np
from hypothesis import given, strategies as st

from mobo.util import Box, sobol_points, unit_box


def test_unit_box_shape():
    b = unit_box(3)
    assert b.dim == 3
    assert np.allclose(b.width, 1.0)


@given(st.integers(1, 5), st.floats(-5, 5), st.floats(0.1, 10),
       st.integers(0, 2**31 - 1))
def test_box_unit_roundtrip(d, lo, width, seed):
    box = Box(lo=np.full(d, lo), hi=np.full(d, lo + width))
    x = np.random.default_rng(seed).uniform(lo, lo + width, d)
    u = box.to_unit(x)
    assert np.all((u >= -1e-12) & (u <= 1 + 1e-12))
    assert np.allclose(box.from_unit(u), x, atol=1e-9 * width)


def test_box_clip_and_contains():
    box = Box(lo=np.array([0.0, 0.0]), hi=np.array([1.0, 2.0]))
    assert box.contains(np.array([0.5, 1.5]))
    assert not box.contains(np.array([1.5, 0.5]))
    assert np.allclose(box.clip(np.array([2.0, -1.0])), [1.0, 0.0])


def test_sobol_determinism_and_range(rng):
    a = sobol_points(64, 3, np.random.default_rng(7))
    b = sobol_points(64, 3, np.random.default_rng(7))
    assert np.array_equal(a, b)
    assert a.shape == (64, 3)
    assert np.all((a >= 0) & (a < 1))


def test_sobol_low_discrepancy():
    # scrambled Sobol should fill the unit square far more evenly than the
    # worst corner-heavy configuration: every quadrant gets ~1/4 of points
    pts = sobol_points(256, 2, np.random.default_rng(0))
    for qx in (0, 1):
        for qy in (0, 1):
            frac = np.mean((pts[:, 0] >= 0.5 * qx) & (pts[:, 0] < 0.5 * (qx + 1))
                           & (pts[:, 1] >= 0.5 * qy)
                           & (pts[:, 1] < 0.5 * (qy + 1)))
            assert abs(frac - 0.25) < 0.05
