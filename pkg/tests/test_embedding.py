"""Classical scaling and kernel smoothing over the recovered coordinates."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from blauspace import (
    NumericError,
    classical_mds,
    conditional_profile,
    kernel_smooth,
    silverman_bandwidth,
)
from blauspace.embedding import embedding_grid

# N-W estimate at 0 for points (-1, 0, 1), values (0, 1, 0), bandwidth 1:
# (2 e^{-1/2}) / (1 + 2 e^{-1/2}) * 0 + 1 / (1 + 2 e^{-1/2})
NW_AT_ZERO = 0.45186276187760605


def _pairwise(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))


def test_collinear_points_recovered_in_one_dimension():
    D = _pairwise([0.0, 1.0, 2.0])
    res = classical_mds(D, k=2)
    np.testing.assert_allclose(_pairwise(res.coordinates), D, atol=1e-10)
    # a line needs one axis; the second eigenvalue vanishes
    assert res.eigenvalues[0] == pytest.approx(2.0, rel=1e-10)
    assert abs(res.eigenvalues[1]) < 1e-10
    np.testing.assert_allclose(res.coordinates[:, 1], 0.0, atol=1e-7)
    assert res.n_negative == 0
    assert res.stress == pytest.approx(0.0, abs=1e-12)


def test_planar_configuration_recovered():
    rng = np.random.default_rng(21)
    pts = rng.normal(size=(50, 2))
    res = classical_mds(_pairwise(pts), k=2)
    np.testing.assert_allclose(_pairwise(res.coordinates), _pairwise(pts), atol=1e-8)
    assert res.n_negative == 0
    assert res.k == 2
    assert res.stress < 1e-10


def test_embedding_centred_and_axis_ordered():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(30, 3)) * np.array([5.0, 1.0, 0.2])
    res = classical_mds(_pairwise(pts), k=3)
    np.testing.assert_allclose(res.coordinates.mean(axis=0), 0.0, atol=1e-9)
    assert np.all(np.diff(res.eigenvalues[:3]) <= 1e-9)
    # axis variance follows the eigenvalue order
    v = res.coordinates.var(axis=0)
    assert v[0] > v[1] > v[2]


def test_rotation_leaves_eigenvalues_alone():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(20, 2))
    angle = 1.1
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    a = classical_mds(_pairwise(pts), k=2)
    b = classical_mds(_pairwise(pts @ R.T), k=2)
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-8)
    np.testing.assert_allclose(
        _pairwise(a.coordinates), _pairwise(b.coordinates), atol=1e-8
    )


def test_non_euclidean_input_reports_negative_eigenvalues():
    # the unit-weight star metric on 4 points violates Euclidean embedding
    D = np.full((4, 4), 2.0)
    np.fill_diagonal(D, 0.0)
    D[0, 1:] = D[1:, 0] = 1.0
    res = classical_mds(D, k=3)
    assert res.n_negative > 0
    # axes past the positive spectrum stay identically zero
    neg = res.eigenvalues[:3] <= 0
    assert np.all(res.coordinates[:, neg] == 0.0)
    assert res.stress > 0


def test_mds_validation():
    good = _pairwise([0.0, 1.0, 3.0])
    with pytest.raises(NumericError):
        classical_mds(good[:2])  # not square
    with pytest.raises(NumericError):
        classical_mds(np.eye(3) * 0 + np.triu(np.ones((3, 3)), 1))  # asymmetric
    bad_diag = good.copy()
    bad_diag[1, 1] = 0.5
    with pytest.raises(NumericError):
        classical_mds(bad_diag)
    with_nan = good.copy()
    with_nan[0, 2] = with_nan[2, 0] = np.nan
    with pytest.raises(NumericError):
        classical_mds(with_nan)
    with pytest.raises(NumericError):
        classical_mds(good, k=0)
    with pytest.raises(NumericError):
        classical_mds(good, k=4)
    with pytest.raises(NumericError):
        classical_mds(np.zeros((1, 1)))


def test_symmetry_tolerance_scales_with_magnitude():
    # a relative wobble far below the matrix scale must not trip the check
    D = 1e6 * _pairwise(np.random.default_rng(0).normal(size=(10, 2)))
    D[2, 5] += 1e-4
    D[5, 2] -= 1e-4
    res = classical_mds(D, k=2)
    assert res.k == 2


def test_silverman_bandwidth_known_value():
    pts = np.array([0.0, 1.0, 2.0, 3.0])
    sigma = pts.std(ddof=1)
    expected = sigma * (4.0 / (3.0 * 4)) ** 0.2
    assert silverman_bandwidth(pts) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(NumericError):
        silverman_bandwidth(np.array([1.0]))
    with pytest.raises(NumericError):
        silverman_bandwidth(np.array([2.0, 2.0, 2.0]))


def test_kernel_smooth_frozen_value():
    pts = np.array([-1.0, 0.0, 1.0])
    vals = np.array([0.0, 1.0, 0.0])
    got = kernel_smooth(pts, vals, np.array([0.0]), bandwidth=1.0)
    assert got[0] == pytest.approx(NW_AT_ZERO, rel=1e-12)


def test_kernel_smooth_interpolates_at_data():
    # with a tiny bandwidth the estimate collapses onto the nearest value
    pts = np.array([0.0, 1.0, 2.0])
    vals = np.array([5.0, -2.0, 7.0])
    got = kernel_smooth(pts, vals, pts, bandwidth=0.01)
    np.testing.assert_allclose(got, vals, atol=1e-9)


@given(st.floats(-3.0, 3.0), st.floats(0.1, 5.0))
def test_kernel_smooth_is_convex_combination(q, bw):
    pts = np.array([-2.0, -0.5, 0.0, 1.0, 2.5])
    vals = np.array([1.0, 4.0, -3.0, 2.0, 0.0])
    got = kernel_smooth(pts, vals, np.array([q]), bandwidth=bw)
    assert vals.min() - 1e-12 <= got[0] <= vals.max() + 1e-12


def test_kernel_smooth_far_query_is_nan():
    pts = np.array([0.0, 1.0])
    vals = np.array([1.0, 2.0])
    got = kernel_smooth(pts, vals, np.array([0.5, 1e6]), bandwidth=1.0)
    assert np.isfinite(got[0])
    assert np.isnan(got[1])


def test_kernel_smooth_default_bandwidth_and_2d():
    rng = np.random.default_rng(14)
    pts = rng.normal(size=(40, 2))
    vals = pts[:, 0] + 0.1 * rng.normal(size=40)
    got = kernel_smooth(pts, vals, pts[:5])
    assert got.shape == (5,)
    assert np.all(np.isfinite(got))


def test_conditional_profile_constant_values():
    pts = np.linspace(0, 1, 20)
    vals = np.full(20, 3.5)
    mean, sd = conditional_profile(pts, vals, np.array([0.2, 0.8]), bandwidth=0.3)
    np.testing.assert_allclose(mean, 3.5, atol=1e-12)
    np.testing.assert_allclose(sd, 0.0, atol=1e-7)


def test_conditional_profile_tracks_spread():
    rng = np.random.default_rng(30)
    pts = rng.uniform(-1, 1, 500)
    vals = rng.normal(scale=np.where(pts > 0, 2.0, 0.5))
    mean, sd = conditional_profile(pts, vals, np.array([-0.5, 0.5]), bandwidth=0.2)
    assert sd[1] > 2 * sd[0]
    assert abs(mean[0]) < 0.5 and abs(mean[1]) < 0.5


def test_embedding_grid_geometry():
    coords = np.array([[0.0, 0.0], [2.0, 4.0]])
    gx, gy, queries = embedding_grid(coords, size=5, pad=0.25)
    assert gx.shape == (5,) and gy.shape == (5,)
    assert queries.shape == (25, 2)
    assert gx[0] == pytest.approx(-0.5) and gx[-1] == pytest.approx(2.5)
    assert gy[0] == pytest.approx(-1.0) and gy[-1] == pytest.approx(5.0)
    with pytest.raises(NumericError):
        embedding_grid(coords[:, :1])
    with pytest.raises(NumericError):
        embedding_grid(coords, size=1)
