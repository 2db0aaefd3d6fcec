"""Matrix type, spectral maps, and the four distances.

Oracles here avoid the library's own eigendecompositions: test matrices are
constructed from known spectra and eigenbases, so expected values follow
from the construction.
"""

import numpy as np
import pytest

from conftest import random_orthogonal, random_spd, spd_from_spectrum
from spdcast import (
    DecompositionError,
    NotPositiveDefiniteError,
    SpdMatrix,
    dist_euclidean,
    dist_frobenius,
    dist_log_euclidean,
    dist_procrustes,
    expm,
    logm,
    procrustes_rotation,
    project_to_spd,
    sqrtm_psd,
    vech,
)


class TestSpdMatrix:
    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            SpdMatrix(np.ones((2, 3)))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SpdMatrix(np.zeros((0, 0)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            SpdMatrix([[1.0, 0.0], [0.0, np.inf]])

    def test_rejects_negative_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            SpdMatrix([[1.0, 0.0], [0.0, -1.0]])

    def test_symmetrizes_input(self):
        m = SpdMatrix([[2.0, 0.4], [0.0, 1.0]])
        assert np.array_equal(m.data, m.data.T)
        assert m.data[0, 1] == 0.2

    def test_eigenvalues_descending_and_reconstruct(self, rng):
        values = np.array([5.0, 2.5, 1.0, 0.2])
        m = spd_from_spectrum(rng, rng.permutation(values))
        assert np.allclose(m.eig.values, values, atol=1e-12)
        u, lam = m.eig.vectors, m.eig.values
        assert np.allclose(u @ np.diag(lam) @ u.T, m.data, atol=1e-12)

    def test_data_read_only(self, rng):
        m = random_spd(rng, 3)
        with pytest.raises(ValueError):
            m.data[0, 0] = 9.0

    def test_dim(self, rng):
        assert random_spd(rng, 4).dim == 4


class TestSpectralMaps:
    def test_logm_matches_construction(self, rng):
        # built as Q diag(v) Q^T, so logm must be Q diag(log v) Q^T
        values = np.array([3.0, 1.2, 0.4])
        q = random_orthogonal(rng, 3)
        m = SpdMatrix(q @ np.diag(values) @ q.T)
        expected = q @ np.diag(np.log(values)) @ q.T
        assert np.allclose(logm(m), expected, atol=1e-12)

    def test_expm_matches_construction(self, rng):
        values = np.array([1.0, -0.5, 0.25])
        q = random_orthogonal(rng, 3)
        sym = q @ np.diag(values) @ q.T
        expected = q @ np.diag(np.exp(values)) @ q.T
        assert np.allclose(expm(sym).data, expected, atol=1e-12)

    def test_expm_logm_identity(self, rng):
        for _ in range(25):
            m = random_spd(rng, rng.integers(2, 8), lo=0.05, hi=20.0)
            back = expm(logm(m))
            assert np.linalg.norm(back.data - m.data) <= 1e-8 * max(
                1.0, np.linalg.norm(m.data)
            )

    def test_sqrtm_psd_squares_back(self, rng):
        m = random_spd(rng, 5)
        root = sqrtm_psd(m)
        assert np.allclose(root @ root, m.data, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(root) >= 0.0)

    def test_logm_rejects_singular(self):
        m = SpdMatrix(np.diag([1.0, 0.0]))  # PSD is accepted, log is not
        with pytest.raises(NotPositiveDefiniteError):
            logm(m)


class TestVech:
    def test_row_major_lower_triangle(self):
        m = SpdMatrix(np.array([[4.0, 1.0, 0.5], [1.0, 5.0, 2.0], [0.5, 2.0, 6.0]]))
        assert np.array_equal(vech(m), [4.0, 1.0, 5.0, 0.5, 2.0, 6.0])

    def test_length(self, rng):
        assert len(vech(random_spd(rng, 6))) == 21


class TestDistances:
    def test_frobenius_is_squared_norm(self, rng):
        a, b = random_spd(rng, 4), random_spd(rng, 4)
        expected = float(np.sum((a.data - b.data) ** 2))
        assert np.isclose(dist_frobenius(a, b), expected, rtol=1e-14)

    def test_euclidean_counts_off_diagonals_once(self):
        a = SpdMatrix([[1.0, 0.0], [0.0, 1.0]])
        b = SpdMatrix([[1.0, 0.3], [0.3, 1.0]])
        # vech difference is (0, 0.3, 0), so the distance is exactly 0.3
        assert np.isclose(dist_euclidean(a, b), 0.3, rtol=1e-15)

    def test_euclidean_from_explicit_loop(self, rng):
        a, b = random_spd(rng, 5), random_spd(rng, 5)
        total = 0.0
        for i in range(5):
            for j in range(i + 1):
                total += (a.data[i, j] - b.data[i, j]) ** 2
        assert np.isclose(dist_euclidean(a, b), np.sqrt(total), rtol=1e-13)

    def test_log_euclidean_commuting_case(self):
        a = SpdMatrix(np.diag([1.0, 4.0, 9.0]))
        b = SpdMatrix(np.diag([2.0, 4.0, 3.0]))
        expected = np.sqrt(np.log(2.0) ** 2 + np.log(3.0) ** 2)
        assert np.isclose(dist_log_euclidean(a, b), expected, rtol=1e-12)

    def test_log_euclidean_zero_on_equal(self, rng):
        m = random_spd(rng, 4)
        assert dist_log_euclidean(m, m) <= 1e-12

    def test_procrustes_nuclear_norm_identity(self, rng):
        # min_R ||L1 - L2 R||_F^2 = ||L1||^2 + ||L2||^2 - 2 sum sv(L2^T L1)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            a, b = random_spd(rng, n), random_spd(rng, n)
            l1, l2 = sqrtm_psd(a), sqrtm_psd(b)
            gap = (
                np.sum(l1 * l1)
                + np.sum(l2 * l2)
                - 2.0 * np.sum(np.linalg.svd(l2.T @ l1, compute_uv=False))
            )
            expected = np.sqrt(max(gap, 0.0))
            assert np.isclose(dist_procrustes(a, b), expected, atol=1e-10)

    def test_procrustes_two_dim_grid(self, rng):
        # brute force over rotations and reflections of the plane
        angles = np.linspace(0.0, 2.0 * np.pi, 7200, endpoint=False)
        for _ in range(5):
            a, b = random_spd(rng, 2), random_spd(rng, 2)
            l1, l2 = sqrtm_psd(a), sqrtm_psd(b)
            best = np.inf
            for theta in angles:
                c, s = np.cos(theta), np.sin(theta)
                for rot in (
                    np.array([[c, -s], [s, c]]),
                    np.array([[c, s], [s, -c]]),
                ):
                    best = min(best, np.linalg.norm(l1 - l2 @ rot))
            assert abs(dist_procrustes(a, b) - best) <= 1e-3

    def test_procrustes_symmetry(self, rng):
        a, b = random_spd(rng, 3), random_spd(rng, 3)
        assert np.isclose(dist_procrustes(a, b), dist_procrustes(b, a), atol=1e-10)

    def test_dimension_mismatch_raises(self, rng):
        with pytest.raises(Exception):
            dist_frobenius(random_spd(rng, 2), random_spd(rng, 3))


class TestProcrustesRotation:
    def test_returns_orthogonal(self, rng):
        a, b = random_spd(rng, 4), random_spd(rng, 4)
        r = procrustes_rotation(sqrtm_psd(a), sqrtm_psd(b))
        assert np.allclose(r.T @ r, np.eye(4), atol=1e-12)

    def test_achieves_the_minimum(self, rng):
        a, b = random_spd(rng, 3), random_spd(rng, 3)
        l1, l2 = sqrtm_psd(a), sqrtm_psd(b)
        r = procrustes_rotation(l1, l2)
        achieved = np.linalg.norm(l1 - l2 @ r)
        for _ in range(200):
            other = random_orthogonal(rng, 3)
            assert achieved <= np.linalg.norm(l1 - l2 @ other) + 1e-12


class TestProjectToSpd:
    def test_clips_eigenvalues_at_floor(self, rng):
        q = random_orthogonal(rng, 3)
        sym = q @ np.diag([2.0, 1e-14, -0.5]) @ q.T
        floor = 1e-6
        fixed = project_to_spd(sym, floor)
        expected = q @ np.diag([2.0, floor, floor]) @ q.T
        assert np.allclose(fixed.data, expected, atol=1e-10)
        assert fixed.eig.values[-1] >= floor * (1.0 - 1e-12)

    def test_noop_above_floor(self, rng):
        m = random_spd(rng, 4, lo=1.0, hi=2.0)
        fixed = project_to_spd(m, 1e-8)
        assert np.allclose(fixed.data, m.data, atol=1e-14)

    def test_accepts_plain_arrays(self):
        fixed = project_to_spd(np.diag([1.0, -2.0]), 0.5)
        assert np.allclose(fixed.data, np.diag([1.0, 0.5]))
