import numpy as np
import pytest

from blindsr.degradation import as_rng, dirac, gaussian_isotropic, sample_training_kernel
from blindsr.kernel_space import (
    PcaBasis,
    fit_pca,
    load_basis,
    project,
    reconstruct,
    save_basis,
)


def sample_kernels(n, seed=0, scale=4):
    gen = as_rng(seed)
    return [sample_training_kernel(1, scale, gen) for _ in range(n)]


class TestFitPca:
    def test_identical_samples(self):
        k = gaussian_isotropic(11, 1.5)
        basis = fit_pca([k] * 8, m=3)
        np.testing.assert_allclose(basis.mean, k.ravel())
        np.testing.assert_allclose(project(basis, k), 0.0, atol=1e-12)

    def test_two_dim_affine_subspace_exact(self):
        # convex combinations of three generators span a 2-D affine subspace
        gen = as_rng(1)
        anchors = [gaussian_isotropic(11, w) for w in (0.5, 1.5, 3.0)]
        samples = []
        for _ in range(30):
            a, b = gen.uniform(0, 0.5, size=2)
            samples.append(a * anchors[0] + b * anchors[1] + (1 - a - b) * anchors[2])
        basis = fit_pca(samples, m=2)
        for k in samples[:10]:
            np.testing.assert_allclose(reconstruct(basis, project(basis, k)), k, atol=1e-10)

    def test_explained_variance_isotropic_family(self):
        kernels = sample_kernels(300, seed=2)
        mat = np.stack([k.ravel() for k in kernels])
        centered = mat - mat.mean(axis=0)
        spectrum = np.linalg.svd(centered, compute_uv=False) ** 2  # full-spectrum oracle
        basis = fit_pca(kernels, m=10)
        coeffs = (centered @ basis.components.T)
        explained = coeffs.var(axis=0).sum() / (spectrum.sum() / len(kernels))
        assert explained > 0.999

    def test_orthonormal_rows(self):
        basis = fit_pca(sample_kernels(100, seed=3), m=10)
        np.testing.assert_allclose(
            basis.components @ basis.components.T, np.eye(10), atol=1e-10
        )

    def test_sign_convention_deterministic(self):
        kernels = sample_kernels(60, seed=4)
        b1, b2 = fit_pca(kernels, m=5), fit_pca(kernels, m=5)
        np.testing.assert_array_equal(b1.components, b2.components)
        for row in b1.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="at least"):
            fit_pca(sample_kernels(5), m=10)

    def test_mixed_sides(self):
        with pytest.raises(ValueError, match="mixed"):
            fit_pca([gaussian_isotropic(11, 1.0), gaussian_isotropic(21, 1.0)], m=1)


class TestProjectReconstruct:
    def test_mean_kernel_projects_to_zero(self):
        kernels = sample_kernels(50, seed=5)
        basis = fit_pca(kernels, m=8)
        mean_kernel = basis.mean.reshape(11, 11) if basis.side == 11 else basis.mean.reshape(21, 21)
        np.testing.assert_allclose(project(basis, mean_kernel / mean_kernel.sum()), 0.0, atol=1e-10)

    def test_orthonormal_contraction(self):
        basis = fit_pca(sample_kernels(50, seed=6), m=8)
        k = gaussian_isotropic(21, 2.2)
        coeffs = project(basis, k)
        assert np.linalg.norm(coeffs) <= np.linalg.norm(k.ravel() - basis.mean) + 1e-12

    def test_complete_basis_roundtrip_exact(self):
        kernels = sample_kernels(30, seed=7, scale=2)
        small = [k[8:13, 8:13] / k[8:13, 8:13].sum() for k in kernels]  # side 5, m=25 feasible
        basis = fit_pca(small, m=25)
        for k in small[:5]:
            np.testing.assert_allclose(reconstruct(basis, project(basis, k)), k, atol=1e-10)

    def test_zero_coeffs_give_mean(self):
        basis = fit_pca(sample_kernels(50, seed=8), m=6)
        out = reconstruct(basis, np.zeros(6))
        expected = np.clip(basis.mean.reshape(21, 21), 0, None)
        np.testing.assert_allclose(out, expected / expected.sum(), atol=1e-12)

    def test_reconstruct_satisfies_invariants(self):
        basis = fit_pca(sample_kernels(200, seed=9), m=10)
        gen = as_rng(10)
        for _ in range(20):
            k = reconstruct(basis, gen.normal(0, 0.3, size=10))
            assert np.all(k >= 0)
            assert abs(k.sum() - 1.0) < 1e-12

    def test_dirac_roundtrip_large_m(self):
        kernels = sample_kernels(400, seed=11, scale=4) + [dirac(21)] * 5
        basis = fit_pca(kernels, m=60)
        k = kernels[3]
        np.testing.assert_allclose(reconstruct(basis, project(basis, k)), k, atol=1e-6)

    def test_side_mismatch(self):
        basis = fit_pca(sample_kernels(30, seed=12), m=4)
        with pytest.raises(ValueError, match="side"):
            project(basis, gaussian_isotropic(11, 1.0))

    def test_coeff_length_mismatch(self):
        basis = fit_pca(sample_kernels(30, seed=13), m=4)
        with pytest.raises(ValueError):
            reconstruct(basis, np.zeros(7))


class TestBasisFile:
    def test_roundtrip(self, tmp_path):
        basis = fit_pca(sample_kernels(80, seed=14), m=7)
        path = str(tmp_path / "b.pcab")
        save_basis(basis, path)
        loaded = load_basis(path)
        assert loaded.side == basis.side and loaded.m == basis.m
        np.testing.assert_array_equal(loaded.mean, basis.mean)
        np.testing.assert_array_equal(loaded.components, basis.components)

    def test_magic_check(self, tmp_path):
        path = tmp_path / "bad.pcab"
        path.write_bytes(b"XXXX" + b"\0" * 20)
        with pytest.raises(IOError, match="magic"):
            load_basis(str(path))

    def test_truncated_file(self, tmp_path):
        basis = fit_pca(sample_kernels(30, seed=15), m=4)
        path = tmp_path / "t.pcab"
        save_basis(basis, str(path))
        path.write_bytes(path.read_bytes()[:100])
        with pytest.raises(IOError, match="truncated"):
            load_basis(str(path))


def test_pca_basis_validates_orthonormality():
    with pytest.raises(ValueError, match="orthonormal"):
        PcaBasis(side=3, m=2, mean=np.zeros(9), components=np.ones((2, 9)))
