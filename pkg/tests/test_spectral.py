import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from augen import AugmentedGrid, UlamTime, assemble_ulam, companion_scan, eigs
from augen.fields import VectorField
from augen.spectral import modulate


def random_generator_matrix(n, density, seed):
    """Random Metzler matrix with zero column sums (a generator)."""
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=density, random_state=rng,
                  data_rvs=lambda k: rng.random(k)).tolil()
    A.setdiag(0.0)
    A = A.tocsr()
    A = A - sp.diags(np.asarray(A.sum(axis=0)).ravel())
    return A.tocsr()


def match_to_reference(found, reference):
    """Hungarian pairing of found eigenvalues to the closest reference subset."""
    cost = np.abs(found[:, None] - reference[None, :])
    rows, cols = linear_sum_assignment(cost)
    return cost[rows, cols].max()


def test_diagonal_example():
    A = sp.diags([0.0, -1.0, -2.0]).tocsr()
    rep = eigs(A, 2, mode="smallest-magnitude")
    vals = sorted(rep.eigenvalues.real, reverse=True)
    np.testing.assert_allclose(vals, [0.0, -1.0], atol=1e-9)


@pytest.mark.parametrize("n,seed", [(60, 0), (200, 1), (400, 2)])
def test_matches_dense_eigensolver_smallest_magnitude(n, seed):
    A = random_generator_matrix(n, 8.0 / n, seed)
    dense = np.linalg.eigvals(A.toarray())
    rep = eigs(A, 6, mode="smallest-magnitude", seed=seed)
    ref = dense[np.argsort(np.abs(dense))][:6]
    assert match_to_reference(rep.eigenvalues, ref) <= 1e-8
    for p in rep.pairs:
        assert p.residual <= 1e-8 * max(1.0, rep.norm_estimate)


def test_matches_dense_eigensolver_largest_real(seed=3):
    n = 150
    A = random_generator_matrix(n, 8.0 / n, seed)
    dense = np.linalg.eigvals(A.toarray())
    rep = eigs(A, 5, mode="largest-real-part", sigma_max=-1.0, seed=seed)
    ref = dense[np.argsort(-dense.real)][:5]
    assert match_to_reference(rep.eigenvalues[:5], ref) <= 1e-8


def test_explicit_complex_shift():
    rng = np.random.default_rng(5)
    blocks = []
    for w in (3.0, 5.0, 7.0):
        blocks.append(np.array([[-0.1, w], [-w, -0.1]]))
    A = sp.block_diag(blocks, format="csr")
    rep = eigs(A, 2, sigma=-0.1 + 5.1j)
    assert abs(rep.eigenvalues[0] - (-0.1 + 5.0j)) <= 1e-9


def test_conjugate_pairs_returned():
    A = sp.csr_matrix(np.array([[0.0, 2.0], [-2.0, 0.0]]))
    rep = eigs(A, 2, mode="smallest-magnitude")
    vals = np.sort_complex(rep.eigenvalues)
    np.testing.assert_allclose(vals, [-2j, 2j], atol=1e-10)
    # vectors of the pair are conjugates up to phase normalization
    v0, v1 = rep.pairs[0].vector, rep.pairs[1].vector
    corr = abs(np.vdot(np.conj(v0), v1))
    assert corr == pytest.approx(1.0, abs=1e-10)


def test_kernel_found_and_deflated(dg_field):
    grid = AugmentedGrid.for_field(dg_field, (10, 5), UlamTime(5))
    aug = assemble_ulam(grid, dg_field, 0.1)
    rep = eigs(aug, 4, mode="smallest-magnitude")
    assert "kernel" in rep.pairs[0].flags
    assert abs(rep.pairs[0].eigenvalue) <= 1e-12
    v = rep.pairs[0].vector
    assert np.abs(v - v.mean()).max() <= 1e-12  # constant vector
    # remaining eigenvalues are genuinely nonzero
    assert all(abs(p.eigenvalue) > 1e-6 for p in rep.pairs[1:])


def test_residual_invariant_all_modes():
    A = random_generator_matrix(120, 0.08, 11)
    for mode in ("smallest-magnitude", "largest-real-part"):
        rep = eigs(A, 4, mode=mode, seed=1)
        for p in rep.pairs:
            assert p.residual <= 1e-8 * max(1.0, rep.norm_estimate)


def test_partial_report_on_nonconvergence():
    A = random_generator_matrix(300, 0.05, 21)
    rep = eigs(A, 8, mode="smallest-magnitude", max_iter=1, ncv=12, seed=4)
    assert len(rep.warnings) >= 0  # never raises; flags carry the outcome
    assert all(isinstance(p.converged, bool) for p in rep.pairs)


def test_companion_scan_time_constant_kernel(dg_field):
    # the kernel is constant in time, so its modulated companion is an exact
    # eigenvector at -lambda_k with unit correlation
    grid = AugmentedGrid.for_field(dg_field, (10, 5), UlamTime(6))
    aug = assemble_ulam(grid, dg_field, 0.1)
    rep = eigs(aug, 2, mode="smallest-magnitude")
    h, tau = grid.slice_width, grid.period
    om = np.exp(2j * np.pi * h / tau)
    lam1 = (1.0 - om**-1) / h
    band = eigs(aug, 2, sigma=-lam1 + 1e-3)
    rep.pairs.extend(band.pairs)
    comp = companion_scan(rep, aug, 0)
    hits = {i for (i, k) in comp}
    target = rep.nearest(-lam1)
    assert target in hits
    assert comp[(target, +1)]["corr"] >= 0.999999
    np.testing.assert_allclose(
        rep.pairs[target].eigenvalue, -lam1, atol=1e-8)


def test_modulate_roundtrip(dg_field):
    grid = AugmentedGrid.for_field(dg_field, (4, 2), UlamTime(5))
    rng = np.random.default_rng(0)
    v = rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)
    w = modulate(modulate(v, grid, +1), grid, -1)
    np.testing.assert_allclose(w, v, atol=1e-14)


def test_band_edge_flagging():
    fld = VectorField(lambda t, p: 0.3 * np.ones_like(p), [[0, 1]], 2 * np.pi,
                      periodic=[True])
    grid = AugmentedGrid.for_field(fld, (16,), UlamTime(8))
    aug = assemble_ulam(grid, fld, 0.05)
    limit = np.pi * 8 / (2 * np.pi)
    rep = eigs(aug, 3, sigma=-0.5 + (limit + 1.0) * 1j)
    flagged = [p for p in rep.pairs if abs(p.eigenvalue.imag) > limit]
    assert all("band_edge" in p.flags for p in flagged)
    assert flagged, "shift was chosen so that beyond-band eigenvalues exist"


def test_rejects_bad_k():
    with pytest.raises(ValueError):
        eigs(sp.identity(4, format="csr"), 0)
