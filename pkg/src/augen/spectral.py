"""Sparse eigenpair computation for generator matrices.

A Krylov-Schur (implicitly restarted Arnoldi) iteration in complex
arithmetic, driven either directly by the matrix or through a sparse-LU
shift-invert transform.  No external eigensolver is used; the restart logic
relies only on dense Schur decompositions of the small projected matrix.

Eigenvalues of the augmented generator come in companion bands shifted by
multiples of ``2 pi i / tau``; :func:`companion_scan` links those bands via
eigenvector correlations.
"""

import gc
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .augmented import AugmentedGenerator
from .generator import GeneratorMatrix

__all__ = ["EigenPair", "SpectrumReport", "NonConvergenceWarning", "eigs",
           "companion_scan", "modulate"]


class NonConvergenceWarning(UserWarning):
    pass


@dataclass
class EigenPair:
    """One converged eigenpair, unit-norm with a fixed phase convention.

    The vector is scaled so its largest-modulus entry is real and positive;
    ``residual`` is the 2-norm of ``A v - mu v`` against the original matrix.
    """

    eigenvalue: complex
    vector: np.ndarray
    residual: float
    converged: bool = True
    flags: tuple = ()

    @property
    def mu(self):
        return self.eigenvalue


@dataclass
class SpectrumReport:
    """Ordered eigenpairs plus companion annotations and solver diagnostics."""

    pairs: list
    ordering: str
    norm_estimate: float
    warnings: list = dc_field(default_factory=list)
    companions: dict = dc_field(default_factory=dict)
    correlations: dict = dc_field(default_factory=dict)

    @property
    def eigenvalues(self):
        return np.array([p.eigenvalue for p in self.pairs])

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def nearest(self, target, tol=None):
        """Index of the eigenvalue closest to ``target`` (None if empty/too far)."""
        if not self.pairs:
            return None
        d = np.abs(self.eigenvalues - target)
        i = int(np.argmin(d))
        if tol is not None and d[i] > tol:
            return None
        return i


def _as_sparse(op):
    """Normalize supported operator types to a csr matrix."""
    if isinstance(op, AugmentedGenerator):
        return op.to_sparse("csr")
    if isinstance(op, GeneratorMatrix):
        return op.matrix.tocsr()
    if sp.issparse(op):
        return op.tocsr()
    if isinstance(op, np.ndarray):
        return sp.csr_matrix(op)
    mat = getattr(op, "matrix", None)
    if mat is not None and sp.issparse(mat):
        return mat.tocsr()
    raise TypeError(f"unsupported operator type {type(op)!r}")


class _LUSolve:
    """Shift-inverted application ``x -> (A - sigma I)^{-1} x`` via sparse LU.

    A real shift keeps the factorization real; complex right-hand sides are
    then solved in two real solves.
    """

    def __init__(self, A, sigma, permc_spec="MMD_AT_PLUS_A"):
        self.sigma = complex(sigma)
        n = A.shape[0]
        shifted = (A - self.sigma * sp.identity(n, format="csr")).tocsc()
        self.real = not np.iscomplexobj(shifted.data) and self.sigma.imag == 0.0
        if self.real:
            shifted = shifted.astype(np.float64)
        self.lu = spla.splu(shifted, permc_spec=permc_spec)
        # near-singular factorizations succeed but solve garbage; probe once
        rng = np.random.default_rng(12345)
        b = rng.standard_normal(n)
        x = self._solve_real_matrix(b) if self.real else self.lu.solve(b.astype(complex))
        r = shifted @ x - b
        denom = max(np.linalg.norm(b), 1e-300)
        self.probe_residual = float(np.linalg.norm(r) / denom)

    def _solve_real_matrix(self, b):
        return self.lu.solve(np.asarray(b, dtype=np.float64))

    def __call__(self, v):
        if self.real and np.iscomplexobj(v):
            x = self._solve_real_matrix(v.real)
            if np.any(v.imag):
                return x + 1j * self._solve_real_matrix(v.imag)
            return x.astype(complex)
        if self.real:
            return self._solve_real_matrix(v)
        return self.lu.solve(np.asarray(v, dtype=complex))


def _make_shift_invert(A, sigma, singular_perturb=1e-8, known_singular=False):
    """LU-backed shift-invert with one automatic retry off a singular shift.

    ``known_singular`` skips the provably singular factorization (e.g. shift
    exactly on a detected kernel eigenvalue) and perturbs immediately.
    """
    if not known_singular:
        try:
            op = _LUSolve(A, sigma)
            if op.probe_residual < 1e-6:
                return op, sigma
            del op
        except RuntimeError:
            pass
    sigma2 = sigma + singular_perturb
    op = _LUSolve(A, sigma2)
    if op.probe_residual > 1e-6:
        raise RuntimeError(
            f"shift {sigma2} still yields an unusable factorization "
            f"(probe residual {op.probe_residual:.2e})"
        )
    return op, sigma2


def _orthogonalize(w, V, j, deflate=None):
    """Twice-iterated modified Gram-Schmidt of ``w`` against ``V[:, :j]``."""
    h = np.zeros(j, dtype=complex)
    for _ in range(2):
        if deflate is not None and deflate.shape[1]:
            w -= deflate @ (deflate.conj().T @ w)
        if j:
            c = V[:, :j].conj().T @ w
            w -= V[:, :j] @ c
            h += c
    return w, h


def _krylov_schur(apply_op, n, k, ncv, select, tol, max_restarts, deflate=None, seed=0):
    """Krylov-Schur iteration returning ``(theta, X, ritz_resid, n_converged)``.

    ``select(thetas)`` ranks Ritz values (descending preference) and defines
    which ``k`` are wanted.  Residual tolerances are relative to ``|theta|``.
    """
    rng = np.random.default_rng(seed)
    V = np.zeros((n, ncv + 1), dtype=complex)
    H = np.zeros((ncv + 1, ncv), dtype=complex)
    v0 = rng.standard_normal(n) + 0j
    v0, _ = _orthogonalize(v0, V, 0, deflate)
    V[:, 0] = v0 / np.linalg.norm(v0)
    kact = 0
    for _ in range(max_restarts):
        for j in range(kact, ncv):
            w = np.asarray(apply_op(V[:, j]), dtype=complex)
            w, h = _orthogonalize(w, V, j + 1, deflate)
            beta = np.linalg.norm(w)
            H[: j + 1, j] = h
            H[j + 1, j] = beta
            if beta < 1e-14 * max(1.0, abs(H).max()):
                # invariant subspace hit; continue in a fresh random direction
                w = rng.standard_normal(n) + 0j
                w, _ = _orthogonalize(w, V, j + 1, deflate)
                beta = np.linalg.norm(w)
                H[j + 1, j] = 0.0
                if beta < 1e-14:
                    break
            V[:, j + 1] = w / beta
        m = ncv
        Hm = H[:m, :m]
        beta_m = H[m, m - 1]
        theta, Y = np.linalg.eig(Hm)
        order = select(theta)
        resid = np.abs(beta_m) * np.abs(Y[m - 1, order]) / np.maximum(
            np.abs(theta[order]), 1e-300
        )
        wanted = order[:k]
        wanted_resid = resid[:k]
        n_conv = int(np.sum(wanted_resid <= tol))
        if n_conv >= min(k, len(wanted)):
            X = V[:, :m] @ Y[:, wanted]
            return theta[wanted], X, wanted_resid, n_conv
        # thick restart: reorder the Schur form, keep the best block
        keep = min(ncv - 2, max(k + 4, int(1.5 * k)))
        ranks = np.empty(len(order), dtype=int)
        ranks[order] = np.arange(len(order))
        cutoff = keep - 1

        def sort_fn(x):
            # gees hands eigenvalues back one by one; rank them by proximity
            i = int(np.argmin(np.abs(theta - x)))
            return bool(ranks[i] <= cutoff)

        T, Z, sdim = sla.schur(Hm, output="complex", sort=sort_fn)
        sdim = max(int(sdim), 1)
        Vnew = V[:, :m] @ Z[:, :sdim]
        b = beta_m * Z[m - 1, :sdim]
        V[:, :sdim] = Vnew
        V[:, sdim] = V[:, m]
        H[:, :] = 0.0
        H[:sdim, :sdim] = T[:sdim, :sdim]
        H[sdim, :sdim] = b
        kact = sdim
    # out of restarts: return best effort
    m = ncv
    Hm = H[:m, :m]
    beta_m = H[m, m - 1]
    theta, Y = np.linalg.eig(Hm)
    order = select(theta)
    resid = np.abs(beta_m) * np.abs(Y[m - 1, order]) / np.maximum(np.abs(theta[order]), 1e-300)
    wanted = order[:k]
    X = V[:, :m] @ Y[:, wanted]
    return theta[wanted], X, resid[:k], int(np.sum(resid[:k] <= tol))


def _fix_phase(v):
    i = int(np.argmax(np.abs(v)))
    ph = v[i] / abs(v[i]) if v[i] != 0 else 1.0
    return v / ph


def _detect_kernel(A, norm_est):
    """Classify the constant vector against the matrix's kernels.

    Mass-conserving generators always annihilate it from the left (columns
    sum to zero), which makes the matrix singular; divergence-free fields
    annihilate it from the right as well, which additionally allows clean
    projection deflation.
    """
    n = A.shape[0]
    one = np.ones(n)
    scale = max(norm_est, 1e-300)
    right = np.abs(A @ one).max() / scale
    left = np.abs(A.T @ one).max() / scale
    return left < 1e-10, right < 1e-10 and left < 1e-10


def _band_edge_limit(op):
    if isinstance(op, AugmentedGenerator):
        ns, tau = op.grid.n_slices, op.grid.period
        if op.scheme == "ulam":
            return np.pi * ns / tau
        return np.pi * (ns - 1) / tau
    return None


def _collect(A, transform, thetas, X, tol_abs):
    pairs = []
    for theta, x in zip(thetas, X.T):
        mu = transform(theta)
        v = x / np.linalg.norm(x)
        v = _fix_phase(v)
        res = float(np.linalg.norm(A @ v - mu * v))
        pairs.append(EigenPair(complex(mu), v, res, converged=res <= tol_abs))
    return pairs


def _dedupe(pairs, rtol=1e-6):
    out = []
    for p in sorted(pairs, key=lambda p: p.residual):
        if any(abs(p.eigenvalue - q.eigenvalue) <= rtol * (1.0 + abs(p.eigenvalue)) for q in out):
            continue
        out.append(p)
    return out


def _conjugate_closure(pairs, real_matrix, rtol=1e-6):
    if not real_matrix:
        return pairs
    out = list(pairs)
    for p in pairs:
        mu = p.eigenvalue
        if abs(mu.imag) <= rtol * (1.0 + abs(mu)):
            continue
        if any(abs(np.conj(mu) - q.eigenvalue) <= rtol * (1.0 + abs(mu)) for q in out):
            continue
        out.append(EigenPair(np.conj(mu), _fix_phase(np.conj(p.vector)), p.residual,
                             p.converged, p.flags))
    return out


def eigs(op, k, mode="smallest-magnitude", sigma=None, tol=1e-8, max_iter=60,
         ncv=None, k_per_shift=None, sigma_max=-1.0, seed=0):
    """Compute ``k`` eigenpairs of a sparse generator-type matrix.

    Parameters
    ----------
    op : AugmentedGenerator, GeneratorMatrix, TransferMatrix-like, or sparse matrix
    k : int
        Number of eigenpairs requested.
    mode : str
        ``"smallest-magnitude"``: shift-invert at 0 (perturbed off a singular
        shift), with the constant kernel vector deflated and prepended when
        the matrix annihilates it from both sides.
        ``"largest-real-part"``: merges shift-invert sweeps at the real
        shifts ``{0, sigma_max/2, sigma_max}`` and ranks by real part.
        ``"largest-magnitude"``: direct iteration (for transfer matrices).
    sigma : complex, optional
        Explicit shift; overrides the mode's shift choice and returns the
        ``k`` eigenvalues nearest ``sigma``.
    tol : float
        Residual tolerance relative to a matrix norm estimate.
    max_iter : int
        Maximum Krylov-Schur restarts per shift.

    Returns
    -------
    SpectrumReport
        Converged-first, ordered per ``mode``; partial results carry a
        warning flag instead of raising.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    A = _as_sparse(op)
    n = A.shape[0]
    norm_est = float(abs(A).sum(axis=0).max()) if A.nnz else 0.0
    tol_abs = tol * max(norm_est, 1.0)
    real_matrix = not np.iscomplexobj(A.data)
    ncv = ncv or min(n, max(3 * k + 10, 20))
    band_limit = _band_edge_limit(op)

    deflate = None
    seed_pairs = []
    singular_at_zero, two_sided = _detect_kernel(A, norm_est)
    if mode in ("smallest-magnitude", "largest-real-part") and sigma is None and two_sided:
        one = np.ones(n) / np.sqrt(n)
        res0 = float(np.linalg.norm(A @ one))
        seed_pairs = [EigenPair(0.0 + 0.0j, one.astype(complex), res0, True, ("kernel",))]
        deflate = one.reshape(-1, 1).astype(complex)

    def run_shift(sig, kk):
        on_kernel = singular_at_zero and abs(sig) < 1e-14
        solve, sig_used = _make_shift_invert(A, sig, known_singular=on_kernel)
        sel = lambda th: np.argsort(-np.abs(th))
        theta, X, _, nc = _krylov_schur(
            solve, n, kk, min(n, max(3 * kk + 10, ncv)), sel, tol, max_iter,
            deflate=deflate, seed=seed,
        )
        del solve
        gc.collect()
        if nc < kk:
            warnings.warn(f"shift {sig_used}: {nc}/{kk} Ritz pairs converged",
                          NonConvergenceWarning, stacklevel=2)
        return _collect(A, lambda th: sig_used + 1.0 / th, theta, X, tol_abs)

    report_warnings = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        if sigma is not None:
            pairs = run_shift(complex(sigma), k)
            ordering = "nearest-shift"
            pairs.sort(key=lambda p: abs(p.eigenvalue - sigma))
        elif mode == "smallest-magnitude":
            kk = max(k - len(seed_pairs), 1)
            pairs = seed_pairs + run_shift(0.0, kk)
            ordering = "smallest-magnitude"
        elif mode == "largest-real-part":
            kk = k_per_shift or max(k + 3, round(1.25 * k))
            pairs = list(seed_pairs)
            for sig in (0.0, sigma_max / 2.0, sigma_max):
                pairs += run_shift(complex(sig), kk)
            ordering = "largest-real-part"
        elif mode == "largest-magnitude":
            sel = lambda th: np.argsort(-np.abs(th))
            theta, X, _, nc = _krylov_schur(
                lambda v: A @ v, n, k, ncv, sel, tol, max_iter, seed=seed
            )
            if nc < k:
                warnings.warn(f"direct mode: {nc}/{k} Ritz pairs converged",
                              NonConvergenceWarning, stacklevel=2)
            pairs = _collect(A, lambda th: th, theta, X, tol_abs)
            ordering = "largest-magnitude"
        else:
            raise ValueError(f"unknown mode {mode!r}")
    report_warnings = [str(w.message) for w in caught]

    pairs = _conjugate_closure(_dedupe(pairs), real_matrix)
    keyfuns = {
        "smallest-magnitude": lambda p: abs(p.eigenvalue),
        "largest-real-part": lambda p: -p.eigenvalue.real,
        "largest-magnitude": lambda p: -abs(p.eigenvalue),
        "nearest-shift": lambda p: abs(p.eigenvalue - (sigma if sigma is not None else 0.0)),
    }
    pairs.sort(key=lambda p: (not p.converged, keyfuns[ordering](p)))
    pairs = pairs[:k]
    if band_limit is not None:
        for p in pairs:
            if abs(p.eigenvalue.imag) > band_limit:
                p.flags = tuple(set(p.flags) | {"band_edge"})
    return SpectrumReport(pairs, ordering, norm_est, report_warnings)


def modulate(vector, grid, freq):
    """Multiply an augmented vector slice-wise by ``exp(2 pi i k t_l / tau)``."""
    ns, n = grid.n_slices, grid.n_boxes
    phases = np.exp(2j * np.pi * freq * grid.slice_times / grid.period)
    return (np.asarray(vector).reshape(ns, n) * phases[:, None]).ravel()


def companion_scan(report, aug, base_index, threshold=0.99):
    """Annotate companions of one eigenpair via modulated-eigenvector correlations.

    For the base eigenvector ``v`` and both phase modulations ``psi_{+-1}``,
    computes ``c_n = <u_n, v psi> / (|u_n| |v psi|)`` against every other
    eigenpair and marks ``|c| >= threshold`` pairs as companions, recording
    the predicted shifted eigenvalue alongside.
    """
    base = report.pairs[base_index]
    if not base.converged:
        raise ValueError("base eigenpair did not converge")
    grid = aug.grid
    lam = base.eigenvalue
    tau = grid.period
    if aug.scheme == "ulam":
        h = grid.slice_width
        om = np.exp(2j * np.pi * h / tau)
        shift = {+1: (1.0 - om**-1) / h, -1: (1.0 - om**+1) / h}
    else:
        shift = {+1: 2j * np.pi / tau, -1: -2j * np.pi / tau}
    out_corr = {}
    out_comp = {}
    for kmod in (+1, -1):
        w = modulate(base.vector, grid, kmod)
        w /= np.linalg.norm(w)
        predicted = lam - shift[kmod]
        for i, p in enumerate(report.pairs):
            if i == base_index:
                continue
            c = np.vdot(p.vector, w) / np.linalg.norm(p.vector)
            out_corr[(i, kmod)] = complex(c)
            if abs(c) >= threshold:
                out_comp[(i, kmod)] = {"of": base_index, "corr": abs(c),
                                       "predicted": complex(predicted)}
    report.correlations.update(out_corr)
    report.companions.update(out_comp)
    return out_comp
