"""Quadratic eigenvalue solver for small dense pencils.

The pencil L(lambda) = I lambda^2 + C lambda + S is linearized to its
4n x 4n companion matrix, the characteristic polynomial is extracted with
the Faddeev-LeVerrier trace recursion, and all roots are found by the
Aberth-Ehrlich simultaneous iteration followed by a Newton polish.  No
external eigensolver is used on the production path; LAPACK enters only
as an independent test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, OverflowRescaleError, ShapeError
from .model import QuadraticPencil
from .tolerances import DEFAULT

# Aberth iteration controls; deterministic by construction.
_MAX_ITER = 400
_POLISH_STEPS = 4
_STEP_TOL = 4.0 * 2.0 ** -52


@dataclass(frozen=True)
class CharPoly:
    """Monic real polynomial det L(lambda), highest degree first."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(x) for x in self.coefficients)
        if len(c) < 2:
            raise ShapeError("polynomial must have degree >= 1")
        if c[0] != 1.0:
            raise ShapeError("characteristic polynomial must be monic")
        if not all(np.isfinite(c)):
            raise OverflowRescaleError(
                "polynomial coefficients overflowed; rescale the pencil "
                "(divide frequencies and gains by a common factor)"
            )
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, lam):
        out = np.zeros_like(np.asarray(lam, dtype=complex))
        for c in self.coefficients:
            out = out * lam + c
        return out


def companion_matrix(pencil: QuadraticPencil) -> np.ndarray:
    """First-order linearization [[0, I], [-S, -C]] of the pencil."""
    m = pencil.size
    A = np.zeros((2 * m, 2 * m))
    A[:m, m:] = np.eye(m)
    A[m:, :m] = -pencil.stiffness_total
    A[m:, m:] = -pencil.damping_total
    return A


def charpoly_of_matrix(A: np.ndarray) -> np.ndarray:
    """Characteristic polynomial of A (batched over leading axes).

    Faddeev-LeVerrier recursion: M_1 = A, c_k = -tr(M_k)/k,
    M_{k+1} = A (M_k + c_k I), run on A scaled to unit magnitude so the
    intermediate products stay conditioned; the coefficients are unscaled
    afterwards.  Returns coefficients of det(lambda I - A), shape
    ``A.shape[:-2] + (d+1,)``, highest degree first.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[-1]
    scale = np.maximum(np.abs(A).max(axis=(-2, -1)), 1.0)
    A = A / scale[..., None, None]
    eye = np.eye(d)
    coeffs = np.empty(A.shape[:-2] + (d + 1,))
    coeffs[..., 0] = 1.0
    Mk = A.copy()
    for k in range(1, d + 1):
        ck = -np.trace(Mk, axis1=-2, axis2=-1) / k
        coeffs[..., k] = ck * scale ** k
        if k < d:
            Mk = A @ (Mk + ck[..., None, None] * eye)
    # the recursion is weakest on the constant term; an LU determinant of
    # the balanced matrix is cheap and much sharper
    sign = 1.0 if d % 2 == 0 else -1.0
    coeffs[..., d] = sign * np.linalg.det(A) * scale ** d
    return coeffs


def char_poly(pencil: QuadraticPencil) -> CharPoly:
    """Characteristic polynomial det L(lambda) of the pencil."""
    return CharPoly(tuple(charpoly_of_matrix(companion_matrix(pencil))))


def _initial_guesses(coeffs: np.ndarray) -> np.ndarray:
    """Deterministic starting points: roots of unity on the Cauchy circle."""
    n, width = coeffs.shape
    d = width - 1
    radius = 1.0 + np.max(np.abs(coeffs[:, 1:]), axis=1)  # monic Cauchy bound
    angles = 2.0 * np.pi * np.arange(d) / d + 0.4  # offset breaks axis symmetry
    return radius[:, None] * np.exp(1j * angles)[None, :]


def _horner_pair(coeffs: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """p(x) and p'(x) for batched coefficients (n, d+1) at points (n, d)."""
    p = np.zeros_like(x)
    dp = np.zeros_like(x)
    for k in range(coeffs.shape[1]):
        dp = dp * x + p
        p = p * x + coeffs[:, k, None]
    return p, dp


def scaled_residuals(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """|p(x)| / (max|a| (1+|x|)^deg), batched."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    roots = np.atleast_2d(np.asarray(roots, dtype=complex))
    d = coeffs.shape[1] - 1
    p, _ = _horner_pair(coeffs, roots)
    scale = np.max(np.abs(coeffs), axis=1)[:, None] * (1.0 + np.abs(roots)) ** d
    return np.abs(p) / scale


def roots_batch(coeffs: np.ndarray, max_iter: int = _MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """All roots of a batch of real polynomials (n, d+1), leading coeff nonzero.

    Returns (roots, scaled_residuals), each (n, d); roots sorted by
    (Re, Im) per row.  Residual acceptance is the caller's concern.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    n, width = coeffs.shape
    d = width - 1
    if d < 1:
        raise ShapeError("polynomial must have degree >= 1")
    lead = coeffs[:, :1]
    if np.any(lead == 0.0):
        raise ShapeError("leading coefficient must be nonzero")
    if not np.all(np.isfinite(coeffs)):
        raise OverflowRescaleError(
            "polynomial coefficients overflowed; rescale the pencil"
        )
    a = coeffs / lead

    x = _initial_guesses(a)
    if d == 1:
        x = -a[:, 1:2].astype(complex)
    else:
        # simultaneous iteration; converged rows leave the working set
        rows = np.arange(n)
        wx, wa = x, a
        active = np.ones((n, d), dtype=bool)
        for _ in range(max_iter):
            p, dp = _horner_pair(wa, wx)
            # Aberth correction w / (1 - w * sum_j 1/(x_i - x_j))
            dp = np.where(dp == 0.0, np.finfo(float).tiny, dp)
            w = p / dp
            diff = wx[:, :, None] - wx[:, None, :]
            np.einsum("nii->ni", diff)[...] = np.inf  # exclude j == i
            repel = np.sum(1.0 / diff, axis=2)
            denom = 1.0 - w * repel
            denom = np.where(denom == 0.0, np.finfo(float).tiny, denom)
            corr = np.where(active, w / denom, 0.0)
            bad = ~np.isfinite(corr)
            if np.any(bad):
                # collided approximants; nudge deterministically
                corr = np.where(bad, 0.0, corr)
                wx = np.where(bad, wx * (1.0 + 1e-8) + 1e-8, wx)
            wx = wx - corr
            active = np.abs(corr) > _STEP_TOL * (1.0 + np.abs(wx))
            x[rows] = wx
            row_live = active.any(axis=1)
            if not row_live.any():
                break
            if row_live.sum() < 0.5 * len(rows):
                rows = rows[row_live]
                wx = wx[row_live]
                wa = wa[row_live]
                active = active[row_live]
        for _ in range(_POLISH_STEPS):
            p, dp = _horner_pair(a, x)
            step = np.where(dp == 0.0, 0.0, p / np.where(dp == 0.0, 1.0, dp))
            x_new = x - step
            p_new, _ = _horner_pair(a, x_new)
            x = np.where(np.abs(p_new) <= np.abs(p), x_new, x)

    order = np.lexsort((x.imag, x.real), axis=1)
    x = np.take_along_axis(x, order, axis=1)
    return x, scaled_residuals(a, x)


def poly_roots(poly, residual_tol: float = DEFAULT.poly_residual,
               max_iter: int = _MAX_ITER) -> np.ndarray:
    """All roots of one polynomial, raising on non-convergence.

    Multiple roots come back as tight clusters of simple roots; clustering
    them is the caller's concern (see :func:`cluster_eigenvalues`).
    """
    coeffs = poly.coefficients if isinstance(poly, CharPoly) else poly
    roots, resid = roots_batch(np.asarray(coeffs, dtype=float)[None, :], max_iter)
    if np.any(resid > residual_tol):
        worst = float(np.max(resid))
        raise ConvergenceError(
            f"root residual {worst:.3e} above {residual_tol:.1e} after "
            f"{max_iter} iterations",
            best=roots[0], residuals=resid[0],
        )
    return roots[0]


def cluster_eigenvalues(values, rtol: float = DEFAULT.cluster_rtol):
    """Group eigenvalues closer than rtol*(1+|lambda|) into multiplicity tags.

    Returns a list of (center, multiplicity, indices) sorted like the input.
    """
    values = np.asarray(values, dtype=complex)
    m = len(values)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            tol = rtol * (1.0 + max(abs(values[i]), abs(values[j])))
            if abs(values[i] - values[j]) < tol:
                parent[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    out = []
    for idx in sorted(groups.values(), key=lambda g: g[0]):
        center = complex(np.mean(values[idx]))
        out.append((center, len(idx), tuple(idx)))
    return out


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Exact spectrum of one pencil with per-pair residuals.

    ``eigenvectors`` rows are unit vectors; a row of NaN marks a vector
    that could not be recovered (its residual is set to inf, never faked).
    """

    eigenvalues: np.ndarray        # (4n,) complex
    eigenvectors: np.ndarray       # (4n, 2n) complex, NaN rows if unavailable
    residuals: np.ndarray          # (4n,) float, ||L(lam) u||
    poly_residuals: np.ndarray     # (4n,) float, scaled |p(lam)|
    residual_ok: np.ndarray        # (4n,) bool

    def clusters(self, rtol: float = DEFAULT.cluster_rtol):
        return cluster_eigenvalues(self.eigenvalues, rtol)


def solve_qep(pencil: QuadraticPencil, want_vectors: bool = True,
              residual_tol: float = DEFAULT.poly_residual,
              qep_residual_rtol: float = DEFAULT.qep_residual_rtol) -> Spectrum:
    """Solve det L(lambda) = 0 with eigenvectors and residuals.

    Eigenvalues are the polished roots of the characteristic polynomial;
    each eigenvector is the right singular direction of L(lambda) with the
    smallest singular value.  An eigenpair whose residual exceeds
    ``qep_residual_rtol * (1+|lambda|^2) * ||S||`` is flagged, not dropped.
    """
    cp = char_poly(pencil)
    coeffs = np.asarray(cp.coefficients)
    roots, poly_resid = roots_batch(coeffs[None, :])
    roots, poly_resid = roots[0], poly_resid[0]
    if np.any(poly_resid > residual_tol):
        worst = float(np.max(poly_resid))
        raise ConvergenceError(
            f"characteristic root residual {worst:.3e} above {residual_tol:.1e}",
            best=roots, residuals=poly_resid,
        )

    m = pencil.size
    nvals = len(roots)
    vectors = np.full((nvals, m), np.nan, dtype=complex)
    residuals = np.full(nvals, np.inf)
    s_scale = np.linalg.norm(pencil.stiffness_total)
    if want_vectors:
        for i, lam in enumerate(roots):
            L = pencil(lam)
            try:
                _, _, vh = np.linalg.svd(L)
            except np.linalg.LinAlgError:
                continue
            u = vh[-1].conj()
            vectors[i] = u
            residuals[i] = np.linalg.norm(L @ u)
    ok = residuals <= qep_residual_rtol * (1.0 + np.abs(roots) ** 2) * max(s_scale, 1e-300)
    return Spectrum(eigenvalues=roots, eigenvectors=vectors,
                    residuals=residuals, poly_residuals=poly_resid,
                    residual_ok=ok)


def max_growth_rate(spectrum: Spectrum) -> float:
    """Largest real part over the spectrum."""
    return float(np.max(spectrum.eigenvalues.real))
