"""Rotating-frame periodic system, monodromy matrix and Floquet duality.

In the co-rotating frame the perturbed rotor becomes a potential system
with time-periodic coefficients of frequency 2 Omega.  Its monodromy
matrix over one period T = pi / Omega carries the same stability content
as the autonomous pencil: each autonomous eigenvalue lambda maps onto the
multiplier -exp(lambda T), the sign coming from the half-turn rotation
exp(pi G) = -I of a single doublet.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfinitePeriodError, ResolutionError
from .model import J2, RotorModel, PerturbationSet, build_pencil
from .qep import charpoly_of_matrix, roots_batch, solve_qep
from .tolerances import DEFAULT


@dataclass(frozen=True, eq=False)
class PeriodicSystem:
    """Rotor plus perturbations viewed from the rotating frame (n = 1)."""

    base: RotorModel
    pert: PerturbationSet

    def __post_init__(self):
        if self.base.n != 1:
            raise NotImplementedError(
                "the rotating-frame coefficient formulas cover 2 degrees of "
                f"freedom only; model has {self.base.n} doublets"
            )
        if self.pert.Omega == 0.0:
            raise InfinitePeriodError(
                "Omega = 0 gives an infinite period; use the autonomous "
                "solver (qep.solve_qep) instead"
            )

    @property
    def period(self) -> float:
        return math.pi / abs(self.pert.Omega)


@dataclass(frozen=True, eq=False)
class FloquetResult:
    monodromy: np.ndarray                 # (4, 4) real
    multipliers: np.ndarray               # (4,) complex
    predicted_multipliers: np.ndarray     # (4,) complex, -exp(lambda T)
    match_error: float
    liouville_error: float                # relative |det M| defect
    steps: int


def _rotated(M: np.ndarray, c: float, s: float) -> np.ndarray:
    """diag(trM, trM)/2 + (M + JMJ)/2 cos + (JM - MJ)/2 sin."""
    tr = M[0, 0] + M[1, 1]
    sym = M + J2 @ M @ J2
    rot = J2 @ M - M @ J2
    return 0.5 * (np.diag([tr, tr]) + sym * c + rot * s)


def periodic_matrices(ps: PeriodicSystem, t: float):
    """Coefficient matrices of the rotating-frame system at time t.

    Returns (Dt, Kt, Nt, coupling) where coupling = -delta Omega Dt G is
    the stiffness correction from differentiating the rotating transform;
    Nt equals N for 2 degrees of freedom.
    """
    Omega = ps.pert.Omega
    c = math.cos(2.0 * Omega * t)
    s = math.sin(2.0 * Omega * t)
    Dt = _rotated(ps.pert.D, c, s)
    Kt = _rotated(ps.pert.K, c, s)
    Nt = ps.pert.N.copy()
    coupling = -ps.pert.delta * Omega * (Dt @ ps.base.G)
    return Dt, Kt, Nt, coupling


def _system_matrix_grid(ps: PeriodicSystem, ts: np.ndarray) -> np.ndarray:
    """First-order form z' = A(t) z stacked over a time grid."""
    Omega, delta = ps.pert.Omega, ps.pert.delta
    c = np.cos(2.0 * Omega * ts)
    s = np.sin(2.0 * Omega * ts)

    def rotated(M):
        tr = M[0, 0] + M[1, 1]
        sym = M + J2 @ M @ J2
        rot = J2 @ M - M @ J2
        return 0.5 * (np.diag([tr, tr]) + c[:, None, None] * sym
                      + s[:, None, None] * rot)

    Dt = rotated(ps.pert.D)
    Kt = rotated(ps.pert.K)
    S = ps.base.P - delta * Omega * (Dt @ ps.base.G) \
        + ps.pert.kappa * Kt + ps.pert.nu * ps.pert.N
    A = np.zeros((len(ts), 4, 4))
    A[:, :2, 2:] = np.eye(2)
    A[:, 2:, :2] = -S
    A[:, 2:, 2:] = -delta * Dt
    return A


def _integrate_monodromy(ps: PeriodicSystem, steps: int) -> np.ndarray:
    """Fixed-step classical Runge-Kutta over one period, columns from I."""
    T = ps.period
    h = T / steps
    # coefficient matrices at every half step, evaluated in one pass
    A = _system_matrix_grid(ps, 0.5 * h * np.arange(2 * steps + 1))
    Y = np.eye(4)
    for k in range(steps):
        A1, A2, A4 = A[2 * k], A[2 * k + 1], A[2 * k + 2]
        K1 = A1 @ Y
        K2 = A2 @ (Y + 0.5 * h * K1)
        K3 = A2 @ (Y + 0.5 * h * K2)
        K4 = A4 @ (Y + h * K3)
        Y = Y + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    return Y


def pairing_distance(a, b) -> float:
    """Smallest worst-case pairing distance between two small multisets."""
    a = list(np.asarray(a, dtype=complex))
    b = list(np.asarray(b, dtype=complex))
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        d = max(abs(a[i] - b[p]) for i, p in enumerate(perm))
        if d < best:
            best = d
    return best


def monodromy(ps: PeriodicSystem, steps: int = 4096,
              liouville_rtol: float = DEFAULT.liouville_rtol,
              verify_steps: bool = False) -> FloquetResult:
    """Monodromy matrix, Floquet multipliers and the duality comparison.

    Integrates the 4-dimensional first-order form over T = pi / Omega
    (the coefficients oscillate at 2 Omega) and compares the multipliers
    with -exp(lambda T) built from the autonomous spectrum.

    Parameters
    ----------
    steps : int
        Fixed Runge-Kutta steps over one period; at least 256.
    verify_steps : bool
        Re-integrate at half resolution and fail if the two monodromy
        matrices disagree beyond the Liouville tolerance.
    """
    if steps < 256:
        raise ValueError(f"steps must be >= 256, got {steps}")
    M = _integrate_monodromy(ps, steps)
    if verify_steps:
        M_half = _integrate_monodromy(ps, steps // 2)
        drift = float(np.linalg.norm(M - M_half))
        if drift > liouville_rtol * (1.0 + np.linalg.norm(M)):
            raise ResolutionError(
                f"step-halving disagreement {drift:.3e} at {steps} steps; "
                "increase steps"
            )

    coeffs = charpoly_of_matrix(M)
    roots, _ = roots_batch(coeffs[None, :])
    multipliers = roots[0]

    pencil = build_pencil(ps.base, ps.pert)
    lam = solve_qep(pencil, want_vectors=False).eigenvalues
    T = ps.period
    predicted = -np.exp(lam * T)
    order = np.lexsort((predicted.imag, predicted.real))
    predicted = predicted[order]

    match = pairing_distance(multipliers, predicted)

    # Liouville: |det M| = exp(-integral tr(delta Dt) dt) = exp(-delta trD T)
    det_M = coeffs[-1] if len(coeffs) % 2 == 1 else -coeffs[-1]
    trD = float(np.trace(ps.pert.D))
    expected = math.exp(-ps.pert.delta * trD * T)
    liouville = abs(abs(det_M) - expected) / expected
    # det of a strongly growing monodromy cannot be resolved below the
    # roundoff of its largest entries; keep an absolute floor for that
    floor = 32.0 * np.finfo(float).eps * (1.0 + np.linalg.norm(M)) ** 4
    if abs(abs(det_M) - expected) > liouville_rtol * expected + floor:
        raise ResolutionError(
            f"Liouville determinant defect {liouville:.3e} exceeds "
            f"{liouville_rtol:.1e} at {steps} steps; increase steps"
        )
    return FloquetResult(monodromy=M, multipliers=multipliers,
                         predicted_multipliers=predicted,
                         match_error=float(match),
                         liouville_error=float(liouville), steps=steps)
