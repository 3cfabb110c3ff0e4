"""Undamped modal solution, inertance FRF synthesis and COMAC correlation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigh, solve_triangular

from .beam_fe import GlobalMatrices

# Eigenvalues below RIGID_EIGENVALUE_RATIO * mean(diag K)/mean(diag M) are
# classified as rigid-body modes; numerically they are never exactly zero.
RIGID_EIGENVALUE_RATIO = 1e-6


class ModalError(RuntimeError):
    """Eigen-solution or FRF-synthesis failure."""


@dataclass(frozen=True)
class ModalSolution:
    """Elastic natural frequencies and mass-normalized mode shapes.

    ``frequencies[i]`` is in Hz, ascending, with rigid-body modes excluded;
    ``mode_shapes[:, i]`` is the matching shape over all DOFs with
    ``phi_i^T M phi_i = 1``.
    """

    frequencies: np.ndarray
    mode_shapes: np.ndarray
    n_rigid: int

    def __post_init__(self):
        frequencies = np.asarray(self.frequencies, dtype=float)
        shapes = np.asarray(self.mode_shapes, dtype=float)
        if shapes.ndim != 2 or shapes.shape[1] != frequencies.shape[0]:
            raise ValueError("mode_shapes must have one column per frequency")
        frequencies.flags.writeable = False
        shapes.flags.writeable = False
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "mode_shapes", shapes)

    @property
    def n_modes(self) -> int:
        return self.frequencies.shape[0]


@dataclass(frozen=True)
class FrfSpec:
    """Inertance FRF request: excitation DOF k, response DOF l, per-mode
    damping ratios and the angular-frequency grid (rad/s)."""

    excitation_dof: int
    response_dof: int
    damping_ratios: np.ndarray
    frequency_grid: np.ndarray

    def __post_init__(self):
        zeta = np.atleast_1d(np.asarray(self.damping_ratios, dtype=float))
        grid = np.atleast_1d(np.asarray(self.frequency_grid, dtype=float))
        if np.any(zeta < 0) or np.any(zeta >= 1):
            raise ValueError("damping ratios must satisfy 0 <= zeta < 1")
        if np.any(grid < 0):
            raise ValueError("frequency grid values must be non-negative")
        zeta.flags.writeable = False
        grid.flags.writeable = False
        object.__setattr__(self, "damping_ratios", zeta)
        object.__setattr__(self, "frequency_grid", grid)


def solve_modes(
    matrices: GlobalMatrices, n_modes: int, expected_rigid: int | None = None
) -> ModalSolution:
    """Solve the undamped generalized eigenproblem K phi = w^2 M phi.

    The mass matrix is Cholesky-factored (M = L L^T) and the problem reduced
    to a standard symmetric one on L^-1 K L^-T before back-transforming, so
    the returned shapes are mass-normalized by construction.  Rigid-body
    modes (near-zero eigenvalues) are detected by threshold and excluded.

    Parameters
    ----------
    matrices : GlobalMatrices
        Assembled mass (positive definite) and stiffness matrices.
    n_modes : int
        Number of elastic modes to return.
    expected_rigid : int, optional
        When given, raise unless exactly this many rigid-body modes are
        found (3 for a free-free 2-D frame).
    """
    M = matrices.mass
    K = matrices.stiffness
    try:
        L = cholesky(M, lower=True)
    except LinAlgError as exc:
        raise ModalError("mass matrix is not positive definite") from exc
    # A = L^-1 K L^-T, symmetrized against roundoff
    Y = solve_triangular(L, K, lower=True)
    A = solve_triangular(L, Y.T, lower=True).T
    A = 0.5 * (A + A.T)
    try:
        eigenvalues, vectors = eigh(A)
    except LinAlgError as exc:
        raise ModalError(f"eigen-solver failed to converge: {exc}") from exc

    scale = np.mean(np.diag(K)) / np.mean(np.diag(M))
    threshold = RIGID_EIGENVALUE_RATIO * scale
    n_rigid = int(np.sum(eigenvalues < threshold))
    if expected_rigid is not None and n_rigid != expected_rigid:
        raise ModalError(
            f"found {n_rigid} rigid-body modes, expected {expected_rigid} "
            f"(threshold {threshold:.3e})"
        )
    n_available = eigenvalues.shape[0] - n_rigid
    if not 1 <= n_modes <= n_available:
        raise ValueError(f"n_modes must be in 1..{n_available}, got {n_modes}")

    elastic = slice(n_rigid, n_rigid + n_modes)
    omega_sq = eigenvalues[elastic]
    if np.any(omega_sq <= 0):
        raise ModalError("non-positive elastic eigenvalue; stiffness is not PSD")
    shapes = solve_triangular(L.T, vectors[:, elastic], lower=False)
    # deterministic sign: largest-magnitude entry of each shape is positive
    anchor = np.argmax(np.abs(shapes), axis=0)
    signs = np.sign(shapes[anchor, np.arange(shapes.shape[1])])
    shapes = shapes * signs
    frequencies = np.sqrt(omega_sq) / (2.0 * np.pi)
    return ModalSolution(frequencies=frequencies, mode_shapes=shapes, n_rigid=n_rigid)


def frf_inertance(solution: ModalSolution, spec: FrfSpec) -> np.ndarray:
    """Synthesize the inertance FRF H_kl over the requested frequency grid.

    Modal summation: H_kl(w) = sum_i -w^2 phi_k^i phi_l^i /
    (w_i^2 - w^2 + 2j zeta_i w_i w).
    """
    n_dofs, n_modes = solution.mode_shapes.shape
    k, l = spec.excitation_dof, spec.response_dof
    for name, dof in (("excitation", k), ("response", l)):
        if not 0 <= dof < n_dofs:
            raise ValueError(f"{name} DOF {dof} out of range 0..{n_dofs - 1}")
    zeta = spec.damping_ratios
    if zeta.shape[0] != n_modes:
        raise ValueError(f"expected {n_modes} damping ratios, got {zeta.shape[0]}")
    omega_i = 2.0 * np.pi * solution.frequencies
    grid = spec.frequency_grid
    for i in np.nonzero(zeta == 0.0)[0]:
        if np.any(grid == omega_i[i]):
            raise ModalError(
                f"undamped mode {i} (omega = {omega_i[i]:.6g} rad/s) lies on the grid: pole"
            )
    phi_k = solution.mode_shapes[k, :]
    phi_l = solution.mode_shapes[l, :]
    w = grid[:, None]
    denominator = omega_i[None, :] ** 2 - w**2 + 2j * zeta[None, :] * omega_i[None, :] * w
    numerator = -(w**2) * (phi_k * phi_l)[None, :]
    return np.sum(numerator / denominator, axis=1)


def comac(shapes_a: np.ndarray, shapes_b: np.ndarray) -> np.ndarray:
    """Coordinate modal assurance criterion per measured DOF.

    Rows are measured DOFs, columns paired modes.  For DOF j:
    COMAC_j = (sum_i |a_ji b_ji|)^2 / (sum_i a_ji^2 * sum_i b_ji^2),
    which lies in [0, 1] by Cauchy-Schwarz.
    """
    a = np.atleast_2d(np.asarray(shapes_a, dtype=float))
    b = np.atleast_2d(np.asarray(shapes_b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"shape sets must match, got {a.shape} vs {b.shape}")
    if a.shape[1] < 1:
        raise ValueError("need at least one mode")
    # COMAC is invariant to per-row scaling; normalize rows by their largest
    # magnitude so extreme shape amplitudes cannot under- or overflow
    scale_a = np.max(np.abs(a), axis=1)
    scale_b = np.max(np.abs(b), axis=1)
    for name, scale in (("first", scale_a), ("second", scale_b)):
        zero_rows = np.nonzero(scale == 0.0)[0]
        if zero_rows.size:
            raise ValueError(
                f"COMAC undefined: DOF row {zero_rows[0]} of the {name} set is all zero"
            )
    a = a / scale_a[:, None]
    b = b / scale_b[:, None]
    sum_a = np.sum(a * a, axis=1)
    sum_b = np.sum(b * b, axis=1)
    cross = np.sum(np.abs(a * b), axis=1)
    # clamp the Cauchy-Schwarz bound against last-bit rounding
    return np.minimum((cross * cross) / (sum_a * sum_b), 1.0)


def average_comac(comac_vector: Sequence[float]) -> float:
    """Arithmetic mean of a COMAC vector."""
    values = np.asarray(comac_vector, dtype=float)
    if values.size == 0:
        raise ValueError("COMAC vector is empty")
    return float(np.mean(values))


def select_measured(solution: ModalSolution, measured_dofs: Sequence[int]) -> np.ndarray:
    """Rows of the mode-shape matrix at the measured DOFs, in the given order."""
    indices = np.asarray(measured_dofs, dtype=int)
    n_dofs = solution.mode_shapes.shape[0]
    if indices.size and (indices.min() < 0 or indices.max() >= n_dofs):
        raise ValueError(f"measured DOF indices must lie in 0..{n_dofs - 1}")
    return solution.mode_shapes[indices, :]
