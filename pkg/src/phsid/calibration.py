"""Gradient-descent calibration of reduced port-Hamiltonian models.

The loop fits v = (J, R, w0) to reference output data by repeating

    1. simulate the state with explicit Euler,
    2. solve the sensitivity ODE for every tangent-basis direction and
       assemble the cost gradient from the directional derivatives,
    3. find a step size with Armijo backtracking (start at sigma_init,
       halve until the decrease beats gamma * sigma * |g|^2),
    4. update v <- retract(v - sigma * g),

until the cost drops below ``eps_stop`` or a guard (iteration cap, halving
cap, exactly-zero gradient) trips.  The retraction re-mirrors the triangular
free parameters, so J stays exactly skew and R exactly symmetric at every
iterate; with ``psd_mode="project"`` the R block is additionally replaced by
its Frobenius-nearest PSD matrix, keeping the iterate admissible.  The
sufficient-decrease condition is evaluated at the retracted candidate, so
every recorded step satisfies the Armijo inequality exactly as stored.

|g|^2 is the squared Euclidean norm of the basis-coefficient vector; the
basis elements themselves are not normalized, which rescales the step
geometry by the (positive definite) Gram matrix of the basis but never
breaks descent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DimensionMismatchError, DivergenceError, InvalidModelError, LineSearchError
from .matrices import PSDMatrix, SkewSymmetricMatrix, SymmetricMatrix, project_psd
from .sensitivity import (
    STRUCTURE_FULL,
    STRUCTURES,
    Gradient,
    ParameterPoint,
    _mismatch_cost,
    assemble_gradient,
    sensitivity_coefficients,
    tangent_basis,
)
from .systems import ReducedPHSystem, Signal, output, simulate_euler

PSD_PROJECT = "project"
PSD_NONE = "none"
PSD_MODES = (PSD_PROJECT, PSD_NONE)


@dataclass(frozen=True)
class CalibrationConfig:
    """Run parameters of the descent loop."""

    sigma_init: float = 10.0
    gamma: float = 1e-4
    eps_stop: float = 1e-4
    max_iter: int = 500
    max_halvings: int = 60
    structure: str = STRUCTURE_FULL
    psd_mode: str = PSD_PROJECT

    def __post_init__(self):
        if not self.sigma_init > 0:
            raise ValueError("sigma_init must be positive")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not self.eps_stop > 0:
            raise ValueError("eps_stop must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be nonnegative")
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.psd_mode not in PSD_MODES:
            raise ValueError(f"unknown psd_mode {self.psd_mode!r}")


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of a calibration run.

    ``cost_history`` holds the cost of the initial point and of every
    accepted iterate (strictly decreasing after the first entry);
    ``step_sizes``, ``gradient_sq_norms`` and ``iterates`` line up with the
    accepted steps, with ``iterates`` additionally including the initial
    point at index 0.
    """

    v_opt: ParameterPoint
    cost_history: tuple[float, ...]
    iterations: int
    converged: bool
    y_opt: Signal
    step_sizes: tuple[float, ...]
    gradient_sq_norms: tuple[float, ...] = ()
    iterates: tuple[ParameterPoint, ...] = ()
    message: str = ""

    @property
    def final_cost(self) -> float:
        return self.cost_history[-1]


class ArmijoStep(NamedTuple):
    sigma: float
    point: ParameterPoint
    cost: float


def cost(sys: ReducedPHSystem, u: Signal, y_data: Signal) -> float:
    """Output mismatch 1/2 * sum_{j<K} h * |B^T w_j - y_data_j|^2 under explicit Euler."""
    if u.grid != y_data.grid:
        raise DimensionMismatchError("input and data grids differ")
    if u.k != sys.k or y_data.k != sys.k:
        raise DimensionMismatchError("port counts of system, input and data differ")
    try:
        return _mismatch_cost(sys.J.array, sys.R.array, sys.B, sys.w_hat,
                              u.values, y_data.values, u.grid.h)
    except DivergenceError as exc:
        err = DivergenceError(exc.step, "cost evaluation")
        err.parameters = (sys.J.array, sys.R.array, sys.w_hat)
        raise err from None


def _candidate_blocks(v: ParameterPoint, g: Gradient, sigma: float):
    """Raw descent update on the triangular free parameters (exact structure)."""
    j_new = SkewSymmetricMatrix.from_strict_lower(
        np.tril(v.J.array, -1) - sigma * np.tril(g.value.h_J.array, -1)
    )
    r_sym = SymmetricMatrix.from_lower(
        np.tril(v.R.array) - sigma * np.tril(g.value.h_R.array)
    )
    w_new = v.w_hat - sigma * g.value.h_x
    return j_new, r_sym, w_new


def armijo_search(v: ParameterPoint, g: Gradient, cost_at_v: float,
                  cost_evaluator: Callable[[np.ndarray, np.ndarray, np.ndarray], float],
                  cfg: CalibrationConfig) -> ArmijoStep:
    """Backtracking step size search.

    Tries sigma in {sigma_init, sigma_init/2, ...} and returns the first one
    whose retracted candidate v' = retract(v - sigma*g) satisfies

        cost(v') - cost(v) <= -gamma * sigma * |g|^2.

    ``cost_evaluator`` receives the candidate blocks as raw arrays and may
    return +inf to signal an unusable candidate.  Raises
    :class:`LineSearchError` once ``max_halvings`` halvings are exhausted.
    """
    g_sq = g.norm_sq
    sigma = cfg.sigma_init
    halvings = 0
    while True:
        try:
            j_new, r_sym, w_new = _candidate_blocks(v, g, sigma)
        except InvalidModelError:
            j_new = None  # trial point overflowed; reject and halve
        if j_new is not None:
            if cfg.psd_mode == PSD_PROJECT:
                r_block = project_psd(r_sym)
            else:
                r_block = r_sym
            cand_cost = cost_evaluator(j_new.array, r_block.array, w_new)
            if np.isfinite(cand_cost) and cand_cost - cost_at_v <= -cfg.gamma * sigma * g_sq:
                if isinstance(r_block, PSDMatrix):
                    r_new = r_block
                else:
                    # psd_mode="none": the accepted iterate must still be admissible
                    r_new = PSDMatrix(r_sym)
                return ArmijoStep(sigma, ParameterPoint(j_new, r_new, w_new),
                                  float(cand_cost))
        if halvings >= cfg.max_halvings:
            raise LineSearchError(sigma, halvings)
        sigma *= 0.5
        halvings += 1


def calibrate(v0: ParameterPoint, u: Signal, y_data: Signal, b,
              cfg: CalibrationConfig | None = None) -> CalibrationResult:
    """Run the descent loop from ``v0`` with fixed, known port matrix ``b``."""
    if cfg is None:
        cfg = CalibrationConfig()
    b = np.asarray(b, dtype=float)
    if u.grid != y_data.grid:
        raise DimensionMismatchError("input and data grids differ")
    if b.ndim != 2 or b.shape[0] != v0.n:
        raise DimensionMismatchError(
            f"port matrix must be {v0.n} x k, got shape {b.shape}"
        )
    if u.k != b.shape[1] or y_data.k != b.shape[1]:
        raise DimensionMismatchError("port counts of B, input and data differ")

    h = u.grid.h
    basis = tangent_basis(v0.n, cfg.structure)

    def evaluate(j_arr, r_arr, w0):
        try:
            return _mismatch_cost(j_arr, r_arr, b, w0, u.values, y_data.values, h)
        except DivergenceError:
            return np.inf

    v = v0
    current = cost(v.to_system(b), u, y_data)
    history = [current]
    sigmas: list[float] = []
    grad_sq: list[float] = []
    iterates = [v]
    message = ""
    iterations = 0

    while current > cfg.eps_stop and iterations < cfg.max_iter:
        sys = v.to_system(b)
        traj = simulate_euler(sys, u)
        coeffs = sensitivity_coefficients(sys, traj, y_data, basis)
        g = assemble_gradient(coeffs, basis)
        if g.norm_sq == 0.0:
            message = "stationary point: gradient is exactly zero above the stopping threshold"
            break
        try:
            step = armijo_search(v, g, current, evaluate, cfg)
        except LineSearchError as exc:
            message = str(exc)
            break
        except InvalidModelError as exc:
            message = f"iterate left the admissible set (psd_mode='{cfg.psd_mode}'): {exc}"
            break
        v = step.point
        current = step.cost
        iterations += 1
        history.append(current)
        sigmas.append(step.sigma)
        grad_sq.append(g.norm_sq)
        iterates.append(v)

    converged = current <= cfg.eps_stop
    if not converged and not message:
        message = f"iteration limit reached ({cfg.max_iter})"
    final_sys = v.to_system(b)
    y_opt = output(final_sys, simulate_euler(final_sys, u))
    return CalibrationResult(
        v_opt=v,
        cost_history=tuple(history),
        iterations=iterations,
        converged=converged,
        y_opt=y_opt,
        step_sizes=tuple(sigmas),
        gradient_sq_norms=tuple(grad_sq),
        iterates=tuple(iterates),
        message=message,
    )
