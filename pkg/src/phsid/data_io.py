"""Synthetic data generation and file formats.

Random numbers
--------------
All randomized artifacts are pure functions of (seed, shape parameters).
The stream is produced by the counter-based Philox-4x64 bit generator keyed
directly with the 64-bit seed, and normal deviates come from the Box-Muller
transform:

    draw a (m, 2) block of doubles U in [0, 1),
    r_i     = sqrt(-2 * ln(1 - U[i, 0]))         # 1 - U in (0, 1]
    z_{2i}   = r_i * cos(2 * pi * U[i, 1])
    z_{2i+1} = r_i * sin(2 * pi * U[i, 1])

The deviates fill signal arrays row-major (node index slowest, port index
fastest); ports draw independently.  Both the generator and the transform
are fixed so golden files reproduce across platforms.

File formats
------------
Model (JSON): object with keys ``n``, ``k``, ``J`` (validated skew), ``R``
(validated symmetric PSD), optional ``Q`` (validated SPD, identity when
absent), ``B`` (n x k) and ``x_hat`` (length n).  Signals and trajectories
(CSV): header ``t,<name>_1,...,<name>_m``, one row per grid node, floats
written with 17 significant digits so a save/load round trip is bit-exact.
Loaders validate every structural invariant and reject violations with a
diagnostic naming the failed invariant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import CalibrationConfig, CalibrationResult
from .errors import DimensionMismatchError, MalformedFileError
from .matrices import PSDMatrix, SPDMatrix, SkewSymmetricMatrix
from .systems import (
    PHSystem,
    ReducedPHSystem,
    Signal,
    TimeGrid,
    Trajectory,
    output,
    simulate_euler,
)

_MAX_SEED = 2**64


@dataclass(frozen=True)
class NoiseSpec:
    """Parameters of the noisy input samples u_j = mean + std * N(0, 1)."""

    mean: float = 1.0
    std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.std >= 0:
            raise ValueError("std must be nonnegative")
        if not 0 <= int(self.seed) < _MAX_SEED:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))


def standard_normals(seed: int, count: int) -> np.ndarray:
    """Deterministic standard-normal deviates (Philox-4x64 + Box-Muller)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    gen = np.random.Generator(np.random.Philox(key=seed))
    pairs = (count + 1) // 2
    u = gen.random((pairs, 2))
    radius = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count]


def generate_input(grid: TimeGrid, k: int, spec: NoiseSpec) -> Signal:
    """Noisy constant input, one independent draw per node and port."""
    if k < 1:
        raise DimensionMismatchError("number of ports k must be >= 1")
    z = standard_normals(spec.seed, grid.num_nodes * k).reshape(grid.num_nodes, k)
    return Signal(grid, spec.mean + spec.std * z)


def generate_reference(sys: ReducedPHSystem, grid: TimeGrid,
                       spec: NoiseSpec) -> tuple[Signal, Signal]:
    """Sample an input and the reference output it produces under explicit Euler."""
    u = generate_input(grid, sys.k, spec)
    y_data = output(sys, simulate_euler(sys, u))
    return u, y_data


# --------------------------------------------------------------------------
# model files

_MODEL_KEYS = ("n", "k", "J", "R", "Q", "B", "x_hat")


def _as_array(raw, name) -> np.ndarray:
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise MalformedFileError(f"field {name!r} is not a numeric array") from None
    if not np.all(np.isfinite(arr)):
        raise MalformedFileError(f"field {name!r} contains non-finite values")
    return arr


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise MalformedFileError(f"{path}: expected a JSON object")
    return obj


def load_model(path) -> PHSystem:
    """Read and validate a model file; raises on any invariant violation."""
    obj = _read_json(path)
    unknown = set(obj) - set(_MODEL_KEYS)
    if unknown:
        raise MalformedFileError(f"unknown model fields: {sorted(unknown)}")
    missing = {"n", "k", "J", "R", "B", "x_hat"} - set(obj)
    if missing:
        raise MalformedFileError(f"missing model fields: {sorted(missing)}")
    try:
        n = int(obj["n"])
        k = int(obj["k"])
    except (TypeError, ValueError):
        raise MalformedFileError("fields 'n' and 'k' must be integers") from None
    if n < 1 or k < 1:
        raise DimensionMismatchError("n and k must be >= 1")

    j_arr = _as_array(obj["J"], "J")
    r_arr = _as_array(obj["R"], "R")
    b_arr = _as_array(obj["B"], "B")
    x_arr = _as_array(obj["x_hat"], "x_hat")
    if j_arr.shape != (n, n):
        raise DimensionMismatchError(f"J must be {n} x {n}, got {j_arr.shape}")
    if r_arr.shape != (n, n):
        raise DimensionMismatchError(f"R must be {n} x {n}, got {r_arr.shape}")
    if b_arr.shape != (n, k):
        raise DimensionMismatchError(f"B must be {n} x {k}, got {b_arr.shape}")
    if x_arr.shape != (n,):
        raise DimensionMismatchError(f"x_hat must have length {n}, got {x_arr.shape}")

    j = SkewSymmetricMatrix.from_matrix(j_arr)
    r = PSDMatrix.from_matrix(r_arr)
    if "Q" in obj:
        q_arr = _as_array(obj["Q"], "Q")
        if q_arr.shape != (n, n):
            raise DimensionMismatchError(f"Q must be {n} x {n}, got {q_arr.shape}")
        q = SPDMatrix.from_matrix(q_arr)
    else:
        q = SPDMatrix.identity(n)
    return PHSystem(j, r, q, b_arr, x_arr)


def save_model(sys: PHSystem, path) -> None:
    obj = {
        "n": sys.n,
        "k": sys.k,
        "J": sys.J.array.tolist(),
        "R": sys.R.array.tolist(),
        "Q": sys.Q.array.tolist(),
        "B": sys.B.tolist(),
        "x_hat": sys.x_hat.tolist(),
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# signal / trajectory files

def _format_row(values) -> str:
    return ",".join(f"{v:.17g}" for v in values)


def _write_grid_table(grid: TimeGrid, columns: np.ndarray, name: str, path) -> None:
    header = "t," + ",".join(f"{name}_{i + 1}" for i in range(columns.shape[1]))
    times = grid.times()
    lines = [header]
    for t, row in zip(times, columns):
        lines.append(f"{t:.17g}," + _format_row(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_grid_table(path) -> tuple[TimeGrid, np.ndarray]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from None
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 3:
        raise MalformedFileError(f"{path}: need a header and at least two grid rows")
    header = lines[0].split(",")
    if header[0].strip() != "t" or len(header) < 2:
        raise MalformedFileError(f"{path}: header must be 't,<name>_1,...'")
    width = len(header)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != width:
            raise MalformedFileError(
                f"{path}:{lineno}: expected {width} fields, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise MalformedFileError(f"{path}:{lineno}: non-numeric field") from None
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise MalformedFileError(f"{path}: non-finite values")
    times = data[:, 0]
    steps = len(times) - 1
    t_end = times[-1]
    if not t_end > 0:
        raise MalformedFileError(f"{path}: final time must be positive")
    grid = TimeGrid(float(t_end), steps)
    if np.abs(times - grid.times()).max() > 1e-9 * grid.h:
        raise MalformedFileError(
            f"{path}: time column is not the uniform grid 0..t_end "
            f"(missing or corrupted rows?)"
        )
    return grid, data[:, 1:]


def save_signal_csv(signal: Signal, path, name: str = "u") -> None:
    _write_grid_table(signal.grid, signal.values, name, path)


def load_signal_csv(path) -> Signal:
    grid, values = _read_grid_table(path)
    return Signal(grid, values)


def save_trajectory_csv(traj: Trajectory, path, name: str = "w") -> None:
    _write_grid_table(traj.grid, traj.states, name, path)


def load_trajectory_csv(path) -> Trajectory:
    grid, states = _read_grid_table(path)
    return Trajectory(grid, states)


# --------------------------------------------------------------------------
# calibration config / result files

_CONFIG_KEYS = ("sigma_init", "gamma", "eps_stop", "max_iter", "max_halvings",
                "structure", "psd_mode")


def load_config(path) -> CalibrationConfig:
    obj = _read_json(path)
    unknown = set(obj) - set(_CONFIG_KEYS)
    if unknown:
        raise MalformedFileError(f"unknown config fields: {sorted(unknown)}")
    try:
        return CalibrationConfig(**obj)
    except (TypeError, ValueError) as exc:
        raise MalformedFileError(f"invalid config: {exc}") from None


def save_result(result: CalibrationResult, path) -> None:
    obj = {
        "J": result.v_opt.J.array.tolist(),
        "R": result.v_opt.R.array.tolist(),
        "x_hat": result.v_opt.w_hat.tolist(),
        "iterations": result.iterations,
        "converged": result.converged,
        "final_cost": result.final_cost,
    }
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def save_history_csv(result: CalibrationResult, path) -> None:
    """Cost evolution as ``iter,cost,sigma``; the initial row has no sigma."""
    lines = ["iter,cost,sigma", f"0,{result.cost_history[0]:.17g},"]
    for i, (c, s) in enumerate(zip(result.cost_history[1:], result.step_sizes), start=1):
        lines.append(f"{i},{c:.17g},{s:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_history_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a history CSV back as (costs, sigmas); sigmas has one entry per step."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from None
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].split(",") != ["iter", "cost", "sigma"]:
        raise MalformedFileError(f"{path}: expected header 'iter,cost,sigma'")
    if len(lines) < 2:
        raise MalformedFileError(f"{path}: history is empty")
    costs = []
    sigmas = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedFileError(f"{path}:{lineno}: expected 3 fields")
        try:
            costs.append(float(parts[1]))
            if parts[2]:
                sigmas.append(float(parts[2]))
        except ValueError:
            raise MalformedFileError(f"{path}:{lineno}: non-numeric field") from None
    return np.array(costs), np.array(sigmas)
