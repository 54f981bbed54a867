"""Boundary-value problems, collocation grids, and the fitness functional.

A candidate solution is scored by the sum of squared PDE residuals over a
full Cartesian grid of T points per axis, plus one squared-difference
penalty per Dirichlet face.  Any non-finite evaluation anywhere makes the
candidate infeasible and its fitness the sentinel value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .expr import (
    Expression,
    differentiate,
    evaluate_on_arrays,
    parse,
    serialize,
    variables,
)

__all__ = [
    "Problem",
    "FitnessReport",
    "Grid",
    "DifferenceGrid",
    "AXES",
    "FACE_NAMES",
    "DEFAULT_SENTINEL",
    "make_grid",
    "residual_error",
    "boundary_penalty",
    "fitness",
    "compare_to_exact",
    "load_problem",
    "problem_from_text",
    "problem_to_text",
    "save_problem",
]

AXES = ("x", "y", "z")

DEFAULT_SENTINEL = 1e8

# face keys in report/file order: lower then upper per axis
FACE_NAMES = {
    2: ("x_min", "x_max", "y_min", "y_max"),
    3: ("x_min", "x_max", "y_min", "y_max", "z_min", "z_max"),
}


def _allowed_residual_vars(dimension: int) -> set[str]:
    spatial = set(AXES[:dimension])
    derivs = {"u"}
    for ax in AXES[:dimension]:
        derivs.add(f"u{ax}")
        derivs.add(f"u{ax}{ax}")
    return spatial | derivs


@dataclass(frozen=True, eq=False)
class Problem:
    """A Poisson-type boundary-value problem on a box domain.

    ``residual`` is the functional whose vanishing characterises a solution,
    written over the spatial variables plus u, ux, uy, uz, uxx, uyy, uzz
    (first partials are accepted for forward compatibility and bound only
    when referenced).  ``boundary`` maps each face key (x_min, x_max, ...)
    to the Dirichlet function of that face's free variables.
    """

    dimension: int
    bounds: tuple[tuple[float, float], ...]
    residual: Expression
    boundary: Mapping[str, Expression]
    exact: Expression | None = None
    grid_points: int = 100  # T, per axis

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dimension}")
        if len(self.bounds) != self.dimension:
            raise ValueError("one (lower, upper) pair per axis is required")
        for ax, (lo, hi) in zip(AXES, self.bounds):
            if not lo < hi:
                raise ValueError(f"{ax} interval has lower {lo} >= upper {hi}")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        allowed = _allowed_residual_vars(self.dimension)
        extra = variables(self.residual) - allowed
        if extra:
            raise ValueError(f"residual references undeclared variables: {sorted(extra)}")
        expected_faces = FACE_NAMES[self.dimension]
        if tuple(self.boundary) != expected_faces:
            raise ValueError(f"boundary must define faces {expected_faces} in order, "
                             f"got {tuple(self.boundary)}")
        spatial = set(AXES[:self.dimension])
        for face, g in self.boundary.items():
            free = spatial - {face[0]}
            extra = variables(g) - free
            if extra:
                raise ValueError(f"face {face} references non-free variables: {sorted(extra)}")
        if self.exact is not None:
            extra = variables(self.exact) - spatial
            if extra:
                raise ValueError(f"exact solution references unknown variables: {sorted(extra)}")

    def spatial_variables(self) -> tuple[str, ...]:
        return AXES[:self.dimension]

    def with_grid_points(self, grid_points: int) -> "Problem":
        return Problem(self.dimension, self.bounds, self.residual,
                       self.boundary, self.exact, grid_points)


@dataclass
class FitnessReport:
    """Interior residual score, per-face penalties, and their weighted total."""

    interior_error: float
    face_penalties: dict[str, float]
    total: float
    feasible: bool

    @classmethod
    def infeasible(cls, sentinel: float = DEFAULT_SENTINEL) -> "FitnessReport":
        return cls(sentinel, {}, sentinel, False)


@dataclass(eq=False)
class Grid:
    """Collocation points: full interior product grid plus per-face points."""

    axes: tuple[np.ndarray, ...]
    interior: dict[str, np.ndarray]      # each array has T**dimension entries
    faces: dict[str, dict[str, np.ndarray]]

    @property
    def interior_size(self) -> int:
        return next(iter(self.interior.values())).size


def make_grid(problem: Problem) -> Grid:
    """T equidistant points per axis including both endpoints.

    The interior evaluation set is the full Cartesian product (T^2 or T^3
    points, face-coincident points included); each face set fixes one
    coordinate at its bound and takes the product of the remaining axes.
    """
    t = problem.grid_points
    names = problem.spatial_variables()
    axes = tuple(np.linspace(lo, hi, t) for lo, hi in problem.bounds)
    mesh = np.meshgrid(*axes, indexing="ij")
    interior = {name: m.reshape(-1) for name, m in zip(names, mesh)}

    faces: dict[str, dict[str, np.ndarray]] = {}
    for axis_index, name in enumerate(names):
        lo, hi = problem.bounds[axis_index]
        for face_value, suffix in ((lo, "min"), (hi, "max")):
            others = [axes[i] for i in range(len(names)) if i != axis_index]
            if len(others) == 1:
                free = {n: a for n, a in zip(
                    [n for n in names if n != name], others)}
            else:
                m = np.meshgrid(*others, indexing="ij")
                free = {n: a.reshape(-1) for n, a in zip(
                    [n for n in names if n != name], m)}
            count = next(iter(free.values())).size
            binding = dict(free)
            binding[name] = np.full(count, face_value)
            faces[f"{name}_{suffix}"] = binding
    # preserve canonical face order
    faces = {k: faces[k] for k in FACE_NAMES[problem.dimension]}
    return Grid(axes=axes, interior=interior, faces=faces)


def _eval_full(e: Expression, binding: Mapping[str, np.ndarray], size: int):
    """Evaluate and broadcast to the full point count (constants collapse)."""
    values, finite = evaluate_on_arrays(e, binding)
    values = np.broadcast_to(np.asarray(values, dtype=float), (size,))
    ok = bool(np.all(finite))
    return values, ok


def _candidate_bindings(candidate: Expression, problem: Problem, grid: Grid):
    """Interior binding with u and the referenced partial derivatives bound.

    Returns None if any required evaluation is non-finite anywhere.
    """
    needed = variables(problem.residual)
    size = grid.interior_size
    binding = dict(grid.interior)
    if "u" in needed:
        values, ok = _eval_full(candidate, grid.interior, size)
        if not ok:
            return None
        binding["u"] = values
    for ax in problem.spatial_variables():
        first = None
        if f"u{ax}" in needed or f"u{ax}{ax}" in needed:
            first = differentiate(candidate, ax)
        if f"u{ax}" in needed:
            values, ok = _eval_full(first, grid.interior, size)
            if not ok:
                return None
            binding[f"u{ax}"] = values
        if f"u{ax}{ax}" in needed:
            second = differentiate(first, ax)
            values, ok = _eval_full(second, grid.interior, size)
            if not ok:
                return None
            binding[f"u{ax}{ax}"] = values
    return binding


def residual_error(candidate: Expression, problem: Problem,
                   grid: Grid | None = None) -> float | None:
    """Sum of squared residuals over the interior grid; None when infeasible.

    Second partials of the candidate are computed symbolically and bound
    into the residual functional at every grid point.  A candidate that
    references a variable outside the problem's spatial set cannot be
    evaluated on the domain and counts as infeasible.
    """
    if grid is None:
        grid = make_grid(problem)
    if not variables(candidate) <= set(problem.spatial_variables()):
        return None
    binding = _candidate_bindings(candidate, problem, grid)
    if binding is None:
        return None
    values, ok = _eval_full(problem.residual, binding, grid.interior_size)
    if not ok:
        return None
    with np.errstate(over="ignore"):  # overflowing sums become infeasible
        total = float(np.sum(values * values))
    return total if math.isfinite(total) else None


def boundary_penalty(candidate: Expression, problem: Problem,
                     grid: Grid | None = None) -> dict[str, float] | None:
    """Per-face sums of squared Dirichlet violations; None when infeasible."""
    if grid is None:
        grid = make_grid(problem)
    if not variables(candidate) <= set(problem.spatial_variables()):
        return None
    penalties: dict[str, float] = {}
    for face, binding in grid.faces.items():
        size = next(iter(binding.values())).size
        s_vals, s_ok = _eval_full(candidate, binding, size)
        g_vals, g_ok = _eval_full(problem.boundary[face], binding, size)
        if not (s_ok and g_ok):
            return None
        with np.errstate(over="ignore"):  # overflowing sums become infeasible
            diff = s_vals - g_vals
            p = float(np.sum(diff * diff))
        if not math.isfinite(p):
            return None
        penalties[face] = p
    return penalties


def fitness(candidate: Expression | None, problem: Problem,
            penalty_weight: float = 1.0,
            sentinel: float = DEFAULT_SENTINEL,
            grid: Grid | None = None) -> FitnessReport:
    """Total fitness: interior error plus weighted face penalties.

    ``candidate=None`` stands for a rejected genotype and scores the
    sentinel, as does any candidate with a non-finite evaluation.
    """
    if candidate is None:
        return FitnessReport.infeasible(sentinel)
    if grid is None:
        grid = make_grid(problem)
    interior = residual_error(candidate, problem, grid)
    if interior is None:
        return FitnessReport.infeasible(sentinel)
    penalties = boundary_penalty(candidate, problem, grid)
    if penalties is None:
        return FitnessReport.infeasible(sentinel)
    total = interior + penalty_weight * sum(penalties.values())
    if not math.isfinite(total):
        return FitnessReport.infeasible(sentinel)
    return FitnessReport(interior, penalties, total, True)


@dataclass(eq=False)
class DifferenceGrid:
    """Candidate-minus-exact differences on an equidistant comparison grid."""

    columns: tuple[str, ...]          # spatial names + "diff"
    points: dict[str, np.ndarray]
    diffs: np.ndarray
    max_abs: float


def compare_to_exact(candidate: Expression, problem: Problem,
                     points_per_axis: int = 50) -> DifferenceGrid:
    """|candidate - exact| on a fresh M-per-axis grid, plus its maximum.

    The maximum is NaN if the candidate is non-finite somewhere on the grid.
    """
    if problem.exact is None:
        raise ValueError("problem has no exact solution to compare against")
    names = problem.spatial_variables()
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in problem.bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    binding = {n: m.reshape(-1) for n, m in zip(names, mesh)}
    size = points_per_axis ** problem.dimension
    c_vals, c_ok = _eval_full(candidate, binding, size)
    e_vals, _ = _eval_full(problem.exact, binding, size)
    diffs = np.abs(c_vals - e_vals)
    max_abs = float(np.max(diffs)) if c_ok else math.nan
    return DifferenceGrid(tuple(names) + ("diff",), binding, diffs, max_abs)


# ---------------------------------------------------------------------------
# Problem files: plain key = value text
# ---------------------------------------------------------------------------

_BOUND_KEYS = {"x": "x_bounds", "y": "y_bounds", "z": "z_bounds"}


def problem_to_text(problem: Problem) -> str:
    lines = [f"dimension = {problem.dimension}"]
    for ax, (lo, hi) in zip(AXES, problem.bounds):
        lines.append(f"{_BOUND_KEYS[ax]} = {_fmt(lo)} {_fmt(hi)}")
    lines.append(f"T = {problem.grid_points}")
    lines.append(f"residual = {serialize(problem.residual)}")
    for face, g in problem.boundary.items():
        lines.append(f"{face} = {serialize(g)}")
    if problem.exact is not None:
        lines.append(f"exact = {serialize(problem.exact)}")
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return str(int(v)) if v == int(v) else repr(v)


def problem_from_text(text: str) -> Problem:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in entries:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value.strip()

    def take(key: str, default: str | None = None) -> str:
        if key in entries:
            return entries.pop(key)
        if default is not None:
            return default
        raise ValueError(f"problem file is missing required key {key!r}")

    dimension = int(take("dimension"))
    if dimension not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {dimension}")
    bounds = []
    for ax in AXES[:dimension]:
        parts = take(_BOUND_KEYS[ax]).split()
        if len(parts) != 2:
            raise ValueError(f"{_BOUND_KEYS[ax]} needs two numbers 'lower upper'")
        bounds.append((float(parts[0]), float(parts[1])))
    grid_points = int(take("T", "100"))
    residual = parse(take("residual"))
    boundary = {face: parse(take(face)) for face in FACE_NAMES[dimension]}
    exact = parse(entries.pop("exact")) if "exact" in entries else None
    if entries:
        raise ValueError(f"unknown keys in problem file: {sorted(entries)}")
    return Problem(dimension, tuple(bounds), residual, boundary, exact, grid_points)


def load_problem(path: str | Path) -> Problem:
    return problem_from_text(Path(path).read_text())


def save_problem(problem: Problem, path: str | Path) -> None:
    Path(path).write_text(problem_to_text(problem))
