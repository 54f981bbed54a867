"""Built-in benchmark problems u1..u5 with exact solutions.

Residual functionals are written so the stated exact solution scores zero:
each one was checked against a brute-force substitution oracle (see the
test suite) before being hard-coded here.
"""

from __future__ import annotations

from .expr import Constant, parse, substitute
from .pde import FACE_NAMES, Problem

__all__ = ["PROBLEM_NAMES", "get_problem", "iter_problems"]

PROBLEM_NAMES = ("u1", "u2", "u3", "u4", "u5")

# Laplacian of sin(4 pi x) sin(4 pi y) is -32 pi^2 sin(4 pi x) sin(4 pi y)
_U1_RESIDUAL = "uxx + uyy + 32*pi*pi*sin(4*pi*x)*sin(4*pi*y)"
_U1_EXACT = "sin(4*pi*x)*sin(4*pi*y)"

# Laplacian of (x^2-1)(y^2-1)exp(x+y), written out:
# (2(x^2 y^2 - 1) + 4x(y^2 - 1) + 4y(x^2 - 1)) exp(x+y)
_U2_RESIDUAL = ("uxx + uyy - (2*(x*x*y*y-1) + 4*x*(y*y-1) + 4*y*(x*x-1))"
                "*exp(x+y)")
_U2_EXACT = "(x*x-1)*(y*y-1)*exp(x+y)"

# Laplacian of y(y-1)x^3 is 6xy(y-1) + 2x^3 = -(6xy(1-y) - 2x^3); the forcing
# enters with the sign that makes the exact solution's residual vanish.
_U3_RESIDUAL = "uxx + uyy + 6*x*y*(1-y) - 2*x*x*x"
_U3_EXACT = "y*(y-1)*x*x*x"

_U4_RESIDUAL = "uxx + uyy + uzz - 6"
_U4_EXACT = "1 + x*x + y*y + z*z"
_U4_FACES = {
    "x_min": "1 + y*y + z*z",
    "x_max": "2 + y*y + z*z",
    "y_min": "1 + x*x + z*z",
    "y_max": "2 + x*x + z*z",
    "z_min": "1 + x*x + y*y",
    "z_max": "2 + x*x + y*y",
}

# sinh-Poisson: laplacian(u) + sinh(u) = 0, sinh written with exp.
_U5_RESIDUAL = "uxx + uyy + (exp(u) - exp(0-u))/2"
# Mallier-Maslowe: 4 atanh(cos(sqrt(2) x) / (sqrt(2) cosh(y))) with
# atanh(w) = log((1+w)/(1-w))/2 and cosh(y) = (exp(y)+exp(0-y))/2.
_U5_W = "2*cos(sqrt(2)*x)/(sqrt(2)*(exp(y)+exp(0-y)))"
_U5_EXACT = f"2*log((1+{_U5_W})/(1-{_U5_W}))"


def _zero_faces(dimension: int) -> dict[str, str]:
    return {face: "0" for face in FACE_NAMES[dimension]}


def _faces_from_exact(exact_text: str, bounds) -> dict[str, str]:
    """Dirichlet data read off the exact solution on each face."""
    exact = parse(exact_text)
    faces = {}
    for axis, (lo, hi) in zip("xyz", bounds):
        faces[f"{axis}_min"] = substitute(exact, axis, Constant(float(lo)))
        faces[f"{axis}_max"] = substitute(exact, axis, Constant(float(hi)))
    order = FACE_NAMES[len(bounds)]
    return {face: faces[face] for face in order}


def _build(name: str) -> Problem:
    if name == "u1":
        return Problem(
            dimension=2,
            bounds=((-1.0, 1.0), (-1.0, 1.0)),
            residual=parse(_U1_RESIDUAL),
            boundary={f: parse(g) for f, g in _zero_faces(2).items()},
            exact=parse(_U1_EXACT),
        )
    if name == "u2":
        return Problem(
            dimension=2,
            bounds=((-1.0, 1.0), (-1.0, 1.0)),
            residual=parse(_U2_RESIDUAL),
            boundary={f: parse(g) for f, g in _zero_faces(2).items()},
            exact=parse(_U2_EXACT),
        )
    if name == "u3":
        faces = {"x_min": "0", "x_max": "y*(y-1)", "y_min": "0", "y_max": "0"}
        return Problem(
            dimension=2,
            bounds=((0.0, 1.0), (0.0, 1.0)),
            residual=parse(_U3_RESIDUAL),
            boundary={f: parse(g) for f, g in faces.items()},
            exact=parse(_U3_EXACT),
        )
    if name == "u4":
        return Problem(
            dimension=3,
            bounds=((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)),
            residual=parse(_U4_RESIDUAL),
            boundary={f: parse(g) for f, g in _U4_FACES.items()},
            exact=parse(_U4_EXACT),
            grid_points=20,  # T^3 interior points make 100 per axis disproportionate
        )
    if name == "u5":
        # no domain is canonical for the sinh-Poisson benchmark; on [-1,1]^2
        # the Mallier-Maslowe expression stays inside atanh's domain and
        # provides the Dirichlet data
        bounds = ((-1.0, 1.0), (-1.0, 1.0))
        return Problem(
            dimension=2,
            bounds=bounds,
            residual=parse(_U5_RESIDUAL),
            boundary=_faces_from_exact(_U5_EXACT, bounds),
            exact=parse(_U5_EXACT),
        )
    raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}")


def get_problem(name: str) -> Problem:
    """Look up a benchmark problem by name (u1..u5)."""
    return _build(name)


def iter_problems():
    """All benchmarks as (name, problem) pairs."""
    for name in PROBLEM_NAMES:
        yield name, get_problem(name)
