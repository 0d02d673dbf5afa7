"""Built-in eigenvalue problems -div(A grad u) + phi u = lambda u, u = 0 on the boundary.

Coefficient callables take coordinate arrays ``x, y`` of any (common) shape
and return arrays of shape ``x.shape + (2, 2)`` for ``A``, ``x.shape + (2,)``
for ``divA`` (column divergence) and ``x.shape`` for ``phi``.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ConfigurationError
from .mesh import DomainDef, l_shape, square


def _identity(scale=1.0):
    def A(x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(scale * np.eye(2), x.shape + (2, 2))

    return A


def _zero_vector(x, y):
    return np.zeros(np.shape(x) + (2,))


def _zero(x, y):
    return np.zeros(np.shape(x))


@dataclass(frozen=True)
class ProblemDef:
    name: str
    domain: DomainDef
    A: Callable
    divA: Callable | None = _zero_vector
    phi: Callable = _zero
    constant_A: bool = True
    reference_eigenvalues: tuple = ()
    reference_note: str = ""
    coarse_cells: int | None = None
    description: str = ""

    def __post_init__(self):
        if not self.constant_A and self.divA is None:
            raise ConfigurationError(f"{self.name}: variable A needs an analytic divA")

    def reference(self, i):
        """Reference value for the i-th eigenvalue (0-based) or None."""
        return self.reference_eigenvalues[i] if i < len(self.reference_eigenvalues) else None


def example1():
    """Harmonic oscillator -1/2 Lap u + 1/2 |x|^2 u on (-5, 5)^2.

    The smallest eigenvalue on the whole plane is 1 with eigenfunction
    exp(-|x|^2 / 2); truncating to the square perturbs it by an amount of
    order exp(-25).
    """
    return ProblemDef(
        name="example1",
        domain=square(-5.0, 5.0),
        A=_identity(0.5),
        phi=lambda x, y: 0.5 * (np.asarray(x) ** 2 + np.asarray(y) ** 2),
        reference_eigenvalues=(1.0,),
        reference_note="exact on R^2; truncation to (-5,5)^2 is exponentially small",
        coarse_cells=10,
        description="harmonic oscillator",
    )


def example2():
    """Laplace eigenproblem on the L-shaped domain."""
    return ProblemDef(
        name="example2",
        domain=l_shape(),
        A=_identity(),
        reference_eigenvalues=(9.6397238440219,),
        reference_note="published high-accuracy approximation, not analytic",
        coarse_cells=32,
        description="L-shape Laplacian",
    )


def _A3(x, y):
    s = np.asarray(x, dtype=float) - 0.5
    t = np.asarray(y, dtype=float) - 0.5
    out = np.empty(s.shape + (2, 2))
    out[..., 0, 0] = 1.0 + s * s
    out[..., 0, 1] = out[..., 1, 0] = s * t
    out[..., 1, 1] = 1.0 + t * t
    return out


def _divA3(x, y):
    s = np.asarray(x, dtype=float) - 0.5
    t = np.asarray(y, dtype=float) - 0.5
    return np.stack([3.0 * s, 3.0 * t], axis=-1)


def example3():
    """Variable coefficients on the L-shape: A = I + v v^T with
    v = (x - 1/2, y - 1/2), phi = exp((x - 1/2)(y - 1/2))."""
    return ProblemDef(
        name="example3",
        domain=l_shape(),
        A=_A3,
        divA=_divA3,
        phi=lambda x, y: np.exp((np.asarray(x) - 0.5) * (np.asarray(y) - 0.5)),
        constant_A=False,
        reference_eigenvalues=(13.58258211870407,),
        reference_note="published high-accuracy approximation, not analytic",
        coarse_cells=32,
        description="variable-coefficient L-shape",
    )


def oracle_square():
    """Laplacian on the unit square; eigenvalues (m^2 + n^2) pi^2."""
    p2 = np.pi**2
    return ProblemDef(
        name="oracle_square",
        domain=square(0.0, 1.0),
        A=_identity(),
        reference_eigenvalues=(2 * p2, 5 * p2, 5 * p2, 8 * p2, 10 * p2),
        reference_note="analytic",
        coarse_cells=8,
        description="unit-square Laplacian",
    )


PROBLEMS = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "oracle_square": oracle_square,
}


def get_problem(name):
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
