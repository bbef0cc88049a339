"""Benchmark problems: two 2D semilinear PDEs on the unit square with
time-dependent Dirichlet data, plus the split linear test equation.

Both PDEs are discretized with second-order central differences on a
uniform interior grid, boundary values injected from the known analytic
solution at whatever time the right-hand side is evaluated.  The stiff
split part g is linear with a constant sparse Jacobian, so diagonally
implicit stage solves reduce to one sparse factorization per step size.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse

from .integrator import SemiDiscreteProblem


class ReferenceFailureError(RuntimeError):
    """Fine-step explicit reference integration went unstable."""


@dataclass
class Grid2D:
    """Uniform interior grid on the unit square, dx = dy = 1/n.

    Interior nodes (x_i, y_j) = (i/n, j/n) for i, j = 1..n-1, flattened
    row-major with i (the x index) varying slowest.
    """

    n: int

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("need n >= 4")
        self.dx = 1.0 / self.n
        self.coords = np.arange(1, self.n) / self.n
        X, Y = np.meshgrid(self.coords, self.coords, indexing="ij")
        self.X = X.ravel()
        self.Y = Y.ravel()

    @property
    def m(self) -> int:
        return (self.n - 1) ** 2

    def evaluate(self, fn, t: float) -> np.ndarray:
        """Flatten fn(t, x, y) over the interior nodes."""
        return np.asarray(fn(t, self.X, self.Y), dtype=float)

    def node_rows(self, field):
        """(i, j, x, y, value) tuples for CSV output."""
        field = np.asarray(field).ravel()
        if field.size != self.m:
            raise ValueError(f"field has {field.size} entries, grid has {self.m}")
        k = 0
        for i in range(1, self.n):
            for j in range(1, self.n):
                yield i, j, i * self.dx, j * self.dx, field[k]
                k += 1


def _second_difference(n: int) -> sparse.csr_matrix:
    m = n - 1
    return sparse.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)],
                        offsets=[-1, 0, 1], format="csr")


def five_point_laplacian(grid: Grid2D) -> sparse.csr_matrix:
    """Interior five-point Laplacian, Dirichlet terms excluded (see
    laplacian_boundary)."""
    m = grid.n - 1
    D2 = _second_difference(grid.n)
    I = sparse.identity(m, format="csr")
    return (sparse.kron(D2, I) + sparse.kron(I, D2)).tocsr() / grid.dx ** 2


def laplacian_boundary(grid: Grid2D, u_bc, t: float) -> np.ndarray:
    """Dirichlet contribution of the five-point stencil: for each interior
    node missing a neighbor, u_bc at that boundary node over dx^2."""
    n, dx, c = grid.n, grid.dx, grid.coords
    m = n - 1
    b = np.zeros((m, m))
    b[0, :] += u_bc(t, 0.0, c)
    b[-1, :] += u_bc(t, 1.0, c)
    b[:, 0] += u_bc(t, c, 0.0)
    b[:, -1] += u_bc(t, c, 1.0)
    return b.ravel() / dx ** 2


def _central_difference_x(grid: Grid2D):
    """Sparse d/dx on the flattened field plus the boundary closure, both
    second-order central."""
    m = grid.n - 1
    D1 = sparse.diags([-np.ones(m - 1), np.ones(m - 1)], offsets=[-1, 1], format="csr")
    I = sparse.identity(m, format="csr")
    Dx = sparse.kron(D1, I).tocsr() / (2.0 * grid.dx)
    Dy = sparse.kron(I, D1).tocsr() / (2.0 * grid.dx)
    return Dx, Dy


def convection_boundary(grid: Grid2D, w_bc, t: float) -> np.ndarray:
    """Boundary closure of the central-difference divergence of w: nodes
    one layer in pick up -w(left)/2dx or +w(right)/2dx per direction."""
    dx, c = grid.dx, grid.coords
    m = grid.n - 1
    b = np.zeros((m, m))
    b[0, :] -= w_bc(t, 0.0, c)
    b[-1, :] += w_bc(t, 1.0, c)
    b[:, 0] -= w_bc(t, c, 0.0)
    b[:, -1] += w_bc(t, c, 1.0)
    return b.ravel() / (2.0 * dx)


@dataclass
class PdeBenchmark:
    """A discretized PDE benchmark: grid, analytic solution, and the
    assembled split problem."""

    name: str
    grid: Grid2D
    exact_field: Callable[[float], np.ndarray]
    boundary_value: Callable       # u(t, x, y) on boundary segments
    stiff_operator: sparse.spmatrix
    problem: SemiDiscreteProblem


# ---------------------------------------------------------------------------
# Allen-Cahn with manufactured forcing

def _allen_cahn_fields(alpha: float, beta: float):
    def u(t, x, y):
        return 2.0 + np.sin(2 * np.pi * (x - t)) * np.cos(3 * np.pi * (y - t))

    def u_t(t, x, y):
        S = np.sin(2 * np.pi * (x - t))
        C = np.cos(2 * np.pi * (x - t))
        P = np.cos(3 * np.pi * (y - t))
        Q = np.sin(3 * np.pi * (y - t))
        return -2 * np.pi * C * P + 3 * np.pi * S * Q

    def lap_u(t, x, y):
        S = np.sin(2 * np.pi * (x - t))
        P = np.cos(3 * np.pi * (y - t))
        return -13.0 * np.pi ** 2 * S * P

    def source(t, x, y):
        uu = u(t, x, y)
        return u_t(t, x, y) - alpha * lap_u(t, x, y) - beta * (uu - uu ** 3)

    return u, source


def allen_cahn_problem(n: int = 40, alpha: float = 0.01, beta: float = 3.0,
                       t_final: float = 0.5) -> SemiDiscreteProblem:
    """Allen-Cahn equation u_t = alpha*Lap(u) + beta*(u - u^3) + s(t,x,y)
    on the unit square, forced so that
    u = 2 + sin(2pi(x-t))cos(3pi(y-t)) is the solution.  Diffusion is the
    stiff implicit part; reaction and forcing stay explicit.
    """
    return allen_cahn_benchmark(n, alpha, beta, t_final).problem


def allen_cahn_benchmark(n: int = 40, alpha: float = 0.01, beta: float = 3.0,
                         t_final: float = 0.5) -> PdeBenchmark:
    grid = Grid2D(n)
    u, source = _allen_cahn_fields(alpha, beta)
    L = five_point_laplacian(grid)
    aL = (alpha * L).tocsc()
    d = grid.m

    def g(t, v):
        return alpha * (L @ v + laplacian_boundary(grid, u, t))

    def f(t, v):
        return beta * (v - v ** 3) + grid.evaluate(source, t)

    prob = SemiDiscreteProblem(
        name=f"allen-cahn-n{n}", d=d, t0=0.0, tF=t_final,
        y0=grid.evaluate(u, 0.0),
        f=f, g=g, g_jacobian=lambda t, v: aL, g_is_linear=True,
        exact=lambda t: grid.evaluate(u, t),
        stiff_scale=alpha * 8.0 * n ** 2)
    return PdeBenchmark(name=prob.name, grid=grid,
                        exact_field=prob.exact, boundary_value=u,
                        stiff_operator=aL, problem=prob)


# ---------------------------------------------------------------------------
# 2D viscous Burgers with a traveling-front solution

def burgers_problem(n: int = 50, nu: float = 0.1,
                    t_final: float = 1.0) -> SemiDiscreteProblem:
    """Conservative-form 2D Burgers u_t + (u^2/2)_x + (u^2/2)_y = nu*Lap(u)
    with the exact traveling front u = 1/(1 + exp((x + y - t)/(2 nu))).
    Diffusion implicit, convection explicit via central differences.
    """
    return burgers_benchmark(n, nu, t_final).problem


def burgers_benchmark(n: int = 50, nu: float = 0.1,
                      t_final: float = 1.0) -> PdeBenchmark:
    grid = Grid2D(n)

    def u(t, x, y):
        return 1.0 / (1.0 + np.exp((x + y - t) / (2.0 * nu)))

    def w(t, x, y):          # w = u^2, the convected flux
        return u(t, x, y) ** 2

    L = five_point_laplacian(grid)
    nL = (nu * L).tocsc()
    Dx, Dy = _central_difference_x(grid)
    Dsum = (Dx + Dy).tocsr()
    d = grid.m

    def g(t, v):
        return nu * (L @ v + laplacian_boundary(grid, u, t))

    def f(t, v):
        return -0.5 * (Dsum @ (v ** 2) + convection_boundary(grid, w, t))

    prob = SemiDiscreteProblem(
        name=f"burgers-n{n}", d=d, t0=0.0, tF=t_final,
        y0=grid.evaluate(u, 0.0),
        f=f, g=g, g_jacobian=lambda t, v: nL, g_is_linear=True,
        exact=lambda t: grid.evaluate(u, t),
        stiff_scale=nu * 8.0 * n ** 2)
    return PdeBenchmark(name=prob.name, grid=grid,
                        exact_field=prob.exact, boundary_value=u,
                        stiff_operator=nL, problem=prob)


# ---------------------------------------------------------------------------
# split linear test equation

def dahlquist_split_problem(xi, xihat, y0=1.0, t_final: float = 1.0) -> SemiDiscreteProblem:
    """y' = xi*y + xihat*y with f = xi*y, g = xihat*y.  Complex parameters
    are carried in real form: z acts as the 2x2 block [[Re, -Im], [Im, Re]]
    on (Re y, Im y)."""
    xi, xihat = complex(xi), complex(xihat)
    y0 = complex(y0)
    if xi.imag == 0.0 and xihat.imag == 0.0 and y0.imag == 0.0:
        a, b = xi.real, xihat.real
        return SemiDiscreteProblem(
            name="dahlquist", d=1, t0=0.0, tF=t_final,
            y0=np.array([y0.real]),
            f=lambda t, y: a * y, g=lambda t, y: b * y,
            g_jacobian=lambda t, y: np.array([[b]]), g_is_linear=True,
            exact=lambda t: np.array([y0.real * np.exp((a + b) * t)]),
            stiff_scale=abs(b))

    def block(z):
        return np.array([[z.real, -z.imag], [z.imag, z.real]])

    Mf, Mg = block(xi), block(xihat)

    def exact(t):
        y = y0 * np.exp((xi + xihat) * t)
        return np.array([y.real, y.imag])

    return SemiDiscreteProblem(
        name="dahlquist-complex", d=2, t0=0.0, tF=t_final,
        y0=np.array([y0.real, y0.imag]),
        f=lambda t, y: Mf @ y, g=lambda t, y: Mg @ y,
        g_jacobian=lambda t, y: Mg, g_is_linear=True,
        exact=exact, stiff_scale=abs(xihat))


# ---------------------------------------------------------------------------
# norms, error fields, references

def l2_error(u, u_ref) -> float:
    """Euclidean norm of the difference (no grid weighting)."""
    u = np.asarray(u, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    if u.shape != u_ref.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {u_ref.shape}")
    return float(np.linalg.norm(u - u_ref))


def error_field(u, u_ref, grid: Grid2D) -> np.ndarray:
    """Per-node |u - u_ref| over the interior grid (flattened)."""
    u = np.asarray(u).ravel()
    u_ref = np.asarray(u_ref).ravel()
    if u.shape != u_ref.shape or u.size != grid.m:
        raise ValueError("field shapes do not match the grid")
    return np.abs(u - u_ref)


def write_field_csv(grid: Grid2D, field, path) -> None:
    with open(path, "w") as fh:
        fh.write("i,j,x,y,value\n")
        for i, j, x, y, v in grid.node_rows(field):
            fh.write(f"{i},{j},{x:.17g},{y:.17g},{v:.17g}\n")


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def reference_solution(prob: SemiDiscreteProblem, n_ref: int) -> np.ndarray:
    """Fine-step classical RK4 on the unsplit right-hand side.

    Explicit, so n_ref must clear the stiff stability bound; a safe choice
    is n_ref >= 4 * (tF - t0) * stiff_scale.  Blow-up past norm 1e12 raises
    with instructions to raise n_ref.
    """
    if prob.stiff_scale is not None:
        bound = 4.0 * (prob.tF - prob.t0) * prob.stiff_scale
        if n_ref < bound:
            warnings.warn(
                f"n_ref={n_ref} below the documented stability bound "
                f"{bound:.0f} for {prob.name}", RuntimeWarning, stacklevel=2)
    h = (prob.tF - prob.t0) / n_ref
    y = prob.y0.copy()
    t = prob.t0
    check_every = max(1, n_ref // 64)
    for k in range(n_ref):
        y = _rk4_step(prob.rhs, t, y, h)
        t = prob.t0 + (k + 1) * h
        if k % check_every == 0 and not (np.isfinite(y).all()
                                         and np.linalg.norm(y) < 1e12):
            raise ReferenceFailureError(
                f"reference RK4 unstable on {prob.name} at t={t:.4g} "
                f"with n_ref={n_ref}; increase n_ref")
    if not np.isfinite(y).all() or np.linalg.norm(y) >= 1e12:
        raise ReferenceFailureError(
            f"reference RK4 unstable on {prob.name}; increase n_ref")
    return y


DEFAULT_REFERENCE_STEPS = {"allen-cahn": 5000, "burgers": 20000, "dahlquist": 10000}
