"""Piecewise-affine minimization of the discrete energy on a cube with Dirichlet data.

Each cell of the uniform grid on (-S, S)^n is split into n! Kuhn simplices, so the
gradient of a nodal field is constant per simplex and the energy

    E(u) = sum_T |T| F(x_T, Du|_T)        (x_T = barycenter)

is evaluated without quadrature error.  Its gradient with respect to the nodal
values is assembled through sparse difference operators.
"""
from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, NonConvergence, NumericOverflow
from .integrand import FrozenIntegrand, Integrand, MollifierSpec, mollify, truncate

ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
ENERGY_RTOL = 1e-12
ENERGY_NOISE = 1e-14
PRECONDITIONERS = ("stiffness", "diagonal", "none")


class Grid:
    """Uniform nodes on [-S, S]^n with a Kuhn simplex decomposition."""

    def __init__(self, n: int, m: int, extent: float = 1.0):
        if n not in (2, 3):
            raise DomainError("grids are implemented for n = 2 and n = 3")
        if m < 3:
            raise DomainError("need at least 3 nodes per axis")
        if extent <= 0:
            raise DomainError("extent must be positive")
        self.n, self.m, self.extent = int(n), int(m), float(extent)
        self.h = 2.0 * self.extent / (m - 1)
        self.axis = np.linspace(-self.extent, self.extent, m)
        idx = np.indices((m,) * n).reshape(n, -1).T
        self.index = idx
        self.nodes = self.axis[idx]
        self.boundary = np.any((idx == 0) | (idx == m - 1), axis=1)
        self.interior = ~self.boundary
        self.strides = np.array([m ** (n - 1 - d) for d in range(n)])
        self._build_simplices()

    @property
    def num_nodes(self) -> int:
        return self.m ** self.n

    @property
    def shape(self):
        return (self.m,) * self.n

    def _build_simplices(self):
        n, m, h = self.n, self.m, self.h
        base = np.indices((m - 1,) * n).reshape(n, -1).T @ self.strides
        perms = list(itertools.permutations(range(n)))
        verts = []
        rows, cols, vals, dirs = [], [], [], []
        n_cells = base.size
        for k, perm in enumerate(perms):
            v = [base]
            for ax in perm:
                v.append(v[-1] + self.strides[ax])
            verts.append(np.stack(v, axis=1))
            simplex_ids = k * n_cells + np.arange(n_cells)
            for i, ax in enumerate(perm):
                for sign, node in ((1.0, v[i + 1]), (-1.0, v[i])):
                    rows.append(simplex_ids)
                    cols.append(node)
                    vals.append(np.full(n_cells, sign / h))
                    dirs.append(np.full(n_cells, ax))
        self.simplices = np.concatenate(verts, axis=0)
        ns = self.simplices.shape[0]
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        vals, dirs = np.concatenate(vals), np.concatenate(dirs)
        self.D = [
            sp.csr_matrix((vals[dirs == d], (rows[dirs == d], cols[dirs == d])), shape=(ns, self.num_nodes))
            for d in range(n)
        ]
        self.volume = h ** n / math.factorial(n)
        self.barycenters = self.nodes[self.simplices].mean(axis=1)
        inc_rows = np.repeat(np.arange(ns), n + 1)
        inc = sp.csr_matrix((np.ones(ns * (n + 1)), (self.simplices.ravel(), inc_rows)),
                            shape=(self.num_nodes, ns))
        counts = np.asarray(inc.sum(axis=1)).ravel()
        self.averaging = sp.diags(1.0 / counts) @ inc

    @property
    def num_simplices(self) -> int:
        return self.simplices.shape[0]

    def gradients(self, u) -> np.ndarray:
        """Per-simplex gradients, shape (num_simplices, n)."""
        u = np.asarray(u, dtype=float).ravel()
        return np.stack([D @ u for D in self.D], axis=1)

    def divergence(self, flux) -> np.ndarray:
        """Transpose of ``gradients``: sum_d D_d^T flux[:, d]."""
        return sum(self.D[d].T @ flux[:, d] for d in range(self.n))

    def stiffness(self, weight) -> sp.csr_matrix:
        """sum_d D_d^T diag(|T| weight) D_d."""
        W = sp.diags(self.volume * np.asarray(weight, dtype=float))
        return sum((self.D[d].T @ W @ self.D[d]) for d in range(self.n)).tocsr()

    def in_ball(self, points, radius: float, center=None) -> np.ndarray:
        c = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        return np.linalg.norm(points - c, axis=1) < radius


@dataclass
class GridField:
    """Nodal values on a grid plus the convergence state of the solve that produced them."""

    grid: Grid
    values: np.ndarray
    converged: bool = True
    grad_sup: float = 0.0
    tol: float = math.inf

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel().copy()
        if self.values.size != self.grid.num_nodes:
            raise DomainError("field size does not match the grid")

    def gradients(self) -> np.ndarray:
        return self.grid.gradients(self.values)

    def nodal_gradient(self) -> np.ndarray:
        """Average of the gradients of the simplices touching each node."""
        return self.grid.averaging @ self.gradients()

    def nodal_hessian(self) -> np.ndarray:
        """Central differences of the averaged nodal gradients, shape (num_nodes, n, n)."""
        g = self.grid
        ng = self.nodal_gradient().reshape(g.shape + (g.n,))
        H = np.empty(g.shape + (g.n, g.n))
        for i in range(g.n):
            for j in range(g.n):
                H[..., i, j] = np.gradient(ng[..., i], g.h, axis=j)
        return H.reshape(-1, g.n, g.n)


# ----------------------------------------------------------------------------- boundary data


@dataclass(frozen=True)
class BoundaryData:
    """A closed-form function whose trace on the cube boundary is imposed."""

    name: str
    g: Callable

    def __call__(self, x):
        return self.g(np.atleast_2d(x))


def boundary_data(name: str, n: int, slope: Optional[Sequence[float]] = None) -> BoundaryData:
    """Catalog: ``linear`` (b.x), ``harmonic`` (x1 x2), ``bump`` and ``expsin`` (e^x1 sin x2)."""
    if name == "linear":
        b = np.asarray(slope if slope is not None else [1.0] + [0.5] * (n - 1), dtype=float)
        if b.size != n:
            raise DomainError("slope must have n components")
        return BoundaryData("linear", lambda x: x @ b)
    if name == "harmonic":
        return BoundaryData("harmonic", lambda x: x[:, 0] * x[:, 1])
    if name == "bump":
        return BoundaryData(
            "bump", lambda x: np.exp(-np.sum(x * x, axis=1)) * (1.0 + 0.5 * np.sin(math.pi * x[:, 0]))
        )
    if name == "expsin":
        return BoundaryData("expsin", lambda x: np.exp(x[:, 0]) * np.sin(x[:, 1]))
    raise DomainError(f"unknown boundary data {name!r}")


def interpolated_extension(grid: Grid, bd: BoundaryData) -> np.ndarray:
    """Average over axes of the linear interpolation between opposite faces.

    Exact for multilinear data such as b.x and x1 x2.
    """
    x, S = grid.nodes, grid.extent
    u = np.zeros(grid.num_nodes)
    for d in range(grid.n):
        lo, hi = x.copy(), x.copy()
        lo[:, d], hi[:, d] = -S, S
        u += ((S - x[:, d]) * bd(lo) + (S + x[:, d]) * bd(hi)) / (2 * S)
    u /= grid.n
    u[grid.boundary] = bd(x[grid.boundary])
    return u


def harmonic_extension(grid: Grid, bd: BoundaryData) -> np.ndarray:
    """Discrete harmonic extension of the boundary values."""
    u = np.zeros(grid.num_nodes)
    u[grid.boundary] = bd(grid.nodes[grid.boundary])
    return _weighted_solve(grid, np.ones(grid.num_simplices), u)


def _weighted_solve(grid: Grid, weight, u):
    K = grid.stiffness(weight)
    I, B = grid.interior, grid.boundary
    rhs = -(K[I][:, B] @ u[B])
    out = u.copy()
    out[I] = spla.spsolve(K[I][:, I].tocsc(), rhs)
    return out


# ----------------------------------------------------------------------------- energy


def _frozen(grid: Grid, I) -> FrozenIntegrand:
    if isinstance(I, FrozenIntegrand):
        return I
    return I.at(grid.barycenters)


def assemble_energy(grid: Grid, I, u):
    """Discrete energy and its exact gradient (boundary entries zeroed)."""
    J = _frozen(grid, I)
    vals = u.values if isinstance(u, GridField) else np.asarray(u, dtype=float).ravel()
    F, Fxi = J.energy_density_and_grad(grid.gradients(vals))
    energy = grid.volume * float(np.sum(F))
    if not math.isfinite(energy):
        raise NumericOverflow("discrete energy is not finite")
    grad = grid.divergence(grid.volume * Fxi)
    grad[grid.boundary] = 0.0
    return energy, grad


def grad_sup(grid: Grid, grad) -> float:
    """Sup norm of the nodal energy gradient, scaled to a residual density."""
    return float(np.max(np.abs(grad[grid.interior]))) / grid.h ** grid.n if grid.interior.any() else 0.0


@dataclass
class SolveReport:
    energy: float
    iterations: int
    grad_sup: float
    converged: bool
    stop_reason: str
    energy_history: list = field(default_factory=list)
    k: Optional[float] = None
    eps: Optional[float] = None
    boundary_energy: Optional[float] = None
    compare_lhs: Optional[float] = None
    compare_rhs: Optional[float] = None
    V_Lp: Optional[float] = None
    V_sup: Optional[float] = None
    V_sup_inner: Optional[float] = None

    @property
    def comparison_holds(self) -> Optional[bool]:
        if self.compare_lhs is None:
            return None
        return self.compare_lhs <= self.compare_rhs * (1 + 1e-10) + 1e-12

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["comparison_holds"] = self.comparison_holds
        return d


def _direction(grid, J, Du, g, mode):
    I = grid.interior
    if mode == "none":
        return -g
    omega = J.secant(Du)
    finite = np.isfinite(omega)
    top = float(np.max(omega[finite])) if finite.any() else 1.0
    omega = np.where(finite, omega, 1e3 * top)
    omega = np.maximum(omega, 1e-10 * max(top, 1e-300))
    d = np.zeros_like(g)
    if mode == "diagonal":
        diag = grid.stiffness(omega).diagonal()
        d[I] = -g[I] / diag[I]
        return d
    K = grid.stiffness(omega)[I][:, I].tocsc()
    d[I] = -spla.spsolve(K, g[I])
    return d


def minimize(grid: Grid, I, bd: BoundaryData, tol: float = 1e-8, max_iter: int = 200,
             precondition: str = "stiffness", init: Union[str, np.ndarray] = "interp"):
    """Armijo-backtracked descent from a boundary-consistent initial guess.

    ``precondition`` selects the metric of the descent direction: ``stiffness``
    solves with the stiffness matrix weighted by the secant coefficient
    F_xi = omega(x, xi) xi, ``diagonal`` uses its diagonal, ``none`` is plain
    gradient descent.  Stops when the scaled gradient sup is <= tol or the
    relative energy decrease falls to 1e-12.  Raises ``NonConvergence`` (with the
    partial field and report attached) after ``max_iter`` iterations.
    """
    if precondition not in PRECONDITIONERS:
        raise DomainError(f"precondition must be one of {PRECONDITIONERS}")
    if not tol > 0:
        raise DomainError("tol must be positive")
    if isinstance(init, str):
        if init == "interp":
            u = interpolated_extension(grid, bd)
        elif init == "harmonic":
            u = harmonic_extension(grid, bd)
        else:
            raise DomainError(f"unknown init {init!r}")
    else:
        u = np.asarray(init, dtype=float).ravel().copy()
        u[grid.boundary] = bd(grid.nodes[grid.boundary])
    J = _frozen(grid, I)
    E, g = assemble_energy(grid, J, u)
    history = [E]
    gs = grad_sup(grid, g)
    it, reason = 0, "tolerance"
    while gs > tol:
        if it >= max_iter:
            report = SolveReport(E, it, gs, False, "max_iter", history)
            raise NonConvergence(
                f"no convergence after {max_iter} iterations (grad sup {gs:.3e})",
                field=GridField(grid, u, False, gs, tol), report=report,
            )
        Du = grid.gradients(u)
        d = _direction(grid, J, Du, g, precondition)
        slope = float(g @ d)
        if slope >= 0:
            d, slope = -g, -float(g @ g)
        t = 1.0
        noise = ENERGY_NOISE * max(abs(E), 1e-300)
        while True:
            trial = u + t * d
            E_new, g_new = assemble_energy(grid, J, trial)
            # energies closer than a few ulps cannot be ranked; accept those steps
            if E_new <= E + ARMIJO_SLOPE * t * slope or E_new - E <= noise:
                break
            t *= ARMIJO_SHRINK
            if t < 1e-20:
                E_new, g_new, trial = E, g, u
                break
        it += 1
        decrease = E - E_new
        gs_old = gs
        u, g = trial, g_new
        gs = grad_sup(grid, g)
        history.append(E_new)
        assert E_new <= E + noise, "energy increased along descent"
        E = E_new
        if gs > tol and (t < 1e-20 or (decrease <= ENERGY_RTOL * max(abs(E), 1e-300) and gs >= 0.5 * gs_old)):
            reason = "energy_stall"
            break
    report = SolveReport(E, it, gs, True, reason, history)
    return GridField(grid, u, True, gs, tol), report


# ----------------------------------------------------------------------------- ladder


def lower_constant(I: Integrand) -> float:
    """l0 with F >= l0 ((mu^2 + |xi|^2)^(p/2) - mu^p) for the catalog member."""
    return float(I.coeff.a_min) if I.kind == "K2" else 1.0


def v_measures(grid: Grid, field_: GridField, mu: float, p: float, inner_radius: Optional[float] = None):
    """(L^p norm, sup, sup over the inner ball) of V(Du) = (mu^2 + |Du|^2)^(1/2)."""
    Du = field_.gradients()
    V = np.sqrt(mu * mu + np.sum(Du * Du, axis=1))
    lp = (grid.volume * float(np.sum(V ** p))) ** (1.0 / p)
    r = 0.5 * grid.extent if inner_radius is None else inner_radius
    inside = grid.in_ball(grid.barycenters, r)
    return lp, float(V.max()), float(V[inside].max()) if inside.any() else 0.0


def solve_sequence(grid: Grid, I: Integrand, bd: BoundaryData, k_list: Sequence[float],
                   eps_list: Sequence[Optional[float]], tol: float = 1e-8, max_iter: int = 200,
                   precondition: str = "stiffness", M: Optional[MollifierSpec] = None):
    """Solve the truncated/mollified problems F_{eps,k} for every k and eps.

    Each report carries the energy comparison
    l0 * int (V(Dv)^p - mu^p) <= int F_{eps,k}(x, Du_bd)
    with u_bd the interpolated boundary extension; it follows from minimality.
    """
    k_list = list(k_list)
    eps_list = list(eps_list)
    if any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise DomainError("k_list must be increasing")
    live = [e for e in eps_list if e]
    if any(b >= a for a, b in zip(live, live[1:])):
        raise DomainError("eps_list must be decreasing")
    u_bd = interpolated_extension(grid, bd)
    p, mu = I.p, I.mu
    reports, fields = [], []
    warm: Union[str, np.ndarray] = "interp"
    for k in k_list:
        Ik = truncate(I, k)
        for eps in eps_list:
            Iek = mollify(Ik, eps, M, grid.extent) if eps else Ik
            J = Iek.at(grid.barycenters)
            fld, rep = minimize(grid, J, bd, tol, max_iter, precondition, warm)
            warm = fld.values
            rep.k, rep.eps = float(k), (float(eps) if eps else None)
            rep.boundary_energy, _ = assemble_energy(grid, J, u_bd)
            Du = fld.gradients()
            w = mu * mu + np.sum(Du * Du, axis=1)
            rep.compare_lhs = lower_constant(I) * grid.volume * float(np.sum(w ** (p / 2) - mu ** p))
            rep.compare_rhs = rep.boundary_energy
            rep.V_Lp, rep.V_sup, rep.V_sup_inner = v_measures(grid, fld, mu, p)
            reports.append(rep)
            fields.append(fld)
    return reports, fields


# ----------------------------------------------------------------------------- field IO


def write_field(path, fld: GridField) -> None:
    """ASCII header ``m n`` then row-major float64 nodal values."""
    with open(path, "wb") as fh:
        fh.write(f"{fld.grid.m} {fld.grid.n}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())


def read_field(path, extent: float = 1.0) -> GridField:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        m, n = int(header[0]), int(header[1])
        vals = np.frombuffer(fh.read(), dtype="<f8")
    return GridField(Grid(n, m, extent), vals)
