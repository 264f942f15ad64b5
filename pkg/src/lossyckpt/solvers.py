"""Jacobi, restarted preconditioned CG, and restarted GMRES(k) as resumable step machines.

Each solver object *is* its state: `iteration`, `x`, `residual_norm`,
`converged`, plus method-specific workspace. `step()` advances exactly one
iteration. Restarted methods periodically treat the current approximate
solution as a fresh initial guess, rebuilding all auxiliary vectors from x
alone; recovery after a failure uses the same rebuild, so a checkpoint taken
at a restart boundary resumes the uninterrupted trajectory bit for bit.

Convergence criterion: ||b - A x||_2 <= tolerance * ||b||_2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BreakdownError, DimensionMismatchError, ParameterError
from .sparse import DiagonalPreconditioner, SparseMatrixCsr, spmv


@dataclass(frozen=True)
class SolveConfig:
    """Iteration control shared by all methods.

    restart_len is the GMRES(k) cycle length and the restarted-CG period;
    ckpt_intvl is carried here so one config object fully determines a run,
    but only the checkpoint layer reads it.
    """

    tolerance: float = 1e-8
    max_iterations: int = 100_000
    restart_len: int = 30
    ckpt_intvl: int = 30

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ParameterError("tolerance must be positive")
        if self.max_iterations < 1 or self.restart_len < 1 or self.ckpt_intvl < 1:
            raise ParameterError("max_iterations, restart_len, ckpt_intvl must be >= 1")


class _SolverBase:
    method = "?"

    def __init__(self, a: SparseMatrixCsr, m: DiagonalPreconditioner, b,
                 config: SolveConfig, x=None, iteration: int = 0):
        b = np.ascontiguousarray(b, dtype=np.float64)
        if a.n_rows != a.n_cols:
            raise DimensionMismatchError("system matrix must be square")
        if a.n_rows != len(b):
            raise DimensionMismatchError("matrix and right-hand side sizes differ")
        if m.n != a.n_rows:
            raise DimensionMismatchError("preconditioner size differs from matrix")
        if x is None:
            x = np.zeros(a.n_rows)
        else:
            x = np.array(x, dtype=np.float64)
            if len(x) != a.n_rows:
                raise DimensionMismatchError("initial guess size differs from matrix")
        if iteration < 0:
            raise ParameterError("iteration index must be non-negative")
        self.a, self.m, self.b = a, m, b
        self.config = config
        self.x = x
        self.iteration = iteration
        self.norm_b = float(np.linalg.norm(b))
        self.residual_norm = np.inf
        self.converged = False
        self._rebuild()

    def _rebuild(self):
        raise NotImplementedError

    def _set_residual(self, value: float):
        if not np.isfinite(value):
            raise BreakdownError("residual norm is not finite", self.iteration)
        self.residual_norm = value
        self.converged = value <= self.config.tolerance * self.norm_b

    def _check_steppable(self):
        if self.converged:
            raise ParameterError("step() called on a converged solver")
        if self.iteration >= self.config.max_iterations:
            raise ParameterError("step() called at the iteration cap")

    def step(self):
        raise NotImplementedError


class JacobiSolver(_SolverBase):
    """Diagonal-splitting iteration x <- x + M^-1 (b - A x); M is normally diag(A).

    The whole state is (x, iteration): recovery from any iteration is exact.
    """

    method = "jacobi"

    def _rebuild(self):
        self._r = self.b - spmv(self.a, self.x)
        self._set_residual(float(np.linalg.norm(self._r)))

    def step(self):
        self._check_steppable()
        self.x = self.x + self.m.apply(self._r)
        self._r = self.b - spmv(self.a, self.x)
        self.iteration += 1
        self._set_residual(float(np.linalg.norm(self._r)))
        return self


class CgSolver(_SolverBase):
    """Preconditioned conjugate gradients, restarted every restart_len iterations.

    Workspace (r, z, p, rho) is rebuilt from x at restarts and after recovery:
    r = b - A x, z = M^-1 r, p = z, rho = r.z.
    """

    method = "cg"

    def _rebuild(self):
        self.r = self.b - spmv(self.a, self.x)
        self.z = self.m.apply(self.r)
        self.p = self.z.copy()
        self.rho = float(self.r @ self.z)
        self._fresh = True
        self._set_residual(float(np.linalg.norm(self.r)))

    def step(self):
        self._check_steppable()
        if (self.iteration > 0 and not self._fresh
                and self.iteration % self.config.restart_len == 0):
            self._rebuild()
        self._fresh = False
        q = spmv(self.a, self.p)
        pq = float(self.p @ q)
        if self.rho == 0.0 or pq == 0.0:
            raise BreakdownError("CG breakdown: zero curvature or zero rho", self.iteration)
        alpha = self.rho / pq
        self.x = self.x + alpha * self.p
        self.r = self.r - alpha * q
        self.z = self.m.apply(self.r)
        rho_new = float(self.r @ self.z)
        self.p = self.z + (rho_new / self.rho) * self.p
        self.rho = rho_new
        self.iteration += 1
        self._set_residual(float(np.linalg.norm(self.r)))
        return self


class GmresSolver(_SolverBase):
    """Restarted GMRES(k) with modified Gram-Schmidt and Givens rotations.

    Unpreconditioned: the Krylov basis starts from (b - A x)/||b - A x||.
    The residual norm is tracked by the rotation recurrence inside a cycle and
    recomputed from b - A x whenever the solution is formed (cycle end,
    early convergence, or happy breakdown).
    """

    method = "gmres"

    def _rebuild(self):
        k = self.config.restart_len
        n = self.a.n_rows
        self._x_base = self.x.copy()
        self._basis = np.zeros((k + 1, n))
        self._rmat = np.zeros((k + 1, k))
        self._givens = np.zeros((k, 2))
        self._g = np.zeros(k + 1)
        self._inner = 0
        self._cycle_closed = False
        r = self.b - spmv(self.a, self.x)
        beta = float(np.linalg.norm(r))
        self._set_residual(beta)
        if beta > 0.0:
            self._basis[0] = r / beta
            self._g[0] = beta
        else:
            self._cycle_closed = True

    @property
    def basis_size(self) -> int:
        """Number of Krylov vectors currently held (1 right after a rebuild)."""
        return self._inner + 1 if not self._cycle_closed else 0

    def _finalize_cycle(self):
        j = self._inner
        y = np.zeros(j)
        for row in range(j - 1, -1, -1):
            diag = self._rmat[row, row]
            if diag == 0.0:
                raise BreakdownError("GMRES breakdown: singular projected system",
                                     self.iteration)
            y[row] = (self._g[row] - self._rmat[row, row + 1:j] @ y[row + 1:]) / diag
        self.x = self._x_base + self._basis[:j].T @ y
        self._cycle_closed = True
        r = self.b - spmv(self.a, self.x)
        self._set_residual(float(np.linalg.norm(r)))

    def step(self):
        self._check_steppable()
        if self._cycle_closed:
            self._rebuild()
        j = self._inner
        w = spmv(self.a, self._basis[j])
        for i in range(j + 1):
            hij = float(self._basis[i] @ w)
            w = w - hij * self._basis[i]
            self._rmat[i, j] = hij
        hnext = float(np.linalg.norm(w))
        # fold previous rotations into the new column, then zero its subdiagonal
        for i in range(j):
            c, s = self._givens[i]
            hi, hk = self._rmat[i, j], self._rmat[i + 1, j]
            self._rmat[i, j] = c * hi + s * hk
            self._rmat[i + 1, j] = -s * hi + c * hk
        denom = float(np.hypot(self._rmat[j, j], hnext))
        if denom == 0.0:
            c, s = 1.0, 0.0
        else:
            c, s = self._rmat[j, j] / denom, hnext / denom
        self._givens[j] = (c, s)
        self._rmat[j, j] = denom
        self._g[j + 1] = -s * self._g[j]
        self._g[j] = c * self._g[j]
        res_est = abs(float(self._g[j + 1]))
        self.iteration += 1
        self._inner = j + 1
        happy = hnext == 0.0
        if not happy:
            self._basis[j + 1] = w / hnext
        if happy or self._inner == self.config.restart_len \
                or res_est <= self.config.tolerance * self.norm_b:
            self._finalize_cycle()
            if happy and not self.converged:
                raise BreakdownError("GMRES happy breakdown with nonzero residual",
                                     self.iteration)
        else:
            self._set_residual(res_est)
        return self


_METHODS = {cls.method: cls for cls in (JacobiSolver, CgSolver, GmresSolver)}
METHOD_NAMES = tuple(_METHODS)


def init(method: str, a, m, b, config: SolveConfig):
    """Fresh solver state with x0 = 0 and a fully built workspace."""
    if method not in _METHODS:
        raise ParameterError(f"unknown method {method!r}; expected one of {METHOD_NAMES}")
    return _METHODS[method](a, m, b, config)


def step(state):
    """Advance a solver state by one iteration (mutates and returns it)."""
    return state.step()


def rebuild_from_solution(method: str, a, m, b, x, iteration: int, config: SolveConfig):
    """Solver state reconstructed from a (possibly lossy) solution vector.

    The workspace is recomputed exactly from x, and the iteration counter is
    taken at face value; rebuild_from_solution(..., x=0, iteration=0) == init.
    """
    if method not in _METHODS:
        raise ParameterError(f"unknown method {method!r}; expected one of {METHOD_NAMES}")
    return _METHODS[method](a, m, b, config, x=x, iteration=iteration)


def solve_to_convergence(state, max_iterations=None):
    """Step until converged or the iteration cap; returns the state either way."""
    cap = state.config.max_iterations if max_iterations is None else max_iterations
    while not state.converged and state.iteration < cap:
        state.step()
    return state
