"""Synthetic smooth 1D fields for compressor evaluation.

Stand-ins for real simulation snapshots: sine mixtures, Gaussian bump
profiles, and actual solver iterates. All generators are seeded and
deterministic.
"""

from __future__ import annotations

import numpy as np

from . import solvers
from .errors import ParameterError
from .sparse import generate_poisson2d, jacobi_preconditioner


def sine_mixture(n: int, n_modes: int = 4, seed: int = 0, amplitude: float = 1.0) -> np.ndarray:
    """Sum of n_modes sines with random incommensurate frequencies and phases."""
    if n < 2 or n_modes < 1:
        raise ParameterError("need n >= 2 and n_modes >= 1")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n)
    out = np.zeros(n)
    for _ in range(n_modes):
        freq = rng.uniform(0.7, 24.0)
        amp = amplitude * rng.uniform(0.2, 1.0)
        out += amp * np.sin(2.0 * np.pi * freq * t + rng.uniform(0.0, 2.0 * np.pi))
    return out


def gaussian_bumps(n: int, n_bumps: int = 6, seed: int = 0,
                   background_amp: float = 0.15) -> np.ndarray:
    """Superposed Gaussian bumps over a low-amplitude sine floor (no dead-flat runs)."""
    if n < 2 or n_bumps < 1:
        raise ParameterError("need n >= 2 and n_bumps >= 1")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n)
    out = background_amp * np.sin(2.0 * np.pi * rng.uniform(1.0, 5.0) * t
                                  + rng.uniform(0.0, 2.0 * np.pi))
    for _ in range(n_bumps):
        center = rng.uniform(0.05, 0.95)
        width = rng.uniform(0.02, 0.15)
        height = rng.uniform(0.4, 1.5) * rng.choice([-1.0, 1.0])
        out += height * np.exp(-0.5 * ((t - center) / width) ** 2)
    return out


def solver_iterate(m: int = 16, method: str = "cg", at_iteration: int = 20,
                   restart_len: int = 10) -> np.ndarray:
    """The approximate solution of a 2D Poisson solve captured mid-run."""
    a, b = generate_poisson2d(m)
    prec = jacobi_preconditioner(a)
    cfg = solvers.SolveConfig(tolerance=1e-14, max_iterations=max(at_iteration + 1, 100),
                              restart_len=restart_len)
    state = solvers.init(method, a, prec, b, cfg)
    while state.iteration < at_iteration and not state.converged:
        state.step()
    return state.x.copy()


def smooth_field_corpus(n: int = 4096, seed: int = 0):
    """A labeled corpus of >= 20 smooth fields spanning all three generator kinds."""
    fields = []
    for i in range(9):
        fields.append((f"sine{i}", sine_mixture(n, n_modes=3 + i % 4, seed=seed + i)))
    for i in range(8):
        fields.append((f"bumps{i}", gaussian_bumps(n, n_bumps=4 + i % 5, seed=seed + 100 + i)))
    for i, (m, method, it) in enumerate([(16, "cg", 10), (16, "cg", 30), (24, "cg", 20),
                                         (32, "cg", 50), (16, "gmres", 15),
                                         (24, "gmres", 25), (20, "jacobi", 40)]):
        fields.append((f"iterate{i}_{method}{m}", solver_iterate(m, method, it)))
    return fields
