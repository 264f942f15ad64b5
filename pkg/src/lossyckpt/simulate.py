"""Failure-injection harness: solvers under Poisson failures with a checkpoint policy.

Simulated time is decoupled from wall clock: per-iteration cost, checkpoint
and recovery durations are injected (or derived from payload size over a
configured bandwidth), so hour-scale failure regimes run in milliseconds.
Two workload kinds share one event loop:

* real solvers (jacobi/cg/gmres on a generated problem), where recoveries go
  through the checkpoint layer and lossy perturbations genuinely delay
  convergence, and
* a synthetic workload that converges after a known iteration count, with an
  optional forced per-recovery delay, used to validate the analytic models at
  production-like parameter scales.

Failures can arrive at any simulated instant. By default they may also strike
during checkpointing (voiding the in-flight image) and during recovery
(restarting it); `failures_during_ckpt=False` makes those activities atomic,
deferring the strike until productive work resumes. Every time increment is
attributed to exactly one bucket (productive work, checkpointing, recovery,
or destroyed work), so each trial satisfies
total_time = productive + ckpt + recovery + rollback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import checkpoint as ckpt
from . import solvers
from .compressor import CompressorConfig
from .errors import ParameterError
from .sparse import generate_poisson1d, generate_poisson2d, jacobi_preconditioner

_POLICIES = ("traditional", "lossy", "none")


@dataclass(frozen=True)
class FailureProcess:
    """Poisson failures: i.i.d. exponential inter-arrival times with rate lam."""

    lam: float
    rng_seed: int

    def __post_init__(self):
        if self.lam < 0:
            raise ParameterError("failure rate must be non-negative")

    def arrivals(self):
        rng = np.random.default_rng(self.rng_seed)
        scale = 1.0 / self.lam if self.lam > 0 else math.inf

        def draw() -> float:
            return float(rng.exponential(scale)) if self.lam > 0 else math.inf

        return draw


@dataclass(frozen=True)
class SimConfig:
    """One fully reproducible simulation setup (same config + seed => same outputs)."""

    method: str = "synthetic"              # jacobi | cg | gmres | synthetic
    problem: str = "synthetic:1000"        # synthetic:N | poisson2d:M | poisson1d:N
    policy: str = "traditional"            # traditional | lossy | none
    ckpt_intvl: int = 100
    t_it: float = 1.0
    lam: float = 0.0
    seed: int = 0
    trials: int = 1
    max_time: float = math.inf
    tolerance: float = 1e-8
    max_iterations: int = 200_000
    restart_len: Optional[int] = None      # None: restart exactly at checkpoint boundaries
    compressor_config: Optional[CompressorConfig] = None
    t_ckpt: Optional[float] = None         # injected checkpoint duration
    t_rc: Optional[float] = None           # injected recovery duration (default: t_ckpt)
    t_comp: float = 0.0                    # injected compression time (real lossy mode)
    t_decomp: float = 0.0                  # injected decompression time (real lossy mode)
    write_bandwidth: Optional[float] = None
    read_bandwidth: Optional[float] = None
    forced_n_prime: Optional[float] = None  # synthetic: extra iterations per lossy recovery
    failures_during_ckpt: bool = True

    def __post_init__(self):
        if self.method not in ("synthetic",) + solvers.METHOD_NAMES:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.policy not in _POLICIES:
            raise ParameterError(f"unknown policy {self.policy!r}")
        if self.trials < 1 or self.ckpt_intvl < 1 or self.t_it <= 0 or self.lam < 0:
            raise ParameterError("trials, ckpt_intvl must be >= 1; t_it > 0; lam >= 0")
        if self.is_synthetic:
            if not self.problem.startswith("synthetic:"):
                raise ParameterError("synthetic method needs a synthetic:N problem")
            if self.policy != "none" and self.t_ckpt is None:
                raise ParameterError("synthetic runs need an injected t_ckpt")
        else:
            if self.problem.startswith("synthetic:"):
                raise ParameterError(f"method {self.method!r} cannot run a synthetic problem")
            if self.policy == "lossy" and self.compressor_config is None:
                raise ParameterError("real lossy policy needs a compressor_config")
            if self.forced_n_prime is not None:
                raise ParameterError("forced_n_prime applies to synthetic workloads only")

    @property
    def is_synthetic(self) -> bool:
        return self.method == "synthetic"

    @property
    def effective_restart_len(self) -> int:
        return self.ckpt_intvl if self.restart_len is None else self.restart_len

    @property
    def effective_t_rc(self) -> float:
        if self.t_rc is not None:
            return self.t_rc
        return self.t_ckpt if self.t_ckpt is not None else 0.0


@dataclass(frozen=True)
class TrialReport:
    """Exact bookkeeping of one trial in simulated time units."""

    seed: int
    converged: bool
    truncated: bool
    diverged: bool
    total_time: float
    productive_time: float
    ckpt_time: float
    rc_time: float
    rollback_time: float
    iterations_final: int
    iterations_executed: int
    n_failures: int
    n_checkpoints: int
    n_checkpoints_voided: int
    n_recoveries: int
    n_lossy_recoveries: int


def _build_problem(problem: str):
    kind, _, arg = problem.partition(":")
    try:
        size = int(arg)
    except ValueError:
        raise ParameterError(f"malformed problem spec {problem!r}") from None
    if kind == "poisson2d":
        a, b = generate_poisson2d(size)
    elif kind == "poisson1d":
        a = generate_poisson1d(size)
        b = np.ones(size)
    else:
        raise ParameterError(f"unknown problem kind {kind!r}")
    return a, jacobi_preconditioner(a), b


class _SyntheticImage:
    __slots__ = ("iteration",)

    def __init__(self, iteration: int):
        self.iteration = iteration


class _SyntheticWorkload:
    """Converges after a known iteration count; lossy recoveries push it out."""

    def __init__(self, config: SimConfig):
        self.base_n = int(config.problem.partition(":")[2])
        if self.base_n < 1:
            raise ParameterError("synthetic problem needs N >= 1")
        self.iteration = 0
        self.target = self.base_n
        self.diverged = False
        self._config = config

    @property
    def converged(self) -> bool:
        return self.iteration >= self.target

    def remaining(self) -> Optional[int]:
        return max(0, int(math.ceil(self.target - self.iteration)))

    def advance(self, n: int) -> int:
        self.iteration += int(n)
        return int(n)

    def capture(self, now: float = 0.0):
        return _SyntheticImage(self.iteration), float(self._config.t_ckpt)

    def recovery_cost(self, image) -> float:
        return self._config.effective_t_rc

    def restore(self, image) -> None:
        self.iteration = image.iteration
        if self._config.policy == "lossy" and self._config.forced_n_prime:
            self.target += self._config.forced_n_prime

    def reset(self) -> None:
        self.iteration = 0
        self.target = self.base_n


class _SolverWorkload:
    """A real iterative solver driven through the checkpoint layer."""

    def __init__(self, config: SimConfig):
        self.a, self.m, self.b = _build_problem(config.problem)
        self.solve_config = solvers.SolveConfig(
            tolerance=config.tolerance, max_iterations=config.max_iterations,
            restart_len=config.effective_restart_len, ckpt_intvl=config.ckpt_intvl)
        self._config = config
        self.store = ckpt.StorageTarget(write_bandwidth=config.write_bandwidth,
                                        read_bandwidth=config.read_bandwidth)
        self.diverged = False
        self.solver = solvers.init(config.method, self.a, self.m, self.b,
                                   self.solve_config)

    @property
    def iteration(self) -> int:
        return self.solver.iteration

    @property
    def converged(self) -> bool:
        return self.solver.converged

    def remaining(self) -> Optional[int]:
        return None

    def advance(self, n: int) -> int:
        done = 0
        cap = self.solve_config.max_iterations
        while done < n and not self.solver.converged and self.solver.iteration < cap:
            self.solver.step()
            done += 1
        if not self.solver.converged and self.solver.iteration >= cap:
            self.diverged = True
        return done

    def capture(self, now: float = 0.0):
        if self._config.policy == "lossy":
            image, cost = ckpt.checkpoint_lossy(self.solver, self._config.compressor_config,
                                                self.store, created_at=now,
                                                t_comp_override=self._config.t_comp,
                                                commit=False)
        else:
            image, cost = ckpt.checkpoint_traditional(self.solver, self.store,
                                                      created_at=now, commit=False)
        duration = self._config.t_ckpt if self._config.t_ckpt is not None else cost.total
        return image, duration

    def recovery_cost(self, image) -> float:
        if self._config.t_rc is not None:
            return self._config.t_rc
        if image is None:
            return 0.0
        t_read = self.store.read_time(image.nbytes)
        t_dec = self._config.t_decomp if image.kind == ckpt.PAYLOAD_LOSSY else 0.0
        return t_read + t_dec

    def restore(self, image) -> None:
        self.solver, _ = ckpt.recover(image, self._config.method, self.a, self.m,
                                      self.b, self.solve_config, t_decomp_override=0.0)

    def reset(self) -> None:
        self.solver = solvers.init(self._config.method, self.a, self.m, self.b,
                                   self.solve_config)


def _make_workload(config: SimConfig):
    return _SyntheticWorkload(config) if config.is_synthetic else _SolverWorkload(config)


def run_trial(config: SimConfig, seed: int, workload=None) -> TrialReport:
    """One trial: iterate, checkpoint every ckpt_intvl iterations, inject failures.

    A caller may pass a freshly built workload (e.g. to inspect the final
    solver state afterwards); it must not be reused across trials.
    """
    if workload is None:
        workload = _make_workload(config)
    draw = FailureProcess(config.lam, seed).arrivals()
    k = config.ckpt_intvl
    interruptible = config.failures_during_ckpt and config.lam > 0

    t = 0.0
    next_fail = draw()
    ckpt_time = rc_time = fragments = 0.0
    executed = 0
    n_failures = n_ckpts = n_voided = n_recoveries = n_lossy = 0
    last_image = None
    last_ckpt_iter = -1
    pending_failure = False
    truncated = False

    while True:
        if workload.converged or workload.diverged:
            break
        if t >= config.max_time:
            truncated = True
            break

        if pending_failure:
            pending_failure = False
            n_failures += 1
            next_fail = t + draw()
            while True:  # recovery, possibly struck by further failures
                cost = workload.recovery_cost(last_image)
                if interruptible and next_fail < t + cost:
                    rc_time += next_fail - t
                    t = next_fail
                    n_failures += 1
                    next_fail = t + draw()
                    if t >= config.max_time:
                        truncated = True
                        break
                    continue
                rc_time += cost
                t += cost
                if last_image is not None:
                    workload.restore(last_image)
                    if config.policy == "lossy":
                        n_lossy += 1
                else:
                    workload.reset()
                # the checkpoint branch re-fires at the recovered index (renewal
                # reading of the overhead model: checkpoints track total time)
                last_ckpt_iter = -1
                n_recoveries += 1
                break
            if truncated:
                break
            continue

        i = workload.iteration
        if config.policy != "none" and i > 0 and i % k == 0 and i != last_ckpt_iter:
            image, cost = workload.capture(t)
            if interruptible and next_fail < t + cost:
                ckpt_time += next_fail - t  # in-flight image is voided
                t = next_fail
                n_voided += 1
                pending_failure = True
                continue
            ckpt_time += cost
            t += cost
            last_image = image
            last_ckpt_iter = i
            n_ckpts += 1
            continue

        # productive work until the next checkpoint, convergence, or failure
        if config.lam > 0:
            headroom = (next_fail - t) / config.t_it
            if headroom < 1.0:
                frag = max(0.0, next_fail - t)
                fragments += frag
                t += frag
                pending_failure = True
                continue
            budget = int(headroom)
        else:
            budget = config.max_iterations + 1
        n = min(budget, (k - i % k) if config.policy != "none" else budget)
        rem = workload.remaining()
        if rem is not None:
            n = min(n, rem)
        done = workload.advance(n)
        executed += done
        t += done * config.t_it

    final_iter = workload.iteration
    productive = final_iter * config.t_it
    rollback = (executed - final_iter) * config.t_it + fragments
    return TrialReport(seed=seed, converged=bool(workload.converged),
                       truncated=truncated, diverged=bool(workload.diverged),
                       total_time=t, productive_time=productive, ckpt_time=ckpt_time,
                       rc_time=rc_time, rollback_time=rollback,
                       iterations_final=final_iter, iterations_executed=executed,
                       n_failures=n_failures, n_checkpoints=n_ckpts,
                       n_checkpoints_voided=n_voided, n_recoveries=n_recoveries,
                       n_lossy_recoveries=n_lossy)


def _mean_ci(values):
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return mean, std, 1.96 * std / math.sqrt(len(values))


@dataclass(frozen=True)
class SimReport:
    """Ensemble aggregate over independent trials (seeds seed+0 .. seed+trials-1)."""

    config: SimConfig
    baseline_iterations: Optional[int]
    baseline_converged: bool
    trials: tuple
    mean_total_time: float
    std_total_time: float
    ci95_total_time: float
    mean_overhead: float
    ci95_overhead: float
    mean_n_prime: float = math.nan
    all_converged: bool = True
    any_diverged: bool = False

    @property
    def n_trials(self) -> int:
        return len(self.trials)


def run_ensemble(config: SimConfig) -> SimReport:
    """Monte Carlo estimate of total time, overhead, and per-recovery iteration delay.

    The failure-free baseline iteration count is measured first with the same
    configuration at lam = 0 (checkpointing never perturbs the computation).
    """
    baseline = run_trial(replace(config, lam=0.0, trials=1), config.seed)
    base_n = baseline.iterations_final if baseline.converged else None

    trials = tuple(run_trial(config, config.seed + idx) for idx in range(config.trials))
    mean_t, std_t, ci_t = _mean_ci([tr.total_time for tr in trials])
    if base_n is not None:
        overheads = [tr.total_time - base_n * config.t_it for tr in trials]
        mean_o, _, ci_o = _mean_ci(overheads)
        per_rec = [(tr.iterations_final - base_n) / tr.n_recoveries
                   for tr in trials if tr.converged and tr.n_recoveries > 0]
        mean_np = float(np.mean(per_rec)) if per_rec else math.nan
    else:
        mean_o = ci_o = mean_np = math.nan
    return SimReport(config=config, baseline_iterations=base_n,
                     baseline_converged=baseline.converged, trials=trials,
                     mean_total_time=mean_t, std_total_time=std_t, ci95_total_time=ci_t,
                     mean_overhead=mean_o, ci95_overhead=ci_o, mean_n_prime=mean_np,
                     all_converged=all(tr.converged for tr in trials),
                     any_diverged=any(tr.diverged for tr in trials))


@dataclass(frozen=True)
class NPrimeSample:
    inject_at: int
    recovered_from: int
    n_prime: Optional[int]
    converged: bool


@dataclass(frozen=True)
class NPrimeResult:
    baseline_n: int
    samples: tuple

    def values(self) -> np.ndarray:
        return np.array([s.n_prime if s.n_prime is not None else np.nan
                         for s in self.samples], dtype=np.float64)


def measure_n_prime(method: str, a, m, b, solve_config: solvers.SolveConfig,
                    comp_config: Optional[CompressorConfig],
                    injection_points, ckpt_intvl: Optional[int] = None) -> NPrimeResult:
    """Per-recovery extra iterations from single injected failures.

    For each injection iteration j, the solver runs to j with checkpoints every
    ckpt_intvl iterations, is struck once, recovers from the last image (or
    restarts from scratch if none exists), and runs to convergence. The sample
    is final_iterations - baseline_iterations, which cancels the rolled-back
    work and isolates the perturbation delay; with a bit-exact payload it is 0.
    comp_config None selects traditional (lossless) checkpoints.
    """
    k = solve_config.ckpt_intvl if ckpt_intvl is None else ckpt_intvl
    if k < 1:
        raise ParameterError("ckpt_intvl must be >= 1")
    baseline = solvers.solve_to_convergence(solvers.init(method, a, m, b, solve_config))
    if not baseline.converged:
        raise ParameterError("failure-free baseline did not converge; fix the setup first")
    base_n = baseline.iteration

    store = ckpt.StorageTarget()
    samples = []
    for j in injection_points:
        j = int(j)
        if not 0 < j < base_n:
            raise ParameterError(f"injection point {j} outside (0, baseline {base_n})")
        solver = solvers.init(method, a, m, b, solve_config)
        last_image = None
        while solver.iteration < j and not solver.converged:
            it = solver.iteration
            if it > 0 and it % k == 0:
                if comp_config is None:
                    last_image, _ = ckpt.checkpoint_traditional(solver, store)
                else:
                    last_image, _ = ckpt.checkpoint_lossy(solver, comp_config, store)
            solver.step()
        if last_image is not None:
            solver, _ = ckpt.recover(last_image, method, a, m, b, solve_config)
            recovered_from = last_image.iteration
        else:
            solver = solvers.init(method, a, m, b, solve_config)
            recovered_from = 0
        solvers.solve_to_convergence(solver)
        samples.append(NPrimeSample(
            inject_at=j, recovered_from=recovered_from,
            n_prime=solver.iteration - base_n if solver.converged else None,
            converged=solver.converged))
    return NPrimeResult(baseline_n=base_n, samples=tuple(samples))
