"""Genetic-algorithm calibration against an observed follower trajectory.

The whole GA population is simulated in one vectorised pass: parameter
fields become arrays of length ``population`` and the follower state is
advanced for all candidates at once behind the recorded leader.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import CALIBRATION_BOUNDS, ModelParams, acceleration, check_model
from ..simulation import COLLISION_GAP_FLOOR, DEFAULT_VEHICLE_LENGTH, advance
from .metrics import rmse, theils_u

MIN_DURATION = 10.0
FREE_PARAMS = {
    "idm": ("a", "b", "v0", "T", "s0"),
    "sigmoid_idm": ("a", "b", "v0", "T", "s0", "lam", "d_c"),
}


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class GASettings:
    """Real-coded GA knobs.

    Selection is a size-``tournament`` tournament, recombination is BLX-alpha
    applied with probability ``crossover_rate`` and mutation is per-gene
    Gaussian noise of ``mutation_scale`` times the box width with
    probability ``mutation_rate``. The ``elitism`` best individuals are
    copied unchanged. ``stall_generations`` stops early once the best
    fitness has not improved by more than ``tol`` for that many generations.
    With ``polish`` the GA winner is refined by a bounded least-squares
    search on the spacing residuals, kept only if it lowers the fitness.
    """

    population: int = 100
    generations: int = 500
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_scale: float = 0.05
    elitism: int = 2
    tournament: int = 3
    blx_alpha: float = 0.5
    stall_generations: int | None = None
    tol: float = 0.0
    polish: bool = True

    def __post_init__(self):
        if self.population < 2 or self.generations < 0:
            raise ValueError("population must be >= 2 and generations >= 0")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must lie in [0, population)")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.tournament < 1:
            raise ValueError("tournament size must be >= 1")


@dataclass(eq=False)
class CalibrationProblem:
    """Observed leader/follower pair plus the search set-up.

    Args:
        time: uniformly spaced sample times (s).
        leader_position: leader front-bumper position (m).
        leader_velocity: leader speed (m/s).
        follower_gap: observed net gap of the follower (m).
        follower_velocity: observed follower speed (m/s); only its first
            sample is needed to seed the simulation, the rest feeds the
            velocity RMSE report.
        model: ``"idm"`` or ``"sigmoid_idm"``.
        bounds: per-parameter (lo, hi); missing names use the default box.
        fixed: values of parameters that are not searched (default delta=4).
        free: names of the searched parameters (default: all of the model's).
    """

    time: np.ndarray
    leader_position: np.ndarray
    leader_velocity: np.ndarray
    follower_gap: np.ndarray
    follower_velocity: np.ndarray
    model: str = "sigmoid_idm"
    bounds: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=lambda: {"delta": 4.0})
    free: tuple | None = None
    ga: GASettings = field(default_factory=GASettings)
    seed: int | None = 0
    vehicle_length: float = DEFAULT_VEHICLE_LENGTH
    velocity_clamp: bool = True

    def __post_init__(self):
        check_model(self.model)
        arrays = [np.asarray(getattr(self, n), dtype=float) for n in
                  ("time", "leader_position", "leader_velocity", "follower_gap", "follower_velocity")]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("all series must be 1-D and equally long")
        self.time, self.leader_position, self.leader_velocity, self.follower_gap, self.follower_velocity = arrays
        steps = np.diff(self.time)
        if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-9):
            raise ValueError("time must be uniformly spaced")
        if self.time[-1] - self.time[0] < MIN_DURATION - 1e-9:
            raise ValueError(f"need at least {MIN_DURATION} s of data")
        if self.free is None:
            self.free = FREE_PARAMS[self.model]
        unknown = set(self.free) - set(ModelParams.names())
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)}")
        box = {**CALIBRATION_BOUNDS, **self.bounds}
        for n in self.free:
            lo, hi = box[n]
            if lo > hi:
                raise ValueError(f"empty bound for {n}: {lo} > {hi}")
        self.bounds = {n: tuple(map(float, box[n])) for n in self.free}

    @property
    def dt(self) -> float:
        return float(self.time[1] - self.time[0])

    def box(self):
        lo = np.array([self.bounds[n][0] for n in self.free])
        hi = np.array([self.bounds[n][1] for n in self.free])
        return lo, hi

    def build(self, genes: np.ndarray) -> ModelParams:
        """Parameters from a ``(n_free,)`` or ``(pop, n_free)`` gene array."""
        genes = np.asarray(genes, dtype=float)
        values = {n: genes[..., i] for i, n in enumerate(self.free)}
        shape = genes.shape[:-1]
        defaults = {"a": 1.0, "b": 1.0, "v0": 30.0, "T": 1.5, "s0": 2.0, "delta": 4.0, "lam": 0.0, "d_c": 0.0}
        for n in ModelParams.names():
            if n not in values:
                values[n] = np.full(shape, float(self.fixed.get(n, defaults[n])))
        if not shape:
            values = {n: float(v) for n, v in values.items()}
        return ModelParams(**values)


@dataclass
class FollowerRun:
    time: np.ndarray
    gap: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    collided_at: np.ndarray  # step of the first collision, -1 if none


def simulate_follower(problem: CalibrationProblem, params: ModelParams) -> FollowerRun:
    """Follower response to the recorded leader for one or many parameter sets.

    The follower starts at the observed initial gap and speed. A collision
    does not abort the run; it is recorded in ``collided_at`` and the law
    keeps being evaluated at a small positive gap.
    """
    shape = np.shape(params.a)
    n = problem.time.size
    dt = problem.dt
    ell = problem.vehicle_length
    x = np.full(shape, problem.leader_position[0] - ell - problem.follower_gap[0])
    v = np.full(shape, problem.follower_velocity[0])
    gaps = np.empty(shape + (n,))
    vels = np.empty_like(gaps)
    accs = np.empty_like(gaps)
    collided = np.full(shape, -1)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            gap = problem.leader_position[k] - x - ell
            new_hit = (gap <= 0) & (collided < 0)
            collided = np.where(new_hit, k, collided)
            a = acceleration(problem.model, np.maximum(gap, COLLISION_GAP_FLOOR), v,
                             problem.leader_velocity[k], params)
            gaps[..., k] = gap
            vels[..., k] = v
            if k < n - 1:
                x, v, a, _ = advance(x, v, a, dt, problem.velocity_clamp)
            accs[..., k] = a
    return FollowerRun(problem.time, gaps, vels, accs, collided)


def fitness(problem: CalibrationProblem, run: FollowerRun) -> np.ndarray:
    """Theil's U on spacing; collided runs score 1 + the fraction of steps lost."""
    n = problem.time.size
    ok = np.all(np.isfinite(run.gap), axis=-1) & np.all(np.isfinite(run.velocity), axis=-1)
    with np.errstate(invalid="ignore", over="ignore"):
        u = np.asarray(theils_u(problem.follower_gap, np.where(np.isfinite(run.gap), run.gap, 0.0)))
    lost = np.where(run.collided_at >= 0, (n - run.collided_at) / n, 0.0)
    u = np.where(run.collided_at >= 0, 1.0 + lost, u)
    return np.where(ok, u, 2.0)


def infeasible(fit) -> np.ndarray:
    return np.asarray(fit) >= 1.0


@dataclass
class CalibrationResult:
    params: ModelParams
    fitness: float
    history: np.ndarray
    rmse: dict
    generations: int
    evaluations: int
    seed: int | None
    run: FollowerRun

    def report(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "theils_u": self.fitness,
            "rmse": self.rmse,
            "generations": self.generations,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "history": [float(h) for h in self.history],
        }


def _finish(problem, genes, best_fit, history, gens, evals):
    params = problem.build(genes)
    run = simulate_follower(problem, params)
    errors = {
        "spacing": rmse(problem.follower_gap, run.gap),
        "velocity": rmse(problem.follower_velocity, run.velocity),
    }
    return CalibrationResult(params, float(best_fit), np.asarray(history), errors, gens, evals,
                             problem.seed, run)


def calibrate_ga(problem: CalibrationProblem, callback=None) -> CalibrationResult:
    """Minimise Theil's U of the spacing series over the bounded parameter box.

    Args:
        problem: data, bounds and GA settings.
        callback: optional ``callback(generation, genes, fitness)`` invoked
            after each population evaluation (generation 0 is the initial
            population).

    Returns:
        The best individual found, its fitness, per-generation best fitness
        (``history[0]`` is the initial population) and spacing/velocity RMSE.

    Raises:
        CalibrationError: if every individual of the initial population
            collides or diverges.
    """
    ga = problem.ga
    lo, hi = problem.box()
    span = hi - lo
    if np.all(span == 0):
        fit = fitness(problem, simulate_follower(problem, problem.build(lo)))
        return _finish(problem, lo, float(fit), [float(fit)], 0, 1)

    rng = np.random.default_rng(problem.seed)
    P, G = ga.population, lo.size

    def evaluate(genes):
        return fitness(problem, simulate_follower(problem, problem.build(genes)))

    pop = lo + rng.random((P, G)) * span
    fit = evaluate(pop)
    evals = P
    if np.all(infeasible(fit)):
        raise CalibrationError("every individual of the initial population is infeasible "
                               "(collision or divergence); check bounds and data")
    if callback:
        callback(0, pop.copy(), fit.copy())
    history = [float(fit.min())]
    stall = 0
    gen = 0
    for gen in range(1, ga.generations + 1):
        order = np.argsort(fit, kind="stable")
        elite = pop[order[:ga.elitism]]
        n_child = P - ga.elitism

        def pick(count):
            cand = rng.integers(0, P, size=(count, ga.tournament))
            return cand[np.arange(count), np.argmin(fit[cand], axis=1)]

        p1 = pop[pick(n_child)]
        p2 = pop[pick(n_child)]
        cmin, cmax = np.minimum(p1, p2), np.maximum(p1, p2)
        ext = ga.blx_alpha * (cmax - cmin)
        blend = cmin - ext + rng.random((n_child, G)) * (cmax - cmin + 2.0 * ext)
        do_cross = rng.random(n_child) < ga.crossover_rate
        children = np.where(do_cross[:, None], blend, p1)
        mutate = rng.random((n_child, G)) < ga.mutation_rate
        children = children + mutate * rng.normal(0.0, ga.mutation_scale * span, (n_child, G))
        children = np.clip(children, lo, hi)

        child_fit = evaluate(children)
        evals += n_child
        pop = np.vstack([elite, children])
        fit = np.concatenate([fit[order[:ga.elitism]], child_fit])
        if callback:
            callback(gen, pop.copy(), fit.copy())
        best = float(fit.min())
        stall = stall + 1 if history[-1] - best <= ga.tol else 0
        history.append(best)
        if ga.stall_generations is not None and stall >= ga.stall_generations:
            break
    i = int(np.argmin(fit))
    best_genes, best_fit = pop[i], float(fit[i])
    if ga.polish and best_fit < 1.0:
        best_genes, best_fit, extra = _polish(problem, best_genes, best_fit, lo, hi)
        evals += extra
    return _finish(problem, best_genes, best_fit, history, gen, evals)


def _polish(problem, genes, fit, lo, hi):
    from scipy.optimize import least_squares

    free = hi > lo
    if not np.any(free):
        return genes, fit, 0

    def full(x):
        g = genes.copy()
        g[free] = x
        return g

    def resid(x):
        run = simulate_follower(problem, problem.build(full(x)))
        if run.collided_at >= 0 or not np.all(np.isfinite(run.gap)):
            return np.full(problem.time.size, 1e3)
        return run.gap - problem.follower_gap

    res = least_squares(resid, genes[free], bounds=(lo[free], hi[free]), x_scale=(hi - lo)[free],
                        xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=400)
    cand = full(res.x)
    cand_fit = float(fitness(problem, simulate_follower(problem, problem.build(cand))))
    if cand_fit < fit:
        return cand, cand_fit, res.nfev
    return genes, fit, res.nfev


# --------------------------------------------------------------------------
# synthetic fixtures

def stop_and_go_leader(duration: float = 120.0, dt: float = 0.1, v_high: float = 12.0,
                       accel: float = 1.0, decel: float = 1.5, cruise: float = 10.0,
                       stop: float = 8.0, v_start: float = 0.0):
    """Deterministic stop-and-go speed profile with its integrated positions.

    The leader alternates stand-still, acceleration to ``v_high``, cruising
    and braking to a stop.

    Returns:
        (time, position, velocity) arrays on a uniform grid starting at 0.
    """
    time = np.arange(int(round(duration / dt)) + 1) * dt
    v = np.empty_like(time)
    cur, phase, left = v_start, "stop" if v_start == 0 else "cruise", stop
    for k in range(time.size):
        v[k] = cur
        if phase == "stop":
            left -= dt
            if left <= 0:
                phase = "acc"
        elif phase == "acc":
            cur = min(cur + accel * dt, v_high)
            if cur >= v_high:
                phase, left = "cruise", cruise
        elif phase == "cruise":
            left -= dt
            if left <= 0:
                phase = "dec"
        else:
            cur = max(cur - decel * dt, 0.0)
            if cur <= 0:
                phase, left = "stop", stop
    a = np.append(np.diff(v) / dt, 0.0)
    x = np.concatenate([[0.0], np.cumsum(v[:-1] * dt + 0.5 * a[:-1] * dt ** 2)])
    return time, x, v


def synthetic_problem(true_params: ModelParams, model: str = "sigmoid_idm", *, leader=None,
                      initial_gap: float = 5.0, initial_velocity: float = 0.0, **kwargs) -> CalibrationProblem:
    """A calibration problem whose observations come from ``true_params``."""
    time, x_lead, v_lead = leader if leader is not None else stop_and_go_leader()
    probe = CalibrationProblem(time, x_lead, v_lead, np.full(time.shape, initial_gap),
                               np.full(time.shape, initial_velocity), model=model, **kwargs)
    run = simulate_follower(probe, true_params)
    if np.any(run.collided_at >= 0):
        raise CalibrationError("ground-truth parameters collide with the leader")
    return CalibrationProblem(time, x_lead, v_lead, run.gap, run.velocity, model=model, **kwargs)
