"""
Coupled replicator learning between two information classes.

Each player climbs the gradient of its own stationary payoff,
    dx_n/dt = x_n (1 - x_n) (dp_e/dx_n . u),
and a class-constrained player moves each block by the sum of its members'
velocities. States are kept in class coordinates (one value per block) and
integrated with fixed-step RK4; after every step they are clipped to
[epsilon, 1 - epsilon].

Arrays carry any number of leading sample axes, so one call integrates a whole
chunk of an ensemble.
"""
from dataclasses import dataclass, fields, replace
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from config import (
    DEFAULT_CYCLE_TOL,
    DEFAULT_DRIFT_RATIO,
    DEFAULT_DT,
    DEFAULT_EPSILON,
    DEFAULT_FP_TOL,
    DEFAULT_NEUTRAL_TOL,
    DEFAULT_PIN_MARGIN,
    DEFAULT_STRIDE,
    DEFAULT_T_MAX,
    DEFAULT_WINDOW_FRACTION,
)
from equilibrium import OutcomeDistribution, exploitation_pattern, stationary_batch
from game_model import (
    OPPONENT_VIEW,
    STANDARD_PAYOFF,
    ClassLike,
    ClassStrategy,
    InformationClass,
    PayoffMatrix,
    StrategyLike,
    as_class,
    as_vector,
)
from gradients import equilibrium_jacobian
from logger_config import setup_logger, get_default_log_file

logger = setup_logger('dynamics', get_default_log_file('dynamics'))

MODES = ('mutual', 'one_sided')
FIXED_POINT = 'fixed_point'
LIMIT_CYCLE = 'limit_cycle'
UNDECIDED = 'undecided'


class IntegrationError(RuntimeError):
    """A step produced non-finite values."""


@dataclass(frozen=True)
class LearningConfig:
    """
    Settings of one learning run.

    ``window`` is the trailing-window length in time units; left as None it is
    10% of the horizon. In 'one_sided' mode the y player is frozen.

    A block counts as free for attractor detection unless the outcomes it
    conditions on carry less than ``neutral_tol`` stationary weight, or it sits
    within ``pin_margin`` of a boundary it is being pushed into.
    """
    class_x: InformationClass
    class_y: InformationClass
    payoff: PayoffMatrix = STANDARD_PAYOFF
    dt: float = DEFAULT_DT
    t_max: float = DEFAULT_T_MAX
    epsilon: float = DEFAULT_EPSILON
    mode: str = 'mutual'
    window: Optional[float] = None
    fp_tol: float = DEFAULT_FP_TOL
    cycle_tol: float = DEFAULT_CYCLE_TOL
    drift_ratio: float = DEFAULT_DRIFT_RATIO
    neutral_tol: float = DEFAULT_NEUTRAL_TOL
    pin_margin: float = DEFAULT_PIN_MARGIN
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        object.__setattr__(self, 'class_x', as_class(self.class_x))
        object.__setattr__(self, 'class_y', as_class(self.class_y))
        mode = str(self.mode).replace('-', '_')
        if mode == 'one_sided_x':
            mode = 'one_sided'
        if mode not in MODES:
            raise ValueError(f"mode must be 'mutual' or 'one_sided', got '{self.mode}'")
        object.__setattr__(self, 'mode', mode)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_max >= self.dt:
            raise ValueError(f"t_max must be at least one step, got t_max={self.t_max}, dt={self.dt}")
        if not 0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.neutral_tol < 0 or self.pin_margin < 0:
            raise ValueError(f"neutral_tol and pin_margin must be >= 0, got {self.neutral_tol}, {self.pin_margin}")
        window = DEFAULT_WINDOW_FRACTION * self.t_max if self.window is None else float(self.window)
        if not 0 < window < self.t_max:
            raise ValueError(f"window must lie in (0, t_max), got {window}")
        object.__setattr__(self, 'window', window)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_max / self.dt)))

    @property
    def window_steps(self) -> int:
        return max(1, int(round(self.window / self.dt)))

    def with_classes(self, class_x: ClassLike, class_y: ClassLike) -> 'LearningConfig':
        return replace(self, class_x=as_class(class_x), class_y=as_class(class_y))


@dataclass(frozen=True)
class WindowSummary:
    """
    Trailing-window statistics, per sample when arrays carry a leading axis.

    Strategy statistics are taken on the memory-one embedding so that component
    indices mean the same thing for every class.

    ``max_speed`` and the ``*_free`` masks only look at free blocks (see
    LearningConfig); a component is free if its block was free at any sample.
    """
    x_mean: np.ndarray
    y_mean: np.ndarray
    x_amplitude: np.ndarray
    y_amplitude: np.ndarray
    x_drift: np.ndarray
    y_drift: np.ndarray
    max_speed: np.ndarray
    x_free: np.ndarray
    y_free: np.ndarray
    p_mean: np.ndarray
    u_mean: np.ndarray
    v_mean: np.ndarray
    pattern_x: np.ndarray
    pattern_y: np.ndarray

    def row(self, i) -> 'WindowSummary':
        return WindowSummary(**{f.name: getattr(self, f.name)[i] for f in fields(self)})

    def mirrored(self) -> 'WindowSummary':
        """The same window with the seats exchanged."""
        return WindowSummary(
            x_mean=self.y_mean, y_mean=self.x_mean,
            x_amplitude=self.y_amplitude, y_amplitude=self.x_amplitude,
            x_drift=self.y_drift, y_drift=self.x_drift,
            max_speed=self.max_speed,
            x_free=self.y_free, y_free=self.x_free,
            p_mean=self.p_mean[..., OPPONENT_VIEW],
            u_mean=self.v_mean, v_mean=self.u_mean,
            pattern_x=self.pattern_y[..., OPPONENT_VIEW],
            pattern_y=self.pattern_x[..., OPPONENT_VIEW],
        )


@dataclass(frozen=True)
class Trajectory:
    """Sampled strategies (class coordinates) and payoffs of one match."""
    class_x: InformationClass
    class_y: InformationClass
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    attractor: Optional[str] = None
    p_window: Optional[OutcomeDistribution] = None
    window: Optional[WindowSummary] = None

    @property
    def final_x(self) -> ClassStrategy:
        return ClassStrategy(self.class_x, tuple(self.x[-1]))

    @property
    def final_y(self) -> ClassStrategy:
        return ClassStrategy(self.class_y, tuple(self.y[-1]))

    def column_names(self):
        xs = [f"x_{self.class_x.code}_{b}" for b in self.class_x.block_names()]
        ys = [f"y_{self.class_y.code}_{b}" for b in self.class_y.block_names()]
        return ['time'] + xs + ys + ['u', 'v']

    def to_frame(self) -> pd.DataFrame:
        data = np.column_stack([self.times, self.x, self.y, self.u, self.v])
        return pd.DataFrame(data, columns=self.column_names())


@dataclass
class EnsembleResult:
    """Terminal states and window statistics of a batch of matches."""
    final_x: np.ndarray
    final_y: np.ndarray
    summary: WindowSummary
    attractors: np.ndarray
    record_times: np.ndarray
    u_recorded: np.ndarray
    v_recorded: np.ndarray


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, state: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ds/dt = f(t, s)."""
    k1 = f(t, state)
    k2 = f(t + dt / 2, state + dt / 2 * k1)
    k3 = f(t + dt / 2, state + dt / 2 * k2)
    k4 = f(t + dt, state + dt * k3)
    return state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def memory_one_rates(x: np.ndarray, y: np.ndarray, u: np.ndarray,
                     learn_y: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Batched replicator velocities of two memory-one players; u is (R, S, T, P)."""
    p = stationary_batch(x, y)
    vx = x * (1 - x) * (u @ equilibrium_jacobian(x, y, p))
    if not learn_y:
        return vx, np.zeros_like(np.broadcast_to(y, vx.shape))
    vy = y * (1 - y) * (u @ equilibrium_jacobian(y, x, p[..., OPPONENT_VIEW]))
    return vx, vy


def memory_one_velocity(x: StrategyLike, y: StrategyLike, pm: PayoffMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """
    Learning velocities of two memory-one players.

    Args:
        x, y: Strategies, each in its own perspective
        pm (PayoffMatrix): Scores of the game

    Returns:
        tuple: (dx/dt, dy/dt), each a 4-vector
    """
    return memory_one_rates(as_vector(x), as_vector(y), pm.focal_vector)


def class_velocity(sx: ClassStrategy, sy: ClassStrategy, pm: PayoffMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Block velocities: each block moves by the sum of its members' memory-one velocities."""
    vx, vy = memory_one_velocity(sx.embed(), sy.embed(), pm)
    return vx @ sx.info_class.indicator, vy @ sy.info_class.indicator


def class_field(cfg: LearningConfig) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side on the packed state [x blocks | y blocks]."""
    cx, cy = cfg.class_x, cfg.class_y
    kx = cx.n_blocks
    u = cfg.payoff.focal_vector
    learn_y = cfg.mode == 'mutual'

    def field(t: float, state: np.ndarray) -> np.ndarray:
        x = state[..., :kx][..., cx.block_index]
        y = state[..., kx:][..., cy.block_index]
        vx, vy = memory_one_rates(x, y, u, learn_y)
        return np.concatenate([vx @ cx.indicator, vy @ cy.indicator], axis=-1)

    return field


def _pack(init_x, init_y, cfg: LearningConfig) -> np.ndarray:
    sx = np.asarray(init_x, dtype=float)
    sy = np.asarray(init_y, dtype=float)
    if sx.shape[-1] != cfg.class_x.n_blocks or sy.shape[-1] != cfg.class_y.n_blocks:
        raise ValueError(
            f"Initial strategies do not match classes {cfg.class_x.code}/{cfg.class_y.code}: "
            f"got {sx.shape[-1]} and {sy.shape[-1]} values"
        )
    if sx.shape[:-1] != sy.shape[:-1]:
        raise ValueError(f"Sample shapes differ: {sx.shape[:-1]} vs {sy.shape[:-1]}")
    return np.clip(np.concatenate([sx, sy], axis=-1), cfg.epsilon, 1 - cfg.epsilon)


def _march(state: np.ndarray, cfg: LearningConfig) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (step, state) after every clipped RK4 step."""
    field = class_field(cfg)
    lo, hi = cfg.epsilon, 1 - cfg.epsilon
    for k in range(1, cfg.n_steps + 1):
        state = rk4_step(field, (k - 1) * cfg.dt, state, cfg.dt)
        finite = np.isfinite(state).all(axis=-1)
        if not np.all(finite):
            bad = np.flatnonzero(~np.atleast_1d(finite)).tolist()
            raise IntegrationError(f"Non-finite state at t={k * cfg.dt:.6g} (samples {bad})")
        np.clip(state, lo, hi, out=state)
        yield k, state


class _WindowAccumulator:
    """Running trailing-window statistics fed one sampled state at a time."""

    def __init__(self, cfg: LearningConfig, t_end: float):
        self.cfg = cfg
        self.field = class_field(cfg)
        self.mid = t_end - cfg.window / 2
        self.kx = cfg.class_x.n_blocks
        self.count = 0
        self.halves = [[0, 0.0], [0, 0.0]]
        self.prev = None
        self.prev_t = None
        self.max_speed = 0.0
        self.free = None
        self.sums: Dict[str, np.ndarray] = {}
        self.lo = None
        self.hi = None

    def free_blocks(self, t: float, state: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Blocks with stationary weight that are not pressed against a boundary."""
        cfg = self.cfg
        weight = np.concatenate([p @ cfg.class_x.indicator,
                                 p[..., OPPONENT_VIEW] @ cfg.class_y.indicator], axis=-1)
        velocity = self.field(t, state)
        pinned = (((state - cfg.epsilon < cfg.pin_margin) & (velocity <= 0))
                  | ((1 - cfg.epsilon - state < cfg.pin_margin) & (velocity >= 0)))
        return (weight >= cfg.neutral_tol) & ~pinned

    def add(self, t: float, state: np.ndarray):
        cx, cy = self.cfg.class_x, self.cfg.class_y
        x = state[..., :self.kx][..., cx.block_index]
        y = state[..., self.kx:][..., cy.block_index]
        xy = np.concatenate([x, y], axis=-1)
        p = stationary_batch(x, y)
        pattern_x = exploitation_pattern(x[..., 2], y[..., 3])
        pattern_y = exploitation_pattern(y[..., 2], x[..., 3])[..., OPPONENT_VIEW]

        free = self.free_blocks(t, state, p)
        if self.prev is not None and t > self.prev_t:
            moved = np.where(free, np.abs(state - self.prev), 0.0)
            self.max_speed = np.maximum(self.max_speed, np.max(moved, axis=-1) / (t - self.prev_t))
        self.prev = state.copy()
        self.prev_t = t
        self.free = free if self.free is None else self.free | free

        self.lo = xy.copy() if self.lo is None else np.minimum(self.lo, xy)
        self.hi = xy.copy() if self.hi is None else np.maximum(self.hi, xy)
        for name, value in (('xy', xy), ('p', p), ('pattern_x', pattern_x), ('pattern_y', pattern_y)):
            self.sums[name] = self.sums.get(name, 0.0) + value
        half = self.halves[0 if t < self.mid else 1]
        half[0] += 1
        half[1] = half[1] + xy
        self.count += 1

    def summary(self) -> WindowSummary:
        if self.count == 0:
            raise ValueError("Trailing window holds no samples")
        n = self.count
        mean = self.sums['xy'] / n
        amplitude = self.hi - self.lo
        (n1, s1), (n2, s2) = self.halves
        if n1 and n2:
            drift = np.abs(s2 / n2 - s1 / n1)
        else:
            drift = np.full_like(mean, np.inf)
        p_mean = self.sums['p'] / n
        pm = self.cfg.payoff
        cx, cy = self.cfg.class_x, self.cfg.class_y
        return WindowSummary(
            x_mean=mean[..., :4], y_mean=mean[..., 4:],
            x_amplitude=amplitude[..., :4], y_amplitude=amplitude[..., 4:],
            x_drift=drift[..., :4], y_drift=drift[..., 4:],
            max_speed=np.broadcast_to(np.asarray(self.max_speed, dtype=float), mean.shape[:-1]).copy(),
            x_free=self.free[..., :self.kx][..., cx.block_index],
            y_free=self.free[..., self.kx:][..., cy.block_index],
            p_mean=p_mean,
            u_mean=p_mean @ pm.focal_vector,
            v_mean=p_mean @ pm.opponent_vector,
            pattern_x=self.sums['pattern_x'] / n,
            pattern_y=self.sums['pattern_y'] / n,
        )


def label_attractors(summary: WindowSummary, cfg: LearningConfig):
    """
    Attractor label per sample.

    Only free components count (see LearningConfig): outcomes with no stationary
    weight leave their components to drift, and clipped components sit still.

    fixed_point: no free component moved faster than fp_tol in the window.
    limit_cycle: some free component swings by more than cycle_tol, and every
    swinging one's half-window mean shift stays within drift_ratio of its swing.
    """
    amplitude = np.concatenate([summary.x_amplitude, summary.y_amplitude], axis=-1)
    drift = np.concatenate([summary.x_drift, summary.y_drift], axis=-1)
    free = np.concatenate([summary.x_free, summary.y_free], axis=-1)
    oscillating = (amplitude > cfg.cycle_tol) & free
    steady = np.all(~oscillating | (drift <= cfg.drift_ratio * amplitude), axis=-1)
    cycling = oscillating.any(axis=-1) & steady
    labels = np.where(summary.max_speed < cfg.fp_tol, FIXED_POINT,
                      np.where(cycling, LIMIT_CYCLE, UNDECIDED))
    return str(labels) if labels.ndim == 0 else labels


def summarize_window(times: np.ndarray, x: np.ndarray, y: np.ndarray, cfg: LearningConfig) -> WindowSummary:
    """Window statistics of recorded samples (class coordinates, time along axis 0)."""
    times = np.asarray(times, dtype=float)
    t_end = float(times[-1])
    acc = _WindowAccumulator(cfg, t_end)
    state = np.concatenate([np.asarray(x, dtype=float), np.asarray(y, dtype=float)], axis=-1)
    start = t_end - cfg.window - 1e-9 * max(1.0, t_end)
    for i in np.flatnonzero(times >= start):
        acc.add(float(times[i]), state[i])
    return acc.summary()


def detect_attractor(traj: Trajectory, cfg: LearningConfig) -> str:
    """Label the trailing window of a trajectory: fixed_point, limit_cycle or undecided."""
    if traj.times[-1] - traj.times[0] < cfg.window * (1 - 1e-9):
        raise ValueError(
            f"Trajectory spans {traj.times[-1] - traj.times[0]:g} time units, shorter than window {cfg.window:g}"
        )
    return label_attractors(summarize_window(traj.times, traj.x, traj.y, cfg), cfg)


def _payoffs(x: np.ndarray, y: np.ndarray, cfg: LearningConfig) -> Tuple[np.ndarray, np.ndarray]:
    p = stationary_batch(x[..., cfg.class_x.block_index], y[..., cfg.class_y.block_index])
    return p @ cfg.payoff.focal_vector, p @ cfg.payoff.opponent_vector


def _build_trajectory(times: np.ndarray, states: np.ndarray, cfg: LearningConfig) -> Trajectory:
    kx = cfg.class_x.n_blocks
    x, y = states[:, :kx], states[:, kx:]
    u, v = _payoffs(x, y, cfg)
    window = summarize_window(times, x, y, cfg)
    return Trajectory(
        class_x=cfg.class_x, class_y=cfg.class_y,
        times=times, x=x, y=y, u=u, v=v,
        attractor=label_attractors(window, cfg),
        p_window=OutcomeDistribution.from_array(window.p_mean),
        window=window,
    )


def _initial_values(init, info_class: InformationClass) -> np.ndarray:
    if isinstance(init, ClassStrategy):
        if init.info_class != info_class:
            raise ValueError(f"Initial strategy is in class {init.info_class.code}, expected {info_class.code}")
        return init.as_array()
    return np.asarray(init, dtype=float)


def integrate_match(init_x, init_y, cfg: LearningConfig) -> Trajectory:
    """
    Integrate one match with fixed-step RK4.

    Args:
        init_x, init_y: ClassStrategy (or block values) for each seat, clipped on entry
        cfg (LearningConfig): Classes, payoff and integration settings

    Returns:
        Trajectory: Samples every ``cfg.stride`` steps plus the final step, with the
        attractor label and the trailing-window outcome distribution

    Raises:
        IntegrationError: if a step leaves the finite range
    """
    state = _pack(_initial_values(init_x, cfg.class_x), _initial_values(init_y, cfg.class_y), cfg)
    if state.ndim != 1:
        raise ValueError("integrate_match takes a single pair of strategies; use integrate_ensemble for batches")
    logger.debug(f"Integrating {cfg.class_x.code} vs {cfg.class_y.code} ({cfg.mode}) for {cfg.n_steps} steps")

    times = [0.0]
    states = [state.copy()]
    for k, current in _march(state, cfg):
        if k % cfg.stride == 0 or k == cfg.n_steps:
            times.append(k * cfg.dt)
            states.append(current.copy())
    return _build_trajectory(np.array(times), np.array(states), cfg)


def integrate_ensemble(init_x: np.ndarray, init_y: np.ndarray, cfg: LearningConfig,
                       record_times: Optional[Sequence[float]] = None) -> EnsembleResult:
    """
    Integrate a batch of matches at once, keeping only window statistics.

    Args:
        init_x: (N, kx) initial block values for seat x
        init_y: (N, ky) initial block values for seat y
        cfg (LearningConfig): Shared settings
        record_times: Optional times at which both payoffs are stored for every sample

    Returns:
        EnsembleResult: Terminal states, per-sample window summary and labels
    """
    state = _pack(init_x, init_y, cfg)
    if state.ndim != 2:
        raise ValueError(f"Expected (samples, blocks) arrays, got shape {state.shape}")
    n_steps = cfg.n_steps
    kx = cfg.class_x.n_blocks
    window_start = n_steps - cfg.window_steps
    acc = _WindowAccumulator(cfg, n_steps * cfg.dt)

    times = np.array([] if record_times is None else sorted(record_times), dtype=float)
    record_steps = np.clip(np.round(times / cfg.dt).astype(int), 0, n_steps)
    u_rec = np.zeros((len(times), state.shape[0]))
    v_rec = np.zeros((len(times), state.shape[0]))

    def record(k, current):
        for i in np.flatnonzero(record_steps == k):
            u_rec[i], v_rec[i] = _payoffs(current[:, :kx], current[:, kx:], cfg)

    record(0, state)
    if window_start <= 0:
        acc.add(0.0, state)
    for k, current in _march(state, cfg):
        record(k, current)
        if k >= window_start and ((k - window_start) % cfg.stride == 0 or k == n_steps):
            acc.add(k * cfg.dt, current)
        state = current

    summary = acc.summary()
    return EnsembleResult(
        final_x=state[:, :kx].copy(),
        final_y=state[:, kx:].copy(),
        summary=summary,
        attractors=label_attractors(summary, cfg),
        record_times=times,
        u_recorded=u_rec,
        v_recorded=v_rec,
    )


def integrate_adaptive(init_x, init_y, cfg: LearningConfig, rtol: float = 1e-9,
                       atol: float = 1e-12, method: str = 'DOP853') -> Trajectory:
    """
    Cross-check of integrate_match with scipy's adaptive ``solve_ivp``.

    The field is evaluated on the clipped state and the output is clipped;
    samples land on the same grid as integrate_match.
    """
    state = _pack(_initial_values(init_x, cfg.class_x), _initial_values(init_y, cfg.class_y), cfg)
    field = class_field(cfg)
    lo, hi = cfg.epsilon, 1 - cfg.epsilon
    grid = np.arange(0, cfg.n_steps + 1, cfg.stride) * cfg.dt
    if grid[-1] < cfg.n_steps * cfg.dt:
        grid = np.append(grid, cfg.n_steps * cfg.dt)

    sol = solve_ivp(lambda t, s: field(t, np.clip(s, lo, hi)), (0.0, grid[-1]), state,
                    method=method, t_eval=grid, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"solve_ivp failed: {sol.message}")
    states = np.clip(sol.y.T, lo, hi)
    if not np.all(np.isfinite(states)):
        raise IntegrationError("solve_ivp returned non-finite states")
    return _build_trajectory(sol.t, states, cfg)
