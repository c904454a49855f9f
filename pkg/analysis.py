"""
Reading equilibria: outcome labels, the reduced exploitation subsystem and its
conserved quantity, the exploitation-structure check, census confirmation of
exploitation labels and payoff-matrix predicates.
"""
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import ConvexHull

from config import DEFAULT_CYCLE_TOL, DEFAULT_DELTA, DEFAULT_EPSILON, DEFAULT_STRUCTURE_TOL
from dynamics import FIXED_POINT, Trajectory, WindowSummary, rk4_step
from equilibrium import DegenerateEquilibriumError, OutcomeDistribution
from game_model import InformationClass, PayoffMatrix, as_class
from logger_config import setup_logger, get_default_log_file

logger = setup_logger('analysis', get_default_log_file('analysis'))


class Outcome(str, Enum):
    MUTUAL_COOPERATION = 'mutual_cooperation'
    MUTUAL_DEFECTION = 'mutual_defection'
    ALTERNATING = 'alternating'
    EXPLOIT_BY_X = 'exploit_by_x'
    EXPLOIT_BY_Y = 'exploit_by_y'
    OTHER = 'other'

    def mirrored(self) -> 'Outcome':
        swap = {Outcome.EXPLOIT_BY_X: Outcome.EXPLOIT_BY_Y, Outcome.EXPLOIT_BY_Y: Outcome.EXPLOIT_BY_X}
        return swap.get(self, self)


OUTCOME_ORDER = [o.value for o in Outcome]
EXPLOIT_LABELS = (Outcome.EXPLOIT_BY_X.value, Outcome.EXPLOIT_BY_Y.value)


@dataclass(frozen=True)
class OutcomeLabel:
    label: Outcome
    distribution: OutcomeDistribution


def classify_outcomes(p: np.ndarray, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Vectorized labels for stacked distributions (..., 4); first matching rule wins."""
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 0.5), got {delta}")
    p = np.asarray(p, dtype=float)
    cc, cd, dc, dd = np.moveaxis(p, -1, 0)
    conditions = [
        cc > 1 - delta,
        dd > 1 - delta,
        (np.abs(cd - 0.5) < delta) & (np.abs(dc - 0.5) < delta),
        dc - cd > delta,
        cd - dc > delta,
    ]
    choices = [o.value for o in list(Outcome)[:5]]
    return np.select(conditions, choices, default=Outcome.OTHER.value)


def classify_outcome(p_avg: OutcomeDistribution, delta: float = DEFAULT_DELTA) -> OutcomeLabel:
    """
    Label a (time-averaged) outcome distribution.

    Args:
        p_avg (OutcomeDistribution): Distribution to label
        delta (float): Threshold in (0, 0.5)

    Returns:
        OutcomeLabel: Label plus the distribution it came from
    """
    label = classify_outcomes(p_avg.as_array()[np.newaxis], delta)[0]
    return OutcomeLabel(Outcome(str(label)), p_avg)


def is_submodular(pm: PayoffMatrix) -> bool:
    """T - R - P + S > 0."""
    return pm.T - pm.R - pm.P + pm.S > 0


def in_feasible_region(u, v, pm: PayoffMatrix, tol: float = 1e-6):
    """True where (u, v) lies in the convex hull of (R,R), (S,T), (T,S), (P,P)."""
    corners = np.array([[pm.R, pm.R], [pm.S, pm.T], [pm.T, pm.S], [pm.P, pm.P]])
    hull = ConvexHull(corners)
    points = np.stack(np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float)), axis=-1)
    slack = points @ hull.equations[:, :2].T + hull.equations[:, 2]
    inside = np.all(slack <= tol, axis=-1)
    return bool(inside) if inside.ndim == 0 else inside


# Reduced exploitation subsystem: x exploits with x2 = x4 = 0, y is exploited
# with y2 = 0, y3 = 1, leaving (x3, y4) free.

@dataclass(frozen=True)
class LVState:
    x3: float
    y4: float
    H: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.x3 < 1 and 0 < self.y4 < 1):
            raise ValueError(f"Reduced state must be interior, got x3={self.x3}, y4={self.y4}")

    @classmethod
    def at(cls, x3: float, y4: float, pm: PayoffMatrix) -> 'LVState':
        state = cls(x3, y4)
        return cls(state.x3, state.y4, float(_invariant(state.x3, state.y4, pm)))


class LVFixedPoint(NamedTuple):
    x3: float
    y4: float
    u: float
    v: float


def _lv_rates(x3, y4, pm: PayoffMatrix):
    denom = 1 + y4 - x3 + y4 * x3
    if np.any(np.asarray(denom) < 1e-12):
        raise DegenerateEquilibriumError("Reduced system denominator vanished")
    shared = y4 * (1 - x3) / denom ** 2
    dx3 = x3 * shared * ((pm.T - 2 * pm.P + pm.S) - (pm.T - pm.S) * y4)
    dy4 = (1 - y4) * shared * ((pm.T - pm.P) * x3 - (pm.P - pm.S))
    return dx3, dy4


def lv_velocity(s: LVState, pm: PayoffMatrix) -> Tuple[float, float]:
    """(dx3/dt, dy4/dt) of the reduced subsystem."""
    dx3, dy4 = _lv_rates(s.x3, s.y4, pm)
    return float(dx3), float(dy4)


def lv_fixed_point(pm: PayoffMatrix) -> LVFixedPoint:
    """
    Interior fixed point of the reduced subsystem and the payoffs there.

    Raises:
        ValueError: if T + S <= 2P, which puts the fixed point on the boundary
    """
    if not pm.T + pm.S > 2 * pm.P:
        raise ValueError(f"Fixed point is not interior for ({pm}): needs T+S > 2P")
    if not is_submodular(pm):
        logger.warning(f"Payoff ({pm}) is not submodular; the reduced fixed point exists but exploitation "
                       f"is not expected to emerge under mutual learning")
    x3 = (pm.P - pm.S) / (pm.T - pm.P)
    y4 = (pm.T - 2 * pm.P + pm.S) / (pm.T - pm.S)
    return LVFixedPoint(x3, y4, (pm.T + pm.S) / 2, pm.P)


def _invariant(x3, y4, pm: PayoffMatrix):
    return (-(pm.P - pm.S) * (np.log(x3) + 2 * np.log(1 - y4))
            + (pm.T - pm.P) * x3 - (pm.T - pm.S) * y4)


def lv_invariant(s: LVState, pm: PayoffMatrix) -> float:
    """Conserved quantity H of the reduced subsystem."""
    return float(_invariant(s.x3, s.y4, pm))


def integrate_lv(x3: float, y4: float, pm: PayoffMatrix, dt: float = 1e-3,
                 t_max: float = 100.0, stride: int = 100) -> pd.DataFrame:
    """
    RK4 orbit of the reduced subsystem.

    Returns:
        pd.DataFrame: time, x3, y4, H every ``stride`` steps (plus the last one)
    """
    start = LVState.at(x3, y4, pm)
    if dt <= 0 or t_max < dt:
        raise ValueError(f"Need 0 < dt <= t_max, got dt={dt}, t_max={t_max}")
    n_steps = int(round(t_max / dt))

    def field(t, s):
        return np.array(_lv_rates(s[0], s[1], pm))

    state = np.array([start.x3, start.y4])
    rows = [(0.0, state[0], state[1], start.H)]
    for k in range(1, n_steps + 1):
        state = rk4_step(field, (k - 1) * dt, state, dt)
        if not (0 < state[0] < 1 and 0 < state[1] < 1):
            raise DegenerateEquilibriumError(f"Reduced orbit left the unit square at t={k * dt:.6g}")
        if k % stride == 0 or k == n_steps:
            rows.append((k * dt, state[0], state[1], float(_invariant(state[0], state[1], pm))))
    return pd.DataFrame(rows, columns=['time', 'x3', 'y4', 'H'])


def lv_vector_field(pm: PayoffMatrix, n: int = 20, margin: float = 0.02) -> pd.DataFrame:
    """Velocities of the reduced subsystem on an n x n grid inside the unit square."""
    if n < 2:
        raise ValueError("Grid needs at least 2 points per axis")
    axis = np.linspace(margin, 1 - margin, n)
    x3, y4 = np.meshgrid(axis, axis, indexing='ij')
    dx3, dy4 = _lv_rates(x3, y4, pm)
    return pd.DataFrame({
        'x3': x3.ravel(), 'y4': y4.ravel(),
        'dx3': dx3.ravel(), 'dy4': dy4.ravel(),
        'H': _invariant(x3, y4, pm).ravel(),
    })


@dataclass(frozen=True)
class ExploitationCheck:
    holds: bool
    exploiter: Optional[str] = None
    reason: str = ''

    def __bool__(self):
        return self.holds


def _one_sided_structure(w: WindowSummary, attractor: Optional[str], exploiter_class: InformationClass,
                         exploited_class: InformationClass, tol: float, cycle_tol: float,
                         epsilon: float) -> Tuple[bool, str]:
    low, high = tol + epsilon, 1 - tol - epsilon
    x, y = w.x_mean, w.y_mean
    if not (x[1] < low and x[3] < low and y[1] < low and y[2] > high):
        return False, 'strategy components off the exploitation face'
    if attractor != FIXED_POINT and not (w.x_amplitude[2] > cycle_tol and w.y_amplitude[3] > cycle_tol):
        return False, 'x3 and y4 do not oscillate'
    # x1 / y1 are neutral unless tied to an oscillating component by the class
    if exploiter_class.block_index[0] != exploiter_class.block_index[2] and w.x_drift[0] > tol:
        return False, 'x1 drifts'
    if exploited_class.block_index[0] != exploited_class.block_index[3] and w.y_drift[0] > tol:
        return False, 'y1 drifts'
    if np.max(np.abs(w.p_mean - w.pattern_x)) > tol:
        return False, 'outcome distribution does not match the exploitation pattern'
    if not w.p_mean[2] > w.p_mean[1]:
        return False, 'exploiter does not defect more often'
    return True, ''


def exploitation_structure(summary: WindowSummary, attractor: Optional[str], class_x, class_y,
                           tol: float = DEFAULT_STRUCTURE_TOL, cycle_tol: float = DEFAULT_CYCLE_TOL,
                           epsilon: float = DEFAULT_EPSILON) -> ExploitationCheck:
    """Exploitation-structure test on one window summary, trying both seats."""
    class_x, class_y = as_class(class_x), as_class(class_y)
    holds, reason = _one_sided_structure(summary, attractor, class_x, class_y, tol, cycle_tol, epsilon)
    if holds:
        return ExploitationCheck(True, 'x')
    holds_y, reason_y = _one_sided_structure(summary.mirrored(), attractor, class_y, class_x,
                                             tol, cycle_tol, epsilon)
    if holds_y:
        return ExploitationCheck(True, 'y')
    return ExploitationCheck(False, None, f"x: {reason}; y: {reason_y}")


def check_exploitation_structure(traj: Trajectory, tol: float = DEFAULT_STRUCTURE_TOL,
                                 cycle_tol: float = DEFAULT_CYCLE_TOL,
                                 epsilon: float = DEFAULT_EPSILON) -> ExploitationCheck:
    """
    Does the trailing window sit on the one-sided exploitation structure?

    The exploiter never cooperates after CD or DD, the exploited never
    cooperates after its own CD and always after its DC, the exploiter's x3 and
    the exploited's y4 oscillate (unless the run settled on a fixed point), and
    the averaged outcome distribution follows (0, y4*x3, y4, 1-x3).

    Args:
        traj (Trajectory): Integrated match carrying its window summary
        tol (float): Tolerance on components and on the pattern match

    Returns:
        ExploitationCheck: holds plus the exploiting seat ('x' or 'y')
    """
    if traj.window is None:
        raise ValueError("Trajectory has no window summary; integrate it with integrate_match")
    return exploitation_structure(traj.window, traj.attractor, traj.class_x, traj.class_y,
                                  tol, cycle_tol, epsilon)


def face_representable(exploiter_class, exploited_class) -> bool:
    """
    Can this pair of classes hold the exploitation structure at all?

    The exploiter needs x3 in a block apart from x2 and x4; the exploited needs
    y2, y3 and y4 in three different blocks.
    """
    a, b = as_class(exploiter_class).block_index, as_class(exploited_class).block_index
    return bool(a[2] != a[1] and a[2] != a[3] and len({b[1], b[2], b[3]}) == 3)


def confirm_exploitation(labels: np.ndarray, structure: Sequence[str], class_x, class_y) -> np.ndarray:
    """
    Census labels with unconfirmed exploitation turned into 'other'.

    An exploitation label survives when the structure check found that seat
    exploiting, or when the classes cannot represent the structure, in which
    case the outcome distribution is all there is to go on.

    Args:
        labels: Outcome labels from classify_outcomes
        structure: Per-sample exploiting seat from the structure check ('x', 'y' or '')
        class_x, class_y: Classes of the two seats

    Returns:
        np.ndarray: Confirmed labels
    """
    labels = np.asarray(labels, dtype=object).copy()
    structure = np.asarray(structure, dtype=object)
    for label, seat, exploiter, exploited in ((Outcome.EXPLOIT_BY_X.value, 'x', class_x, class_y),
                                              (Outcome.EXPLOIT_BY_Y.value, 'y', class_y, class_x)):
        if face_representable(exploiter, exploited):
            labels[(labels == label) & (structure != seat)] = Outcome.OTHER.value
    return labels.astype(str)
