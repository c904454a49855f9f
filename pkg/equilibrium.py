"""
Stationary state of the repeated game between two fixed memory-one strategies.

The batched helpers (``transition_matrices``, ``stationary_batch``) take arrays
whose last axis holds the four strategy components and are what the learning ODE
calls; the single-pair operations wrap them for strategy objects.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from game_model import OPPONENT_VIEW, PayoffMatrix, StrategyLike, as_vector
from logger_config import setup_logger, get_default_log_file

logger = setup_logger('equilibrium', get_default_log_file('equilibrium'))

NORMALIZER_TOL = 1e-12
POWER_TOL = 1e-13
POWER_MAX_ITER = 10 ** 6


class DegenerateEquilibriumError(ValueError):
    """The stationary state is not unique or cannot be normalized."""


class ConvergenceError(RuntimeError):
    """Power iteration did not reach its tolerance."""


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities of CC, CD, DC, DD (focal perspective)."""
    p_CC: float
    p_CD: float
    p_DC: float
    p_DD: float

    def __post_init__(self):
        values = [float(getattr(self, n)) for n in ('p_CC', 'p_CD', 'p_DC', 'p_DD')]
        if min(values) < -NORMALIZER_TOL:
            raise ValueError(f"Negative outcome probability in {values}")
        if abs(sum(values) - 1.0) > 1e-12:
            raise ValueError(f"Outcome probabilities sum to {sum(values)}, not 1")
        for name, v in zip(('p_CC', 'p_CD', 'p_DC', 'p_DD'), values):
            object.__setattr__(self, name, max(v, 0.0))

    @classmethod
    def from_array(cls, values) -> 'OutcomeDistribution':
        """Clamp rounding-level negatives and renormalize before validating."""
        arr = np.asarray(values, dtype=float).copy()
        arr[(arr < 0) & (arr > -NORMALIZER_TOL)] = 0.0
        total = arr.sum()
        if total <= 0:
            raise ValueError(f"Cannot normalize outcome weights {arr.tolist()}")
        return cls(*(arr / total))

    def as_array(self) -> np.ndarray:
        return np.array([self.p_CC, self.p_CD, self.p_DC, self.p_DD])

    def swapped(self) -> 'OutcomeDistribution':
        """The same state seen from the opponent's seat (CD and DC exchanged)."""
        return OutcomeDistribution(self.p_CC, self.p_DC, self.p_CD, self.p_DD)


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic M: column = previous outcome, row = next outcome."""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (4, 4):
            raise ValueError(f"Transition matrix must be 4x4, got {values.shape}")
        if np.any(values < -1e-15) or np.any(values > 1 + 1e-15):
            raise ValueError("Transition matrix entries must lie in [0,1]")
        if not np.allclose(values.sum(axis=0), 1.0, atol=1e-12):
            raise ValueError("Transition matrix columns must sum to 1")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)


def transition_matrices(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Batched transition matrices.

    Args:
        x: (..., 4) focal strategies
        y: (..., 4) opponent strategies, each in its own perspective

    Returns:
        np.ndarray: (..., 4, 4) matrices
    """
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)[..., OPPONENT_VIEW]
    return np.stack([a * b, a * (1 - b), (1 - a) * b, (1 - a) * (1 - b)], axis=-2)


def closed_form_terms(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Unnormalized stationary weights of the closed-form solution, shape (..., 4)."""
    x1, x2, x3, x4 = np.moveaxis(np.asarray(x, dtype=float), -1, 0)
    y1, y2, y3, y4 = np.moveaxis(np.asarray(y, dtype=float), -1, 0)
    cc = (x4 + (x3 - x4) * y2) * (y4 + (y3 - y4) * x2) - x3 * y3 * (x2 - x4) * (y2 - y4)
    cd = (x4 + (x3 - x4) * y4) * (1 - y2 - (y1 - y2) * x1) - x4 * (1 - y1) * (x1 - x3) * (y2 - y4)
    dc = (1 - x2 - (x1 - x2) * y1) * (y4 + (y3 - y4) * x4) - (1 - x1) * y4 * (x2 - x4) * (y1 - y3)
    dd = (1 - x2 - (x1 - x2) * y3) * (1 - y2 - (y1 - y2) * x3) - (1 - x2) * (1 - y2) * (x1 - x3) * (y1 - y3)
    return np.stack([cc, cd, dc, dd], axis=-1)


def stationary_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Stationary distributions for stacks of strategy pairs.

    Rows whose closed form cannot be normalized fall back to power iteration.
    """
    terms = closed_form_terms(x, y)
    shape = terms.shape
    flat = terms.reshape(-1, 4)
    total = flat.sum(axis=1)
    bad = np.abs(total) < NORMALIZER_TOL
    p = flat / np.where(bad, 1.0, total)[:, np.newaxis]
    if np.any(bad):
        xs = np.broadcast_to(np.asarray(x, dtype=float), shape).reshape(-1, 4)
        ys = np.broadcast_to(np.asarray(y, dtype=float), shape).reshape(-1, 4)
        for i in np.flatnonzero(bad):
            logger.debug(f"Closed form degenerate at {xs[i]} vs {ys[i]}, using power iteration")
            p[i] = _power_iterate(transition_matrices(xs[i], ys[i]), POWER_TOL, POWER_MAX_ITER)
    return p.reshape(shape)


def stationary_closed_form(x: StrategyLike, y: StrategyLike) -> OutcomeDistribution:
    """
    Unique stationary distribution from the closed-form solution.

    Raises:
        DegenerateEquilibriumError: if the weights sum to (almost) zero
    """
    terms = closed_form_terms(as_vector(x), as_vector(y))
    total = terms.sum()
    if abs(total) < NORMALIZER_TOL:
        raise DegenerateEquilibriumError(
            f"Closed form not normalizable (sum of weights {total:.3e}); equilibrium is not unique"
        )
    return OutcomeDistribution.from_array(terms / total)


def _power_iterate(m: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    p = np.full(4, 0.25)
    for _ in range(max_iter):
        nxt = m @ p
        nxt /= nxt.sum()
        if np.abs(nxt - p).sum() < tol:
            return nxt
        p = nxt
    raise ConvergenceError(f"Power iteration did not converge within {max_iter} iterations")


def stationary_power_iteration(m: TransitionMatrix, tol: float = POWER_TOL,
                               max_iter: int = POWER_MAX_ITER) -> OutcomeDistribution:
    """
    Fixed point of M reached from the uniform distribution.

    Args:
        m (TransitionMatrix): Column-stochastic matrix
        tol (float): L1 change between iterates that counts as converged
        max_iter (int): Iteration budget

    Returns:
        OutcomeDistribution: The fixed point

    Raises:
        ConvergenceError: periodic or slowly mixing chains that exhaust max_iter
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    values = m.values if isinstance(m, TransitionMatrix) else TransitionMatrix(m).values
    return OutcomeDistribution.from_array(_power_iterate(values, tol, max_iter))


def stationary_distribution(x: StrategyLike, y: StrategyLike) -> OutcomeDistribution:
    """Closed form, or power iteration when the closed form degenerates."""
    try:
        return stationary_closed_form(x, y)
    except DegenerateEquilibriumError as e:
        logger.warning(f"{e}; falling back to power iteration")
        return stationary_power_iteration(transition_matrix(x, y))


def transition_matrix(x: StrategyLike, y: StrategyLike) -> TransitionMatrix:
    return TransitionMatrix(transition_matrices(as_vector(x), as_vector(y)))


def simulate_repeated_game(x: StrategyLike, y: StrategyLike, seed: int,
                           n_rounds: int, burn_in: int = 0) -> OutcomeDistribution:
    """
    Monte Carlo estimate of the stationary state by playing the game.

    Uses numpy's PCG64 generator (``np.random.default_rng(seed)``); the first
    outcome is drawn uniformly and the first ``burn_in`` rounds are discarded.

    Args:
        x, y: Strategies of the focal player and the opponent
        seed (int): Generator seed, fully determines the run
        n_rounds (int): Total rounds played
        burn_in (int): Leading rounds left out of the counts

    Returns:
        OutcomeDistribution: Empirical outcome frequencies
    """
    if not n_rounds > burn_in >= 0:
        raise ValueError(f"Need n_rounds > burn_in >= 0, got n_rounds={n_rounds}, burn_in={burn_in}")
    xv = as_vector(x)
    yv = as_vector(y)[OPPONENT_VIEW]
    rng = np.random.default_rng(seed)
    draws = rng.random((n_rounds, 2))
    state = int(rng.integers(4))
    counts = np.zeros(4, dtype=np.int64)
    for t in range(n_rounds):
        focal_c = draws[t, 0] < xv[state]
        other_c = draws[t, 1] < yv[state]
        state = (0 if focal_c else 2) + (0 if other_c else 1)
        if t >= burn_in:
            counts[state] += 1
    return OutcomeDistribution.from_array(counts / counts.sum())


def expected_payoffs(p: OutcomeDistribution, pm: PayoffMatrix) -> Tuple[float, float]:
    """(u_e, v_e): focal and opponent expected scores per round."""
    arr = p.as_array() if isinstance(p, OutcomeDistribution) else np.asarray(p, dtype=float)
    return float(arr @ pm.focal_vector), float(arr @ pm.opponent_vector)


def exploitation_pattern(x3, y4) -> np.ndarray:
    """
    Stationary state when x2 = x4 = y2 = 0 and y3 = 1: (0, y4*x3, y4, 1-x3), normalized.

    Works elementwise on arrays; the result has a trailing axis of length 4.
    """
    x3 = np.asarray(x3, dtype=float)
    y4 = np.asarray(y4, dtype=float)
    weights = np.stack([np.zeros_like(x3 * y4), y4 * x3, y4 + 0 * x3, 1 - x3 + 0 * y4], axis=-1)
    return weights / weights.sum(axis=-1, keepdims=True)
