"""
Sensitivity of the stationary state to a single strategy component.

Three independent routes to dp_e/dx_n:
    linear solve     (E - M) v = p_n * (p_after_C - p_after_D), sum(v) = 0
    series           p_n * sum_t M^t (p_after_C - p_after_D), truncated
    finite difference central difference of the closed form

The linear solve is the one the learning dynamics use; the other two exist to
check it.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from equilibrium import (
    DegenerateEquilibriumError,
    stationary_batch,
    stationary_closed_form,
    transition_matrices,
)
from game_model import OPPONENT_VIEW, StrategyLike, as_vector
from logger_config import setup_logger, get_default_log_file

logger = setup_logger('gradients', get_default_log_file('gradients'))

SEATS = ('x', 'y')
SERIES_TOL = 1e-12


@dataclass(frozen=True)
class EquilibriumGradient:
    """dp_e/d(component n of player) over outcomes (CC, CD, DC, DD), focal perspective."""
    values: np.ndarray
    player: str
    component: int
    truncation_error: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    @property
    def total(self) -> float:
        """Sum of the components; zero up to rounding."""
        return float(np.sum(self.values))


def _check_args(player: str, n: int):
    if player not in SEATS:
        raise ValueError(f"player must be 'x' or 'y', got '{player}'")
    if n not in (1, 2, 3, 4):
        raise ValueError(f"component index must be 1..4, got {n}")


def perturbation_columns(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    dM/dx_n applied to a unit mass on outcome n, for every n at once.

    Column n is p_after_C - p_after_D = (b, 1-b, -b, -(1-b)) with b the
    opponent's cooperation probability after outcome n; shape (..., 4, 4).
    """
    b = np.asarray(y, dtype=float)[..., OPPONENT_VIEW]
    b = np.broadcast_to(b, np.broadcast_shapes(b.shape, np.shape(x)))
    return np.stack([b, 1 - b, -b, -(1 - b)], axis=-2)


def equilibrium_jacobian(x: np.ndarray, y: np.ndarray, p: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Batched Jacobian J[..., i, n] = dp_i/dx_n for the focal player x.

    Args:
        x: (..., 4) focal strategies
        y: (..., 4) opponent strategies in their own perspective
        p: Optional precomputed stationary states (..., 4)

    Returns:
        np.ndarray: (..., 4, 4) Jacobians, outcomes along axis -2

    Raises:
        DegenerateEquilibriumError: if the constrained system is singular
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if p is None:
        p = stationary_batch(x, y)
    a = np.eye(4) - transition_matrices(x, y)
    a[..., 3, :] = 1.0
    rhs = perturbation_columns(x, y) * p[..., np.newaxis, :]
    rhs[..., 3, :] = 0.0
    try:
        return np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as e:
        raise DegenerateEquilibriumError(f"Constrained gradient system is singular: {e}")


def opponent_jacobian(x: np.ndarray, y: np.ndarray, p_focal: Optional[np.ndarray] = None) -> np.ndarray:
    """Jacobian of the focal-perspective state with respect to the opponent's components."""
    p_own = None if p_focal is None else np.asarray(p_focal)[..., OPPONENT_VIEW]
    return equilibrium_jacobian(y, x, p_own)[..., OPPONENT_VIEW, :]


def gradient_linear_solve(x: StrategyLike, y: StrategyLike, player: str = 'x', n: int = 1) -> EquilibriumGradient:
    """
    Gradient from the constrained linear system.

    Args:
        x, y: Strategies of the focal player and the opponent
        player (str): 'x' or 'y', whose component is perturbed
        n (int): Component index 1..4 in that player's own indexing

    Returns:
        EquilibriumGradient: Focal-perspective gradient
    """
    _check_args(player, n)
    xv, yv = as_vector(x), as_vector(y)
    jac = equilibrium_jacobian(xv, yv) if player == 'x' else opponent_jacobian(xv, yv)
    return EquilibriumGradient(jac[:, n - 1], player, n)


def gradient_series(x: StrategyLike, y: StrategyLike, player: str = 'x', n: int = 1,
                    t_max: int = 10 ** 4, tol: float = SERIES_TOL) -> EquilibriumGradient:
    """
    Partial sum of the payoff-difference series up to t_max terms after the first.

    Summation stops early once a term's L1 norm drops below tol; the norm of the
    last term added is reported as the truncation error.
    """
    _check_args(player, n)
    if t_max < 0:
        raise ValueError(f"t_max must be >= 0, got {t_max}")
    own, other = (as_vector(x), as_vector(y)) if player == 'x' else (as_vector(y), as_vector(x))
    m = transition_matrices(own, other)
    p = stationary_batch(own, other)
    term = p[n - 1] * perturbation_columns(own, other)[:, n - 1]
    total = term.copy()
    last = float(np.abs(term).sum())
    for t in range(1, t_max + 1):
        term = m @ term
        total += term
        last = float(np.abs(term).sum())
        if last < tol:
            break
    else:
        if t_max > 0 and last >= tol:
            logger.debug(f"Series for {player}{n} truncated at t={t_max} with last term {last:.3e}")
    if player == 'y':
        total = total[OPPONENT_VIEW]
    return EquilibriumGradient(total, player, n, truncation_error=last)


def gradient_finite_difference(x: StrategyLike, y: StrategyLike, player: str = 'x', n: int = 1,
                               h: float = 1e-6) -> EquilibriumGradient:
    """
    Central difference of the closed-form stationary state.

    Raises:
        ValueError: if x_n - h or x_n + h leaves (0, 1)
    """
    _check_args(player, n)
    if h <= 0:
        raise ValueError("h must be positive")
    xv, yv = as_vector(x).copy(), as_vector(y).copy()
    target = xv if player == 'x' else yv
    base = target[n - 1]
    if not (0.0 < base - h and base + h < 1.0):
        raise ValueError(f"Step h={h} moves component {player}{n}={base} outside (0,1)")
    target[n - 1] = base + h
    upper = stationary_closed_form(xv, yv).as_array()
    target[n - 1] = base - h
    lower = stationary_closed_form(xv, yv).as_array()
    return EquilibriumGradient((upper - lower) / (2 * h), player, n)
