"""
Payoff matrices, strategies and information classes of the one-round-memory
prisoner's dilemma.

Outcomes are indexed 1=CC, 2=CD, 3=DC, 4=DD from the focal player's point of view
(left letter = own action). The opponent reads the same round from its own seat,
so focal CD is its DC; ``OPPONENT_VIEW`` maps one perspective onto the other.
"""
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from logger_config import setup_logger, get_default_log_file

logger = setup_logger('game_model', get_default_log_file('game_model'))

OUTCOMES = ('CC', 'CD', 'DC', 'DD')

# 0-based position of each focal outcome in the opponent's own indexing
OPPONENT_VIEW = np.array([0, 2, 1, 3])


@dataclass(frozen=True)
class PayoffMatrix:
    """Prisoner's dilemma scores; construction enforces T > R > P > S."""
    T: float
    R: float
    P: float
    S: float

    def __post_init__(self):
        for name in ('T', 'R', 'P', 'S'):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.T > self.R > self.P > self.S):
            raise ValueError(
                f"Payoff scores must satisfy T>R>P>S, got "
                f"(T,R,P,S)=({self.T:g},{self.R:g},{self.P:g},{self.S:g})"
            )

    @classmethod
    def from_string(cls, text: str) -> 'PayoffMatrix':
        """Parse 'T,R,P,S', e.g. '5,3,1,0'."""
        parts = [p for p in str(text).replace(' ', '').split(',') if p]
        if len(parts) != 4:
            raise ValueError(f"Payoff must be four numbers T,R,P,S, got '{text}'")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError as e:
            if 'T>R>P>S' in str(e):
                raise
            raise ValueError(f"Payoff must be four numbers T,R,P,S, got '{text}'")

    @property
    def focal_vector(self) -> np.ndarray:
        """(R, S, T, P) over (CC, CD, DC, DD)."""
        return np.array([self.R, self.S, self.T, self.P])

    @property
    def opponent_vector(self) -> np.ndarray:
        """(R, T, S, P): the opponent's score over the focal outcome order."""
        return np.array([self.R, self.T, self.S, self.P])

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.T, self.R, self.P, self.S)

    def __str__(self):
        return ','.join(f"{v:g}" for v in self.as_tuple())


STANDARD_PAYOFF = PayoffMatrix(5, 3, 1, 0)


@dataclass(frozen=True)
class MemoryOneStrategy:
    """Cooperation probabilities after the previous outcome CC, CD, DC, DD."""
    x1: float
    x2: float
    x3: float
    x4: float

    def __post_init__(self):
        for name in ('x1', 'x2', 'x3', 'x4'):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Strategy component {name}={value} lies outside [0,1]")
            object.__setattr__(self, name, value)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'MemoryOneStrategy':
        values = list(values)
        if len(values) != 4:
            raise ValueError(f"A memory-one strategy has 4 components, got {len(values)}")
        return cls(*values)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3, self.x4])

    def clipped(self, epsilon: float) -> 'MemoryOneStrategy':
        return MemoryOneStrategy.from_array(np.clip(self.as_array(), epsilon, 1.0 - epsilon))


StrategyLike = Union[MemoryOneStrategy, Sequence[float], np.ndarray]


def as_vector(strategy: StrategyLike) -> np.ndarray:
    """Return the (4,) component array of a strategy or array-like."""
    if isinstance(strategy, MemoryOneStrategy):
        return strategy.as_array()
    if isinstance(strategy, ClassStrategy):
        return strategy.embed().as_array()
    arr = np.asarray(strategy, dtype=float)
    if arr.shape[-1] != 4:
        raise ValueError(f"Expected 4 strategy components, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class InformationClass:
    """
    Which previous outcomes a player can tell apart.

    The code writes, for each outcome 1..4, the smallest outcome index sharing its
    block, so the reactive class {1,3},{2,4} is '1212' and {1,3},{2},{4} is '1214'.
    """
    code: str

    def __post_init__(self):
        code = str(self.code)
        if len(code) != 4 or not code.isdigit():
            raise ValueError(f"Class code must be 4 digits, got '{code}'")
        digits = [int(c) for c in code]
        for i, d in enumerate(digits, start=1):
            if not 1 <= d <= i or digits[d - 1] != d:
                raise ValueError(f"Class code '{code}' is not canonical")
        object.__setattr__(self, 'code', code)

    @cached_property
    def block_index(self) -> np.ndarray:
        """0-based block number of each outcome, blocks ordered by first outcome."""
        reps = sorted(set(self.code))
        return np.array([reps.index(c) for c in self.code])

    @cached_property
    def blocks(self) -> Tuple[Tuple[int, ...], ...]:
        """Blocks as tuples of 1-based outcome indices."""
        return tuple(
            tuple(i + 1 for i in range(4) if self.block_index[i] == b)
            for b in range(self.n_blocks)
        )

    @property
    def n_blocks(self) -> int:
        return len(set(self.code))

    @cached_property
    def indicator(self) -> np.ndarray:
        """(4, n_blocks) 0/1 matrix; column b marks the outcomes of block b."""
        ind = np.zeros((4, self.n_blocks))
        ind[np.arange(4), self.block_index] = 1.0
        return ind

    @cached_property
    def representatives(self) -> np.ndarray:
        """0-based first outcome of each block."""
        return np.array([block[0] - 1 for block in self.blocks])

    def block_names(self) -> List[str]:
        """Block labels such as '13' and '24' for the reactive class."""
        return [''.join(str(i) for i in block) for block in self.blocks]

    def contains(self, strategy: StrategyLike) -> bool:
        """True if the memory-one strategy is constant on every block."""
        values = as_vector(strategy)
        return all(np.all(values[list(np.array(b) - 1)] == values[b[0] - 1]) for b in self.blocks)

    def __str__(self):
        return self.code


ClassLike = Union[InformationClass, str]


def as_class(value: ClassLike) -> InformationClass:
    return value if isinstance(value, InformationClass) else InformationClass(str(value))


def canonicalize_code(partition: Union[str, Iterable[Iterable[int]]]) -> InformationClass:
    """
    Canonical class of a partition of the outcomes {1,2,3,4}.

    Args:
        partition: Blocks of outcome indices, e.g. [[1, 3], [2, 4]], or any 4-digit
            labelling such as '3434' (equal digits = same block)

    Returns:
        InformationClass: The class with its canonical code
    """
    if isinstance(partition, str):
        text = partition.strip()
        if len(text) != 4:
            raise ValueError(f"A labelling must have 4 characters, got '{partition}'")
        labels = {}
        for i, ch in enumerate(text, start=1):
            labels.setdefault(ch, []).append(i)
        blocks = list(labels.values())
    else:
        blocks = [sorted(int(i) for i in block) for block in partition]

    seen = []
    for block in blocks:
        if not block:
            raise ValueError("Partition blocks must be nonempty")
        for i in block:
            if i not in (1, 2, 3, 4):
                raise ValueError(f"Outcome index {i} outside 1..4")
            if i in seen:
                raise ValueError(f"Outcome index {i} appears in more than one block")
            seen.append(i)
    if sorted(seen) != [1, 2, 3, 4]:
        missing = sorted(set(range(1, 5)) - set(seen))
        raise ValueError(f"Partition does not cover outcomes {missing}")

    digits = [0] * 4
    for block in blocks:
        for i in block:
            digits[i - 1] = min(block)
    return InformationClass(''.join(str(d) for d in digits))


def enumerate_information_classes() -> List[InformationClass]:
    """All 15 classes, ordered lexicographically by code."""
    codes = set()
    for labels in itertools.product(range(4), repeat=4):
        codes.add(canonicalize_code(''.join(str(v) for v in labels)).code)
    return [InformationClass(code) for code in sorted(codes)]


def refines(a: ClassLike, b: ClassLike) -> bool:
    """True if every block of a lies inside a block of b (a is at least as complex)."""
    a, b = as_class(a), as_class(b)
    ia, ib = a.block_index, b.block_index
    return all(ib[i] == ib[j] for i in range(4) for j in range(4) if ia[i] == ia[j])


def references_opponent(c: ClassLike) -> bool:
    """False when, for each own action, the opponent's C and D land in one block."""
    idx = as_class(c).block_index
    return bool(idx[0] != idx[1] or idx[2] != idx[3])


@dataclass(frozen=True)
class ClassStrategy:
    """One cooperation probability per block of an information class."""
    info_class: InformationClass
    probs: Tuple[float, ...]

    def __post_init__(self):
        cls = as_class(self.info_class)
        probs = tuple(float(p) for p in np.ravel(self.probs))
        if len(probs) != cls.n_blocks:
            raise ValueError(
                f"Class {cls.code} has {cls.n_blocks} blocks, got {len(probs)} probabilities"
            )
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"Probability {p} lies outside [0,1]")
        object.__setattr__(self, 'info_class', cls)
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def from_memory_one(cls, info_class: ClassLike, strategy: StrategyLike) -> 'ClassStrategy':
        """Restrict a block-constant memory-one strategy to the class."""
        info_class = as_class(info_class)
        values = as_vector(strategy)
        if not info_class.contains(values):
            raise ValueError(f"Strategy {values.tolist()} is not representable in class {info_class.code}")
        return cls(info_class, tuple(values[info_class.representatives]))

    def as_array(self) -> np.ndarray:
        return np.array(self.probs)

    def embed(self) -> MemoryOneStrategy:
        return MemoryOneStrategy.from_array(self.as_array()[self.info_class.block_index])

    def clipped(self, epsilon: float) -> 'ClassStrategy':
        return ClassStrategy(self.info_class, tuple(np.clip(self.as_array(), epsilon, 1.0 - epsilon)))


def embed(s: ClassStrategy) -> MemoryOneStrategy:
    """Memory-one strategy that plays each block's probability on all its outcomes."""
    return s.embed()


# Strategies from the tit-for-tat family

def tit_for_tat() -> ClassStrategy:
    return ClassStrategy(InformationClass('1212'), (1.0, 0.0))


def generous_tft(q: float) -> ClassStrategy:
    """Always answers C with C, answers D with C with probability q."""
    return ClassStrategy(InformationClass('1212'), (1.0, q))


def narrow_minded_tft(p: float) -> ClassStrategy:
    """Answers C with C only with probability p, always answers D with D."""
    return ClassStrategy(InformationClass('1212'), (p, 0.0))


def win_stay_lose_shift() -> ClassStrategy:
    return ClassStrategy(InformationClass('1234'), (1.0, 0.0, 0.0, 1.0))


def resolve_class_list(spec: Union[str, Sequence[str]]) -> List[InformationClass]:
    """
    Expand a class list flag: 'four', 'all13', 'all15' or comma separated codes.
    """
    if not isinstance(spec, str):
        return [as_class(c) for c in spec]
    text = spec.strip().lower()
    if text == 'four':
        return [InformationClass(c) for c in ('1234', '1232', '1214', '1212')]
    if text == 'all15':
        return enumerate_information_classes()
    if text == 'all13':
        return [c for c in enumerate_information_classes() if references_opponent(c)]
    codes = [c for c in text.replace(' ', '').split(',') if c]
    if not codes:
        raise ValueError("Empty class list")
    return [InformationClass(c) for c in codes]
