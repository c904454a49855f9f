"""
Ensemble drivers that turn the learning dynamics into result tables.

Samples are split into fixed-size chunks that are integrated independently
(optionally on a process pool), so results depend on the master seed and the
chunk size but never on the number of workers.
"""
import hashlib
import multiprocessing as mp
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from analysis import (
    EXPLOIT_LABELS,
    OUTCOME_ORDER,
    Outcome,
    classify_outcomes,
    confirm_exploitation,
    exploitation_structure,
    is_submodular,
)
from config import (
    DEFAULT_CHUNK_SIZE,
    DEFAULT_DELTA,
    DEFAULT_JOBS,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
)
from dynamics import EnsembleResult, LearningConfig, WindowSummary, integrate_ensemble
from equilibrium import stationary_batch
from game_model import (
    ClassLike,
    ClassStrategy,
    InformationClass,
    PayoffMatrix,
    as_class,
    canonicalize_code,
    refines,
)
from logger_config import setup_logger, get_default_log_file

logger = setup_logger('experiments', get_default_log_file('experiments'))

R_EDGE_TOL = 1e-3
MAX_HARVEST_ROUNDS = 10


def deterministic_seed(*parts: object) -> int:
    """Stable 31-bit seed from any printable parts (sha256 of 'a|b|c')."""
    key = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]
    return int(digest, 16) & 0x7FFFFFFF


def pair_key(class_x: ClassLike, class_y: ClassLike) -> str:
    """Order-free identifier of a class pair, e.g. '1212-1234'."""
    return '-'.join(sorted((as_class(class_x).code, as_class(class_y).code)))


@dataclass(frozen=True)
class EnsembleSpec:
    """
    One ensemble: learning settings plus sampling and census options.

    ``jobs`` only sets the worker count and never changes results.
    """
    learning: LearningConfig
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    chunk_size: int = DEFAULT_CHUNK_SIZE
    delta: float = DEFAULT_DELTA
    drop_r_edge: bool = False
    jobs: int = DEFAULT_JOBS

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")
        if not 0 < self.delta < 0.5:
            raise ValueError(f"delta must lie in (0, 0.5), got {self.delta}")

    @property
    def class_x(self) -> InformationClass:
        return self.learning.class_x

    @property
    def class_y(self) -> InformationClass:
        return self.learning.class_y

    @property
    def payoff(self) -> PayoffMatrix:
        return self.learning.payoff

    @property
    def mode(self) -> str:
        return self.learning.mode

    def for_pair(self, class_x: ClassLike, class_y: ClassLike, mode: Optional[str] = None) -> 'EnsembleSpec':
        learning = self.learning.with_classes(class_x, class_y)
        if mode is not None:
            learning = replace(learning, mode=mode)
        return replace(self, learning=learning)

    def with_payoff(self, pm: PayoffMatrix) -> 'EnsembleSpec':
        return replace(self, learning=replace(self.learning, payoff=pm))


def draw_initial_states(class_x: ClassLike, class_y: ClassLike, master_seed: int,
                        indices: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Uniform initial block values for each sample.

    The per-sample generator is seeded from (master seed, pair, index); the seat
    whose class code sorts first draws first, so exchanging the seats of a pair
    exchanges the initial states.
    """
    cx, cy = as_class(class_x), as_class(class_y)
    key = pair_key(cx, cy)
    x_first = cx.code <= cy.code
    seeds = np.array([deterministic_seed('sample', master_seed, key, i) for i in indices], dtype=np.int64)
    init_x = np.empty((len(seeds), cx.n_blocks))
    init_y = np.empty((len(seeds), cy.n_blocks))
    for row, seed in enumerate(seeds):
        rng = np.random.default_rng(int(seed))
        if x_first:
            init_x[row] = rng.random(cx.n_blocks)
            init_y[row] = rng.random(cy.n_blocks)
        else:
            init_y[row] = rng.random(cy.n_blocks)
            init_x[row] = rng.random(cx.n_blocks)
    return init_x, init_y, seeds


def _integrate_chunk(learning: LearningConfig, init_x: np.ndarray, init_y: np.ndarray,
                     record_times: Optional[Sequence[float]]) -> EnsembleResult:
    return integrate_ensemble(init_x, init_y, learning, record_times)


def _execute(tasks: List[tuple], jobs: int) -> List[EnsembleResult]:
    """Run chunk tasks in order, on a process pool when jobs > 1."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_integrate_chunk(*task) for task in tasks]
    with mp.Pool(min(jobs, len(tasks))) as pool:
        return pool.starmap(_integrate_chunk, tasks)


def _chunk_tasks(learning: LearningConfig, init_x: np.ndarray, init_y: np.ndarray, chunk_size: int,
                 record_times: Optional[Sequence[float]] = None) -> List[tuple]:
    return [
        (learning, init_x[start:start + chunk_size], init_y[start:start + chunk_size], record_times)
        for start in range(0, len(init_x), chunk_size)
    ]


def _merge(results: List[EnsembleResult]) -> EnsembleResult:
    summary = WindowSummary(**{
        f.name: np.concatenate([getattr(r.summary, f.name) for r in results], axis=0)
        for f in fields(WindowSummary)
    })
    return EnsembleResult(
        final_x=np.concatenate([r.final_x for r in results]),
        final_y=np.concatenate([r.final_y for r in results]),
        summary=summary,
        attractors=np.concatenate([r.attractors for r in results]),
        record_times=results[0].record_times,
        u_recorded=np.concatenate([r.u_recorded for r in results], axis=1),
        v_recorded=np.concatenate([r.v_recorded for r in results], axis=1),
    )


@dataclass
class CensusReport:
    """Per-sample outcomes of one class pair and their aggregates.

    ``label`` is the confirmed census label; ``raw_label`` is the outcome rule
    alone. ``unconfirmed`` counts kept samples whose exploitation label was
    turned into 'other' because the structure check did not back it.
    """
    class_x: InformationClass
    class_y: InformationClass
    payoff: PayoffMatrix
    samples: pd.DataFrame
    counts: Dict[str, int]
    mean_u: float
    mean_v: float
    directions: Dict[str, int]
    dropped: int = 0
    unconfirmed: int = 0

    @property
    def exploiter(self) -> Optional[str]:
        """'x', 'y', 'both' or None, from the exploitation counts."""
        bx, by = self.counts[Outcome.EXPLOIT_BY_X.value], self.counts[Outcome.EXPLOIT_BY_Y.value]
        if bx and by:
            return 'both'
        if bx:
            return 'x'
        if by:
            return 'y'
        return None

    def mirrored(self) -> 'CensusReport':
        """The same census with the seats exchanged."""
        swap = {'x': 'y', 'y': 'x'}
        frame = self.samples.copy()
        renamed = {}
        for col in frame.columns:
            for a, b in (('init_x_', 'init_y_'), ('final_x_', 'final_y_')):
                if col.startswith(a):
                    renamed[col] = b + col[len(a):]
                elif col.startswith(b):
                    renamed[col] = a + col[len(b):]
        renamed.update({'u': 'v', 'v': 'u', 'p_CD': 'p_DC', 'p_DC': 'p_CD'})
        frame = frame.rename(columns=renamed)
        for col in ('label', 'raw_label'):
            frame[col] = [Outcome(label).mirrored().value for label in frame[col]]
        frame['structure'] = [swap.get(s, s) for s in frame['structure']]
        order = _sample_columns(self.class_y, self.class_x)
        counts = {Outcome(k).mirrored().value: v for k, v in self.counts.items()}
        return CensusReport(
            class_x=self.class_y, class_y=self.class_x, payoff=self.payoff,
            samples=frame[order],
            counts={label: counts[label] for label in OUTCOME_ORDER},
            mean_u=self.mean_v, mean_v=self.mean_u,
            directions={'x_gains': self.directions['y_gains'], 'y_gains': self.directions['x_gains']},
            dropped=self.dropped,
            unconfirmed=self.unconfirmed,
        )

    def to_summary(self) -> Dict[str, object]:
        return {
            'class_x': self.class_x.code,
            'class_y': self.class_y.code,
            'payoff': str(self.payoff),
            'samples': int(len(self.samples)),
            'dropped_r_edge': int(self.dropped),
            'unconfirmed_exploitation': int(self.unconfirmed),
            'counts': dict(self.counts),
            'mean_u': self.mean_u,
            'mean_v': self.mean_v,
            'directions': dict(self.directions),
            'exploiter': self.exploiter,
        }


def _sample_columns(cx: InformationClass, cy: InformationClass) -> List[str]:
    return (['sample_id', 'seed']
            + [f"init_x_{b}" for b in cx.block_names()] + [f"init_y_{b}" for b in cy.block_names()]
            + [f"final_x_{b}" for b in cx.block_names()] + [f"final_y_{b}" for b in cy.block_names()]
            + ['p_CC', 'p_CD', 'p_DC', 'p_DD', 'u', 'v', 'raw_label', 'label', 'attractor', 'structure', 'kept'])


def on_r_edge(u: np.ndarray, v: np.ndarray, labels: np.ndarray, pm: PayoffMatrix,
              tol: float = R_EDGE_TOL) -> np.ndarray:
    """Samples where exactly one seat earns R without mutual cooperation."""
    at_r_u = np.abs(u - pm.R) < tol
    at_r_v = np.abs(v - pm.R) < tol
    return (at_r_u ^ at_r_v) & (labels != Outcome.MUTUAL_COOPERATION.value)


def _build_census(spec: EnsembleSpec, seeds: np.ndarray, init_x: np.ndarray, init_y: np.ndarray,
                  result: EnsembleResult) -> CensusReport:
    cx, cy, pm = spec.class_x, spec.class_y, spec.payoff
    w = result.summary
    raw_labels = classify_outcomes(w.p_mean, spec.delta)
    structure = []
    for i in range(len(seeds)):
        check = exploitation_structure(w.row(i), str(result.attractors[i]), cx, cy,
                                       cycle_tol=spec.learning.cycle_tol, epsilon=spec.learning.epsilon)
        structure.append(check.exploiter or '')
    labels = confirm_exploitation(raw_labels, structure, cx, cy)

    kept = np.ones(len(seeds), dtype=bool)
    if spec.drop_r_edge:
        kept = ~on_r_edge(w.u_mean, w.v_mean, labels, pm)

    data = [np.arange(len(seeds)), seeds, init_x, init_y, result.final_x, result.final_y,
            w.p_mean, w.u_mean, w.v_mean]
    numeric = np.column_stack(data)
    columns = _sample_columns(cx, cy)
    frame = pd.DataFrame(numeric, columns=columns[:numeric.shape[1]])
    frame['sample_id'] = frame['sample_id'].astype(int)
    frame['seed'] = seeds
    frame['raw_label'] = raw_labels
    frame['label'] = labels
    frame['attractor'] = result.attractors
    frame['structure'] = structure
    frame['kept'] = kept

    counted = frame[frame['kept']]
    counts = {label: int((counted['label'] == label).sum()) for label in OUTCOME_ORDER}
    exploit = counted[counted['label'].isin(EXPLOIT_LABELS)]
    directions = {
        'x_gains': int((exploit['u'] > exploit['v']).sum()),
        'y_gains': int((exploit['v'] > exploit['u']).sum()),
    }
    return CensusReport(
        class_x=cx, class_y=cy, payoff=pm, samples=frame,
        counts=counts,
        mean_u=float(counted['u'].mean()) if len(counted) else float('nan'),
        mean_v=float(counted['v'].mean()) if len(counted) else float('nan'),
        directions=directions,
        dropped=int((~kept).sum()),
        unconfirmed=int((counted['raw_label'] != counted['label']).sum()),
    )


def _mutual_tasks(spec: EnsembleSpec) -> Tuple[EnsembleSpec, bool, tuple, List[tuple]]:
    """Canonical-orientation tasks for one pair: (spec run, mirror flag, draws, tasks)."""
    flip = spec.class_x.code > spec.class_y.code
    run_spec = spec.for_pair(spec.class_y, spec.class_x) if flip else spec
    init_x, init_y, seeds = draw_initial_states(run_spec.class_x, run_spec.class_y, spec.seed,
                                                range(spec.samples))
    tasks = _chunk_tasks(run_spec.learning, init_x, init_y, spec.chunk_size)
    return run_spec, flip, (seeds, init_x, init_y), tasks


def run_match_ensemble(spec: EnsembleSpec) -> CensusReport:
    """
    Mutual-learning census of one class pair.

    Pairs are always integrated with the lower class code in seat x and
    mirrored back, so (a, b) and (b, a) give mirror-image censuses.
    """
    if spec.mode != 'mutual':
        raise ValueError(f"run_match_ensemble needs mode 'mutual', got '{spec.mode}'")
    try:
        logger.info(f"Running {spec.samples} samples of {spec.class_x.code} vs {spec.class_y.code} "
                    f"(payoff {spec.payoff}, seed {spec.seed})")
        run_spec, flip, (seeds, init_x, init_y), tasks = _mutual_tasks(spec)
        result = _merge(_execute(tasks, spec.jobs))
        report = _build_census(run_spec, seeds, init_x, init_y, result)
        report = report.mirrored() if flip else report
        logger.info(f"Census {spec.class_x.code} vs {spec.class_y.code}: {report.counts}")
        return report
    except Exception as e:
        logger.error(f"Ensemble {spec.class_x.code} vs {spec.class_y.code} failed: {str(e)}")
        raise


def common_class(classes: Sequence[ClassLike]) -> InformationClass:
    """Finest class whose strategies every listed class can represent."""
    parent = list(range(4))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for c in classes:
        for block in as_class(c).blocks:
            root = find(block[0] - 1)
            for j in block[1:]:
                parent[find(j - 1)] = root
    groups: Dict[int, List[int]] = {}
    for i in range(4):
        groups.setdefault(find(i), []).append(i + 1)
    return canonicalize_code(list(groups.values()))


@dataclass
class OneSidedReport:
    """Mean payoff curves and terminal payoffs of one-sided learners vs a frozen opponent."""
    fixed_opponent: ClassStrategy
    learners: List[InformationClass]
    curve: pd.DataFrame
    terminal: pd.DataFrame

    def to_summary(self) -> Dict[str, object]:
        last = self.curve.iloc[-1]
        return {
            'fixed_opponent': {'class': self.fixed_opponent.info_class.code,
                               'probs': list(self.fixed_opponent.probs)},
            'learners': [c.code for c in self.learners],
            'terminal_mean_u': {c.code: float(last[f"u_{c.code}"]) for c in self.learners},
        }


START_MODES = ('matched', 'own')


def _one_sided_starts(learners: List[InformationClass], seed: int, samples: int,
                      starts: str) -> Tuple[List[int], Dict[str, np.ndarray]]:
    """Per-sample seeds and each learner's initial block values."""
    if starts == 'matched':
        base = common_class(learners)
        seeds = [deterministic_seed('one_sided', seed, base.code, i) for i in range(samples)]
        memory_one = np.array([np.random.default_rng(s).random(base.n_blocks) for s in seeds])[:, base.block_index]
        return seeds, {c.code: memory_one[:, c.representatives] for c in learners}
    if starts == 'own':
        seeds = [deterministic_seed('one_sided', seed, i) for i in range(samples)]
        return seeds, {c.code: np.array([np.random.default_rng(s).random(c.n_blocks) for s in seeds])
                       for c in learners}
    raise ValueError(f"starts must be one of {START_MODES}, got '{starts}'")


def run_one_sided_learning(spec: EnsembleSpec, fixed_opponent: ClassStrategy,
                           sample_times: Sequence[float],
                           learners: Sequence[ClassLike] = ('1234', '1212'),
                           starts: str = 'matched') -> OneSidedReport:
    """
    Learners of several classes against one frozen opponent.

    With starts='matched' every sample starts all learners from the same
    memory-one strategy, drawn uniformly on the coarsest class they can all
    represent. With starts='own' each learner draws uniformly on its own cube;
    only the opponent and the per-sample seed are shared.

    Args:
        spec (EnsembleSpec): Samples, seed and learning settings (mode is forced one-sided)
        fixed_opponent (ClassStrategy): Strategy of the frozen y player
        sample_times: Times at which the mean payoffs are tabulated
        learners: Classes of the learning x player
        starts (str): 'matched' or 'own'

    Returns:
        OneSidedReport: curve (time, u_<class>, v_<class>) and per-sample terminal payoffs
    """
    learners = [as_class(c) for c in learners]
    t_end = float(spec.learning.n_steps * spec.learning.dt)
    times = sorted({float(t) for t in sample_times if 0 <= t <= t_end} | {t_end})
    seeds, initial = _one_sided_starts(learners, spec.seed, spec.samples, starts)
    try:
        logger.info(f"One-sided learning of {[c.code for c in learners]} against "
                    f"{fixed_opponent.info_class.code} {fixed_opponent.probs}, {spec.samples} {starts} samples")
        curve = pd.DataFrame({'time': times})
        terminal = pd.DataFrame({'sample_id': np.arange(spec.samples), 'seed': seeds})
        opponent = np.tile(fixed_opponent.as_array(), (spec.samples, 1))
        for learner in learners:
            learning = replace(spec.learning.with_classes(learner, fixed_opponent.info_class), mode='one_sided')
            init_x = initial[learner.code]
            result = _merge(_execute(_chunk_tasks(learning, init_x, opponent, spec.chunk_size, times), spec.jobs))
            curve[f"u_{learner.code}"] = result.u_recorded.mean(axis=1)
            curve[f"v_{learner.code}"] = result.v_recorded.mean(axis=1)
            terminal[f"u_{learner.code}"] = result.u_recorded[-1]
            terminal[f"v_{learner.code}"] = result.v_recorded[-1]
            logger.info(f"Learner {learner.code}: terminal mean payoff {result.u_recorded[-1].mean():.6f}")
        return OneSidedReport(fixed_opponent, learners, curve, terminal)
    except Exception as e:
        logger.error(f"One-sided learning failed: {str(e)}")
        raise


@dataclass
class GenerosityReport:
    """Before/after payoffs when a reactive exploiter turns memory-one and learns alone."""
    table: pd.DataFrame
    harvested: int
    requested: int

    def to_summary(self) -> Dict[str, object]:
        if self.table.empty:
            return {'harvested': 0, 'requested': self.requested}
        return {
            'harvested': self.harvested,
            'requested': self.requested,
            'mean_delta_u': float(self.table['delta_u'].mean()),
            'mean_delta_v': float(self.table['delta_v'].mean()),
            'min_delta_u': float(self.table['delta_u'].min()),
        }


def _harvest_exploitation(spec: EnsembleSpec, n_equilibria: int) -> Tuple[np.ndarray, np.ndarray]:
    """Exploiter and exploited block values from 1212-vs-1212 exploitation endpoints."""
    exploiters, victims = [], []
    for round_no in range(MAX_HARVEST_ROUNDS):
        seed = spec.seed if round_no == 0 else deterministic_seed('harvest', spec.seed, round_no)
        census = run_match_ensemble(replace(spec.for_pair('1212', '1212', mode='mutual'), seed=seed))
        frame = census.samples
        for _, row in frame[frame['label'].isin(EXPLOIT_LABELS)].iterrows():
            x = [row['final_x_13'], row['final_x_24']]
            y = [row['final_y_13'], row['final_y_24']]
            if row['label'] == Outcome.EXPLOIT_BY_X.value:
                exploiters.append(x)
                victims.append(y)
            else:
                exploiters.append(y)
                victims.append(x)
        if len(exploiters) >= n_equilibria:
            break
    return np.array(exploiters[:n_equilibria]).reshape(-1, 2), np.array(victims[:n_equilibria]).reshape(-1, 2)


GENEROSITY_COLUMNS = (['equilibrium_id', 'x13', 'x24', 'y13', 'y24', 'u_before', 'v_before', 'u_after', 'v_after']
                      + [f"x{n}_after" for n in range(1, 5)] + ['delta_u', 'delta_v'])


def learn_from_equilibria(exploiters: np.ndarray, victims: np.ndarray, spec: EnsembleSpec) -> pd.DataFrame:
    """
    One-sided memory-one learning of reactive exploiters against their frozen victims.

    Args:
        exploiters: (N, 2) reactive block values of the exploiting players
        victims: (N, 2) reactive block values of the exploited players
        spec (EnsembleSpec): Horizon, payoff and chunking of the learning runs

    Returns:
        pd.DataFrame: One row per equilibrium with payoffs before and after,
        the learned memory-one strategy and both gains
    """
    exploiters = np.asarray(exploiters, dtype=float).reshape(-1, 2)
    victims = np.asarray(victims, dtype=float).reshape(-1, 2)
    if len(exploiters) == 0:
        return pd.DataFrame(columns=GENEROSITY_COLUMNS)
    reactive = InformationClass('1212')
    init_x = exploiters[:, reactive.block_index]
    learning = replace(spec.learning.with_classes('1234', '1212'), mode='one_sided')
    t_end = learning.n_steps * learning.dt
    result = _merge(_execute(_chunk_tasks(learning, init_x, victims, spec.chunk_size, [0.0, t_end]),
                             spec.jobs))

    p_before = stationary_batch(init_x, victims[:, reactive.block_index])
    table = pd.DataFrame({
        'equilibrium_id': np.arange(len(exploiters)),
        'x13': exploiters[:, 0], 'x24': exploiters[:, 1],
        'y13': victims[:, 0], 'y24': victims[:, 1],
        'u_before': p_before @ spec.payoff.focal_vector,
        'v_before': p_before @ spec.payoff.opponent_vector,
        'u_after': result.u_recorded[-1],
        'v_after': result.v_recorded[-1],
    })
    for n in range(4):
        table[f"x{n + 1}_after"] = result.final_x[:, n]
    table['delta_u'] = table['u_after'] - table['u_before']
    table['delta_v'] = table['v_after'] - table['v_before']
    return table[GENEROSITY_COLUMNS]


def run_generosity_experiment(n_equilibria: int, spec: EnsembleSpec) -> GenerosityReport:
    """
    Reactive exploiters switch to the memory-one class and learn against the frozen victim.

    Step 1 harvests exploitation equilibria of 1212-vs-1212 mutual learning,
    Step 2 embeds each exploiter into 1234 (exploiter moved to seat x),
    Step 3 runs one-sided learning and tabulates payoffs before and after.

    Raises:
        ValueError: if the payoff matrix is not submodular
    """
    if not is_submodular(spec.payoff):
        raise ValueError(f"Generosity experiment needs a submodular payoff, got ({spec.payoff})")
    if n_equilibria < 1:
        raise ValueError(f"n_equilibria must be >= 1, got {n_equilibria}")
    try:
        logger.info(f"Step 1: Harvesting up to {n_equilibria} reactive exploitation equilibria...")
        exploiters, victims = _harvest_exploitation(spec, n_equilibria)
        if len(exploiters) == 0:
            logger.warning("No exploitation equilibria found; generosity table is empty")
            return GenerosityReport(learn_from_equilibria(exploiters, victims, spec), 0, n_equilibria)
        if len(exploiters) < n_equilibria:
            logger.warning(f"Only {len(exploiters)} of {n_equilibria} equilibria harvested")

        logger.info(f"Step 2: Embedding {len(exploiters)} exploiters into class 1234...")
        logger.info("Step 3: One-sided memory-one learning against the frozen opponents...")
        table = learn_from_equilibria(exploiters, victims, spec)
        logger.info(f"Mean gains: own {table['delta_u'].mean():.6f}, opponent {table['delta_v'].mean():.6f}")
        return GenerosityReport(table, len(exploiters), n_equilibria)
    except Exception as e:
        logger.error(f"Generosity experiment failed: {str(e)}")
        raise


@dataclass
class TournamentReport:
    """Pairwise censuses of a class list and the matrices derived from them."""
    classes: List[InformationClass]
    censuses: Dict[Tuple[str, str], CensusReport]
    directions: pd.DataFrame
    mean_payoff: pd.DataFrame
    payoff_difference: pd.DataFrame
    complex_exploits_simple: List[Tuple[str, str]] = field(default_factory=list)

    def to_summary(self) -> Dict[str, object]:
        return {
            'classes': [c.code for c in self.classes],
            'pairs': len(self.censuses),
            'complex_exploits_simple': [list(p) for p in self.complex_exploits_simple],
            'censuses': [c.to_summary() for c in self.censuses.values()],
        }


def exploitation_edges(report: CensusReport) -> List[Tuple[str, str]]:
    """(exploiter class, exploited class) edges seen in a census of two distinct classes."""
    if report.class_x == report.class_y:
        return []
    edges = []
    if report.counts[Outcome.EXPLOIT_BY_X.value]:
        edges.append((report.class_x.code, report.class_y.code))
    if report.counts[Outcome.EXPLOIT_BY_Y.value]:
        edges.append((report.class_y.code, report.class_x.code))
    return edges


def is_complex_exploiting_simple(exploiter: ClassLike, exploited: ClassLike) -> bool:
    """The exploiter's partition strictly refines the exploited's."""
    a, b = as_class(exploiter), as_class(exploited)
    return a != b and refines(a, b)


def summarize_tournament(classes: Sequence[ClassLike],
                         censuses: Dict[Tuple[str, str], CensusReport]) -> TournamentReport:
    """
    Direction table, mean-payoff matrix and complex-over-simple edges from pairwise censuses.

    Args:
        classes: Tournament classes, in matrix order
        censuses: Census per (class_x, class_y) code pair, self-play included

    Returns:
        TournamentReport: mean_payoff holds the row class's payoff against the
        column class; payoff_difference is its antisymmetric part
    """
    classes = [as_class(c) for c in classes]
    codes = [c.code for c in classes]
    mean = pd.DataFrame(np.nan, index=codes, columns=codes)
    rows = []
    complex_edges = []
    for (a, b), report in censuses.items():
        if a == b:
            mean.loc[a, a] = (report.mean_u + report.mean_v) / 2
        else:
            mean.loc[a, b] = report.mean_u
            mean.loc[b, a] = report.mean_v
        edges = exploitation_edges(report)
        for winner, loser in edges:
            if is_complex_exploiting_simple(winner, loser):
                complex_edges.append((winner, loser))
        rows.append({
            'class_x': a, 'class_y': b,
            **{label: report.counts[label] for label in OUTCOME_ORDER},
            'unconfirmed': report.unconfirmed,
            'mean_u': report.mean_u, 'mean_v': report.mean_v,
            'exploiter': ';'.join(w for w, _ in edges),
            'complex_exploits_simple': any(is_complex_exploiting_simple(w, l) for w, l in edges),
        })
    if complex_edges:
        logger.info(f"Complex-exploits-simple pairs: {complex_edges}")
    return TournamentReport(classes, censuses, pd.DataFrame(rows), mean, mean - mean.T, complex_edges)


def run_class_tournament(classes: Sequence[ClassLike], spec: EnsembleSpec) -> TournamentReport:
    """
    Censuses over all unordered class pairs including self-play.

    Returns:
        TournamentReport: per-pair censuses and the tables built by summarize_tournament
    """
    classes = [as_class(c) for c in classes]
    if len(set(c.code for c in classes)) != len(classes):
        raise ValueError("Tournament classes must be distinct")
    pairs = [(a, b) for i, a in enumerate(classes) for b in classes[i:]]
    try:
        logger.info(f"Tournament over {len(classes)} classes: {len(pairs)} pairs x {spec.samples} samples")
        plans, tasks, spans = [], [], []
        for a, b in pairs:
            pair_spec = spec.for_pair(a, b, mode='mutual')
            run_spec, flip, draws, pair_tasks = _mutual_tasks(pair_spec)
            plans.append((pair_spec, run_spec, flip, draws))
            spans.append((len(tasks), len(tasks) + len(pair_tasks)))
            tasks.extend(pair_tasks)
        results = _execute(tasks, spec.jobs)

        censuses: Dict[Tuple[str, str], CensusReport] = {}
        for (pair_spec, run_spec, flip, (seeds, init_x, init_y)), (lo, hi) in zip(plans, spans):
            report = _build_census(run_spec, seeds, init_x, init_y, _merge(results[lo:hi]))
            report = report.mirrored() if flip else report
            censuses[(pair_spec.class_x.code, pair_spec.class_y.code)] = report
            logger.info(f"{pair_spec.class_x.code} vs {pair_spec.class_y.code}: {report.counts}")
        return summarize_tournament(classes, censuses)
    except Exception as e:
        logger.error(f"Tournament failed: {str(e)}")
        raise


@dataclass
class SweepReport:
    table: pd.DataFrame

    def to_summary(self) -> Dict[str, object]:
        summary = {}
        for payoff, group in self.table.groupby('payoff', sort=False):
            summary[payoff] = {
                'submodular': bool(group['submodular'].iloc[0]),
                'exploitation_present': bool(group[list(EXPLOIT_LABELS)].to_numpy().sum() > 0),
                'alternating_present': bool(group[Outcome.ALTERNATING.value].sum() > 0),
                'unconfirmed_exploitation': int(group['unconfirmed'].sum()),
            }
        return summary


def run_submodularity_sweep(matrices: Sequence[Union[PayoffMatrix, str]], spec: EnsembleSpec,
                            classes: Sequence[ClassLike] = ('1234', '1232', '1214', '1212')) -> SweepReport:
    """
    Tournament censuses of the given classes under each payoff matrix.

    Every matrix is validated before the first run.
    """
    parsed = [m if isinstance(m, PayoffMatrix) else PayoffMatrix.from_string(m) for m in matrices]
    if not parsed:
        raise ValueError("Sweep needs at least one payoff matrix")
    try:
        rows = []
        for pm in parsed:
            logger.info(f"Sweep: payoff ({pm}), submodular={is_submodular(pm)}")
            tournament = run_class_tournament(classes, spec.with_payoff(pm))
            for (a, b), report in tournament.censuses.items():
                rows.append({
                    'payoff': str(pm), 'submodular': is_submodular(pm),
                    'class_x': a, 'class_y': b,
                    **{label: report.counts[label] for label in OUTCOME_ORDER},
                    'unconfirmed': report.unconfirmed,
                    'mean_u': report.mean_u, 'mean_v': report.mean_v,
                })
        return SweepReport(pd.DataFrame(rows))
    except Exception as e:
        logger.error(f"Submodularity sweep failed: {str(e)}")
        raise
