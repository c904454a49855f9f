"""
Tests for experiments: seeded ensembles, censuses and the experiment drivers.

Fast tests use tiny horizons and check structure, determinism and symmetry.
Ensemble-scale behaviour is in the classes marked slow (run with --run-slow).
"""
import numpy as np
import pandas as pd
import pytest

from analysis import EXPLOIT_LABELS, OUTCOME_ORDER, Outcome, in_feasible_region
from dynamics import LearningConfig
from experiments import (
    GENEROSITY_COLUMNS,
    CensusReport,
    EnsembleSpec,
    SweepReport,
    common_class,
    deterministic_seed,
    draw_initial_states,
    exploitation_edges,
    is_complex_exploiting_simple,
    learn_from_equilibria,
    on_r_edge,
    pair_key,
    run_class_tournament,
    run_generosity_experiment,
    run_match_ensemble,
    run_one_sided_learning,
    run_submodularity_sweep,
    summarize_tournament,
)
from game_model import STANDARD_PAYOFF, ClassStrategy, InformationClass, PayoffMatrix

REACTIVE_09_01 = ClassStrategy(InformationClass('1212'), (0.9, 0.1))


def tiny_spec(class_x='1234', class_y='1212', samples=4, t_max=10.0, dt=0.1, **kwargs):
    learning = LearningConfig(class_x, class_y, t_max=t_max, dt=dt)
    return EnsembleSpec(learning, samples=samples, seed=11, chunk_size=2, **kwargs)


def synthetic_census(class_x, class_y, exploit_x=0, exploit_y=0):
    counts = {label: 0 for label in OUTCOME_ORDER}
    counts[Outcome.EXPLOIT_BY_X.value] = exploit_x
    counts[Outcome.EXPLOIT_BY_Y.value] = exploit_y
    counts[Outcome.MUTUAL_DEFECTION.value] = 10 - exploit_x - exploit_y
    return CensusReport(InformationClass(class_x), InformationClass(class_y), STANDARD_PAYOFF, pd.DataFrame(),
                        counts, 2.0, 2.0, {'x_gains': exploit_x, 'y_gains': exploit_y})


FOUR = ['1234', '1232', '1214', '1212']
FOUR_EDGES = {('1212', '1232'), ('1212', '1214'), ('1212', '1234'),
              ('1214', '1232'), ('1214', '1234'), ('1232', '1234')}


def four_class_censuses():
    censuses = {}
    for i, a in enumerate(FOUR):
        for b in FOUR[i:]:
            censuses[(a, b)] = synthetic_census(a, b, int((a, b) in FOUR_EDGES), int((b, a) in FOUR_EDGES))
    return censuses


class TestSeeds:
    """Per-sample seeds and initial states."""

    def test_deterministic_seed(self):
        """Seeds are stable, distinct across parts and fit in 31 bits."""
        a = deterministic_seed('sample', 1, '1212-1234', 0)
        assert a == deterministic_seed('sample', 1, '1212-1234', 0)
        assert a != deterministic_seed('sample', 1, '1212-1234', 1)
        assert 0 <= a < 2 ** 31

    def test_pair_key_is_order_free(self):
        """Both orientations share one key."""
        assert pair_key('1234', '1212') == pair_key('1212', '1234') == '1212-1234'

    def test_swapped_seats_swap_starts(self):
        """Exchanging the classes exchanges the initial states."""
        x1, y1, s1 = draw_initial_states('1234', '1212', 5, range(6))
        x2, y2, s2 = draw_initial_states('1212', '1234', 5, range(6))
        np.testing.assert_array_equal(x1, y2)
        np.testing.assert_array_equal(y1, x2)
        np.testing.assert_array_equal(s1, s2)
        assert x1.shape == (6, 4) and y1.shape == (6, 2)

    def test_starts_inside_unit_cube(self):
        """Initial block values are uniform on [0, 1)."""
        x, y, _ = draw_initial_states('1232', '1214', 3, range(50))
        assert x.min() >= 0 and x.max() < 1
        assert y.min() >= 0 and y.max() < 1


class TestEnsembleSpec:
    """EnsembleSpec validation and helpers."""

    @pytest.mark.parametrize('kwargs', [{'samples': 0}, {'jobs': 0}, {'delta': 0.6}])
    def test_invalid(self, kwargs):
        """Empty ensembles, zero workers and wide deltas are refused."""
        learning = LearningConfig('1234', '1212', t_max=10, dt=0.1)
        with pytest.raises(ValueError):
            EnsembleSpec(learning, **kwargs)

    def test_for_pair(self):
        """for_pair swaps classes and optionally the mode."""
        spec = tiny_spec().for_pair('1111', '1214', mode='one_sided')
        assert (spec.class_x.code, spec.class_y.code, spec.mode) == ('1111', '1214', 'one_sided')


class TestCommonClass:
    """The coarsest class several classes can all represent."""

    def test_examples(self):
        """Joins of a few class pairs."""
        assert common_class(['1234', '1212']).code == '1212'
        assert common_class(['1214', '1232']).code == '1212'
        assert common_class(['1234']).code == '1234'
        assert common_class(['1212', '1133']).code == '1111'


class TestMatchEnsemble:
    """Mutual-learning censuses."""

    def test_census_shape(self):
        """Every sample gets a row, a label and a feasible payoff pair."""
        report = run_match_ensemble(tiny_spec())
        frame = report.samples
        assert len(frame) == 4
        assert frame.columns[:4].tolist() == ['sample_id', 'seed', 'init_x_1', 'init_x_2']
        assert sum(report.counts.values()) == 4
        assert list(report.counts) == OUTCOME_ORDER
        assert np.all(in_feasible_region(frame['u'].to_numpy(), frame['v'].to_numpy(), STANDARD_PAYOFF))
        assert STANDARD_PAYOFF.S <= report.mean_u <= STANDARD_PAYOFF.T

    def test_independent_of_jobs(self):
        """One worker and two workers give the same table."""
        serial = run_match_ensemble(tiny_spec(jobs=1))
        parallel = run_match_ensemble(tiny_spec(jobs=2))
        pd.testing.assert_frame_equal(serial.samples, parallel.samples)

    def test_seat_swap_mirrors(self):
        """(a, b) and (b, a) give mirror-image censuses."""
        forward = run_match_ensemble(tiny_spec('1212', '1234'))
        backward = run_match_ensemble(tiny_spec('1234', '1212'))
        pd.testing.assert_frame_equal(backward.mirrored().samples, forward.samples, check_dtype=False)
        assert backward.mean_u == forward.mean_v
        assert backward.directions == {'x_gains': forward.directions['y_gains'],
                                       'y_gains': forward.directions['x_gains']}

    def test_rejects_one_sided(self):
        """A census needs both players learning."""
        with pytest.raises(ValueError, match='mutual'):
            run_match_ensemble(tiny_spec().for_pair('1234', '1212', mode='one_sided'))

    def test_r_edge_filter(self):
        """Only lone R earners outside mutual cooperation are flagged."""
        u = np.array([3.0, 3.0, 3.0, 2.0])
        v = np.array([3.0, 1.5, 1.5, 2.0])
        labels = np.array(['mutual_cooperation', 'other', 'mutual_cooperation', 'other'])
        np.testing.assert_array_equal(on_r_edge(u, v, labels, STANDARD_PAYOFF), [False, True, False, False])

    def test_raw_and_confirmed_labels(self):
        """Both label columns are kept and every demotion is counted."""
        report = run_match_ensemble(tiny_spec(samples=6))
        frame = report.samples
        assert {'raw_label', 'label', 'structure'} <= set(frame.columns)
        demoted = frame['raw_label'] != frame['label']
        assert report.unconfirmed == int(demoted.sum())
        assert (frame.loc[demoted, 'raw_label'].isin(EXPLOIT_LABELS)).all()
        assert (frame.loc[demoted, 'label'] == Outcome.OTHER.value).all()
        assert report.to_summary()['unconfirmed_exploitation'] == report.unconfirmed

    def test_drop_r_edge_keeps_all_rows(self):
        """Dropped samples stay in the table but leave the counts."""
        report = run_match_ensemble(tiny_spec(drop_r_edge=True))
        assert len(report.samples) == 4
        assert sum(report.counts.values()) == 4 - report.dropped


class TestOneSidedLearning:
    """Learners against a frozen opponent."""

    def test_curve_layout(self):
        """The curve covers the requested times plus the end."""
        report = run_one_sided_learning(tiny_spec(samples=3), REACTIVE_09_01, [0.0, 5.0, 50.0])
        assert report.curve['time'].tolist() == [0.0, 5.0, 10.0]
        assert list(report.curve.columns) == ['time', 'u_1234', 'v_1234', 'u_1212', 'v_1212']
        assert len(report.terminal) == 3

    def test_matched_starts(self):
        """All learners start from the same memory-one strategy."""
        report = run_one_sided_learning(tiny_spec(samples=3), REACTIVE_09_01, [0.0])
        first = report.curve.iloc[0]
        assert first['u_1234'] == pytest.approx(first['u_1212'], abs=1e-12)

    def test_own_starts(self):
        """Each learner draws on its own cube from the shared per-sample seed."""
        matched = run_one_sided_learning(tiny_spec(samples=3), REACTIVE_09_01, [0.0])
        own = run_one_sided_learning(tiny_spec(samples=3), REACTIVE_09_01, [0.0], starts='own')
        again = run_one_sided_learning(tiny_spec(samples=3), REACTIVE_09_01, [0.0], starts='own')
        pd.testing.assert_frame_equal(own.terminal, again.terminal)
        assert not np.allclose(own.curve.iloc[0]['u_1234'], own.curve.iloc[0]['u_1212'])
        assert own.terminal['seed'].tolist() != matched.terminal['seed'].tolist()
        with pytest.raises(ValueError, match='starts'):
            run_one_sided_learning(tiny_spec(samples=3), REACTIVE_09_01, [0.0], starts='shared')

    def test_reactive_learner_leads_early(self):
        """From matched starts the reactive learner's mean payoff rises faster at first."""
        report = run_one_sided_learning(tiny_spec(samples=8, t_max=1.0, dt=0.05), REACTIVE_09_01, [0.0, 0.5])
        start, early = report.curve.iloc[0], report.curve.iloc[1]
        assert start['u_1212'] == pytest.approx(start['u_1234'], abs=1e-12)
        assert early['u_1212'] > early['u_1234']
        assert early['u_1212'] > start['u_1212']

    def test_deterministic(self):
        """Reruns give identical curves."""
        a = run_one_sided_learning(tiny_spec(samples=2), REACTIVE_09_01, [0.0, 5.0])
        b = run_one_sided_learning(tiny_spec(samples=2), REACTIVE_09_01, [0.0, 5.0])
        pd.testing.assert_frame_equal(a.curve, b.curve)


class TestTournament:
    """Pairwise censuses over a class list."""

    def test_small_tournament(self):
        """Two classes give three pairs and antisymmetric payoff differences."""
        report = run_class_tournament(['1111', '1212'], tiny_spec(samples=2, t_max=5.0))
        assert set(report.censuses) == {('1111', '1111'), ('1111', '1212'), ('1212', '1212')}
        assert report.mean_payoff.shape == (2, 2)
        diff = report.payoff_difference.to_numpy()
        np.testing.assert_allclose(diff, -diff.T)
        assert len(report.directions) == 3

    def test_duplicate_classes(self):
        """A class may appear only once."""
        with pytest.raises(ValueError, match='distinct'):
            run_class_tournament(['1212', '1212'], tiny_spec())

    def test_four_class_digraph(self):
        """The four-class exploitation digraph has no complex-over-simple edge."""
        report = summarize_tournament(FOUR, four_class_censuses())
        edges = {edge for census in report.censuses.values() for edge in exploitation_edges(census)}
        assert edges == FOUR_EDGES
        assert report.complex_exploits_simple == []
        assert not report.directions['complex_exploits_simple'].any()
        row = report.directions.set_index(['class_x', 'class_y']).loc[('1234', '1212')]
        assert row['exploiter'] == '1212'

    def test_lone_complex_over_simple_edge(self):
        """Among thirteen classes only 1232 over 1131 counts as complex exploiting simple."""
        censuses = four_class_censuses()
        censuses[('1131', '1232')] = synthetic_census('1131', '1232', exploit_y=3)
        report = summarize_tournament(FOUR + ['1131'], censuses)
        assert report.complex_exploits_simple == [('1232', '1131')]
        assert report.mean_payoff.loc['1131', '1232'] == 2.0

    def test_complex_exploits_simple(self):
        """Strict refinement decides which direction counts as complex over simple."""
        assert is_complex_exploiting_simple('1232', '1131')
        assert not is_complex_exploiting_simple('1212', '1234')
        assert not is_complex_exploiting_simple('1212', '1212')


class TestGenerosity:
    """Memory-one learning from a reactive exploitation equilibrium."""

    def test_exploiter_becomes_alternator(self):
        """The exploiter ends defecting after its own C and cooperating after its own D, and both gain."""
        eps = 1e-4
        spec = tiny_spec('1212', '1212', samples=1, t_max=600.0, dt=0.2)
        table = learn_from_equilibria([[0.3, eps]], [[1 - eps, 0.5]], spec)
        row = table.iloc[0]
        assert row['x1_after'] < 0.05 and row['x2_after'] < 0.05
        assert row['x3_after'] > 0.95
        assert row['u_after'] == pytest.approx(3.25, abs=1e-2)
        assert row['v_after'] == pytest.approx(2.0, abs=1e-2)
        assert row['delta_u'] >= -1e-6
        assert row['delta_v'] > row['delta_u']

    def test_empty_harvest(self):
        """No equilibria give an empty table with the usual columns."""
        table = learn_from_equilibria(np.empty((0, 2)), np.empty((0, 2)), tiny_spec('1212', '1212'))
        assert table.empty
        assert list(table.columns) == GENEROSITY_COLUMNS


class TestSweepSummary:
    """Per-matrix flags of a sweep table."""

    def test_flags(self):
        """Exploitation and alternation are flagged per payoff matrix."""
        rows = []
        for payoff, exploit in (('5,3,1,0', 4), ('5,4,2,0', 0)):
            counts = {label: 0 for label in OUTCOME_ORDER}
            counts[Outcome.EXPLOIT_BY_Y.value] = exploit
            rows.append({'payoff': payoff, 'submodular': payoff == '5,3,1,0', 'class_x': '1234',
                         'class_y': '1212', **counts, 'unconfirmed': 1, 'mean_u': 2.0, 'mean_v': 2.0})
        summary = SweepReport(pd.DataFrame(rows)).to_summary()
        assert summary['5,3,1,0']['exploitation_present']
        assert not summary['5,4,2,0']['exploitation_present']
        assert not summary['5,4,2,0']['alternating_present']
        assert summary['5,3,1,0']['unconfirmed_exploitation'] == 1

    def test_small_sweep_table(self):
        """A tiny sweep has one row per matrix and class pair."""
        sweep = run_submodularity_sweep(['5,3,1,0', '5,4,2,0'], tiny_spec(samples=2, t_max=5.0),
                                        classes=['1212', '1234'])
        assert len(sweep.table) == 6
        assert set(sweep.to_summary()) == {'5,3,1,0', '5,4,2,0'}


class TestPreconditions:
    """Drivers refuse bad inputs before running anything."""

    def test_generosity_needs_submodular_payoff(self):
        """(5,4,2,0) is refused."""
        spec = tiny_spec().with_payoff(PayoffMatrix(5, 4, 2, 0))
        with pytest.raises(ValueError, match='submodular'):
            run_generosity_experiment(5, spec)

    def test_generosity_needs_equilibria(self):
        """At least one equilibrium must be requested."""
        with pytest.raises(ValueError):
            run_generosity_experiment(0, tiny_spec())

    def test_sweep_rejects_invalid_matrix(self):
        """A matrix breaking T>R>P>S stops the sweep up front."""
        with pytest.raises(ValueError, match='T>R>P>S'):
            run_submodularity_sweep(['5,3,1,0', '5,3,0,1'], tiny_spec())


def acceptance_spec(class_x, class_y, samples=200, payoff=STANDARD_PAYOFF):
    learning = LearningConfig(class_x, class_y, payoff=payoff, t_max=3000, dt=0.05)
    return EnsembleSpec(learning, samples=samples, seed=1, chunk_size=100, jobs=4)


@pytest.mark.slow
class TestAcceptance:
    """Ensemble-scale behaviour of the learning dynamics."""

    def test_constant_class_only_defects(self):
        """Any census with 1111 is all mutual defection at payoff (1, 1)."""
        report = run_match_ensemble(acceptance_spec('1111', '1212', samples=100))
        assert report.counts['mutual_defection'] == 100
        np.testing.assert_allclose(report.samples['u'], 1.0, atol=1e-2)
        np.testing.assert_allclose(report.samples['v'], 1.0, atol=1e-2)

    def test_reactive_exploits_memory_one(self):
        """Between 1234 and 1212 only the reactive seat ever gains, confirmed or not."""
        report = run_match_ensemble(acceptance_spec('1234', '1212'))
        exploit = report.samples[report.samples['raw_label'].isin(EXPLOIT_LABELS)]
        assert len(exploit) > 0
        assert (exploit['v'] > exploit['u']).all()
        assert report.directions['x_gains'] == 0

    def test_symmetric_match_is_balanced(self):
        """Between two memory-one players both seats exploit about equally often."""
        report = run_match_ensemble(acceptance_spec('1234', '1234', samples=400))
        bx, by = report.counts['exploit_by_x'], report.counts['exploit_by_y']
        n = bx + by
        assert abs(bx - by) <= 3 * np.sqrt(n) + 1

    def test_memory_one_dominates_reactive_learner(self):
        """Against a fixed (0.9, 0.1) opponent memory-one ends at least as well off per sample."""
        spec = EnsembleSpec(LearningConfig('1234', '1212', t_max=3000, dt=0.05),
                            samples=200, seed=1, chunk_size=100, jobs=4)
        report = run_one_sided_learning(spec, REACTIVE_09_01, [0.0, 5.0, 10.0, 20.0])
        terminal = report.terminal
        assert (terminal['u_1234'] >= terminal['u_1212'] - 1e-6).all()

    def test_generosity(self):
        """A reactive exploiter turned memory-one becomes generous."""
        spec = acceptance_spec('1212', '1212', samples=200)
        report = run_generosity_experiment(20, spec)
        table = report.table
        assert report.harvested > 0
        assert (table['delta_u'] >= -1e-6).all()
        assert table['delta_v'].mean() > table['delta_u'].mean()

    def test_no_complex_exploits_simple_among_four(self):
        """The four-class tournament has no complex-over-simple exploitation."""
        report = run_class_tournament(['1234', '1232', '1214', '1212'], acceptance_spec('1234', '1212'))
        assert report.complex_exploits_simple == []

    def test_finer_class_exploits_coarser(self):
        """1232 exploits 1131 although it is the finer class."""
        report = run_match_ensemble(acceptance_spec('1131', '1232'))
        assert report.counts['exploit_by_y'] > 0
        assert report.counts['exploit_by_x'] == 0

    def test_submodular_sweep_has_exploitation(self):
        """(5,3,1,0) shows exploitation among the four classes."""
        sweep = run_submodularity_sweep(['5,3,1,0'], acceptance_spec('1234', '1212', samples=100))
        assert sweep.to_summary()['5,3,1,0']['exploitation_present']

    def test_non_submodular_sweep(self):
        """(5,4,2,0) leaves only mutual cooperation and mutual defection."""
        sweep = run_submodularity_sweep(['5,4,2,0'], acceptance_spec('1234', '1212', samples=100))
        table = sweep.table
        assert table[list(EXPLOIT_LABELS) + ['alternating']].to_numpy().sum() == 0
