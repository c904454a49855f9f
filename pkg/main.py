import argparse
import sys
from dataclasses import replace
from typing import Callable, Dict, List, Optional

import numpy as np

from analysis import (
    check_exploitation_structure,
    classify_outcome,
    integrate_lv,
    is_submodular,
    lv_fixed_point,
    lv_vector_field,
)
from config import RunConfig
from dynamics import LearningConfig, integrate_match
from experiments import (
    EnsembleSpec,
    draw_initial_states,
    run_class_tournament,
    run_generosity_experiment,
    run_match_ensemble,
    run_one_sided_learning,
    run_submodularity_sweep,
)
from game_model import ClassStrategy, InformationClass, PayoffMatrix, resolve_class_list
from logger_config import setup_logger, get_default_log_file
from result_writer import ResultWriter
from verify_outputs import verify_outputs

# Setup logger
logger = setup_logger('main', get_default_log_file('main'))

FIG2_POINTS = 201


def parse_floats(text: str, name: str) -> List[float]:
    try:
        values = [float(v) for v in str(text).replace(' ', '').split(',') if v]
    except ValueError:
        raise ValueError(f"--{name.replace('_', '-')} must be comma separated numbers, got '{text}'")
    if not values:
        raise ValueError(f"--{name.replace('_', '-')} is empty")
    return values


def learning_config(rc: RunConfig, class_x, class_y, payoff: Optional[PayoffMatrix] = None) -> LearningConfig:
    return LearningConfig(
        class_x=class_x,
        class_y=class_y,
        payoff=payoff or PayoffMatrix.from_string(rc.payoff),
        dt=rc.dt,
        t_max=rc.t_max,
        epsilon=rc.epsilon,
        mode=rc.mode,
        window=rc.window * rc.t_max,
        stride=rc.stride,
    )


def ensemble_spec(rc: RunConfig, class_x, class_y) -> EnsembleSpec:
    return EnsembleSpec(
        learning=learning_config(rc, class_x, class_y),
        samples=rc.samples,
        seed=rc.seed,
        chunk_size=rc.chunk_size,
        delta=rc.delta,
        drop_r_edge=rc.drop_r_edge,
        jobs=rc.jobs,
    )


def fixed_opponent(rc: RunConfig, info_class: Optional[InformationClass] = None) -> ClassStrategy:
    """
    --fixed-opponent as a class strategy.

    With info_class given the value count must match it; otherwise the class is
    --class-y, or inferred from the value count when --class-y does not fit.
    """
    values = parse_floats(rc.fixed_opponent, 'fixed_opponent')
    if info_class is not None:
        if info_class.n_blocks != len(values):
            raise ValueError(f"--fixed-opponent has {len(values)} values but class {info_class.code} "
                             f"has {info_class.n_blocks} blocks")
        return ClassStrategy(info_class, tuple(values))
    info_class = InformationClass(rc.class_y)
    if info_class.n_blocks != len(values):
        inferred = {1: '1111', 2: '1212', 4: '1234'}
        if len(values) not in inferred:
            raise ValueError(f"--fixed-opponent has {len(values)} values; give --class-y with that many blocks")
        info_class = InformationClass(inferred[len(values)])
    return ClassStrategy(info_class, tuple(values))


def metadata(rc: RunConfig) -> Dict[str, object]:
    config = {k: v for k, v in rc.to_dict().items() if k != 'out'}
    return {'command': rc.command, 'seed': rc.seed, 'config': config}


def cmd_simulate(rc: RunConfig, writer: ResultWriter):
    """Single match: trajectory CSV plus outcome JSON"""
    cfg = learning_config(rc, rc.class_x, rc.class_y)
    draw_x, draw_y, seeds = draw_initial_states(cfg.class_x, cfg.class_y, rc.seed, [0])
    init_x = parse_floats(rc.init_x, 'init_x') if rc.init_x else draw_x[0]
    if rc.init_y:
        init_y = parse_floats(rc.init_y, 'init_y')
    elif cfg.mode == 'one_sided':
        init_y = fixed_opponent(rc, cfg.class_y).as_array()
    else:
        init_y = draw_y[0]

    logger.info(f"Step 1: Integrating {cfg.class_x.code} vs {cfg.class_y.code} for t_max={cfg.t_max:g}...")
    traj = integrate_match(np.asarray(init_x, dtype=float), np.asarray(init_y, dtype=float), cfg)

    logger.info("Step 2: Classifying the trailing window...")
    outcome = classify_outcome(traj.p_window, rc.delta)
    structure = check_exploitation_structure(traj, cycle_tol=cfg.cycle_tol, epsilon=cfg.epsilon)

    logger.info("Step 3: Writing outputs...")
    writer.write_csv(traj.to_frame(), 'trajectory.csv')
    writer.write_json({
        'class_x': cfg.class_x.code,
        'class_y': cfg.class_y.code,
        'payoff': str(cfg.payoff),
        'sample_seed': int(seeds[0]),
        'init_x': list(traj.x[0]),
        'init_y': list(traj.y[0]),
        'final_x': list(traj.x[-1]),
        'final_y': list(traj.y[-1]),
        'attractor': traj.attractor,
        'label': outcome.label.value,
        'p_window': traj.p_window.as_array(),
        'u_mean': traj.window.u_mean,
        'v_mean': traj.window.v_mean,
        'exploitation_structure': structure.holds,
        'exploiter': structure.exploiter,
    }, 'outcome.json')
    logger.info(f"Outcome: {outcome.label.value} ({traj.attractor})")


def cmd_ensemble(rc: RunConfig, writer: ResultWriter):
    """Censuses for every listed class pair, or one-sided learning curves"""
    xs = resolve_class_list(rc.class_x)
    ys = resolve_class_list(rc.class_y)
    if rc.mode.replace('-', '_') == 'one_sided':
        opponent = fixed_opponent(rc)
        spec = ensemble_spec(rc, xs[0], opponent.info_class)
        times = np.linspace(0.0, rc.t_max, FIG2_POINTS)
        report = run_one_sided_learning(spec, opponent, times, learners=xs, starts=rc.starts)
        writer.write_csv(report.curve, 'one_sided_curve.csv')
        writer.write_csv(report.terminal, 'one_sided_terminal.csv')
        writer.write_json(report.to_summary(), 'one_sided.json')
        return

    summaries = []
    for cx in xs:
        for cy in ys:
            report = run_match_ensemble(ensemble_spec(rc, cx, cy))
            writer.write_csv(report.samples, f"samples_{cx.code}_{cy.code}.csv")
            summaries.append(report.to_summary())
    writer.write_json({'censuses': summaries}, 'census.json')


def cmd_tournament(rc: RunConfig, writer: ResultWriter):
    """Pairwise censuses over a class list"""
    classes = resolve_class_list(rc.classes)
    spec = ensemble_spec(rc, classes[0], classes[0])
    report = run_class_tournament(classes, spec)
    writer.write_csv(report.directions, 'directions.csv')
    writer.write_csv(report.mean_payoff.reset_index().rename(columns={'index': 'class'}), 'mean_payoff.csv')
    writer.write_csv(report.payoff_difference.reset_index().rename(columns={'index': 'class'}),
                     'payoff_difference.csv')
    writer.write_workbook({
        'directions': report.directions.set_index(['class_x', 'class_y']),
        'mean_payoff': report.mean_payoff,
        'payoff_difference': report.payoff_difference,
    }, 'tournament.xlsx')
    writer.write_json(report.to_summary(), 'tournament.json')


def cmd_fig2(rc: RunConfig, writer: ResultWriter):
    """Memory-one and reactive learners against a fixed opponent"""
    opponent = fixed_opponent(rc)
    rc = replace(rc, mode='one_sided')
    spec = ensemble_spec(rc, '1234', opponent.info_class)
    times = np.linspace(0.0, rc.t_max, FIG2_POINTS)
    report = run_one_sided_learning(spec, opponent, times, learners=('1234', '1212'), starts=rc.starts)
    writer.write_csv(report.curve, 'fig2_curve.csv')
    writer.write_csv(report.terminal, 'fig2_terminal.csv')
    summary = report.to_summary()
    terminal = report.terminal
    summary['memory_one_dominates'] = bool(np.all(terminal['u_1234'] >= terminal['u_1212'] - 1e-6))
    writer.write_json(summary, 'fig2.json')


def cmd_fig5(rc: RunConfig, writer: ResultWriter):
    """Generosity of memory-one learners that used to exploit"""
    spec = ensemble_spec(rc, '1212', '1212')
    report = run_generosity_experiment(rc.equilibria, spec)
    writer.write_csv(report.table, 'fig5.csv')
    writer.write_json(report.to_summary(), 'fig5.json')


def cmd_sweep(rc: RunConfig, writer: ResultWriter):
    """Censuses of a class list under several payoff matrices"""
    matrices = [PayoffMatrix.from_string(m) for m in rc.matrices.split(';') if m.strip()]
    classes = resolve_class_list(rc.classes)
    spec = ensemble_spec(rc, classes[0], classes[0])
    report = run_submodularity_sweep(matrices, spec, classes=classes)
    writer.write_csv(report.table, 'sweep.csv')
    writer.write_json({'matrices': report.to_summary()}, 'sweep.json')


def cmd_lv(rc: RunConfig, writer: ResultWriter):
    """Reduced exploitation subsystem: fixed point, one orbit and the vector field"""
    pm = PayoffMatrix.from_string(rc.payoff)
    fp = lv_fixed_point(pm)
    if rc.init_x:
        x3, y4 = parse_floats(rc.init_x, 'init_x')[:2]
    else:
        x3, y4 = min(fp.x3 + 0.1, 0.95), fp.y4
    orbit = integrate_lv(x3, y4, pm, dt=rc.dt, t_max=rc.t_max, stride=rc.stride)
    writer.write_csv(orbit, 'lv_orbit.csv')
    writer.write_csv(lv_vector_field(pm), 'lv_field.csv')
    writer.write_json({
        'payoff': str(pm),
        'submodular': is_submodular(pm),
        'fixed_point': fp._asdict(),
        'start': {'x3': x3, 'y4': y4},
        'H_start': orbit['H'].iloc[0],
        'H_max_drift': float((orbit['H'] - orbit['H'].iloc[0]).abs().max()),
    }, 'lv.json')


COMMANDS: Dict[str, Callable[[RunConfig, ResultWriter], None]] = {
    'simulate': cmd_simulate,
    'ensemble': cmd_ensemble,
    'tournament': cmd_tournament,
    'fig2': cmd_fig2,
    'fig5': cmd_fig5,
    'sweep': cmd_sweep,
    'lv': cmd_lv,
}


def run_command(rc: RunConfig) -> str:
    """
    Execute one resolved run and write its manifest

    Returns:
        str: The run directory
    """
    if rc.command not in COMMANDS:
        raise ValueError(f"Unknown command '{rc.command}'")
    writer = ResultWriter(rc.output_dir(), metadata(rc))
    COMMANDS[rc.command](rc, writer)
    writer.write_manifest()
    return writer.out_dir


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='KEY=VALUE file; flags override its values')
    common.add_argument('--class-x', dest='class_x', help='Class code of seat x (or all13/all15/four for ensemble)')
    common.add_argument('--class-y', dest='class_y', help='Class code of seat y')
    common.add_argument('--classes', help='Class list: four, all13, all15 or comma separated codes')
    common.add_argument('--payoff', help='Payoff scores T,R,P,S')
    common.add_argument('--matrices', help='Payoff matrices for sweep, separated by ";"')
    common.add_argument('--samples', type=int, help='Samples per ensemble')
    common.add_argument('--seed', type=int, help='Master seed')
    common.add_argument('--dt', type=float, help='RK4 step size')
    common.add_argument('--t-max', dest='t_max', type=float, help='Integration horizon')
    common.add_argument('--epsilon', type=float, help='Boundary clipping margin')
    common.add_argument('--delta', type=float, help='Outcome classification threshold')
    common.add_argument('--window', type=float, help='Trailing window as a fraction of t-max')
    common.add_argument('--stride', type=int, help='Steps between stored samples')
    common.add_argument('--mode', choices=['mutual', 'one-sided', 'one_sided'], help='Learning mode')
    common.add_argument('--fixed-opponent', dest='fixed_opponent', help='Frozen opponent block values p1,p2,...')
    common.add_argument('--starts', choices=['matched', 'own'],
                        help='One-sided starts: shared memory-one start or each learner on its own cube')
    common.add_argument('--init-x', dest='init_x', help='Initial block values of seat x')
    common.add_argument('--init-y', dest='init_y', help='Initial block values of seat y')
    common.add_argument('--equilibria', type=int, help='Exploitation equilibria to harvest (fig5)')
    common.add_argument('--chunk-size', dest='chunk_size', type=int, help='Samples integrated together')
    common.add_argument('--drop-r-edge', dest='drop_r_edge', action='store_true', default=None,
                        help='Leave out equilibria where exactly one seat earns R')
    common.add_argument('--jobs', type=int, help='Worker processes')
    common.add_argument('--out', help='Output directory')

    parser = argparse.ArgumentParser(description='Mutual learning between information classes in the repeated PD')
    sub = parser.add_subparsers(dest='command', required=True)
    for name, func in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=func.__doc__)
    verify = sub.add_parser('verify', help='Check a run directory against its manifest')
    verify.add_argument('run_dir', help='Directory holding manifest.json')
    verify.add_argument('--rerun', action='store_true', help='Re-execute the embedded config and compare bytes')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == 'verify':
            results = verify_outputs(args.run_dir, rerun=args.rerun)
            return 0 if results['success'] else 1

        flags = {k: v for k, v in vars(args).items() if k != 'config'}
        rc = RunConfig.resolve(flags, args.config)
        logger.info(f"Starting '{rc.command}' with seed {rc.seed}, output in {rc.output_dir()}")
        run_dir = run_command(rc)
        logger.info(f"Run complete: {run_dir}")
        return 0
    except Exception as e:
        logger.error(f"Error in main process: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    exit(main())
