"""
Command Line - Data generators for solves, Pareto curves, spectra and iteration counts

Each command writes CSV/JSON into ``--out`` together with a manifest.json that
``replay`` can re-run. Exit codes: 0 success, 2 usage error, 3 numerical failure
(non-convergence under ``--strict``).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import pandas as pd
from pydantic import BaseModel, Field

from . import __version__, exports
from .errors import NonConvergenceError, Sr3ToolkitError
from .gsvd import MAX_DENSE_COLS, fk_singular_values, gsvd, hk_singular_values, standard_form_solution
from .linops import operator_norm, to_dense
from .pareto import ParetoOptions, trace_pareto
from .problems import PROBLEMS, Problem, make_problem
from .prox import Regularizer
from .settings import configure_logging, get_settings
from .sr3 import FistaOptions, SolveResult, Sr3Config, Sr3Mode, fista_solve, sr3_solve
from .utils import linear_tau_grid, parse_float_list, relative_error

logger = logging.getLogger(__name__)

EXIT_NUMERICAL_FAILURE = 3

SOLVE_METHODS = ('sr3', 'sr3-exact', 'fista', 'standard-form')


class RunManifest(BaseModel):
    """Everything needed to re-run a command and reproduce its outputs"""
    command: str
    problem: Dict[str, Any]
    config: Dict[str, Any] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)
    seed: int
    args: Dict[str, Any] = Field(default_factory=dict)
    version: str = __version__


class NumericalFailure(click.ClickException):
    exit_code = EXIT_NUMERICAL_FAILURE


# ============================================================================
# SHARED OPTIONS AND HELPERS
# ============================================================================

def problem_options(f):
    """Problem selection and output directory flags shared by every command"""
    options = [
        click.option('--problem', 'problem_name', type=click.Choice(sorted(PROBLEMS)), required=True,
                     help='Test problem generator'),
        click.option('--n', type=int, default=None, help='Problem size (1-D problems)'),
        click.option('--grid', type=int, default=None, help='Pixels per side (tomo)'),
        click.option('--seed', type=int, default=None, help='Seed (default SR3_SEED)'),
        click.option('--out', type=click.Path(file_okay=False), default=None,
                     help='Output directory (default SR3_OUTPUT_DIR/<command>)'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def sr3_options(f):
    options = [
        click.option('--eps', type=float, default=1e-6, show_default=True, help='Inexact inner tolerance'),
        click.option('--delta', type=float, default=1e-6, show_default=True, help='Outer tolerance'),
        click.option('--max-outer', type=int, default=500, show_default=True),
        click.option('--max-inner', type=int, default=1000, show_default=True),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _build_problem(problem_name: str, n: Optional[int], grid: Optional[int],
                   seed: Optional[int]) -> Problem:
    seed = get_settings().seed if seed is None else seed
    try:
        return make_problem(problem_name, n=n, grid=grid, seed=seed)
    except ValueError as e:
        raise click.UsageError(str(e))


def _resolve_tau(tau: str, problem: Problem) -> float:
    if tau == 'auto':
        return problem.tau_star
    try:
        value = float(tau)
    except ValueError:
        raise click.BadParameter(f"expected 'auto' or a number, got '{tau}'", param_hint='--tau')
    if not value >= 0 or math.isinf(value):
        raise click.BadParameter(f"tau must be finite and nonnegative, got {tau}", param_hint='--tau')
    return value


def _resolve_kappas(raw, allow_inf: bool = True) -> List[float]:
    try:
        kappas = parse_float_list(raw)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint='--kappa')
    if not kappas:
        raise click.BadParameter("at least one kappa is required", param_hint='--kappa')
    for kappa in kappas:
        if not kappa > 0 or (math.isinf(kappa) and not allow_inf):
            raise click.BadParameter(f"invalid kappa {kappa}", param_hint='--kappa')
    return kappas


def _output_dir(out: Optional[str], command: str) -> Path:
    directory = Path(out) if out else get_settings().output_dir / command
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _kappa_label(kappa: float) -> str:
    return "inf" if math.isinf(kappa) else f"{kappa:g}"


def _write_manifest(ctx: click.Context, directory: Path, problem: Problem,
                    config: Dict[str, Any], outputs: List[Path]) -> None:
    args = {k: (list(v) if isinstance(v, tuple) else v) for k, v in ctx.params.items()}
    args.pop('out', None)
    if 'seed' in args:
        args['seed'] = problem.seed
    manifest = RunManifest(command=ctx.command.name, problem=problem.to_dict(), config=config,
                           outputs=[p.name for p in outputs], seed=problem.seed, args=args)
    exports.write_json(directory / "manifest.json", manifest.model_dump())


def _check_converged(strict: bool, results: List[SolveResult]) -> None:
    for result in results:
        try:
            result.raise_if_not_converged()
        except NonConvergenceError as e:
            if strict:
                raise NumericalFailure(str(e))
            logger.warning(str(e))


# ============================================================================
# COMMANDS
# ============================================================================

@click.group()
@click.version_option(__version__)
@click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
              default=None, help='Log level (default SR3_LOG_LEVEL)')
def cli(log_level):
    """SR3 toolkit: relaxed regularized least squares experiments"""
    configure_logging(log_level)


def _solve_original(problem: Problem, tau: float, fista: FistaOptions,
                    force_standard_form: bool = False) -> SolveResult:
    """FISTA on the original problem; general L goes through the standard form"""
    reg = Regularizer.l1_ball(tau)
    if problem.L.is_identity and not force_standard_form:
        norm = operator_norm(problem.A)
        return fista_solve(problem.A, problem.b, reg, 1.0 / norm ** 2, max_iter=fista.max_iter,
                           gap_tol=fista.gap_tol, restart=fista.restart)
    if problem.A.cols > MAX_DENSE_COLS:
        raise click.UsageError(f"fista with a general L needs n <= {MAX_DENSE_COLS}")
    solution = standard_form_solution(to_dense(problem.A), to_dense(problem.L), problem.b, reg, fista)
    result = solution.result
    result.x, result.y = solution.x, problem.L.matvec(solution.x)
    result.method = "standard-form"
    return result


@cli.command()
@problem_options
@click.option('--method', type=click.Choice(SOLVE_METHODS), default='sr3', show_default=True)
@click.option('--kappa', type=float, default=1.0, show_default=True)
@click.option('--tau', default='auto', show_default=True, help="l1 radius or 'auto' (||L x_true||_1)")
@sr3_options
@click.option('--max-iter', type=int, default=5000, show_default=True, help='FISTA iteration cap')
@click.option('--gap-tol', type=float, default=1e-8, show_default=True, help='FISTA gap tolerance')
@click.option('--strict', is_flag=True, help='Exit with code 3 on non-convergence')
@click.pass_context
def solve(ctx, problem_name, n, grid, seed, out, method, kappa, tau, eps, delta, max_outer, max_inner,
          max_iter, gap_tol, strict):
    """Solve one problem and write x, y, the result summary and histories"""
    problem = _build_problem(problem_name, n, grid, seed)
    tau_value = _resolve_tau(tau, problem)
    directory = _output_dir(out, 'solve')

    try:
        if method.startswith("sr3"):
            mode = Sr3Mode.EXACT if method == "sr3-exact" else Sr3Mode.INEXACT
            config = Sr3Config(kappa=kappa, reg=Regularizer.l1_ball(tau_value), inner_eps=eps,
                               outer_delta=delta, max_outer=max_outer, max_inner=max_inner, mode=mode)
            config_dict = config.to_dict()
        else:
            fista = FistaOptions(max_iter=max_iter, gap_tol=gap_tol)
            config_dict = {"method": method, "tau": tau_value, "max_iter": max_iter, "gap_tol": gap_tol}
    except ValueError as e:
        raise click.UsageError(str(e))

    try:
        if method.startswith("sr3"):
            result = sr3_solve(problem.A, problem.L, problem.b, config)
        else:
            result = _solve_original(problem, tau_value, fista, force_standard_form=method == "standard-form")
    except (Sr3ToolkitError, ValueError) as e:
        logger.error(f"Solve failed: {e}")
        raise NumericalFailure(str(e))

    summary = result.to_dict()
    summary["error_vs_truth"] = relative_error(result.x, problem.x_true)
    outputs = [
        exports.write_vector(directory / "x.csv", result.x, column="x"),
        exports.write_vector(directory / "y.csv", result.y, column="y"),
        exports.write_json(directory / "result.json", summary),
        exports.write_table(directory / "history.csv", result.history_frame()),
    ]
    _write_manifest(ctx, directory, problem, config_dict, outputs)
    click.echo(f"{result.method}: {result.stop_reason} after {result.outer_iterations} iterations "
               f"(cost {result.total_cost}, error {summary['error_vs_truth']:.3e}) -> {directory}")
    _check_converged(strict, [result])


@cli.command()
@problem_options
@click.option('--kappa', 'kappa_values', multiple=True, default=('1', 'inf'), show_default=True,
              help="Relaxation parameters, repeatable or comma separated, 'inf' for the original curve")
@click.option('--tau-max', default='auto', show_default=True, help="Largest radius or 'auto' (1.2 tau_star)")
@click.option('--tau-count', type=int, default=20, show_default=True)
@click.option('--pareto-method', type=click.Choice(['sr3', 'dense']), default='sr3', show_default=True)
@sr3_options
@click.option('--workers', type=int, default=None, help='Concurrent tau samples (default SR3_MAX_WORKERS)')
@click.pass_context
def pareto(ctx, problem_name, n, grid, seed, out, kappa_values, tau_max, tau_count, pareto_method,
           eps, delta, max_outer, max_inner, workers):
    """Trace Pareto curves for each kappa and write a corner summary"""
    problem = _build_problem(problem_name, n, grid, seed)
    kappas = _resolve_kappas(kappa_values)
    if tau_count < 1:
        raise click.BadParameter("the tau grid must contain at least one point", param_hint='--tau-count')
    upper = 1.2 * problem.tau_star if tau_max == 'auto' else _resolve_tau(tau_max, problem)
    if not upper > 0:
        raise click.BadParameter("the tau grid is empty for a zero radius", param_hint='--tau-max')
    taus = linear_tau_grid(upper, tau_count)
    options = ParetoOptions(method=pareto_method, inner_eps=eps, outer_delta=delta, max_outer=max_outer,
                            max_inner=max_inner, max_workers=workers or get_settings().max_workers)
    directory = _output_dir(out, 'pareto')

    outputs, summaries = [], []
    for kappa in kappas:
        try:
            curve = trace_pareto(problem.A, problem.L, problem.b, taus, kappa, options)
        except (Sr3ToolkitError, ValueError) as e:
            logger.error(f"Pareto trace at kappa={_kappa_label(kappa)} failed: {e}")
            raise NumericalFailure(str(e))
        outputs.append(exports.write_table(directory / f"curve_kappa_{curve.label}.csv", curve.to_frame()))
        summaries.append(curve.summary())
    outputs.append(exports.write_json(directory / "corners.json", {'curves': summaries}))

    config = {'taus': taus, 'kappas': [_kappa_label(k) for k in kappas], 'method': pareto_method}
    _write_manifest(ctx, directory, problem, config, outputs)
    click.echo(f"Traced {len(kappas)} curves with {len(taus)} points -> {directory}")


@cli.command()
@problem_options
@click.option('--kappa', 'kappa_values', multiple=True, default=('1e-2', '1', '1e2', 'inf'), show_default=True)
@click.pass_context
def spectrum(ctx, problem_name, n, grid, seed, out, kappa_values):
    """Singular values of F_kappa, H_kappa and the generalized singular values"""
    problem = _build_problem(problem_name, n, grid, seed)
    kappas = _resolve_kappas(kappa_values)
    if problem.A.cols > MAX_DENSE_COLS:
        raise click.UsageError(f"spectra use dense factorizations, n must be <= {MAX_DENSE_COLS}")
    directory = _output_dir(out, 'spectrum')

    A, L = to_dense(problem.A), to_dense(problem.L)
    try:
        factors = gsvd(A, L)
    except Sr3ToolkitError as e:
        raise NumericalFailure(str(e))

    fk = pd.DataFrame({f"kappa_{_kappa_label(k)}": fk_singular_values(factors, k) for k in kappas})
    hk = pd.DataFrame({f"kappa_{_kappa_label(k)}": hk_singular_values(A, L, k)
                       for k in kappas if not math.isinf(k)})
    outputs = [
        exports.write_table(directory / "fk_singular_values.csv", fk),
        exports.write_table(directory / "hk_singular_values.csv", hk),
        exports.write_vector(directory / "generalized_values.csv", factors.generalized_values(),
                             column="sigma_over_gamma"),
    ]
    config = {'kappas': [_kappa_label(k) for k in kappas], 'regime': factors.regime.value,
              'rank_A': factors.rank_A, 'rank_L': factors.rank_L}
    _write_manifest(ctx, directory, problem, config, outputs)
    click.echo(f"GSVD regime {factors.regime.value}, rank_L={factors.rank_L} -> {directory}")


@cli.command()
@problem_options
@click.option('--kappa', 'kappa_values', multiple=True, default=('1e-2', '1', '1e2'), show_default=True)
@click.option('--mode', type=click.Choice(['exact', 'inexact', 'both']), default='both', show_default=True)
@click.option('--tau', default='auto', show_default=True)
@sr3_options
@click.option('--workers', type=int, default=None, help='Concurrent solves (default SR3_MAX_WORKERS)')
@click.option('--strict', is_flag=True, help='Exit with code 3 on non-convergence')
@click.pass_context
def iterations(ctx, problem_name, n, grid, seed, out, kappa_values, mode, tau, eps, delta,
               max_outer, max_inner, workers, strict):
    """Outer, inner and total iteration counts over a kappa sweep"""
    problem = _build_problem(problem_name, n, grid, seed)
    kappas = _resolve_kappas(kappa_values, allow_inf=False)
    tau_value = _resolve_tau(tau, problem)
    modes = [Sr3Mode.EXACT, Sr3Mode.INEXACT] if mode == 'both' else [Sr3Mode(mode)]
    directory = _output_dir(out, 'iterations')

    try:
        configs = [Sr3Config(kappa=k, reg=Regularizer.l1_ball(tau_value), inner_eps=eps, outer_delta=delta,
                             max_outer=max_outer, max_inner=max_inner, mode=m)
                   for k in kappas for m in modes]
    except ValueError as e:
        raise click.UsageError(str(e))

    def run(config):
        return sr3_solve(problem.A, problem.L, problem.b, config)

    max_workers = workers or get_settings().max_workers
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(run, configs))
    else:
        results = [run(c) for c in configs]

    rows = [{
        'kappa': c.kappa,
        'mode': c.mode.value,
        'outer': r.outer_iterations,
        'total_inner': r.total_inner_iterations,
        'total_cost': r.total_cost,
        'converged': r.converged,
    } for c, r in zip(configs, results)]
    outputs = [exports.write_table(directory / "iterations.csv", pd.DataFrame(rows))]
    config = {'kappas': kappas, 'modes': [m.value for m in modes], 'tau': tau_value}
    _write_manifest(ctx, directory, problem, config, outputs)
    click.echo(f"Ran {len(rows)} solves -> {directory}")
    _check_converged(strict, results)


@cli.command()
@click.option('--manifest', 'manifest_path', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--out', type=click.Path(file_okay=False), required=True)
@click.pass_context
def replay(ctx, manifest_path, out):
    """Re-run the command recorded in a manifest into a new directory"""
    manifest = RunManifest.model_validate(exports.read_json(manifest_path))
    command = cli.get_command(ctx, manifest.command)
    if command is None or manifest.command == 'replay':
        raise click.UsageError(f"manifest names an unknown command '{manifest.command}'")
    args = dict(manifest.args)
    if 'seed' in args and args['seed'] is None:
        args['seed'] = manifest.seed
    for name, value in args.items():
        if isinstance(value, list):
            args[name] = tuple(value)
    logger.info(f"Replaying '{manifest.command}' from {manifest_path}")
    ctx.invoke(command, out=out, **args)
