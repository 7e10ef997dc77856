import csv
import io
import logging
import math
import sys
from typing import Any, Iterable, List, Optional, Sequence

import click
import numpy as np
from pydantic import ValidationError

from toral_nodal.classical import (
    frequency_box_check, gcd_table, laurent_consistency, to_laurent,
    zonal_nodal_check
)
from toral_nodal.constants import PROG_NAME
from toral_nodal.core import build_config_schema, dump_document, emit
from toral_nodal.eigenfun import (
    Eigenfunction, ShiftFrame, default_cutoff, make_geodesic_vanisher,
    random_eigenfunction
)
from toral_nodal.lattice import (
    ClusterParams, cluster_decompose, enumerate_shell, jarnik_scan, shell_stats
)
from toral_nodal.nodal import nodal_set, render_svg
from toral_nodal.oscillatory import decay_fit
from toral_nodal.restriction import (
    Cap, cap_propagate, check_cap_preconditions, choose_frame,
    circle_arc_sample, default_params, epsilon_d, lower_bound_certificate,
    restriction_ratios, segment_sample, sup_on_sample
)
from toral_nodal.surface import AnalyticGraph, build_patch
from toral_nodal.types import (
    CapFlowConfig, ClustersConfig, EigenfunctionDocument, ExperimentConfig,
    JarnikConfig, LaurentConfig, LegendreConfig, MeanSquareConfig, NodalConfig,
    OscDecayConfig, RestrictConfig, ShellConfig
)
from toral_nodal.utils import (
    DegenerateInput, InputInvalidError, NumericalFailure, OutputFormat,
    PreconditionViolated
)
from toral_nodal.validation import load_document, validate

logger = logging.getLogger(__name__)

EXIT_INVALID = 1
EXIT_NUMERICAL = 2


class ExperimentError(click.ClickException):
    def __init__(self, message: str, exit_code: int = EXIT_INVALID) -> None:
        super().__init__(message)
        self.exit_code = exit_code


class ExperimentGroup(click.Group):
    """Maps usage and validation errors to exit 1, numerical failures to 2."""

    def make_context(self, *args: Any, **kwargs: Any) -> click.Context:
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as e:
            e.exit_code = EXIT_INVALID
            raise

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_INVALID
            raise
        except (InputInvalidError, ValidationError) as e:
            raise ExperimentError(str(e), EXIT_INVALID) from e
        except NumericalFailure as e:
            raise ExperimentError(
                f"{type(e).__name__}: {str(e)}", EXIT_NUMERICAL
            ) from e


def experiment_options(func):
    """--config, --seed, -o/--output and --camel, shared by every command."""
    options = [
        click.option(
            "--config", "config_file", type=click.Path(exists=True, dir_okay=False),
            default=None, help="JSON file of config values (camelCase accepted).",
        ),
        click.option("--seed", type=int, default=None, help="Random seed."),
        click.option(
            "--output", "-o", type=click.Path(), default=None,
            help="Write the result to a file given by a path.",
        ),
        click.option(
            "--camel", is_flag=True, default=None,
            help="camelCase keys in JSON output.",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _table(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _eigenfunction(config: ExperimentConfig, d: int, r2: int, real: bool) -> Eigenfunction:
    path = getattr(config, "phi", None)
    if path is not None:
        phi = Eigenfunction.from_document(load_document(path, EigenfunctionDocument))
        if phi.d != d:
            raise InputInvalidError(f"{path} is on T^{phi.d}, expected T^{d}")
        return phi
    return random_eigenfunction(d, r2, config.seed, real=real)


@click.group(cls=ExperimentGroup)
@click.option("--verbose", "-v", is_flag=True, help="DEBUG logging on stderr.")
def cli(verbose: bool) -> None:
    """Lattice shells, restriction integrals and nodal sets on flat tori."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


@cli.command("shell")
@click.option("-d", "d", type=int, default=None, help="Dimension.")
@click.option("--r2", type=int, default=None, help="Squared radius.")
@experiment_options
@validate(ShellConfig)
def shell_command(config: ShellConfig) -> None:
    """Lattice points of Z^d on |xi|^2 = r2 with their statistics."""
    shell = enumerate_shell(config.d, config.r2)
    document = shell.document()
    document.stats = shell_stats(shell)
    emit(dump_document(document, config.camel), config.output)


@cli.command("clusters")
@click.option("-d", "d", type=int, default=None, help="Dimension.")
@click.option("--r2", type=int, default=None, help="Squared radius.")
@click.option("--rho", type=float, default=None, help="Separation scale.")
@click.option("--delta2", type=str, default=None, help="delta(2), e.g. 1/4.")
@experiment_options
@validate(ClustersConfig)
def clusters_command(config: ClustersConfig) -> None:
    """Decompose a shell into rho-separated clusters."""
    shell = enumerate_shell(config.d, config.r2)
    params = ClusterParams(
        rho=config.rho, delta2=config.delta2, max_dim=max(4, config.d)
    )
    decomposition = cluster_decompose(shell, params)
    emit(dump_document(decomposition.document(), config.camel), config.output)


@cli.command("jarnik")
@click.option("-d", "d", type=int, default=None, help="Dimension.")
@click.option("--r2", type=int, default=None, help="Squared radius.")
@click.option("--cap-radius", type=float, default=None, help="Cap radius.")
@click.option(
    "--cap-factor", type=float, default=None,
    help="Cap radius is factor * r2^(1/(2(d+1))) without --cap-radius.",
)
@experiment_options
@validate(JarnikConfig)
def jarnik_command(config: JarnikConfig) -> None:
    """Caps whose shell points are not on an affine hyperplane."""
    radius = config.cap_radius
    if radius is None:
        radius = config.cap_factor * config.r2 ** (1 / (2 * (config.d + 1)))
    report = jarnik_scan(enumerate_shell(config.d, config.r2), radius)
    if report.violations:
        logger.warning(f"{len(report.violations)} caps break the hyperplane property")
    emit(dump_document(report, config.camel), config.output)


@cli.command("nodal")
@click.option("--grid", type=int, default=None, help="Grid size N.")
@click.option("--phi", type=click.Path(exists=True), default=None,
              help="Eigenfunction document; random on --r2 otherwise.")
@click.option("--geodesic", type=int, nargs=2, default=None,
              help="sin 2 pi n (<xi, x> - offset) for the frequency xi.")
@click.option("--offset", type=float, default=None)
@click.option("--multiple", type=int, default=None)
@click.option("--r2", type=int, default=None, help="Squared radius.")
@click.option("--svg", type=click.Path(), default=None, help="SVG plot path.")
@experiment_options
@validate(NodalConfig)
def nodal_command(config: NodalConfig) -> None:
    """Nodal polylines of a real eigenfunction on T^2 as CSV."""
    if config.geodesic is not None:
        phi = make_geodesic_vanisher(config.geodesic, config.offset, config.multiple)
    else:
        phi = _eigenfunction(config, 2, config.r2, real=True)
    phi.check_real()
    nodal = nodal_set(phi, config.grid)
    emit(nodal.csv(), config.output)
    if config.svg is not None:
        title = f"nodal set r2={phi.r2}"
        emit(render_svg(nodal.lines, title=title), config.svg)


@cli.command("restrict")
@click.option("--r2", type=int, default=None, help="Squared radius.")
@click.option("--samples", type=int, default=None, help="Eigenfunctions drawn.")
@click.option("--radius", type=float, default=None, help="Curvature radius.")
@click.option("--arc", type=float, default=None, help="Arc length.")
@click.option("--nodes", type=int, default=None, help="Quadrature nodes.")
@experiment_options
@validate(RestrictConfig)
def restrict_command(config: RestrictConfig) -> None:
    """int |phi|^2 over a circle arc, and sup |phi| on a segment of
    irrational slope, for random real eigenfunctions."""
    half = config.arc / (2 * config.radius)
    if half >= math.pi:
        raise InputInvalidError(
            f"arc {config.arc} exceeds the circle of radius {config.radius}"
        )
    arc = circle_arc_sample(
        (0.5, 0.5 - config.radius), config.radius,
        math.pi / 2 - half, math.pi / 2 + half, config.nodes,
    )
    direction = np.array([1.0, math.sqrt(2)]) / math.sqrt(3)
    segment = segment_sample((0.1, 0.1), 0.1 + 0.6 * direction, config.nodes)
    seeds = [config.seed + k for k in range(config.samples)]
    phis = [random_eigenfunction(2, config.r2, s, real=True) for s in seeds]
    ratios = restriction_ratios(arc, phis)
    rows = [
        (s, f"{ratio:.12g}", f"{sup_on_sample(segment, phi):.12g}")
        for s, ratio, phi in zip(seeds, ratios, phis)
    ]
    emit(_table(["seed", "arc_ratio", "segment_sup"], rows), config.output)


def _paraboloid(d: int, delta: float) -> AnalyticGraph:
    text = " + ".join(f"x{k}**2" for k in range(1, d))
    return AnalyticGraph.parse(f"({text}) / 2", d, domain_radius=delta)


@cli.command("meansquare")
@click.option("-d", "d", type=int, default=None, help="Dimension, 2 or 3.")
@click.option("--r2", type=int, default=None, help="Squared radius.")
@click.option("--phi", type=click.Path(exists=True), default=None,
              help="Eigenfunction document; random on --r2 otherwise.")
@click.option("--tau", type=float, default=None)
@click.option("--delta", type=float, default=None, help="Domain radius.")
@click.option("--d-multiplier", type=float, default=None,
              help="D = multiplier * (log lambda)^2.")
@click.option("--grid", type=int, nargs=2, default=None)
@click.option("--rho", type=float, default=None,
              help="Cluster scale; lambda^delta(d) otherwise.")
@click.option("--delta2", type=str, default=None)
@click.option("--fill", type=float, default=None, help="Bump fill fraction.")
@click.option("--format", "format",
              type=click.Choice([f.value for f in OutputFormat]), default=None)
@experiment_options
@validate(MeanSquareConfig)
def meansquare_command(config: MeanSquareConfig) -> None:
    """Mean square of phi on a complexified paraboloid patch, and its
    cluster lower-bound certificate."""
    if config.format is OutputFormat.CSV:
        raise InputInvalidError("meansquare writes json or text")
    S = _paraboloid(config.d, config.delta)
    phi = _eigenfunction(config, config.d, config.r2, real=False)
    frame = choose_frame(S, phi)
    patch = build_patch(
        S, frame.v0, config.tau, grid_sizes=config.grid, fill=config.fill
    )
    if config.rho is not None:
        params = ClusterParams(
            rho=config.rho, delta2=config.delta2, max_dim=max(4, config.d)
        )
    else:
        params = default_params(phi, config.delta2)
    certificate = lower_bound_certificate(
        patch, phi, frame, params,
        D=default_cutoff(phi.r2, config.d_multiplier),
    )
    if config.format is OutputFormat.TEXT:
        emit(certificate.report(), config.output)
    else:
        emit(dump_document(certificate.document(), config.camel), config.output)


def _steepest_first_quadrant(points: List[tuple]) -> tuple:
    quadrant = [p for p in points if p[0] > 0 and p[1] > 0]
    if not quadrant:
        raise DegenerateInput("shell has no point with both coordinates positive")
    return min(quadrant, key=lambda p: (p[1] / p[0], p))


@cli.command("oscdecay")
@click.option("--r2", type=int, default=None, help="Squared radius.")
@click.option("--tau", type=float, default=None)
@click.option("--flat", is_flag=True, default=None,
              help="Use a line through the origin instead of a parabola.")
@click.option("--flat-tau", type=float, default=None)
@click.option("--pairs", type=int, default=None, help="Nearest partners of xi0.")
@click.option("--grid", type=int, nargs=2, default=None)
@experiment_options
@validate(OscDecayConfig)
def oscdecay_command(config: OscDecayConfig) -> None:
    """|J(xi0, xi)| against |xi0 - xi| for the nearest shell points."""
    points = enumerate_shell(2, config.r2).tuples
    xi0 = _steepest_first_quadrant(points)
    frame = ShiftFrame.for_point(xi0)
    if config.flat:
        S = AnalyticGraph.parse(f"{xi0[1]}/{xi0[0]}*x1", 2)
        patch = build_patch(
            S, frame.v0, config.flat_tau, grid_sizes=config.grid,
            allow_degenerate=True,
        )
    else:
        S = AnalyticGraph.parse("x1**2/2", 2)
        patch = build_patch(S, frame.v0, config.tau, grid_sizes=config.grid)
    partners = sorted(
        (p for p in points if p != xi0),
        key=lambda p: (sum((a - b) ** 2 for a, b in zip(p, xi0)), p),
    )[:config.pairs]
    fit = decay_fit(patch, frame, [(xi0, p) for p in partners])
    emit(fit.csv(), config.output)
    click.echo(f"slope {fit.slope:.4f} monotone {fit.monotone}", err=True)


@cli.command("capflow")
@click.option("-d", "d", type=int, default=None, help="Dimension.")
@click.option("--delta1", type=float, default=None)
@click.option("--delta0", type=float, default=None,
              help="0.75 min(delta1/2, epsilon_d/6) otherwise.")
@click.option("--theta0", type=float, default=None, help="Initial cap angle.")
@click.option("--max-steps", type=int, default=None)
@experiment_options
@validate(CapFlowConfig)
def capflow_command(config: CapFlowConfig) -> None:
    """Grow Cap(e1, theta0) by reflections in u0 = e_d."""
    d = config.d
    u0 = np.eye(d)[-1]
    if config.delta0 is None:
        eps = epsilon_d(d, config.delta1 / 2)
        if eps <= 0:
            raise PreconditionViolated(
                f"epsilon_d({config.delta1 / 2:g}) = {eps:.4g}", epsilon=eps
            )
        delta0 = 0.75 * min(config.delta1 / 2, eps / 6)
    else:
        delta0 = config.delta0
        eps = check_cap_preconditions(d, config.delta1, delta0)
    flow = cap_propagate(
        Cap.around(np.eye(d)[0], config.theta0), u0, config.delta1, delta0,
        max_steps=config.max_steps, seed=config.seed, eps=eps,
    )
    if not flow.full_sphere:
        logger.warning(f"stopped after {len(flow.steps)} steps short of the sphere")
    emit(dump_document(flow.document(), config.camel), config.output)


@cli.command("legendre")
@click.option("--pairs", type=int, default=None, help="Largest degree n.")
@click.option("--parallels", type=int, default=None,
              help="Zonal nodal parallels of P_n instead of the gcd table.")
@experiment_options
@validate(LegendreConfig)
def legendre_command(config: LegendreConfig) -> None:
    """gcd(P_m, P_n) for 1 <= m < n <= pairs, or the parallels of P_n."""
    if config.parallels is not None:
        check = zonal_nodal_check(config.parallels)
        logger.info(f"P_{check.n} residual {check.max_residual:.3e}")
        rows = [
            (j, f"{theta:.15f}", f"{math.cos(theta):.15f}")
            for j, theta in enumerate(check.parallels, start=1)
        ]
        emit(_table(["j", "theta", "cos_theta"], rows), config.output)
        return
    rows = [
        (row.m, row.n, str(row.gcd), row.predicted)
        for row in gcd_table(config.pairs)
    ]
    emit(_table(["m", "n", "gcd", "predicted"], rows), config.output)


@cli.command("laurent")
@click.option("--phi", type=click.Path(exists=True), default=None,
              help="Eigenfunction document on T^2; random on --r2 otherwise.")
@click.option("--r2", type=int, default=None, help="Squared radius.")
@click.option("--genus", type=int, default=None, help="Genus of the curve.")
@click.option("-s", "s", type=int, default=None, help="Points at infinity.")
@click.option("--c-s", type=float, default=None, help="Curve constant c_S.")
@experiment_options
@validate(LaurentConfig)
def laurent_command(config: LaurentConfig) -> None:
    """Laurent polynomial of phi and the frequency box check."""
    phi = _eigenfunction(config, 2, config.r2, real=True)
    laurent = to_laurent(phi)
    document = laurent.document()
    document.consistency = laurent_consistency(laurent, phi, seed=config.seed)
    k = int(np.lexsort((np.arange(len(phi.coeffs)), -np.abs(phi.coeffs)))[0])
    frame = ShiftFrame.for_point(phi.freqs[k])
    document.box = frequency_box_check(
        phi, frame, config.genus, config.s, config.c_s
    )
    emit(dump_document(document, config.camel), config.output)


@cli.command("schema")
@click.option(
    "--output", "-o", type=click.Path(), default=None,
    help="Output the schema to a file given by a path.",
)
@click.option("--camel", is_flag=True, help="camelCase keys.")
def schema_command(output: Optional[str], camel: bool) -> None:
    """JSON schema of every experiment config."""
    schema = build_config_schema(sorted(cli.commands.items()), camel)
    emit(dump_document(schema), output)


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name=PROG_NAME,
            standalone_mode=False,
        )
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_INVALID
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())
