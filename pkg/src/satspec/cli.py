#!/usr/bin/env python3 -m satspec.cli

from __future__ import annotations

import functools
import math
import sys

from typing import List, Sequence, Union

import click
import numpy as np

from click_aliases import ClickAliasedGroup
from rich.table import Table

from . import VERSION, ConfigException, SatspecException, clog, console
from .config import Catalog, load_system, system_record
from .dynamics import DEFAULT_GAMMA_T2, DEFAULT_K, DEFAULT_RAMP_RATE, FlowParams, Trajectory, classify_stability, escape_destination, escape_trajectory, hysteresis_sweep
from .metrology import Table1Row, budget, intracavity_beta, line_pulling, pulling_zero_crossing, quantum_limited_linewidth, table1 as table1_rows
from .noise_lab import (
    DEFAULT_SEGMENTS,
    RNG_ALGORITHM,
    HomodyneConfig,
    NoiseSimConfig,
    estimate_lineshape,
    lorentzian_fwhm,
    read_series,
    structure_function,
    structure_function_slope,
    synthesize_locked_field,
    white_noise_level,
)
from .output import RunManifest, csv_text, format_number, gnuplot_script, json_text, sibling, table_records, write_text
from .params import DimensionlessPoint, PhysicalSystem, derive_params, operating_point
from .steady_state import (
    Stability,
    bistability_thresholds,
    normal_mode_overlay,
    scan_drive,
    scan_spectrum,
    scan_surface,
    solve_branches,
    vacuum_rabi_splitting,
)

CONTEXT_SETTINGS = dict(help_option_names=["-h", "--help"])

DEFAULT_C = 100.0


def common_params(func):
    """Decorator for commands that share system selection and output options"""

    @click.option("--species", help="species from the catalog, e.g. Sr87")
    @click.option("--config", "config_file", type=click.Path(dir_okay=False), help="YAML/JSON system configuration file")
    @click.option("--catalog", "catalog_file", type=click.Path(dir_okay=False), help="species catalog (default: built-in)")
    @click.option("--set", "overrides", multiple=True, help="override a system parameter, e.g. --set N=20000")
    @click.option("--json", "as_json", is_flag=True, default=False, help="emit JSON instead of CSV")
    @click.option("--out", type=click.Path(dir_okay=False), help="output file (default: stdout); a manifest is written next to it")
    @click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True, help="RNG seed for Monte-Carlo commands")
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)

    return wrapper


def plot_param(func):
    @click.option("--gnuplot", is_flag=True, default=False, help="also write a gnuplot script next to --out")
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)

    return wrapper


def dynamics_params(func):
    @click.option("--K", "K", type=float, default=DEFAULT_K, show_default=True, help="kappa T2, cavity to dipole decay ratio")
    @click.option("--gamma-t2", type=float, default=DEFAULT_GAMMA_T2, show_default=True, help="gamma T2 (2 = radiatively limited)")
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)

    return wrapper


def reports_errors(func):
    """Map package exceptions onto console messages and exit codes"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SatspecException as ex:
            console.log(str(ex), style="red", markup=False)
            sys.exit(ex.exit_code)

    return wrapper


def command_argv(ctx: click.Context) -> List[str]:
    """Rebuild the command line of the current subcommand from its resolved parameters"""
    argv = [ctx.command.name]
    for param in ctx.command.params:
        value = ctx.params.get(param.name)
        if isinstance(param, click.Argument):
            if value is not None:
                argv.append(str(value))
            continue
        flag = param.opts[0]
        if param.is_flag:
            if value:
                argv.append(flag)
        elif param.multiple:
            for v in value or ():
                argv += [flag, format_number(v)]
        elif value is not None:
            argv += [flag, format_number(value)]
    return argv


class Run:
    """
    State shared by one subcommand invocation: system resolution, output writing
    and the manifest.
    """

    def __init__(
        self,
        ctx: click.Context,
        species: Union[str, None] = None,
        config_file: Union[str, None] = None,
        catalog_file: Union[str, None] = None,
        overrides: Sequence[str] = (),
        as_json: bool = False,
        out: Union[str, None] = None,
        seed: int = 0,
        gnuplot: bool = False,
    ):
        self.ctx = ctx
        self.species = species
        self.config_file = config_file
        self.catalog_file = catalog_file
        self.overrides = list(overrides)
        self.as_json = as_json
        self.out = out
        self.seed = seed
        self.gnuplot = gnuplot
        self.stochastic = False
        self.parameters = {}
        self.outputs: List[str] = []

    @functools.cached_property
    def catalog(self) -> Catalog:
        return Catalog.load(self.catalog_file) if self.catalog_file else Catalog.builtin()

    @functools.cached_property
    def system(self) -> Union[PhysicalSystem, None]:
        if not (self.species or self.config_file or self.overrides):
            return None
        sys_ = load_system(self.species, self.config_file, self.overrides, catalog=self.catalog if self.species else None)
        self.parameters["system"] = system_record(sys_)
        return sys_

    def require_system(self) -> PhysicalSystem:
        if self.system is None:
            raise ConfigException(f"{self.ctx.command.name} needs a system - use --species, --config or --set")
        return self.system

    def cooperativity(self, C: Union[float, None]) -> float:
        """--C if given, else the collective cooperativity of the selected system, else 100"""
        if C is None:
            C = derive_params(self.system).C if self.system is not None else DEFAULT_C
        self.parameters["C"] = C
        return C

    def scaled_detunings(self, delta_scaled: Sequence[float], delta_hz: Sequence[float], default=(0.0,)) -> List[float]:
        """Atomic detunings in units of 1/T2; Hz values need a system for T2"""
        deltas = list(delta_scaled)
        if delta_hz:
            sys_ = self.require_system()
            deltas += [2.0 * math.pi * d * sys_.T2 for d in delta_hz]
        return deltas or list(default)

    def emit(self, header: Sequence[str], rows: List[Sequence], payload=None, plot: Union[dict, None] = None):
        """Write the primary output (CSV, or JSON with --json) and optionally a gnuplot script"""
        if self.as_json:
            text = json_text(payload if payload is not None else table_records(header, rows))
        else:
            text = csv_text(header, rows)
        path = write_text(text, self.out)
        if path:
            self.outputs.append(str(path))

        if self.gnuplot and plot is not None:
            if self.out is None or self.as_json:
                clog("--gnuplot needs a CSV --out file; no script written", style="yellow")
            else:
                template = plot.pop("template", "curves")
                self.extra_output(".gp", gnuplot_script(template, data=str(self.out), version=VERSION, **plot))

    def extra_output(self, suffix: str, text: str):
        if self.out is None:
            return
        path = write_text(text, sibling(self.out, suffix))
        self.outputs.append(str(path))

    def finish(self):
        if self.out is None:
            return
        manifest = RunManifest(
            subcommand=self.ctx.command.name,
            parameters=self.parameters,
            argv=command_argv(self.ctx),
            catalog_version=self.catalog.version if "catalog" in self.__dict__ else None,
            seed=self.seed if self.stochastic else None,
            outputs=self.outputs,
        )
        path = manifest.write(self.out)
        clog(f"Wrote {', '.join(self.outputs)} (manifest {path})", markup=False)


def escaping_branch(branch_set) -> int:
    for i, b in enumerate(branch_set):
        if b.stability == Stability.UNSTABLE:
            return i
    return len(branch_set) - 1


def branch_rows(branch_sets) -> List[tuple]:
    rows = []
    for bs in branch_sets:
        p = bs.point
        for i, b in enumerate(bs):
            rows.append((p.C, p.I_in, p.delta, p.theta, i, b.u, b.x.real, b.x.imag, b.sigma_z, b.stability.value))
    return rows


BRANCH_HEADER = ("C", "I_in", "delta", "theta", "branch_index", "u", "re_x", "im_x", "sigma_z", "stability")


@click.group(context_settings=CONTEXT_SETTINGS, cls=ClickAliasedGroup)
@click.version_option(version=VERSION)
def satspec():
    """
    Strongly saturated cavity-enhanced spectroscopy: steady states, stability,
    lock budget and locked-laser lineshape.
    """


@satspec.command()
@common_params
@click.option("--beta", type=float, help="saturation parameter of the operating point (default: system beta)")
@click.option("--delta-hz", type=float, default=0.0, show_default=True, help="atom-cavity detuning in Hz")
@click.option("--theta", type=float, default=0.0, show_default=True, help="cavity-laser detuning in units of kappa")
@click.pass_context
@reports_errors
def params(ctx, beta, delta_hz, theta, **kwargs):
    """Derived and dimensionless parameters of a system"""
    run = Run(ctx, **kwargs)
    sys_ = run.require_system()
    d = derive_params(sys_)
    point = operating_point(sys_, beta, delta=2.0 * math.pi * delta_hz * sys_.T2, theta=theta)

    derived = {
        "g_rad_s": d.g,
        "kappa_s": d.kappa,
        "n0": d.n0,
        "C0": d.C0,
        "C": d.C,
        "omega_L_rad_s": d.omega_L,
        "vacuum_rabi_splitting_rad_s": d.vacuum_rabi_splitting,
        "T2_s": sys_.T2,
        "gamma_t2": sys_.gamma_t2,
        "radiatively_limited": sys_.radiatively_limited,
    }
    dimensionless = {"C": point.C, "I_in": point.I_in, "delta": point.delta, "theta": point.theta, "beta": point.beta}
    run.parameters.update({"beta": beta, "delta_hz": delta_hz, "theta": theta})

    table = Table("quantity", "value", title=f"{sys_.name}")
    for k, v in {**derived, **{f"point.{k}": v for k, v in dimensionless.items()}}.items():
        table.add_row(k, format_number(v))
    console.print(table)

    rows = [(f"system.{k}", v) for k, v in system_record(sys_).items()]
    rows += [(f"derived.{k}", v) for k, v in derived.items()]
    rows += [(f"point.{k}", v) for k, v in dimensionless.items()]
    run.emit(("key", "value"), rows, payload={"system": system_record(sys_), "derived": derived, "point": dimensionless})
    run.finish()


@satspec.command(aliases=["fig2"])
@common_params
@plot_param
@click.option("--C", "C", type=float, help="collective cooperativity (default: from system, else 100)")
@click.option("--delta-scaled", type=float, multiple=True, help="atomic detuning in units of 1/T2 (repeatable; default 0 10 100)")
@click.option("--delta-hz", type=float, multiple=True, help="atomic detuning in Hz (repeatable; needs a system)")
@click.option("--theta", type=float, default=0.0, show_default=True)
@click.option("--i-min", type=float, default=1.0, show_default=True)
@click.option("--i-max", type=float, default=1e5, show_default=True)
@click.option("--points", type=click.IntRange(2), default=400, show_default=True)
@click.option("--stability", is_flag=True, default=False, help="classify every branch (uses --K, --gamma-t2)")
@dynamics_params
@click.pass_context
@reports_errors
def bistability(ctx, C, delta_scaled, delta_hz, theta, i_min, i_max, points, stability, K, gamma_t2, **kwargs):
    """Intra-cavity intensity versus drive intensity"""
    run = Run(ctx, **kwargs)
    C = run.cooperativity(C)
    deltas = run.scaled_detunings(delta_scaled, delta_hz, default=(0.0, 10.0, 100.0))
    if not 0 < i_min < i_max:
        raise ConfigException(f"need 0 < --i-min < --i-max, got {i_min}, {i_max}")
    drives = np.geomspace(i_min, i_max, points)
    run.parameters.update({"delta": deltas, "theta": theta, "i_min": i_min, "i_max": i_max, "points": points})

    branch_sets = []
    for delta in deltas:
        scan = scan_drive(C, delta, drives, theta=theta)
        if stability:
            run.parameters.update({"K": K, "gamma_t2": gamma_t2})
            scan = [classify_stability(bs, K=K, gamma_t2=gamma_t2) for bs in scan]
        branch_sets += scan

    thresholds = bistability_thresholds(C)
    if thresholds:
        clog(f"C={format_number(C)}: bistable for {thresholds.lower:.6g} < I_in < {thresholds.upper:.6g} on resonance", markup=False)
    else:
        clog(f"C={format_number(C)} <= 8: no bistability on resonance", markup=False)

    run.emit(
        BRANCH_HEADER,
        branch_rows(branch_sets),
        plot=dict(title=f"C = {format_number(C)}", xlabel="I_in", ylabel="|x|^2", logx=True, logy=True, series=[dict(using="2:6", style="points pt 7 ps 0.4", label="steady states")]),
    )
    run.finish()


@satspec.command(aliases=["fig4"])
@common_params
@plot_param
@click.option("--C", "C", type=float, help="collective cooperativity (default: from system, else 100)")
@click.option("--I", "I_in", type=float, multiple=True, help="drive intensity (repeatable; default 5e3 1e3 1e2)")
@click.option("--theta", type=float, default=0.0, show_default=True)
@click.option("--delta-min", type=float, default=-300.0, show_default=True)
@click.option("--delta-max", type=float, default=300.0, show_default=True)
@click.option("--points", type=click.IntRange(2), default=1201, show_default=True)
@click.option("--hz", is_flag=True, default=False, help="--delta-min/--delta-max are in Hz (needs a system)")
@click.pass_context
@reports_errors
def spectrum(ctx, C, I_in, theta, delta_min, delta_max, points, hz, **kwargs):
    """Intra-cavity intensity versus atomic detuning"""
    run = Run(ctx, **kwargs)
    C = run.cooperativity(C)
    drives = list(I_in) or [5e3, 1e3, 1e2]
    lo, hi = run.scaled_detunings([], [delta_min, delta_max]) if hz else (delta_min, delta_max)
    deltas = np.linspace(lo, hi, points)
    run.parameters.update({"I_in": drives, "theta": theta, "delta_min": lo, "delta_max": hi, "points": points})

    branch_sets = []
    for I in drives:
        branch_sets += scan_spectrum(C, I, deltas, theta=theta)

    run.emit(
        BRANCH_HEADER,
        branch_rows(branch_sets),
        plot=dict(title=f"C = {format_number(C)}", xlabel="delta (1/T2)", ylabel="|x|^2", logx=False, logy=True, series=[dict(using="3:6", style="points pt 7 ps 0.3", label="steady states")]),
    )
    run.finish()


@satspec.command(aliases=["fig3"])
@common_params
@plot_param
@click.option("--C", "C", type=float, help="collective cooperativity (default: from system, else 100)")
@click.option("--I", "I_in", type=float, default=5e3, show_default=True)
@click.option("--delta-min", type=float, default=-300.0, show_default=True)
@click.option("--delta-max", type=float, default=300.0, show_default=True)
@click.option("--delta-points", type=click.IntRange(2), default=301, show_default=True)
@click.option("--theta-min", type=float, default=-3.0, show_default=True)
@click.option("--theta-max", type=float, default=3.0, show_default=True)
@click.option("--theta-points", type=click.IntRange(2), default=301, show_default=True)
@click.option("--K", "K", type=float, default=DEFAULT_K, show_default=True, help="kappa T2 for the normal-mode overlay")
@click.pass_context
@reports_errors
def surface(ctx, C, I_in, delta_min, delta_max, delta_points, theta_min, theta_max, theta_points, K, **kwargs):
    """Largest intra-cavity intensity over atomic and cavity detuning"""
    run = Run(ctx, **kwargs)
    C = run.cooperativity(C)
    deltas = np.linspace(delta_min, delta_max, delta_points)
    thetas = np.linspace(theta_min, theta_max, theta_points)
    run.parameters.update({"I_in": I_in, "delta": [delta_min, delta_max, delta_points], "theta": [theta_min, theta_max, theta_points], "K": K})

    grid = scan_surface(C, I_in, deltas, thetas)
    overlay = normal_mode_overlay(C, deltas, K=K)
    clog(f"vacuum Rabi splitting 2 sqrt(C K) = {vacuum_rabi_splitting(C, K):.6g} / T2", markup=False)

    rows = []
    for theta, row in zip(grid.thetas, grid.branches):
        for delta, b in zip(grid.deltas, row):
            rows.append((delta, theta, b.u, b.sigma_z))
    overlay_rows = list(zip(overlay.deltas, overlay.upper, overlay.lower, overlay.ridge))

    payload = {
        "C": C,
        "I_in": I_in,
        "delta": grid.deltas,
        "theta": grid.thetas,
        "u": grid.u,
        "overlay": {"K": K, "upper": overlay.upper, "lower": overlay.lower, "ridge": overlay.ridge},
    }
    overlay_file = str(sibling(run.out, ".overlay.csv")) if run.out else None
    run.emit(
        ("delta", "theta", "u", "sigma_z"),
        rows,
        payload=payload,
        plot=dict(template="surface", title=f"C = {format_number(C)}, I_in = {format_number(I_in)}", xlabel="delta (1/T2)", ylabel="theta (kappa)", zlabel="|x|^2", overlay=overlay_file),
    )
    if not run.as_json:
        run.extra_output(".overlay.csv", csv_text(("delta", "upper", "lower", "ridge"), overlay_rows))
    run.finish()


@satspec.command()
@common_params
@click.option("--C", "C", type=float, help="collective cooperativity (default: from system, else 100)")
@click.option("--I", "I_in", type=float, default=1e3, show_default=True)
@click.option("--delta-scaled", type=float, multiple=True, help="atomic detuning in units of 1/T2")
@click.option("--delta-hz", type=float, multiple=True, help="atomic detuning in Hz (needs a system)")
@click.option("--theta", type=float, default=0.0, show_default=True)
@click.option("--escape", is_flag=True, default=False, help="confirm each verdict by integrating a perturbed state")
@click.option("--trajectory", "trajectory_file", type=click.Path(dir_okay=False), help="write the escape run of one branch as [tau, re_x, im_x, re_s, im_s, z] CSV")
@click.option("--trajectory-branch", type=click.IntRange(0), help="branch index for --trajectory (default: first unstable branch, else the top one)")
@dynamics_params
@click.pass_context
@reports_errors
def stability(ctx, C, I_in, delta_scaled, delta_hz, theta, escape, trajectory_file, trajectory_branch, K, gamma_t2, **kwargs):
    """Linear stability of every steady state at one operating point"""
    run = Run(ctx, **kwargs)
    C = run.cooperativity(C)
    deltas = run.scaled_detunings(delta_scaled, delta_hz)
    if trajectory_file and len(deltas) != 1:
        raise ConfigException(f"--trajectory needs exactly one detuning, got {len(deltas)}")
    run.parameters.update({"I_in": I_in, "delta": deltas, "theta": theta, "K": K, "gamma_t2": gamma_t2})

    rows = []
    table = Table("delta", "branch_index", "u", "stability", "max Re(lambda)", "escapes to", title=f"C = {format_number(C)}, I_in = {format_number(I_in)}")
    for delta in deltas:
        point = DimensionlessPoint(C=C, I_in=I_in, delta=delta, theta=theta)
        fp = FlowParams.from_point(point, K=K, gamma_t2=gamma_t2)
        classified = classify_stability(solve_branches(point), fp)
        for i, b in enumerate(classified):
            leading = max(e.real for e in b.eigenvalues)
            destination = escape_destination(classified, i, fp) if escape else None
            rows.append((delta, i, b.u, b.sigma_z, b.stability.value, leading, "" if destination is None else destination))
            table.add_row(format_number(delta), str(i), f"{b.u:.6g}", b.stability.value, f"{leading:.4g}", "-" if destination is None else str(destination))
    console.print(table)

    if trajectory_file:
        index = escaping_branch(classified) if trajectory_branch is None else trajectory_branch
        if index >= len(classified):
            raise ConfigException(f"branch {index} does not exist, there are {len(classified)} steady states")
        trajectory = escape_trajectory(classified, index, fp)
        write_text(csv_text(Trajectory.HEADER, trajectory.rows()), trajectory_file)
        run.outputs.append(trajectory_file)
        run.parameters.update({"trajectory_branch": index})
        clog(f"branch {index} escape run: {len(trajectory.tau)} samples to tau={trajectory.tau[-1]:.4g}", markup=False)

    run.emit(("delta", "branch_index", "u", "sigma_z", "stability", "max_re_eigenvalue", "escapes_to"), rows)
    run.finish()


@satspec.command()
@common_params
@plot_param
@click.option("--C", "C", type=float, help="collective cooperativity (default: from system, else 100)")
@click.option("--i-min", type=float, default=10.0, show_default=True)
@click.option("--i-max", type=float, default=1e5, show_default=True)
@click.option("--rate", type=float, default=DEFAULT_RAMP_RATE, show_default=True, help="logarithmic ramp rate d ln(I_in)/d(t/T2)")
@click.option("--points", type=click.IntRange(2), default=2000, show_default=True)
@dynamics_params
@click.pass_context
@reports_errors
def hysteresis(ctx, C, i_min, i_max, rate, points, K, gamma_t2, **kwargs):
    """Slow drive ramp up and down through the bistable window"""
    run = Run(ctx, **kwargs)
    C = run.cooperativity(C)
    run.parameters.update({"i_min": i_min, "i_max": i_max, "rate": rate, "points": points, "K": K, "gamma_t2": gamma_t2})

    with console.status("Integrating drive ramp"):
        loop = hysteresis_sweep(C, i_min=i_min, i_max=i_max, rate=rate, K=K, gamma_t2=gamma_t2, points=points)

    thresholds = bistability_thresholds(C)
    if loop.bistable and thresholds:
        clog(f"up-jump at I_in = {loop.up_jump:.6g} (fold {thresholds.upper:.6g}, {100 * (loop.up_jump / thresholds.upper - 1):+.2f}%)", markup=False)
        clog(f"down-jump at I_in = {loop.down_jump:.6g} (fold {thresholds.lower:.6g}, {100 * (loop.down_jump / thresholds.lower - 1):+.2f}%)", markup=False)
    elif loop.bistable:
        clog(f"jumps at I_in = {loop.up_jump:.6g} (up) and {loop.down_jump:.6g} (down)", markup=False)
    else:
        clog("no hysteresis: up and down traces coincide", markup=False)

    run.emit(
        ("I_in", "u", "direction"),
        loop.rows(),
        payload={"C": C, "up_jump": loop.up_jump, "down_jump": loop.down_jump, "rows": table_records(("I_in", "u", "direction"), loop.rows())},
        plot=dict(title=f"hysteresis, C = {format_number(C)}", xlabel="I_in", ylabel="|x|^2", logx=True, logy=True, series=[dict(using="1:2", style="lines", label="up and down")]),
    )
    run.finish()


@satspec.command()
@common_params
@click.option("--beta", type=float, help="saturation parameter (default: system beta)")
@click.pass_context
@reports_errors
def metrology(ctx, beta, **kwargs):
    """Lock budget of a system: power, SNR, slope, linewidth, bandwidth"""
    run = Run(ctx, **kwargs)
    sys_ = run.require_system()
    b = budget(sys_, beta)
    run.parameters["beta"] = b.beta
    record = b.to_record()

    table = Table("quantity", "value", title=f"lock budget, {b.name}, beta = {format_number(b.beta)}")
    for k, v in record.items():
        table.add_row(k, format_number(v))
    console.print(table)

    run.emit(tuple(record.keys()), [tuple(record.values())], payload={b.name: record})
    run.finish()


@satspec.command()
@common_params
@click.option("--beta", type=float, help="saturation parameter (default: each system's beta)")
@click.pass_context
@reports_errors
def table1(ctx, beta, **kwargs):
    """Lock budget summary for every species in the catalog"""
    run = Run(ctx, **kwargs)
    rows = table1_rows(run.catalog, beta)
    run.parameters["beta"] = beta

    table = Table("species", "C0", "P (W)", "SNR (sqrt Hz)", "linewidth (Hz)", "bandwidth (Hz)", title=f"catalog {run.catalog.source} v{run.catalog.version}")
    for r in rows:
        table.add_row(r.name, f"{r.C0:.2g}", f"{r.signal_power:.2g}", f"{r.snr:.2g}", f"{r.linewidth:.2g}", f"{r.bandwidth:.2g}")
    console.print(table)

    run.emit(Table1Row.HEADER, [r.values() for r in rows], payload={r.name: dict(zip(Table1Row.HEADER[1:], r.values()[1:])) for r in rows})
    run.finish()


@satspec.command()
@common_params
@click.option("--theta", type=float, multiple=True, help="cavity-laser detuning in units of kappa (repeatable; default 1e-4)")
@click.option("--beta", type=float, help="saturation parameter (default: system beta)")
@click.pass_context
@reports_errors
def pulling(ctx, theta, beta, **kwargs):
    """Lock-point shift caused by a cavity-laser detuning"""
    run = Run(ctx, **kwargs)
    sys_ = run.require_system()
    thetas = list(theta) or [1e-4]
    beta = sys_.beta if beta is None else beta
    C = derive_params(sys_).C
    run.parameters.update({"theta": thetas, "beta": beta})

    inner = intracavity_beta(C, beta)
    rows = []
    for t in thetas:
        formula = line_pulling(sys_, t, beta)
        numeric = pulling_zero_crossing(sys_, t, beta)
        intracavity = line_pulling(sys_, t, inner)
        rows.append((t, formula, numeric, intracavity))
        clog(f"theta={format_number(t)}: {formula:.4g} Hz (formula), {numeric:.4g} Hz (phase zero crossing)", markup=False)

    run.emit(("theta", "pull_hz", "zero_crossing_hz", "pull_intracavity_beta_hz"), rows)
    run.finish()


@satspec.command()
@common_params
@click.option("--h0", type=float, help="one-sided white frequency-noise level in Hz^2/Hz")
@click.option("--rate", type=float, help="sample rate in Hz (default: 256 x FWHM)")
@click.option("--duration", type=float, help="record length in s (default: 2048 / FWHM)")
@click.option("--segments", type=click.IntRange(1), default=DEFAULT_SEGMENTS, show_default=True)
@click.option("--beta", type=float, help="saturation parameter when h0 comes from a system budget")
@click.option("--scale", type=float, default=1e6, show_default=True, help="multiply a system's h0 by this factor")
@click.option("--lo-power", type=float, default=1e-3, show_default=True, help="local oscillator power in W")
@click.option("--input", "input_file", type=click.Path(dir_okay=False), help="estimate the lineshape of a [t, re, im] CSV series instead")
@click.option("--series", "series_file", type=click.Path(dir_okay=False), help="also write the synthesized series as CSV")
@click.pass_context
@reports_errors
def locksim(ctx, h0, rate, duration, segments, beta, scale, lo_power, input_file, series_file, **kwargs):
    """Monte-Carlo lineshape of a shot-noise limited lock"""
    run = Run(ctx, **kwargs)
    prediction = None

    if input_file:
        series = read_series(input_file)
        cfg = None
        run.parameters.update({"input": input_file, "segments": segments})
    else:
        if h0 is None:
            sys_ = run.require_system()
            homodyne = HomodyneConfig.from_budget(sys_, beta, lo_power=lo_power)
            h0 = white_noise_level(homodyne) * scale
            prediction = quantum_limited_linewidth(sys_, beta).full * scale
            run.parameters.update({"beta": beta, "scale": scale, "lo_power": lo_power})
        if rate is None and duration is None:
            cfg = NoiseSimConfig.for_linewidth(h0, seed=run.seed, segments=segments)
        else:
            if h0 <= 0 and (rate is None or duration is None):
                raise ConfigException("without a line to resolve, both --rate and --duration are required")
            base = NoiseSimConfig.for_linewidth(h0, seed=run.seed, segments=segments) if h0 > 0 else None
            cfg = NoiseSimConfig(
                h0=h0,
                sample_rate=rate if rate is not None else base.sample_rate,
                duration=duration if duration is not None else base.duration,
                seed=run.seed,
                segments=segments,
            )
        run.stochastic = True
        run.parameters.update({"h0": cfg.h0, "sample_rate": cfg.sample_rate, "duration": cfg.duration, "segments": cfg.segments, "rng": RNG_ALGORITHM})
        with console.status("Synthesizing locked field"):
            series = synthesize_locked_field(cfg)
        if series_file:
            write_text(csv_text(("t", "re", "im"), series.rows()), series_file)
            run.outputs.append(series_file)

    estimate = estimate_lineshape(series, segments=segments)
    taus, D = structure_function(series)
    summary = estimate.summary(h0=cfg.h0 if cfg else None, seed=run.seed if cfg else None)
    summary["structure_function_slope"] = structure_function_slope(taus, D)
    if cfg is not None:
        summary["expected_fwhm_hz"] = lorentzian_fwhm(cfg.h0)
    if prediction is not None:
        summary["predicted_fwhm_hz"] = prediction

    clog(f"FWHM = {estimate.fwhm:.6g} +- {estimate.uncertainty:.2g} Hz", markup=False)
    if cfg is not None:
        clog(f"expected pi h0 / 2 = {lorentzian_fwhm(cfg.h0):.6g} Hz", markup=False)

    if run.as_json:
        run.emit((), [], payload={**summary, "lineshape": estimate.rows()})
    else:
        run.emit(("f_Hz", "psd"), estimate.rows())
        run.extra_output(".summary.json", json_text(summary))
    run.finish()


@satspec.command()
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="write to this file instead of the recorded output")
@reports_errors
def replay(manifest, out):
    """Re-run the command recorded in a manifest"""
    m = RunManifest.load(manifest)
    argv = list(m.argv)
    if out:
        if "--out" in argv:
            i = argv.index("--out")
            argv[i + 1] = out
        else:
            argv += ["--out", out]
    clog(f"Replaying {' '.join(argv)}", markup=False)
    satspec.main(args=argv, prog_name="satspec", standalone_mode=False)


if __name__ == "__main__":
    satspec()  # pylint: disable=no-value-for-parameter
