"""Command-line front end: optimize, simulate, validate-bound, sweep.

Each command loads a YAML scenario, runs the relevant solver or simulation,
and writes a deterministic CSV (metadata in leading '#' comment lines, floats
at 12 significant digits, probabilities in scientific notation).  Output goes
to stdout unless --out is given; a relative --out is placed under
$URLLC_XLAYER_OUT when that variable is set.

Exit codes: 0 success, 1 parse/usage/IO error, 2 infeasible design.
"""

from __future__ import annotations

import dataclasses
import math
import os
import sys
from typing import Optional

import click
import numpy as np

from . import __version__
from .errors import InfeasibleError
from .optimizer import (
    MultiUserScenario,
    exhaustive_multi_user,
    required_snr,
    solve_multi_user,
    solve_single_user,
    threshold_power,
)
from .queueing import delay_violation_upper_bound, md1_delay_ccdf, simulate
from .scenario import ScenarioError, ScenarioFile, load_scenario
from .traffic import Poisson, mean_rate, qos_exponent

OUT_DIR_ENV = "URLLC_XLAYER_OUT"
RNG_NAME = "philox4x64"

_PROB_COLUMNS = {
    "eps_c", "eps_q", "eps_h", "eps_c_emp", "eps_q_emp", "eps_h_emp",
    "empirical_ccdf", "md1_ccdf", "analytic_bound", "loss_budget",
}


def _fmt(name: str, value) -> str:
    if isinstance(value, str):
        return value
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if name in _PROB_COLUMNS:
        return f"{value:.12e}"
    return f"{value:.12g}"


def write_table(stream, header, rows, metadata):
    for key, value in metadata:
        stream.write(f"# {key}: {value}\n")
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(h, v) for h, v in zip(header, row)) + "\n")


def _emit(out: Optional[str], header, rows, metadata):
    if out is None or out == "-":
        write_table(sys.stdout, header, rows, metadata)
        return
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(out):
        out = os.path.join(base, out)
    with open(out, "w", newline="") as fh:
        write_table(fh, header, rows, metadata)


def _metadata(sf: ScenarioFile, seed: int, extra=()):
    meta = [("tool_version", __version__), ("rng", RNG_NAME), ("seed", seed),
            ("scenario_hash", sf.source_hash or "inline")]
    if sf.defaulted:
        meta.append(("defaulted", ";".join(sf.defaulted)))
    meta.extend(extra)
    return meta


def _allocations(sf: ScenarioFile, users):
    scn = sf.scenario
    if len(users) == 1:
        # a single selected user gets the whole subcarrier budget
        return [solve_single_user(scn, users[0], scn.max_subcarriers)], None
    sub = dataclasses.replace(scn, users=tuple(scn.users[u] for u in users))
    solution = solve_multi_user(sub)
    allocs = [dataclasses.replace(a, user=users[i]) for i, a in enumerate(solution.allocations)]
    return allocs, solution


def _parse_users(spec: Optional[str], k: int):
    if not spec:
        return list(range(k))
    try:
        users = [int(tok) for tok in spec.split(",") if tok.strip() != ""]
    except ValueError:
        raise click.UsageError(f"--users expects comma-separated indices, got {spec!r}")
    if not users or any(u < 0 or u >= k for u in users) or len(set(users)) != len(users):
        raise click.UsageError(f"--users indices must be distinct and in [0, {k})")
    return users


@click.group(help=__doc__)
@click.version_option(version=__version__)
def cli():
    pass


_scenario_arg = click.argument("scenario_path", type=click.Path())
_out_opt = click.option("--out", default=None, help="output CSV path ('-' = stdout)")
_format_opt = click.option("--format", "fmt", default="csv",
                           type=click.Choice(["csv"]), help="output format")


@cli.command()
@_scenario_arg
@click.option("--users", "users_spec", default=None,
              help="comma-separated user indices (default: all)")
@click.option("--exhaustive", is_flag=True,
              help="also run the exhaustive-search oracle columns")
@_out_opt
@_format_opt
def optimize(scenario_path, users_spec, exhaustive, out, fmt):
    """Solve the minimum-power allocation for the scenario's users."""
    sf = load_scenario(scenario_path)
    scn = sf.scenario
    users = _parse_users(users_spec, len(scn.users))
    allocs, solution = _allocations(sf, users)
    total = sum(a.threshold_power_w for a in allocs)
    header = ["user", "distance_m", "average_gain", "subcarriers",
              "eps_c", "eps_q", "eps_h", "gamma", "threshold_power_w",
              "theta", "eb_packets_per_s", "total_power_w"]
    exh = None
    if exhaustive:
        if len(users) == 1:
            exh_allocs, exh_total = allocs, total
        else:
            sub = dataclasses.replace(scn, users=tuple(scn.users[u] for u in users))
            exh_sol = exhaustive_multi_user(sub)
            exh_allocs, exh_total = exh_sol.allocations, exh_sol.total_power_w
        exh = {users[i]: a for i, a in enumerate(exh_allocs)}
        header += ["subcarriers_exhaustive", "threshold_power_exhaustive_w",
                   "total_power_exhaustive_w"]
    rows = []
    for i, a in enumerate(allocs):
        link = scn.users[users[i]]
        row = [a.user, link.distance_m if link.distance_m is not None else float("nan"),
               link.gain, a.subcarriers, a.split.eps_c, a.split.eps_q, a.split.eps_h,
               a.required_snr, a.threshold_power_w, a.theta, a.eb_packets_per_s, total]
        if exh is not None:
            e = exh[a.user]
            row += [e.subcarriers, e.threshold_power_w, exh_total]
        rows.append(row)
    meta = _metadata(sf, sf.sim.seed)
    if solution is not None and solution.exceeds_power_budget:
        meta.append(("warning", "total power exceeds max_total_power"))
    _emit(out, header, rows, meta)


@cli.command()
@_scenario_arg
@click.option("--frames", type=int, default=None, help="override simulation.frames")
@click.option("--seed", type=int, default=None, help="override simulation.seed")
@_out_opt
@_format_opt
def simulate_cmd(scenario_path, frames, seed, out, fmt):
    """Run the policy simulation for each user and report loss accounting."""
    sf = load_scenario(scenario_path)
    scn = sf.scenario
    frames = sf.sim.frames if frames is None else frames
    seed = sf.sim.seed if seed is None else seed
    if frames < 1:
        raise click.UsageError("--frames must be >= 1")
    users = list(range(len(scn.users)))
    allocs, _ = _allocations(sf, users)
    deadline = scn.qos.deadline_frames
    header = ["user", "metric", "value"]
    rows = []
    for a in allocs:
        res = simulate(scn.users[a.user].arrival, frames, seed + a.user,
                       policy=a.to_policy(scn.qos), mode=sf.sim.mode,
                       deadline_frames=deadline)
        c = res.counters
        items = [
            ("frames", c.frames), ("arrived", c.arrived), ("delivered", c.delivered),
            ("dropped_proactive", c.dropped_proactive),
            ("dropped_deadline", c.dropped_deadline),
            ("errored_transmission", c.errored_transmission),
            ("still_queued", c.still_queued),
            ("eps_c_emp", res.eps_c_emp), ("eps_q_emp", res.eps_q_emp),
            ("eps_h_emp", res.eps_h_emp),
            ("drop_mass_proactive_policy", res.proactive_drop_mass),
            ("drop_mass_intuitive_policy", res.intuitive_drop_mass),
        ]
        for d in range(deadline + 1):
            items.append((f"delay_ccdf_gt_{d}", float(res.ccdf[d])))
        rows.extend([a.user, k, v] for k, v in items)
    _emit(out, header, rows, _metadata(sf, seed, [("frames", frames)]))


@cli.command("validate-bound")
@_scenario_arg
@click.option("--frames", type=int, default=None, help="override simulation.frames")
@click.option("--seed", type=int, default=None, help="override simulation.seed")
@_out_opt
@_format_opt
def validate_bound(scenario_path, frames, seed, out, fmt):
    """Constant-service simulation against the exponential delay bound.

    Serves each user at its effective bandwidth for the scenario's queueing
    delay target and tabulates, per queue-length threshold, the empirical
    delay CCDF, the exact constant-service CCDF (Poisson arrivals only), and
    the exponential bound.
    """
    sf = load_scenario(scenario_path)
    scn = sf.scenario
    frames = sf.sim.frames if frames is None else frames
    seed = sf.sim.seed if seed is None else seed
    if frames < 1:
        raise click.UsageError("--frames must be >= 1")
    eps_q = sf.sim.queue_violation_target or scn.qos.loss_budget / 10.0
    dq = scn.qos.queue_delay_bound_s
    header = ["user", "queue_length", "threshold_frames", "empirical_ccdf",
              "md1_ccdf", "analytic_bound"]
    rows = []
    for u, link in enumerate(scn.users):
        theta, eb = qos_exponent(link.arrival, dq, eps_q, scn.qos.frame_s)
        service = eb * scn.qos.frame_s
        hist_len = int(math.ceil(service * scn.qos.deadline_frames)) + 2
        res = simulate(link.arrival, frames, seed + u, service_per_frame=service,
                       mode="fluid", hist_len=hist_len)
        lam = mean_rate(link.arrival)
        for L in range(hist_len):
            d_frames = res.thresholds_frames[L]
            md1 = (md1_delay_ccdf(lam, service, d_frames)
                   if isinstance(link.arrival, Poisson) else float("nan"))
            bound = delay_violation_upper_bound(theta, eb, d_frames * scn.qos.frame_s)
            rows.append([u, L, d_frames, float(res.ccdf[L]), md1, bound])
    meta = _metadata(sf, seed, [("frames", frames), ("queue_violation_target", eps_q)])
    _emit(out, header, rows, meta)


def _apply_param(scn: MultiUserScenario, name: str, value: float) -> MultiUserScenario:
    if name in ("antennas", "nakagami_m", "max_subcarriers", "coherence_frames"):
        return dataclasses.replace(scn, **{name: int(value)})
    if name == "distance_m":
        users = list(scn.users)
        users[0] = dataclasses.replace(users[0], distance_m=float(value), average_gain=None)
        return dataclasses.replace(scn, users=tuple(users))
    raise click.UsageError(f"--param does not support {name!r}")


def _parse_param(spec: str):
    if "=" not in spec:
        raise click.UsageError("--param expects name=v1,v2,... or name=a..b")
    name, _, vals = spec.partition("=")
    name = name.strip()
    vals = vals.strip()
    if ".." in vals:
        a, _, b = vals.partition("..")
        try:
            lo, hi = int(a), int(b)
        except ValueError:
            raise click.UsageError(f"--param range bounds must be integers: {spec!r}")
        if hi < lo:
            raise click.UsageError(f"--param empty range: {spec!r}")
        return name, [float(v) for v in range(lo, hi + 1)]
    try:
        values = [float(v) for v in vals.split(",") if v.strip() != ""]
    except ValueError:
        raise click.UsageError(f"--param values must be numeric: {spec!r}")
    if not values:
        raise click.UsageError(f"--param has no values: {spec!r}")
    return name, values


@cli.command()
@_scenario_arg
@click.option("--param", "param_spec", required=True,
              help="sweep spec, e.g. antennas=4,8,16 or antennas=1..16")
@_out_opt
@_format_opt
def sweep(scenario_path, param_spec, out, fmt):
    """Re-solve user 0 across a parameter sweep, with the equal-split baseline."""
    sf = load_scenario(scenario_path)
    name, values = _parse_param(param_spec)
    header = ["param", "value", "subcarriers", "eps_c", "eps_q", "eps_h", "gamma",
              "threshold_power_w", "equal_split_power_w", "equal_split_excess"]
    rows = []
    for value in values:
        scn = _apply_param(sf.scenario, name, value)
        alloc = solve_single_user(scn, 0, scn.max_subcarriers)
        spec = scn.spectrum_for(scn.max_subcarriers)
        chan = scn.channel_for(0)
        share = scn.qos.loss_budget / 3.0
        _, eb = qos_exponent(scn.users[0].arrival, scn.qos.queue_delay_bound_s,
                             share, scn.qos.frame_s)
        gamma_eq = required_snr(share, eb, spec, scn.qos, scn.packet_bits)
        p_eq = threshold_power(gamma_eq, share, spec, chan)
        rows.append([name, value, alloc.subcarriers, alloc.split.eps_c,
                     alloc.split.eps_q, alloc.split.eps_h, alloc.required_snr,
                     alloc.threshold_power_w, p_eq,
                     p_eq / alloc.threshold_power_w - 1.0])
    _emit(out, header, rows, _metadata(sf, sf.sim.seed, [("param", name)]))


cli.add_command(simulate_cmd, name="simulate")


def main(argv=None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ScenarioError as exc:
        click.echo(f"scenario error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return 1
    except InfeasibleError as exc:
        click.echo(f"infeasible: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
