"""The ``odoprime`` command line.

Exit codes: 0 every check passed, 1 some check failed, 2 infeasible or
malformed configuration, 3 usage error.
"""

from __future__ import annotations

import functools
import sys
from fractions import Fraction
from pathlib import Path

import click

from ..friends import InfeasibleWitness, make_friend, verify_witness
from ..measures import InfeasibleBand
from ..odometer import Point
from ..oracle import BudgetExceeded, FiniteQuotient
from ..reduction import W_RULES, NonTermination, classify, reduce_full
from ..return_map import GreedyStall, NotInY, ReturnMap
from ..schedule import AlphabetSchedule, DepthError, ScheduleError
from .config import MAX_SEED, ConfigError, ExperimentConfig, load_config
from .experiments import EXPERIMENTS, ORACLE_BUDGET, run_experiment
from .plotting import write_figures
from .report import Report

EXIT_OK, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2, 3
INFEASIBLE = (ConfigError, ScheduleError, DepthError, BudgetExceeded, InfeasibleWitness, InfeasibleBand,
              GreedyStall, NonTermination)


def common(f):
    """Options shared by every subcommand."""
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="TOML config file."),
        click.option("--seed", type=click.IntRange(0, MAX_SEED), default=None, help="RNG seed (u64)."),
        click.option("--preset", default=None, help="Schedule preset (paper, desk, desk2, lab, wide)."),
        click.option("--depth", type=click.IntRange(1), default=None, help="Schedule depth."),
        click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the report here."),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json"),
        click.option("--oracle", is_flag=True, help="Cross-check against the brute-force quotient."),
        click.option("--plot", type=click.Choice(["svg", "png", "pdf"]), default=None,
                     help="Write figures next to the report."),
    ]
    for o in reversed(opts):
        f = o(f)

    @functools.wraps(f)
    def wrapper(config_path, seed, preset, depth, out, fmt, oracle, plot, **kw):
        cfg = load_config(config_path) if config_path else ExperimentConfig()
        if seed is not None:
            cfg.seed = seed
        if preset is not None or depth is not None:
            base = dict(cfg.schedule or {"preset": "lab"})
            if preset is not None:
                base = {"preset": preset}
            if depth is not None:
                base["depth"] = depth
            cfg.schedule = base
        rep = f(cfg=cfg, oracle=oracle, **kw)
        return emit(rep, out, fmt, plot)

    return wrapper


def emit(rep: Report, out, fmt: str, plot) -> int:
    text = rep.render(fmt)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)
    if plot and rep.series:
        stem = Path(out).with_suffix("") if out else Path(rep.command.replace(" ", "_"))
        for path in write_figures(rep, stem, plot):
            click.echo(f"wrote {path}", err=True)
    failed = [c["name"] for c in rep.checks if not c["passed"]]
    for name in failed:
        click.echo(f"FAILED: {name}", err=True)
    return EXIT_FAIL if failed else EXIT_OK


def _schedule(cfg: ExperimentConfig) -> AlphabetSchedule:
    return cfg.build_schedule(cfg.schedule or {"preset": "lab"})


def _point(sched: AlphabetSchedule, text: str) -> Point:
    """An integer value, or comma-separated digits starting at position 1."""
    try:
        if "," in text:
            return Point(sched, tuple(int(t) for t in text.split(",")))
        v = int(text)
    except ValueError as exc:
        raise click.BadParameter(f"{text!r} is neither an integer nor a digit list") from exc
    if not 0 <= v < sched.modulus:
        raise click.BadParameter(f"value {v} outside [0, q_top)")
    return Point.from_value(sched, v)


def _quotient(sched: AlphabetSchedule) -> FiniteQuotient:
    if sched.modulus > ORACLE_BUDGET:
        raise ConfigError(f"--oracle needs q_top <= {ORACLE_BUDGET}; lower --depth (q_top = {sched.modulus})")
    return FiniteQuotient(sched, sched.depth, ORACLE_BUDGET)


def _in_Y(rm: ReturnMap, x: Point):
    if not rm.holes.in_Y(x):
        raise click.BadParameter(f"{x} is not in Y")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="odoprime")
def cli():
    """Odometer first-return experiments and checks."""


@cli.command()
@common
def info(cfg, oracle):
    """Schedule, holes and return heights."""
    sched = _schedule(cfg)
    rm = ReturnMap.of(sched)
    rep = Report("info", cfg, [sched])
    muY, tail = rm.holes.measure_Y()
    rows = [{"i": i, "a_i": sched.sizes[i], "q_i": sched.qs[i], "kind": sched.kind(i) or "",
             "hole": (rm.holes.hole_at(i).label if rm.holes.hole_at(i) else ""), "r_i": rm.r(i)}
            for i in range(1, sched.depth + 1)]
    rep.table("positions", rows)
    rep.summary = {"modulus": sched.modulus, "measure_Y": muY, "measure_Y_float": float(muY),
                   "tail_bound": tail, "pieces": len(rm.holes.pieces),
                   "absorbing_top": rm.holes.absorbing_top, "warnings": sched.validate()}
    rep.truncation = {"depth": sched.depth, "tail_bound": tail}
    if oracle:
        fq = _quotient(sched)
        rep.check("oracle: |Y| and r_i by enumeration",
                  fq.n_Y == muY * fq.size and fq.r_heights() == [rm.r(i) for i in range(1, sched.depth + 2)])
    return rep


@cli.command()
@click.argument("x")
@click.option("--steps", type=click.IntRange(0, 100_000), default=10, show_default=True)
@common
def orbit(cfg, oracle, x, steps):
    """The T-orbit of X (an integer value or comma-separated digits)."""
    sched = _schedule(cfg)
    rm = ReturnMap.of(sched)
    p = _point(sched, x)
    _in_Y(rm, p)
    rep = Report("orbit", cfg, [sched])
    vals = rm.orbit(p.value, 0, steps + 1)
    rows = [{"n": n, "value": int(v), "digits": str(Point.from_value(sched, int(v))),
             "zeta": rm.zeta_value(p.value, n)} for n, v in enumerate(vals.tolist())]
    rep.table("orbit", rows)
    if oracle:
        fq = _quotient(sched)
        ref = [fq.oracle_t_power(p.value, n) for n in range(steps + 1)]
        rep.check("oracle: orbit by literal stepping", ref == [r["value"] for r in rows])
    return rep


def _time_change(name):
    @cli.command(name=name, help=f"{name}_x(n) for the point X.")
    @click.argument("x")
    @click.argument("n", type=int)
    @common
    def cmd(cfg, oracle, x, n):
        sched = _schedule(cfg)
        rm = ReturnMap.of(sched)
        p = _point(sched, x)
        _in_Y(rm, p)
        if name == "xi" and n < 0:
            raise click.BadParameter("xi takes n >= 0")
        value = rm.zeta(p, n) if name == "zeta" else rm.xi(p, n)
        rep = Report(name, cfg, [sched])
        rep.summary = {"x": str(p), "n": n, name: value}
        if oracle:
            fq = _quotient(sched)
            ref = fq.oracle_zeta(p.value, n) if name == "zeta" else fq.oracle_xi(p.value, n)
            rep.check(f"oracle: {name} by literal stepping", ref == value, oracle=ref)
        return rep

    return cmd


_time_change("zeta")
_time_change("xi")


@cli.command()
@click.option("--upto", type=click.IntRange(1), default=None, help="Last index (default: depth).")
@common
def rheights(cfg, oracle, upto):
    """Return heights r_i with their recurrence residuals."""
    sched = _schedule(cfg)
    rm = ReturnMap.of(sched)
    upto = min(upto or sched.depth, sched.depth)
    rep = Report("rheights", cfg, [sched])
    rows = [{"i": i, "r_i": rm.r(i), "residual": rm.r_next(i, rm.r(i)) - rm.r(i + 1)} for i in range(1, upto + 1)]
    rep.table("r", rows)
    rep.check("block-count recurrence exact", all(r["residual"] == 0 for r in rows))
    if oracle:
        fq = _quotient(sched)
        rep.check("oracle: r_i by enumeration", fq.r_heights()[:upto] == [r["r_i"] for r in rows])
    return rep


@cli.command()
@click.argument("n", type=int)
@common
def digits(cfg, oracle, n):
    """Greedy expansion of N and the digits d_i(N) of zeta_0(N)."""
    sched = _schedule(cfg)
    rm = ReturnMap.of(sched)
    rep = Report("digits", cfg, [sched])
    c = rm.greedy_digits(n)
    d = rm.d_digits(n) if n >= 0 else None
    rep.summary = {"n": n, "c": {str(i): v for i, v in sorted(c.coeffs.items())}, "c_text": str(c)}
    if d is not None:
        rep.summary.update({"zeta_0": d.n, "d": {str(i): v for i, v in sorted(d.coeffs.items())},
                            "d_text": str(d), "sigma": d.sigma})
    rep.check("expansion sums back to n", c.value(sched) == n)
    return rep


@cli.command(name="reduce")
@click.argument("i", type=int)
@click.option("--N", "N", type=click.IntRange(0), default=1, show_default=True)
@click.option("--eps", default="1/2", show_default=True)
@click.option("--w-rule", type=click.Choice(W_RULES), default="matched", show_default=True)
@click.option("--classify/--no-classify", "do_classify", default=False)
@common
def reduce_cmd(cfg, oracle, i, N, eps, w_rule, do_classify):
    """Reduction tree of the power I."""
    sched = _schedule(cfg)
    rm = ReturnMap.of(sched)
    try:
        eps_f = Fraction(eps)
    except (ValueError, ZeroDivisionError) as exc:
        raise click.BadParameter(f"bad eps {eps!r}") from exc
    res = reduce_full(rm, i, N, eps_f, w_rule)
    rep = Report("reduce", cfg, [sched])
    rep.table("triples", res.to_json(rm)["triples"])
    rep.summary = {"i": i, "N": N, "eps": eps_f, "rounds": len(res.levels) - 1,
                   "total_nu": res.total_mass(), "tree": res.tree_text().splitlines()}
    if do_classify:
        rep.summary["class"] = classify(rm, i, N, eps_f, w_rule)
    rep.check("mass conserved at every depth",
              all(sum((rm.holes.nu(t.A) for t in lvl), Fraction(0)) == 1 for lvl in res.levels))
    return rep


@cli.command()
@click.argument("m", type=int)
@click.option("--samples", type=click.IntRange(1), default=200, show_default=True)
@common
def friends(cfg, oracle, m, samples):
    """Friend witness for the power M, verified by sampling."""
    import numpy as np

    sched = _schedule(cfg)
    rm = ReturnMap.of(sched)
    w = make_friend(rm, m)
    chk = verify_witness(rm, w, samples, np.random.default_rng(cfg.seed))
    rep = Report("friends", cfg, [sched])
    rep.summary = {"witness": w.to_json(), "check": chk.to_json()}
    rep.check("sampled domain points are friends with offsets in {+-1,+-2,+-3}", chk.ok)
    return rep


@cli.command()
@click.argument("name", type=click.Choice(sorted(EXPERIMENTS)))
@common
def experiment(cfg, oracle, name):
    """Run one seeded experiment."""
    return run_experiment(name, cfg, oracle=oracle)


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="odoprime", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except NotInY as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_USAGE
    except click.Abort:
        click.echo("Aborted.", err=True)
        return EXIT_FAIL
    except INFEASIBLE as exc:
        click.echo(f"infeasible configuration: {exc}", err=True)
        return EXIT_INFEASIBLE
    return rv if isinstance(rv, int) else EXIT_OK


def run():
    sys.exit(main())
