"""Command-line front end.

Exit statuses:
    0  success
    1  invalid configuration or failed computation
    2  ``simulate``: the trajectory blew up
    3  ``convergence``: blow-up fraction above 5% at some step
    4  ``validate``: an assumption probe failed

Config files are flat ``key = value`` text (``#`` starts a comment); any
command-line flag overrides the file.  Keys match the RunConfig fields.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import brownian, experiment, model
from .errors import SdeError
from .schemes import SCHEME_ALIASES, integrate, parse_scheme
from .svg import loglog_svg
from .truncation import PowerLaw, TruncationPolicy, radius

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_UNRELIABLE, EXIT_PROBE = 0, 1, 2, 3, 4
FD_TOLERANCE = 1e-5


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    problem: str = "example51"
    drift: str = ""
    diffusion: str = ""
    y0: float = 1.0
    t0: float = 0.0
    t_end: float = 1.0
    alpha: float = 1.0
    beta: float | None = None
    scheme: str = "trunc-milstein"
    epsilon: float | None = None
    envelope_c: float | None = None
    envelope_gamma: float | None = None
    strict_floor: bool = True
    steps: list = field(default_factory=lambda: [6, 7, 8, 9, 10, 11])
    ref_level: int = 16
    paths: int = 1000
    qbar: float = 2.0
    seed: int = 0
    out: str = "out"


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name, text):
    text = text.strip()
    if name == "steps":
        try:
            return [int(s) for s in text.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"steps must be a comma list of integers, got {text!r}") from None
    if name == "strict_floor":
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"strict_floor must be true/false, got {text!r}")
    if name in ("problem", "drift", "diffusion", "scheme", "out"):
        return text
    if text.lower() in ("", "none"):
        return None
    try:
        if name in ("ref_level", "paths", "seed"):
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"{name} expects a number, got {text!r}") from None


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = dataclasses.replace(base) if base else RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, value))
    return cfg


def _fmt_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(str(k) for k in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{name} = {_fmt_value(getattr(cfg, name))}\n" for name in _FIELDS)


def fmt_num(v: float) -> str:
    """17 significant digits, so repeated runs give identical bytes."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


# --------------------------------------------------------------- resolution

@dataclass
class Resolved:
    config: RunConfig
    problem: model.SdeProblem
    policy: TruncationPolicy
    exact: object
    scheme: object


def resolve(cfg: RunConfig, check_steps: bool = True) -> Resolved:
    """Fill catalog defaults and validate every constraint before any run.

    ``check_steps=False`` skips the step-list checks, for commands that never
    integrate.
    """
    cfg = dataclasses.replace(cfg, steps=list(cfg.steps))
    try:
        scheme = parse_scheme(cfg.scheme)
        if cfg.problem == "inline":
            if not cfg.drift or not cfg.diffusion:
                raise ConfigError("inline problems need both drift and diffusion term lists")
            problem = model.inline_problem(cfg.drift, cfg.diffusion, cfg.y0, cfg.t0, cfg.t_end,
                                           cfg.alpha, cfg.beta)
            cfg.beta = problem.poly_beta
            exact = None
            defaults = None
        else:
            entry = model.get_entry(cfg.problem)
            problem, exact, defaults = entry.problem, entry.exact_solution, entry.truncation_defaults
            cfg.drift = cfg.diffusion = ""
            cfg.y0, cfg.t0, cfg.t_end = float(problem.y0[0]), problem.t0, problem.t_end
            cfg.alpha, cfg.beta = problem.holder_alpha, problem.poly_beta
        if cfg.epsilon is None:
            cfg.epsilon = defaults.epsilon if defaults else 0.25
        if cfg.envelope_c is None or cfg.envelope_gamma is None:
            env = defaults.envelope if defaults else PowerLaw(1.0, max(1.0, cfg.beta + 1))
            cfg.envelope_c = env.c if cfg.envelope_c is None else cfg.envelope_c
            cfg.envelope_gamma = env.gamma if cfg.envelope_gamma is None else cfg.envelope_gamma
        policy = TruncationPolicy(PowerLaw(cfg.envelope_c, cfg.envelope_gamma), cfg.epsilon,
                                  strict_floor=cfg.strict_floor)
        if not check_steps:
            return Resolved(cfg, problem, policy, exact, scheme)
        if not cfg.steps:
            raise ConfigError("no steps given")
        if any(k < 0 for k in cfg.steps):
            raise ConfigError("step exponents must be nonnegative")
        if not 0 <= cfg.ref_level <= brownian.MAX_LEVELS:
            raise ConfigError(f"ref_level must lie in [0, {brownian.MAX_LEVELS}]")
        span = problem.t_end - problem.t0
        for k in cfg.steps:
            dt = span / 2 ** k
            if dt > 1:
                raise ConfigError(f"step 2^-{k} of the horizon exceeds 1")
            if scheme.truncated:
                radius(policy, dt)
    except (SdeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return Resolved(cfg, problem, policy, exact, scheme)


# ----------------------------------------------------------------- commands

def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _prepare_out(res: Resolved):
    os.makedirs(res.config.out, exist_ok=True)
    _write(os.path.join(res.config.out, "config.echo"), format_config(res.config))


def cmd_simulate(res: Resolved, workers: int = 1) -> int:
    cfg = res.config
    if len(cfg.steps) != 1:
        raise ConfigError(f"simulate takes exactly one step exponent, got {cfg.steps}")
    level = cfg.steps[0]
    lattice_level = max(level, cfg.ref_level)
    if lattice_level > brownian.MAX_LEVELS:
        raise ConfigError(f"step level {level} exceeds the lattice limit {brownian.MAX_LEVELS}")
    p = res.problem
    lattice = brownian.generate(cfg.seed, 0, lattice_level, p.t0, p.t_end)
    dt = (p.t_end - p.t0) / 2 ** level
    offs = brownian.offsets(cfg.seed, 0, 2 ** level) if res.scheme.randomized else None
    traj = integrate(p, res.scheme, res.policy if res.scheme.truncated else None, dt, lattice, offs)
    _prepare_out(res)
    header = "t," + ",".join(f"x{i + 1}" for i in range(p.dim))
    lines = [header]
    for t, x in zip(traj.times, traj.states):
        lines.append(",".join([fmt_num(t)] + [fmt_num(v) for v in x]))
    _write(os.path.join(cfg.out, "trajectory.csv"), "\n".join(lines) + "\n")
    if traj.blew_up:
        print(f"blow-up: non-finite state at step {traj.blowup_index} "
              f"(t={traj.times[traj.blowup_index]:.6g})", file=sys.stderr)
        return EXIT_BLOWUP
    print(f"wrote {len(traj.times)} grid points to {os.path.join(cfg.out, 'trajectory.csv')}")
    return EXIT_OK


def cmd_convergence(res: Resolved, workers: int = 1) -> int:
    cfg = res.config
    if len(cfg.steps) < 3:
        raise ConfigError(f"convergence needs at least 3 steps, got {len(cfg.steps)}")
    p = res.problem
    span = p.t_end - p.t0
    steps = [span / 2 ** k for k in cfg.steps]
    try:
        report = experiment.convergence_study(
            cfg.problem, p, res.scheme, res.policy, steps, cfg.ref_level, cfg.paths, cfg.seed,
            cfg.qbar, res.exact, workers)
    except SdeError as exc:
        raise ConfigError(str(exc)) from exc
    _prepare_out(res)
    rows = ["dt,error_qbar,error_sup,std_err,blowup_frac"]
    for s in report.samples:
        rows.append(",".join(fmt_num(v) for v in
                             (s.dt, s.error_at_T, s.error_sup, s.std_error, s.blowup_frac)))
    _write(os.path.join(cfg.out, "errors.csv"), "\n".join(rows) + "\n")
    pred = math.nan if report.predicted_rate is None else report.predicted_rate
    _write(os.path.join(cfg.out, "report.csv"),
           "fitted_slope,half_width,predicted_rate,unreliable\n"
           f"{fmt_num(report.fitted_slope)},{fmt_num(report.half_width)},{fmt_num(pred)},"
           f"{int(report.unreliable)}\n")
    q = cfg.qbar
    pts = [(math.log2(s.dt), math.log2(s.error_at_T) / q) for s in report.samples
           if math.isfinite(s.error_at_T) and s.error_at_T > 0]
    lx, ly = [x for x, _ in pts], [y for _, y in pts]
    intercept = float(np.mean(ly) - report.fitted_slope * np.mean(lx)) if pts else math.nan
    _write(os.path.join(cfg.out, "loglog.svg"),
           loglog_svg(lx, ly, report.fitted_slope, intercept,
                      f"{cfg.problem}: {res.scheme.value}", f"E|error|^{q:g} ^ (1/{q:g})"))
    print(f"fitted slope {report.fitted_slope:.4f} +/- {report.half_width:.4f}; "
          f"predicted {pred:.4f}")
    if report.unreliable:
        print(f"unreliable: blow-up fraction above {experiment.BLOWUP_LIMIT:.0%} at some step",
              file=sys.stderr)
        return EXIT_UNRELIABLE
    return EXIT_OK


def run_probes(res: Resolved, samples: int = 10_000, seed: int = 0):
    p = res.problem
    try:
        results = [
            model.growth_probe(p, samples, seed),
            model.envelope_probe(p, res.policy.envelope, samples, seed),
            model.khasminskii_probe(p, samples=samples, seed=seed),
            model.monotonicity_probe(p, samples=samples, seed=seed),
        ]
        fd = model.fd_check(p, 1000, seed)
    except SdeError as exc:
        raise ConfigError(str(exc)) from exc
    results.append(model.ProbeResult("fd_check", fd < FD_TOLERANCE, fd, FD_TOLERANCE,
                                     "analytic G^l vs central differences of sigma"))
    return results


def cmd_validate(res: Resolved, workers: int = 1) -> int:
    results = run_probes(res, seed=res.config.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROBE


def cmd_catalog() -> int:
    for entry in model.catalog():
        pol = entry.truncation_defaults
        print(f"{entry.name}: {entry.description} "
              f"[f(u)={pol.envelope.c:g}u^{pol.envelope.gamma:g}, epsilon={pol.epsilon:g}"
              f"{', exact solution' if entry.exact_solution else ''}]")
    return EXIT_OK


# ------------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="truncmilstein",
                     description="Truncated Milstein schemes and strong-convergence studies.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("simulate", "convergence", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--problem", help="catalog name or 'inline'")
        sp.add_argument("--drift", help="inline drift terms 'c,a1,a2,k;...'")
        sp.add_argument("--diffusion", help="inline diffusion terms 'c,a1,a2,k;...'")
        sp.add_argument("--y0", type=float)
        sp.add_argument("--t0", type=float)
        sp.add_argument("--t-end", dest="t_end", type=float)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--scheme", choices=list(SCHEME_ALIASES))
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--envelope-c", dest="envelope_c", type=float)
        sp.add_argument("--envelope-gamma", dest="envelope_gamma", type=float)
        sp.add_argument("--no-strict-floor", dest="strict_floor", action="store_const",
                        const=False, help="allow h(dt) < f(1), i.e. radii below 1")
        sp.add_argument("--steps", help="comma list of k for steps 2^-k")
        sp.add_argument("--ref-level", dest="ref_level", type=int)
        sp.add_argument("--paths", type=int)
        sp.add_argument("--qbar", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out")
    sub.add_parser("catalog")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    for name in _FIELDS:
        value = getattr(args, name, None)
        if value is None:
            continue
        if name == "steps":
            value = _coerce("steps", value)
        setattr(cfg, name, value)
    return cfg


COMMANDS = {"simulate": cmd_simulate, "convergence": cmd_convergence, "validate": cmd_validate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors exit 1, --help exits 0
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "catalog":
        return cmd_catalog()
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        res = resolve(config_from_args(args), check_steps=args.command != "validate")
        return COMMANDS[args.command](res, args.workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # any other failure still maps onto a documented status
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
