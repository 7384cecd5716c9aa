"""Command-line front end.

Subcommands::

    sample           Monte Carlo trajectories and per-step histograms
    exact            exact outcome distribution, lagged joints and covariances
    covariance       covariance function only (exact, closed form, empirical)
    oracle-check     dense density-matrix equivalence check (n <= 8)
    validate-kernel  check the measurement kernel against the POVM constraints
    break-even       largest ensemble where spin noise beats the thermal signal

Run files are JSON documents; see ``load_runfile`` for the accepted keys.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .chain import (
    MixedState,
    ProductState,
    RunConfig,
    SectorDensity,
    break_even_spin_count,
    covariance_closed_form,
    covariance_empirical,
    covariance_exact,
    exact_joint,
    joint_route,
    sample_trajectories,
    single_time_distribution,
)
from .channels import (
    CollectiveDepolarizing,
    EpsilonPolarizing,
    ProductMap,
    RotatingProductMap,
    decay_probability,
)
from .measurement import KernelError, gaussian_kernel, validate_kernel
from .sectors import doubled_values, moments

ORACLE_CLI_MAX_N = 8
DISTRIBUTION_TOL = 1e-9

SIGN_CONVENTION = {
    "magnetization_keys": "doubled integer d = 2m",
    "flip_probabilities": "alpha: up->down, beta: down->up",
    "conditional_mean": "m1*(1-(alpha+beta)) + (N/2)*(beta-alpha)",
    "conditional_variance": "(N/2)*(alpha(1-alpha)+beta(1-beta)) + m1*(alpha(1-alpha)-beta(1-beta))",
    "rotation": "U = exp(-i*theta*sigma_x), flip probability sin(theta)^2",
}


class RunFileError(Exception):
    def __init__(self, path, line, message):
        self.path, self.line = path, line
        super().__init__(f"{path}:{line}: {message}" if line else f"{path}: {message}")


@dataclass
class RunFile:
    path: Path
    raw: dict
    config: RunConfig
    output_dir: Path


_TOP_KEYS = {"n", "kernel", "channel", "initial", "steps", "trajectories", "seed", "output_dir"}
_KERNEL_KEYS = {"type", "w"}
_CHANNEL_KEYS = {"type", "lambda", "theta", "alpha", "beta", "q_ref_path", "dt", "T"}
_INITIAL_KEYS = {"type", "a", "q0_path"}


def _line_of(text, key):
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _read_distribution_csv(path, n):
    probs = np.zeros(n + 1)
    d_vals = list(doubled_values(n))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            d = int(row["m_doubled"])
            if d not in d_vals:
                raise ValueError(f"m_doubled={d} is not a sector of N={n}")
            probs[d_vals.index(d)] = float(row["probability"])
    if abs(probs.sum() - 1.0) > DISTRIBUTION_TOL:
        raise ValueError(f"probabilities in {path} sum to {probs.sum()!r}")
    return tuple(probs / probs.sum())


def load_runfile(path, seed_override=None):
    """Parse and validate a JSON run file.

    Keys: ``n``; ``kernel {type: strong|gaussian, w}``; ``channel {type:
    collective_depolarizing|epsilon_polarizing|product|rotating_product,
    lambda | (dt, T), theta, alpha, beta, q_ref_path}``; ``initial {type:
    mixed|product|sector_density, a, q0_path}``; ``steps``; ``trajectories``;
    ``seed``; ``output_dir``. Unknown keys are rejected. Relative paths are
    resolved against the run file's directory.
    """
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RunFileError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise RunFileError(path, 1, "top level must be an object")

    def fail(key, message):
        raise RunFileError(path, _line_of(text, key), message)

    def check_keys(section, allowed, where):
        for key in section:
            if key not in allowed:
                fail(key, f"unknown key {key!r} in {where}")

    def number(section, key, where, required=True, default=None):
        if key not in section:
            if required:
                raise RunFileError(path, _line_of(text, where), f"{where} requires {key!r}")
            return default
        value = section[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail(key, f"{key!r} must be a number")
        return float(value)

    def integer(key, default=None, minimum=0):
        if key not in raw:
            if default is None:
                raise RunFileError(path, None, f"missing required key {key!r}")
            return default
        value = raw[key]
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            fail(key, f"{key!r} must be an integer >= {minimum}")
        return value

    def section(key, required=True):
        if key not in raw:
            if required:
                raise RunFileError(path, None, f"missing required section {key!r}")
            return None
        if not isinstance(raw[key], dict) or "type" not in raw[key]:
            fail(key, f"{key!r} must be an object with a 'type'")
        return raw[key]

    check_keys(raw, _TOP_KEYS, "run file")
    n = integer("n", minimum=1)
    steps = integer("steps", default=2, minimum=1)
    trajectories = integer("trajectories", default=1000, minimum=0)
    seed = integer("seed", default=0) if seed_override is None else int(seed_override)
    base = path.parent

    kern = section("kernel")
    check_keys(kern, _KERNEL_KEYS, "kernel")
    if kern["type"] == "strong":
        width = 0.0
    elif kern["type"] == "gaussian":
        width = number(kern, "w", "kernel")
        if width < 0:
            fail("w", "kernel width must be >= 0")
    else:
        fail("type", f"unknown kernel type {kern['type']!r}")

    chan = section("channel")
    check_keys(chan, _CHANNEL_KEYS, "channel")

    def lam():
        if "lambda" in chan:
            return number(chan, "lambda", "channel")
        if "dt" in chan and "T" in chan:
            try:
                return decay_probability(number(chan, "dt", "channel"), number(chan, "T", "channel"))
            except ValueError as exc:
                fail("dt", str(exc))
        raise RunFileError(path, _line_of(text, "channel"), "channel needs 'lambda' or both 'dt' and 'T'")

    try:
        ctype = chan["type"]
        if ctype == "collective_depolarizing":
            channel = CollectiveDepolarizing(lam())
        elif ctype == "epsilon_polarizing":
            if "q_ref_path" not in chan:
                fail("channel", "epsilon_polarizing needs 'q_ref_path'")
            q_ref = _read_distribution_csv(base / chan["q_ref_path"], n)
            channel = EpsilonPolarizing(lam(), q_ref)
        elif ctype == "product":
            channel = ProductMap(number(chan, "alpha", "channel"), number(chan, "beta", "channel"))
        elif ctype == "rotating_product":
            channel = RotatingProductMap(lam(), number(chan, "theta", "channel"))
        else:
            fail("type", f"unknown channel type {ctype!r}")

        init = section("initial", required=False) or {"type": "mixed"}
        check_keys(init, _INITIAL_KEYS, "initial")
        itype = init["type"]
        if itype == "mixed":
            initial = MixedState()
        elif itype == "product":
            initial = ProductState(number(init, "a", "initial"))
        elif itype == "sector_density":
            if "q0_path" not in init:
                fail("initial", "sector_density needs 'q0_path'")
            initial = SectorDensity(_read_distribution_csv(base / init["q0_path"], n))
        else:
            fail("type", f"unknown initial state type {itype!r}")

        config = RunConfig(n=n, channel=channel, width=width, steps=steps,
                           trajectories=trajectories, seed=seed, initial=initial)
    except (ValueError, OSError) as exc:
        raise RunFileError(path, None, str(exc)) from None

    out = raw.get("output_dir", ".")
    if not isinstance(out, str):
        fail("output_dir", "'output_dir' must be a string")
    raw = dict(raw, seed=seed)
    return RunFile(path, raw, config, base / out)


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------

def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _check_distribution(probs, what):
    total = float(np.sum(probs))
    if abs(total - 1.0) > DISTRIBUTION_TOL or np.any(np.asarray(probs) < 0):
        raise RuntimeError(f"refusing to write {what}: probabilities sum to {total!r}")


def _write_meta(runfile, out, command, **extra):
    meta = {
        "engine": "spinnoise",
        "version": __version__,
        "command": command,
        "config": runfile.raw,
        "seed": runfile.config.seed,
        "sign_convention": SIGN_CONVENTION,
        "joint_route": joint_route(runfile.config),
    }
    meta.update(extra)
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _parse_lags(text):
    try:
        lags = sorted({int(part) for part in text.split(",") if part.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"lags must be comma-separated integers, got {text!r}") from None
    if not lags or lags[0] < 0:
        raise argparse.ArgumentTypeError("lags must be non-negative")
    return lags


def _covariance_rows(config, lags, trajectories):
    n = config.n
    first = single_time_distribution(config, 1)
    mean1 = moments(first).mean
    closed = isinstance(config.channel, (CollectiveDepolarizing, EpsilonPolarizing))
    rows = []
    for k in lags:
        if k == 0:
            r_exact = moments(first).std ** 2
            r_closed = None
        else:
            r_exact = covariance_exact(exact_joint(config, 1 + k, 1))
            r_closed = covariance_closed_form(n, config.channel.lam, k, mean1) if closed else None
        r_emp = err = None
        if trajectories is not None and trajectories.shape[0] >= 2 and k < trajectories.shape[1]:
            r_emp, err = covariance_empirical(trajectories, k)
        rows.append((k, _fmt(r_exact), _fmt(r_closed), _fmt(r_emp), _fmt(err)))
    return rows


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _output_dir(args, runfile):
    out = Path(args.out) if args.out else runfile.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_sample(args, runfile):
    config = runfile.config
    out = _output_dir(args, runfile)
    traj = sample_trajectories(config, n_jobs=args.jobs, first_outcome=args.postselect_m1)
    _write_csv(
        out / "trajectories.csv",
        ["trajectory_id", "step", "m_doubled"],
        ((t, s + 1, int(traj[t, s])) for t in range(traj.shape[0]) for s in range(traj.shape[1])),
    )
    d_vals = doubled_values(config.n)
    rows = []
    for s in range(config.steps):
        counts = np.array([(traj[:, s] == d).sum() for d in d_vals])
        freq = counts / max(counts.sum(), 1)
        if counts.sum():
            _check_distribution(freq, f"histogram of step {s + 1}")
        rows.extend((s + 1, int(d), int(c), _fmt(f)) for d, c, f in zip(d_vals, counts, freq))
    _write_csv(out / "histogram.csv", ["step", "m_doubled", "count", "frequency"], rows)
    _write_meta(runfile, out, "sample", postselect_m1=args.postselect_m1, jobs_independent=True)
    return 0


def cmd_exact(args, runfile):
    config = runfile.config
    out = _output_dir(args, runfile)
    first = single_time_distribution(config, 1)
    _check_distribution(first.probs, "distribution.csv")
    _write_csv(out / "distribution.csv", ["m_doubled", "probability"],
               ((int(d), _fmt(p)) for d, p in zip(first.doubled, first.probs)))
    d_vals = doubled_values(config.n)
    for k in args.lags:
        if k == 0:
            continue
        joint = exact_joint(config, 1 + k, 1)
        _check_distribution(joint.matrix, f"joint_{k}.csv")
        _write_csv(
            out / f"joint_{k}.csv",
            ["m_i_doubled", "m_j_doubled", "probability"],
            ((int(d_vals[a]), int(d_vals[b]), _fmt(joint.matrix[a, b]))
             for a in range(config.n + 1) for b in range(config.n + 1)),
        )
    _write_covariance(args, runfile, out)
    _write_meta(runfile, out, "exact", lags=args.lags)
    return 0


def _write_covariance(args, runfile, out):
    config = runfile.config
    needed = max(args.lags) + 1
    traj = None
    if config.trajectories >= 2 and config.steps >= needed:
        traj = sample_trajectories(config, n_jobs=args.jobs)
    _write_csv(out / "covariance.csv", ["lag", "r_exact", "r_closed_form", "r_empirical", "stderr"],
               _covariance_rows(config, args.lags, traj))


def cmd_covariance(args, runfile):
    out = _output_dir(args, runfile)
    _write_covariance(args, runfile, out)
    _write_meta(runfile, out, "covariance", lags=args.lags)
    return 0


def cmd_oracle_check(args, runfile):
    from .oracle import crosscheck

    config = runfile.config
    if config.n > ORACLE_CLI_MAX_N:
        print(f"error: oracle-check refuses n={config.n}; the dense oracle is limited to "
              f"n <= {ORACLE_CLI_MAX_N}", file=sys.stderr)
        return 2
    out = _output_dir(args, runfile)
    sector_kernel = None
    if args.corrupt_kernel:
        sector_kernel = gaussian_kernel(config.n, config.width + 0.5)
    report = crosscheck(config, steps=min(config.steps, 3), tolerance=args.tolerance,
                        sector_kernel=sector_kernel)
    payload = report.to_dict()
    payload["corrupted_kernel"] = bool(args.corrupt_kernel)
    (out / "oracle_report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} max_tv={report.max_tv:.3e} max_posterior_tv={report.max_posterior_tv:.3e} "
          f"max_in_sector_deviation={report.max_in_sector_deviation:.3e}")
    return 0 if report.passed else 1


def cmd_validate_kernel(args, runfile):
    config = runfile.config
    try:
        report = validate_kernel(config.kernel)
    except KernelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        out = _output_dir(args, runfile)
        (out / "kernel_report.json").write_text(text)
    print(text, end="")
    return 0 if report.passed else 1


def cmd_break_even(args):
    value = break_even_spin_count(args.beta, args.epsilon)
    print("unbounded" if math.isinf(value) else value)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="spinnoise", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="JSON run file")
        p.add_argument("--seed", type=int, default=None, help="override the run file seed")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for sampling")
        return p

    p = with_config("sample", "sample trajectories")
    p.add_argument("--postselect-m1", type=int, default=None,
                   help="condition every trajectory on this first outcome (doubled units)")
    for name, text in (("exact", "exact distributions and joints"),
                       ("covariance", "covariance function")):
        p = with_config(name, text)
        p.add_argument("--lags", type=_parse_lags, default=[1, 2, 4, 8])
    p = with_config("oracle-check", "dense oracle equivalence check")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--corrupt-kernel", action="store_true", help=argparse.SUPPRESS)
    with_config("validate-kernel", "check POVM constraints")
    p = sub.add_parser("break-even", help="spin-noise break-even ensemble size")
    p.add_argument("--beta", type=float, required=True, help="flip angle in radians")
    p.add_argument("--epsilon", type=float, required=True, help="thermal polarization")
    return parser


_COMMANDS = {
    "sample": cmd_sample,
    "exact": cmd_exact,
    "covariance": cmd_covariance,
    "oracle-check": cmd_oracle_check,
    "validate-kernel": cmd_validate_kernel,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "break-even":
            return cmd_break_even(args)
        runfile = load_runfile(args.config, seed_override=args.seed)
        return _COMMANDS[args.command](args, runfile)
    except RunFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
