"""Command-line entry point: ``swarmcap <verb> [options]``.

Precedence of settings: built-in defaults, then ``--config`` JSON file,
then explicit flags. Exit codes: 0 success, 1 usage error, 2 infeasible
scenario, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys

from .errors import FeasibilityError, InvalidArgumentError, SolverError
from .scenario import FIGURES, ScenarioConfig, figure_jobs, run_experiment

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3

# flag name -> (config field, type)
_FLAGS = {
    "array": ("array", str),
    "m_y": ("m_y", int),
    "m_z": ("m_z", int),
    "theta": ("theta_deg", float),
    "phi": ("phi_deg", float),
    "r_min": ("r_min", float),
    "r_max": ("r_max", float),
    "d_min": ("d_min", float),
    "d_max": ("d_max", float),
    "snr_db": ("snr_db", float),
    "r0": ("r0", float),
    "trials": ("trials", int),
    "seed": ("seed", int),
    "floor_mode": ("floor_mode", str),
    "oversampling": ("oversampling", int),
    "max_rounds": ("max_rounds", int),
    "rel_tol": ("rel_tol", float),
    "sca_max_iters": ("sca_max_iters", int),
    "sca_tol": ("sca_tol", float),
    "workers": ("workers", int),
    "out": ("output_dir", str),
}


def _k_list(text: str) -> list:
    """Parse ``13``, ``1,2,4`` or ``1-16``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty K list {text!r}")
    return out


def _add_scenario_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("scenario")
    g.add_argument("--config", help="JSON file with ScenarioConfig fields")
    g.add_argument("--array", choices=["ULA", "UPA", "ula", "upa"])
    g.add_argument("--m-y", type=int, help="elements along y")
    g.add_argument("--m-z", type=int, help="elements along z (UPA)")
    g.add_argument("--theta", type=float, help="elevation half-width, degrees")
    g.add_argument("--phi", type=float, help="azimuth half-width, degrees")
    g.add_argument("--r-min", type=float)
    g.add_argument("--r-max", type=float)
    g.add_argument("--d-min", type=float, help="minimum pairwise separation, m")
    g.add_argument("--d-max", type=float, help="maximum pairwise separation, m (inf allowed)")
    g.add_argument("--snr-db", type=float, help="reference SNR at r0, dB")
    g.add_argument("--r0", type=float, help="reference range, m")
    g.add_argument("-K", "--k", dest="k", type=_k_list, help="users: 13, 1,2,4 or 1-16")
    g.add_argument("--trials", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--floor-mode", help="strict or tolerant[:eps]")
    g.add_argument("--oversampling", type=int, help="codebook oversampling factor")
    g.add_argument("--max-rounds", type=int)
    g.add_argument("--rel-tol", type=float)
    g.add_argument("--sca-max-iters", type=int)
    g.add_argument("--sca-tol", type=float)
    g.add_argument("--workers", type=int, help="processes for Monte-Carlo trials")
    g.add_argument("--out", help="output directory")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 is reserved for infeasibility here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="swarmcap", description="Swarm formation capacity toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, text in [
        ("characterize", "orthogonal-direction counts and closed-form capacities"),
        ("optimize", "optimize one scenario (first K) and emit formation tables"),
        ("sweep", "mean rate versus K over Monte-Carlo trials"),
        ("cdf", "rate distribution over Monte-Carlo trials"),
    ]:
        _add_scenario_flags(sub.add_parser(verb, help=text))
    fig = sub.add_parser("reproduce-figure", help="run a built-in preset")
    fig.add_argument("figure", type=int, choices=sorted(FIGURES))
    _add_scenario_flags(fig)
    return p


def _overrides(args) -> dict:
    out = {}
    for flag, (name, _) in _FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            out[name] = val
    if getattr(args, "k", None) is not None:
        out["k_values"] = args.k
    return out


def resolve_config(args, base: ScenarioConfig = None) -> ScenarioConfig:
    """Defaults, then the JSON file, then flags."""
    data = dataclasses.asdict(base or ScenarioConfig())
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_data = json.load(fh)
        ScenarioConfig.from_dict({**data, **file_data})  # validates keys
        data.update(file_data)
    data.update(_overrides(args))
    return ScenarioConfig.from_dict(data)


def _report(files: dict):
    for name in sorted(files):
        print(f"wrote {files[name]}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.verb == "reproduce-figure":
            cli = _overrides(args)
            out = cli.pop("output_dir", "results")
            if args.config:
                with open(args.config, encoding="utf-8") as fh:
                    cli = {**json.load(fh), **cli}
            for cfg, experiment, path in figure_jobs(args.figure, cli, out):
                _report(run_experiment(cfg, experiment, path))
        else:
            cfg = resolve_config(args)
            _report(run_experiment(cfg, args.verb))
    except FeasibilityError as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidArgumentError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
