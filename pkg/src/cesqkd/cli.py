"""Command-line front end.

Every command writes CSV (or JSON for ``optimize --format json``). The first
line of a CSV is a comment holding the fully resolved configuration, and all
floats are printed in scientific notation with 12 significant digits, so the
same configuration always produces the same bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from cesqkd.amplitude import AnalyzerAngles, pattern_table
from cesqkd.coincidence import qber
from cesqkd.core import ResourceParams, Topology
from cesqkd.optimizer import (
    OptimizerConfig,
    find_lmax,
    scan_qber_vs_chi,
    scan_rate_vs_distance,
)
from cesqkd.oracle import build_pdc_state, compare_closed_form, evolve_and_measure
from cesqkd.rates import ideal_rate, qber_cutoff, secret_key_rate, tgw_bound

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4

VALIDATE_TOL = 1e-8

GLOBAL_DEFAULTS: dict[str, Any] = {
    "stations": 1,
    "ell": 0.0,
    "chi": 0.1,
    "eta": 0.4,
    "dark": 1e-5,
    "dark_coupled": None,
    "alpha": 0.25,
    "alpha0": 4.0,
    "kappa": 1.22,
    "nmax": 3,
    "rep_rate_hz": 1e8,
    "squash": False,
    "out": None,
}

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "qber-scan": {
        "vs": "chi", "chi_min": 0.01, "chi_max": 0.3, "steps": 30,
        "ell_min": 0.0, "ell_max": 400.0, "threshold": None,
    },
    "optimize": {
        "ell_min": 0.0, "ell_max": 400.0, "step": 25.0, "fix_eta": False,
        "find_lmax": False, "format": "csv",
    },
    "bounds": {"ell_min": 10.0, "ell_max": 1000.0, "step": 10.0},
    "rate": {},
    "validate": {},
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved settings: defaults, then config file, then explicit flags."""

    command: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name: str):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None

    def params(self, dark_coupled_default: bool = False) -> ResourceParams:
        coupled = self.values["dark_coupled"]
        return ResourceParams(
            chi=self.values["chi"],
            eta=self.values["eta"],
            dark=self.values["dark"],
            alpha=self.values["alpha"],
            alpha0=self.values["alpha0"],
            kappa=self.values["kappa"],
            dark_coupled=dark_coupled_default if coupled is None else coupled,
        )

    def header(self) -> str:
        shown = {k: v for k, v in sorted(self.values.items()) if k not in ("out", "config")}
        return "# config: " + json.dumps({"command": self.command, **shown}, sort_keys=True)


# ---------------------------------------------------------------- formatting


def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.11e}"


def render_csv(cfg: RunConfig, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [cfg.header(), ",".join(columns)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ commands


def _grid(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0 or hi < lo:
        raise UsageError("grid needs step > 0 and max >= min")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [lo + k * step for k in range(n + 1)]


def cmd_qber_scan(cfg: RunConfig) -> int:
    params = cfg.params()
    if cfg.steps < 2:
        raise UsageError("--steps must be >= 2")
    if cfg.vs == "chi":
        chis = np.linspace(cfg.chi_min, cfg.chi_max, cfg.steps)
        thr = qber_cutoff(1.0) if cfg.threshold is None else cfg.threshold
        scan = scan_qber_vs_chi(
            cfg.stations, chis, params, ell=cfg.ell, threshold=thr,
            n_max=cfg.nmax, squash=cfg.squash,
        )
        rows = [(c, q, scan.crossing) for c, q in zip(scan.chi, scan.qber)]
        _emit(cfg, render_csv(cfg, ["chi", "qber", "crossing"], rows))
    else:
        ells = np.linspace(cfg.ell_min, cfg.ell_max, cfg.steps)
        rows = [
            (ell, qber(params, Topology(cfg.stations, float(ell)), n_max=cfg.nmax, squash=cfg.squash))
            for ell in ells
        ]
        _emit(cfg, render_csv(cfg, ["ell_km", "qber"], rows))
    return EXIT_OK


def _optimizer_config(cfg: RunConfig) -> OptimizerConfig:
    base = cfg.params(dark_coupled_default=True)
    opt = OptimizerConfig(
        base=base, optimize_eta=not cfg.fix_eta, n_max=cfg.nmax, squash=cfg.squash,
    )
    if cfg.fix_eta and not base.dark_coupled:
        opt = opt.with_(eta_bounds=(0.01, 1.0))
    return opt


def cmd_optimize(cfg: RunConfig) -> int:
    opt = _optimizer_config(cfg)
    records = scan_rate_vs_distance(cfg.stations, _grid(cfg.ell_min, cfg.ell_max, cfg.step), opt)
    if cfg.find_lmax:
        last_ok = max((r.ell for r in records if r.r_max > 0), default=None)
        first_bad = min((r.ell for r in records if r.r_max <= 0 and (last_ok is None or r.ell > last_ok)), default=None)
        if last_ok is None or first_bad is None:
            print("lmax: grid does not straddle the feasibility boundary", file=sys.stderr)
        else:
            print(f"lmax_km={fmt(find_lmax(cfg.stations, opt, (last_ok, first_bad)))}", file=sys.stderr)
    if cfg.format == "json":
        doc = {"config": json.loads(cfg.header()[len("# config: "):]), "records": [asdict(r) for r in records]}
        for r in doc["records"]:
            if isinstance(r["qber"], float) and math.isnan(r["qber"]):
                r["qber"] = None
        _emit(cfg, json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    rows = [
        (r.ell, r.chi_opt, r.eta_opt, r.dark, r.qber, r.log10_rmax, r.converged)
        if r.r_max > 0
        else (r.ell, None, None, None, None, None, False)
        for r in records
    ]
    cols = ["ell_km", "chi_opt", "eta_opt", "dark", "qber", "log10_rmax", "converged"]
    _emit(cfg, render_csv(cfg, cols, rows))
    return EXIT_OK


def cmd_bounds(cfg: RunConfig) -> int:
    ells = [e for e in _grid(cfg.ell_min, cfg.ell_max, cfg.step) if e > 0]
    rows = [
        (e, math.log10(tgw_bound(e, cfg.alpha)), *(math.log10(ideal_rate(n, e, cfg.alpha)) for n in (1, 2, 3)))
        for e in ells
    ]
    _emit(cfg, render_csv(cfg, ["ell_km", "tgw", "ideal_n1", "ideal_n2", "ideal_n3"], rows))
    return EXIT_OK


def cmd_rate(cfg: RunConfig) -> int:
    params = cfg.params()
    rb = secret_key_rate(params, Topology(cfg.stations, cfg.ell), n_max=cfg.nmax, squash=cfg.squash)
    cols = ["stations", "ell_km", "chi", "eta", "dark", "qber", "r_sif", "r_sp", "r", "bits_per_second", "truncation_bound"]
    row = (
        cfg.stations, cfg.ell, params.chi, params.eta, params.dark_probability, rb.q,
        rb.r_sif, rb.r_sp, rb.r, rb.bits_per_second(cfg.rep_rate_hz), rb.truncation_bound,
    )
    _emit(cfg, render_csv(cfg, cols, [row]))
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    n_max = min(cfg.nmax, 3)
    chis = (0.05, 0.1, 0.2)
    angles = (0.0, math.pi / 4, math.pi / 2)
    checks: list[tuple[str, float, bool]] = []

    dev = compare_closed_form(chis, angles, n_max)
    checks.append(("closed form vs oracle, worst relative deviation", dev, dev < VALIDATE_TOL))

    zero = compare_closed_form((0.0,), (0.0,), n_max)
    checks.append(("vacuum agreement at chi=0", zero, zero == 0.0))

    table = evolve_and_measure(
        build_pdc_state(0.1, n_max), AnalyzerAngles(), ResourceParams(0.1, 0.4).detector(Topology(1))
    )
    err = abs(float(table.probs.sum()) - 1.0)
    checks.append(("oracle table completeness |sum - 1|", err, err <= 1e-12))

    total = float(pattern_table(1, n_max, AnalyzerAngles(math.pi / 4, math.pi / 2)).weight(0.2).sum())
    checks.append(("amplitude mass <= 1", total, total <= 1.0 + 1e-12))

    failed = False
    for name, value, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3e}")
        failed |= not ok
    if failed:
        print(f"validation failed; worst deviation {dev:.3e} (tolerance {VALIDATE_TOL:.0e})", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {
    "qber-scan": cmd_qber_scan,
    "optimize": cmd_optimize,
    "bounds": cmd_bounds,
    "rate": cmd_rate,
    "validate": cmd_validate,
}


# ------------------------------------------------------------------- parsing


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("physical and run parameters")
    g.add_argument("--stations", type=int, default=S, help="number of swapping setups N (default 1)")
    g.add_argument("--ell", type=float, default=S, help="distance in km (default 0)")
    g.add_argument("--chi", type=float, default=S, help="PDC amplitude (default 0.1)")
    g.add_argument("--eta", type=float, default=S, help="detector efficiency (default 0.4)")
    g.add_argument("--dark", type=float, default=S, help="dark-count probability (default 1e-5)")
    g.add_argument(
        "--dark-coupled", nargs="?", const=True, type=_bool, default=S,
        help="derive dark counts from eta (default on for optimize, off otherwise)",
    )
    g.add_argument("--alpha", type=float, default=S, help="fibre loss, dB/km (default 0.25)")
    g.add_argument("--alpha0", type=float, default=S, help="fixed loss, dB (default 4)")
    g.add_argument("--kappa", type=float, default=S, help="reconciliation efficiency (default 1.22)")
    g.add_argument("--nmax", type=int, default=S, help="photon-number cutoff per detector (default 3)")
    g.add_argument("--rep-rate-hz", type=float, default=S, help="source repetition rate (default 1e8)")
    g.add_argument("--squash", nargs="?", const=True, type=_bool, default=S, help="split end double clicks")
    g.add_argument("--out", default=S, help="output file (default stdout)")
    g.add_argument("--config", default=S, help="JSON or YAML file of flat key/value settings")

    parser = argparse.ArgumentParser(prog="cesqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qber-scan", parents=[common], help="QBER versus chi or distance")
    p.add_argument("--vs", choices=("chi", "ell"), default=S)
    p.add_argument("--chi-min", type=float, default=S)
    p.add_argument("--chi-max", type=float, default=S)
    p.add_argument("--ell-min", type=float, default=S)
    p.add_argument("--ell-max", type=float, default=S)
    p.add_argument("--steps", type=int, default=S)
    p.add_argument("--threshold", type=float, default=S, help="QBER line for the crossing (default 0.110)")

    p = sub.add_parser("optimize", parents=[common], help="maximal rate versus distance")
    p.add_argument("--ell-min", type=float, default=S)
    p.add_argument("--ell-max", type=float, default=S)
    p.add_argument("--step", type=float, default=S)
    p.add_argument("--fix-eta", nargs="?", const=True, type=_bool, default=S, help="optimise chi only")
    p.add_argument("--find-lmax", nargs="?", const=True, type=_bool, default=S, help="report the cutoff distance on stderr")
    p.add_argument("--format", choices=("csv", "json"), default=S)

    p = sub.add_parser("bounds", parents=[common], help="ideal rates and the repeaterless bound")
    p.add_argument("--ell-min", type=float, default=S)
    p.add_argument("--ell-max", type=float, default=S)
    p.add_argument("--step", type=float, default=S)

    sub.add_parser("rate", parents=[common], help="rate at one parameter point")
    sub.add_parser("validate", parents=[common], help="closed form against the Fock oracle")
    return parser


def load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
        raise UsageError("config file must be a flat key/value mapping")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def resolve(argv: Sequence[str] | None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    values = {**GLOBAL_DEFAULTS, **COMMAND_DEFAULTS[command]}
    if "config" in ns:
        from_file = load_config_file(ns.pop("config"))
        unknown = set(from_file) - set(values)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(from_file)
    values.update(ns)
    return RunConfig(command=command, values=values)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = resolve(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return EXIT_ARGS if exc.code not in (0, None) else EXIT_OK
    except (UsageError, OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    try:
        Topology(cfg.stations, cfg.ell)
        cfg.params()
        return COMMANDS[cfg.command](cfg)
    except (UsageError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
