"""Command-line front end.

Subcommands: link, swap, chain, optimize, figures, verify.  Settings come from
an optional INI file with sections ``[link]``, ``[chain]``, ``[search]`` and
``[output]``; command-line flags override it.  Units are fixed: km, seconds,
probabilities.

Exit codes: 0 success, 1 invalid input, 2 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import analytic, oracle
from .analytic import LinkParams, MixedLinkState
from .chain import ChainConfig, report_for, run_trials, summarize, write_records
from .fock import TruncationError, entanglement_entropy, quasi_bell_state, truncation_for
from .optimize import SearchSpec, optimize, small_amplitude_endpoint, write_surface

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2

FIGURES = ("fig2", "fig3", "fig5", "fig6")

LINK_KEYS = {"alpha_sq": float, "tap": float, "L0": float, "L_att": float, "eta_d": float, "eta_m": float, "c": float}
CHAIN_KEYS = {
    "n_links": int,
    "n_trials": int,
    "rng_seed": int,
    "postselection": "bool",
    "swap_cost": str,
    "workers": int,
}
SEARCH_KEYS = {
    "alpha_sq_min": float,
    "alpha_sq_max": float,
    "tap_min": float,
    "tap_max": float,
    "grid_alpha": int,
    "grid_tap": int,
    "fidelity_floor": float,
}
OUTPUT_KEYS = {"dir": str, "summary": "bool", "records": "bool"}
SECTIONS = {"link": LINK_KEYS, "chain": CHAIN_KEYS, "search": SEARCH_KEYS, "output": OUTPUT_KEYS}


@dataclass
class RunConfig:
    link: dict = field(default_factory=lambda: {"alpha_sq": 0.13, "tap": 0.16, "L0": 150.0})
    chain: dict = field(default_factory=lambda: {"n_links": 4, "n_trials": 10_000, "rng_seed": 0})
    search: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def link_params(self) -> LinkParams:
        return LinkParams(**self.link)

    def chain_config(self) -> ChainConfig:
        return ChainConfig(link=self.link_params(), **self.chain)

    def search_spec(self) -> SearchSpec:
        s = self.search
        defaults = SearchSpec(self.link_params())
        return SearchSpec(
            link=self.link_params(),
            n_links=self.chain.get("n_links", 4),
            alpha_sq_range=(s.get("alpha_sq_min", defaults.alpha_sq_range[0]), s.get("alpha_sq_max", defaults.alpha_sq_range[1])),
            tap_range=(s.get("tap_min", defaults.tap_range[0]), s.get("tap_max", defaults.tap_range[1])),
            grid_resolution=(s.get("grid_alpha", defaults.grid_resolution[0]), s.get("grid_tap", defaults.grid_resolution[1])),
            fidelity_floor=s.get("fidelity_floor", defaults.fidelity_floor),
        )


def load_config(path: str | None) -> RunConfig:
    """Parse an INI file; unknown sections or keys are rejected."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case (L0, L_att)
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    for section in parser.sections():
        if section not in SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        target = getattr(cfg, section)
        for key, raw in parser.items(section):
            kind = SECTIONS[section].get(key)
            if kind is None:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            if kind == "bool":
                target[key] = parser.getboolean(section, key)
            else:
                try:
                    target[key] = kind(raw)
                except ValueError as exc:
                    raise ValueError(f"bad value for [{section}] {key}: {raw!r}") from exc
    # re-validate physical bounds now rather than at first use
    cfg.link_params()
    cfg.chain_config()
    cfg.search_spec()
    return cfg


# ---------------------------------------------------------------------------
# table output


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.10g}"
    return str(v)


def emit(text: str, out_dir: str | None, name: str) -> None:
    sys.stdout.write(text)
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text, encoding="utf-8")


QUANTITY_HEADER = ("quantity", "value", "unit")


# ---------------------------------------------------------------------------
# subcommands


def cmd_link(cfg: RunConfig, args) -> int:
    params = cfg.link_params()
    rows = [
        ("eta_t", analytic.eta_t(params), "1"),
        ("P0", analytic.link_success_probability(params), "1"),
        ("F0", analytic.link_fidelity(params), "1"),
    ]
    if params.L0 == 0:
        rows.append(("T0", "degenerate", "s"))
    else:
        rows.append(("T0", analytic.link_time(params), "s"))
    emit(format_table(QUANTITY_HEADER, rows), args.out, "link.csv")
    if args.sweep:
        taps = np.linspace(0.005, 0.5, args.sweep)
        sweep = []
        for t in taps:
            p = params.with_(tap=float(t))
            sweep.append((float(t), analytic.link_fidelity(p), analytic.link_time(p) if p.L0 > 0 else "degenerate"))
        emit(format_table(("tap [1]", "F0 [1]", "T0 [s]"), sweep), args.out, "link_sweep.csv")
    return EXIT_OK


def cmd_swap(cfg: RunConfig, args) -> int:
    params = cfg.link_params()
    state = analytic.link_state(params)
    rows = [
        ("F0", state.f_minus, "1"),
        ("F1_odd", analytic.swap_fidelity(state, params, "odd"), "1"),
        ("G1_even", analytic.swap_fidelity(state, params, "even"), "1"),
        ("P1_odd", analytic.swap_success_probability(state, params, "odd"), "1"),
        ("P1_all", analytic.swap_success_probability(state, params, "all"), "1"),
    ]
    emit(format_table(QUANTITY_HEADER, rows), args.out, "swap.csv")
    per_n = [(o.n, o.parity, o.p_success, o.fidelity) for o in analytic.swap_outcomes(state, params, args.max_count)]
    emit(format_table(("n [photons]", "parity", "probability [1]", "fidelity [1]"), per_n), args.out, "swap_counts.csv")
    return EXIT_OK


def _report_rows(report) -> list[tuple]:
    units = {"n_links": "1", "L0_km": "km", "T0_s": "s", "T_s": "s", "T_single_chain_s": "s"}
    rows = []
    for key, value in report.as_dict().items():
        if key == "empirical":
            for k, v in value.items():
                rows.append((f"mc_{k}", v, "s" if k.endswith("_s") else "1"))
        else:
            rows.append((key, value, units.get(key, "1")))
    return rows


def cmd_chain(cfg: RunConfig, args) -> int:
    config = cfg.chain_config()
    records = run_trials(config)
    report = report_for(config, summarize(records, config))
    emit(format_table(QUANTITY_HEADER, _report_rows(report)), args.out, "chain.csv")
    if args.out and cfg.output.get("records", True):
        with open(Path(args.out) / "records.jsonl", "w", encoding="utf-8") as fh:
            write_records(records, fh)
    _summary(cfg, args, "chain.json", report.as_dict())
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, args) -> int:
    spec = cfg.search_spec()
    result = optimize(spec)
    endpoint = small_amplitude_endpoint(spec)
    rows = [("feasible", result.feasible, "1"), ("alpha_sq_opt", result.alpha_sq, "1"), ("tap_opt", result.tap, "1")]
    rows += _report_rows(result.report)
    rows += [
        ("endpoint_alpha_sq", endpoint.alpha_sq, "1"),
        ("endpoint_tap", endpoint.tap, "1"),
        ("endpoint_T_s", endpoint.time, "s"),
        ("endpoint_F_ps", endpoint.fidelity, "1"),
        ("improvement_vs_endpoint", 1.0 - result.time / endpoint.time, "1"),
    ]
    emit(format_table(QUANTITY_HEADER, rows), args.out, "optimum.csv")
    if args.out:
        with open(Path(args.out) / "surface.csv", "w", encoding="utf-8") as fh:
            write_surface(result.surface, fh)
    _summary(cfg, args, "optimum.json", {k: v for k, v, _ in rows})
    return EXIT_OK if result.feasible else EXIT_INVALID


def _summary(cfg: RunConfig, args, name: str, data: dict) -> None:
    if args.out and cfg.output.get("summary", True):
        text = json.dumps(data, sort_keys=True, indent=2, default=str) + "\n"
        (Path(args.out) / name).write_text(text, encoding="utf-8")


def figure_table(which: str, params: LinkParams, points: int = 50) -> tuple[tuple[str, ...], list[tuple]]:
    """Curve data for one of the figures, long format (one row per curve point)."""
    taps = np.linspace(0.005, 0.5, points)
    rows = []
    if which in ("fig2", "fig3"):
        for a in (0.5, 1.0, 2.0):
            for t in taps:
                p = params.with_(alpha_sq=a, tap=float(t))
                value = analytic.link_fidelity(p) if which == "fig2" else analytic.link_time(p)
                rows.append((a, float(t), value))
        unit = "F0 [1]" if which == "fig2" else "T0 [s]"
        return ("alpha_sq [1]", "tap [1]", unit), rows
    if which == "fig5":
        for a in (1.0, 2.0, 4.0):
            for t in taps:
                p = params.with_(alpha_sq=a, tap=float(t))
                s = analytic.link_state(p)
                rows.append((a, float(t), analytic.swap_fidelity(s, p, "odd"), analytic.swap_fidelity(s, p, "even")))
        return ("alpha_sq [1]", "tap [1]", "F1_odd [1]", "G1_even [1]"), rows
    if which == "fig6":
        for a in (0.05, 0.1, 0.3):
            for t in taps:
                p = params.with_(alpha_sq=a, tap=float(t))
                s1 = analytic.nested_states(p, 1)[-1]
                rows.append((a, float(t), s1.f_minus, analytic.postselected_fidelity(s1, p)))
        return ("alpha_sq [1]", "tap [1]", "F1_without_ps [1]", "F1_with_ps [1]"), rows
    raise ValueError(f"unknown figure id {which!r}; choose from {', '.join(FIGURES)}")


def cmd_figures(cfg: RunConfig, args) -> int:
    which = [args.figure] if args.figure else list(FIGURES)
    params = cfg.link_params().with_(L0=args.length)
    for fig in which:
        header, rows = figure_table(fig, params, args.points)
        emit(format_table(header, rows), args.out, f"{fig}.csv")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def verify_suite(params: LinkParams, fault: bool = False) -> list[Check]:
    """Oracle-vs-analytic comparisons plus core invariants.

    ``fault=True`` perturbs the efficiency seen by the analytic swap formulas
    only, which must make the suite fail.
    """
    checks: list[Check] = []

    def add(name: str, ok: bool, detail: str) -> None:
        checks.append(Check(name, bool(ok), detail))

    # elementary link in the low-efficiency regime
    for a in (0.1, 0.5, 1.0, 2.0):
        for t in (0.01, 0.05, 0.1):
            p = params.with_(alpha_sq=a, tap=t, L0=600.0)
            res = oracle.elementary_link_circuit(p)
            tol = 3 * (a * t) ** 2
            df = abs(res.herald_fidelity - analytic.link_fidelity(p))
            dp = abs(res.herald_probability / res.efficiency - analytic.link_prefactor(p)) / analytic.link_prefactor(p)
            add(f"link a={a:g} s={t:g}", df <= tol and dp <= tol, f"dF={df:.2e} dP={dp:.2e} tol={tol:.2e}")

    # swap station
    for a, fm in ((0.1, 0.95), (1.0, 0.9), (2.0, 0.8)):
        p = params.with_(alpha_sq=a, tap=0.05)
        state = MixedLinkState(fm)
        res = oracle.swap_circuit(state, state, p)
        ana_params = p.with_(eta_d=p.eta_d * 0.9) if fault else p
        worst_p = max(abs(o.p_success - analytic.swap_probability_n(state, ana_params, o.n)) for o in res.outcomes[:8])
        worst_f = max(
            abs(o.fidelity - analytic.swap_fidelity(state, ana_params, o.parity))
            for o in res.outcomes[:6]
            if o.p_success > 1e-12
        )
        add(f"swap a={a:g} F-={fm:g}", worst_p <= 1e-3 and worst_f <= 1e-3, f"dP={worst_p:.2e} dF={worst_f:.2e}")

    # quasi-Bell discrimination
    for a in (0.5, 1.0, 2.0):
        res = oracle.quasi_bell_discriminator("phi+", math.sqrt(a), 1.0)
        d = abs(res.weight("fail") - analytic.bell_failure_probability(a))
        add(f"bell failure a={a:g}", d <= 1e-8, f"d={d:.2e}")
        leak = analytic.parity_leakage(a, 0.9)
        res = oracle.quasi_bell_discriminator("phi-", math.sqrt(a), 0.9)
        d = abs(res.weight("phi+") - leak["even"])
        add(f"parity leakage a={a:g}", d <= 1e-3, f"d={d:.2e}")

    # entanglement and postselection
    for a in (0.1, 0.5, 1.0, 2.0):
        n_max = truncation_for(math.sqrt(a))
        e = entanglement_entropy(quasi_bell_state("phi-", math.sqrt(a), n_max), [0])
        add(f"entropy a={a:g}", abs(e - 1.0) <= 1e-6, f"S={e:.9f}")
    for a in (0.05, 0.3):
        p = params.with_(alpha_sq=a, tap=0.05)
        state = analytic.nested_states(p, 1)[-1]
        res = oracle.postselection_circuit(state, p)
        d = abs(res.fidelity_vs_target - analytic.postselected_fidelity(state, p))
        add(f"postselection a={a:g}", d <= 1e-8, f"F={res.fidelity_vs_target:.6f} d={d:.2e}")
    return checks


def cmd_verify(cfg: RunConfig, args) -> int:
    params = cfg.link_params()
    if params.alpha_sq > oracle.MAX_ALPHA_SQ:
        raise TruncationError(
            f"refusing |alpha|^2={params.alpha_sq:g}: the oracle is limited to |alpha|^2 <= {oracle.MAX_ALPHA_SQ:g} "
            f"(n_max would be {truncation_for(math.sqrt(params.alpha_sq))} per mode)"
        )
    checks = verify_suite(params, fault=args.inject_fault)
    rows = [(c.name, "PASS" if c.passed else "FAIL", c.detail) for c in checks]
    emit(format_table(("check", "status", "detail"), rows), args.out, "verify.csv")
    failed = sum(not c.passed for c in checks)
    sys.stderr.write(f"{len(checks) - failed}/{len(checks)} checks passed\n")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [link], [chain], [search], [output]")
    common.add_argument("--seed", type=int, help="RNG seed (overrides [chain] rng_seed)")
    common.add_argument("--out", help="directory for tables (overrides [output] dir)")
    common.add_argument("--floor", type=float, help="fidelity floor (overrides [search] fidelity_floor)")

    parser = argparse.ArgumentParser(prog="catrepeater", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("link", parents=[common], help="elementary link fidelity, probability and time")
    p.add_argument("--sweep", type=int, default=0, help="also tabulate N tap values")
    p = sub.add_parser("swap", parents=[common], help="first swap level")
    p.add_argument("--max-count", type=int, default=6)
    sub.add_parser("chain", parents=[common], help="Monte Carlo chain timing")
    sub.add_parser("optimize", parents=[common], help="search (alpha_sq, tap)")
    p = sub.add_parser("figures", parents=[common], help="figure data tables")
    p.add_argument("--figure", choices=FIGURES)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--length", type=float, default=100.0, help="link length L0 in km for the figures")
    p = sub.add_parser("verify", parents=[common], help="oracle-vs-analytic checks")
    p.add_argument("--inject-fault", action="store_true", help="corrupt the analytic efficiency (self-test)")
    return parser


COMMANDS: dict[str, Callable] = {
    "link": cmd_link,
    "swap": cmd_swap,
    "chain": cmd_chain,
    "optimize": cmd_optimize,
    "figures": cmd_figures,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.chain["rng_seed"] = args.seed
        if args.floor is not None:
            cfg.search["fidelity_floor"] = args.floor
        if args.out is None:
            args.out = cfg.output.get("dir")
        cfg.link_params()
        cfg.chain_config()
        cfg.search_spec()
        return COMMANDS[args.command](cfg, args)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
