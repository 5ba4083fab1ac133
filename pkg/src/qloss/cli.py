"""Command-line entry point: ``qloss {preimage,postselected,distill,ghz,selftest}``.

Output tables
-------------
preimage      design, eta, avg_fidelity, min_mode_fidelity, max_mode_fidelity, samples
postselected  design, loss_db, mean_fidelity, samples
distill       design, N, eta, p_s_simulated, lambda_simulated, lambda_closed_form,
              p_s_closed_form, abs_diff
ghz           JSON: one report per grid point plus a power-law fit block

Every file starts with comment lines ("# ..." in CSV, a "provenance" object in
JSON) carrying the tool version, the exact invocation and the resolved config.
``--threads`` is left out of both so that output bytes do not depend on it.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_selftest
from .experiments import (
    MAX_DISTILLATION_N,
    DistillationSpec,
    GhzSpec,
    distill_simulate,
    ghz_transform,
    ghz_assignment_search,
    ghz_pipeline,
    lambda_rect_closed,
    lambda_tri_closed,
    postselected_sweep,
    preimage_sweep,
    ps_rect_closed,
)
from .fock import conditional_state_any
from .loss_model import DesignKind, eta_from_db
from .metrics import power_law_fit
from .numerics import RNG_ALGORITHM
from .output import csv_text, density_csv_text, json_text, parse_grid, svg_text, write_text

log = logging.getLogger("qloss")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2

PREIMAGE_COLUMNS = ["design", "eta", "avg_fidelity", "min_mode_fidelity", "max_mode_fidelity", "samples"]
POSTSELECTED_COLUMNS = ["design", "loss_db", "mean_fidelity", "samples"]
DISTILL_COLUMNS = [
    "design", "N", "eta", "p_s_simulated", "lambda_simulated", "lambda_closed_form", "p_s_closed_form", "abs_diff",
]

DEFAULT_GRIDS = {
    "preimage": ("etas", "0.5:1.0:11"),
    "postselected": ("loss_db", "0:0.5:6"),
    "distill": ("etas", "0.5,0.9,0.99,1.0"),
    "ghz": ("etas", "0.9848"),
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; bad configuration is 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, *, grids=True, sampled=False):
    p.add_argument("--design", choices=["rect", "tri", "both"], default="both")
    if grids:
        p.add_argument("--etas", help="transmission grid, start:stop:count or a,b,c")
        p.add_argument("--loss-db", dest="loss_db", help="loss grid in dB per unit cell")
    if sampled:
        p.add_argument("--samples", type=int, default=500)
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $QLOSS_THREADS or CPU count)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=["csv", "json", "svg"], default=None)
    p.add_argument("--svg", help="also write an SVG plot to this path")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qloss", description="Loss in linear-optical meshes: fidelity, distillation and GHZ studies.")
    parser.add_argument("--version", action="version", version=f"qloss {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preimage", help="single-photon preimage fidelity over Haar-random meshes")
    p.add_argument("-m", "--modes", type=int, default=5)
    _add_common(p, sampled=True)

    p = sub.add_parser("postselected", help="postselected circuit fidelity versus loss")
    p.add_argument("-m", "--modes", type=int, default=20)
    _add_common(p, sampled=True)

    p = sub.add_parser("distill", help="Fourier photon distillation: herald probability and transmittance")
    p.add_argument("-N", "--photons", default="3,4,5", help=f"photon numbers, comma separated (<= {MAX_DISTILLATION_N})")
    p.add_argument("--output-mode", type=int, default=None, help="1-based distilled output mode")
    _add_common(p)

    p = sub.add_parser("ghz", help="heralded dual-rail GHZ-3 generation")
    p.add_argument("--ports", help="six 1-based input ports in column order (default 5,6,7,8,9,10)")
    p.add_argument("--search-ports", action="store_true", help="pick the best ordering of --ports at the first grid point")
    p.add_argument("--u-sub", choices=["exact", "printed", "polar"], default="exact")
    p.add_argument("--logical-zero", choices=["first", "second"], default="second")
    p.add_argument("--no-dark-spectator", action="store_true", help="leave output 2 unmeasured")
    p.add_argument("--rho-out", help="write the heralded density matrix of the first point as CSV")
    _add_common(p)
    p.set_defaults(design="tri")

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


# ---------------------------------------------------------------------------
# config helpers


def _threads(args) -> int:
    n = args.threads
    if n is None:
        env = os.environ.get("QLOSS_THREADS")
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(f"QLOSS_THREADS={env!r} is not an integer") from None
        else:
            n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def _designs(args) -> list[DesignKind]:
    if args.design == "both":
        return [DesignKind.RECTANGULAR, DesignKind.TRIANGULAR]
    return [DesignKind.parse(args.design)]


def _grid(args, command: str) -> tuple[str, list[float]]:
    """Resolve --etas / --loss-db into (kind, values) in the command's native unit."""
    if args.etas and args.loss_db:
        raise ConfigError("give either --etas or --loss-db, not both")
    try:
        etas = parse_grid(args.etas) if args.etas else None
        losses = parse_grid(args.loss_db) if args.loss_db else None
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from None
    if etas is None and losses is None:
        kind, text = DEFAULT_GRIDS[command]
        if kind == "etas":
            etas = parse_grid(text)
        else:
            losses = parse_grid(text)
    if etas is not None and any(not 0.0 <= e <= 1.0 for e in etas):
        raise ConfigError("eta values must lie in [0, 1]")
    if losses is not None and any(x < 0 for x in losses):
        raise ConfigError("loss values must be non-negative")
    native = "loss_db" if command == "postselected" else "etas"
    if native == "etas":
        if etas is None:
            return "loss_db", losses
        return "etas", etas
    if losses is None:
        if any(e <= 0 for e in etas):
            raise ConfigError("eta = 0 has no finite dB loss")
        losses = [-10.0 * math.log10(e) for e in etas]
    return "loss_db", losses


def _check_out(path: str | None):
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ConfigError(f"cannot write to {path}")


def _invocation(argv: list[str]) -> str:
    kept = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--threads":
            skip = True
            continue
        if a.startswith("--threads="):
            continue
        kept.append(a)
    return shlex.join(["qloss", *kept])


def _config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("threads", "verbose")}
    cfg["version"] = __version__
    cfg["rng"] = RNG_ALGORITHM
    return cfg


def _provenance(args, argv) -> list[str]:
    cfg = _config(args)
    return [
        f"qloss {__version__}",
        f"invocation: {_invocation(argv)}",
        "config: " + " ".join(f"{k}={v}" for k, v in cfg.items()),
    ]


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        write_text(path, text)


def _map(fn, items, threads: int) -> list:
    # ordered map: results come back in submission order whatever the scheduling
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _table(fmt: str, columns, rows, comments, args, argv, plot=None) -> str:
    if fmt == "csv":
        return csv_text(columns, rows, comments)
    if fmt == "json":
        return json_text({"provenance": {"version": __version__, "invocation": _invocation(argv), "config": _config(args)}, "rows": rows})
    return plot()


def _series_plot(rows, x, y, title, xlabel, ylabel) -> str:
    series = {}
    for r in rows:
        xs, ys = series.setdefault(r["design"], ([], []))
        xs.append(r[x])
        ys.append(r[y])
    return svg_text(series, title=title, xlabel=xlabel, ylabel=ylabel)


# ---------------------------------------------------------------------------
# commands


def cmd_preimage(args, argv) -> int:
    if args.modes < 2:
        raise ConfigError("--modes must be >= 2")
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    kind, grid = _grid(args, "preimage")
    if kind != "etas":
        grid = [eta_from_db(x) for x in grid]
    designs = _designs(args)
    threads = _threads(args)
    tasks = [(d, e) for d in designs for e in grid]
    parts = _map(lambda t: preimage_sweep(args.modes, [t[0]], [t[1]], args.samples, args.seed).records, tasks, threads)
    rows = [r for part in parts for r in part]
    return _finish_table(args, argv, PREIMAGE_COLUMNS, rows, "eta", "avg_fidelity", "Preimage fidelity", "eta")


def cmd_postselected(args, argv) -> int:
    if args.modes < 2:
        raise ConfigError("--modes must be >= 2")
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    _, grid = _grid(args, "postselected")
    designs = _designs(args)
    threads = _threads(args)
    tasks = [(d, x) for d in designs for x in grid]
    parts = _map(lambda t: postselected_sweep(args.modes, [t[0]], [t[1]], args.samples, args.seed).records, tasks, threads)
    rows = [r for part in parts for r in part]
    return _finish_table(args, argv, POSTSELECTED_COLUMNS, rows, "loss_db", "mean_fidelity", "Postselected fidelity", "loss per cell (dB)")


def _distill_row(task) -> dict:
    design, n, eta, out_mode = task
    res = distill_simulate(DistillationSpec(n, design, eta, out_mode))
    if design is DesignKind.RECTANGULAR:
        lam_cf = lambda_rect_closed(n, eta)
        ps_cf = ps_rect_closed(n, eta)
    else:
        lam_cf = lambda_tri_closed(n, eta)
        ps_cf = ""
    return {
        "design": design.value,
        "N": n,
        "eta": eta,
        "p_s_simulated": res.p_s,
        "lambda_simulated": res.lam,
        "lambda_closed_form": lam_cf,
        "p_s_closed_form": ps_cf,
        "abs_diff": abs(res.lam - lam_cf),
    }


def cmd_distill(args, argv) -> int:
    try:
        ns = [int(x) for x in args.photons.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"invalid --photons {args.photons!r}") from None
    if not ns or any(n < 2 for n in ns):
        raise ConfigError("photon numbers must be >= 2")
    if any(n > MAX_DISTILLATION_N for n in ns):
        raise ConfigError(f"distillation is limited to N <= {MAX_DISTILLATION_N}")
    kind, grid = _grid(args, "distill")
    if kind != "etas":
        grid = [eta_from_db(x) for x in grid]
    out_mode = None
    if args.output_mode is not None:
        if any(not 1 <= args.output_mode <= n for n in ns):
            raise ConfigError("--output-mode out of range for some N")
        out_mode = args.output_mode - 1
    tasks = [(d, n, e, out_mode) for d in _designs(args) for n in ns for e in grid]
    rows = _map(_distill_row, tasks, _threads(args))
    for r in rows:
        if math.isnan(r["lambda_simulated"]):
            log.warning("degenerate herald: %s N=%d eta=%s", r["design"], r["N"], r["eta"])
    return _finish_table(args, argv, DISTILL_COLUMNS, rows, "eta", "lambda_simulated", "Conditional transmittance", "eta")


def _finish_table(args, argv, columns, rows, x, y, title, xlabel) -> int:
    fmt = args.format or "csv"
    plot = lambda: _series_plot(rows, x, y, title, xlabel, y)  # noqa: E731
    _emit(_table(fmt, columns, rows, _provenance(args, argv), args, argv, plot), args.out)
    if args.svg:
        write_text(args.svg, plot())
    return EXIT_OK


def _ghz_spec(args) -> GhzSpec:
    kw = {}
    if args.ports:
        try:
            ports = tuple(int(x) - 1 for x in args.ports.split(","))
        except ValueError:
            raise ConfigError(f"invalid --ports {args.ports!r}") from None
        if len(ports) != 6 or len(set(ports)) != 6 or any(not 0 <= p < 10 for p in ports):
            raise ConfigError("--ports needs six distinct ports in 1..10")
        kw["input_ports"] = ports
    if args.design == "both":
        raise ConfigError("ghz runs one design at a time")
    return GhzSpec(
        design=DesignKind.parse(args.design),
        u_sub_variant=args.u_sub,
        logical_zero=args.logical_zero,
        dark_spectator=not args.no_dark_spectator,
        **kw,
    )


def cmd_ghz(args, argv) -> int:
    spec = _ghz_spec(args)
    kind, grid = _grid(args, "ghz")
    if kind == "etas":
        etas = grid
        losses = [(-10.0 * math.log10(e) if e > 0 else float("inf")) for e in etas]
    else:
        losses = grid
        etas = [eta_from_db(x) for x in grid]
    fmt = args.format or "json"
    if fmt == "csv":
        raise ConfigError("ghz writes JSON (or svg)")
    threads = _threads(args)

    search = None
    if args.search_ports:
        ranked = ghz_assignment_search(replace(spec, eta=etas[0]))
        if not ranked:
            log.error("no assignment gives a heralded state")
            return EXIT_NUMERIC
        best, report = ranked[0]
        spec = replace(spec, input_ports=best)
        search = {"best_ports": [p + 1 for p in best], "infidelity": report.infidelity, "candidates": len(ranked)}

    reports = _map(lambda e: ghz_pipeline(replace(spec, eta=e)), etas, threads)
    points = []
    for l_db, r in zip(losses, reports):
        d = r.to_dict()
        d["input_ports"] = [p + 1 for p in r.input_ports]
        d["loss_db"] = l_db
        d["infidelity"] = r.infidelity
        points.append(d)
        if r.degenerate:
            log.warning("degenerate herald at eta=%s", r.eta)

    fit = None
    usable = [(l, r.infidelity) for l, r in zip(losses, reports) if 0 < l < math.inf and not r.degenerate and r.infidelity > 0]
    if len(usable) >= 3:
        f = power_law_fit(usable)
        fit = {"coefficient": f.coefficient, "exponent": f.exponent, "residual": f.residual, "points": len(usable)}

    payload = {
        "provenance": {"version": __version__, "invocation": _invocation(argv), "config": _config(args)},
        "assignment_search": search,
        "points": points,
        "fit": fit,
    }
    plot = lambda: svg_text(  # noqa: E731
        {"1 - f": ([p[0] for p in usable], [p[1] for p in usable])},
        title="GHZ infidelity", xlabel="loss per cell (dB)", ylabel="1 - f",
    )
    if fmt == "json":
        _emit(json_text(payload), args.out)
    else:
        if not usable:
            raise ConfigError("svg output needs at least one lossy, non-degenerate point")
        _emit(plot(), args.out)
    if args.svg and usable:
        write_text(args.svg, plot())
    if args.rho_out:
        first = replace(spec, eta=etas[0])
        cs = conditional_state_any(ghz_transform(first), first.input_state(), first.herald())
        if cs.degenerate:
            log.error("no heralded state to write")
            return EXIT_NUMERIC
        write_text(args.rho_out, density_csv_text(cs.rho, _provenance(args, argv)))
    if all(r.degenerate for r in reports):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_selftest(args, argv) -> int:
    results = run_selftest()
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {
    "preimage": cmd_preimage,
    "postselected": cmd_postselected,
    "distill": cmd_distill,
    "ghz": cmd_ghz,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_out(getattr(args, "out", None))
        _check_out(getattr(args, "svg", None))
        _check_out(getattr(args, "rho_out", None))
        return COMMANDS[args.command](args, argv)
    except ConfigError as exc:
        print(f"qloss: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"qloss: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"qloss: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
