"""Command-line driver: ``mc``, ``expand``, ``normal`` and ``table``.

Every command writes ``results.csv`` (header ``method,alpha,quantile,stderr``),
``table.md`` and ``manifest.json`` into ``--out``.
"""

import argparse
import hashlib
import json
import platform
import sys
import time
from importlib import resources
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .backward import PRUNE_TOL, BackwardEngine
from .design import DesignConfig
from .errors import BanditExpansionError, ConfigError
from .quantiles import WIDTH, normal_quantiles, order_statistic_quantiles, quantiles
from .simulation import BLOCK, simulate_statistics

COMMANDS = ("mc", "expand", "normal", "table")
ROW_NAMES = {"mc": "Monte Carlo", "ae": "Asymptotic expansion", "normal": "Normal approximation"}
BUNDLED = ("table1_gamma", "table2_normal", "table3_mixture")


def bundled_config(name):
    """Path-independent access to the shipped configs (``table1_gamma`` etc.)."""
    name = name[:-5] if name.endswith(".json") else name
    if name not in BUNDLED:
        raise ConfigError(f"no bundled config named {name!r}", [name])
    text = resources.files(__package__).joinpath("configs", name + ".json").read_text()
    return json.loads(text)


def load_config(path_or_name, seed=None, reps=None, is_draws=None, alphas=None):
    """Read a JSON config file (or bundled name) and apply CLI overrides."""
    p = Path(path_or_name)
    if p.is_file():
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
    else:
        raw = bundled_config(p.name)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = DesignConfig.from_dict(raw)
    over = {}
    if seed is not None:
        over["seed"] = int(seed)
    if reps is not None:
        over["mc_reps"] = int(reps)
    if is_draws is not None:
        over["is_draws"] = int(is_draws)
    if alphas is not None:
        over["alphas"] = tuple(alphas)
    return cfg.replace(**over) if over else cfg


def config_digest(cfg):
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def run_mc(cfg, workers=1):
    stats, resampled = simulate_statistics(cfg, cfg.mc_reps, workers)
    warn = [f"{resampled} zero-variance stage(s) resampled"] if resampled else []
    return order_statistic_quantiles(stats, cfg.alphas), warn


def run_expand(cfg, workers=1):
    eng = BackwardEngine(cfg, workers=workers)
    res = quantiles(eng.tail, cfg.alphas)
    warn = [
        f"stage {s} count {N}: expansion fell back to a regularized Gaussian"
        for s, N in eng.flagged
    ]
    return res, warn


def run(command, cfg, workers=1):
    """Run one command; returns ``(results, warnings, timings)``."""
    steps = ("mc", "expand", "normal") if command == "table" else (command,)
    results, warnings, timings = [], [], {}
    for step in steps:
        t0 = time.perf_counter()
        if step == "mc":
            res, warn = run_mc(cfg, workers)
        elif step == "expand":
            res, warn = run_expand(cfg, workers)
        elif step == "normal":
            res, warn = normal_quantiles(cfg.alphas), []
        else:
            raise ValueError(f"unknown command {command!r}")
        timings[step] = round(time.perf_counter() - t0, 3)
        results += res
        warnings += warn
    return results, warnings, timings


def format_csv(results):
    lines = ["method,alpha,quantile,stderr"]
    for r in results:
        lines.append(f"{r.method},{r.alpha:g},{r.x_hat:.6f},{r.stderr:.6f}")
    return "\n".join(lines) + "\n"


def format_markdown(results, alphas, title=""):
    head = "| Method \\ Probability | " + " | ".join(f"{a:.3f}" for a in alphas) + " |"
    rule = "|---|" + "---|" * len(alphas)
    lines = ([f"**{title}**", ""] if title else []) + [head, rule]
    for method in ("mc", "ae", "normal"):
        row = {r.alpha: r.x_hat for r in results if r.method == method}
        if row:
            cells = " | ".join(f"{row[a]:.2f}" for a in alphas)
            lines.append(f"| {ROW_NAMES[method]} | {cells} |")
    return "\n".join(lines) + "\n"


def manifest(cfg, command, workers, warnings, timings):
    return {
        "command": command,
        "config": cfg.to_dict(),
        "config_digest": config_digest(cfg),
        "seed": cfg.seed,
        "workers": workers,
        "versions": {
            "bols_edgeworth": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "parameters": {
            "mc_block": BLOCK,
            "count_prune_tol": PRUNE_TOL,
            "bisection_width": WIDTH,
            "is_draws": cfg.is_draws,
            "scale_p": cfg.scale_p,
            "mc_reps": cfg.mc_reps,
            "order": cfg.order,
            "reduced": cfg.reduced,
        },
        "timings_s": timings,
        "warnings": warnings,
        "notes": list(cfg.notes) + ["'Centered' noise is standardized to mean 0 and variance 1."],
    }


def _alphas(text):
    try:
        return [float(a) for a in text.split(",") if a.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None


def build_parser():
    ap = argparse.ArgumentParser(
        prog="bols-edgeworth",
        description="Quantiles of the batched-OLS statistic: Monte Carlo, asymptotic expansion, normal.",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config path or bundled name")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--reps", type=int, help="Monte-Carlo replications")
    ap.add_argument("--is-draws", type=int, help="importance-sampling draws")
    ap.add_argument("--alphas", type=_alphas, help="comma separated levels")
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--format", choices=("csv", "md"), default="md", help="stdout format")
    ap.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, args.reps, args.is_draws, args.alphas)
        results, warnings, timings = run(args.command, cfg, max(1, args.workers))
    except BanditExpansionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv = format_csv(results)
    md = format_markdown(results, cfg.alphas, cfg.name)
    (out / "results.csv").write_text(csv)
    (out / "table.md").write_text(md)
    man = manifest(cfg, args.command, args.workers, warnings, timings)
    (out / "manifest.json").write_text(json.dumps(man, indent=2) + "\n")
    print(csv if args.format == "csv" else md, end="")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
