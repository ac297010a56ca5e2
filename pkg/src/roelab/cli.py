"""Command-line experiment runner.

Every run writes ``manifest.json`` next to its outputs.  The manifest hash is
a digest of the tool version, subcommand and fully resolved parameters; each
CSV row and JSON record carries it in a ``manifest`` column.

Exit codes: 0 ok, 2 configuration error, 3 failed precondition (closed gap,
invalid model, broken cocycle), 4 non-convergence of the index ladder.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .config import Config, ConfigError, defaults, load_config
from .dirac import GapClosedError, pairing_experiment
from .ktheory import format_kitaev, format_roe, kitaev_csv, kitaev_table, roe_k, PERIOD
from .lattice import Window
from .models import ModelError, build_hamiltonian
from .roe_ops import (CocycleError, apply_gauge, classify_decay, coboundary, cocycle_check, decay_profile,
                      magnetic_cocycle, propagation, random_banded, random_gauge, reconstruction_error,
                      twisted_product, untwist, write_triplets)
from .spectral import edge_spectrum, inner_region, projection_for

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NONCONVERGENCE = 4
THREADS_ENV = "ROELAB_THREADS"


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Run:
    """Output directory plus manifest bookkeeping for one invocation."""

    def __init__(self, subcommand: str, parameters: dict[str, Any], out: Path, config_path: str | None):
        self.subcommand = subcommand
        self.parameters = parameters
        self.out = out
        self.config_path = config_path
        canon = json.dumps({"tool": "roelab", "version": __version__, "subcommand": subcommand,
                            "parameters": parameters}, sort_keys=True)
        self.hash = _digest(canon.encode())[:16]
        self.artifacts: dict[str, str] = {}
        self.seeds: list[int] = []
        out.mkdir(parents=True, exist_ok=True)

    def _write(self, name: str, text: str) -> Path:
        p = self.out / name
        p.write_text(text)
        self.artifacts[name] = _digest(text.encode())
        return p

    def text(self, name: str, text: str) -> Path:
        return self._write(name, text)

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["manifest", *header])
        for r in rows:
            w.writerow([self.hash, *(_num(v) for v in r)])
        return self._write(name, buf.getvalue())

    def jsonl(self, name: str, records: Iterable[dict[str, Any]]) -> Path:
        lines = [json.dumps({"manifest": self.hash, **_jsonable(r)}, sort_keys=True) for r in records]
        return self._write(name, "\n".join(lines) + "\n")

    def file(self, name: str) -> Path:
        """Register a file written by other code."""
        p = self.out / name
        self.artifacts[name] = _digest(p.read_bytes())
        return p

    def finish(self) -> Path:
        manifest = {
            "tool": "roelab",
            "version": __version__,
            "subcommand": self.subcommand,
            "config": self.config_path,
            "parameters": self.parameters,
            "seeds": sorted(self.seeds),
            "hash": self.hash,
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        p = self.out / "manifest.json"
        p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return p


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


# --------------------------------------------------------------------------
# subcommands


def cmd_build(cfg: Config, run: Run) -> int:
    spec = cfg.model()
    dis = cfg.disorder()
    run.seeds.append(dis.seed)
    H = build_hamiltonian(spec, dis)
    write_triplets(H, run.out / "operator.txt")
    run.file("operator.txt")
    rec = {"kind": spec.kind, "d": spec.d, "L": spec.L, "sites": H.n, "N": H.N, "blocks": len(H.rows),
           "propagation": propagation(H), "hermiticity_error": H.hermiticity_error()}
    run.jsonl("build.jsonl", [rec])
    print(f"built {spec.kind} on {H.n} sites, {len(H.rows)} blocks, propagation {propagation(H):.4g}")
    return EXIT_OK


def cmd_pair(cfg: Config, run: Run) -> int:
    spec = cfg.model()
    dis = cfg.disorder()
    run.seeds.append(dis.seed)
    p = cfg["pairing"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ex = pairing_experiment(spec, dis, p["E_F"], p["L_list"], tau=p["tau"], min_gap=p["min_gap"],
                                oracle=p["oracle"] and spec.d == 2, bulk_fraction=p["bulk_fraction"])
    res = ex.result
    run.csv("ladder.csv",
            ["L", "index", "kernel", "cokernel", "n_below", "smallest_retained", "largest_discarded", "tau",
             "ill_conditioned", "gap"],
            [(w.L, w.raw_index, w.kernel, w.cokernel, w.n_below, w.smallest_retained, w.largest_discarded, w.tau,
              w.ill_conditioned, g) for w, g in zip(res.windows, ex.gaps)])
    run.csv("singular_values.csv", ["L", "k", "sigma"],
            [(w.L, k, s) for w in res.windows for k, s in enumerate(np.sort(w.singular_values)[:64])])
    rec = {"index": res.index, "converged": res.converged, "ladder": res.ladder, "tau": res.tau,
           "oracle": ex.oracle.value if ex.oracle else None}
    run.jsonl("pair.jsonl", [rec])
    for w, g in zip(res.windows, ex.gaps):
        print(f"L = {w.L}: index {w.raw_index:+d}, bulk gap {g:.4f}, sigma below tau {w.n_below}, "
              f"smallest retained {w.smallest_retained:.4f}")
    if ex.oracle is not None:
        print(f"oracle = {ex.oracle.value:.6f}")
    print(f"index = {res.index} ({'converged' if res.converged else 'not converged'})")
    return EXIT_OK if res.converged else EXIT_NONCONVERGENCE


def cmd_decay(cfg: Config, run: Run) -> int:
    spec = cfg.model()
    dis = cfg.disorder()
    run.seeds.append(dis.seed)
    p = cfg["pairing"]
    P, _ = projection_for(spec, dis, p["E_F"], min_gap=p["min_gap"])
    region = None if P.periodic else inner_region(P.window, 0.5)
    if region is not None:
        print("note: open window; edge channels can add algebraic tails (use periodic boundaries for bulk decay)",
              file=sys.stderr)
    prof = decay_profile(P.operator, region)
    margin = cfg["decay"]["margin"]
    margin = spec.L if margin is None else margin
    cls = classify_decay(prof, margin, rapid_order=cfg["decay"]["rapid_order"])
    radii, env = prof.shells()
    run.csv("profile.csv", ["radius", "envelope"], zip(radii, env))
    run.jsonl("decay.jsonl", [{"kind": cls.kind, "rate": cls.rate, "order": cls.order, "band": cls.band,
                               "exp_residual": cls.exp_residual, "poly_residual": cls.poly_residual,
                               "shells": cls.n_shells, "notes": list(cls.notes)}])
    rate = "" if cls.rate is None else f", rate {cls.rate:.4f}"
    print(f"class = {cls.kind}{rate}")
    return EXIT_OK


def cmd_untwist(cfg: Config, run: Run) -> int:
    u = cfg["untwist"]
    run.seeds.append(u["seed"])
    win = Window(2, u["L"])
    cocycles = [magnetic_cocycle(2 * math.pi * float(u["flux"]))]
    cocycles += [coboundary(random_gauge(win, u["seed"] + k)) for k in range(u["coboundaries"])]
    S = random_banded(win, 2, 1, u["seed"])
    T = random_banded(win, 2, 1, u["seed"] + 1)
    records = []
    for w in cocycles:
        rep = cocycle_check(w, win, u["samples"], u["seed"])
        v = untwist(w, np.zeros(2), window=win, samples=u["samples"], seed=u["seed"])
        lhs = apply_gauge(twisted_product(S, T, w), v).to_dense()
        rhs = (apply_gauge(S, v) @ apply_gauge(T, v)).to_dense()
        records.append({"cocycle": w.name, "max_violation": rep.max_violation,
                        "reconstruction_error": reconstruction_error(w, v, win, u["samples"], u["seed"]),
                        "homomorphism_error": float(np.max(np.abs(lhs - rhs)))})
    run.jsonl("untwist.jsonl", records)
    for r in records:
        print(f"{r['cocycle']}: violation {r['max_violation']:.2e}, reconstruction {r['reconstruction_error']:.2e}, "
              f"homomorphism {r['homomorphism_error']:.2e}")
    return EXIT_OK


def cmd_edge(cfg: Config, run: Run) -> int:
    spec = cfg.model()
    e = cfg["edge"]
    E_F = cfg["pairing"]["E_F"] if e["E_F"] is None else e["E_F"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        es = edge_spectrum(spec, E_F, momenta=e["momenta"], width=e["width"], threshold=e["threshold"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    run.csv("spectrum.csv", ["momentum", "energy", "lower_weight", "upper_weight"],
            ((k, en, lw, uw) for k, es_k, lw_k, uw_k in zip(es.momenta, es.energies, es.lower_weights,
                                                            es.upper_weights)
             for en, lw, uw in zip(es_k, lw_k, uw_k)))
    run.csv("crossings.csv", ["momentum", "sign", "edge", "lower_weight", "upper_weight"],
            ((c.momentum, c.sign, c.edge, c.lower_weight, c.upper_weight) for c in es.crossings))
    run.jsonl("edge.jsonl", [{"E_F": E_F, "width": es.width, "lower": es.chirality("lower"),
                              "upper": es.chirality("upper"), "net": es.net_chirality}])
    print(f"lower edge chirality = {es.chirality('lower')}")
    print(f"upper edge chirality = {es.chirality('upper')}")
    print(f"net chirality = {es.net_chirality}")
    return EXIT_OK


def _sweep_job(job):
    spec, dis, E_F, L_list, tau, min_gap, bulk_fraction = job
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            ex = pairing_experiment(spec, dis, E_F, L_list, tau=tau, min_gap=min_gap, oracle=False,
                                    bulk_fraction=bulk_fraction)
        except GapClosedError as exc:
            return {"W": dis.W, "seed": dis.seed, "status": "gap_closed", "index": None, "converged": False,
                    "detail": str(exc)}
    r = ex.result
    return {"W": dis.W, "seed": dis.seed, "status": "ok" if r.converged else "not_converged",
            "index": r.index, "converged": r.converged, "detail": str(r.ladder)}


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def cmd_sweep(cfg: Config, run: Run) -> int:
    spec = cfg.model()
    p = cfg["pairing"]
    s = cfg["sweep"]
    base = cfg.disorder()
    jobs = [(spec, replace(base, W=W, seed=seed), p["E_F"], p["L_list"], p["tau"], p["min_gap"],
             p["bulk_fraction"]) for W in s["W_list"] for seed in s["seeds"]]
    run.seeds.extend(s["seeds"])
    workers = thread_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    # merge is order independent: sort by (W, seed)
    results.sort(key=lambda r: (r["W"], r["seed"]))
    run.csv("sweep_runs.csv", ["W", "seed", "status", "index", "converged"],
            ((r["W"], r["seed"], r["status"], r["index"], r["converged"]) for r in results))
    hist: Counter = Counter()
    for r in results:
        hist[(r["W"], r["status"], r["index"] if r["index"] is not None else "")] += 1
    run.csv("sweep_hist.csv", ["W", "status", "index", "count"],
            ((W, st, idx, n) for (W, st, idx), n in sorted(hist.items(), key=lambda kv: tuple(map(str, kv[0])))))
    run.jsonl("sweep.jsonl", results)
    for W in s["W_list"]:
        rows = [r for r in results if r["W"] == W]
        summary = Counter(r["index"] if r["status"] == "ok" else r["status"] for r in rows)
        print(f"W = {W}: " + ", ".join(f"{k}: {v}" for k, v in sorted(summary.items(), key=lambda kv: str(kv[0]))))
    return EXIT_OK


def ktable_text(kind: str, field: str, dmax: int) -> str:
    fields = ("real", "complex") if field == "both" else (field,)
    ds = range(dmax + 1)
    if kind == "kitaev":
        return format_kitaev(kitaev_table(ds, fields), ds)
    return "".join(format_roe(f, dmax) for f in fields)


def cmd_ktable(args, run: Run) -> int:
    text = ktable_text(args.kind, args.field, args.dmax)
    stem = f"ktable_{args.kind}_{args.field}_d{args.dmax}"
    run.text(stem + ".txt", text)
    fields = ("real", "complex") if args.field == "both" else (args.field,)
    ds = range(args.dmax + 1)
    if args.kind == "kitaev":
        body = kitaev_csv(kitaev_table(ds, fields), ds)
        rows = [ln.split(",") for ln in body.strip().split("\n")]
        run.csv(stem + ".csv", rows[0], rows[1:])
    else:
        run.csv(stem + ".csv", ["field", "d", "degree", "group"],
                ((f, d, i, roe_k(d, f).name(i)) for f in fields for d in ds for i in range(PERIOD[f])))
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "build": (cmd_build, "assemble a Hamiltonian and write it as a triplet file"),
    "pair": (cmd_pair, "index ladder of the Fermi projection"),
    "decay": (cmd_decay, "decay profile and class of the Fermi projection"),
    "untwist": (cmd_untwist, "cocycle round-trip report"),
    "edge": (cmd_edge, "strip spectrum and chiral edge count"),
    "sweep": (cmd_sweep, "disorder ensemble: index histogram against W"),
    "ktable": (cmd_ktable, "symbolic K-theory tables"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roelab", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"roelab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        if name == "ktable":
            sp.add_argument("config", nargs="?", help="optional config (only [output] is read)")
            sp.add_argument("--field", choices=("real", "complex", "both"), default="both")
            sp.add_argument("--dmax", type=int, default=7)
            sp.add_argument("--kind", choices=("kitaev", "roe"), default="kitaev")
        else:
            sp.add_argument("config", help="INI configuration file")
        sp.add_argument("--out", help="output directory (overrides [output] dir)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    fn, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config) if args.config else defaults()
        out = Path(args.out or cfg["output"]["dir"])
        if args.command == "ktable":
            if args.dmax < 0:
                raise ConfigError("--dmax must be non-negative")
            params = {"kind": args.kind, "field": args.field, "dmax": args.dmax}
            run = Run(args.command, params, out, args.config)
            code = fn(args, run)
        else:
            if args.command == "sweep":
                thread_count()
            cfg.model()
            cfg.disorder()
            run = Run(args.command, cfg.resolved(), out, args.config)
            code = fn(cfg, run)
        run.finish()
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GapClosedError as exc:
        print(f"precondition failed (spectral gap): {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except CocycleError as exc:
        print(f"precondition failed (cocycle identity): {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ModelError, ValueError, NotImplementedError) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
