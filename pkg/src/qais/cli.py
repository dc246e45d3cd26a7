"""Command-line entry point: ``qais {train,integrate,vegas,compare,tile-check}``.

Settings come from an optional INI file (``--config``) with one section per
module; command-line flags override file values.  Every command writes CSV
(or, for ``train``, JSON parameters plus a CSV history) into ``--out``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .estimator import (MixtureConfig, append_estimate_csv, derive_seeds, qais_estimate,
                        repeat_runs)
from .grid import GridSpec
from .statevector import AnsatzSpec, load_params, run_ansatz, save_params
from .target import (constant_integrand, gauss2_integrand, load_kinematics,
                     multipeak_integrand, p11_kinematics, pentagon_ltd_integrand,
                     ring_integrand, build_target_pmf)
from .tiling import check_coverage, full_coverage
from .train import TrainConfig, kl_divergence, oracle_proposal, train_qcbm
from .validation import check_qubits
from .vegas import (VegasConfig, phantom_diagnostic, vegas_integrate, write_grid_csv,
                    write_vegas_csv)

INTEGRANDS = ("gauss2", "ring", "multipeak", "pentagon", "pentagon-causal", "constant")
DEFAULT_QUBITS = {"gauss2": (5, 5), "ring": (5, 5), "pentagon": (8, 4, 4),
                  "pentagon-causal": (8, 4, 4)}


class CLIError(Exception):
    pass


class Settings:
    """Flag value if given, else the config-file value, else the default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = configparser.ConfigParser()
        if getattr(args, "config", None):
            path = Path(args.config)
            if not path.is_file():
                raise CLIError(f"config file not found: {path}")
            self.cfg.read(path)

    def get(self, section: str, key: str, default=None, kind=str):
        flag = getattr(self.args, key, None)
        if flag is not None:
            raw = flag
        elif self.cfg.has_option(section, key):
            raw = self.cfg.get(section, key)
        else:
            return default
        try:
            return kind(raw)
        except (TypeError, ValueError) as exc:
            raise CLIError(f"bad value for {section}.{key}: {raw!r}") from exc


def _int(text) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(text)
    return int(v)


def parse_schedule(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        text = ",".join(str(t) for t in text)
    try:
        shots = [_int(t) for t in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise CLIError(f"bad shot schedule {text!r}") from exc
    if not shots:
        raise CLIError("empty shot schedule")
    if any(s < 2 for s in shots) or any(b <= a for a, b in zip(shots, shots[1:])):
        raise CLIError("shot schedule must be strictly increasing integers >= 2")
    return shots


def build_integrand(s: Settings):
    name = s.get("target", "integrand", "gauss2")
    if name not in INTEGRANDS:
        raise CLIError(f"unknown integrand {name!r}; choose from {', '.join(INTEGRANDS)}")
    if name == "gauss2":
        return name, gauss2_integrand()
    if name == "ring":
        return name, ring_integrand()
    if name == "multipeak":
        return name, multipeak_integrand(s.get("target", "dim", 2, int))
    if name == "constant":
        d = s.get("target", "dim", 2, int)
        return name, constant_integrand(s.get("target", "value", 1.0, float), [(0.0, 1.0)] * d)
    kin_path = s.get("target", "kinematics")
    if kin_path is None:
        kin = p11_kinematics()
    else:
        if not Path(kin_path).is_file():
            raise CLIError(f"kinematics file not found: {kin_path}")
        kin = load_kinematics(kin_path)
    form = "causal" if name == "pentagon-causal" else "single-cut"
    return name, pentagon_ltd_integrand(kin, form=form)


def build_grid(s: Settings, name: str, f) -> GridSpec:
    qubits = s.get("grid", "qubits", None)
    if qubits is None:
        qubits = DEFAULT_QUBITS.get(name, (5,) * f.d)
    qubits = check_qubits(qubits)
    if len(qubits) != f.d:
        raise CLIError(f"{len(qubits)} qubit counts given for a {f.d}-dimensional integrand")
    return GridSpec(qubits, f.bounds)


def out_dir(s: Settings) -> Path:
    path = Path(s.get("cli", "out", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_proposal(s: Settings, spec: GridSpec, f, seed):
    """Statevector from ``--params`` or, with ``--oracle``, the exact target."""
    params = s.get("estimator", "params")
    if s.args.oracle or (params is None and s.cfg.getboolean("estimator", "oracle", fallback=False)):
        target = build_target_pmf(spec, f, s.get("target", "n_per_cell", 8, int), seed=seed)
        return oracle_proposal(target, spec.n)
    if params is None:
        raise CLIError("no proposal: pass --params FILE or --oracle")
    if not Path(params).is_file():
        raise CLIError(f"parameter file not found: {params}")
    doc = load_params(params)
    if tuple(doc["qubits"]) != spec.qubits:
        raise CLIError(f"parameter file is for qubits {tuple(doc['qubits'])}, grid has {spec.qubits}")
    return run_ansatz(doc["ansatz"], doc["n"], doc["params"])


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def cmd_train(s: Settings) -> int:
    name, f = build_integrand(s)
    spec = build_grid(s, name, f)
    seed = s.get("cli", "seed", 0, int)
    ansatz = AnsatzSpec.parse(s.get("statevector", "layers", "EZ,R,EX,R"))
    cfg = TrainConfig(optimizer=s.get("train", "optimizer", "cobyla"),
                      max_iter=s.get("train", "max_iter", 5000, _int),
                      initial_step=s.get("train", "initial_step", 0.5, float),
                      tol=s.get("train", "tol", 1e-6, float), seed=seed)
    target = build_target_pmf(spec, f, s.get("target", "n_per_cell", 8, int), seed=seed)
    report = train_qcbm(ansatz, spec.n, target, cfg)
    out = out_dir(s)
    save_params(out / "params.json", n=spec.n, qubits=spec.qubits, ansatz=ansatz,
                params=report.params, seed=seed, final_kl=report.final_kl)
    report.write_history(out / "history.csv")
    print(f"integrand={name} qubits={spec.qubits} params={report.params.size} "
          f"evals={report.n_evals} initial_kl={report.history[0][1]:.6g} "
          f"final_kl={report.final_kl:.6g}")
    return 0


def cmd_integrate(s: Settings) -> int:
    name, f = build_integrand(s)
    spec = build_grid(s, name, f)
    seed = s.get("cli", "seed", 0, int)
    schedule = parse_schedule(s.get("estimator", "shots", "1e4"))
    replicates = s.get("estimator", "replicates", 1, int)
    if replicates < 1:
        raise CLIError("replicates must be >= 1")
    mix = MixtureConfig(s.get("estimator", "beta", 0.0, float))
    threads = s.get("cli", "threads", 1, int)
    state = load_proposal(s, spec, f, seed)
    out = out_dir(s)
    summary = []
    for n_shots, run_seed in zip(schedule, derive_seeds(seed, len(schedule))):
        if replicates == 1:
            results = [qais_estimate(spec, f, state, n_shots, mix, run_seed)]
        else:
            results, info = repeat_runs(spec, f, state, n_shots, mix, replicates, run_seed, threads)
        for r, res in enumerate(results):
            append_estimate_csv(out / "estimates.csv", f"{n_shots}-{r}", res)
        est = np.array([r.estimate for r in results])
        std = np.array([r.std for r in results])
        spread = float(est.std(ddof=1)) if replicates > 1 else math.nan
        row = [n_shots, replicates, _fmt(est.mean()), _fmt(spread), _fmt(std.mean()),
               _fmt(np.mean(std / np.abs(est))), _fmt(np.mean([r.n_states for r in results]))]
        summary.append(row)
        print(f"N={n_shots} mean={est.mean():.8g} std={std.mean():.3g} spread={spread:.3g} "
              f"M={row[-1]}")
    _write_rows(out / "summary.csv", ["N", "replicates", "mean", "spread", "mean_std",
                                      "mean_rel_unc", "mean_states"], summary)
    return 0


def vegas_config(s: Settings, n_eval=None) -> VegasConfig:
    return VegasConfig(n_bins=s.get("vegas", "n_bins", 50, int),
                       n_eval=n_eval or s.get("vegas", "n_eval", 10_000, _int),
                       n_iter=s.get("vegas", "n_iter", 10, int),
                       alpha=s.get("vegas", "alpha", 1.5, float),
                       seed=s.get("cli", "seed", 0, int))


def cmd_vegas(s: Settings) -> int:
    name, f = build_integrand(s)
    result = vegas_integrate(f, vegas_config(s))
    out = out_dir(s)
    write_vegas_csv(out / "vegas.csv", result)
    write_grid_csv(out / "grid.csv", result.grid)
    if name == "multipeak" and f.d >= 2:
        diag = phantom_diagnostic(result.samples)
        rows = [[k, _fmt(diag[k])] for k in ("true_fraction", "phantom_fraction",
                                              "true_share_of_near")]
        rows += [["site_" + "_".join(map(str, site)), _fmt(v)]
                 for site, v in diag["per_site"].items()]
        _write_rows(out / "phantom.csv", ["key", "value"], rows)
        print(f"phantom_fraction={diag['phantom_fraction']:.4f} "
              f"true_fraction={diag['true_fraction']:.4f}")
    print(f"combined={result.mean:.8g} +- {result.sigma:.3g} "
          f"best_iter={result.best} best={result.best_estimate:.8g} +- {result.best_sigma:.3g}")
    return 0


def cmd_compare(s: Settings) -> int:
    name, f = build_integrand(s)
    spec = build_grid(s, name, f)
    seed = s.get("cli", "seed", 0, int)
    schedule = parse_schedule(s.get("estimator", "shots", "1e3,1e4,1e5"))
    replicates = s.get("estimator", "replicates", 20, int)
    if replicates < 2:
        raise CLIError("compare needs at least two replicates")
    mix = MixtureConfig(s.get("estimator", "beta", 0.0, float))
    threads = s.get("cli", "threads", 1, int)
    state = load_proposal(s, spec, f, seed)
    rows = []
    for n_shots, run_seed in zip(schedule, derive_seeds(seed, len(schedule))):
        results, info = repeat_runs(spec, f, state, n_shots, mix, replicates, run_seed, threads)
        rel = np.mean([r.std / abs(r.estimate) for r in results])
        veg = vegas_integrate(f, vegas_config(s, n_eval=n_shots), keep_samples=False)
        rows.append([n_shots, _fmt(rel), _fmt(info["spread"] / abs(info["mean"])),
                     _fmt(info["mean_states"]),
                     _fmt(veg.best_sigma / abs(veg.best_estimate))])
        print(f"N={n_shots} qais={rel:.4g} vegas={rows[-1][-1]}")
    _write_rows(out_dir(s) / "compare.csv", ["N", "qais_mean_rel_unc", "qais_spread",
                                            "qais_mean_states", "vegas_best_rel_unc"], rows)
    return 0


def tile_trial(seed: int, max_n: int, max_d: int, max_m: int, inject: bool = False):
    """One fuzzed coverage check; returns ``(row, problems)``."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, max_d + 1))
    n = int(rng.integers(d, max(d, max_n) + 1))
    cuts = np.sort(rng.choice(np.arange(1, n), size=d - 1, replace=False)) if d > 1 else []
    qubits = tuple(int(q) for q in np.diff(np.concatenate([[0], cuts, [n]])))
    spec = GridSpec(qubits, max_qubits=max(n, 26))
    m = int(rng.integers(1, min(spec.n_cells, max_m) + 1))
    indices = np.sort(rng.choice(spec.n_cells, size=m, replace=False))
    cov = full_coverage(spec, indices)
    if inject and cov.rect_group.size > 1:
        cov.rect_lo[1], cov.rect_hi[1] = cov.rect_lo[0].copy(), cov.rect_hi[0].copy()
    problems = check_coverage(cov)
    row = [seed, d, "x".join(map(str, qubits)), m, cov.rect_group.size,
           int(cov.gap_rect_counts.max(initial=0)), 2 * (d - 1) + 1,
           "fail" if problems else "pass"]
    return row, problems


def cmd_tile_check(s: Settings) -> int:
    max_n = s.get("tiling", "max_n", 16, int)
    max_d = s.get("tiling", "max_d", 5, int)
    max_m = s.get("tiling", "max_m", 4096, _int)
    if not 1 <= max_d <= max_n:
        raise CLIError("need 1 <= max_d <= max_n")
    reproduce = getattr(s.args, "reproduce", None)
    if reproduce is not None:
        seeds = [reproduce]
    else:
        seeds = derive_seeds(s.get("cli", "seed", 0, int), s.get("tiling", "trials", 1000, int))
    rows, failed = [], 0
    for seed in seeds:
        row, problems = tile_trial(seed, max_n, max_d, max_m, inject=s.args.inject_overlap)
        rows.append(row)
        if problems:
            failed += 1
            print(f"FAIL seed={seed} d={row[1]} qubits={row[2]} M={row[3]}: "
                  + "; ".join(problems) + f"  (reproduce with --reproduce {seed})")
    _write_rows(out_dir(s) / "tile_check.csv", ["seed", "d", "qubits", "M", "rects",
                                               "max_gap_rects", "bound", "status"], rows)
    print(f"{len(rows) - failed}/{len(rows)} trials passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with per-module sections")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output directory")

    target = argparse.ArgumentParser(add_help=False)
    target.add_argument("--integrand", help=f"one of {', '.join(INTEGRANDS)}")
    target.add_argument("--kinematics", help="pentagon kinematics file (default: P11)")
    target.add_argument("--dim", type=int, help="dimension for multipeak/constant")
    target.add_argument("--value", type=float, help="value of the constant integrand")
    target.add_argument("--qubits", help="qubits per axis, e.g. 8,4,4")
    target.add_argument("--n-per-cell", dest="n_per_cell", type=int)

    est = argparse.ArgumentParser(add_help=False)
    est.add_argument("--params", help="trained parameter file")
    est.add_argument("--oracle", "--oracle-proposal", action="store_true",
                     help="use the exact target PMF as proposal")
    est.add_argument("--shots", help="shot schedule, e.g. 1e3,1e4,1e5")
    est.add_argument("--replicates", type=int)
    est.add_argument("--beta", type=float, help="defensive mixture fraction")

    veg = argparse.ArgumentParser(add_help=False)
    veg.add_argument("--n-bins", dest="n_bins", type=int)
    veg.add_argument("--n-eval", dest="n_eval")
    veg.add_argument("--n-iter", dest="n_iter", type=int)
    veg.add_argument("--alpha", type=float)

    parser = argparse.ArgumentParser(prog="qais", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common, target], help="fit circuit parameters")
    p.add_argument("--layers")
    p.add_argument("--optimizer", choices=("cobyla", "nelder-mead"))
    p.add_argument("--max-iter", dest="max_iter")
    p.add_argument("--initial-step", dest="initial_step", type=float)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("integrate", parents=[common, target, est], help="QAIS estimates")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("vegas", parents=[common, target, veg], help="VEGAS baseline")
    p.set_defaults(func=cmd_vegas)

    p = sub.add_parser("compare", parents=[common, target, est, veg],
                       help="QAIS vs VEGAS relative uncertainty per budget")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("tile-check", parents=[common], help="fuzz the gap tiling")
    p.add_argument("--trials", type=int)
    p.add_argument("--max-n", dest="max_n", type=int)
    p.add_argument("--max-d", dest="max_d", type=int)
    p.add_argument("--max-m", dest="max_m")
    p.add_argument("--reproduce", type=int, help="rerun a single trial seed")
    p.add_argument("--inject-overlap", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_tile_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(Settings(args))
    except (CLIError, ValueError, OSError, configparser.Error) as exc:
        print(f"qais {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
