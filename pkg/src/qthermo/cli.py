"""Command-line entry point: deterministic experiment orchestration.

    qthermo <command> --config <path> [--out <dir>] [--seed <u64>] [--threads <k>]

Commands map 1:1 to module operations; every run writes a manifest
(full config echo, seeds, wall time) next to its CSV/field outputs.
Exit codes: 0 success, 1 assertion/tolerance failure, 2 configuration error.
"""

import argparse
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import thermo_diagnostics as td
from .base_driver import sample_base
from .config import config_with, parse_config, serialize_config
from .errors import ConfigError, QThermoError
from .fiber_system import check_hypotheses
from .function_space import GridFunction
from .hyperbolicity import (expansion_sequence, hyperbolic_times,
                            sample_from_weights)
from .serialize import (write_csv, write_error_record, write_field,
                        write_function_csv, write_manifest)
from .transfer_engine import solve_triple


def _parallel(fn, items, threads):
    """Map with results in submission order (thread-count independent)."""
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _ensemble(cfg, back, fwd):
    return sample_base(cfg.base, cfg.count, window=(back, fwd))


def _one_omega(cfg):
    num = cfg.numerics
    span = num.window + num.burn_in + num.depth_check
    return sample_base(cfg.base, 1, window=(num.burn_in + num.depth_check, span))[0]


def _triple(cfg, omega=None):
    num = cfg.numerics
    omega = omega if omega is not None else _one_omega(cfg)
    return solve_triple(cfg.model, cfg.potential, omega, num.window,
                        num.burn_in, num.grid_n, depth_check=num.depth_check,
                        burnin_tol=num.burnin_tol)


def run_check_hypotheses(cfg, out, threads=1):
    ensemble = _ensemble(cfg, 0, 0)
    report = check_hypotheses(cfg.model, cfg.potential, ensemble)
    rows = [(c, lhs, se, rhs, v, "" if cf is None else cf)
            for c, lhs, se, rhs, v, cf in report.rows()]
    return [write_csv(out / "hypotheses.csv",
                      ["condition", "lhs", "stderr", "rhs", "verdict", "closed_form"],
                      rows)]
def run_solve_triple(cfg, out, threads=1):
    triple = _triple(cfg)
    outputs = [write_csv(out / "lambda.csv", ["j", "lambda"],
                         [(j, triple.lam[j]) for j in range(triple.window + 1)])]
    for j in range(triple.window + 1):
        outputs.append(write_field(out / f"h_{j:03d}.qtf", triple.hs[j]))
        outputs.append(write_field(
            out / f"nu_{j:03d}.qtf", GridFunction(triple.nus[j], triple.boundary)))
        outputs.append(write_field(
            out / f"mu_{j:03d}.qtf", GridFunction(triple.mus[j], triple.boundary)))
    outputs.append(write_function_csv(out / "h_000.csv", triple.hs[0]))
    return outputs


def run_gibbs(cfg, out, threads=1):
    num = cfg.numerics
    n_top = num.n_max
    span = n_top + num.burn_in + num.depth_check
    samples = sample_base(cfg.base, cfg.count,
                          window=(num.burn_in + num.depth_check, span))

    def one(item):
        i, omega = item
        rng = np.random.Generator(np.random.Philox(
            key=np.uint64(cfg.base.seed ^ 0x9E3779B9), counter=np.uint64(i)))
        triple = solve_triple(cfg.model, cfg.potential, omega, n_top, num.burn_in,
                              num.grid_n, depth_check=num.depth_check,
                              burnin_tol=num.burnin_tol)
        x0 = float(sample_from_weights(triple.nus[0], triple.boundary, 1, rng)[0])
        rec = expansion_sequence(cfg.model, omega, x0, n_top)
        times = hyperbolic_times(rec, num.gamma)
        if times.size == 0:
            return []
        stride = max(1, times.size // 16)
        picked = sorted(set(times[::stride].tolist() + [int(times[-1])]))
        out_rows = []
        for n_k in picked:
            pt = td.weak_gibbs_ratio(triple, cfg.model, cfg.potential, omega, x0,
                                     int(n_k), num.eps, gamma=num.gamma)
            out_rows.append((pt.n, pt.log_nu_ball, pt.log_gibbs_sum, pt.d))
        return out_rows

    rows = [r for chunk in _parallel(one, list(enumerate(samples)), threads)
            for r in chunk]
    return [write_csv(out / "gibbs.csv",
                      ["n_k", "log_nu_ball", "log_gibbs_sum", "d"], rows)]


def run_correlations(cfg, out, threads=1):
    num = cfg.numerics
    span = num.n_max + num.burn_in + num.depth_check
    omega = sample_base(cfg.base, 1, window=(num.burn_in + num.depth_check, span))[0]
    triple = solve_triple(cfg.model, cfg.potential, omega, num.n_max, num.burn_in,
                          num.grid_n, depth_check=num.depth_check,
                          burnin_tol=num.burnin_tol)
    x = np.arange(num.grid_n) / (num.grid_n if triple.boundary == "periodic"
                                 else num.grid_n - 1)
    obs_r = GridFunction(np.cos(2 * np.pi * x), triple.boundary)
    obs_l = GridFunction(np.cos(2 * np.pi * x), triple.boundary)
    rows = [(n, td.correlation(triple, cfg.model, cfg.potential, obs_l, obs_r, n))
            for n in range(1, num.n_max + 1)]
    return [write_csv(out / "correlations.csv", ["n", "C"], rows)]


def run_pressure(cfg, out, threads=1):
    num = cfg.numerics
    n = num.window
    span = n + num.burn_in + num.depth_check
    samples = sample_base(cfg.base, cfg.count,
                          window=(num.burn_in + num.depth_check, span))

    def one(omega):
        sep = td.pressure_separated(cfg.model, cfg.potential, omega, n, num.eps)
        triple = solve_triple(cfg.model, cfg.potential, omega, n, num.burn_in,
                              num.grid_n, depth_check=num.depth_check,
                              burnin_tol=num.burnin_tol)
        lam = td.pressure_from_lambda(triple)
        cover = (td.pressure_ball_cover(cfg.model, cfg.potential, omega, n, num.eps)
                 if n <= 12 else None)
        return sep, lam, cover

    results = _parallel(one, samples, threads)
    sep_vals = [r[0] for r in results]
    lam_vals = [r[1] for r in results]
    cover_vals = [r[2] for r in results if r[2] is not None]
    def stats(vals):
        arr = np.asarray(vals)
        se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
        return float(arr.mean()), se
    rows = []
    m, se = stats(sep_vals)
    rows.append(("separated-sets", n, num.eps, m, se))
    m, se = stats(lam_vals)
    rows.append(("lambda-average", n, num.eps, m, se))
    if cover_vals:
        m, se = stats(cover_vals)
        rows.append(("ball-cover", n, num.eps, m, se))
    return [write_csv(out / "pressure.csv",
                      ["method", "n", "eps", "value", "stderr"], rows)]


def run_hyperbolic_times(cfg, out, threads=1):
    num = cfg.numerics
    samples = sample_base(cfg.base, num.orbit_count, window=(0, num.window + 1))
    rng = np.random.Generator(np.random.Philox(key=np.uint64(cfg.base.seed ^ 0x517CC1B7)))
    outputs = []
    for i, omega in enumerate(samples):
        x0 = float(rng.random())
        rec = expansion_sequence(cfg.model, omega, x0, num.window)
        times = set(hyperbolic_times(rec, num.gamma).tolist())
        rows = [(j, rec.orbit[j], rec.a[j], j in times)
                for j in range(num.window + 1)]
        outputs.append(write_csv(out / f"orbit_{i:03d}.csv",
                                 ["j", "x_j", "a_j", "is_hyperbolic_time"], rows))
    return outputs


def run_cylinder_count(cfg, out, threads=1):
    num = cfg.numerics
    omega = sample_base(cfg.base, 1, window=(0, num.window + 1))[0]
    rows = []
    for n in sorted({max(1, num.window // 4), max(1, num.window // 2), num.window}):
        sig, ll, pp, qq = td.cylinder_windows_from_model(cfg.model, omega, n)
        res = td.cylinder_count_dp(sig, ll, pp, qq, num.alpha,
                                   bound_eps=num.bound_eps)
        rows.append((n, num.alpha, res.W, res.rate, res.bound_rhs, res.bound_holds))
    return [write_csv(out / "cylinders.csv",
                      ["n", "alpha", "W", "rate", "bound", "bound_holds"], rows)]


def run_threshold(cfg, out, threads=1):
    ensemble = _ensemble(cfg, 0, 0)
    rep = td.hyperbolic_threshold_for(cfg.model, cfg.potential, ensemble)
    rows = [(rep.alpha, "" if rep.T0 is None else rep.T0, rep.applicable)]
    return [write_csv(out / "threshold.csv", ["alpha", "T0", "applicable"], rows)]


_RUNNERS = {
    "check-hypotheses": run_check_hypotheses,
    "solve-triple": run_solve_triple,
    "gibbs": run_gibbs,
    "correlations": run_correlations,
    "pressure": run_pressure,
    "hyperbolic-times": run_hyperbolic_times,
    "cylinder-count": run_cylinder_count,
    "threshold": run_threshold,
}


def run_command(cfg, out_dir=None, threads=1):
    """Execute a validated config; returns (exit_code, output paths)."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    try:
        outputs = _RUNNERS[cfg.command](cfg, out, threads=threads or 1)
    except ConfigError as exc:
        write_error_record(out, cfg.command, "config", str(exc))
        return 2, []
    except QThermoError as exc:
        write_error_record(out, cfg.command, type(exc).__name__, str(exc))
        return 1, []
    manifest = write_manifest(out, cfg.command, serialize_config(cfg),
                              cfg.base.seed, started,
                              time.perf_counter() - t0, outputs)
    return 0, outputs + [manifest]


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qthermo",
        description="quenched thermodynamic formalism for random interval maps")
    parser.add_argument("command", choices=sorted(_RUNNERS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("QTHERMO_THREADS", "1"))

    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text)
        if cfg.command is None or cfg.command != args.command:
            cfg = config_with(cfg, command=args.command)
        if args.seed is not None:
            cfg = config_with(cfg, seed=args.seed)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    code, _ = run_command(cfg, out_dir=args.out, threads=threads)
    return code


if __name__ == "__main__":
    sys.exit(main())
