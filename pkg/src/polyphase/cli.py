"""Command-line harness: ``polyphase <command> [options]``.

Every command writes CSV tables, a ``summary.json`` and a ``manifest.json``
(config hash, version, per-file SHA-256) into a fresh output directory.
Outputs are staged in a sibling temporary directory and moved into place
only after the command succeeds, so a failed run leaves nothing behind.

Exit codes: 0 ok, 1 usage or validation error, 2 infrastructure failure,
3 an exact invariant failed (``verify`` only).
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import diophantine as dio
from . import locallaw as ll
from .config import ConfigError, ExperimentConfig, RunManifest, parse_seeds
from .ensemble import EnsembleParams, draw_matrix
from .fluctuations import fluctuation_samples, moment_from_samples
from .io import sha256_file, write_csv, write_json
from .mp_reference import F_mp, m_mp
from .spectral import counting_function, green_minor, minor, stieltjes_mN
from .verify import FAULTS, run_suite

EXIT_OK, EXIT_USAGE, EXIT_INFRA, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("spectrum", "locallaw", "rigidity", "deloc", "moments", "dio", "exponents", "verify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--out", metavar="DIR", help="output directory (must not exist unless --force)")
    common.add_argument("--seeds", metavar="LIST", help='seed list, e.g. "1,2" or "1-10"')
    common.add_argument("--parallel", metavar="K", type=int, default=1, help="worker processes for per-seed work")
    common.add_argument("--force", action="store_true", help="replace an existing output directory")
    parser = _Parser(prog="polyphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"polyphase {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("--inject-fault", choices=FAULTS, help="corrupt an input to test the harness")
    return parser


# -- per-seed workers (module level so they pickle) ---------------------------


def _eigvals(params: EnsembleParams) -> np.ndarray:
    return ll.spectrum(params).eigenvalues


def _eigh(params: EnsembleParams):
    return ll.spectrum(params, vectors=True)


def _map_seeds(fn, cfg: ExperimentConfig, seeds, parallel: int):
    params = [cfg.ensemble.params(s) for s in seeds]
    if parallel > 1 and len(params) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(fn, params))
    return [fn(p) for p in params]


def _grid_points(cfg: ExperimentConfig) -> np.ndarray:
    g = cfg.grid
    if g.lattice:
        grid = ll.domain_lattice(
            ll.theta_params(cfg.ensemble.d), g.kappa, g.c_kappa, cfg.ensemble.N, g.theta, g.s, g.max_points, override=True
        )
        pts = grid.points
    else:
        E = np.asarray(g.E_values, dtype=float)
        eta = np.asarray(g.eta_values, dtype=float)
        if np.any(eta <= 0):
            raise ConfigError("grid.eta_values must be positive")
        pts = (E[:, None] + 1j * eta[None, :]).ravel()
    if pts.size == 0:
        raise ConfigError("the evaluation grid is empty")
    return pts[np.lexsort((pts.imag, pts.real))]


def _energy_grid(kappa: float, n: int) -> np.ndarray:
    return np.linspace(kappa, 4 - kappa, n + 2)[1:-1]


# -- commands -----------------------------------------------------------------


def cmd_spectrum(cfg, seeds, out: Path, parallel: int) -> dict:
    eigs = _map_seeds(_eigvals, cfg, seeds, parallel)
    E = _energy_grid(cfg.rigidity.kappa, cfg.rigidity.n_E)
    pts = _grid_points(cfg)
    mmp = np.atleast_1d(m_mp(pts))
    Fmp = F_mp(E)
    ev_rows, cnt_rows, st_rows = [], [], []
    for s, lam in zip(seeds, eigs):
        dec = ll.SpectralDecomposition(lam)
        ev_rows += [(s, j, x) for j, x in enumerate(lam)]
        FN = counting_function(dec, E)
        cnt_rows += [(s, e, a, b) for e, a, b in zip(E, FN, Fmp)]
        mN = np.atleast_1d(stieltjes_mN(dec, pts))
        st_rows += [(s, z.real, z.imag, m.real, m.imag, q.real, q.imag) for z, m, q in zip(pts, mN, mmp)]
    write_csv(out / "eigenvalues.csv", ("seed", "index", "eigenvalue"), ev_rows)
    write_csv(out / "counting.csv", ("seed", "E", "F_N", "F_MP"), cnt_rows)
    write_csv(out / "stieltjes.csv", ("seed", "E", "eta", "re_mN", "im_mN", "re_mMP", "im_mMP"), st_rows)
    return {"eigenvalue_count": len(ev_rows), "seeds": list(seeds)}


def _sweep_worker(args):
    params, pts, theta0 = args
    return ll.locallaw_sweep(params, pts, [params.seed], theta0)


def cmd_locallaw(cfg, seeds, out: Path, parallel: int) -> dict:
    pts = _grid_points(cfg)
    theta0 = float(ll.theta_params(cfg.ensemble.d).theta0)
    jobs = [(cfg.ensemble.params(s), pts, theta0) for s in seeds]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            parts = list(pool.map(_sweep_worker, jobs))
    else:
        parts = [_sweep_worker(j) for j in jobs]
    sweep = ll.SweepResult(
        cfg.ensemble.N,
        cfg.ensemble.d,
        theta0,
        np.concatenate([p.seed for p in parts]),
        np.concatenate([p.z for p in parts]),
        np.concatenate([p.m_N for p in parts]),
        np.concatenate([p.m_MP for p in parts]),
    )
    write_csv(out / "sweep.csv", ll.SWEEP_COLUMNS, sweep.rows())
    summary = sweep.summary()
    summary["theta0"] = theta0
    summary["envelope_c"] = ll.envelope_constant(sweep)
    if cfg.descent is not None:
        dc = cfg.descent
        ladder = ll.descent_ladder(cfg.ensemble.N, dc.eta_start, dc.eta_stop, dc.s)
        res = ll.multiscale_descent(cfg.ensemble.params(), dc.E, ladder, seeds, s=dc.s, c=dc.c, theta0=theta0)
        write_csv(
            out / "descent.csv",
            ("seed", "eta1", "eta2", "err1", "err2", "diff", "lipschitz_budget", "lipschitz_ok", "bound", "flag"),
            zip(res.seed, res.eta1, res.eta2, res.err1, res.err2, res.diff, res.lipschitz_budget, res.lipschitz_ok,
                res.bound, res.flag),
        )
        summary["descent"] = {
            "steps": int(res.seed.size),
            "lipschitz_ok": bool(np.all(res.lipschitz_ok)),
            "flag_count": int(res.flag.sum()),
        }
    return summary


def cmd_rigidity(cfg, seeds, out: Path, parallel: int) -> dict:
    eigs = _map_seeds(_eigvals, cfg, seeds, parallel)
    E = _energy_grid(cfg.rigidity.kappa, cfg.rigidity.n_E)
    rows, per = [], {}
    for s, lam in zip(seeds, eigs):
        scan = ll.rigidity_scan(ll.SpectralDecomposition(lam), E)
        FN = counting_function(ll.SpectralDecomposition(lam), E)
        rows += [(s, e, a, b, g) for e, a, b, g in zip(E, FN, F_mp(E), scan.gap)]
        per[str(s)] = scan.sup_gap
    write_csv(out / "rigidity.csv", ("seed", "E", "F_N", "F_MP", "gap"), rows)
    vals = np.array(list(per.values()))
    return {"per_seed_sup_gap": per, "mean_sup_gap": float(vals.mean()), "max_sup_gap": float(vals.max())}


def cmd_deloc(cfg, seeds, out: Path, parallel: int) -> dict:
    decs = _map_seeds(_eigh, cfg, seeds, parallel)
    rows, per = [], {}
    dominated = True
    for s, dec in zip(seeds, decs):
        scan = ll.deloc_scan(dec, cfg.deloc.kappa, cfg.deloc.eta, cfg.deloc.surrogate)
        sur = scan.surrogate if scan.surrogate is not None else np.full(scan.bulk.size, np.nan)
        rows += [(s, a, dec.eigenvalues[a], v, w) for a, v, w in zip(scan.bulk, scan.sup_norm2, sur)]
        per[str(s)] = scan.max_sup_norm2
        dominated &= scan.surrogate_dominates
    write_csv(out / "deloc.csv", ("seed", "alpha", "eigenvalue", "sup_norm2", "surrogate"), rows)
    vals = np.array(list(per.values()))
    return {
        "per_seed_max_sup_norm2": per,
        "mean_max_sup_norm2": float(vals.mean()),
        "surrogate_dominates": bool(dominated),
    }


def cmd_moments(cfg, seeds, out: Path, parallel: int) -> dict:
    mc = cfg.moments
    if any(2 * p > 8 or p < 1 for p in mc.p_values):
        raise ConfigError("moments.p_values must satisfy 1 <= p and 2p <= 8")
    if any(r < 2 for r in mc.replicas):
        raise ConfigError("moments.replicas entries must be >= 2")
    rows = []
    for s in seeds:
        params = cfg.ensemble.params(s)
        for re_z, im_z in mc.z_values:
            z = complex(re_z, im_z)
            F_all = fluctuation_samples(params, mc.row, z, max(mc.replicas))
            for R in mc.replicas:
                for p in mc.p_values:
                    est = moment_from_samples(F_all[:R], p, params.N, z.imag, mc.eps)
                    rows.append((s, z.real, z.imag, p, R, est.estimate, est.stderr, est.mean_abs, est.bound))
    write_csv(
        out / "moments.csv",
        ("seed", "re_z", "im_z", "p", "replicas", "estimate", "stderr", "mean_abs", "bound"),
        rows,
    )
    return {"rows": len(rows), "row_index": mc.row}


def cmd_dio(cfg, seeds, out: Path, parallel: int) -> dict:
    dc = cfg.diophantine
    sysm = dio.VinogradovSystem(dc.N, dc.d, dc.p, tuple(dc.v) if dc.v else ())
    sols = dio.enumerate_Lv(sysm, off_diagonal=dc.off_diagonal, solution_cap=dc.solution_cap)
    dio.write_solutions(out / "solutions.txt", sols)
    back = dio.read_solutions(out / "solutions.txt")
    summary = {
        "system": sols.header(),
        "count_mitm": int(dio.count_Lv(sysm, dc.off_diagonal)),
        "reloaded_ok": bool(np.array_equal(back.tuples, sols.tuples)),
    }
    if not dc.off_diagonal:
        summary["count_convolution"] = int(dio.count_Lv_convolution(sysm))
    if dc.gamma is not None:
        strata_rows = []
        for s in seeds:
            params = EnsembleParams(dc.N, dc.d, cfg.ensemble.params().density, s)
            G = green_minor(minor(draw_matrix(params), dc.row), complex(*dc.z)).G
            counts = dio.bad_strata(sols, G, dc.gamma)
            strata_rows += [(s, r, int(c)) for r, c in enumerate(counts)]
        write_csv(out / "strata.csv", ("seed", "r", "count"), strata_rows)
    return summary


def _fr(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def cmd_exponents(cfg, seeds, out: Path, parallel: int) -> dict:
    ec = cfg.exponents
    if ec.d_min < 1 or ec.d_max < ec.d_min:
        raise ConfigError("exponents: need 1 <= d_min <= d_max")
    ds = range(ec.d_min, ec.d_max + 1)
    reports = ll.exponent_sweep(ds, general=ec.general)
    write_csv(
        out / "exponents.csv",
        ("d", "p", "theta_prime", "r", "x1", "x2", "x3", "target", "margin", "margin_float", "ok"),
        [(r.d, r.p, _fr(r.theta_prime), _fr(r.r), _fr(r.x1), _fr(r.x2), _fr(r.x3), _fr(r.target), _fr(r.margin),
          float(r.margin), r.ok) for r in reports],
    )
    tps = [ll.theta_params(d) for d in ds]
    write_csv(
        out / "theta.csv",
        ("d", "p", "theta0", "theta0_float", "beta0", "positive"),
        [(t.d, t.p, _fr(t.theta0), float(t.theta0), _fr(t.beta0), t.positive) for t in tps],
    )
    bk = ll.beta0_bookkeeping()
    return {
        "all_ok": all(r.ok for r in reports),
        "min_margin": float(min(r.margin for r in reports)),
        "general_form": ec.general,
        "union_bound": dataclasses.asdict(bk),
    }


HANDLERS = {
    "spectrum": cmd_spectrum,
    "locallaw": cmd_locallaw,
    "rigidity": cmd_rigidity,
    "deloc": cmd_deloc,
    "moments": cmd_moments,
    "dio": cmd_dio,
    "exponents": cmd_exponents,
}


def _finish(out_dir: Path, staging: Path, cfg: ExperimentConfig, command: str, summary: dict, force: bool):
    summary = {
        "command": command,
        "config": cfg.experiment_dict(),
        "provenance": f"polyphase-{__version__}+cfg.{cfg.digest()[:12]}",
        **summary,
    }
    write_json(staging / "summary.json", summary)
    outputs = {p.name: sha256_file(p) for p in sorted(staging.iterdir())}
    manifest = RunManifest(command, cfg.digest(), __version__, RunManifest.now(), outputs)
    write_json(staging / "manifest.json", manifest.to_dict())
    if out_dir.exists():
        if not force:  # appeared while we were running
            raise FileExistsError(f"{out_dir} exists")
        shutil.rmtree(out_dir)
    os.replace(staging, out_dir)


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seeds is not None:
        cfg.seeds = parse_seeds(args.seeds)
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.parallel < 1:
            raise UsageError("--parallel must be >= 1")
        cfg = _load_config(args)
        tol = cfg.effective_tolerances()
    except (UsageError, ConfigError) as exc:
        print(f"polyphase: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"polyphase: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INFRA

    if args.command == "verify":
        return _run_verify(cfg, tol, args)

    if cfg.out is None:
        print("polyphase: error: an output directory is required (--out or config 'out')", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(cfg.out)
    if out_dir.exists() and not args.force:
        print(f"polyphase: error: {out_dir} exists; pass --force to replace it", file=sys.stderr)
        return EXIT_USAGE
    staging = None
    try:
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
        summary = HANDLERS[args.command](cfg, list(cfg.seeds), staging, args.parallel)
        _finish(out_dir, staging, cfg, args.command, summary, args.force)
        staging = None
    except ConfigError as exc:
        print(f"polyphase: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # infrastructure: numerics, I/O, budget
        print(f"polyphase: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFRA
    finally:
        if staging is not None:
            shutil.rmtree(staging, ignore_errors=True)
    print(f"polyphase: {args.command} wrote {out_dir}")
    return EXIT_OK


def _run_verify(cfg: ExperimentConfig, tol: dict, args) -> int:
    vc = cfg.verify
    try:
        results = run_suite(
            N=vc.N,
            d=vc.d,
            seeds=[s + k for s in cfg.seeds[:1] for k in range(vc.draws)],
            eta=vc.eta,
            operator_matrices=vc.operator_matrices,
            dichotomy_lists=vc.dichotomy_lists,
            tol=tol,
            fault=args.inject_fault,
        )
    except Exception as exc:
        print(f"polyphase: verify failed to run: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFRA
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name:<17} residual={r.value:.3e} tol={r.tol:.1e}  {r.detail}")
    ok = all(r.passed for r in results)
    if cfg.out is not None:
        out_dir = Path(cfg.out)
        if out_dir.exists() and not args.force:
            print(f"polyphase: error: {out_dir} exists; pass --force to replace it", file=sys.stderr)
            return EXIT_USAGE
        try:
            out_dir.parent.mkdir(parents=True, exist_ok=True)
            staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
            write_csv(
                staging / "verify.csv",
                ("check", "residual", "tol", "passed"),
                [(r.name, r.value, r.tol, r.passed) for r in results],
            )
            _finish(out_dir, staging, cfg, "verify", {"all_passed": ok}, args.force)
        except Exception as exc:
            if "staging" in locals():
                shutil.rmtree(staging, ignore_errors=True)
            print(f"polyphase: verify could not write outputs: {exc}", file=sys.stderr)
            return EXIT_INFRA
    return EXIT_OK if ok else EXIT_VERIFY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
