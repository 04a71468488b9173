"""Command line entry point.

Exit codes: 0 pass, 2 a quantitative check failed, 1 error.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .clifford import construct_algebra, verify_algebra
from .config import RunConfig, echo_config, make_initial_data, parse_config
from .errors import KGDiracError, LowerBoundLost, NoConvergence
from .io import write_meta, write_run_dir
from .operators import dirac_group, system_to_kg
from .solvers import (
    certify_nonvanishing,
    contraction_params,
    dirac_picard_solve,
    fit_c_tilde,
    leapfrog_kg,
    picard_solve,
)
from .spectral import l2_norm
from .weighted import (
    EstimateReport,
    bessel_census,
    commutator_census,
    linear_growth_diag,
    nonlinear_ratio_diag,
    random_nonvanishing_field,
    random_schwartz_field,
    small_time_diag,
    weighted_inf,
)

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _load(args) -> RunConfig:
    text = Path(args.config).read_text() if getattr(args, "config", None) else ""
    overrides = dict(kv.split("=", 1) for kv in (getattr(args, "set", None) or []))
    if getattr(args, "two_sided", False):
        overrides["two_sided"] = "true"
    if getattr(args, "out", None):
        overrides["output"] = args.out
    return parse_config(text, overrides)


def _base_meta(cfg: RunConfig, command: str) -> dict:
    meta = {"command": command, "version": __version__}
    for line in echo_config(cfg).splitlines():
        k, v = line.split("=", 1)
        meta[k] = v
    return meta


def _solve(cfg: RunConfig, data, p):
    directions = (1, -1) if cfg.two_sided else (1,)
    reports = []
    for d in directions:
        pc = cfg.picard(d)
        if cfg.equation == "kg":
            reports.append(picard_solve(data.u0, p, pc))
        else:
            reports.append(dirac_picard_solve(data.u0, p, construct_algebra(cfg.dim), pc))
    return reports


def _contraction(cfg: RunConfig, data, p):
    if cfg.equation != "kg":
        return None
    C = cfg.C_tilde if cfg.C_tilde is not None else fit_c_tilde(data.u0, p)
    return contraction_params(data.u0, p, C)


def _solve_meta(cfg, data, reports, cp, started) -> dict:
    meta = _base_meta(cfg, "solve")
    meta["achieved_inf"] = data.achieved_inf
    meta["iterations"] = ",".join(str(r.iterations) for r in reports)
    factors = [f for r in reports for f in r.contraction_factors]
    meta["max_contraction_factor"] = max(factors) if factors else 0.0
    if cp is not None:
        for key in ("eta", "K", "K_t0", "T_star", "log_T_star", "t0"):
            meta[key] = getattr(cp, key)
        meta["C_tilde_used"] = cp.C_tilde
        meta["T_within_T_star"] = cfg.T <= cp.T_star
    meta["elapsed_s"] = time.perf_counter() - started
    return meta


def cmd_solve(args, certify: bool = False) -> int:
    started = time.perf_counter()
    cfg = _load(args)
    grid, p = cfg.grid(), cfg.params()
    data = make_initial_data(cfg, grid, p)
    cp = _contraction(cfg, data, p)
    if cfg.enforce_T_star and cp is not None and cfg.T > cp.T_star:
        print(f"T = {cfg.T} exceeds T_star = {cp.T_star:.3e}; refusing (enforce_T_star=true)")
        return EXIT_FAIL
    try:
        reports = _solve(cfg, data, p)
    except (NoConvergence, LowerBoundLost) as exc:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        meta = _base_meta(cfg, "certify" if certify else "solve")
        meta["failure"] = f"{type(exc).__name__}: {exc}"
        write_meta(out / "meta.txt", meta)
        print(f"FAIL {type(exc).__name__}: {exc}")
        return EXIT_FAIL
    meta = _solve_meta(cfg, data, reports, cp, started)
    verdict = True
    if certify:
        certs = [certify_nonvanishing(r, p) for r in reports]
        T1 = min(c.T1 for c in certs)
        verdict = all(c.verdict for c in certs)
        meta.update(command="certify", T1=T1, cert_eta=certs[0].eta, verdict="pass" if verdict else "fail")
    write_run_dir(cfg.output, meta, reports[0], reports[1:], snapshots=cfg.write_snapshots)
    if certify:
        print(
            f"{'PASS' if verdict else 'FAIL'} certificate: eta={meta['cert_eta']:.6g} T1={meta['T1']:.6g} "
            f"T={cfg.T:g} -> {cfg.output}"
        )
        return EXIT_PASS if verdict else EXIT_FAIL
    iters = meta["iterations"]
    print(f"PASS solve: converged in {iters} iteration(s), min weighted inf "
          f"{min(r.lower_bound for r in reports):.6g} -> {cfg.output}")
    return EXIT_PASS


def _parallel(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _merge(name: str, parts: Sequence[EstimateReport]) -> EstimateReport:
    rep = EstimateReport(name)
    for i, part in enumerate(parts):
        for r in part.rows:
            rep.rows.append((f"f{i}", *r[1:]))
    return rep


def cmd_diagnose(args) -> int:
    cfg = _load(args)
    grid, p = cfg.grid(), cfg.params()
    size = args.family_size or cfg.family_size
    rng = np.random.default_rng(cfg.seed)
    jobs = max(1, args.jobs)
    kind = args.kind
    group = None
    if cfg.equation == "dirac":
        A = construct_algebra(cfg.dim)
        group = lambda f, t: dirac_group(f, t, A)  # noqa: E731

    comps = cfg.components
    times = np.linspace(0.0, cfg.T, 9)
    fitted = None
    if kind in ("linear", "smalltime"):
        family = [random_schwartz_field(grid, comps, rng) for _ in range(size)]
        if kind == "linear":
            parts = _parallel(lambda f: linear_growth_diag(f, p, times, group), family, jobs)
        else:
            ts = cfg.T * 2.0 ** -np.arange(0, 8)
            parts = _parallel(lambda f: small_time_diag(f, p, ts, group), family, jobs)
            fitted = min(r.fitted_exponent for r in parts)
        rep = _merge(kind, parts)
    elif kind == "nonlinear":
        family = [random_nonvanishing_field(grid, 2, p.n, rng) for _ in range(size)]
        eta = 1.0 / min(weighted_inf(u, p.n) for u in family)
        rep = nonlinear_ratio_diag(family, p, eta)
    elif kind == "bessel":
        family = [random_schwartz_field(grid, 1, rng) for _ in range(size)]
        parts = _parallel(lambda f: bessel_census([f], p.n, "2").merge(bessel_census([f], p.n, "inf")), family, jobs)
        rep = _merge(kind, parts)
    else:
        family = [random_schwartz_field(grid, 1, rng) for _ in range(size)]
        parts = _parallel(
            lambda f: _merge("c", [commutator_census([f], ell) for ell in range(1, p.n + 1)]), family, jobs
        )
        rep = _merge(kind, parts)
    rep.fitted_exponent = fitted
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    rep.to_csv(out / f"estimate_{kind}.csv")
    meta = _base_meta(cfg, f"diagnose {kind}")
    meta.update(family_size=size, max_ratio=rep.max_ratio)
    ok = np.isfinite(rep.max_ratio)
    if args.bound is not None:
        ok = ok and rep.max_ratio <= args.bound
    if fitted is not None:
        meta["fitted_exponent"] = fitted
        ok = ok and fitted >= 0.95
    write_meta(out / "meta.txt", meta)
    msg = f"{'PASS' if ok else 'FAIL'} diagnose {kind}: family={size} max_ratio={rep.max_ratio:.6g}"
    if fitted is not None:
        msg += f" min_slope={fitted:.4f}"
    print(msg)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_algebra(args) -> int:
    A = construct_algebra(args.dim)
    print(f"dim={A.dim} spinor_size={A.spinor_size}")
    if args.verify:
        rep = verify_algebra(A)
        print(
            f"anticommutator={rep.anticommutator:.3e} gamma_eta={rep.gamma_eta:.3e} "
            f"eta_square={rep.eta_square:.3e} hermiticity={rep.hermiticity:.3e}"
        )
        ok = rep.max_deviation < 1e-13
        print(f"{'PASS' if ok else 'FAIL'} algebra: max deviation {rep.max_deviation:.3e}")
        return EXIT_PASS if ok else EXIT_FAIL
    for j, g in enumerate(A.gammas, 1):
        print(f"gamma_{j} =\n{g}")
    print(f"eta =\n{A.eta}")
    return EXIT_PASS


def cmd_oracle(args) -> int:
    cfg = _load(args)
    if cfg.equation != "kg":
        raise KGDiracError("oracle-compare needs equation=kg")
    grid, p = cfg.grid(), cfg.params()
    data = make_initial_data(cfg, grid, p)
    rep = picard_solve(data.u0, p, cfg.picard())
    lf = leapfrog_kg(data.w0, data.w1, p, args.dt, cfg.T)
    gap = max(
        l2_norm((system_to_kg(f).values[0] - lf.at(t))[None], grid) for t, f in rep.snapshots
    )
    rep.oracle_gap = gap
    meta = _base_meta(cfg, "oracle-compare")
    meta.update(dt=args.dt, oracle_gap=gap, threshold=args.threshold)
    write_run_dir(cfg.output, meta, rep)
    ok = gap < args.threshold
    print(f"{'PASS' if ok else 'FAIL'} oracle-compare: sup-L2 gap {gap:.3e} (threshold {args.threshold:g})")
    return EXIT_PASS if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgdirac", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--out", help="run directory (overrides output=)")

    for name in ("solve", "certify"):
        sp = sub.add_parser(name)
        common(sp)
        sp.add_argument("--two-sided", action="store_true", help="solve on [-T, T]")
    sp = sub.add_parser("diagnose")
    sp.add_argument("kind", choices=["linear", "smalltime", "nonlinear", "bessel", "commutator"])
    common(sp)
    sp.add_argument("--family-size", type=int, default=None)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--bound", type=float, default=None, help="fail if max ratio exceeds this")
    sp = sub.add_parser("algebra")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--verify", action="store_true")
    sp = sub.add_parser("oracle-compare")
    common(sp)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--threshold", type=float, default=1e-5)
    return ap


def run_command(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "certify":
            return cmd_solve(args, certify=True)
        if args.command == "diagnose":
            return cmd_diagnose(args)
        if args.command == "algebra":
            return cmd_algebra(args)
        return cmd_oracle(args)
    except (KGDiracError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
