"""Command-line front end.

Subcommands:

    basis build    build an eigenbasis, cache it, print validation metrics
    basis inspect  print the modes of a cached basis
    run            integrate one seeded initial condition
    campaign       run a named verification campaign, write reports
    verify         run the quick verification battery, print PASS/FAIL lines
    report         summarise a campaign output directory

Exit codes: 0 all requested checks passed, 1 a check ran and failed,
2 configuration error.
"""

import argparse
import json
import os
import sys

from . import analysis, experiments, spectrum
from .domain import make_domain, parse_zeta


def _add_basis_flags(p):
    p.add_argument("--domain", default="channel",
                   choices=("channel", "ball"))
    p.add_argument("--zeta", default="1.0",
                   help="slip length, a positive number or 'inf'")
    p.add_argument("--cutoff-kappa", type=int, default=2)
    p.add_argument("--cutoff-n", type=int, default=4)
    p.add_argument("--cache", default=None,
                   help="basis cache directory "
                        "(default: $SLIPSTOKES_CACHE or .slipstokes_cache)")


def build_parser():
    ap = argparse.ArgumentParser(prog="slipstokes", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    basis = sub.add_parser("basis", help="eigenbasis build/inspect")
    bsub = basis.add_subparsers(dest="basis_command", required=True)
    bb = bsub.add_parser("build")
    _add_basis_flags(bb)
    bi = bsub.add_parser("inspect")
    _add_basis_flags(bi)

    run = sub.add_parser("run", help="integrate one initial condition")
    _add_basis_flags(run)
    run.add_argument("--mu", type=float, default=0.05)
    run.add_argument("--T", type=float, default=1.0, dest="t_final")
    run.add_argument("--dt", type=float, default=1e-3)
    run.add_argument("--n-modes", type=int, default=50)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--stepper", default="rk4",
                     choices=("rk4", "factored"))
    run.add_argument("--out", default=None)

    camp = sub.add_parser("campaign", help="named verification campaign")
    camp.add_argument("name", choices=("spectrum", "identities", "monitors",
                                       "shear-curve", "noslip", "inviscid"))
    camp.add_argument("--domain", default=None,
                      choices=("channel", "ball"))
    camp.add_argument("--count", type=int, default=None)
    camp.add_argument("--seed", type=int, default=None)
    camp.add_argument("--out", default=None)
    camp.add_argument("--cache", default=None)

    ver = sub.add_parser("verify", help="quick verification battery")
    ver.add_argument("--domain", default=None,
                     choices=("channel", "ball"))
    ver.add_argument("--count", type=int, default=24)
    ver.add_argument("--seed", type=int, default=101)
    ver.add_argument("--out", default=None)

    rep = sub.add_parser("report", help="summarise campaign outputs")
    rep.add_argument("path")
    return ap


def _cmd_basis(args):
    domain = make_domain(args.domain)
    zeta = parse_zeta(args.zeta)
    cutoffs = (args.cutoff_kappa, args.cutoff_n)
    if args.basis_command == "build":
        basis = spectrum.load_or_build(domain, zeta, *cutoffs,
                                       directory=args.cache)
        rep = spectrum.validate_basis(basis)
        for key in ("n_modes", "lambda_max", "lambda_hat", "eigen_residual",
                    "navier_trace", "gram_defect", "divergence",
                    "dirichlet_defect"):
            print(f"{key}: {rep[key]}")
        ok = (rep["eigen_residual"] <= 1e-8 and rep["navier_trace"] <= 1e-7
              and rep["gram_defect"] <= 1e-9)
        print("validation:", "PASS" if ok else "FAIL")
        return 0 if ok else 1
    path = spectrum.cache_path(domain, zeta,
                               {"kappa": cutoffs[0], "n": cutoffs[1]},
                               args.cache)
    if not os.path.exists(path):
        raise ConfigError(f"no cached basis at {path}; run 'basis build'")
    basis = spectrum.EigenBasis.load(path)
    for mode, lam in zip(basis.labels(), basis.eigenvalues):
        print(f"{mode}\t{float(lam)!r}")
    return 0


def _cmd_run(args):
    if args.t_final <= 0.0 or args.dt <= 0.0:
        raise ConfigError("T and dt must be positive")
    traj, energy = experiments.run_simulation(
        args.domain, args.zeta, args.mu, args.t_final, args.dt,
        n_modes=args.n_modes, cutoff_kappa=args.cutoff_kappa,
        cutoff_n=args.cutoff_n, seed=args.seed, out=args.out,
        cache=args.cache, stepper=args.stepper)
    print(f"steps saved: {len(traj.times)}")
    print(f"final |u|^2: {float(traj.norm2()[-1])!r}")
    print(f"energy residual (relative): {energy.relative_spectral()!r}")
    if traj.blown_up:
        print("run flagged as blown up")
        return 1
    return 0


def _cmd_campaign(args):
    domains = (args.domain,) if args.domain else ("channel", "ball")
    if args.name == "spectrum":
        passed = True
        for dom in domains:
            zetas = (("0.1", "1.0", "10.0", "inf") if dom == "channel"
                     else ("0.5", "1.0", "2.0", "inf"))
            rep = experiments.spectrum_report(dom, zetas, out=args.out,
                                              cache=args.cache)
            print(f"{dom}: {'PASS' if rep.passed else 'FAIL'}")
            passed = passed and rep.passed
        return 0 if passed else 1
    if args.name == "identities":
        reports = experiments.identity_campaign(
            domains, count=args.count or 100, seed=args.seed or 101,
            out=args.out)
        for dom, rep in reports.items():
            print(f"{dom}: {'PASS' if rep.passed else 'FAIL'} "
                  f"(worst {max(rep.worst.values())!r})")
        return 0 if all(r.passed for r in reports.values()) else 1
    if args.name == "monitors":
        reports = experiments.monitor_campaign(
            domains, count=args.count or 24, seed=args.seed or 7,
            out=args.out)
        ok = True
        for dom, rep in reports.items():
            bad = sorted(k for k, v in rep.passed.items() if not v)
            print(f"{dom}: {'PASS' if not bad else 'FAIL ' + ','.join(bad)}")
            ok = ok and not bad
        return 0 if ok else 1
    if args.name == "shear-curve":
        curve = experiments.shear_eigenvalue_curve(out=args.out)
        ok = curve["monotone"] and curve["clamped_gap"] <= 1e-3
        print(f"monotone={curve['monotone']} "
              f"clamped_gap={curve['clamped_gap']!r}: "
              f"{'PASS' if ok else 'FAIL'}")
        return 0 if ok else 1
    if args.name == "noslip":
        rep = experiments.noslip_limit(seed=args.seed or 2024, out=args.out,
                                       cache=args.cache)
        print(f"bounded={rep.bounded} decreasing={rep.decreasing}: "
              f"{'PASS' if rep.passed else 'FAIL'}")
        return 0 if rep.passed else 1
    rep = experiments.inviscid_limit(seed=args.seed or 2024, out=args.out,
                                     cache=args.cache)
    print(f"alpha={rep.fitted_alpha!r} monotone={rep.monotone} "
          f"euler_drift={rep.euler_drift!r}: "
          f"{'PASS' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


def _cmd_verify(args):
    domains = (args.domain,) if args.domain else ("channel", "ball")
    failures = 0
    for dom in domains:
        rep = analysis.identity_suite(dom, count=args.count, seed=args.seed)
        line = "PASS" if rep.passed else "FAIL"
        print(f"{line} identities[{dom}] worst={max(rep.worst.values())!r}")
        failures += 0 if rep.passed else 1
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out,
                                   f"identities_{dom}.json"), "w") as fh:
                fh.write(rep.to_json() + "\n")
        mon = analysis.monitor_suite(dom, count=max(args.count, 12),
                                     seed=args.seed)
        bad = sorted(k for k, v in mon.passed.items() if not v)
        print(f"{'PASS' if not bad else 'FAIL'} monitors[{dom}]"
              + ("" if not bad else " " + ",".join(bad)))
        failures += 1 if bad else 0
    return 0 if failures == 0 else 1


def _cmd_report(args):
    if not os.path.isdir(args.path):
        raise ConfigError(f"not a directory: {args.path}")
    names = sorted(n for n in os.listdir(args.path) if n.endswith(".json"))
    if not names:
        raise ConfigError(f"no report files in {args.path}")
    for name in names:
        with open(os.path.join(args.path, name)) as fh:
            payload = json.load(fh)
        verdict = ""
        for key in ("passed", "bounded", "monotone"):
            if isinstance(payload, dict) and key in payload:
                verdict += f" {key}={payload[key]}"
        print(f"{name}:{verdict}" if verdict else f"{name}: (data)")
    return 0


class ConfigError(Exception):
    pass


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "basis":
            return _cmd_basis(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "campaign":
            return _cmd_campaign(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_report(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
