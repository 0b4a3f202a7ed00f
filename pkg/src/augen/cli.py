"""Command-line driver: assemble -> eigs -> extract -> validate pipelines.

Subcommands operate on one JSON experiment config each and write all
artifacts into the output directory with the config hash embedded.  Exit
codes: 0 success, 2 config error, 3 numerical degeneracy, 4 eigensolver
non-convergence, 5 I/O failure, 1 selftest failure.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io as aio
from .augmented import assemble_hybrid, assemble_ulam
from .coherent import decay_rate_bound, family_from_eigenpair
from .config import ConfigError, load_config
from .fields import rotating_interval
from .generator import assemble as assemble_spatial
from .spectral import companion_scan, eigs
from .stochastic import EnsembleSpec, escape_estimate, sample_transfer_matrix
from .transport import (
    NumericalDegeneracyError,
    bordered_gram_identity_check,
    box_family_flux,
    cumulative_outflow,
    instantaneous_augmented_outflow,
    interval_family,
    survivor_evolve,
)

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_DEGENERACY = 3
EXIT_NONCONVERGENCE = 4
EXIT_IO = 5


def _build(cfg):
    field = cfg.make_field()
    grid = cfg.make_grid(field)
    if cfg.scheme == "ulam":
        aug = assemble_ulam(grid, field, cfg.eps, q=cfg.quadrature,
                            time_rule=cfg.time_rule, threads=cfg.threads)
    else:
        aug = assemble_hybrid(grid, field, cfg.eps, q=cfg.quadrature, threads=cfg.threads)
    return field, grid, aug


def _header(cfg):
    h = {"config_hash": aio.config_hash(cfg.raw)}
    h.update(cfg.grid_header())
    return h


def _run_eigs(cfg, aug):
    e = cfg.eigs
    if not e:
        raise ConfigError("config.eigs: section required for this subcommand")
    report = eigs(
        aug, e["k"], mode=e.get("mode", "smallest-magnitude"),
        tol=e.get("tol", 1e-8), max_iter=e.get("max_iter", 60), seed=cfg.seed,
    )
    for s in e.get("shifts", []):
        sigma = complex(s[0], s[1]) if isinstance(s, list) else complex(s)
        extra = eigs(aug, e.get("k_extra", 6), sigma=sigma,
                     tol=e.get("tol", 1e-8), max_iter=e.get("max_iter", 60), seed=cfg.seed)
        known = report.eigenvalues
        for p in extra.pairs:
            if not len(known) or np.abs(known - p.eigenvalue).min() > 1e-6 * (1 + abs(p.eigenvalue)):
                report.pairs.append(p)
                known = np.append(known, p.eigenvalue)
    base = e.get("companion_base")
    if base is not None:
        companion_scan(report, aug, base)
    return report


def cmd_assemble(cfg, out):
    _, _, aug = _build(cfg)
    aio.write_matrix_market(out / "generator.mtx", aug.to_sparse("coo"), _header(cfg))
    print(f"wrote {out / 'generator.mtx'} ({aug.shape[0]} unknowns)")
    return EXIT_OK


def cmd_eigs(cfg, out):
    _, grid, aug = _build(cfg)
    report = _run_eigs(cfg, aug)
    hdr = _header(cfg)
    aio.write_spectrum_csv(out / "spectrum.csv", report, hdr)
    aio.write_eigenvectors(out / "eigenvectors.npy", report,
                           {"n_slices": grid.n_slices, "n_boxes": grid.n_boxes,
                            "scheme": cfg.scheme}, hdr)
    for p in report.pairs:
        print(f"  {p.eigenvalue.real:+.6f} {p.eigenvalue.imag:+.6f}i  "
              f"residual={p.residual:.2e}{'' if p.converged else '  NOT CONVERGED'}")
    if not all(p.converged for p in report.pairs):
        print("warning: unconverged eigenpairs present", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_extract(cfg, out):
    _, grid, aug = _build(cfg)
    report = _run_eigs(cfg, aug)
    hdr = _header(cfg)
    ex = cfg.extract
    if not ex:
        raise ConfigError("config.extract: section required for extract")
    times = ex.get("times", [0.0])
    phases = ex.get("phases", [0.0])
    level = ex.get("level", 0.0)
    for idx in ex["indices"]:
        for phase in phases:
            fam = family_from_eigenpair(report.pairs[idx], grid, cfg.scheme, phase=phase)
            for t in times:
                tag = f"ev{idx}_phase{phase:g}_t{t:g}"
                values = fam.sign_field(t)
                aio.write_slice_csv(out / f"slice_{tag}.csv", grid.partition, values, hdr)
                plus, minus = fam.sets(t, level=level)
                aio.write_json_report(
                    out / f"sets_{tag}.json",
                    {"time": t, "level": level, "eigenvalue": fam.eigenvalue,
                     "plus_boxes": np.flatnonzero(plus), "minus_boxes": np.flatnonzero(minus)},
                    hdr)
    print(f"extracted {len(ex['indices'])} eigenvector families into {out}")
    return EXIT_OK


def cmd_escape(cfg, out):
    field, grid, aug = _build(cfg)
    report = _run_eigs(cfg, aug)
    hdr = _header(cfg)
    es = cfg.escape
    if not es:
        raise ConfigError("config.escape: section required for escape")
    idx = es.get("index", 1)
    phase = es.get("phase", 0.0)
    fam = family_from_eigenpair(report.pairs[idx], grid, cfg.scheme, phase=phase)
    bound = decay_rate_bound(fam)
    runs = es.get("runs", 1)
    step = es.get("step", grid.slice_width)
    rows = []
    for sign, name in ((+1, "plus"), (-1, "minus")):
        member = fam.membership(sign)
        rates = []
        for run in range(runs):
            spec = EnsembleSpec(n=int(es["n"]), seed=cfg.seed + run, step=step,
                                start=es.get("start", 0.0), end=float(es["end"]))
            res = escape_estimate(field, cfg.eps, member, spec, partition=grid.partition)
            rates.append(res.rate)
            aio.write_survival_csv(out / f"survival_{name}_run{run}.csv",
                                   res.times, res.survival, hdr)
        rows.append({"family": name, "bound": bound,
                     "rate_mean": float(np.mean(rates)), "rates": rates})
        print(f"  {name}: bound {bound:.4f}, estimate {np.mean(rates):.4f} ({runs} runs)")
    aio.write_json_report(out / "escape.json", {"results": rows}, hdr)
    return EXIT_OK


def cmd_flux(cfg, out):
    hdr = _header(cfg)
    fx = cfg.flux
    kind = fx.get("kind", "theorem-check")
    if kind == "theorem-check":
        payload = _theorem_check()
        aio.write_json_report(out / "flux.json", payload, hdr)
        ok = payload["max_rel_gap"] <= 1e-8
        print(f"  cumulative vs augmented flux: max relative gap {payload['max_rel_gap']:.2e}")
        return EXIT_OK if ok else EXIT_DEGENERACY
    if kind == "box-family":
        _, grid, aug = _build(cfg)
        report = _run_eigs(cfg, aug)
        idx = fx.get("index", 1)
        fam = family_from_eigenpair(report.pairs[idx], grid, cfg.scheme,
                                    phase=fx.get("phase", 0.0))
        sign = +1 if fx.get("sign", "+") == "+" else -1
        inside = np.stack([
            fam.sets(t, level=fx.get("level", 0.0))[0 if sign > 0 else 1]
            for t in grid.slice_times
        ])
        value = box_family_flux(aug, inside)
        aio.write_json_report(out / "flux.json",
                              {"kind": kind, "index": idx, "flux": value}, hdr)
        print(f"  box-family flux: {value:.6g}")
        return EXIT_OK
    raise ConfigError(f"config.flux.kind: unknown kind {kind!r}")


def _theorem_check():
    """Flux equality checks on the analytic benchmark families."""
    field = rotating_interval()
    moving = interval_family(
        lambda t: 0.3 + 0.2 * math.sin(t), lambda t: 0.7 + 0.2 * math.sin(t),
        field.period,
        lower_velocity=lambda t: 0.2 * math.cos(t),
        upper_velocity=lambda t: 0.2 * math.cos(t),
    )
    advected = interval_family(
        lambda t: 0.3 + 0.3 * math.sin(t), lambda t: 0.7 + 0.3 * math.sin(t),
        field.period,
        lower_velocity=lambda t: 0.3 * math.cos(t),
        upper_velocity=lambda t: 0.3 * math.cos(t),
    )
    results = []
    for name, fam, expected in (("rotating_interval", moving, 0.4),
                                ("advected", advected, 0.0)):
        cum = cumulative_outflow(fam, field, time_quad=(4096, 4))
        inst = instantaneous_augmented_outflow(fam, field, time_quad=(4096, 4))
        gap = abs(cum - inst) / max(abs(cum), abs(inst), 1.0)
        results.append({"family": name, "cumulative": cum, "augmented": inst,
                        "expected": expected, "rel_gap": gap})
    return {"results": results,
            "max_rel_gap": max(r["rel_gap"] for r in results)}


def cmd_ulam_compare(cfg, out):
    field, grid, aug = _build(cfg)
    report = _run_eigs(cfg, aug)
    hdr = _header(cfg)
    uc = cfg.ulam_compare
    if not uc:
        raise ConfigError("config.ulam_compare: section required for ulam-compare")
    P = sample_transfer_matrix(
        field, cfg.eps, grid.partition, uc.get("s", 0.0), uc.get("t", field.period),
        uc.get("points_per_box", 2500), uc.get("step", grid.slice_width), seed=cfg.seed,
    )
    k = uc.get("k", 6)
    prep = eigs(P.matrix, k, mode="largest-magnitude", seed=cfg.seed)
    tau = field.period
    rows = []
    gen_vals = report.eigenvalues
    for p in prep.pairs:
        lam = p.eigenvalue
        log_lam = np.log(lam) / tau if lam != 0 else -np.inf
        j = int(np.argmin(np.abs(gen_vals.real - log_lam.real))) if len(gen_vals) else -1
        rows.append({"lambda": lam, "log_lambda_over_tau": log_lam,
                     "nearest_generator": gen_vals[j] if j >= 0 else None})
        print(f"  P: {lam:.4f}  log/tau: {log_lam:.4f}  gen: {gen_vals[j]:.4f}")
    aio.write_matrix_market(out / "transfer.mtx", P.matrix.tocoo(), {**hdr, **P.meta})
    aio.write_json_report(out / "ulam_compare.json", {"rows": rows}, hdr)
    if not all(p.converged for p in prep.pairs):
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_selftest(cfg, out):
    """Analytic-oracle suite; independent of any config sections."""
    checks = []

    reports = [bordered_gram_identity_check(k, trials) for k, trials in
               ((2, 400), (3, 300), (4, 300))]
    worst = max(r["max_rel_error"] for r in reports)
    checks.append(("gram-identity", worst <= 1e-10, f"max rel err {worst:.2e}"))

    field = rotating_interval()

    def indicator(t, pts):
        x = pts[:, 0]
        lo = 0.3 + 0.2 * math.sin(t)
        hi = 0.7 + 0.2 * math.sin(t)
        return (x >= lo) & (x <= hi)

    rec = survivor_evolve(field, indicator, 0.0, math.pi / 2, n_points=50_000,
                          step=field.period / 2000, seed=11)
    m_final = rec.measures[-1]
    checks.append(("survivor-measure", abs(m_final - 0.3) <= 0.003,
                   f"m(A_0,pi/2) = {m_final:.4f} (oracle 0.3)"))
    mono = bool(np.all(np.diff(rec.measures) <= 1e-12))
    checks.append(("survivor-monotone", mono, "measures nonincreasing"))

    payload = _theorem_check()
    ok_flux = payload["max_rel_gap"] <= 1e-8 and all(
        abs(r["cumulative"] - r["expected"]) <= 1e-6 for r in payload["results"])
    checks.append(("outflow-flux", ok_flux,
                   f"max rel gap {payload['max_rel_gap']:.2e}"))

    from .fields import VectorField
    from .grid import BoxPartition
    zero = VectorField(lambda t, p: np.zeros_like(p), [[0, 2], [0, 1]], 1.0)
    part = BoxPartition.for_field(zero, (100, 50))
    G = assemble_spatial(part, zero, 0.0, 0.1)
    rep2 = eigs(G, 3, mode="smallest-magnitude", seed=3)
    lam2 = sorted(rep2.eigenvalues, key=lambda z: -z.real)[1].real
    target = -(0.1**2 / 2) * (math.pi / 2) ** 2
    checks.append(("diffusion-spectrum", abs(lam2 - target) <= 0.02 * abs(target),
                   f"subdominant {lam2:.6f} vs {target:.6f}"))

    all_ok = True
    for name, ok, detail in checks:
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_SELFTEST


_COMMANDS = {
    "assemble": cmd_assemble,
    "eigs": cmd_eigs,
    "extract": cmd_extract,
    "escape": cmd_escape,
    "flux": cmd_flux,
    "ulam-compare": cmd_ulam_compare,
    "selftest": cmd_selftest,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="augen",
        description="Transport quantification for periodically driven flows via "
                    "generators on time-augmented phase space.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=False, help="JSON experiment config")
    parser.add_argument("--out", default=None, help="output directory (default: config's)")
    parser.add_argument("--threads", type=int, default=None, help="0 = all cores")
    parser.add_argument("--seed-override", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        if args.config is None:
            if args.command != "selftest":
                raise ConfigError("config: --config is required for this command")
            cfg = None
        else:
            cfg = load_config(args.config)
            if args.threads is not None:
                cfg.threads = args.threads
            if args.seed_override is not None:
                cfg.seed = args.seed_override
        out = Path(args.out if args.out is not None else (cfg.output if cfg else "out"))
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDegeneracyError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
