"""Command line runner.

    blaschke-lab {spectrum,stability,prevalence,perturb,verify}
                 [--config PATH] [--seed N] [--workers N] [--out DIR]

Each run writes ``report.json`` plus one or more CSV tables to the output
directory (``--out``, else ``[output] dir``, else ``$BLASCHKE_LAB_OUT``, else ``./blaschke_lab_out``).
Exit status: 0 success, 2 configuration error, 3 numerical failure.

CSV column orders:

* spectrum.csv: index, exponent, analytic, abs_gap, std_error, eigen_log_modulus
* stability.csv: preset, classification, essinf, witness_re, witness_im, exact,
  admissible, r, R, certified, lyapunov
* measures.csv: epsilon, estimate, standard_error, sample_count, seed
* probe_cells.csv: row, col, centre_re, centre_im, witness_re, witness_im
* perturb.csv: stage, lambda_re, lambda_im, classification, essinf, lyapunov
* verify.csv: suite, passed, detail
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .blaschke import (
    BlaschkeProduct,
    admissibility_bound,
    circle_max,
    evaluate,
    preimages,
    random_product,
)
from .cocycle import (
    BlaschkeCocycle,
    CoefficientField,
    admissible,
    classify_stability,
    fiber_map,
    lyapunov_lambda,
    pullback_fixed_point,
)
from .config import EXPERIMENTS, ExperimentConfig, build_cocycle, parse_config
from .errors import BlaschkeLabError, ConfigError, ParseError, ValidationError
from .geometry import perturb, phi, phi_inverse
from .prevalence import estimate_unstable_measure, probe_scan, scaling_experiment
from .transfer import (
    LaurentTruncation,
    analytic_spectrum,
    autonomous_eigenvalues,
    build_matrix,
    qr_lyapunov,
)

OUT_ENV = "BLASCHKE_LAB_OUT"
DEFAULT_OUT = "blaschke_lab_out"


class Report:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.results: dict[str, Any] = {}
        self.tolerances: dict[str, Any] = {}
        self.tables: dict[str, tuple[list[str], list[list[Any]]]] = {}

    def table(self, name: str, header: list[str], rows: list[list[Any]]) -> None:
        self.tables[name] = (header, rows)


def _num(x):
    if isinstance(x, (complex, np.complexfloating)):
        return [_num(x.real), _num(x.imag)]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "-inf" if x < 0 else "inf"
        return None if math.isnan(x) else x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _cell(x) -> str:
    v = _num(x)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _base_budget(cocycle: BlaschkeCocycle) -> int:
    return 4096 if cocycle.driving.domain_kind == "circle" else 64


def _autonomous(cocycle: BlaschkeCocycle) -> BlaschkeProduct | None:
    nodes = cocycle.driving.grid(32 if cocycle.driving.domain_kind == "circle" else 6)
    first = fiber_map(cocycle, nodes[0])
    return first if all(fiber_map(cocycle, w).same_map(first) for w in nodes[1:]) else None


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def run_spectrum(cfg: ExperimentConfig, rep: Report, workers: int) -> None:
    cocycle = build_cocycle(cfg)
    if cocycle.driving.domain_kind != "circle":
        raise ValidationError("the spectrum experiment needs a circle-rotation preset",
                              module="cli-runner", operation="run_spectrum")
    trunc = LaurentTruncation(cfg.K)
    est = qr_lyapunov(cocycle, cfg.omega0, trunc, m=cfg.m, steps=cfg.steps, burnin=cfg.burnin, seed=cfg.seed)
    lam = lyapunov_lambda(cocycle, "quadrature", _base_budget(cocycle))
    analytic = analytic_spectrum(lam, cfg.m)
    eig = [math.nan] * cfg.m
    auto = _autonomous(cocycle)
    if auto is not None and auto.fixes_origin:
        moduli = autonomous_eigenvalues(auto, trunc)[: cfg.m]
        with np.errstate(divide="ignore"):
            eig = list(np.log(moduli))
    rows = []
    for i in range(cfg.m):
        gap = abs(est.exponents[i] - analytic[i]) if math.isfinite(analytic[i]) else math.nan
        rows.append([i + 1, est.exponents[i], analytic[i], gap, math.sqrt(est.running_variance[i]), eig[i]])
    rep.table("spectrum.csv", ["index", "exponent", "analytic", "abs_gap", "std_error", "eigen_log_modulus"], rows)
    rep.results.update(lyapunov=lam, exponents=list(est.exponents), analytic=list(analytic),
                       max_abs_gap=max((r[3] for r in rows if math.isfinite(r[3])), default=math.nan),
                       autonomous=auto is not None)
    rep.tolerances.update(K=cfg.K, steps=cfg.steps, burnin=cfg.burnin, sample_count=trunc.sample_count)


def _stability_row(cfg, cocycle, label):
    verdict = classify_stability(cocycle, cfg.stability_grid or None, cfg.tolerance)
    adm = admissible(cocycle, cfg.R)
    lam = lyapunov_lambda(cocycle, "quadrature", _base_budget(cocycle), R=cfg.R) if adm else math.nan
    w = complex(verdict.witness_omega)
    return [label, verdict.classification, verdict.essinf_estimate, w.real, w.imag, verdict.exact,
            adm.admissible, adm.r, adm.R, adm.certified, lam], verdict


def run_stability(cfg: ExperimentConfig, rep: Report, workers: int) -> None:
    cocycle = build_cocycle(cfg)
    row, verdict = _stability_row(cfg, cocycle, cfg.preset)
    header = ["preset", "classification", "essinf", "witness_re", "witness_im", "exact", "admissible",
              "r", "R", "certified", "lyapunov"]
    rep.table("stability.csv", header, [row])
    rep.results.update(dict(zip(header, row)))
    if not verdict.exact:
        rep.results["note"] = "field not tagged C1: essinf is an estimate"
    rep.tolerances.update(instability_tolerance=cfg.tolerance, grid=cfg.stability_grid or "default")


def run_prevalence(cfg: ExperimentConfig, rep: Report, workers: int) -> None:
    cocycle = build_cocycle(cfg)
    grid = cfg.omega_grid or None
    rows = []
    if cocycle.driving.domain_kind == "circle":
        fit = scaling_experiment(cocycle, cfg.epsilons, cfg.samples, cfg.seed, workers=workers, grid=grid)
        ests = list(fit.estimates)
        rep.results.update(slope=fit.slope, intercept=fit.intercept)
    else:
        ests = [estimate_unstable_measure(cocycle, e, cfg.samples, cfg.seed, workers=workers, grid=grid)
                for e in (0.0, *cfg.epsilons)]
        rep.results["area_at_zero"] = ests[0].estimate
    for e in ests:
        rows.append([e.epsilon, e.estimate, e.standard_error, e.sample_count, e.seed])
        smooth = e.smooth
    rep.table("measures.csv", ["epsilon", "estimate", "standard_error", "sample_count", "seed"], rows)
    scan = probe_scan(cocycle, cfg.resolution, cfg.seed, grid)
    centres = scan.cell_centres()
    cells = np.argwhere(scan.unstable)
    rep.table("probe_cells.csv", ["row", "col", "centre_re", "centre_im", "witness_re", "witness_im"],
              [[int(r), int(c), centres[r, c].real, centres[r, c].imag, w.real, w.imag]
               for (r, c), w in zip(cells, scan.witnesses)])
    rep.results.update(probe_fraction=scan.fraction, probe_cells=int(cells.shape[0]),
                       resolution=scan.resolution)
    if not smooth:
        rep.results["smoothness_warning"] = "field not tagged C1: no measure-zero verdict"
    rep.tolerances.update(samples=cfg.samples, epsilons=list(cfg.epsilons))


def run_perturb(cfg: ExperimentConfig, rep: Report, workers: int) -> None:
    cocycle = build_cocycle(cfg)
    if cfg.lam is not None:
        lam = complex(cfg.lam)
    else:
        w0 = 0.0 if cfg.lam_omega is None else cfg.lam_omega
        lam = -complex(fiber_map(cocycle, w0).zeros[1])
    rows = []
    for stage, c, l in (("original", cocycle, 0j), ("perturbed", perturb(cocycle, lam), lam)):
        row, _ = _stability_row(cfg, c, stage)
        rows.append([stage, l.real, l.imag, row[1], row[2], row[10]])
    rep.table("perturb.csv", ["stage", "lambda_re", "lambda_im", "classification", "essinf", "lyapunov"], rows)
    rep.results.update(lam=lam, before=rows[0][3], after=rows[1][3], flipped=rows[0][3] != rows[1][3])


def _verify_suites(seed: int) -> list[tuple[str, Callable[[], tuple[bool, str]]]]:
    from .presets import cosine, constant, rotating

    rng = np.random.default_rng(seed)

    def preimage_roundtrip():
        worst = 0.0
        for _ in range(50):
            bp = random_product(rng, int(rng.integers(2, 6)))
            z = np.exp(2j * np.pi * rng.random(16))
            worst = max(worst, float(np.max(np.abs(evaluate(bp, preimages(bp, z)) - z[:, None]))))
        return worst < 1e-10, f"max residual {worst:.2e}"

    def circle_invariance():
        worst = 0.0
        for _ in range(50):
            bp = random_product(rng, int(rng.integers(2, 6)))
            z = np.exp(2j * np.pi * rng.random(64))
            worst = max(worst, float(np.max(np.abs(np.abs(evaluate(bp, z)) - 1))))
        return worst < 1e-12, f"max ||T|-1| {worst:.2e}"

    def admissibility():
        bad = 0
        for _ in range(200):
            bp = random_product(rng, int(rng.integers(2, 6)), fix_origin=True)
            for R in (0.3, 0.5, 0.7):
                M = admissibility_bound(bp.nonorigin_moduli(), R)
                bad += not (circle_max(bp, R, 256) <= M + 1e-12 and M < R)
        return bad == 0, f"{bad} violations"

    def equivariance():
        field = CoefficientField.single(2, lambda w: np.stack([0.1 + 0.05 * np.cos(2 * np.pi * w),
                                                               0.2 + 0 * w], axis=-1).astype(complex),
                                        fixes_origin=False)
        c = BlaschkeCocycle(constant().driving, field)
        w = 0.3
        x, y = pullback_fixed_point(c, w), pullback_fixed_point(c, c.driving.forward(w))
        err = abs(evaluate(fiber_map(c, w), x) - y)
        return err < 1e-10, f"|T(x) - x'| = {err:.2e}"

    def inverse_z_fixed():
        trunc = LaurentTruncation(30)
        e = trunc.basis_vector(-1)
        worst = 0.0
        c = rotating()
        for w in (0.0, 0.2, 0.7):
            m = build_matrix(fiber_map(c, w), trunc)
            worst = max(worst, float(np.max(np.abs(m.entries @ e - e))))
        return worst < 1e-8, f"residual {worst:.2e}"

    def phi_roundtrip():
        z = 0.999 * np.sqrt(rng.random(10**4)) * np.exp(2j * np.pi * rng.random(10**4))
        err = float(np.max(np.abs(phi_inverse(phi(z)) - z)))
        odd = bool(np.all(phi(-z) == -phi(z)))
        return err < 1e-13 and odd, f"round trip {err:.2e}, odd {odd}"

    def perturb_flip():
        c = cosine()
        lam = -complex(fiber_map(c, 0.37).zeros[1])
        before, after = classify_stability(c).classification, classify_stability(perturb(c, lam)).classification
        return before == "Stable" and after == "Unstable", f"{before} -> {after}"

    def reproducibility():
        a = estimate_unstable_measure(rotating(), 0.01, 20_000, seed, grid=4096)
        b = estimate_unstable_measure(rotating(), 0.01, 20_000, seed, grid=4096, workers=2)
        return a == b, f"{a.estimate!r} vs {b.estimate!r}"

    return [("blaschke-core.preimages", preimage_roundtrip), ("blaschke-core.circle", circle_invariance),
            ("blaschke-core.admissibility", admissibility), ("cocycle-engine.equivariance", equivariance),
            ("transfer-operator.inverse_z", inverse_z_fixed), ("phi-geometry.roundtrip", phi_roundtrip),
            ("phi-geometry.perturb_flip", perturb_flip), ("prevalence-lab.reproducible", reproducibility)]


def run_verify(cfg: ExperimentConfig, rep: Report, workers: int) -> None:
    rows = []
    for name, fn in _verify_suites(cfg.seed):
        ok, detail = fn()
        rows.append([name, ok, detail])
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    rep.table("verify.csv", ["suite", "passed", "detail"], rows)
    rep.results.update(passed=sum(r[1] for r in rows), failed=sum(not r[1] for r in rows))


RUNNERS = {"spectrum": run_spectrum, "stability": run_stability, "prevalence": run_prevalence,
           "perturb": run_perturb, "verify": run_verify}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def run(cfg: ExperimentConfig, out_dir: str | os.PathLike, workers: int = 1) -> Report:
    """Run the configured experiment and write its report and tables."""
    if cfg.experiment not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {cfg.experiment!r}", module="cli-runner", operation="run")
    rep = Report(cfg)
    start = time.perf_counter()
    RUNNERS[cfg.experiment](cfg, rep, workers)
    elapsed = time.perf_counter() - start
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in rep.tables.items():
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows([[_cell(x) for x in r] for r in rows])
    doc = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "results": {k: (_num(v) if not isinstance(v, list) else [_num(x) for x in v])
                    for k, v in rep.results.items()},
        "tolerances": rep.tolerances,
        "tables": sorted(rep.tables),
        "version": __version__,
        "wall_clock_seconds": elapsed,
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return rep


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blaschke-lab", description="Blaschke product cocycle experiments")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("--workers", type=int, default=1, help="worker threads for Monte Carlo runs")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    return p


def _fail(err: BlaschkeLabError) -> int:
    print(f"error: {type(err).__name__} in {err.where()}: {err}", file=sys.stderr)
    return err.exit_code


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.config:
            try:
                text = Path(args.config).read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                raise ParseError(f"cannot read {args.config}: {exc}", module="cli-runner",
                                 operation="main") from None
            cfg = parse_config(text)
        else:
            cfg = ExperimentConfig()
        if cfg.experiment is not None and cfg.experiment != args.experiment:
            raise ValidationError(f"config is for '{cfg.experiment}', command is '{args.experiment}'",
                                  module="cli-runner", operation="main")
        cfg.experiment = args.experiment
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ValidationError("--seed must fit in an unsigned 64-bit integer", module="cli-runner",
                                      operation="main")
            cfg.seed = args.seed
        if args.workers < 1:
            raise ValidationError("--workers must be positive", module="cli-runner", operation="main")
        out = args.out or cfg.out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT
        rep = run(cfg, out, args.workers)
    except ConfigError as err:
        if isinstance(err, ValidationError) and len(err.problems) > 1:
            for p in err.problems:
                print(f"  {p}", file=sys.stderr)
        return _fail(err)
    except BlaschkeLabError as err:
        return _fail(err)
    if cfg.experiment == "verify" and rep.results.get("failed"):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
