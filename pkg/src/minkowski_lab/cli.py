"""``minkowski-lab`` command line: theory curves, ensembles, comparisons and self-checks.

Exit codes: 0 success, 1 invalid input or configuration, 2 a check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .excursion import ec_curve_sweep, mean_curves, mf2d_curves
from .fields import dump_field, sample_model_field
from .geometry import lk_rectangle, mc_tube_volume, steiner_tube_volume
from .theory import LEVELS, expected_ec, expected_lk_excursion, ec_density

log = logging.getLogger("minkowski_lab")

HEADER = f"# minkowski-lab v{__version__} schema=1"
EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 1, 2


class InputError(Exception):
    """Bad user input that is not a configuration problem (files, grids)."""


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, comments: list[str], header: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write(HEADER + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([x if isinstance(x, str) else _fmt(x) for x in r])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue())
    except OSError as e:
        raise InputError(f"cannot write {path}: {e}") from None


def read_csv(path) -> tuple[list[str], list[dict[str, str]]]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from None
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# minkowski-lab"):
        raise InputError(f"{path}: missing minkowski-lab header line")
    comments = [ln[2:] for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body:
        raise InputError(f"{path}: no column header")
    rows = list(csv.DictReader(body))
    for i, r in enumerate(rows):
        if None in r or any(v is None for v in r.values()):
            raise InputError(f"{path}: malformed row {i + 1}")
    return comments, rows


def _floats(rows, key, path) -> np.ndarray:
    try:
        return np.array([float(r[key]) for r in rows])
    except (KeyError, ValueError):
        raise InputError(f"{path}: column {key!r} missing or not numeric") from None


# ---------------------------------------------------------------------------
# theory

def theory_rows(cfg: ExperimentConfig):
    c = cfg.theory_cumulants()
    lk = cfg.lk
    v = cfg.v_grid()
    n = cfg.n
    for level in LEVELS:
        cols = [np.broadcast_to(expected_ec(lk, v, c, level), v.shape)]
        cols += [np.broadcast_to(expected_lk_excursion(k, lk, v, c, level), v.shape) for k in range(n + 1)]
        cols += [np.broadcast_to(ec_density(d, v, c, level), v.shape) for d in range(n + 1)]
        for i, vi in enumerate(v):
            yield [level, vi] + [col[i] for col in cols]


def cmd_theory(cfg: ExperimentConfig, out: Path) -> int:
    n = cfg.n
    header = ["level", "v", "E_chi"] + [f"E_LK_{k}" for k in range(n + 1)] + [f"Xi_{d}" for d in range(n + 1)]
    c = cfg.theory_cumulants()
    comments = [
        "raw expected counts on the box with edges " + " x ".join(_fmt(e) for e in cfg.extents),
        "cumulants " + " ".join(f"{k}={_fmt(val)}" for k, val in c.as_dict().items()),
        f"source {'config' if cfg.cumulants is not None else 'model kernel=' + cfg.kernel}",
    ]
    path = out / "theory.csv"
    write_csv(path, comments, header, theory_rows(cfg))
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _realize(args):
    cfg_text, index, dump_dir = args
    cfg = ExperimentConfig.from_ini(cfg_text)
    seed = np.random.SeedSequence([cfg.base_seed, index])
    z = sample_model_field(cfg.shape, cfg.spacing, cfg.model, seed)
    v = cfg.v_grid()
    if dump_dir is not None:
        dump_field(Path(dump_dir) / f"field_{index:05d}.bin", z)
    if cfg.n == 2:
        area, half, chi = mf2d_curves(z, v)
        return chi.astype(float), area, half
    return np.asarray(ec_curve_sweep(z)(v), dtype=float), None, None


def run_ensemble(cfg: ExperimentConfig, jobs: int = 1, dump_dir: Path | None = None):
    """Per-realization curves, in index order, independent of ``jobs``."""
    text = cfg.to_ini()
    tasks = [(text, i, str(dump_dir) if dump_dir is not None and i < cfg.dump_fields else None)
             for i in range(cfg.count)]
    if jobs <= 1:
        results = [_realize(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_realize, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    chi = np.array([r[0] for r in results])
    if cfg.n == 2:
        return chi, np.array([r[1] for r in results]), np.array([r[2] for r in results])
    return chi, None, None


def _mean_se(rows: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if rows.shape[0] == 1:
        return rows[0], np.zeros(v.size)
    t = mean_curves(rows, v)
    return t[:, 1], t[:, 2]


def cmd_simulate(cfg: ExperimentConfig, out: Path, jobs: int) -> int:
    dump_dir = out / "fields" if cfg.dump_fields else None
    if dump_dir is not None:
        try:
            dump_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise InputError(f"cannot create {dump_dir}: {e}") from None
    chi, area, half = run_ensemble(cfg, jobs, dump_dir)
    v = cfg.v_grid()
    m, se = _mean_se(chi, v)
    cols = [v, m, se]
    header = ["v", "chi_mean", "chi_se"]
    if area is not None:
        for name, arr in (("area", area), ("half_boundary", half)):
            mm, ss = _mean_se(arr, v)
            cols += [mm, ss]
            header += [f"{name}_mean", f"{name}_se"]
    comments = [
        f"count={cfg.count} base_seed={cfg.base_seed} shape={'x'.join(map(str, cfg.shape))} "
        f"extents={' x '.join(_fmt(e) for e in cfg.extents)}",
        f"g={_fmt(cfg.g)} tau={_fmt(cfg.tau)} delta={_fmt(cfg.delta)} n={cfg.n}",
    ]
    path = out / "sim.csv"
    write_csv(path, comments, header, zip(*cols))
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare

def z_scores(sim_mean, sim_se, theory) -> np.ndarray:
    diff = np.asarray(sim_mean, float) - np.asarray(theory, float)
    se = np.asarray(sim_se, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, diff / np.where(se > 0, se, 1), np.where(diff == 0, 0.0, np.sign(diff) * np.inf))
    return z


def compare_tables(theory_path, sim_path) -> dict:
    _, trows = read_csv(theory_path)
    _, srows = read_csv(sim_path)
    if not trows or "level" not in trows[0]:
        raise InputError(f"{theory_path}: not a theory table")
    sim_is_theory = bool(srows) and "level" in srows[0]
    report = {"theory": str(theory_path), "sim": str(sim_path), "levels": {}}
    for level in LEVELS:
        tl = [r for r in trows if r["level"] == level]
        if not tl:
            continue
        tv = _floats(tl, "v", theory_path)
        th = _floats(tl, "E_chi", theory_path)
        if sim_is_theory:
            sl = [r for r in srows if r["level"] == level]
            sv, sm, ss = _floats(sl, "v", sim_path), _floats(sl, "E_chi", sim_path), np.zeros(len(sl))
        else:
            sv = _floats(srows, "v", sim_path)
            sm, ss = _floats(srows, "chi_mean", sim_path), _floats(srows, "chi_se", sim_path)
        if sv.shape != tv.shape or not np.allclose(sv, tv, rtol=0, atol=1e-9):
            raise InputError("threshold grids of the two tables differ")
        z = z_scores(sm, ss, th)
        # a threshold with zero spread carries no scale for the discrepancy sum
        informative = ss > 0
        report["levels"][level] = {
            "v": tv.tolist(),
            "z": [float(x) for x in z],
            "sum_z2": float(np.sum(z[informative] ** 2)),
            "zero_se": int(np.sum(~informative)),
            "outside_4se": int(np.sum(np.abs(z) > 4)),
        }
    return report


def ordering_verdict(report: dict, min_gain: float = 0.2) -> tuple[bool, str]:
    """Full correction no worse than skewness, skewness no worse than none and better by ``min_gain``."""
    s = {k: report["levels"][k]["sum_z2"] for k in LEVELS}
    g, sk, full = s["gaussian"], s["skewness"], s["skewness+kurtosis"]
    ok = full <= sk <= g and sk <= (1 - min_gain) * g
    return ok, f"sum z^2: gaussian={g:.3f} skewness={sk:.3f} skewness+kurtosis={full:.3f}"


def band_verdict(report: dict, level: str, max_outside: int = 1) -> tuple[bool, str]:
    r = report["levels"][level]
    n_out = r["outside_4se"]
    return n_out <= max_outside, f"{level}: {len(r['v']) - n_out}/{len(r['v'])} thresholds within 4 SE"


def cmd_compare(theory_path, sim_path, out: Path, check: str | None) -> int:
    report = compare_tables(theory_path, sim_path)
    rows = []
    for level, r in report["levels"].items():
        for vi, zi in zip(r["v"], r["z"]):
            rows.append([level, vi, zi])
    write_csv(out / "compare.csv",
              ["z = (simulated mean - theory) / standard error; raw expected counts"],
              ["level", "v", "z"], rows)
    verdict = {"pass": True, "checks": []}
    if check == "ordering":
        ok, msg = ordering_verdict(report)
        verdict["checks"].append({"name": "ordering", "pass": ok, "detail": msg})
    elif check is not None:
        if check not in LEVELS:
            raise InputError(f"--check must be 'ordering' or a level name, got {check!r}")
        ok, msg = band_verdict(report, check)
        verdict["checks"].append({"name": f"band:{check}", "pass": ok, "detail": msg})
    verdict["pass"] = all(c["pass"] for c in verdict["checks"])
    verdict["sum_z2"] = {k: r["sum_z2"] for k, r in report["levels"].items()}
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2, sort_keys=True) + "\n")
    for level, r in report["levels"].items():
        print(f"{level:>18s}  sum z^2 = {r['sum_z2']:.4g}  outside 4 SE: {r['outside_4se']}"
              f"  zero-SE thresholds: {r['zero_se']}")
    for c in verdict["checks"]:
        print(("PASS " if c["pass"] else "FAIL ") + c["name"] + ": " + c["detail"])
    return EXIT_OK if verdict["pass"] else EXIT_CHECK


# ---------------------------------------------------------------------------
# identities

def identity_battery(fault: str | None = None, goe_samples: int = 100_000):
    """Yield ``(check id, passed)`` for the exact matrix identities and the GOE check.

    ``fault="a1-sign"`` flips the sign of one side of the first identity so the
    harness can prove it reports failures.
    """
    from . import jets

    betas = (Fraction(0), Fraction(1, 3), Fraction(-1, 5))
    gammas = (Fraction(1, 2), Fraction(1), Fraction(3))
    multisets = jets.cycle_multisets(4)
    for n in (1, 2, 3):
        for cyc in multisets:
            if fault == "a1-sign":
                ok = all(jets.hermite_det_lhs(n, cyc, x) == -jets.hermite_det_rhs(n, cyc, x)
                         for x in jets.sample_points(n))
            else:
                ok = jets.verify_lemma_a1(n, cyc)
            yield f"hermite_det n={n} cycles={cyc}", ok
    for n in (1, 2, 3):
        for cyc in multisets:
            for b in betas:
                yield f"hermite_det_deformed n={n} beta={b} cycles={cyc}", jets.verify_lemma_a2(n, b, cyc)
    for n in (1, 2, 3):
        for cyc in multisets:
            for b in betas:
                for g in gammas:
                    yield (f"hessian_det n={n} gamma={g} beta={b} cycles={cyc}",
                           jets.verify_prop31(n, g, b, cyc))
    for K in (2, 3):
        for n in (2, 3):
            for cyc in ((), (1,), (2,)):
                yield (f"loop_annihilation K={K} n={n} cycles={cyc}",
                       jets.verify_loop_annihilation(n, Fraction(1), Fraction(1, 3), K, cyc))
    from .hermite import hermite
    for n in (1, 2, 3):
        for x in (0.0, 1.0, 2.0):
            mean, se = jets.goe_hermite_mc(n, x, samples=goe_samples, seed=1000 * n + int(x))
            yield f"goe_mc n={n} x={x:g}", abs(mean - hermite(n, x)) < 4 * se


def cmd_identities(out: Path | None, fault: str | None) -> int:
    failures = 0
    lines = []
    for name, ok in identity_battery(fault):
        lines.append(("PASS " if ok else "FAIL ") + name)
        failures += not ok
        if not ok:
            print(lines[-1])
    summary = f"{len(lines) - failures}/{len(lines)} identity checks passed"
    print(summary)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "identities.txt").write_text("\n".join(lines + [summary]) + "\n")
    return EXIT_OK if failures == 0 else EXIT_CHECK


# ---------------------------------------------------------------------------
# tube check

def cmd_tube_check(out: Path | None, seed: int, samples: int = 1_000_000) -> int:
    boxes = {1: (1.3,), 2: (1.0, 0.6), 3: (1.0, 0.7, 0.4)}
    rows, bad = [], 0
    for n, edges in boxes.items():
        lk = lk_rectangle(edges)
        for rho in (0.1, 0.5, 1.0):
            exact = steiner_tube_volume(lk, rho)
            est, se = mc_tube_volume(edges, rho, samples=samples, seed=seed + 10 * n + int(rho * 10))
            ok = abs(est - exact) < 4 * se
            bad += not ok
            rows.append([n, rho, exact, est, se, "pass" if ok else "fail"])
            print(f"{'PASS' if ok else 'FAIL'} n={n} rho={rho:g} steiner={exact:.6f} mc={est:.6f} se={se:.2e}")
    if out is not None:
        write_csv(out / "tube_check.csv", [f"boxes {boxes}"], ["n", "rho", "steiner", "mc", "mc_se", "verdict"], rows)
    return EXIT_OK if bad == 0 else EXIT_CHECK


# ---------------------------------------------------------------------------
# plot data

def cmd_plotdata(theory_path, sim_path, out: Path) -> int:
    import matplotlib

    matplotlib.use("Agg")
    # fixed salt keeps generated SVG ids, and so the file bytes, stable across runs
    matplotlib.rcParams["svg.hashsalt"] = "minkowski-lab"
    import matplotlib.pyplot as plt

    _, trows = read_csv(theory_path)
    if not trows or "level" not in trows[0]:
        raise InputError(f"{theory_path}: not a theory table")
    styles = {"gaussian": ":", "skewness": "-.", "skewness+kurtosis": "--"}
    fig, ax = plt.subplots(figsize=(6, 4))
    cols: dict[str, np.ndarray] = {}
    for level in LEVELS:
        tl = [r for r in trows if r["level"] == level]
        if not tl:
            continue
        v = _floats(tl, "v", theory_path)
        y = _floats(tl, "E_chi", theory_path)
        cols["v"] = v
        cols[level] = y
        ax.plot(v, y, styles[level], marker="." if v.size == 1 else None, label=level)
    if sim_path is not None:
        _, srows = read_csv(sim_path)
        if srows:
            sv = _floats(srows, "v", sim_path)
            sm, ss = _floats(srows, "chi_mean", sim_path), _floats(srows, "chi_se", sim_path)
            ax.plot(sv, sm, "-", color="k", marker="." if sv.size == 1 else None, label="simulation")
            ax.fill_between(sv, sm - ss, sm + ss, color="0.7", alpha=0.6, linewidth=0)
            if "v" in cols and sv.shape == cols["v"].shape:
                cols["sim_mean"], cols["sim_se"] = sm, ss
    ax.set_xlabel("threshold v")
    ax.set_ylabel("Euler characteristic")
    ax.legend(frameon=False)
    fig.tight_layout()
    out.mkdir(parents=True, exist_ok=True)
    svg = out / "ec_curves.svg"
    # fixed metadata keeps the file byte-stable across runs
    fig.savefig(svg, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    keys = list(cols)
    with open(out / "ec_curves.dat", "w") as fh:
        fh.write("# " + " ".join(keys) + "\n")
        for i in range(len(cols.get("v", []))):
            fh.write(" ".join(_fmt(cols[k][i]) for k in keys) + "\n")
    print(f"wrote {svg}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI experiment file")
    common.add_argument("--seed", type=int, help="override the ensemble base seed")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="minkowski-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"minkowski-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("theory", parents=[common], help="expected EC and LK curves at all correction levels")
    sub.add_parser("simulate", parents=[common], help="run the lattice ensemble")
    c = sub.add_parser("compare", parents=[common], help="z-scores of simulation against theory")
    c.add_argument("theory_csv", type=Path)
    c.add_argument("sim_csv", type=Path)
    c.add_argument("--check", help="'ordering' or a level name for the 4 SE band test")
    i = sub.add_parser("identities", parents=[common], help="exact matrix identity battery and GOE check")
    i.add_argument("--inject-fault", choices=["a1-sign"], help="self-test: corrupt one identity")
    sub.add_parser("tube-check", parents=[common], help="Monte Carlo check of the Steiner tube formula")
    pl = sub.add_parser("plotdata", parents=[common], help="SVG overlay and gnuplot columns")
    pl.add_argument("theory_csv", type=Path)
    pl.add_argument("sim_csv", type=Path, nargs="?")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg = cfg.with_overrides(base_seed=args.seed)
        out = args.out if args.out is not None else Path(cfg.out_dir)
        if args.jobs < 1:
            raise ConfigError("--jobs: must be >= 1")
        if args.command == "theory":
            return cmd_theory(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.jobs)
        if args.command == "compare":
            out.mkdir(parents=True, exist_ok=True)
            return cmd_compare(args.theory_csv, args.sim_csv, out, args.check)
        if args.command == "identities":
            return cmd_identities(args.out, args.inject_fault)
        if args.command == "tube-check":
            return cmd_tube_check(args.out, cfg.base_seed)
        if args.command == "plotdata":
            return cmd_plotdata(args.theory_csv, args.sim_csv, out)
    except (ConfigError, InputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    parser.error(f"unknown command {args.command}")
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
