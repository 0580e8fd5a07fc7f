"""Saturating benchmark: MLP sweep plus legacy-baseline cost comparison.

Sweeps the one-hidden-node MLP over a nine-point lambda grid with the
weighted Levenberg-Marquardt solver, reports the selected model against the
lambda = 0 black-box fit, then reruns the same grid with the legacy
genetic-algorithm baseline (fixed-horizon static cost) and writes a timing
and evaluation-count comparison.  The baseline run dominates the wall time.
"""

import argparse
import json
import time
from pathlib import Path

import greybox as gb
from greybox.data import write_table
from greybox.sweep import score_free_run, write_sweep_csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="results/example2")
    parser.add_argument("--skip-baseline", action="store_true",
                        help="skip the slow genetic-algorithm rerun")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    zd, zt, zs, zv = gb.make_example2_datasets(args.seed)
    structure = gb.example_structure("example2")
    grid = gb.LambdaGrid.linspace(0.1, 0.9, 9)
    lm = gb.LmConfig(max_iterations=60, n_starts=3)

    t0 = time.perf_counter()
    points = gb.run_sweep(
        structure, zd, zt, zs, grid,
        gb.TrainConfig(algorithm="weighted_lm", lm=lm), zv=zv,
    )
    lm_wall = time.perf_counter() - t0
    write_sweep_csv(out / "sweep.csv", points)
    write_sweep_csv(out / "pareto.csv", gb.pareto_front(points))

    print(f"seed {args.seed}: {zd.sample_count} training samples, "
          f"{zs.n_pairs} steady-state pairs")
    print(f"{'lambda':>7} {'j_d':>12} {'j_s_hat':>12} {'rmse_zt':>10} {'rmse_zv':>10}")
    for p in points:
        print(f"{p.lam:7.2f} {p.j_d:12.4e} {p.j_s_hat:12.4e} "
              f"{p.rmse_zt:10.4f} {p.rmse_zv:10.4f}")

    blackbox, _ = gb.fit_weighted_lm(structure, zd, None, 0.0, lm, init_seed=0)
    bb_rmse, bb_diverged, _ = score_free_run(blackbox, zv)
    chosen = gb.decide_min_rmse_zt(points)
    print(f"\nblack-box (lambda=0) validation rmse: {bb_rmse:.4f}"
          + (" [diverged]" if bb_diverged else ""))
    print(f"min test rmse pick:    lambda={chosen.lam:.2f} "
          f"validation rmse {chosen.rmse_zv:.4f} "
          f"(ratio {chosen.rmse_zv / bb_rmse:.3f})")
    with open(out / "model_min_rmse_zt.json", "w") as fh:
        json.dump(chosen.model, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if args.skip_baseline:
        print(f"\nartifacts in {out}")
        return

    print("\nrunning the genetic-algorithm baseline sweep (same grid) ...")
    horizon = 15
    t0 = time.perf_counter()
    ga_points = gb.run_sweep(
        structure, zd, None, zs, grid,
        gb.TrainConfig(algorithm="ga_legacy", ga=gb.GaConfig()),
        fp_config=gb.FixedPointConfig(fixed_horizon=horizon),
    )
    ga_wall = time.perf_counter() - t0
    lm_evals = sum(p.eval_count for p in points)
    ga_evals = sum(p.eval_count for p in ga_points)
    write_table(
        out / "baseline_comparison.csv",
        ["method", "wall_s", "model_evaluations"],
        [
            ["weighted_lm", "ga_legacy"],
            [lm_wall, ga_wall],
            [str(lm_evals), str(ga_evals)],
        ],
    )
    print(f"weighted lm sweep: {lm_wall:8.2f}s  {lm_evals:>12} model evaluations")
    print(f"ga baseline sweep: {ga_wall:8.2f}s  {ga_evals:>12} model evaluations")
    print(f"wall-time ratio: {ga_wall / lm_wall:.1f}x, "
          f"evaluation ratio: {ga_evals / lm_evals:.1f}x")
    print(f"\nartifacts in {out}")


if __name__ == "__main__":
    main()
