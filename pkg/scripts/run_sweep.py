"""Sweep beta against latent size (or w_cat) for the TVAE or UVAE and print the Pareto front.

    python3 scripts/run_sweep.py --out runs/sweep --axis latent_dim --values 1 2 3
"""
import argparse
import csv
import dataclasses
from pathlib import Path

from sharpshooter.config import SweepConfig, desk_config, load_config
from sharpshooter.pipeline import run_command


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="runs/sweep")
    ap.add_argument("--betas", type=float, nargs="+")
    ap.add_argument("--values", type=float, nargs="+")
    ap.add_argument("--axis", choices=["latent_dim", "w_cat"])
    ap.add_argument("--role", choices=["target", "unified"])
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else desk_config()
    changes = {k: v for k, v in dict(betas=args.betas, values=args.values, axis=args.axis,
                                     role=args.role, epochs=args.epochs).items() if v is not None}
    sweep_cfg = SweepConfig(**{**dataclasses.asdict(cfg.sweep), **changes})
    cfg = dataclasses.replace(cfg, sweep=sweep_cfg)

    out = Path(args.out)
    if not (out / "models" / "classifier.json").exists():
        run_command("gen-data", cfg, out)
        run_command("train", cfg, out)
    run_command("sweep", cfg, out, jobs=args.jobs)

    with open(out / "sweep" / "sweep.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    axis = sweep_cfg.axis
    print(f"{'beta':>6} {axis:>10} {'mse':>8} {'kld':>8} {'proj p':>7}  front")
    for r in rows:
        if r["diverged"] == "1":
            print(f"{float(r['beta']):6.3g} {float(r[axis]):10.3g}  diverged")
            continue
        mark = "*" if r["on_front"] == "1" else ""
        print(f"{float(r['beta']):6.3g} {float(r[axis]):10.3g} {float(r['mse']):8.4f} "
              f"{float(r['kld']):8.4f} {float(r['avg_proj_prob']):7.3f}  {mark}")


if __name__ == "__main__":
    main()
