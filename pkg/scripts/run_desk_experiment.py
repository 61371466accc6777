"""Run the desk experiment end to end for one or more seeds and print a summary.

    python3 scripts/run_desk_experiment.py --out runs/desk --seeds 0 1 2
"""
import argparse
import dataclasses
import json
from pathlib import Path

from sharpshooter.config import desk_config, load_config
from sharpshooter.pipeline import run_command


def summarize(out: Path) -> dict:
    training = json.loads((out / "reports" / "training.json").read_text())
    metrics = {m["method"]: m for m in json.loads((out / "reports" / "metrics.json").read_text())["methods"]}
    timing = json.loads((out / "timing" / "summary.json").read_text())
    return {
        "auc": training["classifier"]["test_auc"],
        "proj_prob": training["tvae"]["avg_projected_base_prob"],
        "validity": {m: r["validity"] for m, r in metrics.items()},
        "classifier_shift": {m: r["classifier_shift"] for m, r in metrics.items()},
        "speedup": {m: timing[m] / timing["ss-line"] for m in timing if m != "ss-line"},
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="experiment JSON (default: built-in desk config)")
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    base = load_config(args.config) if args.config else desk_config()
    for seed in args.seeds:
        out = Path(args.out) / f"seed{seed}"
        run_command("all", dataclasses.replace(base, seed=seed), out, jobs=args.jobs)
        s = summarize(out)
        print(f"seed {seed}: auc={s['auc']:.3f} projected-base p={s['proj_prob']:.3f}")
        print("  validity  " + "  ".join(f"{m}={v:.3f}" for m, v in s["validity"].items()))
        print("  CS        " + "  ".join(f"{m}={v:.4f}" if v is not None else f"{m}=-"
                                         for m, v in s["classifier_shift"].items()))
        print("  slower than ss-line by  " + "  ".join(f"{m}=x{v:.0f}" for m, v in s["speedup"].items()))
        print((out / "timing" / "table.txt").read_text())


if __name__ == "__main__":
    main()
