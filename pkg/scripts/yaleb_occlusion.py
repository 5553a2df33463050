"""Recognition rate against occlusion fraction on an Extended YaleB tree (root/<subject>/*.pgm).

    python3 scripts/yaleb_occlusion.py /data/CroppedYale --patches tests/patches
"""
import argparse
from pathlib import Path

from mmsldl.cli import run_eval
from mmsldl.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root")
    ap.add_argument("--patches", default=str(Path(__file__).resolve().parents[1] / "tests" / "patches"))
    ap.add_argument("--fractions", default="0.2,0.3,0.4,0.5,0.6")
    ap.add_argument("--train-per-class", type=int, default=32)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out", default="yaleb_runs")
    args = ap.parse_args()
    for f in (float(x) for x in args.fractions.split(",")):
        cfg = RunConfig(command="eval", dataset=args.root, out=str(Path(args.out) / f"occ{f:g}"))
        cfg.modality.height, cfg.modality.width = 32, 32
        cfg.split.train_per_class = args.train_per_class
        cfg.split.repeats = args.repeats
        cfg.occlusion.fraction = f
        cfg.occlusion.patch_dir = args.patches
        print(f"occlusion {f:.0%}: {run_eval(cfg)['recognition_rate']:.2f}%", flush=True)


if __name__ == "__main__":
    main()
