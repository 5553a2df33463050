"""Fused recognition rate on the planted-corruption synthetic benchmark.

    python3 scripts/synthetic_benchmark.py --repeats 10 --corruption 0.3
"""
import argparse
import time

import numpy as np

from mmsldl.config import Hyperparams
from mmsldl.data_io import plant_sparse_corruption, split_indices, synth_multimodal
from mmsldl.trainer import predict, train


def one_run(seed, args, h):
    s = synth_multimodal(args.classes, 2 * args.train_per_class, args.dim, args.rank,
                         seed=100 + seed, cross_modal_overlap=args.overlap)
    tr, ts = split_indices(s.labels, args.train_per_class, seed=seed)
    rng = np.random.default_rng(1000 + seed)
    X1 = plant_sparse_corruption(s.X1[:, tr], args.corruption, rng)[0]
    X2 = plant_sparse_corruption(s.X2[:, tr], args.corruption, rng)[0]
    m = train(X1, X2, s.labels[tr], h)
    pred = predict(m, s.X1[:, ts], s.X2[:, ts])
    return np.mean(pred.labels == s.labels[ts])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--classes", type=int, default=5)
    ap.add_argument("--train-per-class", type=int, default=10)
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--rank", type=int, default=3)
    ap.add_argument("--corruption", type=float, default=0.3)
    ap.add_argument("--overlap", type=float, default=0.0)
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--alpha", type=float, default=Hyperparams.alpha)
    ap.add_argument("--lam", type=float, default=Hyperparams.lam)
    args = ap.parse_args()
    h = Hyperparams(alpha=args.alpha, lam=args.lam)
    t0 = time.perf_counter()
    accs = []
    for r in range(args.repeats):
        accs.append(one_run(r, args, h))
        print(f"repeat {r}: {100 * accs[-1]:.2f}%", flush=True)
    print(f"mean {100 * np.mean(accs):.2f}%  std {100 * np.std(accs):.2f}  ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
