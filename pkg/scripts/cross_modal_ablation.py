"""Two-modality fusion against a modality-2-only model on cross-modal synthetic data."""
import argparse

import numpy as np

from mmsldl.classifier import candidate_label
from mmsldl.config import Hyperparams
from mmsldl.data_io import plant_sparse_corruption, split_indices, synth_multimodal
from mmsldl.trainer import code_samples, predict, train, train_single_modality


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--overlap", type=float, default=0.995)
    ap.add_argument("--corruption", type=float, default=0.3)
    ap.add_argument("--repeats", type=int, default=10)
    ap.add_argument("--dim", type=int, default=256)
    args = ap.parse_args()
    h = Hyperparams()
    wins = 0
    fused_all, mod2_all = [], []
    for r in range(args.repeats):
        s = synth_multimodal(5, 20, args.dim, 3, seed=100 + r, cross_modal_overlap=args.overlap)
        tr, ts = split_indices(s.labels, 10, seed=r)
        rng = np.random.default_rng(1000 + r)
        X1 = plant_sparse_corruption(s.X1[:, tr], args.corruption, rng)[0]
        X2 = plant_sparse_corruption(s.X2[:, tr], args.corruption, rng)[0]
        m = train(X1, X2, s.labels[tr], h)
        fused = np.mean(predict(m, s.X1[:, ts], s.X2[:, ts]).labels == s.labels[ts])
        D, ridge, _ = train_single_modality(X2, s.labels[tr], h)
        Z, _ = code_samples(s.X2[:, ts], D, h)
        mod2 = np.mean([candidate_label(ridge, Z[:, i])[0] == s.labels[ts][i] for i in range(Z.shape[1])])
        wins += fused > mod2
        fused_all.append(fused)
        mod2_all.append(mod2)
        print(f"repeat {r}: fused {100 * fused:.2f}%  modality 2 only {100 * mod2:.2f}%", flush=True)
    print(f"mean fused {100 * np.mean(fused_all):.2f}%  mean modality 2 {100 * np.mean(mod2_all):.2f}%  "
          f"fused strictly better on {wins}/{args.repeats}")


if __name__ == "__main__":
    main()
