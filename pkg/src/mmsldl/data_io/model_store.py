"""Save and load trained ModelBundles as directory archives."""
from __future__ import annotations

import numpy as np

from ..classifier import ClassNoiseStats, RidgeClassifier
from ..config import Hyperparams
from ..errors import ArchiveError
from ..slrdl import Dictionary, IdealCode
from ..trainer import N_MODALITIES, ModelBundle
from .archive import read_archive, read_manifest, write_archive

KIND = "mmsldl-model"


def _bundle_matrices(bundle):
    mats = {"Q": bundle.ideal_code.Q}
    for K in range(N_MODALITIES):
        k = K + 1
        mats[f"D{k}"] = bundle.dictionaries[K].atoms
        mats[f"Z{k}_train"] = bundle.train_codes[K]
        mats[f"E{k}_train"] = bundle.train_errors[K]
        r = bundle.ridge[K]
        mats[f"W{k}_hat"] = r.W_hat
        mats[f"H{k}"] = r.H
        mats[f"Q{k}_score"] = r.Q_score
        if bundle.joint_codes is not None:
            mats[f"Z{k}_joint"] = bundle.joint_codes[K]
        for c, st in enumerate(bundle.class_stats[K]):
            mats[f"L{k}_c{c}"] = st.L
            mats[f"Sbar{k}_c{c}"] = st.S_bar
            mats[f"basis{k}_c{c}"] = st.basis
    return mats


def save_model(bundle, path, extra=None):
    """Write ``bundle`` to directory ``path``. ``extra`` lands verbatim in the manifest."""
    diag = bundle.diagnostics or {}
    manifest = {
        "kind": KIND,
        "hyperparams": bundle.hyperparams.to_dict(),
        "label_map": list(bundle.label_map),
        "per_class_counts": list(bundle.ideal_code.per_class_counts),
        "class_offsets": [list(D.class_offsets) for D in bundle.dictionaries],
        "lambda_ridge": [r.lambda_ridge for r in bundle.ridge],
        "rpca_converged": [[bool(st.converged) for st in stats] for stats in bundle.class_stats],
        "has_joint_codes": bundle.joint_codes is not None,
        "diagnostics": {
            # runtimes stay out so that identical runs give identical archives
            "all_coding_converged": bool(diag.get("all_coding_converged", True)),
        },
    }
    if extra:
        manifest.update(extra)
    return write_archive(path, manifest, _bundle_matrices(bundle))


def load_model(path):
    doc, mats = read_archive(path)
    if doc.get("kind") != KIND:
        raise ArchiveError(f"{path} does not hold a model archive (kind={doc.get('kind')!r})")
    counts = tuple(doc["per_class_counts"])
    C = len(doc["label_map"])
    dicts, codes, errs, ridge, stats, joint = [], [], [], [], [], []
    for K in range(N_MODALITIES):
        k = K + 1
        dicts.append(Dictionary(mats[f"D{k}"], tuple(doc["class_offsets"][K])))
        codes.append(mats[f"Z{k}_train"])
        errs.append(mats[f"E{k}_train"])
        ridge.append(RidgeClassifier(mats[f"W{k}_hat"], mats[f"H{k}"], doc["lambda_ridge"][K], mats[f"Q{k}_score"]))
        if doc["has_joint_codes"]:
            joint.append(mats[f"Z{k}_joint"])
        stats.append([
            ClassNoiseStats(
                L=mats[f"L{k}_c{c}"],
                S_bar=mats[f"Sbar{k}_c{c}"][:, 0],
                basis=mats[f"basis{k}_c{c}"],
                converged=doc["rpca_converged"][K][c],
            )
            for c in range(C)
        ])
    return ModelBundle(
        dictionaries=dicts,
        train_codes=codes,
        train_errors=errs,
        ideal_code=IdealCode(mats["Q"], counts),
        ridge=ridge,
        class_stats=stats,
        hyperparams=Hyperparams.from_dict(doc["hyperparams"]),
        label_map=doc["label_map"],
        joint_codes=joint or None,
        diagnostics=dict(doc["diagnostics"]),
    )


def model_manifest(path):
    return read_manifest(path)


def bundles_equal(a, b):
    """Bit-level equality of every matrix stored for two bundles."""
    ma, mb = _bundle_matrices(a), _bundle_matrices(b)
    if ma.keys() != mb.keys():
        return False
    for name in ma:
        x = np.asarray(ma[name], dtype=float)
        y = np.asarray(mb[name], dtype=float)
        if x.shape != y.shape or x.tobytes() != y.tobytes():
            return False
    return True
