from .archive import read_archive, read_manifest, write_archive
from .images import DatasetManifest, LabeledDataset, build_manifest, decode_image, images_to_views, load_dataset
from .model_store import bundles_equal, load_model, save_model
from .occlusion import block_side, covered_fraction, occlude
from .splits import split_indices, split_train_test, stratified_folds
from .synthetic import SyntheticData, dump_synthetic, load_synthetic, plant_sparse_corruption, synth_multimodal
