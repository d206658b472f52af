"""Train the detector head on a toy corpus and probe its robustness.

A scaled-down version of the end-to-end acceptance experiment: fewer
images and epochs, 128-pixel crops, so it finishes in about a minute.
"""
# %%
import tempfile
from pathlib import Path

from sidforge.classifier import TrainConfig, train
from sidforge.features import Extractor, ExtractorKind
from sidforge.harness import evaluate, load_dataset, make_toy_corpus
from sidforge.perturb import PerturbSpec
from sidforge.transforms import AugmentConfig

work = Path(tempfile.mkdtemp(prefix="sidforge-demo-"))
make_toy_corpus(work / "train", 40, seed=1, size=128)
make_toy_corpus(work / "test", 15, seed=2, size=128)
train_ds, test_ds = load_dataset(work / "train"), load_dataset(work / "test")
print(len(train_ds), "training and", len(test_ds), "test images")

# %%
cfg = TrainConfig(epochs=6)
runs = {
    "dwt_hh + augmentation": (Extractor(ExtractorKind.DWT_HH), AugmentConfig(crop_size=128)),
    "naive, crop only": (Extractor(ExtractorKind.NAIVE), AugmentConfig.disabled(128)),
}
models = {}
for name, (ext, aug) in runs.items():
    res = train(train_ds, cfg, aug, ext)
    models[name] = res.model
    rep = evaluate(res.model, test_ds, ext, crop=128)
    print(f"{name:24s} final loss {res.history[-1]['loss']:.3f}  test ACC {rep.acc_m:.3f}  AP {rep.ap_m:.3f}")

# %% [markdown]
# Robustness: blur, JPEG and evaluation-time masking applied before the
# centre crop.

# %%
model, ext = models["dwt_hh + augmentation"], runs["dwt_hh + augmentation"][0]
probes = {
    "blur sigma 0.5": PerturbSpec("gaussian_blur", sigma=0.5),
    "blur sigma 2.0": PerturbSpec("gaussian_blur", sigma=2.0),
    "JPEG Q 90": PerturbSpec("jpeg", quality=90),
    "JPEG Q 70": PerturbSpec("jpeg", quality=70),
    "mask r 0.5": PerturbSpec("random_mask_eval", mask_ratio=0.5, patch_size=16),
}
for label, spec in probes.items():
    rep = evaluate(model, test_ds, ext, perturb=spec, crop=128)
    print(f"{label:15s} ACC {rep.acc_m:.3f}  AP {rep.ap_m:.3f}")
