"""The training-time augmentation chain, one stage at a time.

All randomness flows from a seeded stream, so every number printed here is
reproducible.
"""
# %%
import numpy as np

from sidforge.harness import toy_natural_image
from sidforge.transforms import (
    AugmentConfig,
    RandStream,
    augment,
    color_jitter,
    mask_patches,
    random_crop,
    rotate,
)

img = toy_natural_image(RandStream(5), size=320)
cfg = AugmentConfig()
print(cfg)

# %% [markdown]
# Random crops copy pixels; nothing is resampled, so the high-frequency
# content of the crop is exactly that of the source.

# %%
patch = random_crop(img, 256, RandStream(1))
print("crop", patch.shape, "all values present in the source:", np.isin(patch, img).all())

# %% [markdown]
# Colour jitter draws brightness, contrast and saturation factors from
# U[1 - alpha, 1 + alpha]. With alpha = 0 it is an exact identity.

# %%
print("alpha=0 identity:", np.array_equal(color_jitter(patch, AugmentConfig(alpha=0.0), RandStream(2)), patch))
print("alpha=0.5 mean shift:", float(np.abs(color_jitter(patch, cfg, RandStream(2)) - patch).mean()))

# %%
quarter = rotate(patch, 90.0)
print("90 degree rotation equals a transpose-flip:", np.allclose(quarter, np.rot90(patch, 1, axes=(1, 2))))

# %% [markdown]
# Patch masking zeroes floor(H W r / d^2) whole grid cells.

# %%
for r in (0.1, 0.4, 0.75):
    _, mask, n = mask_patches(patch, r, 16, RandStream(3))
    print(f"r={r}: {n} patches, masked fraction {mask.mean():.4f}")

# %%
out = augment(img, cfg, RandStream.split(42, 0, 0))
print("full chain output", out.shape, "range", float(out.min()), float(out.max()))
