"""
Paired augmentation
===================

Applies random affine transforms to a rendered image and its mask together
and shows that the mask follows the pixels.
"""

import sys
from pathlib import Path

import numpy as np

from seasynth.dataset import AugmentSpec, augment, augment_params
from seasynth.render import render, save_png
from seasynth.scene import SceneSpec

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "augmentation"
out.mkdir(parents=True, exist_ok=True)

result = render(SceneSpec.from_dict({"objects_of_interest": [{"pose": "breaching"}]}), seed=2)

# Rotation up to 90 degrees, 30% shifts, 0.5 shear, 30% zoom and both flips.
spec = AugmentSpec.protocol_default()

tiles = []
for seed in range(6):
    print(seed, {k: round(v, 3) if isinstance(v, float) else v for k, v in augment_params(spec, seed).items()})
    image, mask = augment(result.image, result.mask, spec, seed)
    # outline the mask in yellow on top of the transformed image
    edge = (mask > 0) & ~np.all(np.stack([np.roll(mask > 0, s, axis=a) for a in (0, 1) for s in (1, -1)]), axis=0)
    image = image.copy()
    image[edge] = (255, 230, 0)
    tiles.append(image)

save_png(np.concatenate(tiles, axis=1), out / "augmented.png")

# An all-zero spec leaves both arrays untouched.
same_image, same_mask = augment(result.image, result.mask, AugmentSpec(), seed=9)
print("identity:", same_image.tobytes() == result.image.tobytes() and same_mask.tobytes() == result.mask.tobytes())
print("wrote", out)
