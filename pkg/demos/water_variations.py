"""
Wave, color and turbidity variations
====================================

Sweeps one water setting at a time around a fixed whale and tiles the
results into grids, one row per setting.
"""

import sys
from pathlib import Path

import numpy as np

from seasynth.ocean import WaveParams, elevation_grid, transmittance, WaterOptics
from seasynth.render import render, save_png
from seasynth.scene import SceneSpec

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "water_variations"
out.mkdir(parents=True, exist_ok=True)

base = {
    "camera": {"width": 112, "height": 112},
    "objects_of_interest": [{"pose": {"preset": "submerging", "translation": [0.0, 0.0, -1.2]}}],
}


def variant(section, **values):
    d = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    d[section] = {**d.get(section, {}), **values}
    return render(SceneSpec.from_dict(d), seed=0).image


def strip(images, gap=2):
    h, w, _ = images[0].shape
    row = np.full((h, len(images) * (w + gap) - gap, 3), 255, np.uint8)
    for i, im in enumerate(images):
        row[:, i * (w + gap): i * (w + gap) + w] = im
    return row


# Wave strength sets the height of the swell; scale sets the size of its features.
rows = [
    strip([variant("waves", strength=s) for s in (0.0, 0.2, 0.5, 1.0)]),
    strip([variant("waves", scale=s, strength=0.5) for s in (2.0, 5.0, 10.0, 20.0)]),
    # palette index runs from deep blue (0) to coastal green (1029)
    strip([variant("optics", color_index=i) for i in (0, 340, 690, 1029)]),
    # turbidity controls how fast the submerged whale fades
    strip([variant("optics", turbidity=t) for t in (0.0, 0.33, 0.66, 1.0)]),
]
sheet = np.concatenate([np.pad(r, ((0, 2), (0, 0), (0, 0)), constant_values=255) for r in rows])
save_png(sheet, out / "variations.png")

# The numbers behind the turbidity row: fraction of light surviving 1.2 m of water.
for t in (0.0, 0.33, 0.66, 1.0):
    print("turbidity %.2f -> transmittance %.3f" % (t, transmittance(1.2, WaterOptics(turbidity=t))))

# The height field itself, stretched to 8 bits.
h = elevation_grid(WaveParams(scale=6.0, strength=0.5, detail=5), extent=60.0, n=256)
save_png(((h - h.min()) / np.ptp(h) * 255).astype(np.uint8), out / "heightfield.png")
print("wrote", out)
