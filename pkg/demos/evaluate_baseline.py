"""
Scoring the baseline segmenter
==============================

Generates a small easy dataset, segments it with the model-free baseline,
and reports IoU and detection rates the way the CLI's eval command does.
"""

import sys
from pathlib import Path

import numpy as np

from seasynth.dataset import RangeConfig, generate, load_config
from seasynth.evaluation import EvalPair, baseline_segment, evaluate
from seasynth.render import load_mask, load_rgb, save_png

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "evaluate_baseline"
config_path = Path(__file__).resolve().parent.parent / "configs" / "easy_set.json"

easy = load_config(config_path)
manifest = generate(RangeConfig(easy.scene, 30, easy.master_seed, str(out)))

pairs = []
for i in range(len(manifest)):
    image = load_rgb(manifest.image_path(i))
    prediction = baseline_segment(image, sensitivity=4.0)
    save_png(prediction, out / f"pred_{i:06d}.png")
    pairs.append(EvalPair(prediction, load_mask(manifest.mask_path(i)), str(i)))

report = evaluate(pairs, taus=(0.5, 0.6), method="baseline", data_size=str(len(pairs)))
print(report.table())
print("median IoU %.3f" % float(np.median(report.ious)))

# The weakest pairs are the interesting ones to look at.
worst = np.argsort(report.ious)[:3]
print("lowest IoU:", [(report.ids[k], round(report.ious[k], 3)) for k in worst])
