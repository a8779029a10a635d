"""
Generate a randomized dataset
=============================

Draws scenes from a range configuration, renders them in parallel, and
writes a contact sheet of the first images.
"""

import json
import sys
from pathlib import Path

from seasynth.dataset import RangeConfig, contact_sheet, generate, load_config, sample_scene
from seasynth.render import save_png

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "generate_dataset"
config_path = Path(__file__).resolve().parent.parent / "configs" / "protocol_2000.json"

# The shipped configuration describes 2000 samples; take the first 24 here.
full = load_config(config_path)
config = RangeConfig(full.scene, 24, full.master_seed, str(out))

# Each sample is a function of (master seed, index) only, so any single one can
# be inspected without generating the rest.
scene = sample_scene(config, 5)
print("sample 5:", json.dumps(scene.to_dict()["optics"]), "altitude %.1f m" % scene.camera.altitude)

manifest = generate(config, progress=lambda done, n: print(f"\r{done}/{n}", end="", flush=True))
print()
print(len(manifest), "records in", out / "manifest.jsonl")

save_png(contact_sheet(manifest, 4, 6), out / "sheet.png")
print("wrote", out / "sheet.png")
