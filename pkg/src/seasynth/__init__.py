"""Procedural overhead maritime renderer and whale-detection dataset toolkit."""

from .dataset import (AugmentSpec, DatasetManifest, RangeConfig, augment, contact_sheet, generate,
                      load_config, sample_scene)
from .errors import ConfigError, EvaluationError, GenerationError, MeshParseError
from .evaluation import EvalPair, MetricsReport, baseline_segment, detection_rate, evaluate, iou
from .geometry import Hit, Mesh, Pose, Ray, apply_pose, intersect, parametric_whale, parse_mesh
from .ocean import WaterOptics, WaveParams, surface_height, transmittance, water_palette
from .render import RenderOutput, apply_sensor_noise, fresnel, render
from .scene import CameraSpec, LightSpec, NoiseSpec, ObjectSpec, SceneSpec

__version__ = "0.1.0"
