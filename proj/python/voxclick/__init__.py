"""Click-prompted 3D instance segmentation on point clouds.

Thin wrapper over the C++ core. Configs and recipes are plain dicts.
"""

import json

from ._core import (
    DEFAULT_VOXEL_SIZE,
    ConfigError,
    ContractViolation,
    FormatError,
    InputError,
    Model,
    NotFound,
    Scene,
    VoxclickError,
    __version__,
    decode_runs,
    encode_runs,
    first_click,
    voxelize,
)
from ._core import evaluate as _evaluate
from ._core import generate_scene as _generate_scene
from ._core import nth_recipe as _nth_recipe
from ._core import train as _train

__all__ = [
    "DEFAULT_VOXEL_SIZE",
    "ConfigError",
    "ContractViolation",
    "FormatError",
    "InputError",
    "Model",
    "NotFound",
    "Scene",
    "VoxclickError",
    "__version__",
    "decode_runs",
    "encode_runs",
    "evaluate",
    "first_click",
    "generate_scene",
    "generate_scenes",
    "model_config",
    "new_model",
    "train",
    "voxelize",
]


def generate_scene(**recipe):
    """One synthetic room; keyword arguments override recipe fields (seed, min_objects, ...)."""
    return _generate_scene(json.dumps(recipe))


def generate_scenes(count, first=0, **recipe):
    """Scenes first .. first + count - 1 of the recipe's seeded sequence."""
    base = json.dumps(recipe)
    return [_generate_scene(_nth_recipe(base, i)) for i in range(first, first + count)]


def new_model(config=None):
    """Freshly initialized model; None gives the desk-scale default."""
    return Model(json.dumps(config or {}))


def model_config(model):
    return json.loads(model.config_json)


def train(model, scenes, **config):
    """Trains in place; keyword arguments override the desk preset. Returns per-epoch mean losses."""
    return _train(model, scenes, json.dumps(config))


def evaluate(model, scenes, max_clicks=10):
    return _evaluate(model, scenes, max_clicks)
