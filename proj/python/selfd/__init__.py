# Copyright 2026 The selfd Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Self-trained conditional driving policies: simulator, planner, pseudo-labeling and metrics."""

import json as _json

from ._core import (
    Command,
    Planner,
    ade,
    fde,
    read_ppm,
    spatial_softmax,
    turning_radius,
    write_ppm,
)
from . import _core

__all__ = [
    "Command",
    "Planner",
    "ade",
    "closed_loop",
    "evaluate",
    "fde",
    "generate_dataset",
    "read_ppm",
    "run_selfd",
    "spatial_softmax",
    "turning_radius",
    "write_ppm",
]


def _dump(config):
    return "" if config is None else _json.dumps(config)


def generate_dataset(config, out_dir):
    """Renders labeled, unlabeled and eval splits; returns manifest paths and frame counts."""
    return _json.loads(_core.generate_dataset(_dump(config), str(out_dir)))


def run_selfd(labeled, unlabeled, config, out_dir, eval_manifest=None):
    """Teacher, pseudo-labeling, pre-training and fine-tuning. Returns one dict per checkpoint."""
    return _json.loads(
        _core.run_selfd(str(labeled), str(unlabeled), _dump(config), str(out_dir), str(eval_manifest or ""))
    )


def evaluate(model, manifest):
    """Open-loop ADE, FDE and collision rate on a labeled manifest."""
    return _json.loads(_core.evaluate(model, str(manifest)))


def closed_loop(model=None, config=None):
    """Closed-loop success rate, route completion and collisions; the expert drives when model is None."""
    return _json.loads(_core.closed_loop(model, _dump(config)))
