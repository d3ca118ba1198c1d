"""Model checkpoints: a JSON config header followed by each sub-network's
flat binary blob, concatenated (the blobs are self-delimiting)."""

from __future__ import annotations

import json

import numpy as np

from ..errors import ConfigError
from ..hierarchy import build_force_ladder, restrict_to_top
from ..nets import load_into, serialize
from .control import ControlValueModel
from .multiagent import MultiAgentValueModel

_MAGIC = b"GASCKPT1\n"


def save_checkpoint(path: str, model, meta: dict | None = None) -> None:
    if isinstance(model, ControlValueModel):
        header = {
            "kind": "control",
            "mode": model.mode,
            "feature_dim": model.feature_dim,
            "max_level": model.hierarchy.n_levels - 1,
            "scratch": False,
        }
        # a single-level hierarchy over more than two actions is a
        # from-scratch restriction of a deeper ladder
        if model.hierarchy.n_levels == 1 and model.hierarchy.size(0) > 2:
            depth = int(np.log2(model.hierarchy.size(0))) - 1
            header.update(max_level=depth, scratch=True)
    elif isinstance(model, MultiAgentValueModel):
        header = {
            "kind": "multiagent",
            "mode": model.mode,
            "feature_dim": model.feature_dim,
            "tree_depth": model.tree_depth,
            "exposed_levels": model.levels,
            "n_orders": model.n_orders,
        }
    else:
        raise ConfigError(f"cannot checkpoint {type(model).__name__}")
    header["meta"] = meta or {}
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write((json.dumps(header, sort_keys=True) + "\n").encode())
        for net in model.subnets():
            f.write(serialize(net))


def load_checkpoint(path: str):
    """Rebuild the model named in the header and load its parameters.

    Returns (model, meta)."""
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(_MAGIC):
        raise ConfigError(f"{path}: not a checkpoint file")
    nl = blob.index(b"\n", len(_MAGIC))
    header = json.loads(blob[len(_MAGIC) : nl].decode())
    offset = nl + 1
    rng = np.random.default_rng(0)
    if header["kind"] == "control":
        h = build_force_ladder(header["max_level"])
        if header["scratch"]:
            h = restrict_to_top(h)
        model = ControlValueModel(
            h, header["feature_dim"], mode=header["mode"], rng=rng
        )
    elif header["kind"] == "multiagent":
        model = MultiAgentValueModel(
            tree_depth=header["tree_depth"],
            feature_dim=header["feature_dim"],
            exposed_levels=header["exposed_levels"],
            n_orders=header["n_orders"],
            mode=header["mode"],
            rng=rng,
        )
    else:
        raise ConfigError(f"unknown checkpoint kind {header['kind']!r}")
    for net in model.subnets():
        offset = load_into(net, blob, offset)
    if offset != len(blob):
        raise ConfigError(f"{path}: trailing bytes after parameters")
    return model, header.get("meta", {})
