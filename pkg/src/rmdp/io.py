"""JSON reading/writing for instances, policies and reports.

Instance file::

    {"states": ["1", "2", ...], "actions": ["a", "b", ...],
     "kernels": {"a": [[...n...], ...n rows...], "b": ...},
     "rewards": [[r(1,a), r(1,b), ...], ...]}

Policy file: ``{"weights": n x m array}`` or ``{"deterministic": [action label per state]}``.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .mdp_core import MdpInstance, Policy, make_policy, validate_instance


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: invalid JSON ({exc})") from None


def instance_from_dict(d: dict) -> MdpInstance:
    try:
        states = [str(s) for s in d["states"]]
        actions = [str(a) for a in d["actions"]]
        kernels_raw = d["kernels"]
        rewards = d["rewards"]
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"instance is missing key {exc}") from None
    if not isinstance(kernels_raw, dict) or set(kernels_raw) != set(actions):
        raise InvalidInput("'kernels' must map every action label to a matrix")
    try:
        kernels = np.array([kernels_raw[a] for a in actions], dtype=float)
        rewards = np.array(rewards, dtype=float)
    except (ValueError, TypeError) as exc:
        raise InvalidInput(f"non-numeric or ragged matrix: {exc}") from None
    return validate_instance(states, actions, kernels, rewards)


def instance_to_dict(inst: MdpInstance) -> dict:
    return {
        "states": list(inst.states),
        "actions": list(inst.actions),
        "kernels": {a: inst.kernels[u].tolist() for u, a in enumerate(inst.actions)},
        "rewards": inst.rewards.tolist(),
    }


def load_instance(path) -> MdpInstance:
    return instance_from_dict(_load_json(path))


def policy_from_dict(inst: MdpInstance, d: dict) -> Policy:
    if "weights" in d:
        try:
            return make_policy(inst, np.array(d["weights"], dtype=float))
        except (ValueError, TypeError) as exc:
            raise InvalidInput(f"bad policy weights: {exc}") from None
    if "deterministic" in d:
        labels = [str(a) for a in d["deterministic"]]
        if len(labels) != inst.n:
            raise InvalidInput(f"deterministic policy needs {inst.n} actions")
        try:
            idx = [inst.actions.index(a) for a in labels]
        except ValueError as exc:
            raise InvalidInput(f"unknown action label: {exc}") from None
        return Policy.deterministic(idx, inst.m)
    raise InvalidInput("policy file needs 'weights' or 'deterministic'")


def load_policy(inst: MdpInstance, path) -> Policy:
    return policy_from_dict(inst, _load_json(path))


def to_jsonable(obj):
    """Convert numpy containers/scalars to plain Python; reject NaN and inf."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"non-finite number {x!r} in report")
        return x
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip float repr (at most 17 digits)."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(result, path=None) -> str:
    """Serialize ``result``; write it atomically to ``path`` if given."""
    text = dumps(result)
    if path is not None:
        path = Path(path)
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    return text
