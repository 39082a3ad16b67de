"""JSON config parsing with path-annotated errors."""
from __future__ import annotations

import numpy as np

from . import scalarize
from .adversary import AdversaryChoice
from .env import Instance
from .errors import UsageError
from .policy import AGNOSTIC, KNOWN_BUDGET, PolicyConfig
from .protocol import S3, ProtocolSpec
from .sim import EpisodeConfig

_MISSING = object()


def _get(obj: dict, key: str, path: str, default=_MISSING):
    if key in obj:
        return obj[key]
    if default is _MISSING:
        raise UsageError(f"{path}.{key}: required field is missing")
    return default


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise UsageError(f"{path}: expected an integer, got {value!r}")
    return value


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise UsageError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _parse_protocol(value, path: str) -> ProtocolSpec:
    try:
        if isinstance(value, str):
            return ProtocolSpec(value)
        if isinstance(value, dict):
            return ProtocolSpec(_get(value, "kind", path),
                                certified=bool(value.get("certified", False)))
    except Exception as exc:
        raise UsageError(f"{path}: {exc}") from exc
    raise UsageError(f"{path}: expected a protocol name or object")


def _parse_adversary(value, path: str) -> AdversaryChoice:
    if value is None:
        return AdversaryChoice(kind="none")
    if not isinstance(value, dict):
        raise UsageError(f"{path}: expected an object")
    kind = _get(value, "kind", path)
    if kind == "none":
        return AdversaryChoice(kind="none")
    if kind == "greedy_flip":
        return AdversaryChoice(kind=kind,
                               epsilon=_as_number(value.get("epsilon", 1.0),
                                                  f"{path}.epsilon"))
    if kind == "early_informative":
        return AdversaryChoice(kind=kind, target_arm=value.get("target_arm", "best"))
    if kind == "oblivious_random":
        return AdversaryChoice(kind=kind,
                               p=_as_number(_get(value, "p", path), f"{path}.p"),
                               epsilon=_as_number(value.get("epsilon", 1.0),
                                                  f"{path}.epsilon"))
    raise UsageError(f"{path}.kind: unknown adversary {kind!r}")


def _parse_knowledge(value, path: str) -> str:
    if value in (KNOWN_BUDGET, AGNOSTIC):
        return value
    if isinstance(value, dict):
        if value.get("known_budget"):
            return KNOWN_BUDGET
        return AGNOSTIC
    raise UsageError(f"{path}: expected 'known_budget', 'agnostic' or an object")


def episode_config_from_dict(obj: dict, path: str = "config") -> EpisodeConfig:
    if not isinstance(obj, dict):
        raise UsageError(f"{path}: expected a JSON object")
    K = _as_int(_get(obj, "K", path), f"{path}.K")
    d = _as_int(_get(obj, "d", path), f"{path}.d")
    N = _as_int(_get(obj, "N", path), f"{path}.N")
    T = _as_int(_get(obj, "T", path), f"{path}.T")
    gamma = _as_number(obj.get("gamma", 0.0), f"{path}.gamma")

    protocol = _parse_protocol(obj.get("protocol", "s2"), f"{path}.protocol")
    adversary = _parse_adversary(obj.get("adversary"), f"{path}.adversary")

    try:
        scal = scalarize.from_config(
            obj.get("scalarization", {"kind": "linear", "weights": [1.0 / d] * d}), d)
    except Exception as exc:
        raise UsageError(f"{path}.scalarization: {exc}") from exc

    pol = obj.get("policy", {})
    if not isinstance(pol, dict):
        raise UsageError(f"{path}.policy: expected an object")
    nu = obj.get("nu", pol.get("nu", 0))
    nu = _as_int(nu, f"{path}.nu")
    certified = bool(pol.get("certified", protocol.certified))
    if certified and protocol.kind == S3:
        protocol = ProtocolSpec(S3, certified=True)
    try:
        policy = PolicyConfig(
            delta=_as_number(pol.get("delta", 0.01), f"{path}.policy.delta"),
            corruption_knowledge=_parse_knowledge(
                pol.get("corruption_knowledge", KNOWN_BUDGET),
                f"{path}.policy.corruption_knowledge"),
            nu=nu,
            certified=protocol.certified,
        )
    except UsageError:
        raise
    except Exception as exc:
        raise UsageError(f"{path}.policy: {exc}") from exc

    instance = None
    floor = 0.1
    key = 0
    inst_obj = obj.get("instance")
    if isinstance(inst_obj, dict) and "means" in inst_obj:
        try:
            instance = Instance(np.asarray(inst_obj["means"], dtype=float))
        except Exception as exc:
            raise UsageError(f"{path}.instance.means: {exc}") from exc
    elif isinstance(inst_obj, dict) and "generator" in inst_obj:
        gen = inst_obj["generator"]
        floor = _as_number(gen.get("delta_min_floor", 0.1),
                           f"{path}.instance.generator.delta_min_floor")
        key = _as_int(gen.get("key", 0), f"{path}.instance.generator.key")
    elif inst_obj is not None:
        raise UsageError(f"{path}.instance: expected 'means' or 'generator'")

    try:
        return EpisodeConfig(
            K=K, d=d, N=N, T=T, gamma=gamma, protocol=protocol,
            adversary=adversary, scalarization=scal, policy=policy,
            instance=instance, instance_floor=floor, instance_key=key,
            master_seed=_as_int(obj.get("master_seed", 0), f"{path}.master_seed"),
            rep=_as_int(obj.get("rep", 0), f"{path}.rep"),
        )
    except UsageError:
        raise
    except Exception as exc:
        raise UsageError(f"{path}: {exc}") from exc


def sweep_from_dict(obj: dict) -> list[EpisodeConfig]:
    """A sweep is a base config plus a list of per-point overrides."""
    if not isinstance(obj, dict):
        raise UsageError("config: expected a JSON object")
    base = _get(obj, "base", "config")
    points = _get(obj, "grid", "config")
    if not isinstance(points, list) or not points:
        raise UsageError("config.grid: expected a non-empty list")
    grid = []
    for i, override in enumerate(points):
        if not isinstance(override, dict):
            raise UsageError(f"config.grid[{i}]: expected an object")
        merged = dict(base)
        merged.update(override)
        grid.append(episode_config_from_dict(merged, path=f"config.grid[{i}]"))
    return grid
