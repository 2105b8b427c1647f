"""Declarative YAML scenarios for the simulator.

Example::

    seed: 7
    protocol: ppsnd            # or snd
    paillier_bits: 1024
    config: {R: 300, R_snd: 200, epsilon: 5, delta_proc_ps: 1000000, tau_snd_ps: 1000000000000}
    nodes:
      - {name: A, position: [0, 0]}
      - {name: B, position: [150, 0]}
    blocked: [[A, B]]
    adversaries:
      - {type: relay, position: [75, 0], delta_relay_ps: 100000}
      - {type: eavesdropper, position: [75, 10]}
    sessions:
      - {initiator: A, at_ps: 0}

Durations are integer picoseconds; positions are meters on the simulation plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigurationError
from .protocol import SessionConfig, SessionResult
from .pseudonym import KEY_BITS_TO_LEVEL, SECURITY_LEVELS
from .simnet import World, attach_curious_initiator, attach_eavesdropper, attach_forger, attach_relay

_CONFIG_KEYS = {
    "R": "R", "R_snd": "R_snd", "epsilon": "epsilon", "delta_proc_ps": "delta_proc",
    "tau_snd_ps": "tau_snd", "guard_ps": "guard", "followup_timeout_ps": "followup_timeout",
    "advert_gap_ps": "advert_gap", "normalize_factor": "normalize_factor",
}
_TOP_KEYS = {"seed", "protocol", "paillier_bits", "config", "nodes", "blocked", "adversaries", "sessions",
             "max_speed", "wallet_size"}


@dataclass
class ScenarioRun:
    world: World
    results: dict[str, list[SessionResult]] = field(default_factory=dict)
    handles: dict[str, object] = field(default_factory=dict)

    def summary_lines(self) -> list[str]:
        lines = []
        for name, results in self.results.items():
            for i, r in enumerate(results):
                d_tof = "-" if r.d_tof_m is None else f"{r.d_tof_m:.4f}"
                d_he = "-" if r.d_he_m is None else f"{r.d_he_m:.4f}"
                reason = r.reason.value if r.reason else "-"
                lines.append(f"{name}[{i}] outcome={r.outcome.value} reason={reason} d_tof_m={d_tof} d_he_m={d_he}")
        return lines


def _point(value, what: str) -> tuple[float, float]:
    try:
        x, y = value
        return float(x), float(y)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{what}: position must be a pair of numbers, got {value!r}") from None


def _int(spec: dict, key: str, what: str, default=None) -> int:
    value = spec.get(key, default)
    if value is None:
        raise ConfigurationError(f"{what}: missing {key!r}")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{what}: {key!r} must be an integer, got {value!r}")
    return value


def load_scenario(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a mapping")
    return data


def build_world(spec: dict) -> ScenarioRun:
    unknown = set(spec) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
    protocol = spec.get("protocol", "ppsnd")
    if protocol not in ("ppsnd", "snd"):
        raise ConfigurationError(f"protocol must be ppsnd or snd, got {protocol!r}")
    bits = _int(spec, "paillier_bits", "scenario", 1024)

    raw_cfg = spec.get("config") or {}
    if not isinstance(raw_cfg, dict):
        raise ConfigurationError("config must be a mapping")
    bad = set(raw_cfg) - set(_CONFIG_KEYS)
    if bad:
        raise ConfigurationError(f"unknown config keys: {sorted(bad)}")
    try:
        cfg = SessionConfig(paillier_bits=bits, **{_CONFIG_KEYS[k]: v for k, v in raw_cfg.items()})
    except TypeError as exc:
        raise ConfigurationError(f"bad config value: {exc}") from exc

    world = World(cfg, seed=_int(spec, "seed", "scenario", 0), max_speed=float(spec.get("max_speed", 0.0)))
    run = ScenarioRun(world)

    device_kwargs: dict = {"protocol": protocol}
    if protocol == "snd":
        level = KEY_BITS_TO_LEVEL.get(bits)
        if level is not None:
            device_kwargs["signature_scheme"] = SECURITY_LEVELS[level][1]
    else:
        device_kwargs["k"] = _int(spec, "wallet_size", "scenario", 2)

    nodes = spec.get("nodes") or []
    if not isinstance(nodes, list) or not nodes:
        raise ConfigurationError("scenario needs a non-empty 'nodes' list")
    for node in nodes:
        if not isinstance(node, dict) or "name" not in node:
            raise ConfigurationError(f"node entries need a name: {node!r}")
        world.add_device(str(node["name"]), _point(node.get("position"), node["name"]), **device_kwargs)

    for pair in spec.get("blocked") or []:
        if not isinstance(pair, list) or len(pair) != 2 or any(p not in world.nodes for p in pair):
            raise ConfigurationError(f"blocked entries must name two known nodes: {pair!r}")
        world.block(*pair)

    for i, adv in enumerate(spec.get("adversaries") or []):
        if not isinstance(adv, dict):
            raise ConfigurationError(f"adversary {i} must be a mapping")
        kind = adv.get("type")
        what = f"adversary {i} ({kind})"
        pos = _point(adv.get("position"), what)
        name = str(adv.get("name", f"{kind}{i}"))
        if kind == "relay":
            mode = adv.get("mode", "single")
            pos2 = _point(adv["position2"], what) if "position2" in adv else None
            handle = attach_relay(world, pos, _int(adv, "delta_relay_ps", what), mode, pos2, name=name)
        elif kind == "eavesdropper":
            handle = attach_eavesdropper(world, pos, name=name)
        elif kind == "forger":
            handle = attach_forger(world, pos, spoof=bool(adv.get("spoof", False)), name=name)
        elif kind == "curious":
            if protocol != "ppsnd":
                raise ConfigurationError("curious initiators are PP-SND participants")
            handle = attach_curious_initiator(world, pos, _int(adv, "period_ps", what), _int(adv, "count", what),
                                              _int(adv, "start_ps", what, 0), name=name)
        else:
            raise ConfigurationError(f"{what}: unknown adversary type")
        run.handles[name] = handle

    for j, sess in enumerate(spec.get("sessions") or []):
        if not isinstance(sess, dict) or sess.get("initiator") not in world.nodes:
            raise ConfigurationError(f"session {j} must name a known initiator")
        world.start(sess["initiator"], _int(sess, "at_ps", f"session {j}", 0))
    return run


def run_scenario(spec: dict) -> ScenarioRun:
    """Build the world described by ``spec``, run it to quiescence and collect results."""
    run = build_world(spec)
    run.world.run_until_idle()
    for device in run.world.devices():
        if device.results:
            run.results[device.name] = list(device.results)
    return run
