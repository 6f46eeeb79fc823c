"""Scenario files: YAML with engineering units, normalized to SI at parse time.

A scenario holds four blocks (qos, channel, spectrum, users) plus simulation
settings.  Any omitted block or key falls back to the built-in defaults
(single cell-edge user, 1 ms bound, 1e-7 budget, 0.1 ms frames, 0.15 MHz
subcarriers, 8 antennas, -173 dBm/Hz noise, 20-byte packets); the names of
defaulted blocks are recorded so result files can note them.

Quantities may be plain numbers (SI units) or strings with a suffix:
times (s, ms, us, ns), frequencies (Hz..GHz), powers (W, mW, dBm), noise
densities (dBm/Hz, W/Hz), sizes (bits, bytes), distances (m, km) and rates
("/s" packets per second, "/frame" packets per frame).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import yaml

from .optimizer import MultiUserScenario, QosRequirement, UserLink
from .traffic import IPP, SPP, ArrivalModel, Poisson

__all__ = ["ScenarioError", "SimSettings", "ScenarioFile", "load_scenario", "parse_quantity"]


class ScenarioError(ValueError):
    """Scenario file cannot be parsed; message carries the offending field."""


_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_DIST = {"m": 1.0, "km": 1e3}
_SIZE = {"bits": 1.0, "bit": 1.0, "bytes": 8.0, "byte": 8.0, "b": 8.0}


def parse_quantity(value, kind: str, where: str) -> float:
    """Convert a number or 'value unit' string to SI for the given kind."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ScenarioError(f"{where}: expected a number or quantity string, got {value!r}")
    text = value.strip()
    parts = text.split()
    if len(parts) == 1:
        # tolerate forms like "0.15MHz" or "-173dBm/Hz"
        head = ""
        for i, ch in enumerate(text):
            if ch.isalpha() and text[i - 1:i] not in ("e", "E"):
                head, parts = text[:i], [text[:i], text[i:]]
                break
    try:
        number = float(parts[0])
    except (ValueError, IndexError):
        raise ScenarioError(f"{where}: cannot parse quantity {value!r}")
    unit = parts[1].strip() if len(parts) > 1 else ""
    u = unit.lower()
    if kind == "time" and u in _TIME:
        return number * _TIME[u]
    if kind == "frequency" and u in _FREQ:
        return number * _FREQ[u]
    if kind == "distance" and u in _DIST:
        return number * _DIST[u]
    if kind == "size" and u in _SIZE:
        return number * _SIZE[u]
    if kind == "power":
        if u == "w":
            return number
        if u == "mw":
            return number * 1e-3
        if u == "dbm":
            return 10.0 ** ((number - 30.0) / 10.0)
    if kind == "psd":
        if u in ("w/hz",):
            return number
        if u == "dbm/hz":
            return 10.0 ** ((number - 30.0) / 10.0)
    if kind == "probability" and unit == "":
        return number
    if unit == "":
        return number
    raise ScenarioError(f"{where}: unknown {kind} unit {unit!r} in {value!r}")


def _parse_rate_per_frame(value, frame_s: float, where: str) -> float:
    """Rates accept '/s' (packets per second) or '/frame'; bare numbers are per frame."""
    if isinstance(value, str):
        text = value.strip()
        if text.endswith("/s"):
            return float(text[:-2]) * frame_s
        if text.endswith("/frame"):
            return float(text[:-6])
        try:
            return float(text)
        except ValueError:
            raise ScenarioError(f"{where}: cannot parse rate {value!r}")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ScenarioError(f"{where}: expected a rate, got {value!r}")


def _phase_rate_per_frame(block: dict, mean_key: str, rate_key: str,
                          frame_s: float, where: str) -> float:
    """Phase leave rate in 1/frames from a mean duration or a direct rate."""
    if mean_key in block:
        mean_s = parse_quantity(block[mean_key], "time", f"{where}.{mean_key}")
        if mean_s <= 0:
            raise ScenarioError(f"{where}.{mean_key}: must be positive")
        return frame_s / mean_s
    if rate_key in block:
        return float(block[rate_key])
    raise ScenarioError(f"{where}: needs {mean_key} or {rate_key}")


def _parse_traffic(block, frame_s: float, where: str) -> ArrivalModel:
    if not isinstance(block, dict) or "kind" not in block:
        raise ScenarioError(f"{where}: traffic needs a 'kind' (poisson, ipp, spp)")
    kind = str(block["kind"]).lower()
    if kind == "poisson":
        return Poisson(_parse_rate_per_frame(block.get("rate", "1000 /s"), frame_s,
                                             f"{where}.rate"))
    if kind == "ipp":
        return IPP(
            on_rate=_parse_rate_per_frame(block.get("on_rate", "2000 /s"), frame_s,
                                          f"{where}.on_rate"),
            off_to_on=_phase_rate_per_frame(block, "off_mean", "off_to_on", frame_s, where),
            on_to_off=_phase_rate_per_frame(block, "on_mean", "on_to_off", frame_s, where),
        )
    if kind == "spp":
        return SPP(
            rate_1=_parse_rate_per_frame(block.get("rate_1", "1000 /s"), frame_s,
                                         f"{where}.rate_1"),
            rate_2=_parse_rate_per_frame(block.get("rate_2", "2000 /s"), frame_s,
                                         f"{where}.rate_2"),
            leave_1=_phase_rate_per_frame(block, "mean_1", "leave_1", frame_s, where),
            leave_2=_phase_rate_per_frame(block, "mean_2", "leave_2", frame_s, where),
        )
    raise ScenarioError(f"{where}: unknown traffic kind {kind!r}")


@dataclass(frozen=True)
class SimSettings:
    frames: int = 1_000_000
    seed: int = 1
    mode: str = "fluid"
    queue_violation_target: float | None = None  # eps_q used by validate-bound

    def __post_init__(self):
        if self.frames < 1:
            raise ScenarioError("simulation.frames must be >= 1")
        if self.mode not in ("fluid", "packet"):
            raise ScenarioError(f"simulation.mode {self.mode!r} not in (fluid, packet)")


@dataclass(frozen=True)
class ScenarioFile:
    scenario: MultiUserScenario
    sim: SimSettings
    defaulted: tuple
    source_hash: str = ""


_DEFAULT_QOS = {"delay_bound": "1 ms", "loss_budget": 1e-7,
                "frame": "0.1 ms", "data_phase": "0.06 ms"}
_DEFAULT_CHANNEL = {"antennas": 8, "nakagami_m": 1, "coherence_frames": 10,
                    "noise_psd": "-173 dBm/Hz"}
_DEFAULT_SPECTRUM = {"subcarrier_bandwidth": "0.15 MHz", "max_subcarriers": 16}
_DEFAULT_USERS = [{"distance": "200 m", "traffic": {"kind": "poisson", "rate": "1000 /s"}}]


def _merged(block, defaults, defaulted: list, name: str) -> dict:
    if block is None:
        defaulted.append(name)
        return dict(defaults)
    if not isinstance(block, dict):
        raise ScenarioError(f"{name}: expected a mapping")
    out = dict(defaults)
    unknown = set(block) - set(defaults)
    if unknown:
        raise ScenarioError(f"{name}: unknown keys {sorted(unknown)}")
    out.update(block)
    return out


def parse_scenario(data: dict, source_hash: str = "") -> ScenarioFile:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("top level must be a mapping")
    known = {"qos", "channel", "spectrum", "users", "simulation",
             "packet_size", "max_total_power"}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown top-level keys {sorted(unknown)}")
    defaulted: list = []

    qos_b = _merged(data.get("qos"), _DEFAULT_QOS, defaulted, "qos")
    frame_s = parse_quantity(qos_b["frame"], "time", "qos.frame")
    try:
        qos = QosRequirement(
            delay_bound_s=parse_quantity(qos_b["delay_bound"], "time", "qos.delay_bound"),
            loss_budget=parse_quantity(qos_b["loss_budget"], "probability", "qos.loss_budget"),
            frame_s=frame_s,
            data_phase_s=parse_quantity(qos_b["data_phase"], "time", "qos.data_phase"),
        )
    except ValueError as exc:
        raise ScenarioError(f"qos: {exc}")

    chan_b = _merged(data.get("channel"), _DEFAULT_CHANNEL, defaulted, "channel")
    spec_b = _merged(data.get("spectrum"), _DEFAULT_SPECTRUM, defaulted, "spectrum")

    if "packet_size" not in data:
        defaulted.append("packet_size")
    packet_bits = parse_quantity(data.get("packet_size", "20 bytes"), "size", "packet_size")

    users_b = data.get("users")
    if users_b is None:
        defaulted.append("users")
        users_b = _DEFAULT_USERS
    if not isinstance(users_b, list) or not users_b:
        raise ScenarioError("users: expected a non-empty list")
    users = []
    for i, ub in enumerate(users_b):
        where = f"users[{i}]"
        if not isinstance(ub, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        unknown = set(ub) - {"distance", "average_gain", "traffic"}
        if unknown:
            raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
        distance = ub.get("distance")
        gain = ub.get("average_gain")
        traffic = _parse_traffic(ub.get("traffic", {"kind": "poisson", "rate": "1000 /s"}),
                                 frame_s, f"{where}.traffic")
        try:
            users.append(UserLink(
                arrival=traffic,
                distance_m=(parse_quantity(distance, "distance", f"{where}.distance")
                            if distance is not None else None),
                average_gain=(float(gain) if gain is not None else None),
            ))
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}")

    max_power = data.get("max_total_power")
    try:
        scenario = MultiUserScenario(
            users=tuple(users),
            qos=qos,
            subcarrier_bandwidth_hz=parse_quantity(spec_b["subcarrier_bandwidth"],
                                                   "frequency", "spectrum.subcarrier_bandwidth"),
            max_subcarriers=int(spec_b["max_subcarriers"]),
            antennas=int(chan_b["antennas"]),
            noise_psd_w_per_hz=parse_quantity(chan_b["noise_psd"], "psd", "channel.noise_psd"),
            packet_bits=packet_bits,
            nakagami_m=int(chan_b["nakagami_m"]),
            coherence_frames=int(chan_b["coherence_frames"]),
            max_total_power_w=(parse_quantity(max_power, "power", "max_total_power")
                               if max_power is not None else None),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc))

    sim_b = _merged(data.get("simulation"),
                    {"frames": 1_000_000, "seed": 1, "mode": "fluid",
                     "queue_violation_target": None}, defaulted, "simulation")
    sim = SimSettings(frames=int(sim_b["frames"]), seed=int(sim_b["seed"]),
                      mode=str(sim_b["mode"]),
                      queue_violation_target=(None if sim_b["queue_violation_target"] is None
                                              else float(sim_b["queue_violation_target"])))
    return ScenarioFile(scenario, sim, tuple(defaulted), source_hash)


def load_scenario(path) -> ScenarioFile:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}")
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: invalid YAML: {exc}")
    digest = hashlib.sha256(raw).hexdigest()[:16]
    return parse_scenario(data, source_hash=digest)
