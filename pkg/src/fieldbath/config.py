"""Scenario configuration: versioned JSON schema, fail-closed validation.

A scenario file drives the CLI.  Unknown keys are errors at every level so
a manifest echo re-parses to exactly the scenario that produced it.

    {
      "version": 1,
      "lattice":    {"N": 2, "ell": 6.2832, "c": 1.0, "hbar": 1.0, "kB": 1.0},
      "thermostat": {"beta": 1.0,
                     "gamma_phi": {"kind": "constant", "value": 0.4},
                     "gamma_Pi": "detailed_balance"},
      "protocol":   {"segments": [{"kind": "constant", "b": 1.0, "duration": 1.0},
                                  {"kind": "smooth_ramp", "b_to": 1.4, "duration": 1.0}],
                     "tau": null},
      "run":        {"dt": 0.005, "steps": 400, "ensemble": 200, "seed": 7,
                     "snapshot_stride": 10, "fock_truncation": 40},
      "initial":    {"kind": "gibbs_scaled", "scale": 2.0},
      "scan":       {...},            # optional, cptp-scan only
      "classical_limit": {...}        # optional, classical-limit only
    }

gamma specs are {"kind": "constant", "value": v} or
{"kind": "polynomial_abs_k", "coeffs": [c0, c1, ...]} (gamma = sum c_j |k|^j,
validated non-negative on the mode set); gamma_Pi may instead be the string
"detailed_balance", which expands to (omega_t(k)^2/c^4) gamma_phi per mode.

Protocol segments run back to back from t = 0: "constant" holds b for
``duration``; "ramp"/"smooth_ramp" move to ``b_to`` over ``duration``
(linear or cosine-eased); "quench" jumps to ``b_to`` instantly.  ``tau``
freezes the schedule from that time on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classical_sde import CouplingSchedule, FreeFieldHamiltonian, MassProtocol
from .errors import ConfigError
from .lattice import LatticeSpec

SCHEMA_VERSION = 1

_SECTIONS = {"version", "lattice", "thermostat", "protocol", "run", "initial",
             "scan", "classical_limit"}
_LATTICE_KEYS = {"N", "ell", "c", "hbar", "kB"}
_THERMO_KEYS = {"beta", "gamma_phi", "gamma_Pi"}
_PROTOCOL_KEYS = {"segments", "tau"}
_RUN_KEYS = {"dt", "steps", "ensemble", "seed", "snapshot_stride", "fock_truncation"}
_INITIAL_KEYS = {"kind", "scale", "mean", "levels"}
_SCAN_KEYS = {"gamma_phi", "omega", "ratio_min", "ratio_max", "ratio_points",
              "bho_min", "bho_max", "bho_points"}
_LIMIT_KEYS = {"hbar_sequence", "omega", "hot_factor"}
_SEGMENT_KEYS = {"kind", "b", "b_to", "duration"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing key '{key}' in {where}")
    return section[key]


def _positive(value, name: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not v > 0:
        raise ConfigError(f"{name} must be positive, got {v}")
    return v


@dataclass(frozen=True)
class GammaSpec:
    """Validated coupling function of |k| (time-independent in configs)."""

    kind: str
    params: tuple

    def as_function(self):
        if self.kind == "constant":
            value = self.params[0]
            return lambda kabs, t: np.full_like(np.asarray(kabs, dtype=float), value)
        coeffs = np.array(self.params)
        return lambda kabs, t: np.polynomial.polynomial.polyval(
            np.abs(np.asarray(kabs, dtype=float)), coeffs
        )

    @classmethod
    def parse(cls, raw, where: str) -> "GammaSpec":
        if not isinstance(raw, dict):
            raise ConfigError(f"{where} must be an object with a 'kind'")
        _check_keys(raw, {"kind", "value", "coeffs"}, where)
        kind = _require(raw, "kind", where)
        if kind == "constant":
            v = float(_require(raw, "value", where))
            if v < 0:
                raise ConfigError(f"{where}: coupling must be non-negative")
            return cls(kind="constant", params=(v,))
        if kind == "polynomial_abs_k":
            coeffs = _require(raw, "coeffs", where)
            if not isinstance(coeffs, list) or not coeffs:
                raise ConfigError(f"{where}: 'coeffs' must be a non-empty list")
            return cls(kind="polynomial_abs_k", params=tuple(float(c) for c in coeffs))
        raise ConfigError(f"{where}: unknown coupling kind {kind!r}")


def _parse_segments(raw_segments, where: str):
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ConfigError(f"{where}: 'segments' must be a non-empty list")
    parsed = []
    for i, seg in enumerate(raw_segments):
        label = f"{where}.segments[{i}]"
        if not isinstance(seg, dict):
            raise ConfigError(f"{label} must be an object")
        _check_keys(seg, _SEGMENT_KEYS, label)
        kind = _require(seg, "kind", label)
        if kind == "constant":
            if i == 0:
                b = float(_require(seg, "b", label))
            else:
                b = float(seg["b"]) if "b" in seg else None
            duration = _positive(_require(seg, "duration", label), f"{label}.duration")
            parsed.append({"kind": "constant", "b": b, "duration": duration})
        elif kind in ("ramp", "smooth_ramp"):
            b_to = float(_require(seg, "b_to", label))
            duration = _positive(_require(seg, "duration", label), f"{label}.duration")
            parsed.append({"kind": kind, "b_to": b_to, "duration": duration})
        elif kind == "quench":
            parsed.append({"kind": "quench", "b_to": float(_require(seg, "b_to", label)),
                           "duration": 0.0})
        else:
            raise ConfigError(f"{label}: unknown segment kind {kind!r}")
    if parsed[0]["kind"] != "constant":
        raise ConfigError(f"{where}: the first segment must be 'constant' with an explicit 'b'")
    return parsed


def _piecewise_b(segments):
    """Compile segments into scalar b(t) and db/dt(t) functions."""
    intervals = []  # (t0, t1, b0, b1, kind) with t1 > t0
    t = 0.0
    b = segments[0]["b"]
    for seg in segments:
        if seg["kind"] == "constant":
            if seg.get("b") is not None:
                b = seg["b"]
            intervals.append((t, t + seg["duration"], b, b, "constant"))
            t += seg["duration"]
        elif seg["kind"] == "quench":
            b = seg["b_to"]  # takes effect from this boundary on
        else:
            intervals.append((t, t + seg["duration"], b, seg["b_to"], seg["kind"]))
            t += seg["duration"]
            b = seg["b_to"]
    b_final = b

    def b_of_t(time: float) -> float:
        for (t0, t1, b0, b1, kind) in intervals:
            if time < t1:
                return b0 if kind == "constant" else _interp(kind, time, t0, t1, b0, b1)
        return b_final

    def db_of_t(time: float) -> float:
        for (t0, t1, b0, b1, kind) in intervals:
            if time < t1:
                if kind == "constant" or time <= t0:
                    return 0.0
                if kind == "ramp":
                    return (b1 - b0) / (t1 - t0)
                s = (time - t0) / (t1 - t0)
                return (b1 - b0) * 0.5 * np.pi * np.sin(np.pi * s) / (t1 - t0)
        return 0.0

    return b_of_t, db_of_t


def _interp(kind: str, t: float, t0: float, t1: float, b0: float, b1: float) -> float:
    s = np.clip((t - t0) / (t1 - t0), 0.0, 1.0) if t1 > t0 else 1.0
    if kind == "ramp":
        return b0 + (b1 - b0) * s
    return b0 + (b1 - b0) * 0.5 * (1.0 - np.cos(np.pi * s))


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed, validated scenario plus its raw echo."""

    raw: dict
    N: int
    ell: float
    c: float
    hbar: float
    kB: float
    beta: float
    gamma_phi: GammaSpec
    gamma_pi: GammaSpec | str
    segments: list
    tau: float | None
    dt: float
    steps: int
    ensemble: int
    seed: int
    snapshot_stride: int
    fock_truncation: int
    initial_kind: str
    initial_scale: float
    initial_mean: float
    initial_levels: tuple

    def lattice_spec(self) -> LatticeSpec:
        return LatticeSpec(N=self.N, ell=self.ell, c=self.c, hbar=self.hbar,
                           beta=self.beta, kB=self.kB)

    def protocol(self) -> MassProtocol:
        b_of_t, db_of_t = _piecewise_b(self.segments)
        return MassProtocol(
            fn=lambda kabs, t: np.full_like(np.asarray(kabs, dtype=float), b_of_t(t)),
            tau=self.tau,
            dfn=lambda kabs, t: np.full_like(np.asarray(kabs, dtype=float), db_of_t(t)),
        )

    def hamiltonian(self) -> FreeFieldHamiltonian:
        return FreeFieldHamiltonian(spec=self.lattice_spec(), protocol=self.protocol())

    def schedule(self, hamiltonian: FreeFieldHamiltonian) -> CouplingSchedule:
        gphi = self.gamma_phi.as_function()
        if self.gamma_pi == "detailed_balance":
            sched = CouplingSchedule.detailed_balance(gphi, hamiltonian)
        else:
            sched = CouplingSchedule(gamma_phi=gphi, gamma_pi=self.gamma_pi.as_function())
        # validate non-negativity on the actual mode set at t = 0
        sched.rates(hamiltonian.spec.kabs, 0.0)
        return sched

    @property
    def uses_detailed_balance(self) -> bool:
        return self.gamma_pi == "detailed_balance"

    def scan_params(self) -> dict:
        raw = self.raw.get("scan", {})
        out = {
            "gamma_phi": float(raw.get("gamma_phi", self._gamma_phi_scalar())),
            "omega": float(raw.get("omega", self._default_omega())),
            "ratio_min": float(raw.get("ratio_min", 0.0)),
            "ratio_max": float(raw.get("ratio_max", 2.0)),
            "ratio_points": int(raw.get("ratio_points", 41)),
            "bho_min": float(raw.get("bho_min", 0.01)),
            "bho_max": float(raw.get("bho_max", 20.0)),
            "bho_points": int(raw.get("bho_points", 33)),
        }
        if out["ratio_points"] < 2 or out["bho_points"] < 2:
            raise ConfigError("scan grids need at least 2 points")
        return out

    def classical_limit_params(self) -> dict:
        raw = self.raw.get("classical_limit", {})
        seq = raw.get("hbar_sequence", [1.0, 0.5, 0.2, 0.1, 0.05, 0.01])
        if not isinstance(seq, list) or not seq:
            raise ConfigError("classical_limit.hbar_sequence must be a non-empty list")
        seq = [float(h) for h in seq]
        if any(h <= 0 for h in seq) or any(a <= b for a, b in zip(seq, seq[1:])):
            raise ConfigError("hbar_sequence must be positive and strictly decreasing")
        return {
            "hbar_sequence": seq,
            "omega": float(raw.get("omega", self._default_omega())),
            "hot_factor": float(raw.get("hot_factor", 2.0)),
            "gamma_phi": self._gamma_phi_scalar(),
        }

    def _gamma_phi_scalar(self) -> float:
        if self.gamma_phi.kind != "constant":
            raise ConfigError("this command needs a constant gamma_phi")
        return self.gamma_phi.params[0]

    def _default_omega(self) -> float:
        ham = self.hamiltonian()
        return float(np.max(ham.omega(0.0)))


def parse_config(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    _check_keys(raw, _SECTIONS, "configuration root")
    version = _require(raw, "version", "configuration root")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")

    lat = _require(raw, "lattice", "configuration root")
    _check_keys(lat, _LATTICE_KEYS, "lattice")
    N = _require(lat, "N", "lattice")
    if not isinstance(N, int) or N < 2:
        raise ConfigError(f"lattice.N must be an integer >= 2, got {N!r}")
    ell = _positive(_require(lat, "ell", "lattice"), "lattice.ell")
    c = _positive(lat.get("c", 1.0), "lattice.c")
    hbar = _positive(lat.get("hbar", 1.0), "lattice.hbar")
    kB = _positive(lat.get("kB", 1.0), "lattice.kB")

    thermo = _require(raw, "thermostat", "configuration root")
    _check_keys(thermo, _THERMO_KEYS, "thermostat")
    beta = _positive(_require(thermo, "beta", "thermostat"), "thermostat.beta")
    gamma_phi = GammaSpec.parse(_require(thermo, "gamma_phi", "thermostat"),
                                "thermostat.gamma_phi")
    raw_gpi = _require(thermo, "gamma_Pi", "thermostat")
    if raw_gpi == "detailed_balance":
        gamma_pi: GammaSpec | str = "detailed_balance"
    else:
        gamma_pi = GammaSpec.parse(raw_gpi, "thermostat.gamma_Pi")

    proto_raw = _require(raw, "protocol", "configuration root")
    _check_keys(proto_raw, _PROTOCOL_KEYS, "protocol")
    segments = _parse_segments(_require(proto_raw, "segments", "protocol"), "protocol")
    tau = proto_raw.get("tau")
    if tau is not None:
        tau = float(tau)
        if tau < 0:
            raise ConfigError("protocol.tau must be >= 0")

    run = _require(raw, "run", "configuration root")
    _check_keys(run, _RUN_KEYS, "run")
    dt = _positive(_require(run, "dt", "run"), "run.dt")
    steps = _require(run, "steps", "run")
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError(f"run.steps must be a positive integer, got {steps!r}")
    ensemble = run.get("ensemble", 1)
    if not isinstance(ensemble, int) or ensemble < 1:
        raise ConfigError(f"run.ensemble must be a positive integer, got {ensemble!r}")
    seed = run.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"run.seed must be a u64, got {seed!r}")
    stride = run.get("snapshot_stride", 1)
    if not isinstance(stride, int) or stride < 1:
        raise ConfigError(f"run.snapshot_stride must be a positive integer, got {stride!r}")
    M = run.get("fock_truncation", 40)
    if not isinstance(M, int) or M < 2:
        raise ConfigError(f"run.fock_truncation must be an integer >= 2, got {M!r}")

    init = raw.get("initial", {"kind": "gibbs_scaled", "scale": 2.0})
    _check_keys(init, _INITIAL_KEYS, "initial")
    kind = init.get("kind", "gibbs_scaled")
    levels: tuple = ()
    if kind == "gibbs_scaled":
        if "levels" in init:
            raise ConfigError("initial.levels only applies to 'fock_superposition'")
        scale = _positive(init.get("scale", 2.0), "initial.scale")
        mean = float(init.get("mean", 0.0))
    elif kind == "fock_superposition":
        if "scale" in init or "mean" in init:
            raise ConfigError("initial.scale/mean only apply to 'gibbs_scaled'")
        raw_levels = init.get("levels", [0, 1])
        if (not isinstance(raw_levels, list) or not raw_levels
                or any(not isinstance(v, int) or v < 0 for v in raw_levels)
                or len(set(raw_levels)) != len(raw_levels)):
            raise ConfigError("initial.levels must be distinct non-negative integers")
        if max(raw_levels) >= M:
            raise ConfigError("initial.levels must lie below run.fock_truncation")
        levels = tuple(raw_levels)
        scale, mean = 1.0, 0.0
    else:
        raise ConfigError(
            f"initial.kind must be 'gibbs_scaled' or 'fock_superposition', got {kind!r}")

    if "scan" in raw:
        _check_keys(raw["scan"], _SCAN_KEYS, "scan")
    if "classical_limit" in raw:
        _check_keys(raw["classical_limit"], _LIMIT_KEYS, "classical_limit")

    cfg = ScenarioConfig(
        raw=raw, N=N, ell=ell, c=c, hbar=hbar, kB=kB, beta=beta,
        gamma_phi=gamma_phi, gamma_pi=gamma_pi, segments=segments, tau=tau,
        dt=dt, steps=steps, ensemble=ensemble, seed=seed, snapshot_stride=stride,
        fock_truncation=M, initial_kind=kind, initial_scale=scale, initial_mean=mean,
        initial_levels=levels,
    )
    cfg.lattice_spec()  # re-validate physical positivity
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return parse_config(raw)
