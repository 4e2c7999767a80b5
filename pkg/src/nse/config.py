"""INI experiment configs.

One file fully specifies an experiment: window family, spectrum model,
observation scenario, estimator settings, and run parameters.  Unknown
sections or keys are errors, not warnings; silent typos in MC configs
cost hours.  `#` starts a comment line.

Sections and keys (all lowercase):

    [window]     b, m, j_min, j_max, mode
    [model]      alpha, g, g0, eps
    [scenario]   beam, schedule, beam_l
    [mask.X]     kind, then kind-specific keys
    [noise.X]    kind, then kind-specific keys
    [estimator]  alpha, tau0, eps, weights, threshold, q, pilot
    [mc]         scales, replicates, seed, order_cap
    [io]         out, write_maps

The schedule maps named (mask, noise) pairs to inclusive scale ranges,
e.g. `schedule = A:0-4, B:5-5, C:6-6`; scales not covered see the full
sky with no noise.  File paths inside mask/noise sections are resolved
relative to the config file.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from .errors import ConfigError, NseError
from .estimator import EstimatorConfig
from .model import FULL_SKY, NO_NOISE, MaskSpec, NoiseSpec, Scenario, SpectrumModel
from .window import WindowFamily, build_windows

_MASK_KEYS = {
    "full_sky": set(),
    "polar_cap": {"theta_cut"},
    "disc": {"center_theta", "center_phi", "radius"},
    "file": {"path"},
}
_NOISE_KEYS = {
    "constant": {"sigma"},
    "colatitude_linear": {"sigma_min", "sigma_max"},
    "hemisphere_step": {"sigma_north", "sigma_south"},
    "file": {"path"},
}


@dataclass(frozen=True)
class Config:
    fam: WindowFamily
    model: SpectrumModel
    scen: Scenario
    est: EstimatorConfig
    scales: tuple
    replicates: int
    seed: int
    order_cap: int
    out: str
    write_maps: bool
    base_dir: str


def _known(section: str, keys, allowed) -> None:
    extra = set(keys) - set(allowed)
    if extra:
        raise ConfigError(f"[{section}] has unknown keys: {sorted(extra)}")


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        if cast is bool:
            return parser.getboolean(section, key)
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def parse_scales(text: str) -> tuple:
    """"3-6" or "3,4,6" or a mix; empty text means no scales."""
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part:
            lo, _, hi = part.partition("-")
            try:
                lo, hi = int(lo), int(hi)
            except ValueError as exc:
                raise ConfigError(f"bad scale range {part!r}") from exc
            if hi < lo:
                raise ConfigError(f"bad scale range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            try:
                out.append(int(part))
            except ValueError as exc:
                raise ConfigError(f"bad scale {part!r}") from exc
    return tuple(out)


def _parse_schedule(text: str):
    """"A:0-4, B:5-5" -> [(name, lo, hi), ...]."""
    entries = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        name, sep, rng = part.partition(":")
        lo, sep2, hi = rng.partition("-")
        if not (sep and sep2 and name):
            raise ConfigError(f"bad schedule entry {part!r}, want NAME:LO-HI")
        try:
            entries.append((name, int(lo), int(hi)))
        except ValueError as exc:
            raise ConfigError(f"bad schedule entry {part!r}") from exc
    return entries


def _parse_beam_l(text: str) -> tuple:
    """"5:32, 6:64" -> ((5, 32), (6, 64))."""
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        j, sep, L = part.partition(":")
        if not sep:
            raise ConfigError(f"bad beam_l entry {part!r}, want J:L")
        try:
            out.append((int(j), int(L)))
        except ValueError as exc:
            raise ConfigError(f"bad beam_l entry {part!r}") from exc
    return tuple(out)


def _mask_from(parser, section: str, base_dir: str) -> MaskSpec:
    keys = dict(parser.items(section))
    kind = keys.pop("kind", None)
    if kind not in _MASK_KEYS:
        raise ConfigError(f"[{section}] kind must be one of {sorted(_MASK_KEYS)}")
    _known(section, keys, _MASK_KEYS[kind])
    try:
        if kind == "polar_cap":
            return MaskSpec(kind=kind, theta_cut=float(keys.get("theta_cut", 0.0)))
        if kind == "disc":
            return MaskSpec(
                kind=kind,
                center=(float(keys.get("center_theta", 0.0)), float(keys.get("center_phi", 0.0))),
                radius=float(keys.get("radius", 0.0)),
            )
        if kind == "file":
            if "path" not in keys:
                raise ConfigError(f"[{section}] file mask needs a path")
            return MaskSpec(kind=kind, path=os.path.join(base_dir, keys["path"]))
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc
    return FULL_SKY


def _noise_from(parser, section: str, base_dir: str) -> NoiseSpec:
    keys = dict(parser.items(section))
    kind = keys.pop("kind", None)
    if kind not in _NOISE_KEYS:
        raise ConfigError(f"[{section}] kind must be one of {sorted(_NOISE_KEYS)}")
    _known(section, keys, _NOISE_KEYS[kind])
    try:
        if kind == "constant":
            return NoiseSpec(kind=kind, sigma=float(keys.get("sigma", 0.0)))
        if kind == "colatitude_linear":
            return NoiseSpec(
                kind=kind,
                sigma_min=float(keys.get("sigma_min", 0.0)),
                sigma_max=float(keys.get("sigma_max", 0.0)),
            )
        if kind == "hemisphere_step":
            return NoiseSpec(
                kind=kind,
                sigma_north=float(keys.get("sigma_north", 0.0)),
                sigma_south=float(keys.get("sigma_south", 0.0)),
            )
        if "path" not in keys:
            raise ConfigError(f"[{section}] file noise needs a path")
        return NoiseSpec(kind=kind, path=os.path.join(base_dir, keys["path"]))
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def load_config(path: str) -> Config:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as f:
            parser.read_file(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))

    plain = {"window", "model", "scenario", "estimator", "mc", "io"}
    for section in parser.sections():
        if section in plain or section.startswith("mask.") or section.startswith("noise."):
            continue
        raise ConfigError(f"unknown section [{section}]")

    sec = "window"
    _known(sec, parser[sec].keys() if parser.has_section(sec) else (), ("b", "m", "j_min", "j_max", "mode"))
    B = _get(parser, sec, "b", float, 2.0) if parser.has_section(sec) else 2.0
    M = _get(parser, sec, "m", int, 5) if parser.has_section(sec) else 5
    j_min = _get(parser, sec, "j_min", int, 0) if parser.has_section(sec) else 0
    j_max = _get(parser, sec, "j_max", int, 8) if parser.has_section(sec) else 8
    mode = _get(parser, sec, "mode", str, "tight") if parser.has_section(sec) else "tight"

    sec = "model"
    _known(sec, parser[sec].keys() if parser.has_section(sec) else (), ("alpha", "g", "g0", "eps"))
    alpha = _get(parser, sec, "alpha", float, 3.0) if parser.has_section(sec) else 3.0
    g_kind = _get(parser, sec, "g", str, "constant") if parser.has_section(sec) else "constant"
    g0 = _get(parser, sec, "g0", float, 1.0) if parser.has_section(sec) else 1.0
    model_eps = _get(parser, sec, "eps", float, 0.0) if parser.has_section(sec) else 0.0

    sec = "scenario"
    _known(sec, parser[sec].keys() if parser.has_section(sec) else (), ("beam", "schedule", "beam_l"))
    beam = _get(parser, sec, "beam", str, "sharp") if parser.has_section(sec) else "sharp"
    schedule_text = _get(parser, sec, "schedule", str, "") if parser.has_section(sec) else ""
    beam_l_text = _get(parser, sec, "beam_l", str, "") if parser.has_section(sec) else ""

    referenced = set()
    schedule = []
    for name, lo, hi in _parse_schedule(schedule_text):
        msec, nsec = f"mask.{name}", f"noise.{name}"
        mask = _mask_from(parser, msec, base_dir) if parser.has_section(msec) else FULL_SKY
        noise = _noise_from(parser, nsec, base_dir) if parser.has_section(nsec) else NO_NOISE
        referenced.update({msec, nsec})
        schedule.append((lo, hi, mask, noise))
    for section in parser.sections():
        if (section.startswith("mask.") or section.startswith("noise.")) and section not in referenced:
            raise ConfigError(f"[{section}] is not referenced by the schedule")

    sec = "estimator"
    _known(sec, parser[sec].keys() if parser.has_section(sec) else (),
           ("alpha", "tau0", "eps", "weights", "threshold", "q", "pilot"))
    est_alpha = _get(parser, sec, "alpha", float, alpha) if parser.has_section(sec) else alpha
    tau0 = _get(parser, sec, "tau0", float, 0.1) if parser.has_section(sec) else 0.1
    est_eps = _get(parser, sec, "eps", float, 0.5) if parser.has_section(sec) else 0.5
    weightm = _get(parser, sec, "weights", str, "mle") if parser.has_section(sec) else "mle"
    thmode = _get(parser, sec, "threshold", str, "schedule") if parser.has_section(sec) else "schedule"
    q = _get(parser, sec, "q", float, 0.5) if parser.has_section(sec) else 0.5
    pilot_text = _get(parser, sec, "pilot", str, "two-pass") if parser.has_section(sec) else "two-pass"
    if pilot_text != "two-pass":
        try:
            pilot = float(pilot_text)
        except ValueError as exc:
            raise ConfigError(f"[estimator] pilot must be 'two-pass' or a number") from exc
    else:
        pilot = "two-pass"

    sec = "mc"
    _known(sec, parser[sec].keys() if parser.has_section(sec) else (),
           ("scales", "replicates", "seed", "order_cap"))
    scales_text = _get(parser, sec, "scales", str, "3-6") if parser.has_section(sec) else "3-6"
    replicates = _get(parser, sec, "replicates", int, 500) if parser.has_section(sec) else 500
    seed = _get(parser, sec, "seed", int, 0) if parser.has_section(sec) else 0
    order_cap = _get(parser, sec, "order_cap", int, 512) if parser.has_section(sec) else 512

    sec = "io"
    _known(sec, parser[sec].keys() if parser.has_section(sec) else (), ("out", "write_maps"))
    out = _get(parser, sec, "out", str, "out") if parser.has_section(sec) else "out"
    write_maps = _get(parser, sec, "write_maps", bool, False) if parser.has_section(sec) else False
    if not os.path.isabs(out):
        out = os.path.join(base_dir, out)

    try:
        fam = build_windows(B, M, j_min, j_max, mode)
        model = SpectrumModel(alpha=alpha, g_kind=g_kind, g0=g0, eps=model_eps, B=B)
        scen = Scenario(schedule=tuple(schedule), beam=beam, beam_l=_parse_beam_l(beam_l_text))
        est = EstimatorConfig(
            alpha=est_alpha, tau0=tau0, eps=est_eps, weight_mode=weightm,
            pilot=pilot, threshold_mode=thmode, q=q,
        )
    except NseError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    return Config(
        fam=fam, model=model, scen=scen, est=est,
        scales=parse_scales(scales_text), replicates=replicates, seed=seed,
        order_cap=order_cap, out=out, write_maps=write_maps, base_dir=base_dir,
    )
