"""Run configuration: a sectioned ``key = value`` file (INI syntax).

Sections and keys (every key optional; defaults are the reference setup)::

    [scene]      n_t, n_r, led_separation_cm, pd_separation_cm, h_lum_cm,
                 h_ue_cm, receiver (square | perturbed), perturbation_deg
                 ("g1,b1; g2,b2; ..."), semi_angle_deg, fov_half_deg,
                 area_cm2, ue_radius_cm, ue_angle_deg, cell_radius_cm
    [scheme]     schemes (comma list), m, n_a, i_lower_ma, i_upper_ma,
                 subset (maxmin | union_bound), labels (auto | gray |
                 min_dist_max_hamming | union_bound), label_budget,
                 label_seed, channel_aware (bool)
    [scheme.X]   per-scheme overrides of any [scheme] key, X in
                 smx | sm | gsm2 | flim
    [detector]   kind (ml | mmse), rs_variant (raw | centered),
                 snr_convention (transmit | received)
    [sim]        seed, n_symbols, snr_db ("a, b, c" or "start:stop:step",
                 stop inclusive), min_errors, workers
    [cn]         radial_step_cm, angular_step_deg
    [se_table]   schemes, n_t ("1-10" or list), m, n_a (int or "half")
    [output]     directory

Angles are degrees, lengths centimetres, currents milliamps.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from flim.codebook import SCHEMES, Codebook, build_codebook
from flim.errors import FlimError, ParseError, ValidationError
from flim.geometry import PAPER_PERTURBATION_DEG, SceneConfig
from flim.sim import DetectorSpec

__all__ = ["SchemeConfig", "SimSettings", "SeTableSettings", "RunConfig", "parse_config", "parse_config_text"]

_SCHEME_ALIASES = {"gsm-ii": "gsm2", "gsmii": "gsm2", "gsm_ii": "gsm2"}

_SCENE_KEYS = {
    "n_t": int,
    "n_r": int,
    "led_separation_cm": float,
    "pd_separation_cm": float,
    "h_lum_cm": float,
    "h_ue_cm": float,
    "receiver": str,
    "perturbation_deg": str,
    "semi_angle_deg": float,
    "fov_half_deg": float,
    "area_cm2": float,
    "ue_radius_cm": float,
    "ue_angle_deg": float,
    "cell_radius_cm": float,
}
_SCHEME_KEYS = {
    "schemes": str,
    "m": int,
    "n_a": int,
    "i_lower_ma": float,
    "i_upper_ma": float,
    "subset": str,
    "labels": str,
    "label_budget": int,
    "label_seed": int,
    "channel_aware": bool,
}
_DETECTOR_KEYS = {"kind": str, "rs_variant": str, "snr_convention": str}
_SIM_KEYS = {"seed": int, "n_symbols": int, "snr_db": str, "min_errors": int, "workers": int}
_CN_KEYS = {"radial_step_cm": float, "angular_step_deg": float}
_SE_KEYS = {"schemes": str, "n_t": str, "m": int, "n_a": str}
_OUTPUT_KEYS = {"directory": str}

_SECTIONS = {
    "scene": _SCENE_KEYS,
    "scheme": _SCHEME_KEYS,
    "detector": _DETECTOR_KEYS,
    "sim": _SIM_KEYS,
    "cn": _CN_KEYS,
    "se_table": _SE_KEYS,
    "output": _OUTPUT_KEYS,
}


def canonical_scheme(name: str) -> str:
    key = name.strip().lower()
    key = _SCHEME_ALIASES.get(key, key)
    if key not in SCHEMES:
        raise ValidationError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
    return key


@dataclass(frozen=True)
class SchemeConfig:
    name: str
    m: int = 2
    n_a: int | None = None
    i_lower_ma: float = 500.0
    i_upper_ma: float = 800.0
    subset: str = "maxmin"
    labels: str = "auto"
    label_budget: int = 1000
    label_seed: int = 0
    channel_aware: bool = False

    def build(self, n_t: int, channel=None) -> Codebook:
        return build_codebook(
            self.name,
            n_t,
            self.m,
            n_active=self.n_a,
            i_lower_ma=self.i_lower_ma,
            i_upper_ma=self.i_upper_ma,
            subset=self.subset,
            labels=self.labels,
            h=channel if self.channel_aware else None,
            budget=self.label_budget,
            seed=self.label_seed,
        )


@dataclass(frozen=True)
class SimSettings:
    seed: int = 0
    n_symbols: int = 1_000_000
    snr_db: tuple[float, ...] = tuple(float(x) for x in range(200, 301, 2))
    min_errors: int | None = None
    workers: int = 1


@dataclass(frozen=True)
class SeTableSettings:
    schemes: tuple[str, ...] = ("ssk", "gssk", "gssk2", "sm", "gsm", "gsm2", "smx", "flim")
    n_t: tuple[int, ...] = tuple(range(1, 11))
    m: int = 2
    n_a: int | None = None  # None means n_t // 2


@dataclass(frozen=True)
class RunConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    schemes: dict = field(default_factory=dict)
    default_schemes: tuple[str, ...] = ("flim",)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    snr_convention: str = "transmit"
    sim: SimSettings = field(default_factory=SimSettings)
    radial_step_cm: float = 2.5
    angular_step_deg: float = 1.0
    se_table: SeTableSettings = field(default_factory=SeTableSettings)
    output_dir: str = "results"
    source_text: str = ""

    def scheme(self, name: str) -> SchemeConfig:
        key = canonical_scheme(name)
        cfg = self.schemes.get(key)
        if cfg is None:
            raise ValidationError(f"scheme {key!r} is not configured")
        _validate_scheme(cfg, required=True)
        return cfg

    def with_overrides(self, **sim_overrides) -> RunConfig:
        """Copy with ``[sim]`` fields replaced (``None`` values are ignored)."""
        updates = {k: v for k, v in sim_overrides.items() if v is not None}
        return replace(self, sim=replace(self.sim, **updates)) if updates else self


def _convert(section: str, key: str, raw: str, kind):
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(float(text)) if float(text).is_integer() else int(text)
        return kind(text)
    except ValueError:
        raise ValidationError(f"[{section}] {key}: cannot read {raw!r} as {kind.__name__}") from None


def _read_section(parser, section: str, schema: dict) -> dict:
    if not parser.has_section(section):
        return {}
    out = {}
    for key, raw in parser.items(section):
        if key not in schema:
            raise ValidationError(f"[{section}] unknown key {key!r}")
        if raw.strip() == "":
            continue
        out[key] = _convert(section, key, raw, schema[key])
    return out


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """``"a, b, c"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ValidationError("[sim] snr_db: step must be positive")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = tuple(float(v) for v in np.round(start + step * np.arange(n), 10))
        else:
            values = tuple(float(p) for p in text.replace(";", ",").split(",") if p.strip())
    except ValueError:
        raise ValidationError(f"[sim] snr_db: cannot parse {text!r}") from None
    if not values:
        raise ValidationError("[sim] snr_db: empty grid")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError(f"[sim] snr_db: grid must be strictly increasing, got {text!r}")
    return values


def _parse_angles(text: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = [p for p in chunk.replace(" ", ",").split(",") if p]
        if len(parts) != 2:
            raise ValidationError(f"[scene] perturbation_deg: expected 'polar,azimuth' pairs, got {chunk!r}")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValidationError(f"[scene] perturbation_deg: non-numeric pair {chunk!r}") from None
    return tuple(pairs)


def _parse_int_list(section: str, key: str, text: str) -> tuple[int, ...]:
    try:
        if "-" in text and "," not in text:
            lo, hi = (int(p) for p in text.split("-"))
            return tuple(range(lo, hi + 1))
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ValidationError(f"[{section}] {key}: cannot parse {text!r}") from None


def _scene(values: dict) -> SceneConfig:
    kwargs = {}
    for key, value in values.items():
        if key == "receiver":
            kwargs["receiver_kind"] = value.strip().lower()
        elif key == "perturbation_deg":
            kwargs["perturbation_deg"] = _parse_angles(value)
        elif key == "ue_angle_deg":
            kwargs["ue_angle_rad"] = math.radians(value % 360.0)
        else:
            kwargs[key] = value
    try:
        return SceneConfig(**kwargs)
    except FlimError as exc:
        raise ValidationError(f"[scene] {exc}") from exc


_SCHEME_FIELDS = {f.name for f in fields(SchemeConfig)} - {"name"}


def _schemes(parser, base: dict) -> tuple[dict, tuple[str, ...]]:
    defaults = tuple(canonical_scheme(s) for s in base.pop("schemes", "flim").split(",") if s.strip())
    per_scheme = {}
    for section in parser.sections():
        if section.startswith("scheme."):
            per_scheme[canonical_scheme(section.split(".", 1)[1])] = _read_section(
                parser, section, {k: v for k, v in _SCHEME_KEYS.items() if k != "schemes"}
            )
    configs = {}
    for name in SCHEMES:
        merged = {**base, **per_scheme.get(name, {})}
        configs[name] = SchemeConfig(name=name, **{k: v for k, v in merged.items() if k in _SCHEME_FIELDS})
    for name, cfg in configs.items():
        _validate_scheme(cfg, required=name in defaults or name in per_scheme)
    return configs, defaults


def _validate_scheme(cfg: SchemeConfig, required: bool) -> None:
    section = f"[scheme.{cfg.name}]"
    if cfg.m < 1:
        raise ValidationError(f"{section} m must be >= 1")
    if not 0 < cfg.i_lower_ma < cfg.i_upper_ma:
        raise ValidationError(f"{section} need 0 < i_lower_ma < i_upper_ma")
    if cfg.subset not in ("maxmin", "union_bound"):
        raise ValidationError(f"{section} subset must be maxmin or union_bound")
    if cfg.labels not in ("auto", "gray", "min_dist_max_hamming", "union_bound"):
        raise ValidationError(f"{section} unknown labels strategy {cfg.labels!r}")
    if required and cfg.name == "gsm2" and cfg.n_a is None:
        raise ValidationError(f"{section} gsm2 requires n_a (number of active LEDs)")


def _read_parser(text: str, origin: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        where = f"{origin}:{line}" if line else origin
        raise ParseError(f"{where}: {exc.message if hasattr(exc, 'message') else exc}") from exc
    return parser


def parse_config_text(text: str, origin: str = "<config>") -> RunConfig:
    parser = _read_parser(text, origin)
    for section in parser.sections():
        if section not in _SECTIONS and not section.startswith("scheme."):
            raise ValidationError(f"unknown section [{section}]")
    scene = _scene(_read_section(parser, "scene", _SCENE_KEYS))
    schemes, defaults = _schemes(parser, _read_section(parser, "scheme", _SCHEME_KEYS))

    det = _read_section(parser, "detector", _DETECTOR_KEYS)
    convention = det.pop("snr_convention", "transmit")
    if convention not in ("transmit", "received"):
        raise ValidationError("[detector] snr_convention must be transmit or received")
    try:
        detector = DetectorSpec(**det)
    except FlimError as exc:
        raise ValidationError(f"[detector] {exc}") from exc

    sim_values = _read_section(parser, "sim", _SIM_KEYS)
    if "snr_db" in sim_values:
        sim_values["snr_db"] = parse_snr_grid(sim_values["snr_db"])
    sim = SimSettings(**sim_values)
    if sim.n_symbols < 1:
        raise ValidationError("[sim] n_symbols must be >= 1")
    if sim.workers < 1:
        raise ValidationError("[sim] workers must be >= 1")
    if sim.min_errors is not None and sim.min_errors < 1:
        raise ValidationError("[sim] min_errors must be >= 1")

    cn = _read_section(parser, "cn", _CN_KEYS)
    if any(v <= 0 for v in cn.values()):
        raise ValidationError("[cn] steps must be positive")

    se_values = _read_section(parser, "se_table", _SE_KEYS)
    se = SeTableSettings()
    if "schemes" in se_values:
        se = replace(se, schemes=tuple(s.strip().lower() for s in se_values["schemes"].split(",") if s.strip()))
    if "n_t" in se_values:
        se = replace(se, n_t=_parse_int_list("se_table", "n_t", se_values["n_t"]))
    if "m" in se_values:
        se = replace(se, m=se_values["m"])
    if "n_a" in se_values and se_values["n_a"].strip().lower() != "half":
        se = replace(se, n_a=_convert("se_table", "n_a", se_values["n_a"], int))

    output = _read_section(parser, "output", _OUTPUT_KEYS)
    return RunConfig(
        scene=scene,
        schemes=schemes,
        default_schemes=defaults,
        detector=detector,
        snr_convention=convention,
        sim=sim,
        radial_step_cm=cn.get("radial_step_cm", 2.5),
        angular_step_deg=cn.get("angular_step_deg", 1.0),
        se_table=se,
        output_dir=output.get("directory", "results"),
        source_text=text,
    )


def parse_config(path) -> RunConfig:
    """Read and validate a config file.

    A JSON run manifest written by the CLI is accepted too; its embedded
    config text is parsed, which reproduces the original run.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from exc
        if "config_text" not in doc:
            raise ParseError(f"{path}: not a run manifest (no config_text)")
        return parse_config_text(doc["config_text"], origin=str(path))
    return parse_config_text(text, origin=str(path))


def paper_perturbation_text() -> str:
    return "; ".join(f"{g:g},{b:g}" for g, b in PAPER_PERTURBATION_DEG)
