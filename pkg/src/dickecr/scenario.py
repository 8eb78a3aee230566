"""Run configurations: parsing, presets and validation.

Configuration files are flat ``key = value`` text with ``#`` comments.
Complex numbers are written ``re,im``; lists are comma separated. Real
values may be simple products/quotients of numbers and the symbols ``pi``,
``Tf`` (field period 2 pi/omega), ``Ta`` (atomic period 2 pi/delta), ``TE`` and
``TS``, e.g. ``t_max = 1.3*TE`` or ``theta0 = pi/4``.

A ``preset = <name>`` line loads a frozen parameter set first; later keys
override it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from .model import ModelError, ModelParams, two_j_of
from .pert import ResonanceError, effective_frequencies
from .states import cutoff_ok

METHODS = ("exact", "pert", "sca", "driven")
OUTPUTS = ("jx", "jy", "jz", "entropy", "field_var", "norm", "energy",
           "husimi_field", "husimi_atom", "schmidt")
SAMPLINGS = ("uniform", "windowed")


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class Scenario:
    name: str
    j: str  # kept as text so half-integers round-trip exactly
    delta: float
    omega: float
    lam: float
    n_max: int
    theta0: float
    phi0: float
    alpha0: complex
    t_max: float
    methods: tuple[str, ...]
    outputs: tuple[str, ...]
    sampling: str = "uniform"
    n_samples: int = 2000
    anchor_step: float = 0.0  # windowed sampling: spacing of the window starts
    window_samples: int = 16
    husimi_times: tuple[float, ...] = ()
    schmidt_times: tuple[float, ...] = ()
    schmidt_k: int = 4
    field_re: tuple[float, float, int] = (-7.0, 7.0, 141)
    field_im: tuple[float, float, int] = (-7.0, 7.0, 141)
    atom_theta_max: float = math.pi / 2
    atom_n_theta: int = 91
    atom_n_phi: int = 180
    tol: float = 1e-12
    rk4_dt: float = 0.0  # 0 selects the default step

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.delta, self.omega, self.lam, float(Fraction(self.j)), self.n_max)

    @property
    def spin_j(self) -> float:
        return two_j_of(Fraction(self.j)) / 2


# ---------------------------------------------------------------- parsing

_FACTOR = re.compile(r"\s*([*/])?\s*([^*/\s]+)")


def _symbols(raw: dict[str, str]) -> dict[str, float]:
    """Time-scale symbols available once the model parameters are known."""
    out = {"pi": math.pi}
    try:
        delta = _real(raw.get("delta", "1"), out)
        omega = _real(raw["omega"], out)
        lam = _real(raw["lam"], out)
    except KeyError:
        return out
    out["Tf"] = 2 * math.pi / omega if omega else math.inf
    out["Ta"] = 2 * math.pi / abs(delta) if delta else math.inf
    try:
        p = ModelParams(delta, omega, lam, float(Fraction(raw.get("j", "1/2"))), 1)
        f = effective_frequencies(p)
        out["TE"], out["TS"] = f.T_E, f.T_S
    except (ModelError, ResonanceError, ValueError):
        pass
    return out


def _real(text: str, symbols: dict[str, float]) -> float:
    text = text.strip()
    if not text:
        raise ConfigError("empty numeric value")
    pos, value = 0, None
    for m in _FACTOR.finditer(text):
        if m.start() != pos:
            raise ConfigError(f"cannot parse {text!r}")
        pos = m.end()
        op, tok = m.group(1), m.group(2)
        if tok in symbols:
            x = symbols[tok]
        else:
            try:
                x = float(tok)
            except ValueError:
                raise ConfigError(f"unknown symbol {tok!r} in {text!r}") from None
        if value is None:
            if op:
                raise ConfigError(f"cannot parse {text!r}")
            value = x
        elif op == "*":
            value *= x
        elif op == "/":
            value /= x
        else:
            raise ConfigError(f"cannot parse {text!r}")
    if value is None or pos != len(text):
        raise ConfigError(f"cannot parse {text!r}")
    return value


def _complex(text: str, symbols) -> complex:
    parts = text.split(",")
    if len(parts) == 1:
        return complex(_real(parts[0], symbols), 0.0)
    if len(parts) != 2:
        raise ConfigError(f"complex value must be 're,im', got {text!r}")
    return complex(_real(parts[0], symbols), _real(parts[1], symbols))


def _list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = val.strip()
    return raw


_ALL_KEYS = {f.name for f in fields(Scenario)} | {"preset"}
_REQUIRED = ("name", "j", "omega", "lam", "n_max", "theta0", "alpha0", "t_max", "methods", "outputs")


def resolve(raw: dict[str, str]) -> Scenario:
    """Turn raw key/value strings (preset already merged) into a validated Scenario."""
    unknown = set(raw) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")
    sym = _symbols(raw)

    def real(key, default=None):
        if key not in raw:
            return default
        return _real(raw[key], sym)

    def integer(key, default=None):
        if key not in raw:
            return default
        try:
            return int(raw[key])
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {raw[key]!r}") from None

    def reals(key):
        return tuple(_real(t, sym) for t in _list(raw.get(key, "")))

    def axis(key, default):
        if key not in raw:
            return default
        parts = _list(raw[key])
        if len(parts) != 3:
            raise ConfigError(f"{key} must be 'lo, hi, n'")
        return (_real(parts[0], sym), _real(parts[1], sym), int(parts[2]))

    try:
        j = str(Fraction(raw["j"]))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"j must be a (half-)integer, got {raw['j']!r}") from None
    sc = Scenario(
        name=raw["name"],
        j=j,
        delta=real("delta", 1.0),
        omega=real("omega"),
        lam=real("lam"),
        n_max=integer("n_max"),
        theta0=real("theta0"),
        phi0=real("phi0", 0.0),
        alpha0=_complex(raw["alpha0"], sym),
        t_max=real("t_max"),
        methods=tuple(_list(raw["methods"])),
        outputs=tuple(_list(raw["outputs"])),
        sampling=raw.get("sampling", "uniform"),
        n_samples=integer("n_samples", 2000),
        anchor_step=real("anchor_step", 0.0),
        window_samples=integer("window_samples", 16),
        husimi_times=reals("husimi_times"),
        schmidt_times=reals("schmidt_times"),
        schmidt_k=integer("schmidt_k", 4),
        field_re=axis("field_re", (-7.0, 7.0, 141)),
        field_im=axis("field_im", (-7.0, 7.0, 141)),
        atom_theta_max=real("atom_theta_max", math.pi / 2),
        atom_n_theta=integer("atom_n_theta", 91),
        atom_n_phi=integer("atom_n_phi", 180),
        tol=real("tol", 1e-12),
        rk4_dt=real("rk4_dt", 0.0),
    )
    validate(sc)
    return sc


def validate(sc: Scenario) -> None:
    if not sc.methods:
        raise ConfigError("methods list is empty")
    bad = [m for m in sc.methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
    if len(set(sc.methods)) != len(sc.methods):
        raise ConfigError("duplicate methods")
    bad = [o for o in sc.outputs if o not in OUTPUTS]
    if bad:
        raise ConfigError(f"unknown outputs {bad}; choose from {OUTPUTS}")
    if sc.sampling not in SAMPLINGS:
        raise ConfigError(f"sampling must be one of {SAMPLINGS}")
    try:
        sc.params
    except (ModelError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not (sc.t_max > 0 and math.isfinite(sc.t_max)):
        raise ConfigError("t_max must be positive and finite")
    if sc.sampling == "uniform" and sc.n_samples < 2:
        raise ConfigError("n_samples must be >= 2")
    if sc.sampling == "windowed":
        if sc.window_samples < 4:
            raise ConfigError("window_samples must be >= 4")
        if sc.anchor_step <= 2 * math.pi / abs(sc.delta):
            raise ConfigError("anchor_step must exceed one atomic period")
    for t in sc.husimi_times + sc.schmidt_times:
        if not 0 <= t <= sc.t_max:
            raise ConfigError(f"snapshot time {t} outside [0, t_max]")
    kets = {"exact", "pert"} & set(sc.methods)
    wants = {"husimi_field", "husimi_atom", "schmidt"} & set(sc.outputs)
    if wants and not kets:
        raise ConfigError(f"outputs {sorted(wants)} need the exact or pert method")
    if {"husimi_field", "husimi_atom"} & set(sc.outputs) and not sc.husimi_times:
        raise ConfigError("husimi outputs requested without husimi_times")
    if "schmidt" in sc.outputs and not sc.schmidt_times:
        raise ConfigError("schmidt output requested without schmidt_times")
    if sc.schmidt_k < 1:
        raise ConfigError("schmidt_k must be >= 1")
    for ax in (sc.field_re, sc.field_im):
        if ax[2] < 2 or not ax[0] < ax[1]:
            raise ConfigError("field grid axes need lo < hi and n >= 2")
    if sc.atom_n_theta < 2 or sc.atom_n_phi < 4 or not 0 < sc.atom_theta_max <= math.pi:
        raise ConfigError("invalid atomic grid")
    if "husimi_field" in sc.outputs:
        corners = [complex(r, i) for r in sc.field_re[:2] for i in sc.field_im[:2]]
        if not all(cutoff_ok(c, sc.n_max) for c in corners):
            raise ConfigError(f"field Husimi grid reaches beyond what n_max={sc.n_max} represents")
    if sc.tol <= 0 or sc.rk4_dt < 0:
        raise ConfigError("tol must be positive and rk4_dt non-negative")


# ---------------------------------------------------------------- presets

_SMALL_OMEGA = dict(j="3/2", delta="1", omega="0.01", lam="0.01", n_max="200", theta0="pi/2", alpha0="5,0")
_FIELD_CAT = dict(j="10", delta="1", omega="0.05", lam="0.02", n_max="80", theta0="pi/4", alpha0="3,0",
                  field_re="-4, 4, 81", field_im="-4, 4, 81")
_ATOM_CAT = dict(_FIELD_CAT, omega="20", lam="0.5")
_RABI = dict(j="1/2", delta="1", omega="0.01", lam="0.02", n_max="100", theta0="pi/2", alpha0="5,0")

PRESETS: dict[str, dict[str, str]] = {
    "fig1": dict(
        _SMALL_OMEGA, name="fig1", methods="exact, pert",
        outputs="jx, jz, entropy, field_var, norm, energy, husimi_field",
        t_max="1.3*TE", sampling="windowed", anchor_step="0.25*Tf", husimi_times="25*Tf",
    ),
    "fig2": dict(
        _SMALL_OMEGA, name="fig2", methods="exact", outputs="jz, entropy, husimi_field",
        t_max="50.5*Tf", sampling="windowed", anchor_step="0.25*Tf",
        husimi_times="10*Tf, 25*Tf, 50*Tf",
    ),
    "fig4": dict(
        _FIELD_CAT, name="fig4", methods="exact, pert",
        outputs="jx, jz, entropy, field_var, norm, husimi_atom, husimi_field, schmidt",
        t_max="TE", n_samples="1001", husimi_times="25*Tf", schmidt_times="25*Tf",
    ),
    "fig5": dict(
        _FIELD_CAT, name="fig5", methods="exact", outputs="jz, entropy, husimi_atom, husimi_field, schmidt",
        t_max="25*Tf", n_samples="201", husimi_times="25*Tf", schmidt_times="25*Tf", schmidt_k="2",
    ),
    "fig6": dict(
        _FIELD_CAT, name="fig6", methods="exact", outputs="jz, entropy, husimi_atom, husimi_field, schmidt",
        t_max="60*Tf", n_samples="481", husimi_times="60*Tf", schmidt_times="60*Tf", schmidt_k="2",
    ),
    "fig7": dict(
        _ATOM_CAT, name="fig7", methods="exact, pert",
        outputs="jx, jz, entropy, field_var, norm, husimi_atom, husimi_field, schmidt",
        t_max="1.2*TS", n_samples="2001", husimi_times="32*Ta", schmidt_times="32*Ta",
    ),
    "fig8": dict(
        _ATOM_CAT, name="fig8", methods="exact", outputs="jz, entropy, husimi_atom, husimi_field, schmidt",
        t_max="32*Ta", n_samples="321", husimi_times="32*Ta", schmidt_times="32*Ta", schmidt_k="2",
    ),
    "fig9": dict(
        _RABI, name="fig9", methods="exact, pert, sca, driven", outputs="jz, jx, entropy",
        t_max="0.55*TE", sampling="windowed", anchor_step="0.25*Tf",
    ),
    "fig10a": dict(
        _RABI, name="fig10a", lam="0.005", alpha0="20,0", n_max="600",
        methods="exact, sca, driven", outputs="jz, jx, entropy",
        t_max="0.55*TE", sampling="windowed", anchor_step="0.25*Tf",
    ),
    "fig10b": dict(
        _RABI, name="fig10b", j="10", n_max="140", methods="exact, sca, driven", outputs="jz, jx, entropy",
        t_max="0.55*TE", sampling="windowed", anchor_step="0.25*Tf",
    ),
}


def preset_raw(name: str) -> dict[str, str]:
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def load_preset(name: str) -> Scenario:
    return resolve(preset_raw(name))


def load_text(text: str) -> Scenario:
    raw = parse_text(text)
    base = preset_raw(raw.pop("preset")) if "preset" in raw else {}
    base.update(raw)
    return resolve(base)


def load_config(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return load_text(text)


def with_overrides(sc: Scenario, **kw) -> Scenario:
    out = replace(sc, **kw)
    validate(out)
    return out


# ---------------------------------------------------------------- manifest

def _r(x: float) -> str:
    return repr(float(x))


def to_text(sc: Scenario) -> str:
    """Fully resolved configuration; loading it reproduces ``sc`` exactly."""
    rows = [
        ("name", sc.name), ("j", sc.j), ("delta", _r(sc.delta)), ("omega", _r(sc.omega)),
        ("lam", _r(sc.lam)), ("n_max", str(sc.n_max)), ("theta0", _r(sc.theta0)), ("phi0", _r(sc.phi0)),
        ("alpha0", f"{_r(sc.alpha0.real)},{_r(sc.alpha0.imag)}"), ("t_max", _r(sc.t_max)),
        ("methods", ", ".join(sc.methods)), ("outputs", ", ".join(sc.outputs)),
        ("sampling", sc.sampling), ("n_samples", str(sc.n_samples)), ("anchor_step", _r(sc.anchor_step)),
        ("window_samples", str(sc.window_samples)),
        ("husimi_times", ", ".join(map(_r, sc.husimi_times))),
        ("schmidt_times", ", ".join(map(_r, sc.schmidt_times))), ("schmidt_k", str(sc.schmidt_k)),
        ("field_re", f"{_r(sc.field_re[0])}, {_r(sc.field_re[1])}, {sc.field_re[2]}"),
        ("field_im", f"{_r(sc.field_im[0])}, {_r(sc.field_im[1])}, {sc.field_im[2]}"),
        ("atom_theta_max", _r(sc.atom_theta_max)), ("atom_n_theta", str(sc.atom_n_theta)),
        ("atom_n_phi", str(sc.atom_n_phi)), ("tol", _r(sc.tol)), ("rk4_dt", _r(sc.rk4_dt)),
    ]
    return "".join(f"{k} = {v}\n" for k, v in rows if v != "")
