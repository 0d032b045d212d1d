"""Experiment configuration: a strict sectioned key-value schema.

A config file has four sections.  Unknown sections or keys are rejected,
so typos fail loudly instead of silently falling back to defaults.

    [model]
    family = none | compound_poisson | double_exponential |
             gamma_like | tempered_stable
    sigma  = 0.3
    # compound_poisson:   atoms = y:intensity, y:intensity, ...
    # double_exponential: lam, p_up, alpha_plus, alpha_minus
    # gamma_like:         c_neg, g, c_pos, m
    # tempered_stable:    alpha, eta0, a0, positive_atoms (atom syntax)

    [market]
    r = 0.05
    delta = 0.0
    strike = 100.0
    maturity = 0.5

    [grid]
    n_x = 2001
    n_t = 120
    theta_min = 5e-4          # optional, solver default otherwise
    epsilon = 1e-3            # small-jump resolution cutoff
    theta_marks = 5e-4, 5e-3  # optional exact ladder nodes
    drop_protect = 0.0        # optional: no cutoff widening below this theta
    span = 2.1                # optional log-price half-width override

    [experiment]
    kind = price | boundary | asympt | simcheck | verify
    output_dir = out
    seed = 0
    # price:    spots = 80, 100, 120   theta = 0.5 (default maturity)
    # asympt:   window_lo / window_hi (theta bounds for the rate fit)
    #           exponent_tol, constant_rtol, growth_min (assertion bands)
    # simcheck: t_values = 1e-4, ...   n_paths = 100000
    # verify:   spots (oracle comparison points)

The ``kind`` in the file must agree with the command-line subcommand when
both are given; mismatches are configuration errors, not silent overrides.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

from .models import (
    CompoundPoisson,
    DoubleExponential,
    GammaLike,
    JumpMeasure,
    LevyModel,
    MarketParams,
    ModelError,
    NoJumps,
    TemperedStableNegative,
    make_model,
)

EXPERIMENT_KINDS = ("price", "boundary", "asympt", "simcheck", "verify")

_MODEL_KEYS = {
    "none": {"family", "sigma"},
    "compound_poisson": {"family", "sigma", "atoms"},
    "double_exponential": {"family", "sigma", "lam", "p_up", "alpha_plus",
                           "alpha_minus"},
    "gamma_like": {"family", "sigma", "c_neg", "g", "c_pos", "m"},
    "tempered_stable": {"family", "sigma", "alpha", "eta0", "a0",
                        "positive_atoms"},
}
_GRID_KEYS = {"n_x", "n_t", "theta_min", "epsilon", "theta_marks",
              "drop_protect", "span", "jump_budget", "substep_budget"}
_MARKET_KEYS = {"r", "delta", "strike", "maturity"}
_EXPERIMENT_KEYS = {"kind", "output_dir", "seed", "spots", "theta",
                    "window_lo", "window_hi", "exponent_tol",
                    "constant_rtol", "growth_min", "t_values", "n_paths"}


class ConfigError(ValueError):
    """Schema violation in an experiment config (exit code 2 material)."""


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment: assembled model plus run options."""

    path: str
    kind: str
    model: LevyModel
    grid_options: Dict[str, object]
    output_dir: str
    seed: int
    options: Dict[str, object]
    raw: Dict[str, Dict[str, str]]


def _section_line(path: str, section: str) -> str:
    """Human anchor 'path:line' of a section header, best effort."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                if re.match(r"^\s*\[%s\]\s*$" % re.escape(section), line):
                    return "%s:%d" % (path, i)
    except OSError:
        pass
    return path


def _fail(path: str, section: str, msg: str) -> ConfigError:
    return ConfigError("%s: [%s] %s" % (_section_line(path, section), section, msg))


def _require(cp: configparser.ConfigParser, path: str, section: str) -> None:
    if not cp.has_section(section):
        raise ConfigError("%s: missing required section [%s]" % (path, section))


def _known_keys(cp, path, section, allowed) -> None:
    extra = set(cp.options(section)) - allowed
    if extra:
        raise _fail(path, section, "unknown key(s): %s" % ", ".join(sorted(extra)))


def _get_float(cp, path, section, key, default=None, required=False) -> Optional[float]:
    if not cp.has_option(section, key):
        if required:
            raise _fail(path, section, "is missing key '%s'" % key)
        return default
    raw = cp.get(section, key)
    try:
        return float(raw)
    except ValueError:
        raise _fail(path, section, "key '%s' is not a number: %r" % (key, raw))


def _get_int(cp, path, section, key, default=None, required=False) -> Optional[int]:
    if not cp.has_option(section, key):
        if required:
            raise _fail(path, section, "is missing key '%s'" % key)
        return default
    raw = cp.get(section, key)
    try:
        return int(raw)
    except ValueError:
        raise _fail(path, section, "key '%s' is not an integer: %r" % (key, raw))


def _get_floats(cp, path, section, key) -> Optional[Tuple[float, ...]]:
    if not cp.has_option(section, key):
        return None
    raw = cp.get(section, key)
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise _fail(path, section, "key '%s' is not a comma list of numbers: %r"
                    % (key, raw))


def _parse_atoms(cp, path, section, key) -> Tuple[Tuple[float, float], ...]:
    raw = cp.get(section, key)
    atoms = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        parts = tok.split(":")
        if len(parts) != 2:
            raise _fail(path, section,
                        "key '%s' entries must be y:intensity, got %r" % (key, tok))
        try:
            atoms.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise _fail(path, section,
                        "key '%s' entry is not numeric: %r" % (key, tok))
    if not atoms:
        raise _fail(path, section, "key '%s' lists no atoms" % key)
    return tuple(atoms)


def _build_measure(cp, path: str) -> JumpMeasure:
    sec = "model"
    family = cp.get(sec, "family", fallback=None)
    if family is None:
        raise _fail(path, sec, "is missing key 'family'")
    family = family.strip().lower()
    if family not in _MODEL_KEYS:
        raise _fail(path, sec, "unknown family %r (choose from %s)"
                    % (family, ", ".join(sorted(_MODEL_KEYS))))
    _known_keys(cp, path, sec, _MODEL_KEYS[family])
    if family == "none":
        return NoJumps()
    if family == "compound_poisson":
        if not cp.has_option(sec, "atoms"):
            raise _fail(path, sec, "is missing key 'atoms'")
        return CompoundPoisson(_parse_atoms(cp, path, sec, "atoms"))
    if family == "double_exponential":
        return DoubleExponential(
            lam=_get_float(cp, path, sec, "lam", required=True),
            p_up=_get_float(cp, path, sec, "p_up", required=True),
            alpha_plus=_get_float(cp, path, sec, "alpha_plus", required=True),
            alpha_minus=_get_float(cp, path, sec, "alpha_minus", required=True))
    if family == "gamma_like":
        return GammaLike(
            c_neg=_get_float(cp, path, sec, "c_neg", required=True),
            g=_get_float(cp, path, sec, "g", required=True),
            c_pos=_get_float(cp, path, sec, "c_pos", required=True),
            m=_get_float(cp, path, sec, "m", required=True))
    pos = (_parse_atoms(cp, path, sec, "positive_atoms")
           if cp.has_option(sec, "positive_atoms") else ())
    return TemperedStableNegative(
        alpha=_get_float(cp, path, sec, "alpha", required=True),
        eta0=_get_float(cp, path, sec, "eta0", default=1.0),
        a0=_get_float(cp, path, sec, "a0", default=-1.0),
        positive_atoms=pos)


def load_config(path: str, kind: Optional[str] = None,
                out: Optional[str] = None,
                seed: Optional[int] = None) -> ExperimentConfig:
    """Parse, validate, and assemble an experiment config.

    ``kind``, ``out`` and ``seed`` are command-line overrides; ``kind``
    must agree with the file when both are present.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError("%s: %s" % (path, exc)) from exc
    if not read:
        raise ConfigError("%s: cannot read config file" % path)
    known_sections = {"model", "market", "grid", "experiment"}
    extra = set(cp.sections()) - known_sections
    if extra:
        raise ConfigError("%s: unknown section(s): %s"
                          % (path, ", ".join(sorted(extra))))
    for sec in ("model", "market", "experiment"):
        _require(cp, path, sec)
    _known_keys(cp, path, "market", _MARKET_KEYS)
    _known_keys(cp, path, "experiment", _EXPERIMENT_KEYS)
    if cp.has_section("grid"):
        _known_keys(cp, path, "grid", _GRID_KEYS)

    try:
        market = MarketParams(
            r=_get_float(cp, path, "market", "r", required=True),
            delta=_get_float(cp, path, "market", "delta", required=True),
            strike=_get_float(cp, path, "market", "strike", required=True),
            maturity=_get_float(cp, path, "market", "maturity", required=True))
    except ModelError as exc:
        raise ConfigError("%s: [market] %s" % (_section_line(path, "market"), exc)) from exc
    sigma = _get_float(cp, path, "model", "sigma", default=0.0)
    try:
        model = make_model(market, sigma, _build_measure(cp, path))
    except ModelError as exc:
        raise ConfigError("%s: [model] %s" % (_section_line(path, "model"), exc)) from exc

    grid_options: Dict[str, object] = {}
    if cp.has_section("grid"):
        for key, getter in (("n_x", _get_int), ("n_t", _get_int),
                            ("theta_min", _get_float), ("epsilon", _get_float),
                            ("drop_protect", _get_float), ("span", _get_float),
                            ("jump_budget", _get_float),
                            ("substep_budget", _get_float)):
            val = getter(cp, path, "grid", key)
            if val is not None:
                grid_options["epsilon_jump" if key == "epsilon" else key] = val
        marks = _get_floats(cp, path, "grid", "theta_marks")
        if marks is not None:
            grid_options["theta_marks"] = marks
    tmin = grid_options.get("theta_min")
    if tmin is not None and not (0.0 < float(tmin) < market.maturity):
        raise _fail(path, "grid", "theta_min must lie in (0, maturity)")

    file_kind = cp.get("experiment", "kind", fallback=None)
    if file_kind is not None:
        file_kind = file_kind.strip().lower()
        if file_kind not in EXPERIMENT_KINDS:
            raise _fail(path, "experiment", "unknown kind %r (choose from %s)"
                        % (file_kind, ", ".join(EXPERIMENT_KINDS)))
    if kind is not None and file_kind is not None and kind != file_kind:
        raise _fail(path, "experiment",
                    "kind %r disagrees with the %r subcommand" % (file_kind, kind))
    final_kind = kind or file_kind
    if final_kind is None:
        raise _fail(path, "experiment", "is missing key 'kind'")

    output_dir = out if out is not None else cp.get(
        "experiment", "output_dir", fallback="out")
    final_seed = seed if seed is not None else _get_int(
        cp, path, "experiment", "seed", default=0)

    options: Dict[str, object] = {}
    spots = _get_floats(cp, path, "experiment", "spots")
    if spots is not None:
        options["spots"] = spots
    for key in ("theta", "window_lo", "window_hi", "exponent_tol",
                "constant_rtol", "growth_min"):
        val = _get_float(cp, path, "experiment", key)
        if val is not None:
            options[key] = val
    tv = _get_floats(cp, path, "experiment", "t_values")
    if tv is not None:
        options["t_values"] = tv
    npaths = _get_int(cp, path, "experiment", "n_paths")
    if npaths is not None:
        options["n_paths"] = npaths

    raw = {sec: dict(cp.items(sec)) for sec in cp.sections()}
    return ExperimentConfig(path=path, kind=final_kind, model=model,
                            grid_options=grid_options, output_dir=output_dir,
                            seed=int(final_seed), options=options, raw=raw)
