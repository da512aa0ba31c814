"""Builtin Lagrangians and construction of a LagrangianSpec from a run config."""

import logging
from collections.abc import Mapping
from typing import Any

from fracostro._config import RunConfig, get_systems_config
from fracostro._errors import ConfigError, DslError
from fracostro.lagrangian_dsl import Const, LagrangianSpec, coordinates, parse, parse_lagrangian

logger = logging.getLogger(__name__)

BUILTIN_SYSTEMS = ("pu", "damped", "sho")


def uniform_ladder(alpha: float, degree: int) -> tuple[float, ...]:
    """Orders l·α for l = 0..degree."""
    return tuple(l * alpha for l in range(degree + 1))


def coerce_param(name: str, value: Any) -> complex:
    """Accept a number, an [re, im] pair, or a DSL constant such as ``"2*i"``."""
    if isinstance(value, bool):
        raise ConfigError(f"Parameter {name!r} must be numeric")
    if isinstance(value, int | float | complex):
        return complex(value)
    if isinstance(value, list | tuple) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            expr = parse(value, params=set())
        except DslError as e:
            raise ConfigError(f"Parameter {name!r}: {e}") from e
        if isinstance(expr, Const):
            return expr.value
    raise ConfigError(f"Parameter {name!r} must be a number, [re, im] pair or DSL constant, got {value!r}")


def builtin(
    name: str,
    alpha: float | None = None,
    params: Mapping[str, Any] | None = None,
    riewe: bool | None = None,
    ladder: list[float] | None = None,
) -> LagrangianSpec:
    """Builtin system with packaged defaults; any argument given overrides them."""
    systems = get_systems_config()
    if name not in systems:
        raise ConfigError(f"Unknown builtin system {name!r}, expected one of {list(BUILTIN_SYSTEMS)}")
    system = systems[name]

    alpha = float(system["alpha"] if alpha is None else alpha)
    if ladder is None:
        ladder = system["ladder"]
        if ladder == "uniform":
            ladder = uniform_ladder(alpha, int(system["degree"]))
    merged = {**system.get("params", {}), **(params or {})}
    values = {key: coerce_param(key, value) for key, value in merged.items()}
    riewe = bool(system.get("riewe", False)) if riewe is None else riewe

    logger.debug(f"Building {name} on ladder {list(ladder)} with riewe={riewe}")
    return parse_lagrangian(system["lagrangian"], ladder, values, alpha, riewe=riewe, name=name)


def pais_uhlenbeck(w: float = 1.0, eps: float = 0.1, alpha: float = 1.0) -> LagrangianSpec:
    return builtin("pu", alpha=alpha, params={"w": w, "eps": eps})


def damped_oscillator(
    m: float = 1.0, g: float = 0.2, k: float = 1.0, alpha: float = 0.5, riewe: bool = True
) -> LagrangianSpec:
    return builtin("damped", alpha=alpha, params={"m": m, "g": g, "k": k}, riewe=riewe)


def harmonic_oscillator(m: float = 1.0, k: float = 1.0, alpha: float = 1.0) -> LagrangianSpec:
    return builtin("sho", alpha=alpha, params={"m": m, "k": k})


def custom(
    text: str,
    ladder: list[float] | None = None,
    params: Mapping[str, Any] | None = None,
    alpha: float = 1.0,
    riewe: bool = False,
) -> LagrangianSpec:
    """Lagrangian from DSL text; without a ladder, a uniform one just covers the highest q index."""
    values = {key: coerce_param(key, value) for key, value in (params or {}).items()}
    if ladder is None:
        degree = max(coordinates(parse(text, params=set(values))) | {1})
        ladder = list(uniform_ladder(alpha, degree))
    return parse_lagrangian(text, ladder, values, alpha, riewe=riewe)


def from_config(config: RunConfig) -> LagrangianSpec:
    if config.system == "custom":
        return custom(
            config.lagrangian or "",
            ladder=config.ladder,
            params=config.params,
            alpha=1.0 if config.alpha is None else config.alpha,
            riewe=bool(config.riewe),
        )
    return builtin(config.system, alpha=config.alpha, params=config.params, riewe=config.riewe, ladder=config.ladder)
