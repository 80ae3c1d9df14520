"""Built-in named fixtures: kernels, weights, symbols, exponents.

Names are stable strings used by configs and reports. Parametrized entries
take a colon suffix, e.g. "power:0.5" or "frac_alpha:0.5".
"""

from __future__ import annotations

import numpy as np

from . import bmo
from .errors import ConfigError
from .grid import Grid, GridFunction
from .operators import KernelSpec, distance_kernel
from .spaces import ExponentFunction

KERNELS = ("hilbert", "riesz_1", "riesz_2", "bilinear_riesz", "frac_alpha:a", "bilinear_frac_alpha:a")
WEIGHTS = ("power:a",)
SYMBOLS = ("log_abs", "abs", "sgn_log", "constant:c")
EXPONENTS = ("constant:p", "arctan_profile")


def _param(name: str, prefix: str) -> float:
    try:
        return float(name.split(":", 1)[1])
    except (IndexError, ValueError):
        raise ConfigError(f"fixture {name!r} needs a numeric parameter, e.g. {prefix}:0.5") from None


def make_kernel(name: str, n: int) -> KernelSpec:
    """Kernel fixtures on base dimension n (1 or 2)."""
    if name == "hilbert":
        if n != 1:
            raise ConfigError("hilbert kernel is one-dimensional")
        return KernelSpec("linear", 1, 0.0, lambda t: t[..., 0], name="hilbert")
    if name in ("riesz_1", "riesz_2"):
        if n != 2:
            raise ConfigError(f"{name} kernel lives in dimension 2")
        j = int(name[-1]) - 1
        return KernelSpec("linear", 2, 0.0, lambda t, j=j: t[..., j], name=name)
    if name == "bilinear_riesz":
        return KernelSpec("bilinear", n, 0.0, lambda t: t[..., 0], name="bilinear_riesz")
    if name.startswith("frac_alpha"):
        a = _param(name, "frac_alpha")
        return KernelSpec("linear", n, a, lambda t: np.ones(t.shape[:-1]), name=name)
    if name.startswith("bilinear_frac_alpha"):
        return distance_kernel(n, _param(name, "bilinear_frac_alpha"))
    raise ConfigError(f"unknown kernel fixture {name!r}")


def make_weight(name: str, grid: Grid) -> GridFunction:
    """Weight fixtures sampled at cell centers."""
    if name.startswith("power"):
        a = _param(name, "power")
        r = np.sqrt(sum(m * m for m in grid.meshes()))
        if a != 0.0 and np.any(r == 0.0):
            raise ConfigError("power weight hits a cell center at the origin; use an even m")
        return GridFunction(grid, r**a)
    raise ConfigError(f"unknown weight fixture {name!r}")


def make_symbol(name: str, grid: Grid) -> GridFunction:
    try:
        return bmo.symbol_library(name, grid)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def make_exponent(name: str, grid: Grid) -> ExponentFunction:
    if name.startswith("constant"):
        return ExponentFunction.constant(grid, _param(name, "constant"))
    if name == "arctan_profile":
        return ExponentFunction.from_callable(
            grid, lambda *xs: 2.0 + np.arctan(xs[0]) / np.pi
        )
    raise ConfigError(f"unknown exponent fixture {name!r}")


def registry_text() -> str:
    lines = [
        "kernels:   " + ", ".join(KERNELS),
        "weights:   " + ", ".join(WEIGHTS),
        "symbols:   " + ", ".join(SYMBOLS),
        "exponents: " + ", ".join(EXPONENTS),
    ]
    return "\n".join(lines)
