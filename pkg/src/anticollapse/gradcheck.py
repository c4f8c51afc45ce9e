"""Central finite-difference verification of every analytic gradient.

Seeded random instances are generated per loss family; the analytic gradient
is compared entrywise against a two-sided difference quotient of the scalar
value. Errors are reported as max absolute deviation over max-norm of the
numeric gradient, so zero-gradient cases stay well-defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import seeded_rng
from .losses import (
    AntiCollapseConfig,
    ProxyAnchorParams,
    _pair_anticollapse_raw,
    _proxy_anchor_raw,
    _proxy_anticollapse_raw,
    _proxy_nca_raw,
)
from .rates import RateParams, coding_rate, coding_rate_grad
from .validation import normalize_rows

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-5

FAMILIES = ("coding_rate", "pair_anticollapse", "proxy_nca", "proxy_anchor", "proxy_anticollapse")


def central_difference(fn, x: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Two-sided difference quotient of scalar ``fn`` at every entry of ``x``."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        bumped = x.copy()
        bumped[idx] = x[idx] + step
        f_plus = fn(bumped)
        bumped[idx] = x[idx] - step
        f_minus = fn(bumped)
        grad[idx] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-norm deviation relative to the numeric gradient's max-norm."""
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric))) / scale


@dataclass(frozen=True)
class CheckCase:
    """Outcome of one seeded instance: worst error over all checked operands."""

    family: str
    seed: int
    error: float


def _random_instance(rng: np.random.Generator, max_n=16, max_d=8, max_m=6):
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(2, max_d + 1))
    m = int(rng.integers(2, max_m + 1))
    x = normalize_rows(rng.standard_normal((n, d)))
    labels = rng.integers(0, m, size=n)
    labels[0] = 0  # keep at least one proxy class populated
    proxies = normalize_rows(rng.standard_normal((m, d)))
    class_ids = np.arange(m)
    return x, labels, proxies, class_ids


def check_family(
    family: str,
    seed: int,
    step: float = DEFAULT_STEP,
    variant: str = "mini-batch",
    negate_analytic: bool = False,
) -> CheckCase:
    """Finite-difference check of one loss family on one seeded instance."""
    rng = seeded_rng(seed)
    x, labels, proxies, class_ids = _random_instance(rng)
    params = RateParams(0.5)
    anchor = ProxyAnchorParams()
    antico = AntiCollapseConfig(nu=0.01, rate=params, variant=variant, anchor=anchor)

    if family == "coding_rate":
        pairs = [(coding_rate_grad(x, params), lambda a: coding_rate(a, params), x)]
    elif family == "pair_anticollapse":
        _, grad = _pair_anticollapse_raw(x, params)
        pairs = [(grad, lambda a: _pair_anticollapse_raw(a, params)[0], x)]
    elif family == "proxy_nca":
        _, gx, gp = _proxy_nca_raw(x, labels, proxies, class_ids)
        pairs = [
            (gx, lambda a: _proxy_nca_raw(a, labels, proxies, class_ids)[0], x),
            (gp, lambda a: _proxy_nca_raw(x, labels, a, class_ids)[0], proxies),
        ]
    elif family == "proxy_anchor":
        _, gx, gp, _ = _proxy_anchor_raw(x, labels, proxies, class_ids, anchor)
        pairs = [
            (gx, lambda a: _proxy_anchor_raw(a, labels, proxies, class_ids, anchor)[0], x),
            (gp, lambda a: _proxy_anchor_raw(x, labels, a, class_ids, anchor)[0], proxies),
        ]
    elif family == "proxy_anticollapse":
        _, gx, gp = _proxy_anticollapse_raw(x, labels, proxies, class_ids, antico)
        pairs = [
            (gx, lambda a: _proxy_anticollapse_raw(a, labels, proxies, class_ids, antico)[0], x),
            (gp, lambda a: _proxy_anticollapse_raw(x, labels, a, class_ids, antico)[0], proxies),
        ]
    else:
        raise ValueError(f"unknown loss family {family!r}")

    worst = 0.0
    for analytic, value_fn, operand in pairs:
        if negate_analytic:
            analytic = -analytic
        numeric = central_difference(value_fn, operand, step)
        worst = max(worst, relative_error(analytic, numeric))
    return CheckCase(family=family, seed=seed, error=worst)


def run_suite(
    families=FAMILIES,
    cases: int = 20,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    negate_analytic: bool = False,
) -> dict[str, float]:
    """Max relative error per family over ``cases`` seeded instances.

    The composite loss is checked in both proxy-selection variants.
    """
    results: dict[str, float] = {}
    for family in families:
        variants = ("mini-batch", "all-class") if family == "proxy_anticollapse" else (None,)
        worst = 0.0
        for variant in variants:
            for i in range(cases):
                case = check_family(
                    family,
                    seed=seed * 100_000 + i,
                    step=step,
                    variant=variant or "mini-batch",
                    negate_analytic=negate_analytic,
                )
                worst = max(worst, case.error)
        results[family] = worst
    return results
