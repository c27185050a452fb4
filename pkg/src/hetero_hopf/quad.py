"""Composite Gauss-Legendre quadrature on (0, 1) and the weighted moments
built on it.

Every integral in the reduced theory has the form ``∫ g(m(x), e^{αm(x)}) dx``,
so a :class:`WeightedMoments` instance evaluates m and e^{αm} once at the
quadrature nodes and reuses them.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import MomentOverflow, NonFiniteIntegrand

OMEGA = 1.0  # |Ω| for Ω = (0, 1)


@dataclass(frozen=True)
class QuadRule:
    panels: int = 256
    points_per_panel: int = 4
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.panels < 1 or self.points_per_panel < 1:
            raise ValueError("panels and points_per_panel must be positive")
        ref_x, ref_w = np.polynomial.legendre.leggauss(self.points_per_panel)
        width = OMEGA / self.panels
        left = np.arange(self.panels) * width
        nodes = (left[:, None] + 0.5 * width * (ref_x[None, :] + 1.0)).ravel()
        weights = np.tile(0.5 * width * ref_w, self.panels)
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)


DEFAULT_RULE = QuadRule()


def integrate(f, rule: QuadRule = DEFAULT_RULE) -> float:
    """Integrate ``f`` over (0, 1).

    ``f`` is called once with the full node array and must be vectorized.
    """
    values = np.asarray(f(rule.nodes), dtype=float)
    values = np.broadcast_to(values, rule.nodes.shape)
    if not np.all(np.isfinite(values)):
        raise NonFiniteIntegrand("integrand is not finite at every quadrature node")
    return float(rule.weights @ values)


class WeightedMoments:
    """Cached weighted integrals for one (profile, α) pair.

    Attributes ``m`` and ``ew`` hold m(x) and e^{αm(x)} at the quadrature
    nodes. Cached quantities:

    * ``E(p)`` = ∫ e^{pαm} dx
    * ``E_m`` = ∫ e^{αm} m dx
    * ``T(k)`` = ∫ e^{αm} m^k (m - 1) dx
    """

    def __init__(self, profile, alpha: float, rule: QuadRule = DEFAULT_RULE):
        self.profile = profile
        self.alpha = float(alpha)
        self.rule = rule
        self.w = rule.weights
        self.m = np.asarray(profile(rule.nodes), dtype=float)
        with np.errstate(over="ignore"):
            self.ew = np.exp(self.alpha * self.m)
        if not np.all(np.isfinite(self.ew)):
            raise MomentOverflow(f"e^(alpha*m) overflows at alpha={alpha}")
        self._lock = threading.Lock()
        self._cache: dict = {}

    def _cached(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        if not np.isfinite(value):
            raise MomentOverflow(f"moment {key} is not finite at alpha={self.alpha}")
        with self._lock:
            self._cache[key] = value
        return value

    def integral(self, values) -> float:
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise NonFiniteIntegrand("integrand is not finite at every quadrature node")
        return float(self.w @ values)

    def E(self, p: int = 1) -> float:
        return self._cached(("E", p), lambda: float(self.w @ self.ew**p))

    @property
    def E_m(self) -> float:
        return self._cached(("Em",), lambda: float(self.w @ (self.ew * self.m)))

    def T(self, k: int = 0) -> float:
        def compute():
            with np.errstate(over="ignore", invalid="ignore"):
                return float(self.w @ (self.ew * self.m**k * (self.m - 1.0)))

        return self._cached(("T", k), compute)

    def holling(self, c: float, q: int) -> float:
        """G_q(c) = ∫ e^{qαm} / (1 + c e^{αm})^q dx (not cached: c varies)."""
        return float(self.w @ (self.ew / (1.0 + c * self.ew)) ** q)


_cache_lock = threading.Lock()
_moment_cache: dict = {}


def _cache_key(profile, alpha, rule):
    return (profile.key, rule.panels, rule.points_per_panel, float(f"{alpha:.15g}"))


def moments(profile, alpha: float, rule: QuadRule = DEFAULT_RULE) -> WeightedMoments:
    """Shared :class:`WeightedMoments` for (profile, α), keyed on α to 15 digits."""
    key = _cache_key(profile, alpha, rule)
    with _cache_lock:
        wm = _moment_cache.get(key)
    if wm is None:
        wm = WeightedMoments(profile, alpha, rule)
        with _cache_lock:
            wm = _moment_cache.setdefault(key, wm)
    return wm


def clear_cache(profile=None) -> None:
    """Drop cached moments, for one profile or for all of them."""
    with _cache_lock:
        if profile is None:
            _moment_cache.clear()
        else:
            for key in [k for k in _moment_cache if k[0] == profile.key]:
                del _moment_cache[key]


def holling_integral(profile, alpha: float, c: float, q: int, rule: QuadRule = DEFAULT_RULE) -> float:
    """G_q(c, α) = ∫ e^{qαm} / (1 + c e^{αm})^q dx.

    G_1 is S_1(c), G_2 = -S_1'(c) and G_3 = S_1''(c) / 2.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    if q not in (1, 2, 3):
        raise ValueError("q must be 1, 2 or 3")
    return moments(profile, alpha, rule).holling(c, q)


def big_T(profile, alpha: float, k: int = 0, rule: QuadRule = DEFAULT_RULE) -> float:
    """T_k(α) = ∫ e^{αm} m^k (m - 1) dx, the k-th α-derivative of T(α)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return moments(profile, alpha, rule).T(k)


def B_sequence(profile, k_max: int, rule: QuadRule = DEFAULT_RULE) -> list[float]:
    """B_k = ∫ m^k (m - 1) dx for k = 0..k_max (equal to T_k(0))."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    wm = moments(profile, 0.0, rule)
    return [wm.T(k) for k in range(k_max + 1)]
