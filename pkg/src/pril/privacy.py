"""Gaussian mechanisms, Renyi-DP accounting and the clip-and-noise gradient step."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pril.errors import BudgetTooSmall, NonFiniteGradient, TooFewStates, UnknownBudget

DEFAULT_DELTA = 1e-5

# The nine budgets of the published sweep, strictest first.
PUBLISHED_EPSILONS = (0.1, 0.105, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, math.inf)

_DEEP_SIGMAS = (94229.0, 150.0, 22.75, 9.89, 5.38, 3.03, 1.55, 1.0, 0.0)
SIGMA_TABLE = {
    "VI": dict(zip(PUBLISHED_EPSILONS, (2080.08, 1886.69, 520.02, 83.20, 20.80, 5.20, 0.83, 0.21, 0.0))),
    "DQN": dict(zip(PUBLISHED_EPSILONS, _DEEP_SIGMAS)),
    "PPO": dict(zip(PUBLISHED_EPSILONS, _DEEP_SIGMAS)),
}

# L2 sensitivities per algorithm family; VI uses the rounded-up Bellman bound.
CLASS_SENSITIVITY = {"VI": 1.05, "DQN": 1.0, "PPO": 1.0}

DEFAULT_ORDERS = tuple([1.25, 1.5, 1.75] + list(range(2, 11)) + list(range(12, 65, 4)))


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float = math.inf
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive (or infinite)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    @property
    def is_private(self) -> bool:
        return math.isfinite(self.epsilon)


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise scale for one mechanism; ``sigma == 0`` means no privacy."""

    sigma: float
    sensitivity: float = 1.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if not self.sensitivity > 0:
            raise ValueError("sensitivity must be positive")


@dataclass(frozen=True)
class DpSgdConfig:
    """Per-example clipping bound and noise multiplier for a private optimizer step.

    The noise added to the averaged gradient has standard deviation
    ``sigma * clip_norm / n_examples`` per coordinate.
    """

    clip_norm: float = 1.0
    sigma: float = 0.0
    optimizer: str = "sgd"
    activation: str = "relu"

    def __post_init__(self):
        if not self.clip_norm > 0:
            raise ValueError("clip_norm must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if self.sigma > 0 and math.isinf(self.clip_norm):
            raise ValueError("noise needs a finite clip_norm")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")


def bellman_sensitivity(n_states: int) -> float:
    """L2 sensitivity bound ``|S| / (|S| - 1)`` of one Bellman value update."""
    if n_states < 2:
        raise TooFewStates(f"need at least 2 states, got {n_states}")
    return n_states / (n_states - 1)


def gaussian_sample(sigma: float, rng: np.random.Generator, size=None):
    """Zero-mean Gaussian draw(s). ``sigma == 0`` returns exact zeros and consumes no randomness."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sigma, size=size)


def _family(policy_class: str) -> str:
    family = policy_class.upper().split("-")[0]
    if family not in SIGMA_TABLE:
        raise KeyError(f"unknown policy class {policy_class!r}")
    return family


def sigma_from_table(policy_class: str, epsilon: float) -> float:
    """Published noise scale for ``(family, epsilon)``; families are VI, DQN and PPO."""
    table = SIGMA_TABLE[_family(policy_class)]
    for eps, sigma in table.items():
        if eps == epsilon:
            return sigma
    raise UnknownBudget(f"epsilon={epsilon!r} is not a published budget; calibrate instead")


class RdpAccountant:
    """Tracks Renyi-DP of composed Gaussian mechanisms over a fixed order grid.

    Steps are counted per distinct ``(sigma, sensitivity)`` so that ``k``
    compositions equal ``k`` times one composition exactly.
    """

    def __init__(self, orders=DEFAULT_ORDERS):
        self.orders = np.asarray(orders, dtype=np.float64)
        if np.any(self.orders <= 1):
            raise ValueError("Renyi orders must exceed 1")
        self._counts: dict[tuple[float, float], int] = {}

    def compose_gaussian(self, sigma: float, sensitivity: float = 1.0, steps: int = 1) -> None:
        key = (float(sigma), float(sensitivity))
        self._counts[key] = self._counts.get(key, 0) + int(steps)

    @property
    def steps(self) -> int:
        return sum(self._counts.values())

    def rdp(self) -> np.ndarray:
        total = np.zeros_like(self.orders)
        for (sigma, sens), count in self._counts.items():
            with np.errstate(divide="ignore"):
                per_step = self.orders * sens**2 / (2.0 * sigma**2) if sigma > 0 else np.full_like(self.orders, np.inf)
            total = total + count * per_step
        return total

    def epsilon(self, delta: float = DEFAULT_DELTA) -> tuple[float, float]:
        """Best ``(epsilon, order)`` from ``rdp(alpha) + ln(1/delta) / (alpha - 1)``."""
        eps = self.rdp() + math.log(1.0 / delta) / (self.orders - 1.0)
        i = int(np.argmin(eps))
        return float(eps[i]), float(self.orders[i])


def rdp_epsilon_of_gaussian(sigma: float, sensitivity: float, steps: int, delta: float = DEFAULT_DELTA,
                            orders=None) -> float:
    """(epsilon, delta)-DP of ``steps`` composed Gaussian mechanisms via RDP.

    Each step contributes ``alpha * sensitivity^2 / (2 sigma^2)`` at order
    ``alpha``. With ``orders=None`` the conversion is minimized over all
    ``alpha > 1`` in closed form; otherwise over the given grid.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if sigma <= 0:
        return math.inf
    log_inv_delta = math.log(1.0 / delta)
    rho = steps * sensitivity**2 / (2.0 * sigma**2)
    if orders is None:
        return rho + 2.0 * math.sqrt(rho * log_inv_delta)
    a = np.asarray(orders, dtype=np.float64)
    return float(np.min(rho * a + log_inv_delta / (a - 1.0)))


def rdp_calibrate(budget: PrivacyBudget, sensitivity: float, steps: int, sigma_cap: float = 1e7,
                  orders=None) -> float:
    """Smallest noise scale (to within 1e-9 relative) meeting ``budget``; 0 for an infinite budget."""
    if not budget.is_private:
        return 0.0

    def eps(s):
        return rdp_epsilon_of_gaussian(s, sensitivity, steps, budget.delta, orders)

    if eps(sigma_cap) > budget.epsilon:
        raise BudgetTooSmall(f"epsilon={budget.epsilon} needs sigma above the cap {sigma_cap:g}")
    lo, hi = 1e-12, sigma_cap
    while hi / lo - 1.0 > 1e-9:
        mid = math.sqrt(lo * hi)
        if eps(mid) <= budget.epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def clip_gradients(per_example_grads, clip_norm: float) -> np.ndarray:
    """Rescale each row to L2 norm at most ``clip_norm``."""
    g = np.asarray(per_example_grads, dtype=np.float64)
    norms = np.linalg.norm(g, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = np.where(norms > clip_norm, clip_norm / norms, 1.0)
    return g * factors[:, None]


def dp_optimizer_step(per_example_grads, config: DpSgdConfig, rng: np.random.Generator,
                      accountant: RdpAccountant | None = None) -> np.ndarray:
    """Clip every example gradient, average them, and add Gaussian noise.

    The accountant, when given, records one Gaussian step at noise multiplier
    ``config.sigma`` for the whole call.
    """
    g = np.asarray(per_example_grads, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] == 0:
        raise ValueError("expected a non-empty (n_examples, n_params) array")
    finite = np.all(np.isfinite(g), axis=1)
    if not finite.all():
        raise NonFiniteGradient(int(np.flatnonzero(~finite)[0]))
    update = clip_gradients(g, config.clip_norm).mean(axis=0)
    if config.sigma > 0:
        update = update + gaussian_sample(config.sigma * config.clip_norm / g.shape[0], rng, size=update.shape)
    if accountant is not None:
        accountant.compose_gaussian(config.sigma, 1.0)
    return update
