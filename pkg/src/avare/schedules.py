"""Time-indexed scalar sequences: restriction levels eps_t and step sizes alpha_t.

All ``t`` arguments are 1-based iteration counters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["EpsilonSchedule", "StepSchedule", "epsilon_at", "alpha_at", "t0_of"]

_EPS_MODES = ("single", "minibatch", "constant_step")
_STEP_MODES = ("power_decay", "experiment", "constant")


@dataclass(frozen=True)
class EpsilonSchedule:
    """Restriction level schedule.

    ``single``:        1 / (C^(1-delta/3) (C + t - 1)^(delta/3))
    ``minibatch``:     1 / (C^(1-delta/3) (C + m (t - 1))^(delta/3))
    ``constant_step``: the minibatch value plus ``p_min``

    ``C >= N`` in the decreasing modes and ``C <= 1/(1/N - p_min)`` in the
    constant-step mode; both guarantee ``eps_1 <= 1/N``.
    """

    N: int
    C: float
    delta: float = 1.0
    m: int = 1
    mode: str = "single"
    p_min: float = 0.0

    def __post_init__(self):
        if self.mode not in _EPS_MODES:
            raise ValueError(f"unknown epsilon mode {self.mode!r}")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if self.m < 1:
            raise ValueError("batch size m must be >= 1")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.mode == "constant_step":
            if not 0.0 <= self.p_min <= 1.0 / self.N:
                raise ValueError("p_min must lie in [0, 1/N]")
            gap = 1.0 / self.N - self.p_min
            # relative slack so C = 1/(1/N - p_min) computed in floats is accepted
            if gap > 0 and self.C > (1.0 / gap) * (1 + 1e-12):
                raise ValueError(f"C={self.C} exceeds 1/(1/N - p_min) = {1.0 / gap}")
        else:
            if self.p_min != 0.0:
                raise ValueError("p_min is only meaningful in constant_step mode")
            if self.C < self.N:
                raise ValueError(f"C={self.C} < N={self.N} would give eps_1 > 1/N")

    @classmethod
    def default_constant_step(cls, N, m=1, delta=1.0):
        """Constant-step defaults: p_min = 1/(5N), C = 1/(1/N - p_min)."""
        p_min = 1.0 / (5 * N)
        return cls(N=N, C=1.0 / (1.0 / N - p_min), delta=delta, m=m,
                   mode="constant_step", p_min=p_min)

    def __call__(self, t):
        return epsilon_at(self, t)


def epsilon_at(s: EpsilonSchedule, t: int) -> float:
    if t < 1:
        raise ValueError("t must be >= 1")
    k = s.delta / 3.0
    growth = (t - 1) if s.mode == "single" else s.m * (t - 1)
    eps = 1.0 / (s.C ** (1.0 - k) * (s.C + growth) ** k)
    if s.mode == "constant_step":
        eps += s.p_min
    # float noise at t = 1 (e.g. C = 1/(1/N - p_min)) must not leave [0, 1/N]
    return min(eps, 1.0 / s.N)


def t0_of(s: EpsilonSchedule, N: int | None = None) -> int:
    """First t with eps_t <= 1/(2N)."""
    n = s.N if N is None else N
    target = 1.0 / (2 * n) - s.p_min
    if target <= 0:
        raise ValueError("eps_t never reaches 1/(2N): p_min >= 1/(2N)")
    k = s.delta / 3.0
    # eps_t - p_min <= target  <=>  C + step*(t-1) >= (1/(target C^(1-k)))^(1/k)
    need = (1.0 / (target * s.C ** (1.0 - k))) ** (1.0 / k)
    step = 1 if s.mode == "single" else s.m
    t = max(1, math.ceil((need - s.C) / step) + 1)
    # the closed form can be off by one in floating point
    while t > 1 and epsilon_at(s, t - 1) <= 1.0 / (2 * n):
        t -= 1
    while epsilon_at(s, t) > 1.0 / (2 * n):
        t += 1
    return t


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes.

    ``power_decay``: E / (F + t - 1)^beta
    ``experiment``:  m / (2 N L + m mu t)
    ``constant``:    alpha
    """

    mode: str
    E: float = 1.0
    F: float = 1.0
    beta: float = 1.0
    m: int = 1
    N: int = 1
    L: float = 1.0
    mu: float = 1.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.mode not in _STEP_MODES:
            raise ValueError(f"unknown step mode {self.mode!r}")
        if self.mode == "power_decay":
            if self.E <= 0 or self.F < 1 or not 0 < self.beta <= 1:
                raise ValueError("power_decay needs E > 0, F >= 1, beta in (0, 1]")
        elif self.mode == "experiment":
            if self.m < 1 or self.N < 1 or self.L <= 0 or self.mu <= 0:
                raise ValueError("experiment steps need m, N >= 1 and L, mu > 0")
        elif self.alpha <= 0:
            raise ValueError("constant step alpha must be positive")

    @classmethod
    def power_decay(cls, E, F, beta):
        return cls("power_decay", E=E, F=F, beta=beta)

    @classmethod
    def experiment(cls, m, N, L, mu):
        return cls("experiment", m=m, N=N, L=L, mu=mu)

    @classmethod
    def constant(cls, alpha):
        return cls("constant", alpha=alpha)

    @property
    def decay_exponent(self):
        return {"power_decay": self.beta, "experiment": 1.0, "constant": 0.0}[self.mode]

    def __call__(self, t):
        return alpha_at(self, t)


def alpha_at(s: StepSchedule, t: int) -> float:
    if t < 1:
        raise ValueError("t must be >= 1")
    if s.mode == "power_decay":
        return s.E / (s.F + t - 1) ** s.beta
    if s.mode == "experiment":
        return s.m / (2.0 * s.N * s.L + s.m * s.mu * t)
    return s.alpha
