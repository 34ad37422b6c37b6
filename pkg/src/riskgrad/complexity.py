"""Closed-form iteration-complexity quantities for (risk-sensitive) REINFORCE.

Everything here is a pure function of explicitly supplied constants: the
smoothness constants ``F1``, ``F2``, the expected-smoothness constants
``A``, ``B``, ``C`` and the initial sub-optimality ``delta0`` are inputs,
never estimated from a trained policy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

UPPER_BETA = math.exp(-0.5)


class VacuousBoundError(ValueError):
    """The requested bound has no binding term (all constants zero)."""


def _check_gamma(gamma):
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")


def _dec(x):
    # the decimal literal a float prints as, so 1 - 0.99 is exactly 1/100
    return Fraction(repr(float(x)))


def _check_beta(beta):
    if beta == 0 or not math.isfinite(beta):
        raise ValueError("beta must be finite and nonzero")


@dataclass(frozen=True)
class ComplexityInputs:
    gamma: float
    r_max: float
    F1: float
    F2: float
    A: float
    B: float
    C: float
    delta0: float
    epsilon: float

    def __post_init__(self):
        for name, value in vars(self).items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        _check_gamma(self.gamma)
        if self.r_max <= 0 or self.F1 <= 0 or self.F2 <= 0:
            raise ValueError("r_max, F1 and F2 must be positive")
        if min(self.A, self.B, self.C, self.delta0) < 0:
            raise ValueError("A, B, C and delta0 must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class BetaRange:
    lower: float
    upper: float

    @property
    def nonempty(self) -> bool:
        return self.lower < self.upper

    def contains(self, beta) -> bool:
        return self.lower < abs(beta) < self.upper


def lipschitz_neutral(gamma, r_max, F1, F2) -> float:
    """Smoothness constant ``r_max / (1 - gamma)**2 * (F1**2 + F2)``.

    Evaluated exactly on the inputs' decimal values and rounded once.
    """
    _check_gamma(gamma)
    g, r, f1, f2 = map(_dec, (gamma, r_max, F1, F2))
    return float(r / (1 - g) ** 2 * (f1 ** 2 + f2))


def alpha_ratio(beta, x, convention="printed") -> float:
    """Ratio of the exponential-utility value magnitude to the plain one.

    ``convention="printed"`` gives ``exp(|b| x) / (|b| x)``, minimised at
    ``x = 1/|b|`` with value ``e``. ``convention="scaled"`` gives
    ``|b| exp(|b| x) / x``, which has the same minimiser but minimum
    ``b**2 * e`` (the value :func:`alpha_min` reports).
    """
    _check_beta(beta)
    if not x > 0:
        raise ValueError("x must be positive")
    b = abs(beta)
    if convention == "printed":
        return math.exp(b * x) / (b * x)
    if convention == "scaled":
        return b * math.exp(b * x) / x
    raise ValueError(f"unknown alpha convention {convention!r}")


def alpha_min(beta) -> float:
    _check_beta(beta)
    return beta * beta * math.e


def lipschitz_sensitive(L, alpha) -> float:
    if not (L > 0 and alpha > 0):
        raise ValueError("L and alpha must be positive")
    return alpha * L


def beta_admissible_range(gamma, r_max) -> BetaRange:
    """Open interval of ``|beta|`` for which ``beta**2 * e < 1`` and ``1/|beta|`` is reachable."""
    _check_gamma(gamma)
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    return BetaRange(float((1 - _dec(gamma)) / _dec(r_max)), UPPER_BETA)


def iterations_lower_bound(delta0, L, A, B, C, epsilon) -> float:
    """``12 delta0 L / eps**2 * max(B, 12 delta0 A / eps**2, 2 C / eps**2)``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not (delta0 > 0 and L > 0):
        raise ValueError("delta0 and L must be positive")
    if min(A, B, C) < 0:
        raise ValueError("A, B, C must be nonnegative")
    eps2 = epsilon * epsilon
    worst = max(B, 12.0 * delta0 * A / eps2, 2.0 * C / eps2)
    if worst == 0:
        raise VacuousBoundError("A = B = C = 0: the iteration bound is vacuous")
    return 12.0 * delta0 * L / eps2 * worst


def stepsize_corollary2(L_beta, A, B, C, T, epsilon, convention="squared") -> float:
    """Constant stepsize ``min(1/sqrt(L A T), 1/(L B), eps**2/(2 L C))``.

    A candidate whose constant is zero is +inf. The default C-term uses
    ``eps**2``, under which the stationarity bound at ``T >= n_beta`` is at most
    ``eps**2``; ``convention="printed"`` uses ``eps / (2 L C)`` instead, which
    breaks that guarantee once ``eps < 1/4``.
    """
    if not (L_beta > 0 and T > 0 and epsilon > 0):
        raise ValueError("L_beta, T and epsilon must be positive")
    if min(A, B, C) < 0:
        raise ValueError("A, B, C must be nonnegative")
    if convention == "squared":
        c_num = epsilon * epsilon
    elif convention == "printed":
        c_num = epsilon
    else:
        raise ValueError(f"unknown stepsize convention {convention!r}")
    candidates = [
        1.0 / math.sqrt(L_beta * A * T) if A > 0 else math.inf,
        1.0 / (L_beta * B) if B > 0 else math.inf,
        c_num / (2.0 * L_beta * C) if C > 0 else math.inf,
    ]
    eta = min(candidates)
    if math.isinf(eta):
        raise VacuousBoundError("A = B = C = 0: the stepsize is unconstrained")
    return eta


def corollary1_bound(delta0, L_beta, A, B, C, eta, T) -> float:
    """Upper bound on ``min_t E||grad J_beta(theta_t)||**2`` after ``T`` steps.

    ``(1 + L eta**2 A)**T`` is evaluated as ``exp(T log1p(L eta**2 A))``;
    returns ``inf`` when that overflows.
    """
    if not (L_beta > 0 and eta > 0 and T > 0):
        raise ValueError("L_beta, eta and T must be positive")
    if delta0 < 0 or min(A, B, C) < 0:
        raise ValueError("delta0, A, B, C must be nonnegative")
    margin = 2.0 - L_beta * B * eta
    if margin <= 0:
        raise ValueError(f"eta={eta} is outside (0, 2/(L_beta*B))")
    noise = L_beta * C * eta / margin
    if delta0 == 0:
        return noise
    log_term = (T * math.log1p(L_beta * eta * eta * A)
                + math.log(2.0 * delta0) - math.log(eta * T * margin))
    if log_term > 709.0:
        return math.inf
    return math.exp(log_term) + noise
