"""Power-law double-well potential and its monotone nonlinearity.

The potential is W(v) = |v|^p / p - (lam/2) v^2 with p in (1, inf), p != 2.
Its convex part has derivative beta(v) = |v|^(p-1) sign(v); the concave
quadratic is treated explicitly by the time steppers.  For p < 2 the
derivative beta' blows up at the origin, so solvers consume a smoothed
variant (v^2 + delta^2)^((p-2)/2) v while all reported energies use the
exact power law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PotentialParams:
    """Exponent p, concave coefficient lam, smoothing delta, Yosida epsilon.

    lam is 1 for the original system and lambda1(sigma) for the modified one.
    delta = 0 is only admissible for p > 2 (where beta' is continuous);
    beta_scale = 0 switches the power-law term off entirely, which turns the
    per-step problems into linear ones (diagnostic use only).
    """

    p: float
    lam: float = 1.0
    delta: float | None = None
    epsilon_yosida: float = 1e-2
    beta_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (1.0 < self.p < np.inf) or self.p == 2.0:
            raise ValueError(f"need p in (1, inf) with p != 2, got p={self.p}")
        if self.lam < 0:
            raise ValueError(f"need lam >= 0, got {self.lam}")
        if self.delta is None:
            object.__setattr__(self, "delta", 0.0 if self.p > 2 else 1e-8)
        if self.delta < 0 or (self.delta == 0.0 and self.p < 2):
            raise ValueError("delta = 0 is only allowed for p > 2")
        if self.epsilon_yosida <= 0:
            raise ValueError("epsilon_yosida must be positive")


def beta(params: PotentialParams, v):
    """Exact monotone nonlinearity |v|^(p-1) sign v."""
    v = np.asarray(v, dtype=float)
    out = params.beta_scale * np.abs(v) ** (params.p - 1.0) * np.sign(v)
    return out if out.ndim else float(out)


def beta_hat(params: PotentialParams, v):
    """Primitive of beta with beta_hat(0) = 0, i.e. |v|^p / p."""
    v = np.asarray(v, dtype=float)
    out = params.beta_scale * np.abs(v) ** params.p / params.p
    return out if out.ndim else float(out)


def W(params: PotentialParams, v):
    """Double-well potential beta_hat(v) - (lam/2) v^2."""
    v = np.asarray(v, dtype=float)
    out = beta_hat(params, v) - 0.5 * params.lam * v**2
    return out if np.ndim(out) else float(out)


def beta_reg(params: PotentialParams, v):
    """Solver-side beta: (v^2 + delta^2)^((p-2)/2) v, exact when delta = 0."""
    v = np.asarray(v, dtype=float)
    if params.delta == 0.0:
        return beta(params, v)
    out = params.beta_scale * (v**2 + params.delta**2) ** ((params.p - 2.0) / 2.0) * v
    return out if out.ndim else float(out)


def beta_hat_reg(params: PotentialParams, v):
    """Primitive of beta_reg vanishing at 0: ((v^2+d^2)^(p/2) - d^p)/p."""
    v = np.asarray(v, dtype=float)
    d = params.delta
    if d == 0.0:
        return beta_hat(params, v)
    out = params.beta_scale * ((v**2 + d**2) ** (params.p / 2.0) - d**params.p) / params.p
    return out if out.ndim else float(out)


def beta_prime_reg(params: PotentialParams, v):
    """Derivative of beta_reg: (v^2+d^2)^((p-4)/2) ((p-1) v^2 + d^2)."""
    v = np.asarray(v, dtype=float)
    p, d = params.p, params.delta
    if d == 0.0:
        # p > 2 here by the delta invariant, so |v|^(p-2) -> 0 at v = 0
        out = params.beta_scale * (p - 1.0) * np.abs(v) ** (p - 2.0)
        return out if out.ndim else float(out)
    out = params.beta_scale * (v**2 + d**2) ** ((p - 4.0) / 2.0) * ((p - 1.0) * v**2 + d**2)
    return out if out.ndim else float(out)


def yosida_beta(params: PotentialParams, x: float) -> float:
    """Yosida approximation beta_eps(x) = (x - j)/eps with j + eps*beta(j) = x.

    The resolvent equation has a unique root by strict monotonicity of
    r -> r + eps*beta(r); it is found by bisection on [0, |x|] with a Newton
    polish, to absolute accuracy 1e-12.  beta_eps(x) equals beta(j).
    """
    eps = params.epsilon_yosida
    if x == 0.0:
        return 0.0
    s = 1.0 if x > 0 else -1.0
    ax = abs(x)
    p, c = params.p, params.beta_scale

    def g(j: float) -> float:
        return j + eps * c * j ** (p - 1.0) - ax

    # g(0) = -ax < 0 and g(ax) >= 0, so [0, ax] brackets the root
    lo, hi = 0.0, ax
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    j = 0.5 * (lo + hi)
    for _ in range(20):
        gj = g(j)
        if abs(gj) <= 1e-13 * max(1.0, ax):
            break
        gp = 1.0 + (eps * c * (p - 1.0) * j ** (p - 2.0) if j > 0 else 0.0)
        if not np.isfinite(gp) or gp <= 0.0:
            break
        step = gj / gp
        if not (lo <= j - step <= hi):
            break
        j -= step
    return s * (ax - j) / eps


def truncate_beta(params: PotentialParams, eps: float, x: float) -> float:
    """beta clamped at the levels beta(+-1/eps); bounded, Lipschitz, monotone."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    cap = float(beta(params, 1.0 / eps))
    return float(np.clip(beta(params, x), -cap, cap))
