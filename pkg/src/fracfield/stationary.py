"""Stationary states: global minimization of the free energy and the
eigenvalue criteria for existence of nontrivial states.

A stationary state solves A_sigma u + M_L beta(u) - lam M_c u = 0 (the
discrete weak form with the chemical potential identically zero).  That is
exactly the gradient of the discrete objective

    J(u) = (1/2) u^T A_sigma u + h sum_i beta_hat(u_i) - (lam/2) u^T M_c u,

so converged minimizers satisfy the virial identity
J(u*) = -(1/2 - 1/p) sum_i h |u*_i|^p to machine precision, and stationary
states are exact fixed points of the Allen-Cahn stepper.  Nontrivial states
exist iff lambda1(sigma) < 1; each nontrivial minimizer is one-signed and
obeys the smallness bound derived from the coercivity radius.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import potential as pot
from .fracop import FracOperator, OutOfRangeError, assemble
from .grid import Domain1D, Field, lp_norm
from .potential import PotentialParams
from .spectral import first_eigenpair

STAT_TOL = 1e-9
_TRIVIAL_NORM = 1e-7
_MAX_ITER = 5000


class NoConvergenceError(RuntimeError):
    """No descent start reached the stationary residual tolerance."""


@dataclass(frozen=True)
class StationaryResult:
    u_star: Field
    energy: float
    residual: float
    lambda1_sigma: float
    classification: str  # trivial | nontrivial-positive | nontrivial-negative

    @property
    def is_trivial(self) -> bool:
        return self.classification == "trivial"


def nontriviality_predicate(lambda1_sigma: float) -> str:
    """'exists-nontrivial' iff lambda1(sigma) < 1, else 'only-trivial'."""
    return "exists-nontrivial" if lambda1_sigma < 1.0 else "only-trivial"


def smallness_bound(
    params: PotentialParams, lambda1_sigma: float, vol_omega: float
) -> float:
    """Radius ((p/2) |Omega|^((p-2)/2) (1 - lambda1))^(1/(p-2)); every
    nontrivial stationary state has L2 norm strictly below it."""
    if params.p <= 2:
        raise OutOfRangeError("smallness bound requires the coercive case p > 2")
    if lambda1_sigma >= 1.0:
        raise OutOfRangeError(
            f"bound defined only for lambda1 < 1, got {lambda1_sigma}"
        )
    p = params.p
    return float(
        ((p / 2.0) * vol_omega ** ((p - 2.0) / 2.0) * (1.0 - lambda1_sigma))
        ** (1.0 / (p - 2.0))
    )


def _objective(op: FracOperator, params: PotentialParams, u: np.ndarray) -> float:
    h = op.domain.h
    return float(
        0.5 * u @ (op.A @ u)
        + h * np.sum(pot.beta_hat(params, u))
        - 0.5 * params.lam * u @ (op.M_c @ u)
    )


def _gradient(op: FracOperator, params: PotentialParams, u: np.ndarray) -> np.ndarray:
    h = op.domain.h
    return op.A @ u + h * pot.beta(params, u) - params.lam * (op.M_c @ u)


def _scaled_res(g: np.ndarray, h: float) -> float:
    return float(np.linalg.norm(g) / np.sqrt(h))


def _descend(
    op: FracOperator,
    params: PotentialParams,
    u0: np.ndarray,
    stat_tol: float,
) -> tuple[np.ndarray, float] | None:
    """Barzilai-Borwein descent with backtracking, then Newton polish."""
    h = op.domain.h
    u = u0.copy()
    g = _gradient(op, params, u)
    if _scaled_res(g, h) <= stat_tol:
        return u, _scaled_res(g, h)
    step = 1.0 / max(1.0, np.linalg.norm(op.A, ord=np.inf))
    f = _objective(op, params, u)
    u_old, g_old = None, None
    for _ in range(_MAX_ITER):
        if u_old is not None:
            s = u - u_old
            y = g - g_old
            sy = float(s @ y)
            step = float(s @ s) / sy if sy > 0 else step
            step = min(max(step, 1e-12), 1e3)
        t = step
        for _ls in range(60):
            un = u - t * g
            fn = _objective(op, params, un)
            if fn <= f - 1e-4 * t * float(g @ g):
                break
            t *= 0.5
        else:
            break
        u_old, g_old = u, g
        u, f = un, fn
        g = _gradient(op, params, u)
        res = _scaled_res(g, h)
        if res <= 1e-4 or res <= stat_tol:
            break

    # Newton polish (only while the local Hessian stays positive definite);
    # backtracking monitors the residual norm, which stays meaningful at
    # machine precision where objective differences drown in roundoff
    for _ in range(100):
        g = _gradient(op, params, u)
        res = _scaled_res(g, h)
        if res <= stat_tol:
            return u, res
        H = (
            op.A
            + op.domain.h * np.diag(pot.beta_prime_reg(params, u))
            - params.lam * op.M_c
        )
        try:
            chol = cho_factor(H, lower=True)
        except np.linalg.LinAlgError:
            u = u - min(1e-2, res) * g  # fall back to a small gradient step
            continue
        d = cho_solve(chol, -g)
        t = 1.0
        while t >= 1e-14:
            un = u + t * d
            resn = _scaled_res(_gradient(op, params, un), h)
            if resn <= (1.0 - 1e-4 * t) * res or resn <= stat_tol:
                break
            t *= 0.5
        else:
            return None
        u = un
    g = _gradient(op, params, u)
    res = _scaled_res(g, h)
    return (u, res) if res <= stat_tol else None


def _classify(u: np.ndarray, h: float) -> str:
    if np.sqrt(h * np.sum(u**2)) <= _TRIVIAL_NORM:
        return "trivial"
    if np.min(u) > 0:
        return "nontrivial-positive"
    if np.max(u) < 0:
        return "nontrivial-negative"
    # excited states reachable from random starts; never the global minimizer
    return "nontrivial-mixed"


def minimize_energy(
    op_sigma: FracOperator,
    params: PotentialParams,
    starts: Sequence[Field] | None = None,
    stat_tol: float = STAT_TOL,
    rng: np.random.Generator | None = None,
) -> StationaryResult:
    """Multi-start descent on the discrete free energy (coercive case p > 2).

    Default starts: 0, +eps e1, -eps e1, and a seeded random field, where
    eps is the amplitude that makes the energy of the eigen-direction
    negative whenever lambda1(sigma) < 1.
    """
    if params.p <= 2:
        raise OutOfRangeError("stationary minimization requires p > 2")
    dom = op_sigma.domain
    h = dom.h
    pair = first_eigenpair(op_sigma)
    lam1 = pair.lambda1

    if starts is None:
        if params.lam > 0 and lam1 < params.lam:
            lp_p = h * float(np.sum(np.abs(pair.e1.values) ** params.p))
            eps = 0.5 * (
                params.p * (params.lam - lam1) / (2.0 * lp_p)
            ) ** (1.0 / (params.p - 2.0))
        else:
            eps = 1e-3
        if rng is None:
            rng = np.random.default_rng(0)
        starts = [
            Field(dom, np.zeros(dom.M)),
            eps * pair.e1,
            -eps * pair.e1,
            Field(dom, 0.1 * rng.standard_normal(dom.M)),
        ]

    candidates = []
    for s in starts:
        out = _descend(op_sigma, params, s.values, stat_tol)
        if out is not None:
            u, res = out
            candidates.append(
                (
                    _objective(op_sigma, params, u),
                    _classify(u, h),
                    u,
                    res,
                )
            )
    if not candidates:
        raise NoConvergenceError("no start converged to a stationary point")
    candidates.sort(key=lambda c: (c[0], c[1]))
    en, cls, u, res = candidates[0]
    if cls == "nontrivial-mixed":
        raise RuntimeError("lowest-energy stationary point is not one-signed")
    return StationaryResult(
        u_star=Field(dom, u),
        energy=en,
        residual=res,
        lambda1_sigma=lam1,
        classification=cls,
    )


def stationary_sigma_sweep(
    domain: Domain1D,
    params: PotentialParams,
    sigmas: Sequence[float],
    stat_tol: float = STAT_TOL,
) -> list[dict]:
    """Rows (sigma, lambda1, norm_u, bound, energy, classification); states
    shrink to zero as sigma decreases toward 0 (lambda1 -> 1)."""
    rows = []
    for sigma in sigmas:
        op = assemble(domain, sigma)
        result = minimize_energy(op, params, stat_tol=stat_tol)
        lam1 = result.lambda1_sigma
        bound = (
            smallness_bound(params, lam1, domain.length) if lam1 < 1.0 else np.nan
        )
        rows.append(
            {
                "sigma": sigma,
                "lambda1": lam1,
                "norm_u": lp_norm(result.u_star, 2),
                "bound": bound,
                "energy": result.energy,
                "classification": result.classification,
            }
        )
    return rows


def sweep_to_csv(rows: Sequence[dict]) -> str:
    lines = ["sigma,lambda1,norm_u,bound,energy,classification"]
    for row in rows:
        lines.append(
            f"{row['sigma']:.17g},{row['lambda1']:.17g},{row['norm_u']:.17g},"
            f"{row['bound']:.17g},{row['energy']:.17g},{row['classification']}"
        )
    return "\n".join(lines) + "\n"
