"""Barrier functions and safety conditions.

A barrier function h defines the safe set {x : h(x) >= 0}.  For deterministic
dynamics the classic condition dh/dx*(f+g*u) + alpha(h) >= 0 keeps the set
forward invariant.  For stochastic dynamics the drift and diffusion of h are
obtained from Ito's lemma and the corrected condition

    mu_tilde - sigma_tilde**2 / h  >=  -h**2 * alpha(h)

is enforced instead.  The older condition that omits the sigma_tilde**2/h
correction is kept as ``legacy_scbf_margin`` purely for comparison runs; it is
known to be insufficient (uncontrolled Brownian motion escapes any level set
while that condition reports a nonnegative margin).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .core import StrengtheningFn

__all__ = [
    "BoundaryError",
    "BarrierSpec",
    "SdeModel",
    "ItoTerms",
    "make_h_oa",
    "make_h_po",
    "deterministic_bc",
    "ito_terms",
    "scbf_margin",
    "legacy_scbf_margin",
    "DEFAULT_EPS_H",
]

# Below this barrier value the stochastic condition is treated as undefined
# (the sigma**2/h term diverges); callers escalate instead of clamping.
DEFAULT_EPS_H = 1e-12


class BoundaryError(Exception):
    """Raised when a stochastic safety condition is evaluated at h(x) <= eps.

    The corrected stochastic condition only speaks to interior states; rather
    than silently clamping we surface the situation so the filter can
    escalate.
    """


@dataclass(frozen=True)
class BarrierSpec:
    """Scalar constraint function h with its first two state derivatives."""

    h: Callable[[float], float]
    dh_dx: Callable[[float], float]
    d2h_dx2: Callable[[float], float]
    name: str = ""


@dataclass(frozen=True)
class SdeModel:
    """Controlled scalar SDE  dx = (f(x) + g(x) u) dt + sigma(x, u) dw.

    ``diffusion_sigma`` takes (x, u): the portfolio problem's noise scales
    with the control, so a state-only signature would not cover it.  A model
    with ``deterministic=True`` promises sigma == 0 and is integrated as an
    ODE.  Control bounds must be finite (the filters project onto them).
    """

    drift_f: Callable[[float], float]
    drift_g: Callable[[float], float]
    diffusion_sigma: Callable[[float, float], float]
    u_lo: float
    u_hi: float
    x_lo: float = float("-inf")
    x_hi: float = float("inf")
    deterministic: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.u_lo) and math.isfinite(self.u_hi)):
            raise ValueError("control bounds must be finite")
        if self.u_lo > self.u_hi:
            raise ValueError(f"u_lo={self.u_lo} must not exceed u_hi={self.u_hi}")
        if not self.x_lo < self.x_hi:
            raise ValueError("state domain must be a nonempty interval")


@dataclass(frozen=True)
class ItoTerms:
    """Drift and diffusion of h(x) along the SDE, from Ito's lemma."""

    mu_tilde: float
    sigma_tilde: float


def make_h_oa(x_max: float) -> BarrierSpec:
    """Barrier capping market share: h(x) = x_max**2 - x**2.

    Safe while the share stays at or below x_max.  The same quadratic form
    serves both the deterministic and the stochastic advertising problems.
    """
    if not (0.0 <= x_max < 1.0):
        raise ValueError(f"x_max must lie in [0, 1), got {x_max}")
    xm2 = x_max * x_max
    return BarrierSpec(
        h=lambda x: xm2 - x * x,
        dh_dx=lambda x: -2.0 * x,
        d2h_dx2=lambda x: -2.0,
        name=f"share_cap_{x_max:g}",
    )


def make_h_po(x_min: float) -> BarrierSpec:
    """Barrier keeping wealth above an emergency floor: h(x) = x**2 - x_min**2."""
    if not x_min > 0:
        raise ValueError(f"x_min must be positive, got {x_min}")
    xm2 = x_min * x_min
    return BarrierSpec(
        h=lambda x: x * x - xm2,
        dh_dx=lambda x: 2.0 * x,
        d2h_dx2=lambda x: 2.0,
        name=f"wealth_floor_{x_min:g}",
    )


def deterministic_bc(
    spec: BarrierSpec,
    model: SdeModel,
    alpha: StrengtheningFn,
    x: float,
    u: float,
) -> float:
    """Deterministic barrier-constraint margin dh*(f+g*u) + alpha(h).

    Nonnegative margin means u keeps the safe set invariant at x.  Only valid
    for models with zero diffusion.
    """
    if not model.deterministic:
        raise ValueError("deterministic_bc requires a model with zero diffusion")
    dh = spec.dh_dx(x)
    return dh * (model.drift_f(x) + model.drift_g(x) * u) + alpha(spec.h(x))


def ito_terms(spec: BarrierSpec, model: SdeModel, x: float, u: float) -> ItoTerms:
    """Drift and diffusion of h under the model at (x, u).

    mu_tilde = dh*(f+g*u) + 0.5*d2h*sigma**2,  sigma_tilde = dh*sigma.
    For sigma == 0 this reduces to the deterministic derivative of h.
    """
    dh = spec.dh_dx(x)
    sigma = model.diffusion_sigma(x, u)
    mu = dh * (model.drift_f(x) + model.drift_g(x) * u) + 0.5 * spec.d2h_dx2(x) * sigma * sigma
    return ItoTerms(mu_tilde=mu, sigma_tilde=dh * sigma)


def scbf_margin(
    spec: BarrierSpec,
    model: SdeModel,
    alpha: StrengtheningFn,
    x: float,
    u: float,
    eps_h: float = DEFAULT_EPS_H,
) -> float:
    """Corrected stochastic barrier margin mu - sigma**2/h + h**2*alpha(h).

    Defined only in the interior of the safe set; raises BoundaryError when
    h(x) <= eps_h.
    """
    h_val = spec.h(x)
    if h_val <= eps_h:
        raise BoundaryError(f"h(x)={h_val:.6g} <= {eps_h:.1e} at x={x:.6g}; stochastic condition undefined")
    t = ito_terms(spec, model, x, u)
    return t.mu_tilde - t.sigma_tilde * t.sigma_tilde / h_val + h_val * h_val * alpha(h_val)


def legacy_scbf_margin(
    spec: BarrierSpec,
    model: SdeModel,
    alpha: StrengtheningFn,
    x: float,
    u: float,
) -> float:
    """Superseded stochastic margin mu_tilde + alpha(h), kept for comparison.

    Identically equal to the corrected margin plus sigma**2/h - h**2*alpha(h)
    + alpha(h).  It does not guarantee safety in general and default
    pipelines never use it.
    """
    t = ito_terms(spec, model, x, u)
    return t.mu_tilde + alpha(spec.h(x))
