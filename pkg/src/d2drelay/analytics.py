"""Closed-form outage expressions for the cellular tier and the relayed route.

The coverage integral A(threshold, alpha) drives the downlink outage closed
form; at alpha = 4 it collapses to sqrt(z)*arctan(sqrt(z)), and the adaptive
quadrature path must agree with that identity to 1e-9. A seeded Poisson-field
Monte-Carlo validator keeps the closed form honest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad


class NumericalError(RuntimeError):
    """Quadrature failed to converge; message carries the diagnostics."""


@dataclass(frozen=True)
class SgParams:
    """Stochastic-geometry inputs: BS density (per m^2), exponent, SINR threshold."""

    bs_density: float
    alpha: float = 4.0
    threshold: float = 10.0 ** (-0.6)  # -6 dB

    def __post_init__(self):
        if self.bs_density < 0:
            raise ValueError("bs_density must be >= 0")
        if self.alpha <= 2:
            raise ValueError("alpha must be > 2")
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")


@dataclass(frozen=True)
class HopOutageProfile:
    """Per-hop outage probabilities of a decode-and-forward route."""

    per_hop_outage: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_hop_outage", tuple(float(p) for p in self.per_hop_outage))
        for j, p in enumerate(self.per_hop_outage):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"hop {j} outage {p} outside [0, 1]")

    @property
    def hops(self) -> int:
        return len(self.per_hop_outage)


def a_function_quadrature(threshold: float, alpha: float) -> float:
    """The coverage integral evaluated by adaptive quadrature.

        integral from threshold^(-2/alpha) to infinity of
            threshold^(2/alpha) / (1 + u^(alpha/2)) du

    The infinite tail is mapped through u -> 1/t onto a finite interval, which
    suits the integrand's u^(-alpha/2) decay. Absolute tolerance 1e-10.
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    if alpha <= 2:
        raise ValueError("alpha must be > 2")
    z23 = threshold ** (2.0 / alpha)
    lower = threshold ** (-2.0 / alpha)
    half = alpha / 2.0
    split = max(lower * 4.0, 16.0)

    head, head_err = quad(lambda u: z23 / (1.0 + u**half), lower, split,
                          epsabs=1e-12, epsrel=1e-12, limit=200)
    # u = 1/t:  integral_split^inf ... du = z23 * integral_0^{1/split} t^(alpha/2 - 2) / (1 + t^(alpha/2)) dt
    tail, tail_err = quad(lambda t: z23 * t ** (half - 2.0) / (1.0 + t**half),
                          0.0, 1.0 / split, epsabs=1e-12, epsrel=1e-12, limit=200)
    total_err = head_err + tail_err
    if not math.isfinite(head + tail) or total_err > 1e-10:
        raise NumericalError(
            f"A-integral did not converge: value={head + tail}, "
            f"abs_err={total_err}, threshold={threshold}, alpha={alpha}"
        )
    return head + tail


def a_function(threshold: float, alpha: float) -> float:
    """Coverage integral; exact sqrt/arctan identity at alpha = 4, quadrature otherwise."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    if alpha <= 2:
        raise ValueError("alpha must be > 2")
    if alpha == 4.0:
        root = math.sqrt(threshold)
        return root * math.atan(root)
    return a_function_quadrature(threshold, alpha)


def cc_link_success(params: SgParams, r: float) -> float:
    """Single-leg success probability exp(-density * pi * r^2 * A)."""
    if r < 0:
        raise ValueError("distance must be >= 0")
    return math.exp(-params.bs_density * math.pi * r * r * a_function(params.threshold, params.alpha))


def cc_outage_closed_form(params: SgParams, r_up: float, r_down: float) -> float:
    """End-to-end cellular outage for an uplink leg at r_up and downlink leg at r_down.

    1 - exp[-density * pi * (r_up^2 + r_down^2) * A(threshold, alpha)]; the
    printed form is the alpha = 4 specialization, which is the default.
    """
    if r_up < 0 or r_down < 0:
        raise ValueError("distances must be >= 0")
    expo = params.bs_density * math.pi * (r_up**2 + r_down**2) * a_function(
        params.threshold, params.alpha
    )
    return 1.0 - math.exp(-expo)


def cc_end_to_end_outage(p_up_success: float, p_down_success: float) -> float:
    """1 - (uplink success * downlink success)."""
    for name, p in (("p_up_success", p_up_success), ("p_down_success", p_down_success)):
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"{name} {p} outside [0, 1]")
    return 1.0 - p_up_success * p_down_success


def d2d_route_outage(profile: HopOutageProfile) -> float:
    """Decode-and-forward route outage: 1 - product of per-hop successes."""
    success = 1.0
    for p in profile.per_hop_outage:
        success *= 1.0 - p
    return 1.0 - success


@dataclass(frozen=True)
class ValidationResult:
    empirical: float
    analytic: float

    @property
    def abs_gap(self) -> float:
        return abs(self.empirical - self.analytic)


def validate_cc_closed_form(
    params: SgParams,
    r: float,
    trials: int,
    seed: int,
    *,
    field_radius: float | None = None,
    chunk_points: int = 2_000_000,
) -> ValidationResult:
    """Monte-Carlo check of the single-leg success closed form.

    Each trial draws a Rayleigh-faded signal from a transmitter at fixed
    distance r and Rayleigh-faded interference from a Poisson field of density
    params.bs_density outside radius r (interference-limited). Empirical
    success = fraction of trials with SIR above the threshold; analytic =
    exp(-density*pi*r^2*A). The field is truncated at `field_radius`, chosen
    so the truncation bias is far below Monte-Carlo noise at 1e5 trials.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if r < 0:
        raise ValueError("r must be >= 0")
    analytic = cc_link_success(params, r)
    if params.bs_density == 0.0:
        return ValidationResult(empirical=1.0, analytic=analytic)

    rng = np.random.default_rng(seed)
    r_max = field_radius if field_radius is not None else max(20.0 * r, 6000.0)
    mean_interferers = params.bs_density * math.pi * (r_max**2 - r**2)
    # Chunk trials so the flattened interferer arrays stay modest.
    trials_per_chunk = max(1, int(chunk_points / max(mean_interferers, 1.0)))
    successes = 0
    done = 0
    sig_scale = r ** (-params.alpha) if r > 0 else math.inf
    while done < trials:
        n = min(trials_per_chunk, trials - done)
        counts = rng.poisson(mean_interferers, n)
        total = int(counts.sum())
        # Distances with density ~ d on [r, r_max].
        u = rng.uniform(0.0, 1.0, total)
        d = np.sqrt(r**2 + (r_max**2 - r**2) * u)
        h = rng.exponential(1.0, total)
        contrib = h * d ** (-params.alpha)
        idx = np.repeat(np.arange(n), counts)
        interference = np.bincount(idx, weights=contrib, minlength=n)
        h0 = rng.exponential(1.0, n)
        successes += int(np.count_nonzero(h0 * sig_scale > params.threshold * interference))
        done += n
    return ValidationResult(empirical=successes / trials, analytic=analytic)
