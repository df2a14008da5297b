"""
PM-QCC Endelig-størrelse-grenser
================================
Chernoff-Hoeffding-grenser for forventningsverdien bak en observert
telling chi, via numerisk løsning av de implisitte delta-likningene

    [e^d/(1+d)^(1+d)]^(chi/(1+d))   = eps/2   (nedre)
    [e^-d/(1-d)^(1-d)]^(chi/(1-d))  = eps/2   (øvre)

Begge skrives med phi(x) = (1+x)ln(1+x) - x:

    g_L(d) = -chi*phi(d)/(1+d)  - ln(eps/2)
    g_U(d) = -chi*phi(-d)/(1-d) - ln(eps/2)

som er strengt avtagende i d, så bisection er alltid konvergent.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from app.core.errors import NumericError, ParameterError

logger = logging.getLogger(__name__)

UPPER_BRACKET_EDGE = 1 - 1e-15
# Roten for delta^L vokser som exp(ln(2/eps)/chi); over dette er E^L = 0 i flyttall
DELTA_LOWER_CAP = 1e300
BRACKET_GROWTH = 16.0
BISECT_MAXITER = 400
# Relativ presisjon i delta; absolutt toleranse 1e-12 er for grov når chi er stor
BISECT_RTOL = 4 * float(np.finfo(float).eps)
BISECT_XTOL = 1e-300
SERIES_CUTOFF = 1e-2


@dataclass(frozen=True)
class BoundPair:
    """Nedre og øvre forventningsgrense rundt en observert telling."""
    observed: float
    lower: float
    upper: float
    delta_lower: float
    delta_upper: float
    zero_count: bool = False


# =============================================================================
# HJELPEFUNKSJONER
# =============================================================================

def _phi(x: float) -> float:
    """(1+x)ln(1+x) - x, med rekkeutvikling nær 0 for å unngå kansellering."""
    if abs(x) < SERIES_CUTOFF:
        # sum_{k>=2} (-1)^k x^k / (k(k-1))
        total = 0.0
        power = x * x
        for k in range(2, 14):
            total += (1 if k % 2 == 0 else -1) * power / (k * (k - 1))
            power *= x
        return total
    return (1 + x) * math.log1p(x) - x


def residual_lower(delta: float, chi: float, epsilon: float) -> float:
    """g_L(delta); null i roten."""
    return -chi * _phi(delta) / (1 + delta) - math.log(epsilon / 2)


def residual_upper(delta: float, chi: float, epsilon: float) -> float:
    """g_U(delta); null i roten."""
    return -chi * _phi(-delta) / (1 - delta) - math.log(epsilon / 2)


def _check(chi: float, epsilon: float) -> None:
    violations = []
    if not chi > 0:
        violations.append(f"chi: must be > 0 (got {chi})")
    if not 0 < epsilon <= 2:
        violations.append(f"epsilon: must be in (0,2] (got {epsilon})")
    if violations:
        raise ParameterError("Ugyldig Chernoff-argument", violations)


def _edge_upper(chi: float, limit: float) -> float:
    return limit + chi * (1 + math.log(limit / chi))


def _bisect(residual, a: float, b: float, chi: float, epsilon: float) -> float:
    try:
        return bisect(
            residual, a, b, args=(chi, epsilon),
            xtol=BISECT_XTOL, rtol=BISECT_RTOL, maxiter=BISECT_MAXITER,
        )
    except (RuntimeError, ValueError) as e:
        raise NumericError(f"Delta-likningen konvergerte ikke (chi={chi}, eps={epsilon}): {e}")


# =============================================================================
# LØSERE
# =============================================================================

def solve_delta_lower(chi: float, epsilon: float) -> float:
    """
    delta^L >= 0 for den nedre grensen.

    For brøkdels-tellinger (forventede tellinger fra simulate_key_rate) kan
    roten ligge utenfor flyttallsområdet; da returneres inf, altså E^L = 0.
    """
    _check(chi, epsilon)
    if residual_lower(0.0, chi, epsilon) <= 0:
        return 0.0
    b = 10 * math.sqrt(2 * math.log(2 / epsilon) / chi) + 1
    while residual_lower(b, chi, epsilon) >= 0:
        if b >= DELTA_LOWER_CAP:
            logger.debug(f"delta^L utenfor flyttallsområdet (chi={chi:.3e}); E^L = 0")
            return math.inf
        b = min(b * BRACKET_GROWTH, DELTA_LOWER_CAP)
    return _bisect(residual_lower, 0.0, b, chi, epsilon)


def solve_delta_upper(chi: float, epsilon: float) -> float:
    """
    delta^U i [0, 1] for den øvre grensen.

    Når chi er så liten at roten ligger nærmere 1 enn UPPER_BRACKET_EDGE,
    brukes førsteordens utvikling rundt chi = 0:
    E^U = L + chi*(1 + ln(L/chi)) med L = ln(2/eps), som ved null-telling gir L.
    """
    _check(chi, epsilon)
    if residual_upper(0.0, chi, epsilon) <= 0:
        return 0.0
    if residual_upper(UPPER_BRACKET_EDGE, chi, epsilon) >= 0:
        limit = math.log(2 / epsilon)
        if chi >= limit:
            raise NumericError(f"Fant ingen braket for delta^U (chi={chi}, eps={epsilon})")
        upper = _edge_upper(chi, limit)
        logger.debug(f"delta^U ved kanten (chi={chi:.3e}); E^U ≈ {upper:.6g}")
        return 1 - chi / upper
    return _bisect(residual_upper, 0.0, UPPER_BRACKET_EDGE, chi, epsilon)


def expectation_bounds(chi: float, epsilon: float) -> BoundPair:
    """
    E^L = chi/(1+delta^L), E^U = chi/(1-delta^U).

    For chi = 0 brukes konvensjonen E^L = 0, E^U = ln(2/eps).
    """
    if chi < 0:
        raise ParameterError("Negativ telling", [f"chi: must be >= 0 (got {chi})"])
    if chi == 0:
        logger.warning("Null-telling: bruker E^U = ln(2/eps)")
        return BoundPair(
            observed=0.0, lower=0.0, upper=math.log(2 / epsilon),
            delta_lower=0.0, delta_upper=0.0, zero_count=True,
        )
    d_lo = solve_delta_lower(chi, epsilon)
    d_up = solve_delta_upper(chi, epsilon)
    if d_up >= UPPER_BRACKET_EDGE:
        # 1 - delta^U er ikke representerbar; bruk utviklingen direkte
        upper = _edge_upper(chi, math.log(2 / epsilon))
    else:
        upper = chi / (1 - d_up)
    return BoundPair(
        observed=chi,
        lower=chi / (1 + d_lo),
        upper=upper,
        delta_lower=d_lo,
        delta_upper=d_up,
    )


def gain_bounds(m: float, n: float, epsilon: float) -> tuple[float, float]:
    """(Q^L, Q^U) fra m koinsidenser i n runder; Q^U kappes ved 1."""
    pair = gain_bound_pair(m, n, epsilon)
    return pair.lower / n, min(1.0, pair.upper / n)


def gain_bound_pair(m: float, n: float, epsilon: float) -> BoundPair:
    """Som gain_bounds, men returnerer hele telle-grensen."""
    if n <= 0:
        raise ParameterError("Ingen runder", [f"n: must be > 0 (got {n})"])
    if not 0 <= m <= n:
        raise ParameterError("Ugyldig telling", [f"m: must be in [0, n] (got {m})"])
    return expectation_bounds(m, epsilon)
