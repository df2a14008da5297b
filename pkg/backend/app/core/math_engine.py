"""
PM-QCC Math Engine
==================
SymPy-basert verifisering av decoy-eliminasjonen.
Numerikken i decoy.py bruker lukkede G-uttrykk; her bekrefter SymPy at
kombinasjonen faktisk eliminerer Y1 og Y3, gir koeffisient 1 på Y2, og
at alle ledd som kastes har ikke-positive koeffisienter.
"""

import logging
import random
from dataclasses import dataclass, field
from typing import Optional

from sympy import (
    Integer,
    Rational,
    Symbol,
    cancel,
    exp,
    expand,
    factorial,
    lambdify,
    latex as sympy_latex,
    symbols,
)

from app.core.decoy import GCoefficients, IntensityTotals
from app.core.errors import PmqccError

logger = logging.getLogger(__name__)


class MathError(PmqccError):
    """Baseklasse for feil i symbolsk verifisering."""
    pass


class VerificationError(MathError):
    """Symbolsk og numerisk resultat er uenige."""
    pass


@dataclass
class VerificationResult:
    """Resultat av en symbolsk verifisering."""
    is_correct: bool
    expected: str  # LaTeX-format
    got: str  # LaTeX-format
    checks: dict = field(default_factory=dict)
    message: str = ""


class MathEngine:
    """
    Symbolsk kontroll av Gauss-eliminasjonen i tre-intensitets decoy-analysen.

    Eksempel:
        engine = MathEngine()
        result = engine.verify_elimination()
        assert result.is_correct
    """

    def __init__(self, k_max: int = 8):
        self.k_max = k_max
        self.mu, self.nu, self.omega = symbols("mu nu omega", positive=True)
        self.yields: list[Symbol] = list(symbols(f"Y0:{k_max + 1}", nonnegative=True))

    # =========================================================================
    # SYMBOLSKE BYGGESTEINER
    # =========================================================================

    def series(self, t: Symbol):
        """S(t) = Y0 + 2t Y1 + t^2/2 Y2 + t^3/6 Y3 + sum_{k>=4} t^k/k! Yk."""
        terms = self.yields[0] + 2 * t * self.yields[1]
        for k in range(2, self.k_max + 1):
            terms += t**k / factorial(k) * self.yields[k]
        return terms

    def g_symbols(self) -> dict:
        """G, G_nu, G_0, G_mu, G_omega som SymPy-uttrykk."""
        mu, nu, om = self.mu, self.nu, self.omega
        return {
            "g": (mu - nu) * (nu - om) * mu * nu**2 * om * (mu - om),
            "g_nu": mu * nu * om * exp(nu) * (mu**2 - om**2),
            "g_0": (mu - nu) * (nu - om) * nu * (mu * (mu + nu) - om * (nu + om)),
            "g_mu": (nu**2 - om**2) * nu**2 * om * exp(mu),
            "g_omega": (mu**2 - nu**2) * mu * nu**2 * exp(om),
        }

    def combination(self):
        """(2/G)(G_nu Q_nu - G_mu Q_mu - G_omega Q_omega) med Q_t = e^(-t) S(t)."""
        g = self.g_symbols()
        q = {t: exp(-t) * self.series(t) for t in (self.mu, self.nu, self.omega)}
        return expand(
            Integer(2) / g["g"]
            * (g["g_nu"] * q[self.nu] - g["g_mu"] * q[self.mu] - g["g_omega"] * q[self.omega])
        )

    # =========================================================================
    # VERIFISERING
    # =========================================================================

    def verify_elimination(self, samples: int = 200, seed: Optional[int] = 0) -> VerificationResult:
        """
        Sjekk koeffisientene i eliminasjonen.

        Krav: Y1 -> 0, Y3 -> 0, Y2 -> 1, Y0 -> -(2/G) G_0, Yk (k>=4) <= 0
        på tilfeldige gyldige totaler mu > nu > omega > 0.
        """
        expr = self.combination()
        g = self.g_symbols()
        coeffs = {k: cancel(expr.coeff(y)) for k, y in enumerate(self.yields)}

        checks = {
            "Y1": coeffs[1] == 0,
            "Y2": cancel(coeffs[2] - 1) == 0,
            "Y3": coeffs[3] == 0,
            "Y0": cancel(coeffs[0] + 2 * g["g_0"] / g["g"]) == 0,
        }

        rng = random.Random(seed)
        for k in range(4, self.k_max + 1):
            f = lambdify((self.mu, self.nu, self.omega), coeffs[k], "math")
            ok = True
            for _ in range(samples):
                mu = rng.uniform(0.05, 0.5)
                nu = rng.uniform(0.1, 0.9) * mu
                om = rng.uniform(0.01, 0.9) * nu
                if f(mu, nu, om) > 0:
                    ok = False
                    logger.error(f"Positiv koeffisient på Y{k} ved ({mu}, {nu}, {om})")
                    break
            checks[f"Y{k}"] = ok

        is_correct = all(checks.values())
        got = " + ".join(
            f"({sympy_latex(coeffs[k])}) Y_{k}" for k in range(0, 4)
        )
        return VerificationResult(
            is_correct=is_correct,
            expected=r"-\frac{2 G_0}{G} Y_0 + Y_2",
            got=got,
            checks=checks,
            message="Eliminasjonen er korrekt" if is_correct else "Eliminasjonen feilet",
        )

    def verify_g_coefficients(
        self, t: IntensityTotals, numeric: GCoefficients, rel_tol: float = 1e-12
    ) -> VerificationResult:
        """Sammenlign numeriske G-verdier med SymPy-evaluering på samme totaler."""
        subs = {
            self.mu: Rational(repr(t.mu_tot)),
            self.nu: Rational(repr(t.nu_tot)),
            self.omega: Rational(repr(t.omega_tot)),
        }
        checks = {}
        for name, symbolic in self.g_symbols().items():
            exact = float(symbolic.subs(subs).evalf(30))
            value = getattr(numeric, name)
            checks[name] = abs(value - exact) <= rel_tol * abs(exact)
        is_correct = all(checks.values())
        if not is_correct:
            logger.warning(f"G-koeffisienter avviker: {checks}")
        return VerificationResult(
            is_correct=is_correct,
            expected=str({k: float(v.subs(subs).evalf(15)) for k, v in self.g_symbols().items()}),
            got=str(numeric),
            checks=checks,
            message="G-koeffisientene stemmer" if is_correct else "G-koeffisientene avviker",
        )

    def require_elimination(self) -> VerificationResult:
        """Som verify_elimination, men løfter VerificationError ved feil."""
        result = self.verify_elimination()
        if not result.is_correct:
            raise VerificationError(f"{result.message}: {result.checks}")
        return result


_math_engine: Optional[MathEngine] = None


def get_math_engine() -> MathEngine:
    """Lazy-initialisert motor."""
    global _math_engine
    if _math_engine is None:
        _math_engine = MathEngine()
    return _math_engine


# =============================================================================
# CLI FOR TESTING
# =============================================================================

if __name__ == "__main__":
    engine = MathEngine(k_max=6)
    result = engine.verify_elimination()
    print(f"Eliminasjon: {result.message}")
    for name, ok in result.checks.items():
        print(f"  {'OK' if ok else 'FEIL'} {name}")
