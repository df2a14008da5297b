import unittest

from app.core.decoy import IntensityTotals, g_coefficients
from app.core.math_engine import MathEngine, VerificationError, get_math_engine


class TestMathEngine(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.engine = MathEngine(k_max=6)
        cls.result = cls.engine.verify_elimination(samples=50)

    def test_elimination_correct(self):
        self.assertTrue(self.result.is_correct, self.result.checks)

    def test_odd_yields_eliminated(self):
        self.assertTrue(self.result.checks["Y1"])
        self.assertTrue(self.result.checks["Y3"])

    def test_higher_orders_checked(self):
        for k in range(4, 7):
            self.assertIn(f"Y{k}", self.result.checks)

    def test_latex_output(self):
        self.assertIn("Y_2", self.result.got)
        self.assertIn("G_0", self.result.expected)

    def test_g_coefficients_match(self):
        t = IntensityTotals(0.1472, 0.0770, 0.003812)
        result = self.engine.verify_g_coefficients(t, g_coefficients(t))
        self.assertTrue(result.is_correct, result.checks)

    def test_g_coefficients_mismatch(self):
        t = IntensityTotals(0.1472, 0.0770, 0.003812)
        wrong = IntensityTotals(0.1472, 0.0771, 0.003812)
        result = self.engine.verify_g_coefficients(t, g_coefficients(wrong))
        self.assertFalse(result.is_correct)

    def test_require_elimination_raises(self):
        engine = MathEngine(k_max=4)
        engine.verify_elimination = lambda: self.result.__class__(
            is_correct=False, expected="", got="", checks={"Y1": False}, message="feil"
        )
        with self.assertRaises(VerificationError):
            engine.require_elimination()

    def test_singleton(self):
        self.assertIs(get_math_engine(), get_math_engine())


if __name__ == '__main__':
    unittest.main()
