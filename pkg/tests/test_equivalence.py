import math

import numpy as np
import pytest

from manifoldgp.equivalence import (
    Verdict,
    classify_slope,
    equivalence_verdict,
    matched_sigma2,
    microergodic,
    series_summands,
    series_test_partial,
    tail_exponent,
)
from manifoldgp.kernel import (
    MaternParams,
    SqExpParams,
    TruncationPolicy,
    matern_density_fn,
)
from manifoldgp.spectrum import circle, custom, eigenvalues, multiplicities, sphere, sphere2

T = TruncationPolicy(1e-12)
# the quad-based sphere constants certify only to about 1e-9
TD = TruncationPolicy(1e-8)


def pol(m):
    return TD if m.dimension >= 3 else T


def matched_pair(m, nu=0.5, sigma2=0.1, a1=2.0, a2=1.0):
    p1 = MaternParams(nu, a1, sigma2)
    p2 = MaternParams(nu, a2, matched_sigma2(m, nu, sigma2, a1, a2, pol(m)))
    return p1, p2


def test_microergodic_circle_value():
    v = microergodic(circle(), MaternParams(0.5, 2.0, 0.1), T)
    assert v == pytest.approx(0.4 * math.tanh(1.0), rel=1e-11)
    assert v == pytest.approx(0.304637, abs=1e-6)
    # twice the sigma2 alpha tanh(alpha/2) form
    assert v / (0.1 * 2.0 * math.tanh(1.0)) == pytest.approx(2.0, rel=1e-11)


def test_microergodic_scales_with_sigma2():
    a = microergodic(sphere2(), MaternParams(1.0, 1.3, 1.0), T)
    b = microergodic(sphere2(), MaternParams(1.0, 1.3, 3.0), T)
    assert b == pytest.approx(3 * a, rel=1e-15)


def test_microergodic_sphere2_against_brute_force():
    N = 1_000_000
    n = np.arange(0, N + 1, dtype=float)
    S = np.sum((2 * n + 1) * (1.0 + n * (n + 1)) ** -1.5) + 2.0 / (N + 1)
    v = microergodic(sphere2(), MaternParams(0.5, 1.0, 1.0), T)
    assert v == pytest.approx(4 * math.pi / S, rel=1e-10)


def test_verdict_examples():
    p = MaternParams(0.5, 2.0, 0.1)
    for m in (circle(), sphere2(), sphere(3), sphere(4)):
        assert equivalence_verdict(m, p, p, pol(m)).verdict is Verdict.EQUIVALENT
    p1, p2 = matched_pair(circle())
    v = equivalence_verdict(circle(), p1, p2, T)
    assert (v.verdict, v.rule) == (Verdict.EQUIVALENT, "matern-d≤3")
    v = equivalence_verdict(sphere(4), MaternParams(0.5, 1.0), MaternParams(0.5, 2.0), TD)
    assert (v.verdict, v.rule) == (Verdict.ORTHOGONAL, "matern-d≥4")


def test_d4_matched_pair_is_orthogonal():
    p1, p2 = matched_pair(sphere(4))
    assert equivalence_verdict(sphere(4), p1, p2, TD).verdict is Verdict.ORTHOGONAL
    assert equivalence_verdict(sphere2(), *matched_pair(sphere2()), T).verdict is Verdict.EQUIVALENT


def test_mismatch_is_orthogonal_in_low_dimension():
    p1 = MaternParams(1.5, 2.0, 1.0)
    p2 = MaternParams(1.5, 1.0, 1.0)
    for m in (circle(), sphere2(), sphere(3)):
        assert equivalence_verdict(m, p1, p2, pol(m)).verdict is Verdict.ORTHOGONAL


def test_sqexp_rule():
    a, b = SqExpParams(1.0, 1.0), SqExpParams(1.0, 1.0 + 1e-6)
    assert equivalence_verdict(circle(), a, a, T).verdict is Verdict.EQUIVALENT
    v = equivalence_verdict(sphere2(), a, b, T)
    assert (v.verdict, v.rule) == (Verdict.ORTHOGONAL, "sqexp")


def test_family_errors():
    with pytest.raises(TypeError):
        equivalence_verdict(circle(), MaternParams(0.5, 1.0), SqExpParams(1.0))
    with pytest.raises(ValueError):
        equivalence_verdict(circle(), MaternParams(0.5, 1.0), MaternParams(1.5, 1.0))


def test_symmetry_and_transitivity():
    rng = np.random.default_rng(11)
    for m in (circle(), sphere2(), sphere(3)):
        nu, s0, a0 = 0.5 + rng.integers(0, 3), 0.3, 1.0
        alphas = rng.uniform(0.5, 4.0, 2)
        ps = [MaternParams(nu, a0, s0)] + [
            MaternParams(nu, a, matched_sigma2(m, nu, s0, a0, a, pol(m))) for a in alphas
        ]
        for i in range(3):
            for j in range(3):
                vij = equivalence_verdict(m, ps[i], ps[j], pol(m))
                assert vij.verdict is Verdict.EQUIVALENT
                assert vij == equivalence_verdict(m, ps[j], ps[i], pol(m))
    q1, q2 = MaternParams(0.5, 1.0, 1.0), MaternParams(0.5, 3.0, 2.0)
    assert equivalence_verdict(sphere(4), q1, q2, TD) == equivalence_verdict(sphere(4), q2, q1, TD)


def test_series_partial_examples():
    m = circle()
    rho = matern_density_fn(m, MaternParams(0.5, 2.0, 0.1), T)
    assert series_test_partial(m, rho, rho, 5000) == 0.0
    p1, p2 = matched_pair(m)
    r1, r2 = matern_density_fn(m, p1, T), matern_density_fn(m, p2, T)
    s3 = series_test_partial(m, r1, r2, 10**3)
    s6 = series_test_partial(m, r1, r2, 10**6)
    assert 0 < s6 - s3 < 1e-3 * s3


def test_series_diverges_for_sphere2_mismatch():
    m = sphere2()
    r1 = matern_density_fn(m, MaternParams(0.5, 1.0, 1.0), T)
    r2 = matern_density_fn(m, MaternParams(0.5, 2.0, 1.0), T)
    N = np.array([10**3, 10**4, 10**5])
    S = np.array([series_test_partial(m, r1, r2, k) for k in N])
    assert np.all(np.diff(S) > 0)
    # summands grow like t(n), so partial sums grow like N^2
    growth = np.polyfit(np.log(N), np.log(S), 1)[0]
    assert growth == pytest.approx(2.0, abs=0.1)
    assert tail_exponent(m, r1, r2, 100, 10**4) == pytest.approx(1.0, abs=0.05)


def test_tail_exponent_examples():
    m = circle()
    rho = matern_density_fn(m, MaternParams(0.5, 2.0, 0.1), T)
    assert tail_exponent(m, rho, rho, 100, 10**4) == -math.inf
    p1, p2 = matched_pair(m)
    s = tail_exponent(m, matern_density_fn(m, p1, T), matern_density_fn(m, p2, T), 100, 10**4)
    assert s == pytest.approx(-4.0, abs=0.1)
    q2 = MaternParams(0.5, 1.0, 0.2)
    s = tail_exponent(m, matern_density_fn(m, p1, T), matern_density_fn(m, q2, T), 100, 10**4)
    assert s == pytest.approx(0.0, abs=0.05)
    with pytest.raises(ValueError):
        tail_exponent(m, rho, rho, 5, 100)


def test_series_rejects_nonpositive_density():
    with pytest.raises(ValueError):
        series_summands(circle(), lambda n: np.zeros(np.shape(n)), lambda n: np.ones(np.shape(n)), np.arange(3))


def test_classify_slope_dead_band():
    assert classify_slope(-4.0) is Verdict.EQUIVALENT
    assert classify_slope(-1.0) is Verdict.INCONCLUSIVE
    assert classify_slope(-0.9) is Verdict.INCONCLUSIVE
    assert classify_slope(0.0) is Verdict.ORTHOGONAL


def _diagnostic(m, p1, p2):
    r1, r2 = matern_density_fn(m, p1, pol(m)), matern_density_fn(m, p2, pol(m))
    return classify_slope(tail_exponent(m, r1, r2, 100, 10**4))


def test_rule_agrees_with_diagnostic():
    rng = np.random.default_rng(5)
    for m in (circle(), sphere2(), sphere(3), sphere(4)):
        for k in range(20):
            nu = float(rng.choice([0.5, 1.0, 1.5]))
            a1, a2 = rng.uniform(0.5, 3.0, 2)
            s1 = float(rng.uniform(0.1, 2.0))
            if k % 2:
                s2 = matched_sigma2(m, nu, s1, a1, a2, pol(m))
            else:
                s2 = s1 * float(rng.uniform(1.2, 3.0))
            p1, p2 = MaternParams(nu, a1, s1), MaternParams(nu, a2, s2)
            rule = equivalence_verdict(m, p1, p2, pol(m)).verdict
            diag = _diagnostic(m, p1, p2)
            if m.dimension >= 4 and k % 2:
                # summands decay like n^-1 here: on the boundary, the diagnostic abstains
                assert diag is Verdict.INCONCLUSIVE and rule is Verdict.ORTHOGONAL
            else:
                assert diag is rule


def test_spectral_ratio_limit():
    for m in (circle(), sphere2()):
        nu = 1.0
        p1, p2 = matched_pair(m, nu=nu, a1=2.0, a2=0.7)
        n = np.arange(100, 5000)
        ratio = matern_density_fn(m, p2, T)(n) / matern_density_fn(m, p1, T)(n)
        lam = eigenvalues(m, n)
        lim = 10 * 2 * nu * (nu + m.dimension / 2) * abs(2.0**2 - 0.7**2) / lam
        assert np.all(np.abs(ratio - 1) <= lim)


def _custom_sphere2(n_max):
    n = np.arange(n_max + 1)
    return custom(2, 4 * math.pi, n * (n + 1.0), 2 * n + 1)


def test_custom_spectrum_uses_diagnostic():
    m = _custom_sphere2(5000)
    p = MaternParams(0.5, 2.0, 0.1)
    v = equivalence_verdict(m, p, p, T)
    assert (v.verdict, v.rule) == (Verdict.EQUIVALENT, "series-diagnostic")
    assert v.diagnostic == (0.0, -math.inf)
    p1, p2 = matched_pair(m)
    v = equivalence_verdict(m, p1, p2, T)
    assert v.verdict is Verdict.EQUIVALENT
    assert v.diagnostic[1] == pytest.approx(-3.0, abs=0.1)
    v = equivalence_verdict(m, p1, MaternParams(0.5, 1.0, 0.1), T)
    assert v.verdict is Verdict.ORTHOGONAL
    d = v.as_dict()
    assert set(d) == {"verdict", "rule", "partial_sum", "tail_exponent"}


def test_custom_spectrum_too_short_is_inconclusive():
    m = custom(1, 1.0, [0.0, 1.0, 4.0], [1, 2, 2])
    v = equivalence_verdict(m, MaternParams(0.5, 1.0), MaternParams(0.5, 2.0), T)
    assert v.verdict is Verdict.INCONCLUSIVE


def test_multiplicity_weighting_used():
    m = sphere2()
    r1 = lambda n: np.ones(np.shape(n))
    r2 = lambda n: 2 * np.ones(np.shape(n))
    np.testing.assert_array_equal(series_summands(m, r1, r2, np.arange(5)), multiplicities(m, np.arange(5)))
