import math
from fractions import Fraction

import numpy as np
import pytest

from mpclt import rmt_sim
from mpclt.clt_limits import centering_integral
from mpclt.errors import DomainError, MPCLTError
from mpclt.functions import builtin, constant
from mpclt.mp_core import MPModel
from mpclt.rmt_sim import (
    EntryDistribution,
    SimConfig,
    eigenvalues,
    esd_distance,
    lss,
    quadform_concentration,
    replicate_rng,
    run,
    sample_matrix,
    truncate_renormalize,
    worker_count,
)


# -- entry laws ----------------------------------------------------------------


@pytest.mark.parametrize("kind,k1,k2", [
    ("real_gaussian", 1, 0), ("complex_gaussian", 0, 0), ("rademacher", 1, -2), ("uniform_scaled", 1, -1.2),
])
def test_moment_parameters(kind, k1, k2):
    mom = EntryDistribution(kind).moments
    assert mom.kappa1 == k1
    assert mom.kappa2 == pytest.approx(k2)


@pytest.mark.parametrize("kind", rmt_sim.KINDS)
def test_sample_moments(kind):
    d = EntryDistribution(kind)
    x = d.sample(replicate_rng(3, 0), (2000, 1000))
    n = x.size
    a2 = np.abs(x) ** 2
    assert abs(x.mean()) <= 5 / math.sqrt(n)
    assert a2.mean() == pytest.approx(1.0, abs=5 * math.sqrt(np.var(a2) / n) + 1e-12)
    a4 = a2**2
    assert a4.mean() == pytest.approx(d.fourth_moment, abs=5 * math.sqrt(np.var(a4) / n) + 1e-12)
    if d.is_complex:
        assert abs((x**2).mean()) <= 5 / math.sqrt(n)


def test_rademacher_entries():
    x = EntryDistribution("rademacher").sample(replicate_rng(0, 0), (50, 60))
    assert set(np.unique(x)) == {-1.0, 1.0}


def test_unknown_distribution():
    with pytest.raises(DomainError):
        EntryDistribution("cauchy")


@pytest.mark.parametrize("kind", rmt_sim.KINDS)
@pytest.mark.parametrize("t", [0.5, 1.5, 3.0])
def test_truncated_moments_monte_carlo(kind, t):
    d = EntryDistribution(kind)
    x = d.sample(replicate_rng(11, 1), 10**6)
    kept = np.abs(x) <= t
    emp = np.mean(np.where(kept, np.abs(x) ** 2, 0.0))
    _, second = d.truncated_moments(t)
    assert emp == pytest.approx(second, abs=5e-3)


# -- config and sampling ---------------------------------------------------------


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(p=10, n=5)
    with pytest.raises(DomainError):
        SimConfig(p=5, n=10, replicates=0)
    with pytest.raises(DomainError):
        SimConfig(p=5, n=10, functions=("nope",))
    with pytest.raises(DomainError):
        SimConfig(p=5, n=10, seed=-1)
    assert SimConfig(5, 10).y_n == 0.5


def test_sample_matrix_deterministic():
    cfg = SimConfig(4, 6, "real_gaussian", seed=42)
    assert np.array_equal(sample_matrix(cfg, 3), sample_matrix(cfg, 3))
    assert not np.array_equal(sample_matrix(cfg, 3), sample_matrix(cfg, 4))
    other = SimConfig(4, 6, "real_gaussian", seed=43)
    assert not np.array_equal(sample_matrix(cfg, 0), sample_matrix(other, 0))


# -- truncation -----------------------------------------------------------------


def test_truncation_leaves_rademacher_unchanged():
    x = EntryDistribution("rademacher").sample(replicate_rng(0, 0), (20, 100))
    assert np.array_equal(truncate_renormalize(x, 100, 0.125, "rademacher"), x)


def test_truncation_gaussian():
    n = 100
    t = math.sqrt(n) * n ** -0.125
    x = EntryDistribution("real_gaussian").sample(replicate_rng(5, 0), (1000, 1000))
    x[0, 0] = 2 * t
    out = truncate_renormalize(x, n, 0.125, "real_gaussian")
    assert out[0, 0] == 0.0
    assert np.max(np.abs(out)) <= t / math.sqrt(EntryDistribution("real_gaussian").truncated_moments(t)[1]) + 1e-12
    assert np.var(out) == pytest.approx(1.0, rel=0.01)


def test_truncation_complex():
    x = EntryDistribution("complex_gaussian").sample(replicate_rng(6, 0), (300, 300))
    out = truncate_renormalize(x, 16, 0.125, "complex_gaussian")
    assert np.iscomplexobj(out)
    assert np.mean(np.abs(out) ** 2) == pytest.approx(1.0, rel=0.02)


def test_truncation_removing_everything():
    x = np.ones((3, 4))
    with pytest.raises(DomainError):
        truncate_renormalize(x, 4, 1.0, "rademacher")


# -- eigenvalues ------------------------------------------------------------------


def test_eigenvalues_examples():
    assert np.allclose(eigenvalues(np.eye(3, 5) * 2), [0.8, 0.8, 0.8])
    with pytest.raises(DomainError):
        eigenvalues(np.ones((5, 3)))


def _charpoly(mat):
    # Faddeev-LeVerrier in exact arithmetic
    n = len(mat)
    ident = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    coeffs = [Fraction(1)]
    m_k = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        am = [[sum(mat[i][l] * m_k[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        m_k = [[am[i][j] + coeffs[-1] * ident[i][j] for j in range(n)] for i in range(n)]
        amk = [[sum(mat[i][l] * m_k[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        coeffs.append(-sum(amk[i][i] for i in range(n)) / k)
    return coeffs


def test_eigenvalues_characteristic_polynomial():
    x = np.array([[1, -2, 0, 3, 1], [2, 1, 1, -1, 0], [0, 1, -3, 2, 2]])
    b = [[Fraction(int(sum(x[i, k] * x[j, k] for k in range(5))), 5) for j in range(3)] for i in range(3)]
    roots = np.sort(np.roots([float(c) for c in _charpoly(b)]).real)
    assert np.allclose(eigenvalues(x), roots, rtol=1e-12, atol=1e-12)


def test_eigenvalues_psd_and_trace():
    rng = np.random.default_rng(0)
    for _ in range(10**4):
        p = int(rng.integers(1, 6))
        n = int(rng.integers(p, 8))
        x = rng.standard_normal((p, n))
        lam = eigenvalues(x)
        assert lam.min() >= 0.0
        assert lam.sum() == pytest.approx(np.sum(x * x) / n, rel=1e-10, abs=1e-12)


def test_eigenvalues_complex():
    x = EntryDistribution("complex_gaussian").sample(replicate_rng(1, 0), (10, 20))
    lam = eigenvalues(x)
    assert lam.dtype == float
    assert lam.sum() == pytest.approx(np.sum(np.abs(x) ** 2) / 20)


def test_eigenvalues_rejects_indefinite(monkeypatch):
    monkeypatch.setattr(np.linalg, "eigvalsh", lambda b: np.array([-1e-3, 1.0]))
    with pytest.raises(MPCLTError):
        eigenvalues(np.ones((2, 3)))
    # roundoff-sized negatives are clamped to zero
    monkeypatch.setattr(np.linalg, "eigvalsh", lambda b: np.array([-1e-14, 1.0]))
    assert eigenvalues(np.ones((2, 3)))[0] == 0.0


# -- linear spectral statistics ---------------------------------------------------


def test_lss_examples():
    lam = np.array([0.5, 1.0, 1.5])
    assert lss(lam, constant(2.0), 0.5) == pytest.approx(0.0, abs=1e-12)
    assert lss(lam, builtin("poly1"), 0.5) == pytest.approx(0.0, abs=1e-12)
    assert lss(lam, builtin("poly2"), 0.5) == pytest.approx(3.5 - 3 * 1.5, abs=1e-12)
    with pytest.raises(DomainError):
        lss(np.array([0.0, 1.0]), builtin("log"), 0.5)


def test_lss_companion_identity():
    # n (F^{X*X/n} - F_) and p (F^B - F) give the same statistic when f(0) = 0
    cfg = SimConfig(30, 50, "real_gaussian", seed=9)
    x = sample_matrix(cfg, 0)
    f = builtin("poly2")
    lam = eigenvalues(x)
    big = np.linalg.eigvalsh(x.T @ x / cfg.n)
    y = cfg.y_n
    under = np.sum(f(big)) - cfg.n * ((1 - y) * 0.0 + y * centering_integral(f, y))
    assert lss(lam, f, y) == pytest.approx(under, abs=1e-9)


def test_esd_distance():
    model = MPModel(0.25)
    med = float(np.interp(0.5, np.asarray(rmt_sim.cdf(model, np.linspace(model.a, model.b, 20001))),
                          np.linspace(model.a, model.b, 20001)))
    assert esd_distance(np.array([med]), model) == pytest.approx(0.5, abs=1e-6)
    assert esd_distance(np.array([100.0]), model) == pytest.approx(1.0)
    cfg = SimConfig(100, 400, seed=1)
    d = esd_distance(eigenvalues(sample_matrix(cfg, 0)), model)
    assert 0 < d < 0.1


def test_esd_distance_decreases():
    small = np.median([esd_distance(eigenvalues(sample_matrix(SimConfig(125, 250, seed=2), i)), MPModel(0.5))
                       for i in range(20)])
    large = np.median([esd_distance(eigenvalues(sample_matrix(SimConfig(500, 1000, seed=2), i)), MPModel(0.5))
                       for i in range(20)])
    assert large < small


# -- runs -------------------------------------------------------------------------


def test_worker_count(monkeypatch):
    monkeypatch.setenv("MPCLT_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.delenv("MPCLT_THREADS")
    assert worker_count(3) == 3


def test_single_replicate():
    s = run(SimConfig(10, 20, replicates=1, functions=("poly1",)))
    assert s.replicates == 1
    assert math.isnan(s.functions[0].variance)
    assert math.isnan(s.functions[0].ks_pvalue)


def test_run_deterministic_across_threads():
    base = dict(p=20, n=40, replicates=12, seed=5, functions=("poly2", "log"))
    a = run(SimConfig(**base, threads=1))
    b = run(SimConfig(**base, threads=4))
    assert np.array_equal(a.values("poly2"), b.values("poly2"))
    assert np.array_equal(a.values("log"), b.values("log"))


def test_rejected_replicates(monkeypatch):
    monkeypatch.setattr(rmt_sim, "eigenvalues", lambda x, clamp=True: np.array([0.0, 1.0]))
    s = run(SimConfig(2, 4, replicates=3, functions=("log",)))
    assert s.rejected == 3 and s.replicates == 0
    assert all(r.error for r in s.replicate_results)


@pytest.mark.parametrize("kind,expected", [("real_gaussian", 0.5), ("complex_gaussian", 0.0)])
def test_square_mean_monte_carlo(kind, expected):
    # limiting mean of G_n(x^2) at y = 1/2 is y (kappa1 + kappa2)
    s = run(SimConfig(100, 200, kind, replicates=1000, seed=17, functions=("poly2",)))
    fs = s.functions[0]
    assert fs.predicted_mean == pytest.approx(expected, abs=1e-9)
    assert abs(fs.mean - expected) <= 3 * fs.std_error


def test_trace_variance_monte_carlo():
    s = run(SimConfig(100, 200, "real_gaussian", replicates=1000, seed=3, functions=("poly1",)))
    fs = s.functions[0]
    assert fs.predicted_variance == pytest.approx(1.0, abs=1e-8)
    assert abs(fs.variance / fs.predicted_variance - 1) <= 0.15


# -- quadratic forms ---------------------------------------------------------------


def test_quadform_zero_matrix():
    r = quadform_concentration("real_gaussian", 5, np.zeros((5, 5)), 10)
    assert r["second_moment"] == 0.0


def test_quadform_identity_gaussian():
    # x*x - n is a centred chi-square: E|.|^2 = 2n = 2 tr(I)
    r = quadform_concentration("real_gaussian", 50, np.eye(50), 20000, seed=1)
    assert r["ratio"] == pytest.approx(2.0, rel=0.1)
    assert r["constant"] == pytest.approx(2.0 / 3.0, rel=0.1)


def test_quadform_scales_with_dimension():
    r1 = quadform_concentration("uniform_scaled", 40, np.eye(40), 20000, seed=2)
    r2 = quadform_concentration("uniform_scaled", 80, np.eye(80), 20000, seed=2)
    assert 1.7 <= r2["second_moment"] / r1["second_moment"] <= 2.3


def test_quadform_shape_check():
    with pytest.raises(DomainError):
        quadform_concentration("real_gaussian", 3, np.eye(4), 10)
