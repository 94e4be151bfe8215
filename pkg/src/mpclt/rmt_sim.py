"""Monte Carlo engine for sample covariance spectra.

Replicate ``r`` of a run draws its matrix from a generator seeded with
``SeedSequence(entropy=seed, spawn_key=(r,))``; numpy hashes the pair into
an independent stream, so every replicate is reproducible on its own and
results do not depend on how replicates are scheduled across workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .clt_limits import MomentParams, QuadConfig, centering_integral, covariance_matrix, limiting_mean
from .errors import DomainError, MPCLTError
from .functions import TestFunction, builtin
from .mp_core import MPModel, cdf

KINDS = ("real_gaussian", "complex_gaussian", "rademacher", "uniform_scaled")
_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class EntryDistribution:
    """Standardised entry law: mean 0, ``E|x|^2 = 1``, all moments finite."""

    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown entry distribution {self.kind!r}; known: {', '.join(KINDS)}")

    @property
    def is_complex(self) -> bool:
        return self.kind == "complex_gaussian"

    @property
    def fourth_moment(self) -> float:
        return {"real_gaussian": 3.0, "complex_gaussian": 2.0, "rademacher": 1.0, "uniform_scaled": 1.8}[self.kind]

    @property
    def moments(self) -> MomentParams:
        k1 = 0.0 if self.is_complex else 1.0
        return MomentParams(k1, self.fourth_moment - k1 - 2.0)

    def sample(self, rng: np.random.Generator, shape):
        if self.kind == "real_gaussian":
            return rng.standard_normal(shape)
        if self.kind == "complex_gaussian":
            re = rng.standard_normal(shape)
            im = rng.standard_normal(shape)
            return (re + 1j * im) / math.sqrt(2.0)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=shape).astype(float) - 1.0
        return rng.uniform(-_SQRT3, _SQRT3, size=shape)

    def truncated_moments(self, t: float):
        """``(E x1{|x|<=t}, E|x|^2 1{|x|<=t})``, exact for every kind.

        All kinds are symmetric, so the truncated mean is zero.
        """
        if self.kind == "real_gaussian":
            second = special.erf(t / math.sqrt(2.0)) - math.sqrt(2.0 / math.pi) * t * math.exp(-t * t / 2.0)
        elif self.kind == "complex_gaussian":
            # |x|^2 ~ Exp(1)
            second = 1.0 - math.exp(-t * t) * (1.0 + t * t)
        elif self.kind == "rademacher":
            second = 1.0 if t >= 1.0 else 0.0
        else:
            s = min(t, _SQRT3)
            second = s**3 / (3.0 * _SQRT3)
        return 0.0, second


def as_distribution(dist) -> EntryDistribution:
    return dist if isinstance(dist, EntryDistribution) else EntryDistribution(str(dist))


@dataclass(frozen=True)
class SimConfig:
    p: int
    n: int
    dist: EntryDistribution = EntryDistribution("real_gaussian")
    replicates: int = 1000
    seed: int = 0
    functions: tuple = ("poly1", "poly2", "log")
    truncate: bool = False
    delta_exponent: float = 0.125
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "dist", as_distribution(self.dist))
        object.__setattr__(self, "functions", tuple(self.functions))
        if self.p < 1 or self.n < 1:
            raise DomainError(f"p and n must be positive, got p={self.p}, n={self.n}")
        if self.p > self.n:
            raise DomainError(f"simulation requires p <= n, got p={self.p}, n={self.n}")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.delta_exponent <= 0:
            raise DomainError("delta_exponent must be positive")
        for name in self.functions:
            builtin(name)

    @property
    def y_n(self) -> float:
        return self.p / self.n


@dataclass
class ReplicateResult:
    index: int
    eigenvalues: np.ndarray | None
    gn_values: dict
    ks_to_mp: float
    error: str | None = None


@dataclass
class FunctionSummary:
    name: str
    mean: float
    variance: float
    std_error: float
    predicted_mean: float
    predicted_variance: float
    ks_statistic: float
    ks_pvalue: float

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class SimSummary:
    config: SimConfig
    functions: list
    empirical_cov: np.ndarray
    predicted_cov: np.ndarray
    replicates: int
    rejected: int
    replicate_results: list = field(repr=False, default_factory=list)

    def by_name(self, name) -> FunctionSummary:
        for fs in self.functions:
            if fs.name == name:
                return fs
        raise KeyError(name)

    def values(self, name) -> np.ndarray:
        """Accepted ``G_n(f)`` values for one function, in replicate order."""
        return np.array([r.gn_values[name] for r in self.replicate_results if r.error is None])


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),)))


def sample_matrix(cfg: SimConfig, replicate_index: int) -> np.ndarray:
    """``p x n`` matrix of i.i.d. entries, reproducible from ``(seed, replicate_index)``."""
    return cfg.dist.sample(replicate_rng(cfg.seed, replicate_index), (cfg.p, cfg.n))


def truncate_renormalize(matrix, n: int, delta_exponent: float, dist) -> np.ndarray:
    """Zero entries above ``sqrt(n) * n**-delta_exponent`` then recentre and rescale.

    Centre and scale come from the truncated population moments of ``dist``.
    """
    dist = as_distribution(dist)
    t = math.sqrt(n) * n ** (-delta_exponent)
    mean, second = dist.truncated_moments(t)
    var = second - abs(mean) ** 2
    x = np.asarray(matrix)
    kept = np.abs(x) <= t
    if var <= 0 or not np.any(kept):
        raise DomainError(f"truncation level {t:.4g} removes every entry; decrease delta_exponent")
    return (np.where(kept, x, 0.0) - mean) / math.sqrt(var)


def eigenvalues(matrix, clamp: bool = True) -> np.ndarray:
    """Ascending eigenvalues of ``X X* / n`` for a ``p x n`` matrix with ``p <= n``."""
    x = np.asarray(matrix)
    p, n = x.shape
    if p > n:
        raise DomainError(f"expected p <= n, got {p} x {n}")
    b = (x @ x.conj().T) / n
    try:
        lam = np.linalg.eigvalsh(b)
    except np.linalg.LinAlgError as exc:
        raise MPCLTError(f"eigensolver did not converge: {exc}") from exc
    if clamp:
        scale = max(1.0, float(lam[-1]))
        if lam[0] < -1e-10 * scale:
            raise MPCLTError(f"matrix is not positive semidefinite: min eigenvalue {lam[0]:.3e}")
        lam = np.maximum(lam, 0.0)
    return lam


def lss(eigs, f: TestFunction, y_n: float, q: QuadConfig = QuadConfig(), center=None) -> float:
    """``G_n(f) = sum f(lambda_i) - p * int f dF_{y_n}``.

    ``center`` may carry a precomputed ``int f dF_{y_n}``.
    """
    eigs = np.asarray(eigs, dtype=float)
    if not f.contains(eigs):
        bad = eigs[~np.array([f.contains(v) for v in eigs])]
        raise DomainError(f"eigenvalue {bad[0]:.6g} lies outside the domain of {f.name}")
    if center is None:
        center = centering_integral(f, y_n, q)
    return float(np.sum(f(eigs)) - eigs.size * center)


def esd_distance(eigs, model) -> float:
    """Kolmogorov distance between the ESD of ``eigs`` and the MP law ``model``."""
    lam = np.sort(np.asarray(eigs, dtype=float))
    p = lam.size
    F = np.asarray(cdf(model, lam), dtype=float).reshape(-1)
    i = np.arange(1, p + 1)
    return float(max(np.max(i / p - F), np.max(F - (i - 1) / p)))


def worker_count(requested=None) -> int:
    cap = os.environ.get("MPCLT_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _one(cfg: SimConfig, index: int, fns, centers, model, keep_eigs: bool) -> ReplicateResult:
    x = sample_matrix(cfg, index)
    if cfg.truncate:
        x = truncate_renormalize(x, cfg.n, cfg.delta_exponent, cfg.dist)
    lam = eigenvalues(x)
    ks = esd_distance(lam, model)
    values = {}
    for f in fns:
        if not f.contains(lam):
            return ReplicateResult(index, lam if keep_eigs else None, {}, ks,
                                   error=f"eigenvalue outside domain of {f.name}")
        values[f.name] = lss(lam, f, cfg.y_n, center=centers[f.name])
    return ReplicateResult(index, lam if keep_eigs else None, values, ks)


def _predictions(fns, y_n, mom, q):
    model = MPModel(y_n)
    try:
        model.require_clt()
    except DomainError:
        nan = float("nan")
        return [nan] * len(fns), np.full((len(fns), len(fns)), nan)
    means = [limiting_mean(f, model, mom, q) for f in fns]
    return means, covariance_matrix(fns, model, mom, q)


def run(cfg: SimConfig, q: QuadConfig = QuadConfig(), keep_eigenvalues: bool = False, progress=None) -> SimSummary:
    """Execute all replicates and compare ``G_n(f)`` with the Gaussian limit."""
    fns = [builtin(name) for name in cfg.functions]
    model = MPModel(cfg.y_n)
    centers = {f.name: centering_integral(f, cfg.y_n, q) for f in fns}

    def job(i):
        res = _one(cfg, i, fns, centers, model, keep_eigenvalues)
        if progress is not None:
            progress(i)
        return res

    workers = worker_count(cfg.threads)
    if workers == 1:
        results = [job(i) for i in range(cfg.replicates)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(cfg.replicates)))
    results.sort(key=lambda r: r.index)

    ok = [r for r in results if r.error is None]
    pred_means, pred_cov = _predictions(fns, cfg.y_n, cfg.dist.moments, q)
    data = np.array([[r.gn_values[f.name] for f in fns] for r in ok]).reshape(len(ok), len(fns))
    count = data.shape[0]
    if count >= 2:
        emp_cov = np.atleast_2d(np.cov(data, rowvar=False, ddof=1))
    else:
        emp_cov = np.full((len(fns), len(fns)), np.nan)

    summaries = []
    for j, f in enumerate(fns):
        col = data[:, j]
        mean = float(np.mean(col)) if count else float("nan")
        var = float(emp_cov[j, j])
        se = math.sqrt(var / count) if count >= 2 else float("nan")
        pm, pv = float(pred_means[j]), float(pred_cov[j, j])
        ks_stat = ks_p = float("nan")
        if count >= 2 and np.isfinite(pv) and pv > 1e-12:
            ks = stats.kstest((col - pm) / math.sqrt(pv), "norm")
            ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
        summaries.append(FunctionSummary(f.name, mean, var, se, pm, pv, ks_stat, ks_p))

    return SimSummary(cfg, summaries, emp_cov, np.asarray(pred_cov), count,
                      len(results) - count, results)


def quadform_concentration(dist, n: int, C, replicates: int, seed: int = 0) -> dict:
    """Empirical ``E|x* C x - tr C|^2`` against ``E|x_1|^4 tr(C C*)``.

    ``x`` has ``n`` i.i.d. entries from ``dist`` and ``C`` is ``n x n``.
    """
    dist = as_distribution(dist)
    C = np.asarray(C)
    if C.shape != (n, n):
        raise DomainError(f"C must be {n} x {n}, got {C.shape}")
    rng = replicate_rng(seed, 0)
    x = dist.sample(rng, (replicates, n))
    quad = np.einsum("ri,ij,rj->r", x.conj(), C, x)
    dev = np.abs(quad - np.trace(C)) ** 2
    trace_cc = float(np.real(np.trace(C @ C.conj().T)))
    scale = dist.fourth_moment * trace_cc
    second = float(np.mean(dev))
    return {
        "second_moment": second,
        "std_error": float(np.std(dev, ddof=1) / math.sqrt(replicates)) if replicates > 1 else float("nan"),
        "scale": scale,
        "trace_cc": trace_cc,
        # E|x*Cx - tr C|^2 / tr(CC*), and the same divided by E|x_1|^4
        "ratio": second / trace_cc if trace_cc > 0 else float("nan"),
        "constant": second / scale if scale > 0 else float("nan"),
    }
