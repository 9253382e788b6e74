"""Seeded generators for feature designs, sparse signals, and noise.

Every generator is a pure function of its parameters and a 64-bit seed.
Randomness comes from the counter-based Philox generator keyed by
(seed, stream), with one fixed stream id per purpose, so the same seed
always reproduces the same problem bit for bit and distinct purposes never
share a stream even when neighbouring seeds are used for neighbouring
trials.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .linalg import CovMatrix, psd_sqrt, sym_eig

NOISE_KINDS = ("gaussian", "rademacher", "uniform")
AMPLITUDE_LAWS = ("constant", "uniform", "rademacher")

STREAM_DESIGN = 0
STREAM_SIGNAL = 1
STREAM_NOISE = 2
STREAM_TARGETS = 3

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int = STREAM_DESIGN) -> np.random.Generator:
    """Philox generator keyed by (seed, stream)."""
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class FeatureSet:
    """Design matrix Phi (rows are examples), optional targets, cached covariance."""

    phi: np.ndarray
    targets: np.ndarray | None
    covariance: CovMatrix
    normalized: bool

    @classmethod
    def from_phi(cls, phi: np.ndarray, targets: np.ndarray | None = None) -> "FeatureSet":
        phi = np.asarray(phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] < 1 or phi.shape[1] < 1:
            raise ValueError(f"phi must be n x p with n, p >= 1, got shape {phi.shape}")
        if targets is not None:
            targets = np.asarray(targets, dtype=float)
            if targets.shape != (phi.shape[0],):
                raise ValueError("targets length must equal the number of rows of phi")
        gram = phi.T @ phi
        cov = CovMatrix((gram + gram.T) / (2.0 * phi.shape[0]), phi.shape[0])
        normalized = bool(np.max(np.abs(np.diag(cov.entries) - 1.0)) <= 1e-8)
        return cls(phi=phi, targets=targets, covariance=cov, normalized=normalized)

    def with_targets(self, y: np.ndarray) -> "FeatureSet":
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise ValueError("targets length must equal the number of rows of phi")
        return replace(self, targets=y)

    def require_targets(self) -> np.ndarray:
        if self.targets is None:
            raise ValueError("this FeatureSet has no targets")
        return self.targets

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def p(self) -> int:
        return self.phi.shape[1]


@dataclass(frozen=True)
class SparseProblem:
    """A k-sparse ground truth s with observations y = Phi s + xi."""

    features: FeatureSet
    signal: np.ndarray
    support: tuple[int, ...]
    noise_kind: str
    sigma: float
    gamma: float
    seed: int

    @property
    def k(self) -> int:
        return len(self.support)


def _orthonormal_columns(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    """QR-orthonormalized Gaussian matrix with a deterministic sign fix."""
    g = rng.standard_normal((n, p))
    q, r = np.linalg.qr(g)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return q * signs


def gen_orthonormal_design(n: int, p: int, seed: int) -> FeatureSet:
    """Design with covariance exactly the identity (targets unset).

    Phi = sqrt(n) Q for Q with orthonormal columns, which needs n >= p.
    """
    if n < p:
        raise ValueError(f"orthonormal design needs n >= p, got n={n}, p={p}")
    rng = make_rng(seed, STREAM_DESIGN)
    q = _orthonormal_columns(rng, n, p)
    return FeatureSet.from_phi(np.sqrt(n) * q)


def gen_uniform_corr_design(n: int, p: int, alpha: float, seed: int) -> FeatureSet:
    """Design whose covariance is (1 - alpha) I + alpha 11^T, alpha in (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if n < p:
        raise ValueError(f"uniform-correlation design needs n >= p, got n={n}, p={p}")
    rng = make_rng(seed, STREAM_DESIGN)
    q = _orthonormal_columns(rng, n, p)
    target = (1.0 - alpha) * np.eye(p) + alpha * np.ones((p, p))
    root = psd_sqrt(sym_eig(CovMatrix(target, n)))
    return FeatureSet.from_phi(np.sqrt(n) * q @ root)


def pairwise_incoherence(cov: CovMatrix) -> float:
    """max_{i,j} |Sigma_ij - 1{i=j}|, the entrywise distance from identity."""
    return float(np.max(np.abs(cov.entries - np.eye(cov.p))))


def gen_incoherent_design(n: int, p: int, seed: int) -> tuple[FeatureSet, float]:
    """Gaussian design with columns rescaled to Sigma_ii = 1.

    Returns the FeatureSet and its measured pairwise incoherence.  A zero
    column (probability zero) triggers a redraw from the same stream.
    """
    if n < 1 or p < 1:
        raise ValueError("need n >= 1 and p >= 1")
    rng = make_rng(seed, STREAM_DESIGN)
    for _ in range(64):
        phi = rng.standard_normal((n, p))
        norms = np.linalg.norm(phi, axis=0)
        if np.all(norms > 0.0):
            break
    else:  # pragma: no cover - would need 64 zero draws in a row
        raise RuntimeError("could not draw a design without zero columns")
    phi = phi * (np.sqrt(n) / norms)
    fs = FeatureSet.from_phi(phi)
    return fs, pairwise_incoherence(fs.covariance)


def gen_sparse_signal(
    p: int, k: int, gamma: float, amplitude_law: str, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """k-sparse signal with magnitude floor gamma on a uniform random support.

    Amplitude laws: "constant" puts gamma on every support coordinate,
    "uniform" draws from [gamma, 2*gamma], "rademacher" puts +/-gamma with
    fair signs.  Returns (signal, sorted support indices).
    """
    if not 1 <= k <= p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={p}")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    if amplitude_law not in AMPLITUDE_LAWS:
        raise ValueError(f"unknown amplitude_law {amplitude_law!r}")
    rng = make_rng(seed, STREAM_SIGNAL)
    support = np.sort(rng.choice(p, size=k, replace=False))
    s = np.zeros(p)
    if amplitude_law == "constant":
        s[support] = gamma
    elif amplitude_law == "uniform":
        s[support] = rng.uniform(gamma, 2.0 * gamma, size=k)
    else:
        s[support] = gamma * (2.0 * rng.integers(0, 2, size=k) - 1.0)
    return s, support


def sample_noise(kind: str, sigma: float, n: int, seed: int) -> np.ndarray:
    """Zero-mean noise with sub-Gaussian variance proxy at most sigma^2."""
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    if kind not in NOISE_KINDS:
        raise ValueError(f"unknown noise kind {kind!r}")
    rng = make_rng(seed, STREAM_NOISE)
    if kind == "gaussian":
        return sigma * rng.standard_normal(n)
    if kind == "rademacher":
        return sigma * (2.0 * rng.integers(0, 2, size=n) - 1.0)
    return rng.uniform(-sigma, sigma, size=n)


def assemble_problem(
    design_kind: str,
    n: int,
    p: int,
    k: int,
    gamma: float,
    seed: int,
    alpha: float | None = None,
    amplitude_law: str = "constant",
    noise_kind: str = "gaussian",
    sigma: float = 0.0,
) -> SparseProblem:
    """Compose design, signal, and noise into one reproducible problem.

    The design, signal, and noise draws use disjoint Philox streams of the
    same seed, so the composite is a pure function of its arguments.
    """
    if k < 1:
        raise ValueError("the support must be nonempty (k >= 1)")
    if design_kind == "orthonormal":
        features = gen_orthonormal_design(n, p, seed)
    elif design_kind == "uniform_corr":
        if alpha is None:
            raise ValueError("uniform_corr design needs alpha")
        features = gen_uniform_corr_design(n, p, alpha, seed)
    elif design_kind == "incoherent":
        features, _ = gen_incoherent_design(n, p, seed)
    else:
        raise ValueError(f"unknown design kind {design_kind!r}")

    signal, support = gen_sparse_signal(p, k, gamma, amplitude_law, seed)
    xi = sample_noise(noise_kind, sigma, n, seed)
    y = features.phi @ signal + xi
    return SparseProblem(
        features=features.with_targets(y),
        signal=signal,
        support=tuple(int(i) for i in support),
        noise_kind=noise_kind,
        sigma=float(sigma),
        gamma=float(gamma),
        seed=int(seed),
    )


def feature_set_to_dict(fs: FeatureSet) -> dict:
    return {
        "phi": fs.phi.tolist(),
        "targets": None if fs.targets is None else fs.targets.tolist(),
    }


def feature_set_from_dict(d: dict) -> FeatureSet:
    targets = d.get("targets")
    return FeatureSet.from_phi(
        np.asarray(d["phi"], dtype=float),
        None if targets is None else np.asarray(targets, dtype=float),
    )


def sparse_problem_to_dict(sp: SparseProblem) -> dict:
    d = feature_set_to_dict(sp.features)
    d.update(
        {
            "signal": sp.signal.tolist(),
            "support": list(sp.support),
            "noise_kind": sp.noise_kind,
            "sigma": sp.sigma,
            "gamma": sp.gamma,
            "seed": sp.seed,
        }
    )
    return d


def sparse_problem_from_dict(d: dict) -> SparseProblem:
    fs = feature_set_from_dict(d)
    return SparseProblem(
        features=fs,
        signal=np.asarray(d["signal"], dtype=float),
        support=tuple(int(i) for i in d["support"]),
        noise_kind=d["noise_kind"],
        sigma=float(d["sigma"]),
        gamma=float(d["gamma"]),
        seed=int(d["seed"]),
    )


def sparse_problem_to_json(sp: SparseProblem) -> str:
    return json.dumps(sparse_problem_to_dict(sp), sort_keys=True)


def sparse_problem_from_json(text: str) -> SparseProblem:
    return sparse_problem_from_dict(json.loads(text))
