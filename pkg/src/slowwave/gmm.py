"""Per-condition Gaussian mixture fitting and prototype selection."""

import numpy as np
from dataclasses import dataclass, field

from .errors import InsufficientSamples


@dataclass
class GmmConfig:
    k: int = 3
    reg_eps: float = 1e-6
    tol: float = 1e-6
    max_iters: int = 500
    seed: int = 0


@dataclass
class ConditionMixture:
    weights: np.ndarray      # (k,)
    means: np.ndarray        # (k, d)
    covariances: np.ndarray  # (k, d, d)
    log_likelihoods: list = field(default_factory=list)
    k_reduced: bool = False


@dataclass
class GmmModel:
    mixtures: dict  # condition -> ConditionMixture


@dataclass
class PrototypeSet:
    # condition -> list of event indices, one per mixture component
    indices: dict


def gaussian_log_density(x, mean, cov):
    """Log density of a multivariate normal, numerically careful."""
    x = np.atleast_2d(x)
    d = x.shape[1]
    chol = np.linalg.cholesky(cov)
    diff = x - mean
    sol = np.linalg.solve(chol, diff.T)
    maha = np.sum(sol ** 2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (d * np.log(2 * np.pi) + logdet + maha)


def _kmeanspp_init(x, k, rng):
    """k-means++ seeding followed by a few Lloyd iterations."""
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = np.min([np.sum((x - c) ** 2, axis=1) for c in centers], axis=0)
        if d2.sum() == 0:
            centers.append(x[rng.integers(n)])
            continue
        probs = d2 / d2.sum()
        centers.append(x[rng.choice(n, p=probs)])
    centers = np.array(centers)

    for _ in range(10):
        assign = np.argmin(
            [np.sum((x - c) ** 2, axis=1) for c in centers], axis=0)
        new = np.array([
            x[assign == j].mean(axis=0) if np.any(assign == j) else centers[j]
            for j in range(k)
        ])
        if np.allclose(new, centers):
            break
        centers = new
    return centers, assign


def fit_mixture(x, cfg: GmmConfig):
    """EM fit of a k-component Gaussian mixture to the rows of x.

    k is reduced when fewer than k samples are available (flagged on the
    result). The per-iteration mean log-likelihood history is recorded
    and is non-decreasing by construction of EM.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n == 0:
        raise InsufficientSamples("no samples to fit")
    k = min(cfg.k, n)
    reduced = k < cfg.k
    rng = np.random.default_rng(cfg.seed)

    centers, assign = _kmeanspp_init(x, k, rng)
    weights = np.array([max(np.sum(assign == j), 1) for j in range(k)], dtype=np.float64)
    weights /= weights.sum()
    means = centers.copy()
    covs = np.empty((k, d, d))
    global_cov = np.cov(x.T) if n > 1 else np.eye(d)
    global_cov = np.atleast_2d(global_cov) + cfg.reg_eps * np.eye(d)
    for j in range(k):
        pts = x[assign == j]
        if len(pts) > d:
            covs[j] = np.cov(pts.T) + cfg.reg_eps * np.eye(d)
        else:
            covs[j] = global_cov
    covs += cfg.reg_eps * np.eye(d)

    history = []
    for _ in range(cfg.max_iters):
        # E-step
        log_p = np.array([
            np.log(weights[j]) + gaussian_log_density(x, means[j], covs[j])
            for j in range(k)
        ])  # (k, n)
        log_norm = np.logaddexp.reduce(log_p, axis=0)
        ll = float(log_norm.mean())
        resp = np.exp(log_p - log_norm)

        # M-step
        nk = resp.sum(axis=1) + 1e-300
        weights = nk / n
        means = (resp @ x) / nk[:, None]
        for j in range(k):
            diff = x - means[j]
            covs[j] = (resp[j][:, None] * diff).T @ diff / nk[j]
            # floor the eigenvalues at reg_eps; leaves well-conditioned
            # covariances untouched so EM stays exactly monotone
            w, V = np.linalg.eigh(covs[j])
            if w.min() < cfg.reg_eps:
                w = np.maximum(w, cfg.reg_eps)
                covs[j] = (V * w) @ V.T

        if history and abs(ll - history[-1]) < cfg.tol:
            history.append(ll)
            break
        history.append(ll)

    return ConditionMixture(
        weights=weights, means=means, covariances=covs,
        log_likelihoods=history, k_reduced=reduced,
    )


def gmm_fit(embeddings_by_condition, cfg: GmmConfig | None = None):
    """Fit one independent mixture per condition."""
    cfg = cfg or GmmConfig()
    return GmmModel(mixtures={
        cond: fit_mixture(emb, cfg)
        for cond, emb in embeddings_by_condition.items()
    })


def prototypes(model: GmmModel, embeddings_by_condition, event_ids_by_condition):
    """Pick, per condition and component, the event with maximal density.

    Ties resolve to the lowest event index.
    """
    out = {}
    for cond, mix in model.mixtures.items():
        emb = np.asarray(embeddings_by_condition[cond], dtype=np.float64)
        ids = list(event_ids_by_condition[cond])
        chosen = []
        for j in range(len(mix.weights)):
            dens = gaussian_log_density(emb, mix.means[j], mix.covariances[j])
            best = int(np.argmax(dens))  # argmax takes the first (lowest) index
            chosen.append(ids[best])
        out[cond] = chosen
    return PrototypeSet(indices=out)
