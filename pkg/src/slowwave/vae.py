"""Fully connected variational autoencoder, plain numpy.

Multi-stream inputs are concatenated for the encoder; the decoder emits
one reconstruction head per stream. Gradients are computed analytically
(manual backprop) so they can be verified against finite differences.
"""

import numpy as np
from dataclasses import dataclass, field

from .errors import DivergedLoss, ShapeMismatch


@dataclass
class StreamSpec:
    name: str
    length: int
    weight: float | None = None  # None: stream length (sum-equivalent MSE)

    def loss_weight(self):
        # Per-element MSE scaled back up by the stream length keeps the
        # reconstruction term strong enough relative to the KL term;
        # a weight of 1/length collapses the posterior.
        return self.weight if self.weight is not None else float(self.length)


@dataclass
class VaeSpec:
    streams: list
    hidden_sizes: tuple = (256, 128, 64, 32, 16, 8)
    latent_dim: int = 2
    seed: int = 0

    @property
    def input_dim(self):
        return sum(s.length for s in self.streams)


@dataclass
class OptConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 500


def init_params(spec: VaeSpec):
    """He-initialized parameter dict, deterministic in spec.seed."""
    rng = np.random.default_rng(spec.seed)
    params = {}

    def dense(key, n_in, n_out):
        params[f"{key}_W"] = rng.normal(0.0, np.sqrt(2.0 / n_in), (n_in, n_out))
        params[f"{key}_b"] = np.zeros(n_out)

    sizes = [spec.input_dim, *spec.hidden_sizes]
    for i in range(len(spec.hidden_sizes)):
        dense(f"enc{i}", sizes[i], sizes[i + 1])
    dense("zmean", sizes[-1], spec.latent_dim)
    dense("zlogvar", sizes[-1], spec.latent_dim)

    dec_sizes = [spec.latent_dim, *reversed(spec.hidden_sizes)]
    for i in range(len(spec.hidden_sizes)):
        dense(f"dec{i}", dec_sizes[i], dec_sizes[i + 1])
    for s in spec.streams:
        dense(f"head_{s.name}", dec_sizes[-1], s.length)
    return params


def _concat_batch(spec, batch):
    cols = []
    n = None
    for s in spec.streams:
        x = np.asarray(batch[s.name], dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != s.length:
            raise ShapeMismatch(f"stream {s.name!r}: expected (B, {s.length}), got {x.shape}")
        if n is None:
            n = x.shape[0]
        elif x.shape[0] != n:
            raise ShapeMismatch("stream batch sizes differ")
        cols.append(x)
    return np.concatenate(cols, axis=1)


def vae_forward(spec, params, batch, noise):
    """Encoder, reparameterized sample and per-stream reconstructions.

    noise must be standard-normal draws of shape (B, latent_dim); pass
    zeros for deterministic inference. Returns (z_mean, z_logvar,
    reconstructions dict, cache) where cache feeds vae_backward.
    """
    for v in params.values():
        if not np.isfinite(v).all():
            raise ShapeMismatch("non-finite parameters")
    x = _concat_batch(spec, batch)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (x.shape[0], spec.latent_dim):
        raise ShapeMismatch("noise shape must be (B, latent_dim)")

    cache = {"x": x, "noise": noise, "enc_h": [], "enc_a": []}
    h = x
    for i in range(len(spec.hidden_sizes)):
        a = h @ params[f"enc{i}_W"] + params[f"enc{i}_b"]
        cache["enc_h"].append(h)
        cache["enc_a"].append(a)
        h = np.maximum(a, 0.0)
    cache["enc_out"] = h

    z_mean = h @ params["zmean_W"] + params["zmean_b"]
    z_logvar = h @ params["zlogvar_W"] + params["zlogvar_b"]
    z = z_mean + np.exp(0.5 * z_logvar) * noise
    cache.update(z_mean=z_mean, z_logvar=z_logvar, z=z, dec_h=[], dec_a=[])

    g = z
    for i in range(len(spec.hidden_sizes)):
        a = g @ params[f"dec{i}_W"] + params[f"dec{i}_b"]
        cache["dec_h"].append(g)
        cache["dec_a"].append(a)
        g = np.maximum(a, 0.0)
    cache["dec_out"] = g

    recon = {s.name: g @ params[f"head_{s.name}_W"] + params[f"head_{s.name}_b"]
             for s in spec.streams}
    return z_mean, z_logvar, recon, cache


def kl_term(z_mean, z_logvar):
    """Mean-over-batch KL divergence to the standard normal prior."""
    per_sample = 0.5 * np.sum(np.exp(z_logvar) + z_mean ** 2 - 1.0 - z_logvar, axis=1)
    return float(per_sample.mean())


def vae_loss(spec, z_mean, z_logvar, recon, targets):
    """Total loss: KL plus the weighted per-stream MSE terms."""
    loss = kl_term(z_mean, z_logvar)
    for s in spec.streams:
        diff = recon[s.name] - np.asarray(targets[s.name], dtype=np.float64)
        loss += s.loss_weight() * float((diff ** 2).mean())
    return loss


def loss_and_grads(spec, params, batch, noise):
    """Evaluate the loss and its analytic gradients for one batch."""
    z_mean, z_logvar, recon, cache = vae_forward(spec, params, batch, noise)
    loss = vae_loss(spec, z_mean, z_logvar, recon, batch)

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    B = cache["x"].shape[0]

    # reconstruction heads
    dg = np.zeros_like(cache["dec_out"])
    for s in spec.streams:
        target = np.asarray(batch[s.name], dtype=np.float64)
        drecon = s.loss_weight() * 2.0 * (recon[s.name] - target) / recon[s.name].size
        grads[f"head_{s.name}_W"] = cache["dec_out"].T @ drecon
        grads[f"head_{s.name}_b"] = drecon.sum(axis=0)
        dg += drecon @ params[f"head_{s.name}_W"].T

    # decoder stack
    for i in reversed(range(len(spec.hidden_sizes))):
        da = dg * (cache["dec_a"][i] > 0)
        grads[f"dec{i}_W"] = cache["dec_h"][i].T @ da
        grads[f"dec{i}_b"] = da.sum(axis=0)
        dg = da @ params[f"dec{i}_W"].T
    dz = dg

    # reparameterization and KL
    dz_mean = dz + z_mean / B
    dz_logvar = (dz * cache["noise"] * 0.5 * np.exp(0.5 * z_logvar)
                 + 0.5 * (np.exp(z_logvar) - 1.0) / B)

    h = cache["enc_out"]
    grads["zmean_W"] = h.T @ dz_mean
    grads["zmean_b"] = dz_mean.sum(axis=0)
    grads["zlogvar_W"] = h.T @ dz_logvar
    grads["zlogvar_b"] = dz_logvar.sum(axis=0)
    dh = dz_mean @ params["zmean_W"].T + dz_logvar @ params["zlogvar_W"].T

    # encoder stack
    for i in reversed(range(len(spec.hidden_sizes))):
        da = dh * (cache["enc_a"][i] > 0)
        grads[f"enc{i}_W"] = cache["enc_h"][i].T @ da
        grads[f"enc{i}_b"] = da.sum(axis=0)
        dh = da @ params[f"enc{i}_W"].T

    return loss, grads


def vae_train(spec, dataset, opt: OptConfig | None = None):
    """Adam training loop, fully deterministic in spec.seed.

    dataset maps stream names to (N, length) arrays. Returns the trained
    parameters and the per-epoch mean loss history.
    """
    opt = opt or OptConfig()
    params = init_params(spec)
    n = next(iter(dataset.values())).shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(spec.seed + 1)

    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    step = 0
    history = []

    for epoch in range(opt.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, opt.batch_size):
            idx = order[start:start + opt.batch_size]
            batch = {name: arr[idx] for name, arr in dataset.items()}
            noise = rng.standard_normal((len(idx), spec.latent_dim))
            loss, grads = loss_and_grads(spec, params, batch, noise)
            if not np.isfinite(loss):
                raise DivergedLoss(epoch, loss)
            epoch_losses.append(loss)

            step += 1
            for k in params:
                m[k] = opt.beta1 * m[k] + (1 - opt.beta1) * grads[k]
                v[k] = opt.beta2 * v[k] + (1 - opt.beta2) * grads[k] ** 2
                m_hat = m[k] / (1 - opt.beta1 ** step)
                v_hat = v[k] / (1 - opt.beta2 ** step)
                params[k] -= opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)
        history.append(float(np.mean(epoch_losses)))

    return params, history


def encode(spec, params, batch):
    """Deterministic embedding: z_mean with no sampling noise."""
    x = _concat_batch(spec, batch)
    z_mean, _, _, _ = vae_forward(spec, params, batch,
                                  np.zeros((x.shape[0], spec.latent_dim)))
    return z_mean


def decode(spec, params, z):
    """Decoder-only pass for arbitrary latent coordinates."""
    g = np.asarray(z, dtype=np.float64)
    for i in range(len(spec.hidden_sizes)):
        g = np.maximum(g @ params[f"dec{i}_W"] + params[f"dec{i}_b"], 0.0)
    return {s.name: g @ params[f"head_{s.name}_W"] + params[f"head_{s.name}_b"]
            for s in spec.streams}


def reconstruction_manifold(spec, params, grid_n=8, box=(-3.0, 3.0)):
    """Decoder outputs over an evenly spaced latent grid.

    Returns (grid_points, outputs) where grid_points is (grid_n*grid_n, 2)
    and outputs maps stream names to (grid_n*grid_n, length) arrays.
    """
    axis = np.linspace(box[0], box[1], grid_n) if grid_n > 1 else np.array([0.5 * (box[0] + box[1])])
    zz = np.array([[z1, z2] for z1 in axis for z2 in axis])
    return zz, decode(spec, params, zz)
