"""Separation training objectives with analytic gradients.

Implements the truncated phase-sensitive approximation (tPSA) mask loss
with permutation resolution, three deep-clustering losses (classic,
whitened k-means, noise-aware), the chimera blend of a DC term with tPSA,
and magnitude-ratio bin weights. Every gradient is validated against
central finite differences by `grad_check`.

Conventions: embeddings V are (TF, D) with unit-norm rows, labels Y are
(TF, C) one-hot, weights W are (TF,) nonnegative. Weights enter the DC
losses as sqrt(W) row scaling of both V and Y. Spectrogram bins flatten
row-major from (F, T), so index f*T + t.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import SepmixError
from .stft import Spectrogram

_UNIT_NORM_TOL = 1e-3  # loose enough for finite-difference perturbations


@dataclass(frozen=True)
class EmbeddingLabelPair:
    """Embeddings, dominance labels, bin weights, and a noise-bin flag."""

    embeddings: np.ndarray = field(repr=False)  # (TF, D)
    labels: np.ndarray = field(repr=False)  # (TF, C), one-hot rows
    weights: np.ndarray | None = field(default=None, repr=False)  # (TF,)
    noise_mask: np.ndarray | None = field(default=None, repr=False)  # (TF,) bool

    def __post_init__(self):
        v = np.asarray(self.embeddings, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if v.ndim != 2 or y.ndim != 2 or v.shape[0] != y.shape[0]:
            raise SepmixError(f"bad shapes: V {v.shape}, Y {y.shape}")
        if y.size:
            if not np.all((y == 0.0) | (y == 1.0)) or not np.all(y.sum(axis=1) == 1.0):
                raise SepmixError("labels must be one-hot rows")
        if v.size:
            norms = np.linalg.norm(v, axis=1)
            if np.abs(norms - 1.0).max() > _UNIT_NORM_TOL:
                raise SepmixError("embedding rows must be unit norm (caller's duty)")
        w = self.weights
        if w is None:
            w = np.ones(v.shape[0])
        else:
            w = np.asarray(w, dtype=np.float64)
            if w.shape != (v.shape[0],):
                raise SepmixError(f"weights shape {w.shape} != ({v.shape[0]},)")
            if w.size and w.min() < 0.0:
                raise SepmixError("weights must be nonnegative")
        m = self.noise_mask
        if m is not None:
            m = np.asarray(m, dtype=bool)
            if m.shape != (v.shape[0],):
                raise SepmixError(f"noise_mask shape {m.shape} != ({v.shape[0]},)")
        for name, arr in (("embeddings", v), ("labels", y), ("weights", w), ("noise_mask", m)):
            if arr is not None:
                arr = np.array(arr, order="C", copy=True)
                arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_bins(self) -> int:
        return self.embeddings.shape[0]

    def restricted(self, mask: np.ndarray) -> "EmbeddingLabelPair":
        """Rows where `mask` is true; weights kept as-is (no renormalization)."""
        return EmbeddingLabelPair(
            self.embeddings[mask], self.labels[mask], self.weights[mask], None
        )


@dataclass(frozen=True)
class LossValue:
    """Loss plus gradients keyed by input name ('embeddings' or 'masks')."""

    value: float
    gradients: dict = field(default_factory=dict, repr=False)
    permutation: tuple[int, ...] | None = None


def _clamp_roundoff(value: float, scale: float) -> float:
    # mathematically nonnegative; forgive negative round-off only
    if value < 0.0:
        if value < -1e-9 * max(scale, 1.0):
            raise SepmixError(f"loss unexpectedly negative: {value}")
        return 0.0
    return value


def tpsa_loss(masks, mixture: Spectrogram, sources) -> LossValue:
    """Permutation-free truncated phase-sensitive approximation loss.

    Per source the target is |S_c| cos(angle(S_c) - angle(X)) clamped to
    [0, |X|]; the loss is the L1 distance between each assigned masked
    mixture magnitude and its target, minimized over all assignments of
    masks to sources. Subgradient w.r.t. each mask uses sign() (0 at
    exact zero residual).
    """
    masks = [np.asarray(m, dtype=np.float64) for m in masks]
    n_src = len(sources)
    if len(masks) != n_src:
        raise SepmixError("need one mask per source")
    mag_x = mixture.magnitude
    for m in masks:
        if m.shape != mag_x.shape:
            raise SepmixError(f"mask shape {m.shape} != {mag_x.shape}")
        if m.size and (m.min() < 0.0 or m.max() > 1.0):
            raise SepmixError("masks must lie in [0, 1]")

    targets = []
    for src in sources:
        if src.bins.shape != mixture.bins.shape:
            raise SepmixError("source/mixture shape mismatch")
        # |S| cos(angle(S) - angle(X)) == Re(S conj(X)) / |X|
        psa = np.divide(
            (src.bins * mixture.bins.conj()).real,
            mag_x,
            out=np.zeros_like(mag_x),
            where=mag_x > 0,
        )
        targets.append(np.clip(psa, 0.0, mag_x))

    best = None
    best_perm = None
    for perm in itertools.permutations(range(n_src)):
        total = 0.0
        for c in range(n_src):
            total += np.abs(masks[perm[c]] * mag_x - targets[c]).sum()
        if best is None or total < best:
            best = total
            best_perm = perm

    grads = [np.zeros_like(mag_x) for _ in range(n_src)]
    for c in range(n_src):
        residual = masks[best_perm[c]] * mag_x - targets[c]
        grads[best_perm[c]] = np.sign(residual) * mag_x
    return LossValue(float(best), {"masks": grads}, best_perm)


def _weighted(pair: EmbeddingLabelPair):
    sw = np.sqrt(pair.weights)
    return pair.embeddings * sw[:, None], pair.labels * sw[:, None], sw


def dc_classic(pair: EmbeddingLabelPair) -> LossValue:
    """Frobenius distance between embedding and label affinity matrices,
    via the low-rank identity ||V'V||^2 - 2||V'Y||^2 + ||Y'Y||^2."""
    vb, yb, sw = _weighted(pair)
    if pair.num_bins == 0:
        d = pair.embeddings.shape[1] if pair.embeddings.ndim == 2 else 0
        return LossValue(0.0, {"embeddings": np.zeros((0, d))})
    vtv = vb.T @ vb
    ytv = yb.T @ vb
    yty = yb.T @ yb
    value = float((vtv * vtv).sum() - 2.0 * (ytv * ytv).sum() + (yty * yty).sum())
    value = _clamp_roundoff(value, (vtv * vtv).sum() + (yty * yty).sum())
    grad = 4.0 * sw[:, None] * (vb @ vtv - yb @ ytv)
    return LossValue(value, {"embeddings": grad})


def _sym_inv_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    return (vecs / np.sqrt(vals)) @ vecs.T


def _ridge(gram: np.ndarray) -> np.ndarray:
    dim = gram.shape[0]
    trace = np.trace(gram)
    eps = 1e-8 * (trace / dim if trace > 0 else 1.0)
    return gram + eps * np.eye(dim)


def dc_whitened(pair: EmbeddingLabelPair) -> LossValue:
    """Whitened k-means deep clustering loss.

    || V S^-1/2  -  Y (Y'Y)^-1 Y' V S^-1/2 ||_F^2 with S = V'V, weights
    folded in as sqrt(W) row scaling; both Gram inverses are ridge
    regularized (eps = 1e-8 trace/dim) so empty or collinear classes stay
    finite. The ridge is treated as a constant in the gradient.
    """
    vb, yb, sw = _weighted(pair)
    tf, d = vb.shape
    c = yb.shape[1]
    if d == 0 or c == 0:
        raise SepmixError("embedding and label dimensions must be positive")
    s = _ridge(vb.T @ vb)
    m = _sym_inv_sqrt(s)  # S^-1/2
    g = np.linalg.inv(_ridge(yb.T @ yb))

    def project_out(z):
        return z - yb @ (g @ (yb.T @ z))

    p = vb @ m
    r = project_out(p)
    value = float((r * r).sum())

    # L = tr(V' K^2 V S^-1) with K the (ridged) label projector complement
    s_inv = m @ m
    k2v = project_out(project_out(vb))
    a = vb.T @ k2v
    grad_vb = 2.0 * k2v @ s_inv - 2.0 * vb @ (s_inv @ a @ s_inv)
    return LossValue(value, {"embeddings": sw[:, None] * grad_vb})


def dc_noise_aware(pair: EmbeddingLabelPair) -> LossValue:
    """Classic DC over all bins minus classic DC over the noise bins.

    Pulls noise-dominated bins away from speech bins without forcing them
    toward each other. Uses globally consistent weights for both terms.
    """
    if pair.noise_mask is None:
        raise SepmixError("dc_noise_aware requires a noise_mask")
    full = dc_classic(pair)
    sub = dc_classic(pair.restricted(pair.noise_mask))
    grad = full.gradients["embeddings"].copy()
    grad[pair.noise_mask] -= sub.gradients["embeddings"]
    value = full.value - sub.value
    if -1e-9 * max(full.value, 1.0) < value < 0.0:
        value = 0.0
    return LossValue(value, {"embeddings": grad})


def chimera_loss(dc: LossValue, tpsa: LossValue, alpha: float) -> LossValue:
    """alpha * DC + (1 - alpha) * tPSA, gradients blended the same way."""
    if not 0.0 <= alpha <= 1.0:
        raise SepmixError(f"alpha must be in [0, 1], got {alpha}")
    value = alpha * dc.value + (1.0 - alpha) * tpsa.value
    gradients = {}
    if "embeddings" in dc.gradients:
        gradients["embeddings"] = alpha * dc.gradients["embeddings"]
    if "masks" in tpsa.gradients:
        gradients["masks"] = [(1.0 - alpha) * g for g in tpsa.gradients["masks"]]
    return LossValue(value, gradients, tpsa.permutation)


def magnitude_ratio_weights(mixture: Spectrogram) -> np.ndarray:
    """Per-bin weights |X| / sum|X|, flattened row-major from (F, T).

    Sums to one; an all-zero spectrogram gets uniform weights.
    """
    mag = mixture.magnitude.ravel()
    total = mag.sum()
    if total == 0.0:
        return np.full(mag.size, 1.0 / mag.size)
    return mag / total


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    num_coords: int
    passed: bool
    worst_coord: tuple[int, ...] | None


def grad_check(
    loss_fn,
    x0: np.ndarray,
    epsilon: float = 1e-6,
    tolerance: float = 1e-4,
    num_coords: int = 48,
    seed: int = 0,
) -> GradCheckReport:
    """Central-difference check of `loss_fn(x) -> (value, grad)`.

    A random coordinate subset (all coordinates when the input is small)
    is perturbed by +/-epsilon; the report carries the max relative error
    and passes iff it is below `tolerance`. Near-zero pairs (both below
    1e-9 of the gradient scale) count as exact to avoid 0/0 noise.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    _, analytic = loss_fn(x0)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != x0.shape:
        raise SepmixError("gradient shape mismatch")
    flat = x0.size
    rng = random.Random(seed)
    if flat <= num_coords:
        coords = list(range(flat))
    else:
        coords = sorted(rng.sample(range(flat), num_coords))

    scale = max(np.abs(analytic).max(), 1.0)
    zero_atol = 1e-9 * scale
    max_rel = 0.0
    worst = None
    for idx in coords:
        unravel = np.unravel_index(idx, x0.shape)
        xp = x0.copy()
        xp[unravel] += epsilon
        fp = loss_fn(xp)[0]
        xm = x0.copy()
        xm[unravel] -= epsilon
        fm = loss_fn(xm)[0]
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise SepmixError(f"loss not finite at perturbed coordinate {unravel}")
        fd = (fp - fm) / (2.0 * epsilon)
        an = analytic[unravel]
        if abs(fd) < zero_atol and abs(an) < zero_atol:
            rel = 0.0
        else:
            rel = abs(fd - an) / max(abs(fd), abs(an))
        if rel > max_rel:
            max_rel = rel
            worst = unravel
    max_rel = float(max_rel)
    return GradCheckReport(max_rel, len(coords), bool(max_rel < tolerance), worst)
