"""Joint-label extension, Beta-weighted mixing, anchors, and the L2 mixing loss.

Labels live in a joint space of length C_l + C_u: old classes first, new
classes after. Labeled examples are certain about old classes and carry
exact zeros on the new block; unlabeled predictions get zeros on the old
block. Mixed examples interpolate both inputs and labels with a weight
eta* = max(eta, 1 - eta) >= 0.5 so the first argument dominates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import softmax, softmax_backward

# below this distance the L2 loss gradient is left at zero (kink at 0)
_NORM_FLOOR = 1e-12


def _check_one_hot(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("one-hot label must be a vector")
    ones = np.count_nonzero(y == 1.0)
    if ones != 1 or np.count_nonzero(y) != 1:
        raise ValueError("label must be exactly one-hot")
    return y


def _check_simplex(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("distribution must be a vector")
    if p.min() < 0.0 or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("distribution must be nonnegative and sum to 1")
    return p


def extend_labeled(onehot_l: np.ndarray, c_u: int) -> np.ndarray:
    """[one-hot over old classes] ++ [zeros over new classes]."""
    y = _check_one_hot(onehot_l)
    return np.concatenate([y, np.zeros(c_u)])


def extend_unlabeled(dist_u: np.ndarray, c_l: int) -> np.ndarray:
    """[zeros over old classes] ++ [distribution over new classes]."""
    p = _check_simplex(dist_u)
    return np.concatenate([np.zeros(c_l), p])


def sample_mix_weight(epsilon: float, rng: np.random.Generator) -> tuple[float, float]:
    """Draw eta ~ Beta(epsilon, epsilon) and fold it to eta* = max(eta, 1-eta)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    eta = float(rng.beta(epsilon, epsilon))
    return eta, max(eta, 1.0 - eta)


@dataclass
class MixedExample:
    m: np.ndarray  # mixed input vector
    v: np.ndarray  # joint label, length c_l + c_u
    eta: float
    eta_star: float
    source: str  # "labeled-mix" or "anchor-mix"


@dataclass
class AnchorSet:
    """Unlabeled rows whose max softmax cleared theta2, with their labels."""

    indices: np.ndarray  # (K,) int64 row indices into the unlabeled pool
    labels: np.ndarray  # (K, c_u) one-hot (or soft) labels captured at selection

    def __len__(self) -> int:
        return self.indices.shape[0]


def select_anchors(z_u_pool: np.ndarray, theta2: float, soft: bool = False) -> AnchorSet:
    """Pick every example whose max softmax is >= theta2.

    Labels are the thresholded one-hot pseudo-labels; with soft=True the raw
    softmax rows are kept instead.
    """
    if not 0.5 < theta2 < 1.0:
        raise ValueError("theta2 must be in (0.5, 1)")
    p = softmax(np.asarray(z_u_pool, dtype=np.float64))
    mask = p.max(axis=1) >= theta2
    idx = np.flatnonzero(mask)
    labels = p[idx] if soft else (p[idx] >= theta2).astype(np.float64)
    return AnchorSet(idx.astype(np.int64), labels)


def mix_with_labeled(
    x_l: np.ndarray,
    onehot_l: np.ndarray,
    x_u: np.ndarray,
    pred_u: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> MixedExample:
    """Mix a labeled example with an unlabeled one; the labeled side dominates."""
    x_l = np.asarray(x_l, dtype=np.float64)
    x_u = np.asarray(x_u, dtype=np.float64)
    if x_l.shape != x_u.shape:
        raise ValueError("feature dimensions differ")
    c_u = np.asarray(pred_u).shape[0]
    c_l = np.asarray(onehot_l).shape[0]
    eta, eta_star = sample_mix_weight(epsilon, rng)
    m = eta_star * x_l + (1.0 - eta_star) * x_u
    v = eta_star * extend_labeled(onehot_l, c_u) + (1.0 - eta_star) * extend_unlabeled(
        pred_u, c_l
    )
    return MixedExample(m, v, eta, eta_star, "labeled-mix")


def mix_with_anchor(
    x_anchor: np.ndarray,
    label_anchor: np.ndarray,
    x_u: np.ndarray,
    pred_u: np.ndarray,
    c_l: int,
    epsilon: float,
    rng: np.random.Generator,
) -> MixedExample:
    """Mix a reliable anchor with an unlabeled example; both labels sit in the new block."""
    x_anchor = np.asarray(x_anchor, dtype=np.float64)
    x_u = np.asarray(x_u, dtype=np.float64)
    if x_anchor.shape != x_u.shape:
        raise ValueError("feature dimensions differ")
    eta, eta_star = sample_mix_weight(epsilon, rng)
    m = eta_star * x_anchor + (1.0 - eta_star) * x_u
    v = eta_star * extend_unlabeled(label_anchor, c_l) + (
        1.0 - eta_star
    ) * extend_unlabeled(pred_u, c_l)
    return MixedExample(m, v, eta, eta_star, "anchor-mix")


def build_mixed_batch(
    size: int,
    labeled_x: np.ndarray,
    labeled_onehot: np.ndarray,
    unlabeled_x: np.ndarray,
    pred_u: np.ndarray,
    anchors: AnchorSet | None,
    epsilon: float,
    rng: np.random.Generator,
    use_labeled: bool,
    use_anchors: bool,
) -> list[MixedExample]:
    """Assemble one mixed batch by uniform pairing with replacement.

    When both sources are active each row flips a fair coin between them.
    Draw order is fixed (sources, labeled rows, anchor rows, unlabeled rows,
    then per-row mixing weights) so a seeded rng reproduces the batch.
    """
    if size < 1:
        raise ValueError("batch size must be >= 1")
    if not use_labeled and not use_anchors:
        raise ValueError("at least one mixing source must be active")
    if use_anchors and (anchors is None or len(anchors) == 0):
        raise ValueError("anchor mixing requested with an empty anchor set")
    c_l = labeled_onehot.shape[1]

    if use_labeled and use_anchors:
        from_labeled = rng.integers(0, 2, size=size).astype(bool)
    else:
        from_labeled = np.full(size, use_labeled)
    n_lab = int(from_labeled.sum())
    lab_rows = rng.integers(0, labeled_x.shape[0], size=n_lab) if n_lab else np.empty(0, np.int64)
    anc_rows = (
        rng.integers(0, len(anchors), size=size - n_lab) if size - n_lab else np.empty(0, np.int64)
    )
    unl_rows = rng.integers(0, unlabeled_x.shape[0], size=size)

    out: list[MixedExample] = []
    lab_i = anc_i = 0
    for row in range(size):
        j = unl_rows[row]
        if from_labeled[row]:
            i = lab_rows[lab_i]
            lab_i += 1
            out.append(
                mix_with_labeled(
                    labeled_x[i], labeled_onehot[i], unlabeled_x[j], pred_u[j], epsilon, rng
                )
            )
        else:
            k = anc_rows[anc_i]
            anc_i += 1
            a = anchors.indices[k]
            out.append(
                mix_with_anchor(
                    unlabeled_x[a], anchors.labels[k], unlabeled_x[j], pred_u[j], c_l, epsilon, rng
                )
            )
    return out


def opm_loss(
    z_l: np.ndarray, z_u: np.ndarray, v: np.ndarray, mode: str = "joint"
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean scaled L2 distance between joint labels and model outputs.

    Per example: ||v - q||_2 / (C_l + C_u), averaged over the batch, where q
    is the softmax of the concatenated head logits ("joint") or the
    concatenation of per-head softmaxes ("per_head"). Returns the loss and
    gradients w.r.t. both heads' logits.
    """
    z_l = np.asarray(z_l, dtype=np.float64)
    z_u = np.asarray(z_u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if z_l.ndim != 2 or z_u.ndim != 2 or z_l.shape[0] != z_u.shape[0]:
        raise ValueError("head logit batches disagree")
    b = z_l.shape[0]
    if b < 1:
        raise ValueError("empty mixed batch")
    c_l, c_u = z_l.shape[1], z_u.shape[1]
    if v.shape != (b, c_l + c_u):
        raise ValueError("joint label shape mismatch")
    c = c_l + c_u

    if mode == "joint":
        q = softmax(np.concatenate([z_l, z_u], axis=1))
    elif mode == "per_head":
        q = np.concatenate([softmax(z_l), softmax(z_u)], axis=1)
    else:
        raise ValueError("mode must be 'joint' or 'per_head'")

    r = q - v
    d = np.linalg.norm(r, axis=1)
    loss = float(d.sum() / (b * c))

    grad_q = np.zeros_like(q)
    live = d > _NORM_FLOOR
    grad_q[live] = r[live] / (d[live, None] * b * c)
    if mode == "joint":
        grad_z = softmax_backward(q, grad_q)
        return loss, grad_z[:, :c_l], grad_z[:, c_l:]
    grad_zl = softmax_backward(q[:, :c_l], grad_q[:, :c_l])
    grad_zu = softmax_backward(q[:, c_l:], grad_q[:, c_l:])
    return loss, grad_zl, grad_zu
