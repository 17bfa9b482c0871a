"""Two-stage training: supervised pretraining, then clustering of new classes.

Stage 1 trains backbone and old head with cross-entropy on labeled data.
Stage 2 re-initializes the new head and trains with the clustering losses,
optionally adding the mixing loss on one mixed batch per step; the backbone
stays frozen for the first freeze_epochs. Every random stream is derived
from the master seed, so a (config, dataset) pair fully determines the run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import losses, metrics, mixing, nn
from .config import RunConfig
from .data import Dataset, HiddenTruth, LabeledSet, UnlabeledSet, batch_iter
from .optim import RmspropState


class DivergenceError(Exception):
    """Raised when a loss turns non-finite; names the offending component."""


# stream tags for deriving independent rngs from the master seed
TAG_INIT = 1
TAG_HEAD = 2
TAG_STAGE1 = 3
TAG_STAGE2 = 4
TAG_MIX = 5


def stream_seed(master: int, tag: int) -> int:
    return int(np.random.SeedSequence([master, tag]).generate_state(1)[0])


@dataclass
class EpochReport:
    """One clustering epoch: metrics at epoch end, anchors at epoch start."""

    epoch: int
    acc: float
    nmi: float
    loss_ppl: float
    loss_pll: float
    loss_opm: float
    anchor_count: int
    anchor_acc: float  # nan when anchor_count == 0


def build_model(cfg: RunConfig, input_dim: int, c_l: int, c_u: int) -> nn.TwoHeadMLP:
    """Freshly initialized model with geometry from config and data."""
    return nn.init_model(
        input_dim, cfg.hidden_dims, cfg.feature_dim, c_l, c_u,
        stream_seed(cfg.seed, TAG_INIT),
    )


def _check_finite(value: float, component: str, epoch: int) -> None:
    if not np.isfinite(value):
        raise DivergenceError(f"{component} became non-finite at epoch {epoch}")


def pretrain(model: nn.TwoHeadMLP, labeled: LabeledSet, cfg: RunConfig) -> float:
    """Stage 1: cross-entropy on old classes. Returns final training accuracy.

    The new head receives exactly zero gradient, so its parameters and its
    optimizer state stay untouched.
    """
    if len(labeled) == 0:
        raise ValueError("labeled set is empty")
    opt = RmspropState(model, cfg.lr, cfg.rmsprop_rho, cfg.rmsprop_eps)
    onehot = labeled.one_hot()
    seed = stream_seed(cfg.seed, TAG_STAGE1)
    for epoch in range(1, cfg.pretrain_epochs + 1):
        for idx in batch_iter(labeled, cfg.batch_labeled, seed, epoch):
            x = labeled.x[idx]
            _, z_l, _ = nn.forward(model, x)
            loss, g_l = losses.cross_entropy(z_l, onehot[idx])
            _check_finite(loss, "cross-entropy loss", epoch)
            grads = nn.backward(model, x, g_l, np.zeros((x.shape[0], model.c_u)))
            opt.step(model, grads)
    _, z_l, _ = nn.forward(model, labeled.x)
    return float((z_l.argmax(axis=1) == labeled.y).mean())


def attach_new_head(model: nn.TwoHeadMLP, c_u: int, seed: int) -> None:
    """Replace the new head with a seeded fresh one; everything else is kept."""
    rng = np.random.default_rng(seed)
    model.new_head = nn._init_affine(model.feature_dim, c_u, rng)


def evaluate(
    model: nn.TwoHeadMLP, unlabeled: UnlabeledSet, truth: HiddenTruth
) -> tuple[float, float]:
    """Cluster by new-head argmax and score against the hidden truth."""
    _, _, z_u = nn.forward(model, unlabeled.x)
    pred = z_u.argmax(axis=1)
    labels = truth.labels_for_eval()
    return (
        metrics.acc(pred, labels, unlabeled.num_classes),
        metrics.nmi(pred, labels),
    )


def _anchor_stats(
    anchors: mixing.AnchorSet,
    pool_pred: np.ndarray,
    truth: HiddenTruth,
    c_u: int,
) -> tuple[int, float]:
    """Anchor count and accuracy under the pool's best cluster-to-class map.

    Evaluation-only: this is the one place outside evaluate() that reads the
    hidden truth.
    """
    count = len(anchors)
    if count == 0:
        return 0, float("nan")
    labels = truth.labels_for_eval()
    table = metrics.contingency(pool_pred, labels, c_u)
    perm = metrics.assignment_solver(table.astype(np.float64))
    anchor_cluster = anchors.labels.argmax(axis=1)
    hits = perm[anchor_cluster] == labels[anchors.indices]
    return count, float(hits.mean())


def cluster_train(
    model: nn.TwoHeadMLP, dataset: Dataset, cfg: RunConfig
) -> list[EpochReport]:
    """Stage 2: clustering losses plus, when active, the mixing loss.

    Per epoch: refresh anchors from the full pool, then for each unlabeled
    batch compute the pairwise and pseudo-label losses and, once mixing is
    injected, the mixing loss on one freshly built mixed batch; a single
    optimizer step applies the combined gradient. Backbone gradients are
    masked while epoch <= freeze_epochs.
    """
    labeled, unlabeled, truth = dataset.labeled, dataset.unlabeled, dataset.truth
    if len(unlabeled) < 2:
        raise ValueError("clustering needs at least 2 unlabeled examples")
    c_u = model.c_u
    opt = RmspropState(model, cfg.lr, cfg.rmsprop_rho, cfg.rmsprop_eps)
    onehot = labeled.one_hot()
    batch_seed = stream_seed(cfg.seed, TAG_STAGE2)
    mix_seed = stream_seed(cfg.seed, TAG_MIX)
    openmix_on = cfg.lambda2 > 0 and not cfg.disable_openmix

    reports: list[EpochReport] = []
    warned_no_anchors = False
    for epoch in range(1, cfg.cluster_epochs + 1):
        _, _, z_u_pool = nn.forward(model, unlabeled.x)
        anchors = mixing.select_anchors(
            z_u_pool, cfg.theta2, soft=cfg.anchor_labels == "soft"
        )
        anchor_count, anchor_acc = _anchor_stats(
            anchors, z_u_pool.argmax(axis=1), truth, c_u
        )

        want_labeled = epoch >= cfg.labeled_mix_epoch
        want_anchor = epoch >= cfg.anchor_mix_epoch
        if want_anchor and len(anchors) == 0:
            if openmix_on and not warned_no_anchors:
                warnings.warn(
                    f"epoch {epoch}: anchor mixing skipped, no anchors cleared"
                    " theta2 (warned once per run)",
                    stacklevel=2,
                )
                warned_no_anchors = True
            want_anchor = False
        mix_active = openmix_on and (want_labeled or want_anchor)
        mix_rng = np.random.default_rng([mix_seed, epoch])

        ppl_sum = pll_sum = opm_sum = 0.0
        n_batches = 0
        for idx in batch_iter(unlabeled, cfg.batch_unlabeled, batch_seed, epoch):
            x = unlabeled.x[idx]
            _, _, z_u = nn.forward(model, x)
            s = losses.similarity_matrix(z_u)
            w = losses.pair_labels(s, cfg.theta1)
            ppl, g_ppl = losses.ppl_loss(z_u, w)
            _check_finite(ppl, "pairwise similarity loss", epoch)
            labels, assigned = losses.pseudo_labels(z_u, cfg.theta2)
            pll, g_pll = losses.pll_loss(z_u, labels, assigned)
            _check_finite(pll, "pseudo-label loss", epoch)
            g_zu = g_ppl + cfg.lambda1 * g_pll
            grads = nn.backward(
                model, x, np.zeros((x.shape[0], model.c_l)), g_zu
            )

            if mix_active:
                # targets come from the current parameters, as constants
                _, _, z_u_now = nn.forward(model, unlabeled.x)
                pred_now = nn.softmax(z_u_now)
                batch = mixing.build_mixed_batch(
                    cfg.batch_mixed,
                    labeled.x,
                    onehot,
                    unlabeled.x,
                    pred_now,
                    anchors,
                    cfg.epsilon,
                    mix_rng,
                    use_labeled=want_labeled,
                    use_anchors=want_anchor,
                )
                m = np.stack([ex.m for ex in batch])
                v = np.stack([ex.v for ex in batch])
                _, z_l_m, z_u_m = nn.forward(model, m)
                opm, g_zl_m, g_zu_m = mixing.opm_loss(
                    z_l_m, z_u_m, v, cfg.opm_softmax
                )
                _check_finite(opm, "mixing loss", epoch)
                grads_m = nn.backward(
                    model, m, cfg.lambda2 * g_zl_m, cfg.lambda2 * g_zu_m
                )
                nn.add_scaled_(grads, grads_m)
                opm_sum += opm

            if epoch <= cfg.freeze_epochs:
                nn.zero_backbone_(grads)
            opt.step(model, grads)
            ppl_sum += ppl
            pll_sum += pll
            n_batches += 1

        epoch_acc, epoch_nmi = evaluate(model, unlabeled, truth)
        reports.append(
            EpochReport(
                epoch=epoch,
                acc=epoch_acc,
                nmi=epoch_nmi,
                loss_ppl=ppl_sum / n_batches,
                loss_pll=pll_sum / n_batches,
                loss_opm=opm_sum / n_batches if mix_active else 0.0,
                anchor_count=anchor_count,
                anchor_acc=anchor_acc,
            )
        )
    return reports


METRICS_HEADER = "epoch,acc,nmi,loss_ppl,loss_pll,loss_opm,anchor_count,anchor_acc"


def _fmt(value: float) -> str:
    return repr(float(value))


def write_metrics_csv(path: str, reports: list[EpochReport]) -> None:
    """One row per epoch; floats use shortest round-trip formatting."""
    lines = [METRICS_HEADER]
    for r in reports:
        lines.append(
            ",".join(
                [
                    str(r.epoch),
                    _fmt(r.acc),
                    _fmt(r.nmi),
                    _fmt(r.loss_ppl),
                    _fmt(r.loss_pll),
                    _fmt(r.loss_opm),
                    str(r.anchor_count),
                    _fmt(r.anchor_acc),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
