"""Joint labels, Beta mixing, anchors, and the L2 mixing loss."""

import numpy as np
import pytest

from openmix import mixing, nn
from helpers import assert_grad_close, fd_grad


def test_extend_labeled_layout():
    y = mixing.extend_labeled(np.array([0.0, 1.0, 0.0]), 2)
    assert np.array_equal(y, np.array([0, 1.0, 0, 0, 0]))
    with pytest.raises(ValueError):
        mixing.extend_labeled(np.array([0.5, 0.5, 0.0]), 2)
    with pytest.raises(ValueError):
        mixing.extend_labeled(np.array([1.0, 1.0, 0.0]), 2)


def test_extend_unlabeled_layout():
    p = mixing.extend_unlabeled(np.array([0.25, 0.75]), 3)
    assert np.array_equal(p, np.array([0, 0, 0, 0.25, 0.75]))
    with pytest.raises(ValueError):
        mixing.extend_unlabeled(np.array([0.5, 0.6]), 3)
    with pytest.raises(ValueError):
        mixing.extend_unlabeled(np.array([-0.1, 1.1]), 3)


def test_sample_mix_weight_fold_and_range():
    rng = np.random.default_rng(0)
    for _ in range(500):
        eta, eta_star = mixing.sample_mix_weight(1.0, rng)
        assert 0.0 <= eta <= 1.0
        assert eta_star == max(eta, 1.0 - eta)
        assert 0.5 <= eta_star <= 1.0
    with pytest.raises(ValueError):
        mixing.sample_mix_weight(0.0, rng)


def test_mix_weight_mean_at_epsilon_one():
    # eta ~ Uniform(0,1) when epsilon=1, so E[max(eta, 1-eta)] = 3/4
    rng = np.random.default_rng(1)
    draws = np.array([mixing.sample_mix_weight(1.0, rng)[1] for _ in range(100_000)])
    assert abs(draws.mean() - 0.75) < 0.01


def test_sample_mix_weight_seeded():
    a = mixing.sample_mix_weight(1.0, np.random.default_rng(7))
    b = mixing.sample_mix_weight(1.0, np.random.default_rng(7))
    assert a == b


def test_mix_with_labeled_structure():
    rng = np.random.default_rng(2)
    x_l = np.array([1.0, 0.0, 2.0])
    x_u = np.array([0.0, 4.0, -2.0])
    onehot = np.array([0.0, 1.0])
    pred = np.array([0.3, 0.7, 0.0])
    ex = mixing.mix_with_labeled(x_l, onehot, x_u, pred, 1.0, rng)
    assert ex.source == "labeled-mix"
    np.testing.assert_array_equal(ex.m, ex.eta_star * x_l + (1 - ex.eta_star) * x_u)
    # old block carries exactly eta_star of mass, new block the rest
    assert ex.v[:2].sum() == ex.eta_star
    np.testing.assert_allclose(ex.v[2:], (1 - ex.eta_star) * pred, rtol=0, atol=1e-15)
    assert abs(ex.v.sum() - 1.0) < 1e-12


def test_mix_with_anchor_structure():
    rng = np.random.default_rng(3)
    x_a = np.array([1.0, 1.0])
    x_u = np.array([-1.0, 0.0])
    label_a = np.array([1.0, 0.0, 0.0])
    pred = np.array([0.2, 0.5, 0.3])
    ex = mixing.mix_with_anchor(x_a, label_a, x_u, pred, 2, 1.0, rng)
    assert ex.source == "anchor-mix"
    # the old-class block is exactly zero for anchor mixes
    assert np.array_equal(ex.v[:2], np.zeros(2))
    np.testing.assert_allclose(
        ex.v[2:], ex.eta_star * label_a + (1 - ex.eta_star) * pred, rtol=0, atol=1e-15
    )
    assert abs(ex.v.sum() - 1.0) < 1e-12


def test_select_anchors_threshold_and_labels():
    # confident rows sit clearly above theta2: softmax(log p) recovers p only
    # up to rounding, so a row at exactly 0.9 could land on either side
    z = np.log(np.array([[0.95, 0.03, 0.02], [0.5, 0.3, 0.2], [0.04, 0.04, 0.92]]))
    anchors = mixing.select_anchors(z, 0.9)
    assert np.array_equal(anchors.indices, np.array([0, 2]))
    assert np.array_equal(anchors.labels, np.array([[1.0, 0, 0], [0, 0, 1.0]]))
    soft = mixing.select_anchors(z, 0.9, soft=True)
    p = nn.softmax(z)
    np.testing.assert_allclose(soft.labels, p[[0, 2]], rtol=0, atol=1e-15)
    empty = mixing.select_anchors(np.zeros((3, 3)), 0.9)
    assert len(empty) == 0


def test_build_mixed_batch_sources_and_determinism():
    rng_data = np.random.default_rng(4)
    labeled_x = rng_data.normal(size=(10, 4))
    labeled_onehot = np.eye(2)[rng_data.integers(0, 2, size=10)]
    unlabeled_x = rng_data.normal(size=(12, 4))
    pred_u = nn.softmax(rng_data.normal(size=(12, 3)))
    anchors = mixing.AnchorSet(np.array([0, 5]), np.eye(3)[[0, 1]].astype(float))

    batch = mixing.build_mixed_batch(
        200, labeled_x, labeled_onehot, unlabeled_x, pred_u, anchors, 1.0,
        np.random.default_rng(9), use_labeled=True, use_anchors=True,
    )
    assert len(batch) == 200
    sources = {ex.source for ex in batch}
    assert sources == {"labeled-mix", "anchor-mix"}
    n_lab = sum(ex.source == "labeled-mix" for ex in batch)
    assert 60 < n_lab < 140  # fair coin

    again = mixing.build_mixed_batch(
        200, labeled_x, labeled_onehot, unlabeled_x, pred_u, anchors, 1.0,
        np.random.default_rng(9), use_labeled=True, use_anchors=True,
    )
    for a, b in zip(batch, again):
        assert np.array_equal(a.m, b.m) and np.array_equal(a.v, b.v)

    only_lab = mixing.build_mixed_batch(
        50, labeled_x, labeled_onehot, unlabeled_x, pred_u, None, 1.0,
        np.random.default_rng(9), use_labeled=True, use_anchors=False,
    )
    assert all(ex.source == "labeled-mix" for ex in only_lab)
    only_anc = mixing.build_mixed_batch(
        50, labeled_x, labeled_onehot, unlabeled_x, pred_u, anchors, 1.0,
        np.random.default_rng(9), use_labeled=False, use_anchors=True,
    )
    assert all(ex.source == "anchor-mix" for ex in only_anc)


def test_build_mixed_batch_rejections():
    x = np.zeros((2, 3))
    onehot = np.eye(2)
    pred = np.full((2, 2), 0.5)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="empty anchor set"):
        mixing.build_mixed_batch(
            4, x, onehot, x, pred, mixing.AnchorSet(np.empty(0, np.int64), np.zeros((0, 2))),
            1.0, rng, use_labeled=False, use_anchors=True,
        )
    with pytest.raises(ValueError, match="at least one"):
        mixing.build_mixed_batch(
            4, x, onehot, x, pred, None, 1.0, rng, use_labeled=False, use_anchors=False,
        )
    with pytest.raises(ValueError):
        mixing.build_mixed_batch(
            0, x, onehot, x, pred, None, 1.0, rng, use_labeled=True, use_anchors=False,
        )


def test_opm_loss_corner_value():
    # q ~ e_0 within 1e-15, v = e_1: distance sqrt(2), loss sqrt(2)/(B*C) with B=1, C=4
    z_l = np.array([[40.0, 0.0]])
    z_u = np.array([[0.0, 0.0]])
    v = np.array([[0.0, 1.0, 0.0, 0.0]])
    loss, _, _ = mixing.opm_loss(z_l, z_u, v, mode="joint")
    assert loss == pytest.approx(0.3535533905932738, abs=1e-12)


def test_opm_loss_zero_at_exact_match():
    z_l = np.array([[0.3, -0.2]])
    z_u = np.array([[0.1, 0.4]])
    q = nn.softmax(np.concatenate([z_l, z_u], axis=1))
    loss, gl, gu = mixing.opm_loss(z_l, z_u, q.copy(), mode="joint")
    assert loss == 0.0
    assert np.array_equal(gl, np.zeros_like(z_l))
    assert np.array_equal(gu, np.zeros_like(z_u))


def test_opm_per_head_value_matches_scalar_route():
    rng = np.random.default_rng(5)
    z_l = rng.normal(size=(4, 2))
    z_u = rng.normal(size=(4, 3))
    v = np.stack([
        mixing.mix_with_labeled(
            np.zeros(2), np.array([1.0, 0.0]), np.zeros(2),
            nn.softmax(rng.normal(size=3)), 1.0, rng,
        ).v
        for _ in range(4)
    ])
    loss, _, _ = mixing.opm_loss(z_l, z_u, v, mode="per_head")
    pl, pu = nn.softmax(z_l), nn.softmax(z_u)
    want = 0.0
    for i in range(4):
        q = np.concatenate([pl[i], pu[i]])
        want += np.sqrt(((q - v[i]) ** 2).sum()) / 5.0
    want /= 4.0
    assert loss == pytest.approx(want, abs=1e-14)
    with pytest.raises(ValueError):
        mixing.opm_loss(z_l, z_u, v, mode="blended")


def test_opm_gradient_finite_difference_both_modes():
    rng = np.random.default_rng(6)
    for mode in ("joint", "per_head"):
        for _ in range(10):
            b = int(rng.integers(1, 5))
            c_l = int(rng.integers(2, 4))
            c_u = int(rng.integers(2, 4))
            z_l = rng.normal(size=(b, c_l))
            z_u = rng.normal(size=(b, c_u))
            v = nn.softmax(rng.normal(size=(b, c_l + c_u)))
            loss, gl, gu = mixing.opm_loss(z_l, z_u, v, mode=mode)
            flat = np.concatenate([z_l.reshape(-1), z_u.reshape(-1)])

            def loss_at(f):
                zl = f[: b * c_l].reshape(b, c_l)
                zu = f[b * c_l :].reshape(b, c_u)
                return mixing.opm_loss(zl, zu, v, mode=mode)[0]

            numeric = fd_grad(loss_at, flat)
            assert_grad_close(np.concatenate([gl.reshape(-1), gu.reshape(-1)]), numeric)


def test_opm_loss_shape_checks():
    with pytest.raises(ValueError):
        mixing.opm_loss(np.zeros((2, 2)), np.zeros((3, 2)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        mixing.opm_loss(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        mixing.opm_loss(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 4)))
