import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnbarrier import pinnloss as pl
from pinnbarrier.mms import eval_mms
from pinnbarrier.tapenet import forward, init_params

pos = st.floats(1e-6, 1e4)
logs = st.floats(-5.0, 5.0)


def _terms(dim=1, seed=0, n_col=12):
    rng = np.random.default_rng(seed)
    if dim == 1:
        col = rng.uniform(-1, 1, (n_col, 1))
        data = np.array([[-0.55], [-0.3], [0.3], [0.8]])
        bc = np.array([[-1.0]])
        nu_col = np.full(n_col, 1e-2)
        labels = eval_mms(data[:, 0], 1e-2)
    else:
        col = rng.uniform(-1, 1, (n_col, 2))
        data = rng.uniform(-1, 1, (5, 2))
        bc = np.column_stack([-np.ones(3), [-1.0, 0.0, 1.0]])
        nu_col = 10 ** rng.uniform(-6, -1, n_col)
        labels = rng.normal(6, 1, 5)
    return pl.LossTerms(col, nu_col, data, labels + 0.1, bc, eval_mms(-1.0, 1e-2) * np.ones(len(bc)))


def test_lbpinn_unit_sigmas():
    assert pl.total_lbpinn([0, 0, 0], 1.0, 2.0, 3.0) == pytest.approx(3.0)


@given(pos, pos, pos)
def test_lbpinn_closed_form_optimum(a, b, c):
    s = 0.5 * np.log([a, b, c])
    val = pl.total_lbpinn(s, a, b, c)
    assert val == pytest.approx(1.5 + 0.5 * np.sum(np.log([a, b, c])), rel=1e-12, abs=1e-12)
    _, _, g = pl.combine(pl.Weighting.lbpinn(), s, a, b, c)
    assert np.allclose(g, 0.0, atol=1e-12)


@given(st.tuples(pos, pos, pos), st.tuples(logs, logs, logs))
def test_lbpinn_permutation_invariant(losses, sig):
    ref = pl.total_lbpinn(sig, *losses)
    for perm in itertools.permutations(range(3)):
        assert pl.total_lbpinn([sig[i] for i in perm], *[losses[i] for i in perm]) == pytest.approx(ref, rel=1e-14)


def test_fixed_weighting():
    assert pl.total_fixed(0.0, 5.0, 1.0, 2.0) == 3.0
    assert pl.total_fixed(1.0, 5.0, 1.0, 2.0) == 5.0
    assert pl.total_fixed(0.25, 4.0, 1.0, 3.0) == pytest.approx(1.0 + 3.0)
    with pytest.raises(ValueError):
        pl.total_fixed(1.5, 1, 1, 1)
    with pytest.raises(ValueError):
        pl.Weighting.fixed(-0.1)
    with pytest.raises(ValueError):
        pl.Weighting("softmax")
    assert pl.Weighting.fixed(0.5).label == "0.5"


def test_warmup_mask():
    total, w, g = pl.combine(pl.Weighting.lbpinn(), [3.0, -2.0, 1.0], 1e6, 2.0, 4.0, warmup=True)
    assert total == 3.0 and list(w) == [0.0, 0.5, 0.5] and not np.any(g)


def test_individual_terms():
    p = init_params([1, 5, 1], 0)
    pts = np.array([[-0.2], [0.4]])
    labels = np.array([1.0, -1.0])
    pred = forward(p, pts)
    assert pl.loss_data(p, pts, labels) == pytest.approx(np.mean((labels - pred) ** 2))
    assert pl.loss_bc(p, pts, labels) == pl.loss_data(p, pts, labels)
    with pytest.raises(ValueError):
        pl.loss_data(p, pts[:0], labels[:0])
    with pytest.raises(ValueError):
        pl.loss_pde(p, pts[:0], 1e-2)


@pytest.mark.parametrize("weighting", [pl.Weighting.lbpinn(), pl.Weighting.fixed(0.3)])
@pytest.mark.parametrize("dim", [1, 2])
def test_composite_gradient_matches_finite_differences(weighting, dim):
    sizes = [dim, 8, 8, 1]
    net = init_params(sizes, 4)
    rng = np.random.default_rng(9)
    theta = np.concatenate([net.flat() + rng.normal(scale=0.05, size=net.n_params), [0.3, -0.2, 0.1]])
    terms = _terms(dim)
    _, g, _ = pl.loss_and_grad(theta, sizes, terms, weighting)

    def f(t):
        return pl.loss_and_grad(t, sizes, terms, weighting)[0]

    h = 1e-6
    fd = np.array([(f(theta + h * e) - f(theta - h * e)) / (2 * h) for e in np.eye(theta.size)])
    assert np.max(np.abs(g - fd)) / np.linalg.norm(g) < 1e-6


def test_breakdown_matches_direct_terms():
    sizes = [1, 6, 1]
    net = init_params(sizes, 2)
    theta = np.concatenate([net.flat(), [0.5, 0.0, -0.5]])
    terms = _terms()
    total, _, br = pl.loss_and_grad(theta, sizes, terms, pl.Weighting.lbpinn())
    assert br.l_pde == pytest.approx(pl.loss_pde(net, terms.col_points, terms.col_nu))
    assert br.l_d == pytest.approx(pl.loss_data(net, terms.data_points, terms.data_labels))
    assert br.l_bc == pytest.approx(pl.loss_bc(net, terms.bc_points, terms.bc_labels))
    assert total == pytest.approx(pl.total_lbpinn([0.5, 0.0, -0.5], br.l_pde, br.l_bc, br.l_d))
    assert br.sigma == pytest.approx(tuple(np.exp([0.5, 0.0, -0.5])))


def test_warmup_gradient_has_no_pde_path():
    sizes = [1, 6, 1]
    theta = np.concatenate([init_params(sizes, 1).flat(), [1.0, 2.0, 3.0]])
    terms = _terms()
    other = pl.LossTerms(terms.col_points * 0.5, terms.col_nu * 3, terms.data_points, terms.data_labels,
                         terms.bc_points, terms.bc_labels)
    t1, g1, br, (g_pde, g_bc, g_d) = pl.loss_and_grad(theta, sizes, terms, pl.Weighting.lbpinn(),
                                                      warmup=True, want_parts=True)
    _, g2, _ = pl.loss_and_grad(theta, sizes, other, pl.Weighting.lbpinn(), warmup=True)
    assert np.array_equal(g1, g2)
    assert np.any(g_pde)  # the PDE path exists but is masked out
    assert np.allclose(g1[:-3], 0.5 * (g_bc + g_d), rtol=1e-14, atol=1e-15)
    assert not np.any(g1[-3:])
    assert br.sigma == (1.0, 1.0, 1.0)
    assert t1 == pytest.approx(0.5 * (br.l_bc + br.l_d))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_effective_loss_decomposition_identity(seed):
    rng = np.random.default_rng(seed)
    net = init_params([1, 5, 1], seed)
    pts = rng.uniform(-1, 1, (9, 1))
    true = rng.normal(size=9)
    noisy = true + rng.normal(scale=0.3, size=9)
    parts = pl.effective_decomposition(net, pts, true, noisy)
    direct = pl.loss_data(net, pts, noisy)
    assert abs(parts.effective - direct) <= 1e-12 * max(1.0, direct)
    assert parts.bias == pytest.approx(np.mean((noisy - true) ** 2))


def test_decomposition_rejects_misaligned_inputs():
    net = init_params([1, 3, 1], 0)
    with pytest.raises(ValueError):
        pl.effective_decomposition(net, np.zeros((3, 1)), np.zeros(3), np.zeros(2))
    with pytest.raises(ValueError):
        pl.effective_decomposition(net, np.zeros((3, 1)), np.zeros(2), np.zeros(2))
