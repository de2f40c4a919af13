import numpy as np

from bnft import ConfigurationError, DimensionError, InputError
from bnft.autodiff import Tensor, GradTape
from bnft.objectives import HeadParams, LossWeights, infonce_loss, batch_infonce, combined_loss, mse_loss, \
    make_views, reconstruction_head, classification_head
from bnft.utils import make_rng
from tests import BNFTestCase


class TestInfoNCE(BNFTestCase):
    def test_orthogonal_negatives(self):
        for negatives in (1, 3, 7):
            basis = np.eye(negatives + 1)
            query = Tensor(basis[0])
            loss = infonce_loss(query, Tensor(basis[0]), [Tensor(row) for row in basis[1:]], tau=1.0)
            self.assertAlmostEqual(-np.log(np.e / (np.e + negatives)), loss.item(), delta=1e-9)

    def test_identical_candidates(self):
        rng = make_rng(41)
        for negatives in (1, 3, 7):
            query = rng.standard_normal(5)
            loss = infonce_loss(Tensor(query), Tensor(query), [Tensor(query * 2.0)] * negatives, tau=0.07)
            self.assertAlmostEqual(np.log(negatives + 1), loss.item(), delta=1e-9)

    def test_errors(self):
        vec = Tensor([1.0, 0.0])
        self.assertRaises(InputError, infonce_loss, vec, vec, [], 1.0)
        self.assertRaises(ConfigurationError, infonce_loss, vec, vec, [vec], 0.0)

    def test_batch_equals_mean_of_anchors(self):
        rng = make_rng(42)
        first, second = rng.standard_normal((4, 6)), rng.standard_normal((4, 6))
        views = list(first) + list(second)
        losses = []
        for idx in range(8):
            pair = (idx + 4) % 8
            others = [Tensor(views[j]) for j in range(8) if j not in (idx, pair)]
            losses.append(infonce_loss(Tensor(views[idx]), Tensor(views[pair]), others, tau=0.5).item())
        batch = batch_infonce(Tensor(first), Tensor(second), tau=0.5)
        self.assertAlmostEqual(np.mean(losses), batch.item(), delta=1e-9)

    def test_batch_accepts_row_vectors(self):
        rng = make_rng(43)
        first, second = rng.standard_normal((3, 1, 4)), rng.standard_normal((3, 1, 4))
        flat = batch_infonce(Tensor(first.reshape(3, 4)), Tensor(second.reshape(3, 4)), 0.2).item()
        self.assertAlmostEqual(flat, batch_infonce(Tensor(first), Tensor(second), 0.2).item(), delta=1e-12)

    def test_batch_errors(self):
        self.assertRaises(InputError, batch_infonce, Tensor(np.ones((1, 3))), Tensor(np.ones((1, 3))), 0.1)
        self.assertRaises(DimensionError, batch_infonce, Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3))), 0.1)

    def test_gradients(self):
        rng = make_rng(44)
        first = Tensor(rng.standard_normal((3, 5)))
        second = Tensor(rng.standard_normal((3, 5)))
        self.assertGradientsMatch(lambda: batch_infonce(first, second, 0.3), [first, second])

        query, positive = Tensor(rng.standard_normal(4)), Tensor(rng.standard_normal(4))
        negatives = [Tensor(rng.standard_normal(4)) for _ in range(3)]
        self.assertGradientsMatch(lambda: infonce_loss(query, positive, negatives, 0.5), [query, positive])

    def test_sharper_temperature_lowers_loss(self):
        rng = make_rng(46)
        for _ in range(10):
            query = rng.standard_normal(6)
            positive = query + 0.1 * rng.standard_normal(6)
            negatives = [rng.standard_normal(6) for _ in range(4)]
            losses = [infonce_loss(Tensor(query), Tensor(positive), [Tensor(item) for item in negatives], tau).item()
                      for tau in np.linspace(1.0, 0.1, 10)]
            for before, after in zip(losses, losses[1:]):
                self.assertLess(after, before)

    def test_closer_positive_lowers_loss(self):
        rng = make_rng(47)
        query = np.array([1.0, 0.0, 0.0, 0.0])
        negatives = [Tensor(rng.standard_normal(4)) for _ in range(3)]
        losses = []
        for angle in np.linspace(np.pi * 0.95, 0.0, 12):
            positive = Tensor([np.cos(angle), np.sin(angle), 0.0, 0.0])
            losses.append(infonce_loss(Tensor(query), positive, negatives, 0.2).item())
        for before, after in zip(losses, losses[1:]):
            self.assertLess(after, before)


class TestLosses(BNFTestCase):
    def test_mse(self):
        self.assertAlmostEqual(2.5, mse_loss(Tensor([[1.0, 2.0]]), np.array([[0.0, 0.0]])).item())
        self.assertEqual(0.0, mse_loss(Tensor(np.ones((2, 2))), Tensor(np.ones((2, 2)))).item())
        self.assertRaises(DimensionError, mse_loss, Tensor(np.ones((2, 2))), np.ones((2, 3)))

    def test_mse_oracle_and_gradient(self):
        self.assertAlmostEqual(5.0, mse_loss(Tensor([0.0, 0.0]), np.array([1.0, 3.0])).item(), delta=1e-12)
        rng = make_rng(48)
        pred = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        target = rng.standard_normal((3, 4))
        with GradTape() as tape:
            loss = mse_loss(pred, target)
        tape.backward(loss)
        np.testing.assert_allclose(2.0 * (pred.data - target) / pred.size, pred.grad, atol=1e-12)

    def test_combined_linearity(self):
        rng = make_rng(49)
        for _ in range(20):
            lambda_c, lambda_r = rng.uniform(0.01, 10.0, size=2)
            weights = LossWeights(lambda_c=lambda_c, lambda_r=lambda_r)
            l_c, l_r, extra = rng.uniform(-5.0, 5.0, size=3)
            total = combined_loss(l_c, l_r, weights).item()
            self.assertAlmostEqual(lambda_c * l_c + lambda_r * l_r, total, delta=1e-9)
            shifted = combined_loss(l_c + extra, l_r, weights).item()
            self.assertAlmostEqual(total + lambda_c * extra, shifted, delta=1e-9)
            scaled = combined_loss(2.0 * l_c, 2.0 * l_r, weights).item()
            self.assertAlmostEqual(2.0 * total, scaled, delta=1e-9)

    def test_weights(self):
        weights = LossWeights(lambda_c=0.2, lambda_r=5.0)
        self.assertAlmostEqual(0.2 * 1.5 + 5.0 * 0.1, combined_loss(1.5, 0.1, weights).item())
        self.assertRaises(ConfigurationError, LossWeights, lambda_c=-1)
        self.assertRaises(ConfigurationError, LossWeights, lambda_c=0, lambda_r=0)
        self.assertRaises(ConfigurationError, LossWeights, tau=0)
        self.assertEqual(5.0, LossWeights(lambda_c=0.0).lambda_r)

    def test_heads(self):
        rng = make_rng(45)
        heads = HeadParams.init(8, 6, 4, rng)
        tokens = Tensor(rng.standard_normal((6, 8)))
        self.assertEqual((6, 6), reconstruction_head(tokens, heads).shape)
        latent = classification_head(tokens, heads)
        self.assertEqual((1, 4), latent.shape)
        self.assertAlmostEqual(1.0, np.linalg.norm(latent.data), delta=1e-12)
        self.assertRaises(ConfigurationError, HeadParams, 8, 6, 0)


class TestViews(BNFTestCase):
    def test_symmetric_masking(self):
        rng = make_rng(46)
        raw = rng.uniform(0.1, 0.9, (10, 10))
        values = (raw + raw.T) / 2
        np.fill_diagonal(values, 1.0)
        view = make_views(values, 0.1, rng)
        np.testing.assert_array_equal(view, view.T)
        np.testing.assert_array_equal(np.ones(10), np.diag(view))
        rows, cols = np.triu_indices(10, k=1)
        self.assertEqual(int(round(0.1 * 45)), int(np.sum(view[rows, cols] == 0.0)))
        self.assertFalse(np.any(values == 0.0))

    def test_no_masking(self):
        values = np.eye(4)
        np.testing.assert_array_equal(values, make_views(values, 0.0, make_rng(0)))
