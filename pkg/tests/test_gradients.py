"""Analytic gradients against the central finite-difference oracle."""

import numpy as np
import pytest

from panfuse import (
    IDENTITY,
    LossSpec,
    Raster,
    combined_loss,
    finite_difference_gradient,
    gm_perceptual_loss,
    gm_reconstruction_loss,
    gradient_check,
    loss_gradient,
    perceptual_loss,
    pixel_loss,
    sam_loss,
    total_sam_loss,
)
from panfuse.errors import UsageError
from helpers import random_raster, separated_pair


def loss_cases(fused, reference, lrms):
    """(evaluator, analytic gradient) pairs for every supported loss id."""
    return {
        "l1": (
            lambda x: pixel_loss(x, reference, "l1"),
            loss_gradient("l1", fused, reference),
        ),
        "mse": (
            lambda x: pixel_loss(x, reference, "mse"),
            loss_gradient("mse", fused, reference),
        ),
        "sam_cosine": (
            lambda x: sam_loss(x, reference, "cosine"),
            loss_gradient("sam_cosine", fused, reference),
        ),
        "total_sam": (
            lambda x: total_sam_loss(x, reference, lrms, 4, "cosine"),
            loss_gradient("total_sam", fused, reference, lrms=lrms, ratio=4),
        ),
        "gm_reconstruction": (
            lambda x: gm_reconstruction_loss(x, reference),
            loss_gradient("gm_reconstruction", fused, reference),
        ),
        "perceptual_identity": (
            lambda x: perceptual_loss(x, reference, IDENTITY),
            loss_gradient("perceptual_identity", fused, reference),
        ),
        "gm_perceptual_identity": (
            lambda x: gm_perceptual_loss(x, reference, IDENTITY),
            loss_gradient("gm_perceptual_identity", fused, reference),
        ),
    }


class TestClosedForms:
    def test_mse_gradient_closed_form(self):
        f, g = separated_pair(0)
        grad = loss_gradient("mse", f, g)
        want = 2.0 * (f.data - g.data) / f.data.size
        assert np.abs(grad.data - want).max() < 1e-15

    def test_l1_gradient_is_scaled_sign(self):
        f, g = separated_pair(1)
        grad = loss_gradient("l1", f, g)
        want = np.sign(f.data - g.data) / f.data.size
        assert np.array_equal(grad.data, want)

    def test_sam_gradient_vanishes_at_identity(self):
        x = random_raster(2, 8, 8, 4, lo=0.2, hi=0.8)
        grad = loss_gradient("sam_cosine", x, x)
        assert np.abs(grad.data).max() < 1e-9

    def test_unsupported_loss_id(self):
        f, g = separated_pair(3)
        with pytest.raises(UsageError):
            loss_gradient("sam_printed", f, g)


class TestFiniteDifferenceOracle:
    def test_fd_matches_mse_closed_form(self):
        f, g = separated_pair(4)
        fd = finite_difference_gradient(lambda x: pixel_loss(x, g, "mse"), f, 1e-5)
        want = 2.0 * (f.data - g.data) / f.data.size
        assert np.abs(fd.data - want).max() < 1e-7

    def test_fd_is_linear_over_combined_loss(self):
        f, g = separated_pair(5)
        lrms = random_raster(6, 2, 2, 4, lo=0.1, hi=0.9)
        spec = LossSpec(eta1=2.0, eta2=3.0)

        def base(x):
            return pixel_loss(x, g, "mse")

        def reg(x):
            return sam_loss(x, g, "cosine")

        fd_combined = finite_difference_gradient(
            lambda x: combined_loss(base(x), reg(x), spec), f, 1e-5
        )
        fd_base = finite_difference_gradient(base, f, 1e-5)
        fd_reg = finite_difference_gradient(reg, f, 1e-5)
        want = spec.eta1 * fd_base.data + spec.eta2 * fd_reg.data
        assert np.abs(fd_combined.data - want).max() < 1e-8

    def test_second_order_convergence(self):
        # halving h shrinks central-difference error about 4x on a smooth loss
        f, g = separated_pair(7)
        exact = loss_gradient("sam_cosine", f, g).data
        err = {}
        for h in (1e-3, 5e-4):
            fd = finite_difference_gradient(lambda x: sam_loss(x, g, "cosine"), f, h)
            err[h] = np.abs(fd.data - exact).max()
        ratio = err[1e-3] / err[5e-4]
        assert 2.5 < ratio < 6.0

    def test_bad_step_rejected(self):
        f, g = separated_pair(8)
        with pytest.raises(UsageError):
            finite_difference_gradient(lambda x: pixel_loss(x, g, "l1"), f, 0.0)


class TestAnalyticVsFiniteDifference:
    @pytest.mark.parametrize("seed", range(10))
    def test_all_losses_match_fd(self, seed):
        fused, reference = separated_pair(seed)
        lrms = random_raster(seed + 500, 2, 2, 4, lo=0.1, hi=0.9)
        for name, (fn, analytic) in loss_cases(fused, reference, lrms).items():
            max_rel = gradient_check(fn, analytic, fused, 1e-5)
            assert max_rel < 1e-4, f"{name} seed={seed}: max_rel={max_rel:.3e}"
