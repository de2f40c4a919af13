""" unit test """
import inspect
import logging
import os
import sys
from unittest.case import TestCase

import colorlog
import numpy as np

sys.path.insert(1, os.path.dirname(os.path.dirname(colorlog.__file__)))

from bnft.autodiff import GradTape
from bnft.cli import CLI
from bnft.connectome import BoldRecording
from bnft.encoder import EncoderConfig
from bnft.synthdata import SynthConfig, generate_cohort
from bnft.trainer import ModelBundle
from bnft.utils import run_once


class _LoggingOptions(object):
    log = None
    verbose = True
    quiet = False


@run_once
def setup_test_logging():
    """ set up test logging for convenience in IDE """
    root = logging.getLogger('')
    if not root.handlers:
        CLI.setup_logging(_LoggingOptions())
    else:
        root.debug("Already set up logging")


setup_test_logging()
logging.info("Bootstrapped test")


def __dir__():
    filename = inspect.getouterframes(inspect.currentframe())[1][1]
    return os.path.dirname(filename)


def random_recording(rng, regions=5, timepoints=20, subject_id="sub", label="NC"):
    return BoldRecording(subject_id, rng.standard_normal((regions, timepoints)), label)


def small_cohort(regions=8, per_class=4, seed=0, shift=0.8, timepoints=40):
    """
    Two-class synthetic cohort sized for unit tests
    """
    config = SynthConfig(regions=regions, timepoints=timepoints, n_per_class=per_class,
                         n_communities=2 if regions % 4 else 4, inter_class_shift=shift, noise_std=0.2, seed=seed)
    return generate_cohort(config)


def small_bundle(regions=8, seed=0, depth=1, heads=2, embed=8, use_ffn=True, use_norm=True, hidden=16, latent=4):
    encoder = EncoderConfig(depth=depth, heads=heads, embed=embed, use_ffn=use_ffn, use_norm=use_norm,
                            ffn_hidden=2 * embed)
    return ModelBundle.create(regions, encoder, adapter_hidden=hidden, latent=latent, seed=seed)


def numeric_gradient(build_loss, tensor, step=1e-5):
    """
    Central finite differences of build_loss() with respect to tensor.data
    """
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + step
        upper = build_loss().item()
        flat[idx] = orig - step
        lower = build_loss().item()
        flat[idx] = orig
        grad.reshape(-1)[idx] = (upper - lower) / (2 * step)
    return grad


def relative_error(first, second):
    scale = max(np.linalg.norm(first), np.linalg.norm(second), 1e-8)
    return np.linalg.norm(first - second) / scale


class BNFTestCase(TestCase):
    def setUp(self):
        self.captured_logger = None

    def assertGradientsMatch(self, build_loss, tensors, tolerance=1e-5, step=1e-5):
        """
        Tape gradients of build_loss() against finite differences for every tensor
        """
        for tensor in tensors:
            tensor.requires_grad = True
            tensor.grad = None
        with GradTape() as tape:
            loss = build_loss()
        tape.backward(loss)
        analytic = [tensor.grad.copy() for tensor in tensors]
        for tensor, grad in zip(tensors, analytic):
            numeric = numeric_gradient(build_loss, tensor, step)
            error = relative_error(grad, numeric)
            self.assertLess(error, tolerance, "%s: relative error %s" % (tensor, error))
