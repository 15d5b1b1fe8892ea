"""Nonparametric density estimation near curves and surfaces with mixtures of
Fisher-Gaussian kernels."""

from .datagen import Dataset, euler_spiral, olympic_rings, torus, two_spirals
from .directional import sample_vmf, vmf_logpdf
from .evaluation import GaussianKDE, MadReport, classification_accuracy, mad_delta, test_loglik
from .fg_kernel import FgParams, fg_bounds, fg_logpdf, fg_sample
from .gibbs import SamplerError, run_chain, sweep
from .model import Hyperparams, ModelState, Trace, initial_state
from .predictive import Classifier, DensityModel
from .specfun import bessel_ratio, log_bessel_i, log_cd

__version__ = "0.1.0"

__all__ = [
    "Classifier", "Dataset", "DensityModel", "FgParams", "GaussianKDE", "Hyperparams", "MadReport",
    "ModelState", "SamplerError", "Trace", "bessel_ratio", "classification_accuracy", "euler_spiral",
    "fg_bounds", "fg_logpdf", "fg_sample", "initial_state", "log_bessel_i", "log_cd", "mad_delta",
    "olympic_rings", "run_chain", "sample_vmf", "sweep", "test_loglik", "torus", "two_spirals",
    "vmf_logpdf",
]
