"""Spectral sequence mixing with unitary Hessenberg transforms and kernel polynomial filters.

Everything runs on numpy in double precision; gradients come from the small
reverse-mode tape in :mod:`synvolution.autodiff`.
"""

from .kpm import KERNELS, ChebFilter, cpi_coefficients, gibbs_factors, kernel_polynomial_loss, kpm_eval
from .model import ModelConfig, converter_forward, init_params, kernelution, synvolution
from .numeric import DomainError, Rng, ShapeError
from .training import TrainConfig, evaluate, gen_task, train
from .unitary import DhhpParams, dhhp_dense_matrix, dhhp_forward, dhhp_inverse, fit_unitary_target, init_dhhp, pscan

__version__ = "0.1.0"
