"""Dual-path selective-scan speech separation, built on numpy.

The public surface most callers need: the autodiff tensor, the model
and its config, training utilities, and WAV helpers. Submodules stay
importable directly for everything else (ssm, blocks, dualpath, bench,
gradcheck).
"""

from .errors import DataFormatError, TrainingDiverged
from .model import (ModelConfig, SeparationModel, count_parameters,
                    load_checkpoint, load_config, preset, save_model)
from .numerics import NumericsError, Tensor, set_debug
from .training import (Adam, MixExample, TrainSchedule, mix_sources, pit_loss,
                       sdri, si_snr, si_snr_value, si_snri, train_toy)

__version__ = "0.1.0"

__all__ = [
    "Adam", "DataFormatError", "MixExample", "ModelConfig", "NumericsError",
    "SeparationModel", "Tensor", "TrainSchedule", "TrainingDiverged",
    "count_parameters", "load_checkpoint", "load_config", "mix_sources",
    "pit_loss", "preset", "save_model", "sdri", "set_debug", "si_snr",
    "si_snr_value", "si_snri", "train_toy", "__version__",
]
