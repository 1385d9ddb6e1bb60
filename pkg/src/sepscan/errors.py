"""Exception types shared across module boundaries."""


class DataFormatError(ValueError):
    """Malformed external data: WAV files, checkpoints, configs, manifests."""


class TrainingDiverged(RuntimeError):
    """Loss left the finite range during optimization."""
