"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Inputs have incompatible or invalid spatial dimensions."""


class SingularityError(ValueError):
    """Transmission too close to zero for a stable inversion."""


class ConfigError(ValueError):
    """Unknown mode name or inconsistent configuration values."""


class PairingError(ValueError):
    """Hazy/clean files in a dataset directory cannot be paired one-to-one."""


class WeightLoadError(RuntimeError):
    """Strict parameter loading failed (missing key or shape mismatch)."""


class CheckpointIntegrityError(RuntimeError):
    """Checkpoint file is corrupt or fails its embedded checksum."""


class NonFiniteLossError(RuntimeError):
    """A loss term became NaN or infinite during training."""

    def __init__(self, term, value):
        self.term = term
        self.value = value
        super().__init__(f"loss term '{term}' is non-finite: {value}")
