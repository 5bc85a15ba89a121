from dataclasses import dataclass

from utils.exceptions import ConfigError

PHASE_LOSS_VARIANTS = ("anti_wrap", "cosine")


@dataclass(frozen=True)
class LossWeights:
    w_time: float = 0.2
    w_mag: float = 0.9
    w_complex: float = 0.1
    w_phase: float = 0.3
    w_consistency: float = 0.1
    phase_loss: str = "anti_wrap"

    def __post_init__(self):
        values = self.as_terms()
        for name, value in values.items():
            if value < 0:
                raise ConfigError(f"loss weight {name} must be >= 0, got {value}")
        if not any(value > 0 for value in values.values()):
            raise ConfigError("at least one loss weight must be positive")
        if self.phase_loss not in PHASE_LOSS_VARIANTS:
            raise ConfigError(f"phase_loss must be one of {PHASE_LOSS_VARIANTS}, got {self.phase_loss!r}")

    def as_terms(self) -> dict:
        """Term name -> weight, in the order the breakdown is logged."""
        return {
            "time": self.w_time,
            "magnitude": self.w_mag,
            "complex": self.w_complex,
            "phase": self.w_phase,
            "consistency": self.w_consistency,
        }

    def to_dict(self) -> dict:
        return {
            "w_time": self.w_time,
            "w_mag": self.w_mag,
            "w_complex": self.w_complex,
            "w_phase": self.w_phase,
            "w_consistency": self.w_consistency,
            "phase_loss": self.phase_loss,
        }
