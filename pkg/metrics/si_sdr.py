import numpy as np

from dsp.types import AudioBuffer
from utils.exceptions import LengthMismatch, ZeroReference

SI_SDR_CAP_DB = 60.0


def si_sdr(reference: AudioBuffer, estimate: AudioBuffer, cap_db: float = SI_SDR_CAP_DB) -> float:
    """
    Scale-invariant SDR in dB.

    Both signals are made zero-mean, the estimate is projected onto the reference and the
    energy of that projection is compared to the residual. The result is clamped to
    [-cap_db, cap_db]; a perfect (any non-zero scaling of the reference) estimate hits the
    upper cap instead of +inf.

    Raises:
        LengthMismatch: signals of different length.
        ZeroReference: the reference has no energy once its mean is removed.
    """
    s = np.asarray(reference.samples, dtype=np.float64)
    x = np.asarray(estimate.samples, dtype=np.float64)
    if s.shape != x.shape:
        raise LengthMismatch(f"reference has {s.shape[0]} samples, estimate {x.shape[0]}")
    s = s - s.mean()
    x = x - x.mean()
    ref_energy = np.dot(s, s)
    if ref_energy == 0.0:
        raise ZeroReference("reference is silent after mean removal")

    projection = (np.dot(x, s) / ref_energy) * s
    residual = x - projection
    target_energy = np.dot(projection, projection)
    noise_energy = np.dot(residual, residual)
    if noise_energy == 0.0:
        return cap_db
    if target_energy == 0.0:
        return -cap_db
    value = 10.0 * np.log10(target_energy / noise_energy)
    return float(np.clip(value, -cap_db, cap_db))
