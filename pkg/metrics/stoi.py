"""
Short-time objective intelligibility, computed by pystoi (resampling to 10 kHz, silent
frame removal, 15 one-third-octave bands from 150 Hz, 30-frame segments, clipping at
-15 dB SDR), with this project's error contract around it.
"""
import warnings

import numpy as np
from pystoi import stoi as pystoi_stoi

from dsp.types import AudioBuffer
from utils.exceptions import DomainError, LengthMismatch, TooShort

# the canonical algorithm's constants, echoed in metrics reports
STOI_PARAMETERS = {
    "fs": 10000,
    "frame_len": 256,
    "nfft": 512,
    "num_bands": 15,
    "min_freq": 150,
    "segment_frames": 30,
    "beta_db": -15,
    "dyn_range_db": 40,
}


def stoi(clean: AudioBuffer, processed: AudioBuffer, extended: bool = False) -> float:
    """
    Raises:
        LengthMismatch: the signals differ in length or sample rate.
        DomainError: the clean signal is all zeros.
        TooShort: fewer than one 30-frame segment survives silent-frame removal.
    """
    if len(clean) != len(processed):
        raise LengthMismatch(f"clean has {len(clean)} samples, processed {len(processed)}")
    if clean.sample_rate != processed.sample_rate:
        raise LengthMismatch(f"sample rates differ: {clean.sample_rate} vs {processed.sample_rate}")
    if not np.any(clean.samples):
        raise DomainError("STOI is undefined for a silent clean signal")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        score = pystoi_stoi(clean.samples, processed.samples, clean.sample_rate, extended=extended)
    # pystoi warns and returns 1e-5 when too little speech is left
    if any("Not enough" in str(w.message) for w in caught):
        raise TooShort(
            f"fewer than {STOI_PARAMETERS['segment_frames']} frames remain after silence removal "
            f"({clean.duration:.2f} s of audio)"
        )
    return float(score)
