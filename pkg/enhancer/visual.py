"""
Visual stream: embedding containers, the frozen stub encoder, VEMB files and the
video-to-STFT-frame alignment.
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from PIL import Image, ImageSequence, UnidentifiedImageError
from scipy.ndimage import uniform_filter1d

from autodiff import ops
from autodiff.tensor import Tensor
from utils.exceptions import CorruptFile, DomainError, FileError, ShapeError, VersionMismatch
from .config import ModelConfig

logger = logging.getLogger("avsem")

VEMB_MAGIC = b"VEMB"
VEMB_VERSION = 1
_VEMB_HEADER = struct.Struct("<4sIII")

SOURCES = ("precomputed_file", "stub_encoder")
STUB_POOL_FRAMES = 3


@dataclass(frozen=True, eq=False)
class VisualEmbeddingSequence:
    data: np.ndarray
    source: str = "precomputed_file"

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError(f"visual embeddings must be a non-empty V x dim grid, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DomainError("visual embeddings contain NaN or Inf")
        if self.source not in SOURCES:
            raise DomainError(f"source must be one of {SOURCES}, got {self.source!r}")
        object.__setattr__(self, "data", data)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def stub_visual_encoder(video_frames, seed: int, visual_dim: int = 64) -> Optional[VisualEmbeddingSequence]:
    """
    Deterministic stand-in for a pretrained, frozen video backbone.

    Each frame is flattened and passed through a seeded random projection plus a seeded
    zero-mean bias, then averaged over a 3-frame temporal window. Nothing here is a Tensor,
    so no gradient can ever reach it.

    Args:
        video_frames: V x H x W x C grid (V x H x W is read as one channel), or None.
        seed (int): seed of the projection and bias.
        visual_dim (int): embedding width.

    Returns:
        VisualEmbeddingSequence or None when no video is given (audio-only mode).
    """
    if video_frames is None:
        return None
    frames = np.asarray(video_frames)
    if frames.ndim == 3:
        frames = frames[..., None]
    if frames.ndim != 4 or frames.shape[0] < 1:
        raise ShapeError(f"video must be V x H x W x C with V >= 1, got {frames.shape}")
    scale = 1.0 / 255.0 if np.issubdtype(frames.dtype, np.integer) else 1.0
    flat = frames.reshape(frames.shape[0], -1).astype(np.float64) * scale

    rng = np.random.default_rng(seed)
    bias = rng.normal(size=visual_dim)
    bias -= bias.mean()
    projection = rng.normal(scale=1.0 / np.sqrt(flat.shape[1]), size=(flat.shape[1], visual_dim))

    embedded = flat @ projection + bias
    pooled = uniform_filter1d(embedded, size=STUB_POOL_FRAMES, axis=0, mode="nearest")
    return VisualEmbeddingSequence(pooled, source="stub_encoder")


def encode_batch(videos: Sequence, seed: int, visual_dim: int = 64) -> List[Optional[VisualEmbeddingSequence]]:
    """Encodes every video independently; item i only ever depends on videos[i]."""
    return [stub_visual_encoder(video, seed, visual_dim) for video in videos]


def load_video_frames(path) -> np.ndarray:
    """Decodes a multi-frame image (animated GIF, multi-page TIFF) to a V x H x W x 3 uint8 grid."""
    path = Path(path)
    try:
        with Image.open(path) as image:
            frames = [np.asarray(frame.convert("RGB")) for frame in ImageSequence.Iterator(image)]
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise FileError(f"cannot decode video frames from {path}: {exc}") from exc
    if not frames:
        raise FileError(f"{path} holds no frames")
    logger.debug(f"decoded {len(frames)} video frames from {path}")
    return np.stack(frames)


def write_vemb(path, embeddings: VisualEmbeddingSequence):
    path = Path(path)
    header = _VEMB_HEADER.pack(VEMB_MAGIC, VEMB_VERSION, embeddings.frames, embeddings.dim)
    payload = np.ascontiguousarray(embeddings.data, dtype="<f4").tobytes()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + payload)
    except OSError as exc:
        raise FileError(f"cannot write visual embeddings to {path}: {exc}") from exc


def read_vemb(path) -> VisualEmbeddingSequence:
    """
    Raises:
        FileError: the file cannot be read.
        CorruptFile: bad magic or a payload that does not match the header.
        VersionMismatch: the file was written by another format version.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise FileError(f"cannot read visual embeddings from {path}: {exc}") from exc
    if len(blob) < _VEMB_HEADER.size:
        raise CorruptFile(f"{path}: truncated VEMB header")
    magic, version, n_frames, dim = _VEMB_HEADER.unpack_from(blob)
    if magic != VEMB_MAGIC:
        raise CorruptFile(f"{path}: bad magic {magic!r}")
    if version != VEMB_VERSION:
        raise VersionMismatch(f"{path}: VEMB version {version}, expected {VEMB_VERSION}")
    expected = _VEMB_HEADER.size + 4 * n_frames * dim
    if len(blob) != expected:
        raise CorruptFile(f"{path}: expected {expected} bytes for {n_frames}x{dim}, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=_VEMB_HEADER.size).reshape(n_frames, dim)
    return VisualEmbeddingSequence(data.astype(np.float64), source="precomputed_file")


def interpolation_matrix(n_video_frames: int, target_frames: int, cfg: ModelConfig) -> np.ndarray:
    """
    T x V linear-interpolation weights from video frames to STFT frames.

    STFT frame t is centered at t * hop samples, i.e. at video position
    t * hop * fps / sample_rate. Positions past the last video frame hold that frame.
    """
    position = np.arange(target_frames) / float(cfg.alignment_factor)
    position = np.minimum(position, n_video_frames - 1)
    lower = np.floor(position).astype(int)
    upper = np.minimum(lower + 1, n_video_frames - 1)
    frac = position - lower
    weights = np.zeros((target_frames, n_video_frames))
    rows = np.arange(target_frames)
    np.add.at(weights, (rows, lower), 1.0 - frac)
    np.add.at(weights, (rows, upper), frac)
    return weights


def identity_alignment_kernel(visual_dim: int) -> np.ndarray:
    weight = np.zeros((visual_dim, visual_dim, 3, 1))
    weight[:, :, 1, 0] = np.eye(visual_dim)
    return weight


def align_visual(v: VisualEmbeddingSequence, target_frames: int, cfg: ModelConfig,
                 weight=None, bias=None) -> Tensor:
    """
    Upsamples embeddings to the STFT frame rate, then applies a kernel-3 'same' convolution over time.

    `weight` is (dim, dim, 3, 1) and `bias` (dim,); without them the convolution is the identity.

    Returns:
        Tensor: target_frames x visual_dim.
    """
    if v.dim != cfg.visual_dim:
        raise ShapeError(f"visual embeddings have dim {v.dim}, model expects {cfg.visual_dim}")
    if target_frames < 1:
        raise ShapeError(f"target_frames must be >= 1, got {target_frames}")
    upsampled = interpolation_matrix(v.frames, target_frames, cfg) @ v.data
    if weight is None:
        weight = identity_alignment_kernel(cfg.visual_dim)
    channels_first = Tensor(upsampled.T[:, :, None])
    aligned = ops.conv2d(channels_first, weight, bias)
    return ops.transpose(ops.reshape(aligned, (cfg.visual_dim, target_frames)), (1, 0))
