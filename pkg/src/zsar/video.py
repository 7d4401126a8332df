"""Video decoding and uniform frame sampling.

Two input forms are supported: container video files (decoded with
OpenCV) and directories of pre-extracted frames named frame_*.ext, whose
lexicographic order is the temporal order. Frame directories are the
deterministic test path; container decoding goes through the same
sampling and preprocessing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DecodeError, DomainError, EmptyVideoError
from .preprocess import preprocess_image

FRAME_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


def uniform_indices(total_frames: int, n: int, anchor: str = "start") -> list[int]:
    """Pick n frame indices uniformly across [0, total_frames).

    anchor="start" uses floor(i*T/N); anchor="center" uses
    floor((i+0.5)*T/N). Short videos (T < N) repeat indices rather than
    erroring.
    """
    if total_frames < 1:
        raise DomainError(f"total_frames must be >= 1, got {total_frames}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if anchor == "start":
        return [i * total_frames // n for i in range(n)]
    if anchor == "center":
        return [int((i + 0.5) * total_frames / n) for i in range(n)]
    raise DomainError(f"unknown sampling anchor {anchor!r}")


@dataclass
class VideoSample:
    """A decoded video: n preprocessed frames plus where they came from."""

    path: str
    total_frames: int
    sampled_indices: list[int]
    frames: np.ndarray  # (n, 224, 224, 3) float32


def _list_frame_files(directory: Path) -> list[Path]:
    files = [
        p for p in directory.iterdir()
        if p.is_file() and p.name.startswith("frame_")
        and p.suffix.lower() in FRAME_EXTENSIONS
    ]
    return sorted(files, key=lambda p: p.name)


def _load_from_directory(directory: Path, n: int, anchor: str) -> VideoSample:
    from PIL import Image

    files = _list_frame_files(directory)
    if not files:
        raise EmptyVideoError(f"no frame_* images in {directory}")
    total = len(files)
    indices = uniform_indices(total, n, anchor)
    frames = []
    for i in indices:
        try:
            with Image.open(files[i]) as img:
                frames.append(preprocess_image(img))
        except OSError as exc:
            raise DecodeError(f"cannot decode frame image {files[i]}: {exc}") from exc
    return VideoSample(
        path=str(directory),
        total_frames=total,
        sampled_indices=indices,
        frames=np.stack(frames),
    )


def _count_frames(path: Path) -> int:
    import cv2

    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeError(f"cannot open video file {path}")
    total = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
    if total <= 0:
        # Unreliable container metadata: count by decoding.
        total = 0
        while cap.grab():
            total += 1
    cap.release()
    return total


def _load_from_container(path: Path, n: int, anchor: str) -> VideoSample:
    import cv2

    total = _count_frames(path)
    if total == 0:
        raise EmptyVideoError(f"video {path} contains no frames")
    indices = uniform_indices(total, n, anchor)
    wanted = set(indices)
    decoded: dict[int, np.ndarray] = {}
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeError(f"cannot open video file {path}")
    # Sequential read is deterministic where per-frame seeking is not.
    pos = 0
    last_wanted = max(wanted)
    while pos <= last_wanted:
        ok, frame = cap.read()
        if not ok:
            break
        if pos in wanted:
            decoded[pos] = cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
        pos += 1
    cap.release()
    missing = wanted - set(decoded)
    if missing:
        raise DecodeError(f"video {path}: frames {sorted(missing)} failed to decode")
    frames = np.stack([preprocess_image(decoded[i]) for i in indices])
    return VideoSample(
        path=str(path), total_frames=total, sampled_indices=indices, frames=frames
    )


def load_sample(path: str | Path, n: int, anchor: str = "start") -> VideoSample:
    """Decode a video source and return its n uniformly sampled, preprocessed frames."""
    path = Path(path)
    if not path.exists():
        raise DecodeError(f"video source does not exist: {path}")
    if path.is_dir():
        return _load_from_directory(path, n, anchor)
    return _load_from_container(path, n, anchor)
