"""Frame ingestion and output writing.

Two input shapes: a directory of still images (lexicographic order, one
frame each) or a video file decoded through an external tool at a coarse
sampling rate. Decoding shells out with a pinned argument list and reads
raw RGB24 off stdout, so the only runtime requirement is the decoder
binary itself.

Outputs are staged in a temporary directory and moved into place so a
crash mid-write never leaves a partial result: if the destination does
not exist the whole staged directory is renamed in one step, otherwise
files move one at a time with the manifest last (readers treat the
manifest as the commit record).
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import EmptyInputError, FrameDecodeError, ToolNotFoundError

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")
MANIFEST_NAME = "manifest.json"
CONTACT_SHEET_NAME = "contact_sheet.png"


@dataclass(frozen=True, eq=False)
class Frame:
    """A sampled frame: pixel payload plus where it came from."""

    index: int
    timestamp_sec: float
    pixels: np.ndarray
    source_id: str

    def __post_init__(self):
        p = self.pixels
        if not (isinstance(p, np.ndarray) and p.ndim == 3 and p.shape[2] == 3 and p.dtype == np.uint8):
            raise ValueError(
                f"frame {self.index}: pixels must be uint8 HxWx3, "
                f"got dtype={getattr(p, 'dtype', None)} shape={getattr(p, 'shape', None)}"
            )
        if self.index < 0:
            raise ValueError(f"frame index must be >= 0, got {self.index}")


def _frames_from_directory(
    source: Path, fps: float, working_res: tuple[int, int]
) -> list[Frame]:
    width, height = working_res
    paths = sorted(
        p for p in source.iterdir() if p.suffix.lower() in IMAGE_EXTS and p.is_file()
    )
    if not paths:
        raise EmptyInputError(f"no image files found in {source}")
    frames = []
    for i, path in enumerate(paths):
        try:
            with Image.open(path) as img:
                rgb = img.convert("RGB").resize((width, height), Image.BILINEAR)
        except Exception as exc:
            raise FrameDecodeError(f"cannot decode {path}: {exc}") from exc
        frames.append(
            Frame(
                index=i,
                timestamp_sec=i / fps,
                pixels=np.asarray(rgb, dtype=np.uint8),
                source_id=str(source),
            )
        )
    return frames


def _decoder_argv(
    decoder: str, source: Path, fps: float, working_res: tuple[int, int]
) -> list[str]:
    width, height = working_res
    return [
        decoder,
        "-nostdin",
        "-hide_banner",
        "-loglevel", "error",
        "-i", str(source),
        "-vf", f"fps={fps},scale={width}:{height}",
        "-pix_fmt", "rgb24",
        "-f", "rawvideo",
        "-",
    ]


def _frames_from_video(
    source: Path, fps: float, working_res: tuple[int, int], decoder: str
) -> list[Frame]:
    if shutil.which(decoder) is None:
        raise ToolNotFoundError(
            f"decoder '{decoder}' not found on PATH; install it "
            f"(e.g. ffmpeg from https://ffmpeg.org) or pass a directory of images"
        )
    width, height = working_res
    frame_bytes = width * height * 3
    argv = _decoder_argv(decoder, source, fps, working_res)
    proc = subprocess.Popen(argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    raw_frames: list[bytes] = []
    buf = b""
    assert proc.stdout is not None
    while True:
        chunk = proc.stdout.read(frame_bytes - len(buf))
        if not chunk:
            break
        buf += chunk
        if len(buf) == frame_bytes:
            raw_frames.append(buf)
            buf = b""
    _, stderr = proc.communicate()
    if proc.returncode != 0:
        raise FrameDecodeError(
            f"decoder exited with status {proc.returncode} on {source}: "
            f"{stderr.decode(errors='replace').strip()}"
        )
    if buf:
        raise FrameDecodeError(
            f"decoder produced {len(buf)} trailing bytes on {source} "
            f"(not a multiple of the {frame_bytes}-byte frame size)"
        )
    if not raw_frames:
        raise EmptyInputError(f"decoder produced no frames from {source}")
    frames = []
    for i, payload in enumerate(raw_frames):
        pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
        frames.append(
            Frame(
                index=i,
                timestamp_sec=i / fps,
                pixels=pixels.copy(),
                source_id=str(source),
            )
        )
    return frames


def extract_frames(
    source: str | Path,
    fps: float = 1.0,
    working_res: tuple[int, int] = (224, 224),
    decoder: str = "ffmpeg",
) -> list[Frame]:
    """Sample frames from a video file or a directory of images.

    Directories yield one frame per image (lexicographic filename order)
    with synthetic timestamps index/fps. Video files are decoded at `fps`
    frames per second, rescaled to working_res.
    """
    if fps <= 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    width, height = working_res
    if width < 1 or height < 1:
        raise ValueError(f"working_res must be positive, got {working_res}")
    source = Path(source)
    if not source.exists():
        raise FileNotFoundError(f"input not found: {source}")
    if source.is_dir():
        return _frames_from_directory(source, fps, working_res)
    return _frames_from_video(source, fps, working_res, decoder)


def decoder_version(decoder: str = "ffmpeg") -> str | None:
    """First line of `<decoder> -version`, or None if unavailable."""
    if shutil.which(decoder) is None:
        return None
    try:
        out = subprocess.run(
            [decoder, "-version"], capture_output=True, timeout=10, check=False
        )
    except (OSError, subprocess.TimeoutExpired):
        return None
    first = out.stdout.decode(errors="replace").splitlines()
    return first[0].strip() if first else None


def frame_filename(rank: int, key_index: int) -> str:
    return f"key_{rank:02d}_{key_index:04d}.png"


def build_contact_sheet(images: Sequence[np.ndarray], per_row: int = 8) -> np.ndarray:
    """Tile equally sized images into one grid, row-major, black padding."""
    if not images:
        raise EmptyInputError("no frames to tile")
    h, w, _ = images[0].shape
    count = len(images)
    cols = min(per_row, count)
    rows = (count + cols - 1) // cols
    sheet = np.zeros((rows * h, cols * w, 3), dtype=np.uint8)
    for i, pixels in enumerate(images):
        r, c = divmod(i, cols)
        sheet[r * h : (r + 1) * h, c * w : (c + 1) * w] = pixels
    return sheet


def write_outputs(
    merged,
    manifest,
    out_dir: str | Path,
    contact_sheet: bool = False,
) -> list[str]:
    """Write merged PNGs plus the manifest, atomically.

    Returns the output filenames (manifest last). The manifest's
    `outputs` field is set before serialization so it lists exactly the
    files that land next to it.
    """
    out_dir = Path(out_dir)
    parent = out_dir.parent if out_dir.parent != Path("") else Path(".")
    parent.mkdir(parents=True, exist_ok=True)
    names = [frame_filename(rank, mf.key_index) for rank, mf in enumerate(merged.frames)]
    if contact_sheet:
        names.append(CONTACT_SHEET_NAME)
    manifest.outputs = list(names) + [MANIFEST_NAME]
    stage = Path(tempfile.mkdtemp(prefix=".tifre-stage-", dir=parent))
    try:
        for rank, mf in enumerate(merged.frames):
            Image.fromarray(mf.pixels).save(stage / frame_filename(rank, mf.key_index))
        if contact_sheet:
            Image.fromarray(
                build_contact_sheet([mf.pixels for mf in merged.frames])
            ).save(stage / CONTACT_SHEET_NAME)
        manifest.write(stage / MANIFEST_NAME)
        if not out_dir.exists():
            os.replace(stage, out_dir)
        else:
            for name in names:
                os.replace(stage / name, out_dir / name)
            os.replace(stage / MANIFEST_NAME, out_dir / MANIFEST_NAME)
            stage.rmdir()
    except Exception:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    return manifest.outputs
