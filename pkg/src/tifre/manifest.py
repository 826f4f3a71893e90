"""Machine-readable record of one reduction run.

The manifest is the single artifact downstream consumers parse: which
prompts were used, how frames scored, which were selected, how the rest
were folded in, and what files were written. Everything in it is
JSON-native so `from_dict(to_dict(m)) == m` holds exactly. Timings are
the only field expected to differ between otherwise identical runs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1
SCHEMA_FILENAME = "manifest.schema.json"


@dataclass(eq=True)
class RunManifest:
    """Full record of one run; field values are plain JSON types."""

    question: str
    strategy: str
    backend: dict
    coarse_fps: float
    working_res: list
    num_frames: int
    max_frames: int
    threshold: float
    merge_mode: str
    saliency: list
    key_indices: list
    assignments: list
    prompts: list | None = None
    prompt_source: str | None = None
    outputs: list = field(default_factory=list)
    tool_versions: dict = field(default_factory=dict)
    timings_sec: dict = field(default_factory=dict)
    seed: int = 0
    source_id: str = ""
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported manifest schema_version {version!r}; "
                f"this build reads version {SCHEMA_VERSION}"
            )
        return cls(**data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def schema_path() -> Path:
    """Path of the bundled JSON schema the manifest validates against."""
    return Path(__file__).with_name(SCHEMA_FILENAME)
