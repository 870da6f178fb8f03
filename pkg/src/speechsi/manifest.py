"""Dataset manifest: one row per recording tying audio, transcript, label and subject."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

COLUMNS = ("source_id", "audio_path", "transcript_path", "label", "subject_id")


def phq9_item9_label(response: str) -> int:
    """Map a PHQ-9 item-9 answer to a label: "not at all" -> 0, any other answer -> 1."""
    return 0 if response.strip().lower() == "not at all" else 1


@dataclass(frozen=True)
class ManifestRow:
    source_id: str
    audio_path: str
    transcript_path: str
    label: int
    subject_id: str


@dataclass
class DatasetManifest:
    rows: list
    root: Path = Path(".")

    def __len__(self):
        return len(self.rows)

    @property
    def labels(self) -> list[int]:
        return [r.label for r in self.rows]

    def audio_file(self, row: ManifestRow) -> Path:
        return self.root / row.audio_path

    def transcript_file(self, row: ManifestRow) -> Path:
        return self.root / row.transcript_path

    def transcripts(self) -> list[str]:
        return [self.transcript_file(r).read_text(encoding="utf-8") for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r.source_id, r.audio_path, r.transcript_path, r.label, r.subject_id])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Read and validate a manifest CSV; relative paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    missing = set(COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ManifestError(f"manifest lacks columns {sorted(missing)}")
    rows, seen = [], set()
    for lineno, rec in enumerate(reader, start=2):
        sid = rec["source_id"]
        if sid in seen:
            raise ManifestError(f"line {lineno}: duplicate source_id {sid!r}")
        seen.add(sid)
        if rec["label"] not in ("0", "1"):
            raise ManifestError(f"line {lineno}: label must be 0 or 1, got {rec['label']!r}")
        rows.append(ManifestRow(sid, rec["audio_path"], rec["transcript_path"], int(rec["label"]),
                                rec["subject_id"]))
    manifest = DatasetManifest(rows, path.parent)
    if check_files:
        for r in rows:
            for p in (manifest.audio_file(r), manifest.transcript_file(r)):
                if not p.exists():
                    raise ManifestError(f"{r.source_id}: missing file {p}")
    return manifest
