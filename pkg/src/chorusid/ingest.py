"""Crowd-sourced archive client and dataset manifests.

Queries the recording archive's JSON API for species recordings that
carry the top quality rating and no background species, and writes the
result as a JSON-Lines manifest (one header line, then one entry per
line, stably ordered by recording id). Audio is fetched as served
(compressed); converting to WAV for the DSP stage is an external step,
and each entry records the post-conversion filename it expects.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import requests

from .errors import ArchiveSchemaChanged, NetworkError

log = logging.getLogger(__name__)

DEFAULT_API_BASE = "https://xeno-canto.org/api/2/recordings"
API_BASE_ENV_VAR = "CHORUSID_API_BASE"


@dataclass(frozen=True)
class ArchiveConfig:
    """Endpoint, pacing and response-field mapping for the archive API.

    Field names are mapped here rather than hard-coded because the
    archive's schema evolves.
    """

    base_url: str = ""
    min_request_interval_s: float = 1.0
    timeout_s: float = 30.0
    id_field: str = "id"
    genus_field: str = "gen"
    species_field: str = "sp"
    quality_field: str = "q"
    background_field: str = "also"
    file_field: str = "file"
    file_name_field: str = "file-name"
    length_field: str = "length"

    def resolved_base_url(self) -> str:
        return self.base_url or os.environ.get(API_BASE_ENV_VAR, DEFAULT_API_BASE)


@dataclass(frozen=True)
class RecordingMeta:
    recording_id: str
    species: str
    quality: str
    background_species: list[str]
    duration_s: float
    audio_url: str
    local_path: str | None = None
    sha256: str | None = None
    expected_wav: str | None = None
    fetch_error: str | None = None


@dataclass(frozen=True)
class Manifest:
    entries: tuple[RecordingMeta, ...]
    role: str  # TRAIN | TEST
    created_at: str
    query_terms: Mapping[str, object] = field(default_factory=dict)


def _parse_length(value: str) -> float:
    parts = [p for p in str(value).split(":") if p != ""]
    seconds = 0.0
    for p in parts:
        seconds = seconds * 60 + float(p)
    return seconds


class ArchiveClient:
    """Paginated, rate-limited access to the recording archive."""

    def __init__(self, config: ArchiveConfig | None = None, session=None):
        self.config = config or ArchiveConfig()
        self._session = session or requests.Session()
        self._last_request = 0.0

    def _get(self, url: str, params: Mapping[str, object]) -> dict:
        wait = self.config.min_request_interval_s - (time.monotonic() - self._last_request)
        if wait > 0:
            time.sleep(wait)
        try:
            resp = self._session.get(url, params=params, timeout=self.config.timeout_s)
            self._last_request = time.monotonic()
            resp.raise_for_status()
            return resp.json()
        except requests.RequestException as exc:
            raise NetworkError(f"archive request failed: {exc}") from exc
        except ValueError as exc:
            raise ArchiveSchemaChanged(f"non-JSON archive response: {exc}") from exc

    def iter_recordings(self, query: str) -> Iterable[dict]:
        cfg = self.config
        base = cfg.resolved_base_url()
        page = 1
        while True:
            doc = self._get(base, {"query": query, "page": page})
            if "recordings" not in doc or "numPages" not in doc:
                raise ArchiveSchemaChanged(
                    f"response missing 'recordings'/'numPages': {sorted(doc)}"
                )
            yield from doc["recordings"]
            if page >= int(doc["numPages"]):
                return
            page += 1

    def query_archive(
        self,
        species: Sequence[str],
        quality: str = "A",
        background_none: bool = True,
        role: str = "TRAIN",
        created_at: str | None = None,
    ) -> Manifest:
        """Manifest of the archive recordings matching the filters.

        An empty result is valid (logged as a warning). Entries are
        audited against the filters post-fetch, deduplicated and
        sorted by recording id so identical archive responses produce
        identical manifests.
        """
        if not species:
            raise ValueError("species list must be nonempty")
        cfg = self.config
        entries: dict[str, RecordingMeta] = {}
        for binomial in species:
            query = f"{binomial} q:{quality}"
            for rec in self.iter_recordings(query):
                try:
                    rec_id = str(rec[cfg.id_field])
                    rec_species = f"{rec[cfg.genus_field]} {rec[cfg.species_field]}"
                    rec_quality = str(rec[cfg.quality_field])
                    background = [s for s in rec.get(cfg.background_field, []) if s]
                    duration = _parse_length(rec[cfg.length_field])
                    audio_url = str(rec[cfg.file_field])
                except KeyError as exc:
                    raise ArchiveSchemaChanged(f"recording missing field {exc}") from exc
                if rec_species.lower() != binomial.lower():
                    continue
                if rec_quality != quality:
                    continue
                if background_none and background:
                    continue
                entries[rec_id] = RecordingMeta(
                    recording_id=rec_id,
                    species=rec_species,
                    quality=rec_quality,
                    background_species=background,
                    duration_s=duration,
                    audio_url=audio_url,
                )
        if not entries:
            log.warning("archive query returned no matching recordings")
        ordered = tuple(entries[k] for k in sorted(entries))
        return Manifest(
            entries=ordered,
            role=role,
            created_at=created_at or "",
            query_terms={
                "species": list(species),
                "quality": quality,
                "background": "none" if background_none else "any",
            },
        )

    def fetch_audio(self, manifest: Manifest, dest_dir: str | Path) -> Manifest:
        """Download manifest audio into ``dest_dir``.

        Files already present with a matching checksum sidecar are
        skipped without network traffic. Per-entry failures are
        recorded on the entry and do not stop the run, so a re-run
        completes only what is missing.
        """
        dest = Path(dest_dir)
        dest.mkdir(parents=True, exist_ok=True)
        updated = []
        for entry in manifest.entries:
            suffix = Path(entry.audio_url.split("?")[0]).suffix or ".mp3"
            local = dest / f"XC{entry.recording_id}{suffix}"
            sidecar = local.with_name(local.name + ".sha256")
            expected_wav = f"XC{entry.recording_id}.wav"

            if local.exists() and sidecar.exists():
                digest = hashlib.sha256(local.read_bytes()).hexdigest()
                if digest == sidecar.read_text().strip():
                    updated.append(replace(
                        entry, local_path=str(local), sha256=digest,
                        expected_wav=expected_wav, fetch_error=None,
                    ))
                    continue

            try:
                wait = self.config.min_request_interval_s - (
                    time.monotonic() - self._last_request
                )
                if wait > 0:
                    time.sleep(wait)
                resp = self._session.get(entry.audio_url, timeout=self.config.timeout_s)
                self._last_request = time.monotonic()
                resp.raise_for_status()
            except requests.RequestException as exc:
                log.warning("download failed for %s: %s", entry.recording_id, exc)
                updated.append(replace(entry, fetch_error=str(exc)))
                continue
            local.write_bytes(resp.content)
            digest = hashlib.sha256(resp.content).hexdigest()
            sidecar.write_text(digest + "\n")
            updated.append(replace(
                entry, local_path=str(local), sha256=digest,
                expected_wav=expected_wav, fetch_error=None,
            ))
        return replace(manifest, entries=tuple(updated))


def min_frames_filter(per_species_frame_counts: Mapping[str, int], threshold: int) -> list[str]:
    """Species whose selected-frame count reaches ``threshold``."""
    return sorted(s for s, n in per_species_frame_counts.items() if n >= threshold)


# --- manifest JSONL serialisation ---

def save_manifest(manifest: Manifest, path: str | Path) -> None:
    lines = [json.dumps({
        "role": manifest.role,
        "created_at": manifest.created_at,
        "query_terms": dict(manifest.query_terms),
    }, sort_keys=True)]
    lines.extend(json.dumps(asdict(e)) for e in manifest.entries)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> Manifest:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"empty manifest file: {path}")
    header = json.loads(lines[0])
    entries = tuple(RecordingMeta(**json.loads(ln)) for ln in lines[1:])
    return Manifest(
        entries=entries,
        role=header.get("role", "TRAIN"),
        created_at=header.get("created_at", ""),
        query_terms=header.get("query_terms", {}),
    )
