"""Report archive: JSON storage of analysis reports.

Saved reports live in the report directory (~/.statlin-access/reports/) and are
addressed by the SHA-256 of their canonical JSON, so identical runs share an ID
and files are byte-identical.

File naming convention: {kind}_{short-id}.json
Example: check_3f9a1c0d.json
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

from statlin_access import config
from statlin_access.config import ensure_dirs

REPORT_KINDS = ("check", "biaffine", "genericity")
MIN_PREFIX = 4


def canonical_json(data: Any) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def report_id(kind: str, payload: dict[str, Any]) -> str:
    """SHA-256 hex digest of the canonical envelope without its ID."""
    body = canonical_json({"kind": kind, "report": payload})
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def save_report(kind: str, payload: dict[str, Any], directory: Path | None = None) -> Path:
    """Save a report as a JSON file.

    Args:
        kind: One of ``check``, ``biaffine``, ``genericity``.
        payload: Report dictionary (``to_dict()`` output).
        directory: Target directory. Defaults to the configured report directory.

    Returns:
        Path to the saved JSON file.

    Raises:
        ValueError: If ``kind`` is unknown.
    """
    if kind not in REPORT_KINDS:
        raise ValueError(f"Unknown report kind '{kind}'. Known kinds: {', '.join(REPORT_KINDS)}")
    target_dir = directory or config.REPORT_DIR
    if directory is None:
        ensure_dirs()
    else:
        target_dir.mkdir(parents=True, exist_ok=True)
    rid = report_id(kind, payload)
    filepath = target_dir / f"{kind}_{rid[:8]}.json"
    filepath.write_text(
        canonical_json({"report_id": rid, "kind": kind, "report": payload}), encoding="utf-8"
    )
    return filepath


def load_report(prefix: str, directory: Path | None = None) -> dict[str, Any] | None:
    """Load a report envelope by ID prefix.

    Args:
        prefix: Full ID or a prefix of at least four characters.
        directory: Directory to search. Defaults to the configured report directory.

    Returns:
        The envelope ``{"report_id", "kind", "report"}``, or None if no match.

    Raises:
        ValueError: If the prefix is too short or matches several reports.
    """
    if len(prefix) < MIN_PREFIX:
        raise ValueError(f"Report ID prefix must have at least {MIN_PREFIX} characters.")
    matches = [
        (path, data)
        for path, data in _iter_reports(directory)
        if data.get("report_id", "").startswith(prefix)
    ]
    if not matches:
        return None
    if len(matches) > 1:
        names = ", ".join(p.name for p, _ in matches)
        raise ValueError(f"Ambiguous report ID '{prefix}'. Matches: {names}. Use a longer prefix.")
    return matches[0][1]


def list_reports(limit: int = 20, directory: Path | None = None) -> list[dict[str, Any]]:
    """List saved reports, newest file first.

    Args:
        limit: Maximum number of reports to return. Use 0 for no limit.
        directory: Directory to list. Defaults to the configured report directory.

    Returns:
        Dicts with ``id``, ``short_id``, ``kind``, ``summary`` and ``file`` keys.
    """
    entries = sorted(
        _iter_reports(directory), key=lambda item: (item[0].stat().st_mtime, item[0].name)
    )
    entries.reverse()
    if limit > 0:
        entries = entries[:limit]
    return [
        {
            "id": data["report_id"],
            "short_id": data["report_id"][:8],
            "kind": data.get("kind", ""),
            "summary": _summary(data.get("kind", ""), data.get("report", {})),
            "file": path.name,
        }
        for path, data in entries
    ]


def _iter_reports(directory: Path | None) -> list[tuple[Path, dict[str, Any]]]:
    target_dir = directory or config.REPORT_DIR
    if not target_dir.exists():
        return []
    found = []
    for filepath in sorted(target_dir.glob("*.json")):
        try:
            data = json.loads(filepath.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            continue
        if isinstance(data, dict) and "report_id" in data:
            found.append((filepath, data))
    return found


def _summary(kind: str, report: dict[str, Any]) -> str:
    """One-line description for the list view."""
    if kind == "check":
        return f"{report.get('condition', '?')}: {report.get('overall', '?')}"
    if kind == "biaffine":
        return str(report.get("conclusion", "?"))
    if kind == "genericity":
        return (
            f"{report.get('condition', '?')}: "
            f"{report.get('passes', '?')}/{report.get('trials', '?')} pass"
        )
    return ""
