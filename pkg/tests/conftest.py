"""Shared test fixtures and stub detectors."""

from __future__ import annotations

import pytest

from mgtstack import Document


class MapDetector:
    """Deterministic detector that scores by exact text lookup.

    Unknown texts get ``default``.  Every scored text is recorded in
    ``calls`` so tests can assert exactly what the wrapper fed it.
    """

    def __init__(self, table: dict[str, float] | None = None, default: float = 0.5):
        self.table = dict(table or {})
        self.default = default
        self.calls: list[str] = []

    def score(self, text: str) -> float:
        self.calls.append(text)
        return self.table.get(text, self.default)


class MarkerDetector:
    """Score = share of whitespace tokens equal to the marker word."""

    def __init__(self, marker: str = "zz"):
        self.marker = marker

    def score(self, text: str) -> float:
        tokens = [t.strip(".!?").casefold() for t in text.split()]
        if not tokens:
            return 0.5
        return sum(1 for t in tokens if t == self.marker) / len(tokens)


def make_doc(sentences: list[str], doc_id: str = "d", label: int | None = None) -> Document:
    """Document whose sentence list is exactly ``sentences`` (joined by single
    spaces; each element must already end with a terminator)."""
    doc = Document.from_text(doc_id, " ".join(sentences), label)
    assert doc.sentence_texts() == sentences, "fixture sentences did not survive splitting"
    return doc


@pytest.fixture
def map_detector():
    return MapDetector()
