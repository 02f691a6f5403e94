"""VAD lexicon ingestion and emotion taxonomy definitions.

The lexicon file is UTF-8 TSV, one entry per row: ``word<TAB>valence<TAB>
arousal<TAB>dominance``. An optional header row (detected by a non-numeric
second field) is skipped. Keys are lowercased; duplicate keys keep the last
occurrence. Component ranges are not validated beyond finiteness, since
different lexicon releases use different scales and only relative distances
matter downstream.

Taxonomies are JSON documents::

    { "name": str,
      "categories": [ { "label": str, "lexicon_key": str, "parent": str|null } ],
      "aliases": { surface: canonical_label, ... } }   # optional

A taxonomy is hierarchical iff every category carries a non-empty parent;
mixed presence is rejected. Multi-word labels must declare an explicit
single-token ``lexicon_key``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmocalError


class LexiconError(EmocalError):
    code = "lexicon"


class TaxonomyError(EmocalError):
    code = "taxonomy"


@dataclass(frozen=True)
class VadPoint:
    """A word's location in valence/arousal/dominance space."""

    valence: float
    arousal: float
    dominance: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.valence, self.arousal, self.dominance)


@dataclass(frozen=True)
class VadLexicon:
    entries: dict[str, VadPoint]
    source_path: str = ""
    n_duplicates: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word.strip().lower() in self.entries

    def lookup(self, word: str) -> VadPoint:
        """Exact lookup; raises KeyError for absent words (never a default)."""
        return self.entries[word.strip().lower()]

    def get(self, word: str) -> VadPoint | None:
        return self.entries.get(word.strip().lower())


@dataclass(frozen=True)
class CategoryDef:
    label: str
    lexicon_key: str
    parent: str | None = None


@dataclass(frozen=True)
class Taxonomy:
    name: str
    categories: tuple[CategoryDef, ...]
    hierarchical: bool
    aliases: dict[str, str] = field(default_factory=dict)

    def labels(self) -> list[str]:
        return [c.label for c in self.categories]

    def parent_map(self) -> dict[str, str]:
        """label -> parent for hierarchical taxonomies, empty map otherwise."""
        if not self.hierarchical:
            return {}
        return {c.label: c.parent for c in self.categories}  # type: ignore[misc]

    def __len__(self) -> int:
        return len(self.categories)


def load_lexicon(path: str | Path) -> VadLexicon:
    """Load a TSV VAD lexicon; see module docstring for the format."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LexiconError(f"cannot read lexicon file {path}: {exc}") from exc

    entries: dict[str, VadPoint] = {}
    n_duplicates = 0
    seen_data_row = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) < 4:
            # tolerate space-separated rows (hand-written fixtures)
            fields = line.split()
        if len(fields) != 4:
            raise LexiconError(f"{path}: line {lineno}: expected 4 fields, got {len(fields)}")
        word, *rest = fields
        if not seen_data_row and _looks_like_header(rest[0]):
            continue
        try:
            v, a, d = (float(x) for x in rest)
        except ValueError as exc:
            raise LexiconError(f"{path}: line {lineno}: non-numeric value in {rest!r}") from exc
        if not all(math.isfinite(x) for x in (v, a, d)):
            raise LexiconError(f"{path}: line {lineno}: non-finite value in {rest!r}")
        key = word.strip().lower()
        if not key:
            raise LexiconError(f"{path}: line {lineno}: empty word")
        if key in entries:
            n_duplicates += 1
        entries[key] = VadPoint(v, a, d)
        seen_data_row = True

    if n_duplicates:
        warnings.warn(f"{path}: {n_duplicates} duplicate lexicon keys (kept last occurrence)")
    return VadLexicon(entries=entries, source_path=str(path), n_duplicates=n_duplicates)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _looks_like_header(second_field: str) -> bool:
    # a header's second column names the valence dimension; a data row with a
    # non-numeric second field is a malformed row, not a header
    return not _is_number(second_field) and second_field.strip().lower() in (
        "valence",
        "val",
        "v",
    )


def load_taxonomy(path: str | Path) -> Taxonomy:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise TaxonomyError(f"cannot read taxonomy file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TaxonomyError(f"{path}: invalid JSON: {exc}") from exc
    return parse_taxonomy(doc, source=str(path))


def parse_taxonomy(doc: dict, source: str = "<memory>") -> Taxonomy:
    """Validate a taxonomy document and derive the hierarchical flag."""
    if not isinstance(doc, dict) or "categories" not in doc:
        raise TaxonomyError(f"{source}: taxonomy document must be an object with 'categories'")
    name = str(doc.get("name", ""))
    raw_cats = doc["categories"]
    if not isinstance(raw_cats, list) or len(raw_cats) < 2:
        raise TaxonomyError(f"{source}: taxonomy needs at least 2 categories")

    categories: list[CategoryDef] = []
    seen: set[str] = set()
    for i, c in enumerate(raw_cats):
        if not isinstance(c, dict) or "label" not in c:
            raise TaxonomyError(f"{source}: category #{i} must be an object with 'label'")
        label = str(c["label"]).strip()
        if not label:
            raise TaxonomyError(f"{source}: category #{i} has an empty label")
        folded = label.casefold()
        if folded in seen:
            raise TaxonomyError(f"{source}: duplicate label {label!r}")
        seen.add(folded)
        key = str(c.get("lexicon_key") or "").strip().lower()
        if not key:
            if len(label.split()) > 1:
                raise TaxonomyError(
                    f"{source}: multi-word label {label!r} needs an explicit lexicon_key"
                )
            key = label.lower()
        if len(key.split()) > 1:
            raise TaxonomyError(f"{source}: lexicon_key {key!r} must be a single token")
        parent = c.get("parent")
        parent = str(parent).strip() if parent not in (None, "") else None
        categories.append(CategoryDef(label=label, lexicon_key=key, parent=parent))

    with_parent = sum(1 for c in categories if c.parent is not None)
    if 0 < with_parent < len(categories):
        raise TaxonomyError(f"{source}: inconsistent hierarchy (some categories lack a parent)")
    hierarchical = with_parent == len(categories)

    aliases_doc = doc.get("aliases") or {}
    if not isinstance(aliases_doc, dict):
        raise TaxonomyError(f"{source}: 'aliases' must be an object")
    aliases = {str(k): str(v) for k, v in aliases_doc.items()}

    return Taxonomy(
        name=name, categories=tuple(categories), hierarchical=hierarchical, aliases=aliases
    )


def resolve_points(tax: Taxonomy, lex: VadLexicon) -> list[tuple[str, VadPoint]]:
    """Map every category to its VAD point, preserving taxonomy order.

    All missing lexicon keys are reported in one error.
    """
    missing = [c.lexicon_key for c in tax.categories if c.lexicon_key not in lex.entries]
    if missing:
        raise LexiconError(
            "lexicon keys not found: " + ", ".join(missing), code="missing_keys"
        )
    return [(c.label, lex.entries[c.lexicon_key]) for c in tax.categories]
