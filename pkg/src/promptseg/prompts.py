"""Prompt vocabularies for the detector and the image-text scorer.

A prompt file is YAML (JSON is accepted too, being a YAML subset)::

    classes:
      - id: 1
        name: building
        synonyms: [Roof, The roof of a building, House]
      - id: 2
        name: lake
    unrelated: [ground, grass]

``synonyms`` defaults to ``[name]`` when omitted. ``template`` may be given
at the top level to override :data:`DEFAULT_TEMPLATE`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

DEFAULT_TEMPLATE = "The satellite view of {name}"


@dataclass(frozen=True)
class ClassSpec:
    class_id: int
    canonical_name: str
    synonyms: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "synonyms", tuple(self.synonyms))
        if self.class_id < 1:
            raise ValueError("class_id must be >= 1")
        if not self.canonical_name.strip():
            raise ValueError("canonical_name must be non-empty")
        if not self.synonyms or not all(s.strip() for s in self.synonyms):
            raise ValueError(f"class {self.canonical_name!r} needs non-empty synonyms")


@dataclass(frozen=True)
class PromptSet:
    classes: tuple[ClassSpec, ...]
    unrelated: tuple[str, ...] = ()
    template: str = DEFAULT_TEMPLATE
    _lookup: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "unrelated", tuple(self.unrelated))
        if not self.classes:
            raise ValueError("a PromptSet needs at least one class")
        ids = [c.class_id for c in self.classes]
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise ValueError(f"class ids must be unique and contiguous from 1: {ids}")
        if "{name}" not in self.template:
            raise ValueError("template must contain a '{name}' placeholder")

        lookup: dict[str, int] = {}
        for c in self.classes:
            # canonical names resolve even when not listed among the synonyms
            for text in (*c.synonyms, c.canonical_name):
                key = text.strip().lower()
                owner = lookup.setdefault(key, c.class_id)
                if owner != c.class_id:
                    raise ValueError(
                        f"synonym {text!r} is claimed by classes {owner} and {c.class_id}"
                    )
        for text in self.unrelated:
            if text.strip().lower() in lookup:
                raise ValueError(f"unrelated prompt {text!r} collides with a class synonym")
        object.__setattr__(self, "_lookup", lookup)

    @property
    def class_number(self) -> int:
        return len(self.classes)

    def by_id(self, class_id: int) -> ClassSpec:
        for c in self.classes:
            if c.class_id == class_id:
                return c
        raise KeyError(class_id)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PromptSet:
        specs = []
        for i, entry in enumerate(data.get("classes") or [], start=1):
            name = entry["name"]
            specs.append(
                ClassSpec(
                    class_id=int(entry.get("id", i)),
                    canonical_name=name,
                    synonyms=tuple(entry.get("synonyms") or [name]),
                )
            )
        specs.sort(key=lambda c: c.class_id)
        kwargs = {}
        if "template" in data:
            kwargs["template"] = data["template"]
        return cls(tuple(specs), tuple(data.get("unrelated") or ()), **kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "classes": [
                {"id": c.class_id, "name": c.canonical_name, "synonyms": list(c.synonyms)}
                for c in self.classes
            ],
            "unrelated": list(self.unrelated),
            "template": self.template,
        }


def load_prompt_file(path: str | Path) -> PromptSet:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping with 'classes' and 'unrelated'")
    return PromptSet.from_dict(data)


def detector_vocabulary(ps: PromptSet) -> list[tuple[str, int]]:
    """Flatten the synonym lists into ``(text, class_id)`` pairs, class order first."""
    return [(s, c.class_id) for c in ps.classes for s in c.synonyms]


def canonicalize(raw_label: str, ps: PromptSet) -> int | None:
    return ps._lookup.get(raw_label.strip().lower())


def scorer_candidates(
    ps: PromptSet, template: str | None = None
) -> list[tuple[str, int | None]]:
    """Templated class prompts followed by the untemplated unrelated prompts."""
    template = template or ps.template
    related = [(template.format(name=c.canonical_name), c.class_id) for c in ps.classes]
    return related + [(u, None) for u in ps.unrelated]
