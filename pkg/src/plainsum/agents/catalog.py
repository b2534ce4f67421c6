"""Versioned prompt catalog: template files, personas and genre profiles as data."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from ..llm.gateway import canonical_json
from .types import Genre, ExpertRole, SummaryTemplate, TemplateSlot

_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")


class UnknownPersonaError(ValueError):
    pass


@dataclass(frozen=True)
class ReaderPersona:
    key: str
    name: str
    profile: str
    flag_rules: str
    alias: str = ""
    core: bool = False

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "alias": self.alias,
            "name": self.name,
            "core": self.core,
            "profile": self.profile,
            "flag_rules": self.flag_rules,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReaderPersona":
        return cls(
            key=data["key"],
            name=data["name"],
            profile=data["profile"],
            flag_rules=data["flag_rules"],
            alias=data.get("alias", ""),
            core=bool(data.get("core", False)),
        )


class PersonaRegistry:
    """Name lookup for reader personas; extensions are added with ``register``."""

    def __init__(self, personas: Iterable[ReaderPersona] = ()):
        self._by_key: dict[str, ReaderPersona] = {}
        for p in personas:
            self.register(p)

    def register(self, persona: ReaderPersona, *, replace_existing: bool = False) -> None:
        names = {persona.key.casefold()} | ({persona.alias.casefold()} if persona.alias else set())
        for existing in self._by_key.values():
            if existing.key == persona.key and replace_existing:
                continue
            taken = {existing.key.casefold(), existing.alias.casefold()} - {""}
            if names & taken:
                raise ValueError(f"persona name clash: {persona.key!r}")
        self._by_key[persona.key] = persona

    def get(self, name: str) -> ReaderPersona:
        needle = name.strip().casefold()
        for p in self._by_key.values():
            if needle in (p.key.casefold(), p.alias.casefold()):
                return p
        raise UnknownPersonaError(f"unknown persona {name!r}; known: {', '.join(self.keys)}")

    def resolve(self, names: Iterable[str]) -> tuple[ReaderPersona, ...]:
        """Map names or aliases to personas, keeping order and rejecting duplicates."""
        out: list[ReaderPersona] = []
        for n in names:
            p = self.get(n)
            if p in out:
                raise ValueError(f"persona {p.key!r} listed twice")
            out.append(p)
        if not out:
            raise ValueError("at least one persona is required")
        return tuple(out)

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(self._by_key)

    @property
    def core(self) -> tuple[ReaderPersona, ...]:
        return tuple(p for p in self._by_key.values() if p.core)

    def __contains__(self, name: str) -> bool:
        try:
            self.get(name)
        except UnknownPersonaError:
            return False
        return True


@dataclass(frozen=True)
class GenreProfile:
    template: SummaryTemplate
    expert: ExpertRole
    expert_title: str
    genre_plural: str
    domain_phrase: str
    role_description: str
    guidelines: str
    min_sentences: int
    max_sentences: int

    def slot_block(self) -> str:
        lines = []
        for s in self.template.slots:
            lo, hi = s.sentences
            span = f"{lo} sentence" if lo == hi == 1 else f"{lo}-{hi} sentences"
            lines.append(f"- {s.label} ({span}): {s.guidance}")
        return "\n".join(lines)


def _file_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class PromptCatalog:
    version: str
    templates: Mapping[str, str]
    roles: Mapping[str, str]
    personas: tuple[ReaderPersona, ...]
    genres: Mapping[Genre, GenreProfile]
    few_shot: Mapping[Genre, tuple[str, ...]] = field(default_factory=dict)
    file_digests: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "PromptCatalog":
        root = Path(directory) if directory is not None else resources.files("plainsum").joinpath("prompts")
        manifest_bytes = root.joinpath("manifest.json").read_bytes()
        manifest = json.loads(manifest_bytes)
        digests = {"manifest.json": _file_digest(manifest_bytes)}
        templates: dict[str, str] = {}
        roles: dict[str, str] = {}
        for name, entry in sorted(manifest["prompts"].items()):
            raw = root.joinpath(entry["file"]).read_bytes()
            digests[entry["file"]] = _file_digest(raw)
            templates[name] = raw.decode("utf-8").rstrip("\n")
            roles[name] = entry["role"]
        data_files = manifest["data"]
        persona_bytes = root.joinpath(data_files["personas"]).read_bytes()
        genre_bytes = root.joinpath(data_files["templates"]).read_bytes()
        digests[data_files["personas"]] = _file_digest(persona_bytes)
        digests[data_files["templates"]] = _file_digest(genre_bytes)
        personas = tuple(ReaderPersona.from_dict(p) for p in json.loads(persona_bytes)["personas"])
        genres = {}
        for label, entry in json.loads(genre_bytes).items():
            genre = Genre.parse(label)
            slots = tuple(TemplateSlot(s["label"], s["guidance"], tuple(s["sentences"])) for s in entry["slots"])
            genres[genre] = GenreProfile(
                template=SummaryTemplate(genre, slots),
                expert=ExpertRole.parse(entry["expert"]),
                expert_title=entry["expert_title"],
                genre_plural=entry["genre_plural"],
                domain_phrase=entry["domain_phrase"],
                role_description=entry["role_description"],
                guidelines=entry["guidelines"],
                min_sentences=int(entry["min_sentences"]),
                max_sentences=int(entry["max_sentences"]),
            )
        missing = set(Genre) - set(genres)
        if missing:
            raise ValueError(f"catalog lacks templates for {sorted(g.value for g in missing)}")
        return cls(
            version=str(manifest["version"]),
            templates=templates,
            roles=roles,
            personas=personas,
            genres=genres,
            file_digests=digests,
        )

    def with_few_shot(self, examples: Mapping[Genre | str, Iterable[str]]) -> "PromptCatalog":
        parsed = {Genre.parse(g) if isinstance(g, str) else g: tuple(v) for g, v in examples.items()}
        return replace(self, few_shot=parsed)

    @property
    def hash(self) -> str:
        payload = {
            "version": self.version,
            "files": dict(sorted(self.file_digests.items())),
            "few_shot": {g.value: list(v) for g, v in sorted(self.few_shot.items(), key=lambda kv: kv[0].value)},
        }
        return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()

    def registry(self) -> PersonaRegistry:
        return PersonaRegistry(self.personas)

    def render(self, name: str, **values: object) -> str:
        """Fill ``{{placeholder}}`` slots; every placeholder must be supplied."""
        template = self.templates[name]

        def sub(m: re.Match) -> str:
            key = m.group(1)
            if key not in values:
                raise KeyError(f"prompt {name!r} needs a value for {{{{{key}}}}}")
            return str(values[key])

        return _PLACEHOLDER.sub(sub, template)

    def placeholders(self, name: str) -> set[str]:
        return set(_PLACEHOLDER.findall(self.templates[name]))


def load_few_shot(path: str | Path) -> dict[Genre, tuple[str, ...]]:
    """Read ``{"<genre label>": ["example", ...]}`` from a JSON file."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object of genre -> examples")
    out = {}
    for label, examples in data.items():
        if not isinstance(examples, list) or not all(isinstance(e, str) for e in examples):
            raise ValueError(f"{path}: examples for {label!r} must be a list of strings")
        out[Genre.parse(label)] = tuple(examples)
    return out
