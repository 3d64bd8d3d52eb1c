"""Domain types shared across the package.

Everything here is an immutable value object. Option indices are 0-based;
letters only appear at the prompt/parse boundary (see :func:`option_letter`).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

OPTION_LETTERS = "ABCDEFGHIJ"
ROSTER_SIZES = (1, 3, 6, 10)
WORKFLOW_ROLES = ("solver", "critic", "coordinator")


class ExpertGroup(str, Enum):
    MATH = "Math"
    FINANCE = "Finance"
    MEDICAL = "Medical"
    LAW = "Law"

    @classmethod
    def parse(cls, value: str | ExpertGroup) -> ExpertGroup:
        if isinstance(value, cls):
            return value
        key = str(value).strip().casefold()
        try:
            return _GROUP_ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown expert group {value!r}") from None

    @property
    def slug(self) -> str:
        return self.value.lower()


# Table headers abbreviate the groups ("Fina", "Med").
_GROUP_ALIASES = {
    "math": ExpertGroup.MATH,
    "finance": ExpertGroup.FINANCE,
    "fina": ExpertGroup.FINANCE,
    "medical": ExpertGroup.MEDICAL,
    "med": ExpertGroup.MEDICAL,
    "law": ExpertGroup.LAW,
}


class Paradigm(str, Enum):
    DIVERSITY = "diversity"
    WORKFLOW = "workflow"

    @classmethod
    def parse(cls, value: str | Paradigm) -> Paradigm:
        if isinstance(value, cls):
            return value
        key = "".join(ch for ch in str(value).casefold() if ch.isalnum())
        if key in ("diversity", "diversitydriven"):
            return cls.DIVERSITY
        if key in ("workflow", "structuredworkflow", "structured"):
            return cls.WORKFLOW
        raise ValueError(f"unknown paradigm {value!r}")

    @property
    def display(self) -> str:
        return "Diversity-Driven" if self is Paradigm.DIVERSITY else "Structured Workflow"


class ReasoningType(str, Enum):
    MATHEMATICAL = "Mathematical"
    FACTUAL_RECALL = "FactualRecall"
    CONTEXTUAL = "Contextual"


class TaskDomain(str, Enum):
    MATH = "Math"
    BUSINESS = "Business"
    HEALTH = "Health"
    LAW = "Law"

    @classmethod
    def parse(cls, value: str | TaskDomain) -> TaskDomain:
        if isinstance(value, cls):
            return value
        key = str(value).strip().casefold()
        for member in cls:
            if member.value.casefold() == key:
                return member
        raise ValueError(f"unknown task domain {value!r}")

    @property
    def reasoning_type(self) -> ReasoningType:
        if self in (TaskDomain.MATH, TaskDomain.BUSINESS):
            return ReasoningType.MATHEMATICAL
        return ReasoningType.CONTEXTUAL


# Domain-aligned expert group for each task domain.
DEFAULT_ALIGNMENT = {
    TaskDomain.MATH: ExpertGroup.MATH,
    TaskDomain.BUSINESS: ExpertGroup.FINANCE,
    TaskDomain.HEALTH: ExpertGroup.MEDICAL,
    TaskDomain.LAW: ExpertGroup.LAW,
}


def option_letter(index: int) -> str:
    if not 0 <= index < len(OPTION_LETTERS):
        raise ValueError(f"option index {index} outside 0..{len(OPTION_LETTERS) - 1}")
    return OPTION_LETTERS[index]


def canonical_json(data: Any) -> str:
    """Stable encoding used for hashing and for the on-disk logs."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_hash(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ExpertSpec:
    expert_group: ExpertGroup
    formal_role: str
    responsibility: str
    index: int
    paradigm: Paradigm

    def __post_init__(self):
        object.__setattr__(self, "expert_group", ExpertGroup.parse(self.expert_group))
        object.__setattr__(self, "paradigm", Paradigm.parse(self.paradigm))

    def to_dict(self) -> dict:
        return {
            "expert_group": self.expert_group.value,
            "formal_role": self.formal_role,
            "responsibility": self.responsibility,
            "index": self.index,
            "paradigm": self.paradigm.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ExpertSpec:
        return cls(
            expert_group=data["expert_group"],
            formal_role=data["formal_role"],
            responsibility=data["responsibility"],
            index=int(data["index"]),
            paradigm=data["paradigm"],
        )


@dataclass(frozen=True)
class AgentRoster:
    """An ordered group of experts.

    Construction does not enforce the roster invariants so that
    :func:`validate_roster` can report every problem at once.
    """

    domain_tag: ExpertGroup
    paradigm: Paradigm
    size: int
    experts: tuple[ExpertSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain_tag", ExpertGroup.parse(self.domain_tag))
        object.__setattr__(self, "paradigm", Paradigm.parse(self.paradigm))
        object.__setattr__(self, "experts", tuple(self.experts))

    def to_dict(self) -> dict:
        """Role-file layout; group and paradigm are stored once per roster."""
        return {
            "expert_group": self.domain_tag.value,
            "paradigm": self.paradigm.value,
            "size": self.size,
            "experts": [
                {"formal_role": e.formal_role, "responsibility": e.responsibility, "index": e.index}
                for e in self.experts
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> AgentRoster:
        group = ExpertGroup.parse(data["expert_group"])
        paradigm = Paradigm.parse(data["paradigm"])
        experts = tuple(
            ExpertSpec(
                expert_group=e.get("expert_group", group),
                formal_role=e["formal_role"],
                responsibility=e["responsibility"],
                index=int(e["index"]),
                paradigm=e.get("paradigm", paradigm),
            )
            for e in data["experts"]
        )
        return cls(domain_tag=group, paradigm=paradigm, size=int(data["size"]), experts=experts)

    @property
    def fingerprint(self) -> str:
        return content_hash(self.to_dict())


def validate_roster(roster: AgentRoster) -> list[str]:
    """Return every invariant violation; an empty list means the roster is valid."""
    problems = []
    if roster.size not in ROSTER_SIZES:
        problems.append(f"size {roster.size} not in {ROSTER_SIZES}")
    if len(roster.experts) != roster.size:
        problems.append(f"length mismatch: size {roster.size} but {len(roster.experts)} experts")
    seen = set()
    for pos, expert in enumerate(roster.experts):
        if not expert.formal_role.strip():
            problems.append(f"expert {pos}: empty formal_role")
        if not expert.responsibility.strip():
            problems.append(f"expert {pos}: empty responsibility")
        if expert.index < 0:
            problems.append(f"expert {pos}: negative index {expert.index}")
        if expert.paradigm is not roster.paradigm:
            problems.append(f"expert {pos}: paradigm mismatch ({expert.paradigm.value})")
        if expert.expert_group is not roster.domain_tag:
            problems.append(f"expert {pos}: expert group mismatch ({expert.expert_group.value})")
        key = (expert.formal_role.strip().casefold(), expert.index)
        if key in seen:
            problems.append(f"expert {pos}: duplicate (formal_role, index) {expert.formal_role!r}/{expert.index}")
        seen.add(key)
    if roster.paradigm is Paradigm.WORKFLOW and roster.size == 3:
        roles = sorted(e.formal_role.strip().casefold() for e in roster.experts)
        for required in WORKFLOW_ROLES:
            if required not in roles:
                problems.append(f"required role absent: {required}")
    return problems


@dataclass(frozen=True)
class TaskInstance:
    instance_id: str
    domain: TaskDomain
    question: str
    options: tuple[str, ...]
    gold_index: int

    def __post_init__(self):
        object.__setattr__(self, "domain", TaskDomain.parse(self.domain))
        object.__setattr__(self, "options", tuple(self.options))
        if not str(self.instance_id):
            raise ValueError("instance_id is empty")
        if not self.question.strip():
            raise ValueError("question is empty")
        if not 2 <= len(self.options) <= len(OPTION_LETTERS):
            raise ValueError(f"expected 2..{len(OPTION_LETTERS)} options, got {len(self.options)}")
        if isinstance(self.gold_index, bool) or not isinstance(self.gold_index, int):
            raise ValueError(f"gold_index must be an integer, got {self.gold_index!r}")
        if not 0 <= self.gold_index < len(self.options):
            raise ValueError(f"gold_index {self.gold_index} out of range for {len(self.options)} options")

    @property
    def reasoning_type(self) -> ReasoningType:
        return self.domain.reasoning_type

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "domain": self.domain.value,
            "question": self.question,
            "options": list(self.options),
            "gold_index": self.gold_index,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TaskInstance:
        return cls(
            instance_id=data["instance_id"],
            domain=data["domain"],
            question=data["question"],
            options=data["options"],
            gold_index=data["gold_index"],
        )


@dataclass(frozen=True)
class AgentTurn:
    agent_index: int
    formal_role: str
    full_output: str
    final_answer: int | None
    reasoning_tokens: int = 0
    answer_tokens: int = 0

    @property
    def total_tokens(self) -> int:
        return self.reasoning_tokens + self.answer_tokens

    @property
    def answer_letter(self) -> str:
        return "UNPARSED" if self.final_answer is None else option_letter(self.final_answer)

    def to_dict(self) -> dict:
        return {
            "agent_index": self.agent_index,
            "formal_role": self.formal_role,
            "full_output": self.full_output,
            "final_answer": self.final_answer,
            "reasoning_tokens": self.reasoning_tokens,
            "answer_tokens": self.answer_tokens,
        }

    @classmethod
    def from_dict(cls, data: dict) -> AgentTurn:
        return cls(**{k: data[k] for k in (
            "agent_index", "formal_role", "full_output", "final_answer",
            "reasoning_tokens", "answer_tokens")})


@dataclass(frozen=True)
class CollaborationResult:
    instance_id: str
    roster_fingerprint: str
    turns: tuple[AgentTurn, ...]
    system_answer: int | None
    correct: bool
    wall_time_ms: int = 0
    error: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def total_tokens(self) -> int:
        return sum(t.total_tokens for t in self.turns)

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "roster_fingerprint": self.roster_fingerprint,
            "turns": [t.to_dict() for t in self.turns],
            "system_answer": self.system_answer,
            "correct": self.correct,
            "wall_time_ms": self.wall_time_ms,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> CollaborationResult:
        return cls(
            instance_id=data["instance_id"],
            roster_fingerprint=data["roster_fingerprint"],
            turns=tuple(AgentTurn.from_dict(t) for t in data["turns"]),
            system_answer=data["system_answer"],
            correct=data["correct"],
            wall_time_ms=data.get("wall_time_ms", 0),
            error=data.get("error"),
        )


def encode(obj) -> str:
    return canonical_json(obj.to_dict())


def decode(cls, text: str):
    return cls.from_dict(json.loads(text))


__all__ = [
    "AgentRoster",
    "AgentTurn",
    "CollaborationResult",
    "DEFAULT_ALIGNMENT",
    "ExpertGroup",
    "ExpertSpec",
    "OPTION_LETTERS",
    "Paradigm",
    "ReasoningType",
    "TaskDomain",
    "TaskInstance",
    "canonical_json",
    "content_hash",
    "decode",
    "encode",
    "option_letter",
    "validate_roster",
]
