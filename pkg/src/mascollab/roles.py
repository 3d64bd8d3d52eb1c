"""Expert rosters: prompt templates, generation, augmentation and storage."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

from .backends import ChatBackend, ChatRequest, complete_with_retry
from .core import (
    AgentRoster,
    ExpertGroup,
    ExpertSpec,
    Paradigm,
    TaskInstance,
    option_letter,
    validate_roster,
)

if TYPE_CHECKING:
    from .protocol import VisibleHistory


class Provenance(str, Enum):
    SHIPPED = "shipped"
    GENERATED = "generated"
    AUGMENTED = "augmented"


class RoleError(ValueError):
    pass


class RoleParseError(RoleError):
    pass


class MissingRosterError(KeyError):
    pass


# -- agent prompts -------------------------------------------------------------

SYSTEM_TEMPLATE = """\
[ROLE ASSIGNMENT]
You are a {title} specializing in {domain}.
Your professional responsibility is to {duty}.
IMPORTANT: Think and respond EXACTLY as a real {title} in {domain} would.
Use terminology, methods, and perspectives specific to your professional field."""

USER_TEMPLATE = """\
Previous discussion:    {message_hist}
PROBLEM TO SOLVE: {problem}
RESPONSE INSTRUCTIONS:
1. Begin with: "As a {title} in {domain}, I..."
2. Analyze the problem using your professional expertise
3. Provide your expert recommendation
4. End with: "My answer is \\boxed{{X}}" where X is the answer index

REQUIREMENTS:
- Maintain your {title} perspective throughout
- Use terminology from {domain}
- Keep response under 150 words
- Your answer MUST be in \\boxed{{}} format

Remember: You are a {title}, not an AI assistant. Think and respond accordingly."""

EMPTY_HISTORY = "(none)"
PLACEHOLDERS = ("{title}", "{domain}", "{duty}", "{message_hist}", "{problem}", "{Domain}",
                "{System Size}", "{Group Description of Size 3}")


def render_history(history: VisibleHistory) -> str:
    if history.empty:
        return EMPTY_HISTORY
    lines = [f"Agent {index} ({role}): {letter}" for index, role, letter in history.earlier_finals]
    predecessor = len(history.earlier_finals) + 1
    lines.append(f"Agent {predecessor} ({history.predecessor_role}) full response:")
    lines.append(history.predecessor_full)
    return "\n" + "\n".join(lines)


def render_problem(instance: TaskInstance) -> str:
    options = "\n".join(f"{option_letter(i)}. {text}" for i, text in enumerate(instance.options))
    return f"{instance.question}\nOptions:\n{options}"


def render_agent_prompts(expert: ExpertSpec, instance: TaskInstance, history: VisibleHistory) -> tuple[str, str]:
    title, domain = expert.formal_role, expert.expert_group.value
    system = SYSTEM_TEMPLATE.format(title=title, domain=domain, duty=expert.responsibility)
    user = USER_TEMPLATE.format(
        title=title, domain=domain, message_hist=render_history(history), problem=render_problem(instance)
    )
    return system, user


# -- generation and augmentation prompts -----------------------------------------

GENERATION_TEMPLATES = {
    Paradigm.WORKFLOW: (
        "Generate me an expert group in {Domain} domain of size three, assigning them roles of "
        "solver, critic and coordinator together with their detailed responsibilities."
    ),
    Paradigm.DIVERSITY: (
        "Generate an expert group of size 3 in the {Domain} domain, each specializing in a distinct "
        "sub-domain of {Domain}. Provide a detailed configuration for each expert, including their "
        "role and responsibility, ensuring that their roles are complementary and collectively form "
        "a balanced, high-functioning team capable of addressing complex challenges in the domain.\n"
        "For example, an expert in a sub-domain of business could be \"Global Compliance Architect\"."
    ),
}

AUGMENTATION_TEMPLATES = {
    Paradigm.WORKFLOW: (
        "Here is a expert group configuration in {Domain} domain of size 3: {Group Description of Size 3}.\n"
        "Please augment the group size to {System Size} by assigning new experts with roles of solver, "
        "critic, strategist and coordinator.\n"
        "Output your configuration following the format of the given group configuration."
    ),
    Paradigm.DIVERSITY: (
        "Here is a expert group configuration in {Domain} domain of size 3: {Group Description of Size 3}.\n"
        "Please augment the group size to {System Size} by assigning new experts with roles of expert in "
        "other sub-domains in {Domain} together with their responsibilities.\n"
        "Output your configuration following the format of the given group configuration."
    ),
}

GENERATION_SYSTEM_PROMPT = "You are a helpful assistant that designs expert teams."


def _fill(template: str, values: dict[str, str]) -> str:
    # The templates use multi-word placeholder names, so str.format is out.
    for key, value in values.items():
        template = template.replace("{" + key + "}", value)
    return template


def render_generation_prompt(group: ExpertGroup | str, paradigm: Paradigm | str, size: int = 3) -> str:
    if size != 3:
        raise RoleError(f"primary generation is defined for size 3 only, got {size}")
    group, paradigm = ExpertGroup.parse(group), Paradigm.parse(paradigm)
    return _fill(GENERATION_TEMPLATES[paradigm], {"Domain": group.value})


def render_augmentation_prompt(base: AgentRoster, target_size: int) -> str:
    if base.size != 3:
        raise RoleError(f"augmentation starts from a size-3 roster, got size {base.size}")
    if target_size <= 3:
        raise RoleError(f"target size must exceed 3, got {target_size}")
    return _fill(
        AUGMENTATION_TEMPLATES[base.paradigm],
        {
            "Domain": base.domain_tag.value,
            "System Size": str(target_size),
            "Group Description of Size 3": "\n\n" + serialize_roster_text(base) + "\n",
        },
    )


# -- roster text format ----------------------------------------------------------

_ROMAN = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X"]


def serialize_roster_text(roster: AgentRoster) -> str:
    """Render a roster as a numbered role listing (the generation output format)."""
    blocks = [
        f"{_ROMAN[pos] if pos < len(_ROMAN) else pos + 1}. {e.formal_role}\nResponsibilities:\n{e.responsibility}"
        for pos, e in enumerate(roster.experts)
    ]
    return "\n\n".join(blocks)


_HEADER = re.compile(
    r"^(?:[IVX]+|\d+)\s*[.):]\s*(?:(?:expert|role|agent)\s*\d*\s*[:\-\u2013\u2014]\s*)?(?P<title>\S.*?)\s*:?$",
    re.IGNORECASE,
)
_KEYED_TITLE = re.compile(r"^(?:formal\s+)?(?:role|title|name)\s*:\s*(?P<title>\S.*)$", re.IGNORECASE)
_LABEL = re.compile(r"^responsibilit(?:y|ies)\s*:?\s*(?P<rest>.*)$", re.IGNORECASE)
_LIST_ITEM = re.compile(r"^(?:\d+\s*[.)]|[-*•])")


def _clean(line: str) -> str:
    line = line.strip().lstrip("#").strip()
    line = re.sub(r"(\*\*|__)", "", line)
    return line.strip()


def _json_entries(text: str) -> list[tuple[str, str]] | None:
    body = re.sub(r"^```(?:json)?\s*|\s*```$", "", text.strip())
    try:
        data = json.loads(body)
    except ValueError:
        return None
    if isinstance(data, dict):
        data = data.get("experts")
    if not isinstance(data, list):
        return None
    entries = []
    for item in data:
        if not isinstance(item, dict):
            return None
        title = item.get("formal_role") or item.get("role") or item.get("title") or ""
        duty = item.get("responsibility", item.get("responsibilities", ""))
        if isinstance(duty, list):
            duty = "\n".join(str(d) for d in duty)
        entries.append((str(title).strip(), str(duty).strip()))
    return entries


def parse_role_entries(text: str) -> list[tuple[str, str]]:
    """Extract ``(formal_role, responsibility)`` pairs from a role listing.

    Accepts a JSON list of role objects, or text where each role is a numbered
    heading (roman or arabic) or a ``Role:`` line, followed by a
    ``Responsibilities:`` label and the responsibility text.
    """
    entries = _json_entries(text)
    if entries is not None:
        return entries

    lines = text.splitlines()
    cleaned = [_clean(line) for line in lines]

    def next_nonblank(i):
        for j in range(i + 1, len(cleaned)):
            if cleaned[j]:
                return j
        return None

    headers = {}
    for i, line in enumerate(cleaned):
        keyed = _KEYED_TITLE.match(line)
        if keyed:
            headers[i] = keyed.group("title").strip()
            continue
        numbered = _HEADER.match(line)
        j = next_nonblank(i)
        if numbered and j is not None and _LABEL.match(cleaned[j]):
            headers[i] = numbered.group("title").strip()

    entries = []
    starts = sorted(headers)
    for k, start in enumerate(starts):
        stop = starts[k + 1] if k + 1 < len(starts) else len(lines)
        body: list[str] = []
        seen_label = False
        i = start + 1
        while i < stop:
            raw, line = lines[i].strip(), cleaned[i]
            if not seen_label and _LABEL.match(line):
                seen_label = True
                rest = _LABEL.match(line).group("rest").strip()
                if rest:
                    body.append(rest)
            elif not line:
                # A blank line ends the body unless a list continues after it.
                j = next_nonblank(i)
                if body and (j is None or j >= stop or not _LIST_ITEM.match(cleaned[j])):
                    break
            elif seen_label or body:
                body.append(raw)
            i += 1
        entries.append((headers[start], "\n".join(body).strip()))
    return entries


def _build_roster(group, paradigm, entries: list[tuple[str, str]]) -> AgentRoster:
    group, paradigm = ExpertGroup.parse(group), Paradigm.parse(paradigm)
    for title, duty in entries:
        if not title:
            raise RoleParseError("role with empty title")
        if not duty:
            raise RoleParseError(f"role {title!r} has an empty responsibility")
    experts = tuple(
        ExpertSpec(expert_group=group, formal_role=title, responsibility=duty, index=i, paradigm=paradigm)
        for i, (title, duty) in enumerate(entries)
    )
    roster = AgentRoster(domain_tag=group, paradigm=paradigm, size=len(experts), experts=experts)
    problems = validate_roster(roster)
    if problems:
        raise RoleError("; ".join(problems))
    return roster


def parse_generated_roster(llm_output: str, group, paradigm, target_size: int) -> AgentRoster:
    entries = parse_role_entries(llm_output)
    if len(entries) != target_size:
        raise RoleParseError(f"expected {target_size} roles, found {len(entries)}")
    return _build_roster(group, paradigm, entries)


def merge_augmentation(base: AgentRoster, llm_output: str, target_size: int) -> AgentRoster:
    """Append the newly generated experts to ``base``.

    The model may answer with only the new experts or with the full group; in
    the latter case its first three roles must be the base roles, and the base
    experts are kept verbatim.
    """
    if base.size != 3:
        raise RoleError(f"augmentation starts from a size-3 roster, got size {base.size}")
    entries = parse_role_entries(llm_output)
    extra = target_size - base.size
    if len(entries) == target_size:
        head = [title.casefold() for title, _ in entries[:3]]
        if head != [e.formal_role.casefold() for e in base.experts]:
            raise RoleParseError("augmented listing does not start with the base roster's roles")
        entries = entries[3:]
    elif len(entries) != extra:
        raise RoleParseError(f"expected {extra} new roles (or {target_size} in total), found {len(entries)}")
    base_entries = [(e.formal_role, e.responsibility) for e in base.experts]
    return _build_roster(base.domain_tag, base.paradigm, base_entries + entries)


def generate_roster(group, paradigm, backend: ChatBackend, *, size: int = 3, max_tokens: int = 2048,
                    temperature: float = 0.6) -> AgentRoster:
    group, paradigm = ExpertGroup.parse(group), Paradigm.parse(paradigm)
    request = ChatRequest(
        system_prompt=GENERATION_SYSTEM_PROMPT,
        user_prompt=render_generation_prompt(group, paradigm, size),
        max_tokens=max_tokens,
        temperature=temperature,
        tags={"instance_id": f"roles/{group.slug}/{paradigm.value}/{size}", "agent_index": 0},
    )
    response = complete_with_retry(backend, request)
    return parse_generated_roster(response.full_text, group, paradigm, size)


def augment_roster(base: AgentRoster, target_size: int, backend: ChatBackend, *, max_tokens: int = 4096,
                   temperature: float = 0.6) -> AgentRoster:
    request = ChatRequest(
        system_prompt=GENERATION_SYSTEM_PROMPT,
        user_prompt=render_augmentation_prompt(base, target_size),
        max_tokens=max_tokens,
        temperature=temperature,
        tags={
            "instance_id": f"roles/{base.domain_tag.slug}/{base.paradigm.value}/{target_size}",
            "agent_index": 0,
        },
    )
    response = complete_with_retry(backend, request)
    return merge_augmentation(base, response.full_text, target_size)


# -- role files and the library --------------------------------------------------

def role_filename(group, paradigm, size: int) -> str:
    return f"{ExpertGroup.parse(group).slug}_{Paradigm.parse(paradigm).value}_{size}.json"


def dump_role_file(roster: AgentRoster, provenance: Provenance) -> str:
    doc = roster.to_dict()
    doc["provenance"] = Provenance(provenance).value
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def load_role_file(path: str | Path) -> tuple[AgentRoster, Provenance]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    roster = AgentRoster.from_dict(data)
    return roster, Provenance(data.get("provenance", Provenance.GENERATED.value))


RosterKey = tuple[ExpertGroup, Paradigm, int]


@dataclass
class RoleLibrary:
    entries: dict[RosterKey, AgentRoster] = field(default_factory=dict)
    provenance: dict[RosterKey, Provenance] = field(default_factory=dict)

    def add(self, roster: AgentRoster, provenance: Provenance = Provenance.GENERATED) -> None:
        problems = validate_roster(roster)
        if problems:
            raise RoleError(f"invalid roster {role_filename(roster.domain_tag, roster.paradigm, roster.size)}: "
                            + "; ".join(problems))
        key = (roster.domain_tag, roster.paradigm, roster.size)
        self.entries[key] = roster
        self.provenance[key] = Provenance(provenance)

    def get(self, group, paradigm, size: int) -> AgentRoster:
        key = (ExpertGroup.parse(group), Paradigm.parse(paradigm), size)
        try:
            return self.entries[key]
        except KeyError:
            raise MissingRosterError(f"no roster for {role_filename(*key)}") from None

    def __contains__(self, key) -> bool:
        group, paradigm, size = key
        return (ExpertGroup.parse(group), Paradigm.parse(paradigm), size) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def load_dir(self, directory: str | Path) -> RoleLibrary:
        for path in sorted(Path(directory).glob("*.json")):
            roster, provenance = load_role_file(path)
            self.add(roster, provenance)
        return self

    def save(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for key, roster in sorted(self.entries.items(), key=lambda kv: role_filename(*kv[0])):
            path = directory / role_filename(*key)
            path.write_text(dump_role_file(roster, self.provenance[key]), encoding="utf-8")
            written.append(path)
        return written

    @classmethod
    def shipped(cls) -> RoleLibrary:
        library = cls()
        for item in sorted((resources.files("mascollab") / "data" / "roles").iterdir(), key=lambda p: p.name):
            if item.name.endswith(".json"):
                data = json.loads(item.read_text(encoding="utf-8"))
                library.add(AgentRoster.from_dict(data), Provenance(data["provenance"]))
        return library

    @classmethod
    def load(cls, directory: str | Path | None = None) -> RoleLibrary:
        """Shipped rosters overlaid with any role files found in ``directory``."""
        library = cls.shipped()
        if directory is not None and Path(directory).is_dir():
            library.load_dir(directory)
        return library
