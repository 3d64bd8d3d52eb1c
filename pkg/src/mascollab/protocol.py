"""Sequential communication between agents.

Agent ``i`` sees the complete output of agent ``i-1`` and only the final
answer letters of agents ``1..i-2``. The last agent's answer is the system
answer.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from .backends import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    BackendError,
    ChatBackend,
    ChatRequest,
    complete_with_retry,
)
from .core import (
    OPTION_LETTERS,
    AgentRoster,
    AgentTurn,
    CollaborationResult,
    TaskInstance,
)
from .roles import render_agent_prompts

UNPARSED = "UNPARSED"


class ProtocolStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class VisibleHistory:
    predecessor_full: str | None = None
    predecessor_role: str | None = None
    earlier_finals: tuple[tuple[int, str, str], ...] = ()

    @property
    def empty(self) -> bool:
        return self.predecessor_full is None and not self.earlier_finals


def build_history(turns_so_far: Sequence[AgentTurn], next_agent_index: int) -> VisibleHistory:
    if next_agent_index < 1:
        raise ProtocolStateError(f"agent index must be >= 1, got {next_agent_index}")
    if len(turns_so_far) != next_agent_index - 1:
        raise ProtocolStateError(
            f"agent {next_agent_index} expects {next_agent_index - 1} prior turns, got {len(turns_so_far)}"
        )
    if next_agent_index == 1:
        return VisibleHistory()
    *earlier, predecessor = turns_so_far
    return VisibleHistory(
        predecessor_full=predecessor.full_output,
        predecessor_role=predecessor.formal_role,
        earlier_finals=tuple((t.agent_index, t.formal_role, t.answer_letter) for t in earlier),
    )


_BOXED = re.compile(r"\\+boxed\s*\{")
_NUMERAL = re.compile(r"^(?:[1-9]|10)$")


def _boxed_contents(text: str):
    for match in _BOXED.finditer(text):
        depth, pos = 1, match.end()
        while pos < len(text) and depth:
            if text[pos] == "{":
                depth += 1
            elif text[pos] == "}":
                depth -= 1
            pos += 1
        if depth == 0:
            yield text[match.end():pos - 1]


def _option_from_content(content: str, n_options: int) -> int | None:
    content = content.strip()
    # \boxed{{B}} comes from models echoing the format-escaped template.
    while len(content) >= 2 and content[0] == "{" and content[-1] == "}":
        content = content[1:-1].strip()
    content = content.casefold()
    if len(content) == 1 and content in OPTION_LETTERS.casefold():
        index = OPTION_LETTERS.casefold().index(content)
    elif _NUMERAL.match(content):
        index = int(content) - 1
    else:
        return None
    return index if index < n_options else None


def extract_boxed(full_output: str, n_options: int) -> int | None:
    """Option index named by the last valid ``\\boxed{X}`` token, if any.

    ``X`` is a letter A..J or a 1-based numeral; tokens that do not name an
    option within ``n_options`` are ignored.
    """
    if not 2 <= n_options <= len(OPTION_LETTERS):
        raise ValueError(f"n_options must be in 2..{len(OPTION_LETTERS)}, got {n_options}")
    answer = None
    for content in _boxed_contents(full_output):
        index = _option_from_content(content, n_options)
        if index is not None:
            answer = index
    return answer


def last_agent_decides(turns: Sequence[AgentTurn]) -> int | None:
    return turns[-1].final_answer if turns else None


def run_collaboration(
    roster: AgentRoster,
    instance: TaskInstance,
    backend: ChatBackend,
    *,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    temperature: float = DEFAULT_TEMPERATURE,
    retries: int = 1,
    aggregate: Callable[[Sequence[AgentTurn]], int | None] = last_agent_decides,
) -> CollaborationResult:
    """Run one roster over one instance, strictly in roster order.

    A terminal backend failure stops the chain and yields a failed result
    (``error`` set, ``correct`` false) holding the turns completed so far.
    """
    start = time.perf_counter()
    fingerprint = roster.fingerprint
    turns: list[AgentTurn] = []
    error = None
    for i, expert in enumerate(roster.experts, start=1):
        history = build_history(turns, i)
        system_prompt, user_prompt = render_agent_prompts(expert, instance, history)
        request = ChatRequest(
            system_prompt=system_prompt,
            user_prompt=user_prompt,
            max_tokens=max_tokens,
            temperature=temperature,
            tags={"instance_id": instance.instance_id, "agent_index": i},
        )
        try:
            response = complete_with_retry(backend, request, retries=retries)
        except BackendError as exc:
            error = f"agent {i} ({expert.formal_role}): {exc}"
            break
        turns.append(
            AgentTurn(
                agent_index=i,
                formal_role=expert.formal_role,
                full_output=response.full_text,
                final_answer=extract_boxed(response.full_text, len(instance.options)),
                reasoning_tokens=response.reasoning_tokens,
                answer_tokens=response.answer_tokens,
            )
        )
    system_answer = None if error else aggregate(turns)
    return CollaborationResult(
        instance_id=instance.instance_id,
        roster_fingerprint=fingerprint,
        turns=tuple(turns),
        system_answer=system_answer,
        correct=system_answer is not None and system_answer == instance.gold_index,
        wall_time_ms=int((time.perf_counter() - start) * 1000),
        error=error,
    )
