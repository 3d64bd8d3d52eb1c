"""Expertise-domain relevance matrix from model judgements."""

from __future__ import annotations

import ast
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from ..backends import ChatBackend, ChatRequest, complete_with_retry, split_think
from ..core import TaskDomain, TaskInstance
from ..harness import select_instances
from ..roles import render_problem
from .metrics import AnalysisError

log = logging.getLogger(__name__)

RELEVANCE_PROMPT = """\
You are an expert in identifying the domains of expertise required to solve a given problem.
You will be provided with a question, and your task is to determine which domains from the following list are relevant: ['Math', 'Law', 'Business', 'Health'].
Please analyze the question and return the appropriate domains.
There could be more than one domain that is necessary.
Please directly output a python list of the domains without other output.
Please limit your output to 2-3 domains.
For example: ['Med', 'Fina']
Please directly output the list that is loadable by python, no other output.
2-3 domains should be outputted, no more or less."""

RELEVANCE_SYSTEM_PROMPT = "You are a helpful assistant."

# Expertise names seen in judgements, including the abbreviated group labels.
ALIASES = {
    "math": TaskDomain.MATH,
    "mathematics": TaskDomain.MATH,
    "law": TaskDomain.LAW,
    "legal": TaskDomain.LAW,
    "business": TaskDomain.BUSINESS,
    "finance": TaskDomain.BUSINESS,
    "fina": TaskDomain.BUSINESS,
    "health": TaskDomain.HEALTH,
    "med": TaskDomain.HEALTH,
    "medical": TaskDomain.HEALTH,
    "medicine": TaskDomain.HEALTH,
}

_LIST = re.compile(r"\[[^\[\]]*\]")


def render_relevance_prompt(instance: TaskInstance) -> str:
    return f"{RELEVANCE_PROMPT}\n\nQuestion:\n{render_problem(instance)}"


def parse_relevance_response(text: str) -> list[TaskDomain] | None:
    """Domains named by a judgement, or None when it is not a valid 2-3 item list."""
    split = split_think(text)
    if split is not None:
        text = split[1]
    match = _LIST.search(text)
    if not match:
        return None
    try:
        items = ast.literal_eval(match.group(0))
    except (ValueError, SyntaxError):
        return None
    if not isinstance(items, list) or not all(isinstance(x, str) for x in items):
        return None
    domains = [ALIASES.get(x.strip().casefold()) for x in items]
    if None in domains or len(set(domains)) != len(domains):
        return None
    if not 2 <= len(domains) <= 3:
        return None
    return domains


@dataclass(frozen=True)
class RelevanceMatrix:
    counts: dict[tuple[TaskDomain, TaskDomain], int]
    samples_per_domain: int
    sampled: dict[TaskDomain, int]
    dropped: dict[TaskDomain, int]

    @property
    def rows(self) -> list[TaskDomain]:
        return [d for d in TaskDomain if d in self.sampled]

    @property
    def columns(self) -> list[TaskDomain]:
        return list(TaskDomain)

    def row_total(self, domain: TaskDomain) -> int:
        return sum(self.counts.get((domain, col), 0) for col in self.columns)

    def row_bounds(self, domain: TaskDomain) -> tuple[int, int]:
        kept = self.sampled[domain] - self.dropped[domain]
        return 2 * kept, 3 * kept


def build_relevance_matrix(
    instances: Sequence[TaskInstance],
    backend: ChatBackend,
    samples_per_domain: int,
    *,
    seed: int = 0,
    domains: Sequence[TaskDomain] | None = None,
    max_tokens: int = 1024,
    temperature: float = 0.0,
    concurrency: int = 1,
) -> RelevanceMatrix:
    """Ask the model which 2-3 expertise domains each sampled instance needs.

    An invalid judgement gets one more attempt and is dropped (and counted) if
    it is still invalid. Backend failures beyond the retry budget propagate.
    """
    if samples_per_domain < 1:
        raise ValueError("samples_per_domain must be >= 1")
    domains = list(domains) if domains else sorted({i.domain for i in instances}, key=list(TaskDomain).index)
    sample = [(d, inst) for d in domains for inst in select_instances(instances, seed, samples_per_domain, d)]

    def judge(item):
        _, instance = item
        for attempt in range(2):
            request = ChatRequest(
                system_prompt=RELEVANCE_SYSTEM_PROMPT,
                user_prompt=render_relevance_prompt(instance),
                max_tokens=max_tokens,
                temperature=temperature,
                tags={"instance_id": instance.instance_id, "agent_index": 0, "attempt": attempt},
            )
            parsed = parse_relevance_response(complete_with_retry(backend, request).full_text)
            if parsed is not None:
                return parsed
        return None

    counts = {(row, col): 0 for row in domains for col in TaskDomain}
    sampled = {d: 0 for d in domains}
    dropped = {d: 0 for d in domains}
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for (domain, instance), judged in zip(sample, pool.map(judge, sample)):
            sampled[domain] += 1
            if judged is None:
                dropped[domain] += 1
                log.info("dropped invalid relevance judgement for %s", instance.instance_id)
                continue
            for col in judged:
                counts[(domain, col)] += 1
    if sample and sum(dropped.values()) == len(sample):
        raise AnalysisError("every relevance judgement was invalid")
    if any(dropped.values()):
        log.warning("dropped %d invalid relevance judgement(s)", sum(dropped.values()))
    return RelevanceMatrix(counts, samples_per_domain, sampled, dropped)
