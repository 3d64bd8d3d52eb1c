"""Dataset ingestion, experiment plans and the crash-safe run log."""

from __future__ import annotations

import json
import logging
import os
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .backends import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, ChatBackend
from .core import (
    ROSTER_SIZES,
    CollaborationResult,
    ExpertGroup,
    Paradigm,
    TaskDomain,
    TaskInstance,
    canonical_json,
    content_hash,
)
from .protocol import run_collaboration
from .roles import MissingRosterError, RoleLibrary, role_filename

log = logging.getLogger(__name__)


class DatasetError(ValueError):
    def __init__(self, path, problems: list[tuple[int, str]]):
        self.path = path
        self.problems = problems
        detail = "\n".join(f"  line {n}: {msg}" for n, msg in problems)
        super().__init__(f"{path}: {len(problems)} malformed line(s)\n{detail}")


class PlanError(ValueError):
    pass


class RunLogError(RuntimeError):
    pass


def load_dataset(path: str | Path) -> list[TaskInstance]:
    """Read a JSONL dataset, one instance per line.

    Every malformed line is collected and reported together; nothing is
    returned unless the whole file is valid.
    """
    path = Path(path)
    instances, problems, seen = [], [], {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                if not isinstance(data, dict):
                    raise ValueError("expected a JSON object")
                missing = {"instance_id", "domain", "question", "options", "gold_index"} - data.keys()
                if missing:
                    raise ValueError(f"missing field(s) {sorted(missing)}")
                instance = TaskInstance.from_dict(data)
            except (ValueError, TypeError) as exc:
                problems.append((lineno, str(exc)))
                continue
            if instance.instance_id in seen:
                problems.append((lineno, f"duplicate instance_id {instance.instance_id!r} (first on line {seen[instance.instance_id]})"))
                continue
            seen[instance.instance_id] = lineno
            instances.append(instance)
    if problems:
        raise DatasetError(path, problems)
    return instances


def select_instances(instances: Sequence[TaskInstance], seed: int, limit: int | None, domain: TaskDomain) -> list[TaskInstance]:
    """Seeded subsample of one domain's instances.

    Ids are sorted first so the choice depends only on (ids, seed, limit),
    never on file order or platform.
    """
    pool = sorted((i for i in instances if i.domain is domain), key=lambda i: i.instance_id)
    random.Random(f"{seed}/{domain.value}").shuffle(pool)
    return pool if limit is None else pool[:limit]


@dataclass(frozen=True)
class ExperimentPlan:
    dataset_path: Path
    domains: tuple[TaskDomain, ...]
    groups: tuple[ExpertGroup, ...]
    paradigms: tuple[Paradigm, ...]
    sizes: tuple[int, ...]
    seed: int = 0
    sample_limit: int | None = None
    backend: str = "default"
    temperature: float | None = None
    max_tokens: int | None = None
    name: str = "plan"
    run_log: Path | None = None
    library_dir: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "dataset_path", Path(self.dataset_path))
        object.__setattr__(self, "domains", tuple(TaskDomain.parse(d) for d in self.domains))
        object.__setattr__(self, "groups", tuple(ExpertGroup.parse(g) for g in self.groups))
        object.__setattr__(self, "paradigms", tuple(Paradigm.parse(p) for p in self.paradigms))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        for label in ("domains", "groups", "paradigms", "sizes"):
            values = getattr(self, label)
            if not values:
                raise PlanError(f"plan selects no {label}")
            if len(set(values)) != len(values):
                raise PlanError(f"plan lists duplicate {label}")
        bad = [s for s in self.sizes if s not in ROSTER_SIZES]
        if bad:
            raise PlanError(f"unsupported roster size(s) {bad}")
        if self.sample_limit is not None and self.sample_limit < 1:
            raise PlanError("sample_limit must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentPlan:
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent
        for key in ("dataset_path", "run_log", "library_dir"):
            if data.get(key) is not None:
                data[key] = base / data[key]
        data.setdefault("name", path.stem)
        try:
            return cls(**data)
        except TypeError as exc:
            raise PlanError(f"{path}: {exc}") from exc

    def with_defaults(self, temperature: float = DEFAULT_TEMPERATURE, max_tokens: int = DEFAULT_MAX_TOKENS) -> ExperimentPlan:
        """Fill unset sampling parameters, e.g. from a backend profile."""
        return replace(
            self,
            temperature=temperature if self.temperature is None else self.temperature,
            max_tokens=max_tokens if self.max_tokens is None else self.max_tokens,
        )

    def cells(self) -> list[tuple[ExpertGroup, Paradigm, int]]:
        return [(g, p, s) for g in self.groups for p in self.paradigms for s in self.sizes]

    def fingerprint(self, instances: Sequence[TaskInstance]) -> str:
        """Content hash of the plan's selections plus the dataset contents."""
        plan = self.with_defaults()
        return content_hash({
            "domains": [d.value for d in self.domains],
            "groups": [g.value for g in self.groups],
            "paradigms": [p.value for p in self.paradigms],
            "sizes": list(self.sizes),
            "seed": self.seed,
            "sample_limit": self.sample_limit,
            "backend": self.backend,
            "temperature": plan.temperature,
            "max_tokens": plan.max_tokens,
            "dataset": content_hash([i.to_dict() for i in sorted(instances, key=lambda i: i.instance_id)]),
        })


@dataclass(frozen=True)
class RunRecord:
    plan_fingerprint: str
    roster_fingerprint: str
    instance_id: str
    task_domain: TaskDomain
    expert_group: ExpertGroup
    paradigm: Paradigm
    size: int
    result: CollaborationResult
    config: dict = field(default_factory=dict)
    created_at: str = ""

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.plan_fingerprint, self.roster_fingerprint, self.instance_id)

    @property
    def cell(self) -> tuple[TaskDomain, ExpertGroup, Paradigm, int]:
        return (self.task_domain, self.expert_group, self.paradigm, self.size)

    def to_dict(self) -> dict:
        return {
            "plan_fingerprint": self.plan_fingerprint,
            "roster_fingerprint": self.roster_fingerprint,
            "instance_id": self.instance_id,
            "task_domain": self.task_domain.value,
            "expert_group": self.expert_group.value,
            "paradigm": self.paradigm.value,
            "size": self.size,
            "result": self.result.to_dict(),
            "config": self.config,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RunRecord:
        return cls(
            plan_fingerprint=data["plan_fingerprint"],
            roster_fingerprint=data["roster_fingerprint"],
            instance_id=data["instance_id"],
            task_domain=TaskDomain.parse(data["task_domain"]),
            expert_group=ExpertGroup.parse(data["expert_group"]),
            paradigm=Paradigm.parse(data["paradigm"]),
            size=int(data["size"]),
            result=CollaborationResult.from_dict(data["result"]),
            config=data.get("config", {}),
            created_at=data.get("created_at", ""),
        )


class RunLog:
    """Append-only JSONL file of :class:`RunRecord` lines.

    A torn final line (the process died mid-write) is ignored on read and cut
    off before the next append. Duplicate keys keep the first record.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def _lines(self) -> list[tuple[int, str, bool]]:
        if not self.path.exists():
            return []
        text = self.path.read_text(encoding="utf-8")
        lines = text.split("\n")
        complete = lines[:-1]
        out = [(n, line, True) for n, line in enumerate(complete, start=1)]
        if lines[-1]:
            out.append((len(complete) + 1, lines[-1], False))
        return out

    def records(self) -> list[RunRecord]:
        records, seen = [], set()
        for lineno, line, terminated in self._lines():
            if not line.strip():
                continue
            try:
                record = RunRecord.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                if not terminated:
                    log.warning("%s: ignoring torn final line %d", self.path, lineno)
                    continue
                raise RunLogError(f"{self.path}: line {lineno} is not a valid run record: {exc}") from exc
            if record.key in seen:
                continue
            seen.add(record.key)
            records.append(record)
        return records

    def keys(self) -> set[tuple[str, str, str]]:
        return {r.key for r in self.records()}

    def prepare(self) -> None:
        """Create the file if needed and drop a torn trailing line."""
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a+b") as fh:
                fh.seek(0, os.SEEK_END)
                size = fh.tell()
                if size == 0:
                    return
                fh.seek(0)
                data = fh.read()
                if not data.endswith(b"\n"):
                    cut = data.rfind(b"\n") + 1
                    fh.truncate(cut)
                    log.warning("%s: truncated a torn final line", self.path)
        except OSError as exc:
            raise RunLogError(f"run log {self.path} is not writable: {exc}") from exc

    def append(self, record: RunRecord) -> None:
        line = canonical_json(record.to_dict()) + "\n"
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())


@dataclass
class RunSummary:
    log_path: Path
    planned: int
    skipped: int
    written: int
    failed: int

    @property
    def ok(self) -> bool:
        return self.failed == 0


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def execute_plan(
    plan: ExperimentPlan,
    library: RoleLibrary,
    backend: ChatBackend,
    log_path: str | Path,
    *,
    concurrency: int = 1,
    config_snapshot: dict | None = None,
    progress: Callable[[int, int, RunRecord], None] | None = None,
) -> RunSummary:
    """Run every (cell, instance) pair of ``plan`` that the log does not hold yet.

    Records are appended in plan order regardless of ``concurrency``, so an
    interrupted run resumed later produces the same log as an uninterrupted one.
    """
    plan = plan.with_defaults()
    missing = [role_filename(*cell) for cell in plan.cells() if cell not in library]
    if missing:
        raise MissingRosterError(f"library lacks rosters: {', '.join(missing)}")

    instances = load_dataset(plan.dataset_path)
    plan_fp = plan.fingerprint(instances)
    subsets = {d: select_instances(instances, plan.seed, plan.sample_limit, d) for d in plan.domains}
    for domain, subset in subsets.items():
        if not subset:
            log.warning("dataset has no %s instances", domain.value)

    run_log = RunLog(log_path)
    run_log.prepare()
    existing = {r.key: r for r in run_log.records()}

    snapshot = {"backend": plan.backend, "temperature": plan.temperature, "max_tokens": plan.max_tokens}
    snapshot.update(config_snapshot or {})

    work = []
    planned = 0
    failed_before = 0
    for group, paradigm, size in plan.cells():
        roster = library.get(group, paradigm, size)
        for domain in plan.domains:
            for instance in subsets[domain]:
                planned += 1
                key = (plan_fp, roster.fingerprint, instance.instance_id)
                if key in existing:
                    failed_before += existing[key].result.failed
                    continue
                work.append((roster, domain, instance))

    def run_one(item) -> RunRecord:
        roster, domain, instance = item
        result = run_collaboration(
            roster, instance, backend, max_tokens=plan.max_tokens, temperature=plan.temperature
        )
        return RunRecord(
            plan_fingerprint=plan_fp,
            roster_fingerprint=roster.fingerprint,
            instance_id=instance.instance_id,
            task_domain=domain,
            expert_group=roster.domain_tag,
            paradigm=roster.paradigm,
            size=roster.size,
            result=result,
            config=snapshot,
            created_at=_now(),
        )

    failed = failed_before
    written = 0
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for record in pool.map(run_one, work):
            run_log.append(record)
            written += 1
            failed += record.result.failed
            if progress:
                progress(written, len(work), record)
    return RunSummary(log_path=Path(log_path), planned=planned, skipped=planned - len(work),
                      written=written, failed=failed)


def read_records(paths: Iterable[str | Path]) -> list[RunRecord]:
    """Records of several logs, deduplicated across files (first wins)."""
    records, seen = [], set()
    for path in paths:
        for record in RunLog(path).records():
            if record.key not in seen:
                seen.add(record.key)
                records.append(record)
    return records
