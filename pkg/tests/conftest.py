from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from mascollab.core import OPTION_LETTERS, TaskDomain, TaskInstance

ROOT = Path(__file__).resolve().parent
FIXTURES = ROOT / "fixtures"


def make_instances(counts: dict[str, int], n_options: int = 4) -> list[TaskInstance]:
    out = []
    for domain, n in counts.items():
        d = TaskDomain.parse(domain)
        for k in range(n):
            iid = f"{d.value.lower()}-{k:03d}"
            out.append(TaskInstance(
                instance_id=iid,
                domain=d,
                question=f"Question {k} about {d.value}?",
                options=tuple(f"choice {j} of {iid}" for j in range(n_options)),
                gold_index=k % n_options,
            ))
    return out


def write_dataset(path: Path, instances) -> Path:
    path.write_text("".join(json.dumps(i.to_dict()) + "\n" for i in instances), encoding="utf-8")
    return path


def scripted_letter(instance_id: str, agent: int, n_options: int = 4) -> str:
    digest = hashlib.sha256(f"{instance_id}/{agent}".encode()).digest()
    return OPTION_LETTERS[digest[0] % n_options]


def mock_script(instances, max_agents: int = 10, delay_ms: int = 0) -> dict:
    responses = {}
    for inst in instances:
        per_agent = {}
        for agent in range(1, max_agents + 1):
            letter = scripted_letter(inst.instance_id, agent, len(inst.options))
            per_agent[str(agent)] = (
                f"<think>agent {agent} weighs {inst.instance_id} step by step</think>"
                f"Considering the options, the answer is \\boxed{{{letter}}}."
            )
        responses[inst.instance_id] = per_agent
    return {"delay_ms": delay_ms, "responses": responses}


def write_workspace(root: Path, *, n: int = 20, delay_ms: int = 0, parallelism: int = 2,
                    groups=("math", "finance", "medical"), paradigms=("diversity",), sizes=(3,)) -> dict:
    root.mkdir(parents=True, exist_ok=True)
    instances = make_instances({"Math": n})
    write_dataset(root / "data.jsonl", instances)
    (root / "script.json").write_text(json.dumps(mock_script(instances, delay_ms=delay_ms)), encoding="utf-8")
    config = {
        "profiles": {"mock": {"kind": "mock", "script": "script.json", "temperature": 0.6, "max_tokens": 512}},
        "default_backend": "mock",
        "paths": {"roles_dir": "roles", "runs_dir": "runs", "reports_dir": "reports"},
        "parallelism": parallelism,
    }
    (root / "mascollab.json").write_text(json.dumps(config), encoding="utf-8")
    plan = {
        "dataset_path": "data.jsonl",
        "domains": ["Math"],
        "groups": list(groups),
        "paradigms": list(paradigms),
        "sizes": list(sizes),
        "seed": 7,
        "backend": "mock",
        "name": "smoke",
    }
    (root / "plan.json").write_text(json.dumps(plan), encoding="utf-8")
    return {"root": root, "config": root / "mascollab.json", "plan": root / "plan.json",
            "instances": instances}


def strip_timing(log_text: str) -> str:
    lines = []
    for line in log_text.splitlines():
        data = json.loads(line)
        data.pop("created_at", None)
        data["result"].pop("wall_time_ms", None)
        lines.append(json.dumps(data, sort_keys=True))
    return "\n".join(lines)


@pytest.fixture
def workspace(tmp_path):
    return write_workspace(tmp_path / "ws")


# -- acceptance summary ------------------------------------------------------------

_VERDICTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        previous = _VERDICTS.get(number, (title, "PASS"))[1]
        status = "PASS" if report.passed and previous == "PASS" else "FAIL"
        _VERDICTS[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, status = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
