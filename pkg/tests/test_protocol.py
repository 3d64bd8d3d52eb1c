from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mascollab.backends import ScriptedBackend
from mascollab.core import AgentRoster, AgentTurn, ExpertGroup, ExpertSpec, OPTION_LETTERS, Paradigm, TaskInstance
from mascollab.protocol import (
    ProtocolStateError,
    build_history,
    extract_boxed,
    last_agent_decides,
    run_collaboration,
)

INSTANCE = TaskInstance("q1", "Math", "What is 2+2?", ("3", "4", "5", "6"), 1)


def make_roster(n: int, paradigm=Paradigm.DIVERSITY) -> AgentRoster:
    experts = tuple(ExpertSpec(ExpertGroup.MATH, f"Role{k}", f"duty {k}", k, paradigm) for k in range(n))
    return AgentRoster(ExpertGroup.MATH, paradigm, n, experts)


def turn(i: int, answer: int | None = 0) -> AgentTurn:
    return AgentTurn(i, f"Role{i - 1}", f"output {i}", answer, 1, 1)


def test_first_agent_sees_nothing():
    assert build_history([], 1).empty


def test_second_agent_sees_full_predecessor():
    h = build_history([turn(1)], 2)
    assert h.predecessor_full == "output 1"
    assert h.predecessor_role == "Role0"
    assert h.earlier_finals == ()


def test_later_agents_see_letters_only():
    h = build_history([turn(1, 2), turn(2, None), turn(3, 0)], 4)
    assert h.predecessor_full == "output 3"
    assert h.earlier_finals == ((1, "Role0", "C"), (2, "Role1", "UNPARSED"))


@pytest.mark.parametrize("turns, index", [([], 2), ([turn(1)], 1), ([], 0)])
def test_history_state_errors(turns, index):
    with pytest.raises(ProtocolStateError):
        build_history(turns, index)


def test_size_one_roster():
    backend = ScriptedBackend({("q1", 1): "As a Role0 in Math, I ... My answer is \\boxed{C}"})
    result = run_collaboration(make_roster(1), INSTANCE, backend)
    assert len(result.turns) == 1
    assert result.system_answer == 2
    assert result.correct is False


def test_last_agent_decides():
    backend = ScriptedBackend({("q1", 1): "\\boxed{A}", ("q1", 2): "\\boxed{B}", ("q1", 3): "\\boxed{B}"})
    result = run_collaboration(make_roster(3), INSTANCE, backend)
    assert [t.final_answer for t in result.turns] == [0, 1, 1]
    assert result.system_answer == 1
    assert result.correct


def test_unparsed_last_agent_is_incorrect():
    backend = ScriptedBackend({("q1", 1): "\\boxed{B}", ("q1", 2): "I am unsure."})
    result = run_collaboration(make_roster(2), INSTANCE, backend)
    assert result.system_answer is None
    assert not result.correct and not result.failed


def test_agents_called_in_order():
    backend = ScriptedBackend(default="\\boxed{A}")
    run_collaboration(make_roster(6), INSTANCE, backend)
    assert [c.tags["agent_index"] for c in backend.calls] == [1, 2, 3, 4, 5, 6]


def test_transport_error_retried_once():
    backend = ScriptedBackend({("q1", 1): "\\boxed{B}", ("q1", 2): [{"error": "transport"}, "\\boxed{B}"]})
    result = run_collaboration(make_roster(2), INSTANCE, backend)
    assert not result.failed
    assert result.correct
    assert len(backend.calls) == 3


def test_repeated_transport_error_fails_instance():
    backend = ScriptedBackend({("q1", 1): "\\boxed{B}", ("q1", 2): {"error": "transport"}})
    result = run_collaboration(make_roster(3), INSTANCE, backend)
    assert result.failed
    assert result.error.startswith("agent 2 (Role1)")
    assert not result.correct and result.system_answer is None
    assert len(result.turns) == 1
    assert len(backend.calls) == 3  # agent 1, agent 2 twice; agent 3 never called


def test_terminal_error_not_retried():
    backend = ScriptedBackend({("q1", 1): {"error": "terminal"}})
    result = run_collaboration(make_roster(3), INSTANCE, backend)
    assert result.failed
    assert len(backend.calls) == 1


def test_request_carries_sampling_parameters():
    backend = ScriptedBackend(default="\\boxed{A}")
    run_collaboration(make_roster(1), INSTANCE, backend, max_tokens=512, temperature=0.2)
    assert backend.calls[0].max_tokens == 512
    assert backend.calls[0].temperature == 0.2


def test_last_agent_decides_empty():
    assert last_agent_decides([]) is None


@pytest.mark.parametrize("n", [1, 11])
def test_extract_rejects_bad_option_count(n):
    with pytest.raises(ValueError):
        extract_boxed("\\boxed{A}", n)


# -- properties -------------------------------------------------------------------------------

fillers = st.text(alphabet=st.characters(blacklist_characters="\\{}"), max_size=30)


@given(
    n_options=st.integers(2, 10),
    picks=st.lists(st.integers(0, 9), min_size=1, max_size=6),
    gaps=st.lists(fillers, min_size=7, max_size=7),
    numeral=st.booleans(),
)
def test_extract_returns_last_in_range(n_options, picks, gaps, numeral):
    parts = []
    for k, p in enumerate(picks):
        token = str(p + 1) if numeral else OPTION_LETTERS[p]
        parts.append(gaps[k] + "\\boxed{" + token + "}")
    text = "".join(parts) + gaps[-1]
    in_range = [p for p in picks if p < n_options]
    assert extract_boxed(text, n_options) == (in_range[-1] if in_range else None)


@given(fillers)
def test_extract_without_box_is_absent(text):
    assert extract_boxed(text, 4) is None


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 10), letters=st.lists(st.integers(0, 3), min_size=10, max_size=10))
def test_visibility_property(n, letters):
    script = {("q1", a): f"RATIONALE#{a}# \\boxed{{{OPTION_LETTERS[letters[a - 1]]}}}" for a in range(1, n + 1)}
    backend = ScriptedBackend(script)
    result = run_collaboration(make_roster(n), INSTANCE, backend)
    for call in backend.calls:
        i = call.tags["agent_index"]
        prompt = call.user_prompt
        assert sum(f"RATIONALE#{j}#" in prompt for j in range(1, n + 1)) == (1 if i > 1 else 0)
        if i > 1:
            assert f"RATIONALE#{i - 1}#" in prompt
        for j in range(1, i - 1):
            assert f"Agent {j} (Role{j - 1}): {OPTION_LETTERS[letters[j - 1]]}" in prompt
    assert result.system_answer == letters[n - 1]
    assert result.correct == (letters[n - 1] == INSTANCE.gold_index)
