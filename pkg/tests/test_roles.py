from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES
from mascollab.backends import ScriptedBackend
from mascollab.core import AgentRoster, ExpertGroup, ExpertSpec, Paradigm, TaskInstance
from mascollab.protocol import VisibleHistory
from mascollab.roles import (
    EMPTY_HISTORY,
    PLACEHOLDERS,
    MissingRosterError,
    Provenance,
    RoleError,
    RoleLibrary,
    RoleParseError,
    augment_roster,
    dump_role_file,
    generate_roster,
    load_role_file,
    merge_augmentation,
    parse_generated_roster,
    parse_role_entries,
    render_agent_prompts,
    render_augmentation_prompt,
    render_generation_prompt,
    role_filename,
    serialize_roster_text,
)

INSTANCE = TaskInstance("q", "Law", "Is the contract valid?", ("Yes", "No", "Only in part"), 0)
LAW_WORKFLOW = (FIXTURES / "roster_listings" / "law_workflow_3.txt").read_text(encoding="utf-8")


def shipped(group, paradigm):
    return RoleLibrary.shipped().get(group, paradigm, 3)


# -- agent prompts ------------------------------------------------------------------------------


def test_prompts_fill_every_slot():
    expert = shipped("law", "workflow").experts[1]
    system, user = render_agent_prompts(expert, INSTANCE, VisibleHistory())
    for placeholder in PLACEHOLDERS:
        assert placeholder not in system and placeholder not in user
    assert f"You are a {expert.formal_role} specializing in Law." in system
    assert expert.responsibility in system
    assert f"Previous discussion:    {EMPTY_HISTORY}" in user
    assert "Is the contract valid?\nOptions:\nA. Yes\nB. No\nC. Only in part" in user
    assert '"My answer is \\boxed{X}"' in user
    assert "\\boxed{}" in user


def test_prompt_history_block():
    expert = shipped("math", "diversity").experts[2]
    history = VisibleHistory("I think B. \\boxed{B}", "Critic", ((1, "Solver", "A"),))
    _, user = render_agent_prompts(expert, INSTANCE, history)
    assert "Agent 1 (Solver): A\nAgent 2 (Critic) full response:\nI think B. \\boxed{B}" in user


def test_generation_prompt_per_paradigm():
    workflow = render_generation_prompt("finance", "workflow")
    assert "Finance domain" in workflow and "solver, critic and coordinator" in workflow
    diversity = render_generation_prompt(ExpertGroup.MEDICAL, Paradigm.DIVERSITY)
    assert "the Medical domain" in diversity and "{" not in diversity
    with pytest.raises(RoleError):
        render_generation_prompt("math", "workflow", size=6)


def test_augmentation_prompt_embeds_base():
    base = shipped("law", "workflow")
    prompt = render_augmentation_prompt(base, 6)
    assert "augment the group size to 6" in prompt
    assert serialize_roster_text(base) in prompt
    assert "strategist" in prompt
    with pytest.raises(RoleError):
        render_augmentation_prompt(base, 3)


# -- parsing -----------------------------------------------------------------------------------------


def test_parse_numbered_listing():
    roster = parse_generated_roster(LAW_WORKFLOW, "law", "workflow", 3)
    assert [e.formal_role for e in roster.experts] == ["Solver", "Critic", "Coordinator"]
    assert [e.index for e in roster.experts] == [0, 1, 2]
    assert roster.experts[0].responsibility.startswith("Analyze contract validity")


def test_parse_markdown_listing():
    text = """Here is the team.

1. **Role: Quantitative Analyst**
   **Responsibilities:**
   - Build pricing models.
   - Stress test portfolios.

2. **Role: Compliance Architect**
   **Responsibilities:** Map regulations to controls.

3. **Role: Treasury Strategist**
   **Responsibilities:**
   Manage liquidity.
"""
    entries = parse_role_entries(text)
    assert [t for t, _ in entries] == ["Quantitative Analyst", "Compliance Architect", "Treasury Strategist"]
    assert "Stress test portfolios." in entries[0][1]
    assert entries[1][1] == "Map regulations to controls."


def test_parse_json_listing():
    text = json.dumps([{"role": "Solver", "responsibility": "solve"}, {"role": "Critic", "responsibility": "check"},
                       {"role": "Coordinator", "responsibility": "decide"}])
    roster = parse_generated_roster(f"```json\n{text}\n```", "math", "workflow", 3)
    assert roster.experts[2].formal_role == "Coordinator"


def test_parse_wrong_count():
    with pytest.raises(RoleParseError, match="expected 6"):
        parse_generated_roster(LAW_WORKFLOW, "law", "workflow", 6)


def test_parse_nothing():
    with pytest.raises(RoleParseError):
        parse_generated_roster("I cannot help with that.", "law", "workflow", 3)


def test_workflow_parse_requires_roles():
    text = LAW_WORKFLOW.replace("III. Coordinator", "III. Mediator")
    with pytest.raises(RoleError, match="coordinator"):
        parse_generated_roster(text, "law", "workflow", 3)


titles = st.text(st.characters(whitelist_categories=("Lu", "Ll"), max_codepoint=0x24F), min_size=1, max_size=15)
duties = st.lists(st.text(st.characters(whitelist_categories=("Lu", "Ll", "Zs"), max_codepoint=0x24F),
                          min_size=1, max_size=30).filter(lambda s: s.strip() == s and s),
                  min_size=1, max_size=3).map(" ".join)


@given(entries=st.lists(st.tuples(titles, duties), min_size=3, max_size=3, unique_by=lambda e: e[0].casefold()))
def test_serialize_parse_round_trip(entries):
    experts = tuple(ExpertSpec("Math", t, d, i, "diversity") for i, (t, d) in enumerate(entries))
    roster = AgentRoster("Math", "diversity", 3, experts)
    assert parse_generated_roster(serialize_roster_text(roster), "Math", "diversity", 3) == roster


# -- generation and augmentation with a model ------------------------------------------------------


def extra_listing(start: int, count: int) -> str:
    romans = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X"]
    return "\n\n".join(
        f"{romans[start + k]}. Strategist {k + 1}\nResponsibilities:\nPlan approach {k + 1}." for k in range(count)
    )


def test_generate_roster_with_mock():
    backend = ScriptedBackend({("roles/law/workflow/3", 0): LAW_WORKFLOW})
    roster = generate_roster("law", "workflow", backend)
    assert roster == shipped("law", "workflow")
    assert "Law domain" in backend.calls[0].user_prompt


def test_augment_new_roles_only():
    base = shipped("law", "workflow")
    backend = ScriptedBackend({("roles/law/workflow/6", 0): extra_listing(3, 3)})
    grown = augment_roster(base, 6, backend)
    assert grown.size == 6
    assert grown.experts[:3] == base.experts
    assert [e.index for e in grown.experts] == list(range(6))


def test_augment_full_listing_keeps_base_verbatim():
    base = shipped("math", "diversity")
    full = serialize_roster_text(base).replace(base.experts[0].responsibility, "reworded") + "\n\n" + extra_listing(3, 7)
    grown = merge_augmentation(base, full, 10)
    assert grown.size == 10
    assert grown.experts[:3] == base.experts


def test_augment_mismatched_head_rejected():
    base = shipped("math", "diversity")
    listing = extra_listing(0, 6)
    with pytest.raises(RoleParseError):
        merge_augmentation(base, listing, 6)


def test_augment_requires_size_three():
    base = shipped("math", "diversity")
    grown = merge_augmentation(base, extra_listing(3, 3), 6)
    with pytest.raises(RoleError):
        augment_roster(grown, 10, ScriptedBackend(default="x"))


# -- files and library ------------------------------------------------------------------------------


def test_role_file_round_trip(tmp_path):
    roster = shipped("finance", "diversity")
    path = tmp_path / role_filename("finance", "diversity", 3)
    path.write_text(dump_role_file(roster, Provenance.SHIPPED))
    assert path.name == "finance_diversity_3.json"
    assert load_role_file(path) == (roster, Provenance.SHIPPED)


def test_library_overlay_and_missing(tmp_path):
    base = shipped("law", "workflow")
    grown = merge_augmentation(base, extra_listing(3, 3), 6)
    (tmp_path / role_filename("law", "workflow", 6)).write_text(dump_role_file(grown, Provenance.AUGMENTED))
    library = RoleLibrary.load(tmp_path)
    assert len(library) == 9
    assert ("law", "workflow", 6) in library
    assert library.provenance[(ExpertGroup.LAW, Paradigm.WORKFLOW, 6)] is Provenance.AUGMENTED
    with pytest.raises(MissingRosterError):
        library.get("math", "workflow", 10)


def test_library_rejects_invalid_roster(tmp_path):
    data = shipped("law", "workflow").to_dict()
    data["experts"][2]["formal_role"] = "Mediator"
    (tmp_path / "law_workflow_3.json").write_text(json.dumps(data))
    with pytest.raises(RoleError, match="coordinator"):
        RoleLibrary.load(tmp_path)


def test_library_save(tmp_path):
    written = RoleLibrary.shipped().save(tmp_path)
    assert len(written) == 8
    assert RoleLibrary().load_dir(tmp_path).entries == RoleLibrary.shipped().entries
