"""Strategy list parsing and formatting tests."""

import pytest

from strategyrl.error import StrategyParseError
from strategyrl.strategy import (
    EMPTY_STRATEGIES,
    PROVENANCE_INITIAL,
    StrategyItem,
    StrategyList,
    format_for_prompt,
    parse_strategy_list,
    provenance_for_epoch,
)


def test_parse_initial_response(initial_strategies_text):
    strategies = parse_strategy_list(initial_strategies_text)
    assert len(strategies) == 10
    assert strategies.items[0].title == "Advance when clear and safe"
    assert strategies.items[0].body.startswith("The agent should move forward when there is no immediate obstacle")
    assert strategies.items[2].title == "Avoid obstacles by turning instead of moving forward"
    assert strategies.items[9].title == (
        "Move forward when the goal is directly ahead, even if other obstacles are nearby"
    )
    # the closing sentence is not part of the last item
    assert "Following these strategies" not in strategies.items[9].body


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1. Go forward: when nothing is ahead", [("Go forward", "when nothing is ahead")]),
        ("1) Turn early\n   avoid walls", [("Turn early", "avoid walls")]),
        ("1. __Pick up keys__ first\n2. Open doors:", [("Pick up keys", "first"), ("Open doors", "")]),
        ("1. Watch:\n  - the balls\n  - and the walls", [("Watch", "the balls and the walls")]),
    ],
)
def test_parse_variants(text, expected):
    assert parse_strategy_list(text) == StrategyList.of(expected)


@pytest.mark.parametrize("text", ["", "I am not sure what to do.", "- a bullet\n- another bullet", None])
def test_parse_garbage(text):
    with pytest.raises(StrategyParseError) as err:
        parse_strategy_list(text)
    assert err.value.raw_text == text


def test_format_for_prompt(short_strategies):
    assert format_for_prompt(short_strategies) == "1. Avoid obstacles:\n  - Turn when a ball is directly in front."
    assert short_strategies.text == format_for_prompt(short_strategies)
    assert format_for_prompt(StrategyList.of([("Keep moving", "")])) == "1. Keep moving:"
    assert format_for_prompt(EMPTY_STRATEGIES) == ""


def test_formatted_list_parses_back(initial_strategies_text):
    strategies = parse_strategy_list(initial_strategies_text)
    assert parse_strategy_list(format_for_prompt(strategies)) == strategies


def test_equality_ignores_bookkeeping(short_strategies):
    revised = short_strategies.revised(7, provenance_for_epoch(3))
    assert revised == short_strategies
    assert revised.version == 7
    assert revised.provenance == "dynamic_epoch(3)"
    assert short_strategies != EMPTY_STRATEGIES
    assert StrategyList((StrategyItem("a"),)) != StrategyList((StrategyItem("b"),))


def test_dict_round_trip(short_strategies):
    strategies = short_strategies.revised(2, PROVENANCE_INITIAL)
    loaded = StrategyList.from_dict(strategies.to_dict())
    assert loaded == strategies
    assert (loaded.version, loaded.provenance) == (2, PROVENANCE_INITIAL)
