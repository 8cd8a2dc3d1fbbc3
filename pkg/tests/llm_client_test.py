"""Prompt construction and LLM client tests."""

import json
from unittest.mock import AsyncMock, patch

import freezegun
import pytest

from strategyrl.config import LlmConfig
from strategyrl.const import ENV_DYNAMIC_OBSTACLES, ENV_UNLOCK_PICKUP, LLM_MODE_REMOTE
from strategyrl.error import (
    ConfigError,
    LlmTransportError,
    MissingApiKeyError,
    MockScriptExhaustedError,
    PromptError,
)
from strategyrl.llm_client import (
    LlmEndpoint,
    StrategyClient,
    build_dynamic_prompt,
    build_initial_prompt,
    load_prompt_templates,
    parse_mock_script,
)
from strategyrl.strategy import EMPTY_STRATEGIES
from .conftest import mock_script, read_fixture

API_KEY_VAR = "STRATEGYRL_TEST_API_KEY"


def _completion(content):
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def _remote_client(**kwargs):
    return StrategyClient(LlmEndpoint(mode=LLM_MODE_REMOTE, api_key_env_var=API_KEY_VAR, **kwargs))


def test_initial_prompt_matches_golden(handmade_demo):
    assert build_initial_prompt(ENV_DYNAMIC_OBSTACLES, [handmade_demo]) == read_fixture("initial_prompt.txt")


def test_dynamic_prompt_matches_golden(handmade_demo, handmade_pair, short_strategies):
    prompt = build_dynamic_prompt(ENV_DYNAMIC_OBSTACLES, [handmade_demo], short_strategies, [handmade_pair])
    assert prompt == read_fixture("dynamic_prompt.txt")


def test_dynamic_prompt_starts_with_initial_context(handmade_demo, handmade_pair, short_strategies):
    initial = build_initial_prompt(ENV_DYNAMIC_OBSTACLES, [handmade_demo])
    dynamic = build_dynamic_prompt(ENV_DYNAMIC_OBSTACLES, [handmade_demo], short_strategies, [handmade_pair])
    context = initial.rsplit("\n\n", 1)[0]
    assert dynamic.startswith(context + "\n\n")


def test_dynamic_prompt_with_empty_strategies(handmade_demo, handmade_pair):
    prompt = build_dynamic_prompt(ENV_DYNAMIC_OBSTACLES, [handmade_demo], EMPTY_STRATEGIES, [handmade_pair])
    assert "environment:\n\n(none yet)\n\nAnd in your current iteration" in prompt


def test_prompt_errors(handmade_demo, handmade_pair, short_strategies):
    with pytest.raises(PromptError):
        build_initial_prompt(ENV_DYNAMIC_OBSTACLES, [])
    with pytest.raises(PromptError):
        build_initial_prompt(ENV_UNLOCK_PICKUP, [handmade_demo])
    with pytest.raises(PromptError):
        build_dynamic_prompt(ENV_DYNAMIC_OBSTACLES, [handmade_demo], short_strategies, [])


def test_templates_cover_every_environment():
    templates = load_prompt_templates()
    assert set(templates.env_blurbs) == set(templates.agent_descriptions)
    with pytest.raises(PromptError):
        templates.env_blurb("CrossingS9N1")


def test_parse_mock_script():
    text = mock_script("1. Go:\n  - forward", "garbage") + "\n" + "1. Raw line\\n  - body\n"
    assert parse_mock_script(text) == ["1. Go:\n  - forward", "garbage", "1. Raw line\n  - body"]


def test_mock_client_answers_in_order(tmp_path):
    script = tmp_path / "script.jsonl"
    script.write_text(mock_script("first", "second"))
    client = StrategyClient(LlmEndpoint.from_config(LlmConfig(script_path=str(script))))

    assert client.query("a") == "first"
    assert client.remaining == 1
    assert client.query("b") == "second"
    with pytest.raises(MockScriptExhaustedError):
        client.query("c")
    assert client.call_count == 3
    assert client.prompts == ["a", "b", "c"]


def test_unknown_llm_mode():
    with pytest.raises(ConfigError):
        StrategyClient(LlmEndpoint(mode="psychic"))


@freezegun.freeze_time("2022-02-22T12:20:22Z")
def test_audit_log(tmp_path):
    audit = tmp_path / "audit.jsonl"
    client = StrategyClient(LlmEndpoint(), audit_path=audit, script=["only answer"])
    client.query("prompt one")
    with pytest.raises(MockScriptExhaustedError):
        client.query("prompt two")

    records = [json.loads(line) for line in audit.read_text().splitlines()]
    assert records[0] == {
        "timestamp": "2022-02-22T12:20:22+00:00",
        "mode": "mock",
        "prompt": "prompt one",
        "response": "only answer",
        "error": None,
    }
    assert records[1]["response"] is None
    assert "exhausted" in records[1]["error"]


async def test_remote_query(monkeypatch):
    monkeypatch.setenv(API_KEY_VAR, "sk-test")
    client = _remote_client(model_name="test-model", temperature=0.0)
    with patch.object(StrategyClient, "_async_post", new=AsyncMock(return_value=_completion("1. Go"))) as post:
        assert await client.async_query("hello") == "1. Go"

    _, url, headers, payload = post.call_args.args
    assert url == "https://api.openai.com/v1/chat/completions"
    assert headers == {"Authorization": "Bearer sk-test"}
    assert payload == {"model": "test-model", "messages": [{"role": "user", "content": "hello"}], "temperature": 0.0}


async def test_remote_query_retries_with_backoff(monkeypatch):
    monkeypatch.setenv(API_KEY_VAR, "sk-test")
    client = _remote_client(max_retries=3, backoff_base=0.5)
    responses = [LlmTransportError("HTTP 502"), LlmTransportError("HTTP 502"), _completion("ok")]
    with patch.object(StrategyClient, "_async_post", new=AsyncMock(side_effect=responses)), patch(
        "strategyrl.llm_client.asyncio.sleep", new=AsyncMock()
    ) as sleep:
        assert await client.async_query("hello") == "ok"
    assert [c.args[0] for c in sleep.call_args_list] == [0.5, 1.0]


async def test_remote_query_gives_up(monkeypatch):
    monkeypatch.setenv(API_KEY_VAR, "sk-test")
    client = _remote_client(max_retries=1)
    with patch.object(
        StrategyClient, "_async_post", new=AsyncMock(side_effect=LlmTransportError("HTTP 500"))
    ) as post, patch("strategyrl.llm_client.asyncio.sleep", new=AsyncMock()):
        with pytest.raises(LlmTransportError):
            await client.async_query("hello")
    assert post.call_count == 2
    assert client.call_count == 1


async def test_malformed_completion(monkeypatch):
    monkeypatch.setenv(API_KEY_VAR, "sk-test")
    client = _remote_client()
    with patch.object(StrategyClient, "_async_post", new=AsyncMock(return_value={"choices": []})):
        with pytest.raises(LlmTransportError):
            await client.async_query("hello")


async def test_missing_api_key(monkeypatch):
    monkeypatch.delenv(API_KEY_VAR, raising=False)
    with pytest.raises(MissingApiKeyError):
        await _remote_client().async_query("hello")
