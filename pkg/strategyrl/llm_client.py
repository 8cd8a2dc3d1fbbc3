"""Strategy-generating LLM: prompt construction and querying."""

import asyncio
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence, Union

import aiohttp
import pytz

from .config import LlmConfig
from .const import (
    DEFAULT_API_KEY_ENV_VAR,
    DEFAULT_BACKOFF_BASE,
    DEFAULT_BASE_URL,
    DEFAULT_MAX_RETRIES,
    DEFAULT_MODEL_NAME,
    DEFAULT_TEMPERATURE,
    DEFAULT_TIMEOUT,
    EMPTY_STRATEGIES_SENTINEL,
    ENV_NAMES,
    LLM_MODE_MOCK,
    LLM_MODE_REMOTE,
)
from .error import ConfigError, LlmError, LlmTransportError, MissingApiKeyError, MockScriptExhaustedError, PromptError
from .gridworld import Action
from .strategy import StrategyList, format_for_prompt
from .trajectory import Demonstration, PseudoState, render_pseudo_state, render_step_lines

_LOGGER = logging.getLogger(__name__)

PROMPTS_PATH = Path(__file__).parent / "prompts.json"

WorstPair = tuple[PseudoState, Action, float]


@dataclass(frozen=True)
class PromptTemplates:
    env_blurbs: dict[str, str]
    agent_descriptions: dict[str, str]
    demonstrations_intro: str
    initial_query_suffix: str
    current_strategies_intro: str
    worst_pairs_intro: str
    dynamic_query_suffix: str

    def env_blurb(self, env_kind: str) -> str:
        try:
            return self.env_blurbs[env_kind]
        except KeyError as err:
            raise PromptError(f"No environment description for {env_kind}") from err

    def agent_description(self, env_kind: str) -> str:
        try:
            return self.agent_descriptions[env_kind]
        except KeyError as err:
            raise PromptError(f"No agent description for {env_kind}") from err


def load_prompt_templates(path: Union[str, Path, None] = None) -> PromptTemplates:
    with open(path or PROMPTS_PATH) as promptfile:
        data = json.load(promptfile)
    data.pop("title", None)
    return PromptTemplates(**data)


def render_demonstrations(demos: Sequence[Demonstration]) -> str:
    blocks = []
    for number, demo in enumerate(demos, start=1):
        lines = [f"Trajectory {number}:", f"Goal of the agent: {demo.goal}"]
        lines.extend(render_step_lines(demo.steps))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def render_worst_pairs(worst_pairs: Sequence[WorstPair]) -> str:
    blocks = []
    for number, (state, action, advantage) in enumerate(worst_pairs, start=1):
        lines = [f"State-action pair {number}:", f"Goal of the agent: {state.goal}"]
        lines.extend(render_pseudo_state(state))
        lines.append(f"Chosen action: {action.name}")
        lines.append(f"Advantage estimate: {advantage:.4f}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _check_demos(env_kind: str, demos: Sequence[Demonstration]) -> None:
    if not demos:
        raise PromptError("At least one demonstration is required")
    mismatched = sorted({demo.env_kind for demo in demos if demo.env_kind != env_kind})
    if mismatched:
        raise PromptError(f"Demonstrations from {mismatched} can't describe {env_kind}")


def build_initial_prompt(
    env_kind: str, demos: Sequence[Demonstration], templates: Optional[PromptTemplates] = None
) -> str:
    """P_initial: environment description, expert demonstrations, strategy query."""
    templates = templates or load_prompt_templates()
    _check_demos(env_kind, demos)
    fields = {"env_name": ENV_NAMES[env_kind], "n_demos": len(demos)}
    sections = [
        templates.env_blurb(env_kind),
        templates.demonstrations_intro.format(**fields),
        render_demonstrations(demos),
        templates.initial_query_suffix.format(**fields),
    ]
    return "\n\n".join(sections)


def build_dynamic_prompt(
    env_kind: str,
    demos: Sequence[Demonstration],
    current_strategies: StrategyList,
    worst_pairs: Sequence[WorstPair],
    templates: Optional[PromptTemplates] = None,
) -> str:
    """P_dynamic: P_initial's first two parts, the current strategies, the K lowest-advantage pairs, update query."""
    templates = templates or load_prompt_templates()
    _check_demos(env_kind, demos)
    if not worst_pairs:
        raise PromptError("At least one low-advantage state-action pair is required")
    fields = {"env_name": ENV_NAMES[env_kind], "n_demos": len(demos), "k": len(worst_pairs)}
    sections = [
        templates.env_blurb(env_kind),
        templates.demonstrations_intro.format(**fields),
        render_demonstrations(demos),
        templates.current_strategies_intro.format(**fields),
        format_for_prompt(current_strategies) or EMPTY_STRATEGIES_SENTINEL,
        templates.worst_pairs_intro.format(**fields),
        render_worst_pairs(worst_pairs),
        templates.dynamic_query_suffix.format(**fields),
    ]
    return "\n\n".join(sections)


@dataclass(frozen=True)
class LlmEndpoint:
    mode: str = LLM_MODE_MOCK
    base_url: str = DEFAULT_BASE_URL
    model_name: str = DEFAULT_MODEL_NAME
    api_key_env_var: str = DEFAULT_API_KEY_ENV_VAR
    timeout: float = DEFAULT_TIMEOUT
    max_retries: int = DEFAULT_MAX_RETRIES
    temperature: float = DEFAULT_TEMPERATURE
    script_path: Optional[str] = None
    backoff_base: float = DEFAULT_BACKOFF_BASE

    @classmethod
    def from_config(cls, config: LlmConfig) -> "LlmEndpoint":
        return cls(
            mode=config.mode,
            base_url=config.base_url,
            model_name=config.model_name,
            api_key_env_var=config.api_key_env_var,
            timeout=config.timeout,
            max_retries=config.max_retries,
            temperature=config.temperature,
            script_path=config.script_path,
        )


def parse_mock_script(text: str) -> list[str]:
    """One response per non-empty line: a JSON string literal, or raw text with \\n escapes."""
    responses = []
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            value = json.loads(line)
        except json.JSONDecodeError:
            value = None
        if isinstance(value, str):
            responses.append(value)
        else:
            responses.append(line.replace("\\n", "\n"))
    return responses


def load_mock_script(path: Union[str, Path]) -> list[str]:
    with open(path) as scriptfile:
        return parse_mock_script(scriptfile.read())


class StrategyClient:
    """
    Queries the strategy-generating LLM.

    Every call, failed or not, is counted and appended to the audit log when one is configured.
    """

    def __init__(
        self,
        endpoint: LlmEndpoint,
        audit_path: Union[str, Path, None] = None,
        script: Optional[Sequence[str]] = None,
    ):
        self.endpoint = endpoint
        self.audit_path = Path(audit_path) if audit_path is not None else None
        self.call_count = 0
        self.prompts: list[str] = []
        self._script: list[str] = []
        self._script_pos = 0

        if endpoint.mode == LLM_MODE_MOCK:
            if script is not None:
                self._script = list(script)
            elif endpoint.script_path is not None:
                self._script = load_mock_script(endpoint.script_path)
        elif endpoint.mode != LLM_MODE_REMOTE:
            raise ConfigError(f"Unknown LLM mode {endpoint.mode!r}")

    @property
    def remaining(self) -> int:
        """Unused mock responses."""
        return len(self._script) - self._script_pos

    def _audit(self, prompt: str, response: Optional[str], error: Optional[str]) -> None:
        if self.audit_path is None:
            return
        record = {
            "timestamp": datetime.now(pytz.utc).isoformat(),
            "mode": self.endpoint.mode,
            "prompt": prompt,
            "response": response,
            "error": error,
        }
        with open(self.audit_path, "a") as auditfile:
            auditfile.write(json.dumps(record, sort_keys=True) + "\n")

    def _next_mock(self) -> str:
        if self._script_pos >= len(self._script):
            raise MockScriptExhaustedError(f"Mock script exhausted after {len(self._script)} responses")
        response = self._script[self._script_pos]
        self._script_pos += 1
        return response

    async def _async_post(self, session: aiohttp.ClientSession, url: str, headers: dict, payload: dict) -> dict:
        async with session.post(url, json=payload, headers=headers) as response:
            if response.status >= 300:
                body = await response.text()
                raise LlmTransportError(f"HTTP {response.status} from {url}: {body[:200]}")
            return await response.json()

    async def _async_remote(self, prompt: str) -> str:
        endpoint = self.endpoint
        api_key = os.environ.get(endpoint.api_key_env_var)
        if not api_key:
            raise MissingApiKeyError(f"Environment variable {endpoint.api_key_env_var} is not set")

        url = endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {api_key}"}
        payload = {
            "model": endpoint.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": endpoint.temperature,
        }
        timeout = aiohttp.ClientTimeout(total=endpoint.timeout)
        last_error: Optional[Exception] = None
        async with aiohttp.ClientSession(timeout=timeout) as session:
            for attempt in range(endpoint.max_retries + 1):
                try:
                    data = await self._async_post(session, url, headers, payload)
                    return data["choices"][0]["message"]["content"]
                except (aiohttp.ClientError, asyncio.TimeoutError, LlmTransportError) as err:
                    last_error = err
                    _LOGGER.warning("LLM request attempt %d/%d failed: %s", attempt + 1, endpoint.max_retries + 1, err)
                except (KeyError, IndexError, TypeError) as err:
                    raise LlmTransportError(f"Unexpected chat-completion response: {err}") from err
                if attempt < endpoint.max_retries:
                    await asyncio.sleep(endpoint.backoff_base * 2**attempt)
        raise LlmTransportError(f"Request failed after {endpoint.max_retries + 1} attempts: {last_error}")

    async def async_query(self, prompt: str) -> str:
        self.call_count += 1
        self.prompts.append(prompt)
        try:
            if self.endpoint.mode == LLM_MODE_MOCK:
                response = self._next_mock()
            else:
                response = await self._async_remote(prompt)
        except LlmError as err:
            self._audit(prompt, None, str(err))
            raise
        self._audit(prompt, response, None)
        _LOGGER.debug("LLM call %d returned %d characters", self.call_count, len(response))
        return response

    def query(self, prompt: str) -> str:
        """Blocking query."""
        return asyncio.run(self.async_query(prompt))
