from typing import Optional


class StrategyRLError(Exception):
    pass


class ConfigError(StrategyRLError):
    pass


class EnvError(StrategyRLError):
    pass


class UnknownEnvKindError(EnvError):
    pass


class EpisodeFinishedError(EnvError):
    pass


class UnsolvableLayoutError(EnvError):
    pass


class RewardError(StrategyRLError):
    pass


class TrajectoryError(StrategyRLError):
    pass


class DemoRecordingError(StrategyRLError):
    pass


class DemoFormatError(StrategyRLError):
    """Malformed line in a demonstration or buffer file."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ActionSetError(StrategyRLError):
    pass


class StrategyParseError(StrategyRLError):
    """No numbered strategy items could be parsed."""

    def __init__(self, raw_text: str, message: Optional[str] = None):
        super().__init__(message or "no numbered strategy items found")
        self.raw_text = raw_text


class PromptError(StrategyRLError):
    pass


class LlmError(StrategyRLError):
    pass


class LlmTransportError(LlmError):
    pass


class MockScriptExhaustedError(LlmError):
    pass


class MissingApiKeyError(LlmError):
    pass


class SelectionError(StrategyRLError):
    pass


class CurveError(StrategyRLError):
    pass


class CheckpointError(StrategyRLError):
    pass
