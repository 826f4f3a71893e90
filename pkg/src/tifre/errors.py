"""Exception types shared across the package."""


class TifreError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TifreError):
    """Vector or matrix dimensions are inconsistent."""


class DegenerateVectorError(TifreError):
    """A vector is unusable for cosine computations (zero norm or non-finite)."""


class EmptyInputError(TifreError):
    """An operation received an empty score vector or frame list."""


class PromptParseError(TifreError):
    """No usable prompt could be recovered from chat-endpoint output."""


class LLMError(TifreError):
    """The chat-completion endpoint failed after retries or returned garbage."""


class BackendError(TifreError):
    """An embedding backend is unavailable or failed to produce vectors."""


class ContractViolation(TifreError):
    """A backend returned vectors that violate its declared descriptor."""


class MergeDimensionError(TifreError):
    """Frames grouped for merging do not share pixel dimensions."""


class ToolNotFoundError(TifreError):
    """Required external tool (video decoder) is not on PATH."""


class FrameDecodeError(TifreError):
    """A source frame file could not be decoded."""


class ConfigError(TifreError):
    """Run configuration is invalid or internally inconsistent."""


class ScenarioError(TifreError):
    """A synthetic evaluation scenario is ill-specified."""


class StageError(TifreError):
    """A pipeline stage failed; carries the stage name, cause in __cause__."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
