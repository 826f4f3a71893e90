"""Turn a user question into CLIP-style text prompts.

The primary route sends the question through a chat-completion endpoint
using a fixed rewrite instruction (REWRITE_TEMPLATE) and parses the reply
into prompts of the form "a photo of ...". A deterministic rule-based
fallback covers offline runs and endpoint failures.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import PromptParseError

# Instruction sent ahead of the user question. Byte-exact constant: the
# golden test pins it, and RewriteRequest builds on it verbatim.
REWRITE_TEMPLATE = (
    'Generate a descriptive sentence starting with "a photo of" based solely '
    'on the key nouns from the following question and its options. Exclude '
    'words like "video," "order," and similar terms. The sentence should be '
    "concise and describe a single frame image for CLIP's image search.\n"
    "Question:"
)

PROMPT_PREFIX = "a photo of"

# Upper bound on prompts kept from any source; bounds text-embedding cost.
MAX_PROMPTS = 8

PROMPT_SOURCES = ("llm", "fallback", "user-supplied")


def _normalize_ws(s: str) -> str:
    return " ".join(s.split())


@dataclass(frozen=True)
class Question:
    """User question, optionally with multiple-choice answer options."""

    text: str
    options: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("question text is empty")
        object.__setattr__(self, "options", tuple(self.options))
        for i, opt in enumerate(self.options):
            if not opt.strip():
                raise ValueError(f"option {i} is empty")


@dataclass(frozen=True)
class PromptSet:
    """One or more CLIP-style prompts plus where they came from.

    Invariants enforced here: at least one prompt, every prompt starts
    with "a photo of" (case-insensitive), and no two prompts are equal
    after whitespace normalization.
    """

    prompts: tuple[str, ...]
    source: str

    def __post_init__(self):
        object.__setattr__(self, "prompts", tuple(self.prompts))
        if self.source not in PROMPT_SOURCES:
            raise ValueError(f"unknown prompt source {self.source!r}")
        if len(self.prompts) < 1:
            raise PromptParseError("prompt set is empty")
        seen = set()
        for p in self.prompts:
            if not p.strip():
                raise PromptParseError("empty prompt in prompt set")
            if not p.lower().startswith(PROMPT_PREFIX):
                raise PromptParseError(
                    f"prompt does not start with {PROMPT_PREFIX!r}: {p!r}"
                )
            key = _normalize_ws(p)
            if key in seen:
                raise PromptParseError(f"duplicate prompt: {p!r}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.prompts)


@dataclass(frozen=True)
class RewriteRequest:
    """Payload for one chat-completion call."""

    text: str
    model_name: str
    temperature: float
    max_tokens: int


@dataclass(frozen=True)
class LlmConfig:
    """Chat-completion endpoint configuration.

    The API key is read from the environment only (never a flag), so it
    cannot leak into manifests or shell history.
    """

    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    max_tokens: int = 256
    timeout: float = 30.0
    retries: int = 2
    api_key_env: str = "TIFRE_LLM_API_KEY"


def build_rewrite_request(q: Question, cfg: LlmConfig) -> RewriteRequest:
    """Assemble the chat request: template, then question, then options one per line."""
    parts = [REWRITE_TEMPLATE, q.text]
    parts.extend(q.options)
    return RewriteRequest(
        text="\n".join(parts),
        model_name=cfg.model,
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
    )


# Leading list markers: "1.", "2)", "(3)", "-", "*", bullets.
_LIST_MARKER = re.compile(r"^\s*(?:[-*•·]+|\(?\d+[.)\]]?)\s+")
_QUOTE_CHARS = "\"'“”‘’`"
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def parse_llm_output(raw: str) -> PromptSet:
    """Extract CLIP-style prompts from free-form chat output.

    Splits on newlines and sentence boundaries, strips list markers and
    surrounding quotes, keeps segments starting with "a photo of"
    (case-insensitive), and dedupes after whitespace normalization. At
    most MAX_PROMPTS are kept, in order of appearance.

    Raises PromptParseError when nothing usable is found; the caller is
    expected to fall back to fallback_extract_prompts.
    """
    kept: list[str] = []
    seen: set[str] = set()
    for line in raw.splitlines():
        line = _LIST_MARKER.sub("", line, count=1)
        for seg in _SENTENCE_SPLIT.split(line):
            seg = _LIST_MARKER.sub("", seg, count=1)
            seg = _normalize_ws(seg.strip().strip(_QUOTE_CHARS).strip())
            if not seg or not seg.lower().startswith(PROMPT_PREFIX):
                continue
            if seg in seen:
                continue
            seen.add(seg)
            kept.append(seg)
            if len(kept) >= MAX_PROMPTS:
                break
        if len(kept) >= MAX_PROMPTS:
            break
    if not kept:
        raise PromptParseError(f"no {PROMPT_PREFIX!r} prompt found in endpoint output")
    return PromptSet(tuple(kept), source="llm")


def render_prompts(ps: PromptSet) -> str:
    """Inverse of parse_llm_output for well-formed prompt lists (one per line)."""
    return "\n".join(ps.prompts)


# Function words plus the filler terms the rewrite instruction excludes
# ("video", "order" and similar); candidates are what survives.
_STOPWORDS = frozenset(
    """
    a about above after again all also am an and any are as at be because been
    before being below between both but by can could did do does doing down
    during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just many me
    more most much my myself no nor not now of off on once only or other our
    ours ourselves out over own same she should so some such than that the
    their theirs them themselves then there these they this those through to
    too under until up very was we were what when where which while who whom
    why will with would you your yours yourself yourselves
    video videos clip clips order sequence frame frames image images photo
    photos picture pictures scene scenes shot shots footage
    appear appears appeared appearing happen happens happened happening
    show shows showed shown showing see seen seeing visible
    first second third last next begin beginning start starts starting
    end ends ending times
    """.split()
)

_WORD = re.compile(r"[a-z][a-z'-]*")

GENERIC_PROMPT = "a photo of the main subject"


def _article(noun: str) -> str:
    return "an" if noun[:1].lower() in "aeiou" else "a"


def fallback_extract_prompts(q: Question) -> PromptSet:
    """Rule-based offline substitute for the chat-endpoint rewrite.

    Candidate subjects are the question's non-stopword tokens (lowercased,
    surface forms kept as-is, no stemming) followed by the option strings.
    Each becomes "a photo of a <subject>" with a/an chosen by leading
    vowel. Deterministic; never fails on a valid question: with no
    candidates it emits a single generic prompt.
    """
    candidates: list[str] = []
    seen: set[str] = set()
    for tok in _WORD.findall(q.text.lower()):
        if tok in _STOPWORDS or tok in seen:
            continue
        seen.add(tok)
        candidates.append(tok)
    for opt in q.options:
        phrase = _normalize_ws(opt.lower())
        if phrase and phrase not in seen:
            seen.add(phrase)
            candidates.append(phrase)
    prompts = [f"a photo of {_article(c)} {c}" for c in candidates[:MAX_PROMPTS]]
    if not prompts:
        prompts = [GENERIC_PROMPT]
    return PromptSet(tuple(prompts), source="fallback")
