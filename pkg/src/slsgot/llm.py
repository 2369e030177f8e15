"""Optional LLM-backed g and f over an OpenAI-compatible chat-completions endpoint.

Nothing else in the package imports this module; synthetic oracles cover the
whole test suite.  Play-time answers never reach the model: the splits
produced while generating candidates go through the shared OracleCache.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import httpx

from .core import ItemDomain, ItemSet, Question, QuestionBank

SETTINGS = ("20q-even", "20q-natural", "md", "ts")
NOUNS = {"20q-even": "items", "20q-natural": "items", "md": "diseases", "ts": "car faults"}

_GEN_FILES = {
    ("20q-even", False): "gen_20q_even.txt",
    ("20q-natural", False): "gen_20q_natural.txt",
    ("md", False): "gen_md.txt",
    ("ts", False): "gen_ts.txt",
    ("20q-even", True): "gen_20q_weighted.txt",
    ("20q-natural", True): "gen_20q_weighted.txt",
    ("md", True): "gen_md_weighted.txt",
    ("ts", True): "gen_ts_weighted.txt",
}
_CHOOSE_FILES = {
    ("20q-even", False): "choose_20q.txt",
    ("20q-natural", False): "choose_20q.txt",
    ("20q-even", True): "choose_20q_weighted.txt",
    ("20q-natural", True): "choose_20q_weighted.txt",
    ("md", False): "choose_md.txt",
    ("ts", False): "choose_ts.txt",
}

# appended so replies can be parsed mechanically
QUESTIONS_FORMAT = "Reply with a JSON list of exactly {m} question strings and nothing else."
ANSWER_FORMAT = (
    'Reply with a JSON object {{"yes": [...], "no": [...]}} that lists every one of the {noun} above exactly once.'
)


class LlmError(RuntimeError):
    pass


class ParseError(ValueError):
    pass


def template(name: str) -> str:
    return resources.files("slsgot").joinpath("prompts", name).read_text()


@dataclass(frozen=True)
class LlmConfig:
    base_url: str
    model: str
    api_key: str | None = None
    temperature: float = 1.0
    max_retries: int = 5
    timeout: float = 60.0
    system_prompt: str | None = None

    @classmethod
    def from_env(cls, **overrides) -> LlmConfig:
        base = os.environ.get("SLSGOT_LLM_BASE_URL")
        model = os.environ.get("SLSGOT_LLM_MODEL")
        if not base or not model:
            raise LlmError("set SLSGOT_LLM_BASE_URL and SLSGOT_LLM_MODEL")
        return cls(base_url=base, model=model, api_key=os.environ.get("SLSGOT_LLM_API_KEY"), **overrides)


class ChatClient:
    def __init__(self, config: LlmConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        headers = {"Authorization": f"Bearer {config.api_key}"} if config.api_key else {}
        self._http = httpx.Client(
            base_url=config.base_url.rstrip("/"), headers=headers, timeout=config.timeout, transport=transport
        )
        self.calls = 0

    def complete(self, prompt: str) -> str:
        messages = []
        if self.config.system_prompt:
            messages.append({"role": "system", "content": self.config.system_prompt})
        messages.append({"role": "user", "content": prompt})
        body = {"model": self.config.model, "messages": messages, "temperature": self.config.temperature}
        self.calls += 1
        try:
            resp = self._http.post("/chat/completions", json=body)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise LlmError(f"chat completion failed: {exc}") from exc

    def close(self) -> None:
        self._http.close()


def _items_literal(names: Sequence[str], weights: Sequence[float] | None) -> str:
    if weights is None:
        return "[" + ", ".join(repr(n) for n in names) + "]"
    return "{" + ", ".join(f"{n!r}: {w:g}" for n, w in zip(names, weights)) + "}"


def generation_prompt(setting: str, names: Sequence[str], m: int, weights: Sequence[float] | None = None) -> str:
    key = (setting, weights is not None)
    if key not in _GEN_FILES:
        raise ValueError(f"unknown setting {setting!r}")
    body = template(_GEN_FILES[key]).format(items=_items_literal(names, weights), m=m)
    return body + QUESTIONS_FORMAT.format(m=m)


def choose_prompt(setting: str, names: Sequence[str], questions: Sequence[str], weights=None) -> str:
    key = (setting, weights is not None)
    if key not in _CHOOSE_FILES:
        raise ValueError(f"no choosing template for {key}")
    qdict = "{" + ", ".join(f"{i}: {q!r}" for i, q in enumerate(questions)) + "}"
    return template(_CHOOSE_FILES[key]).format(items=_items_literal(names, weights), question=qdict)


def answer_prompt(setting: str, names: Sequence[str], question: str) -> str:
    noun = NOUNS[setting]
    body = template("answer.txt").format(noun=noun, items=_items_literal(names, None), question=question)
    return body + ANSWER_FORMAT.format(noun=noun)


_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.S)


def _json_fragment(text: str, open_ch: str, close_ch: str):
    fenced = _FENCE.search(text)
    if fenced:
        text = fenced.group(1)
    start, end = text.find(open_ch), text.rfind(close_ch)
    if start < 0 or end <= start:
        raise ParseError("no JSON found in reply")
    try:
        return json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc)) from exc


def parse_questions(text: str, m: int) -> list[str]:
    data = _json_fragment(text, "[", "]")
    if not isinstance(data, list):
        raise ParseError("expected a JSON list")
    qs = [q.strip() for q in data if isinstance(q, str) and q.strip()]
    if not qs:
        raise ParseError("no question strings in reply")
    return qs[:m]


def parse_classification(text: str, names: Sequence[str]) -> set[str]:
    """Names classified "yes"; the reply must partition ``names`` exactly."""
    data = _json_fragment(text, "{", "}")
    if not isinstance(data, dict):
        raise ParseError("expected a JSON object")
    yes = [str(x) for x in data.get("yes", [])]
    no = [str(x) for x in data.get("no", [])]
    both = yes + no
    if len(both) != len(set(both)):
        raise ParseError("an item is classified twice")
    if set(both) != set(names):
        missing = sorted(set(names) - set(both))
        extra = sorted(set(both) - set(names))
        raise ParseError(f"classification mismatch: missing {missing}, unknown {extra}")
    return set(yes)


class LlmAnswerer:
    """f: splits S by asking the model to classify every live item."""

    def __init__(self, client: ChatClient, domain: ItemDomain, setting: str = "20q-natural"):
        self.client = client
        self.domain = domain
        self.setting = setting
        self._known: dict[tuple[int, int], tuple[ItemSet, ItemSet]] = {}

    def classify(self, S: ItemSet, text: str) -> tuple[ItemSet, ItemSet]:
        names = [self.domain.names[i] for i in S]
        prompt = answer_prompt(self.setting, names, text)
        last: Exception | None = None
        for _ in range(self.client.config.max_retries + 1):
            try:
                yes_names = parse_classification(self.client.complete(prompt), names)
            except ParseError as exc:
                last = exc
                continue
            yes = self.domain.subset(yes_names)
            return yes, S - yes
        raise LlmError(f"classification retries exhausted: {last}")

    def remember(self, S: ItemSet, q: Question, value: tuple[ItemSet, ItemSet]) -> None:
        self._known[(S.mask, q.id)] = value

    def split(self, S: ItemSet, q: Question) -> tuple[ItemSet, ItemSet]:
        hit = self._known.get((S.mask, q.id))
        if hit is not None:
            return hit
        if q.text is None:
            raise LlmError(f"question {q.id} has no text to classify")
        return self.classify(S, q.text)


def llm_f(S: ItemSet, question_text: str, answerer: LlmAnswerer) -> tuple[ItemSet, ItemSet]:
    return answerer.classify(S, question_text)


class LlmQuestionGenerator:
    """g: asks for m questions at S, then materialises each via one classification call."""

    def __init__(
        self,
        client: ChatClient,
        bank: QuestionBank,
        answerer: LlmAnswerer,
        setting: str = "20q-natural",
        weighted: bool = False,
    ):
        if setting not in SETTINGS:
            raise ValueError(f"unknown setting {setting!r}")
        self.client = client
        self.bank = bank
        self.answerer = answerer
        self.setting = setting
        self.weighted = weighted

    def generate(self, S: ItemSet, m: int, attempt: int = 0) -> list[Question]:
        domain = self.answerer.domain
        names = [domain.names[i] for i in S]
        weights = [domain.weights[i] for i in S] if self.weighted else None
        prompt = generation_prompt(self.setting, names, m, weights)
        texts, last = None, None
        for _ in range(self.client.config.max_retries + 1):
            try:
                texts = parse_questions(self.client.complete(prompt), m)
                break
            except ParseError as exc:
                last = exc
        if texts is None:
            raise LlmError(f"question generation retries exhausted: {last}")
        out = []
        for text in texts:
            yes, no = self.answerer.classify(S, text)
            q = self.bank.intern(yes, text)
            self.answerer.remember(S, q, (yes, no))
            out.append(q)
        return out


def llm_g(S: ItemSet, m: int, generator: LlmQuestionGenerator, attempt: int = 0) -> list[Question]:
    return generator.generate(S, m, attempt)


def llm_oracle(domain: ItemDomain, config: LlmConfig, setting: str = "20q-natural", m: int = 3, transport=None):
    """A GameOracle whose g and f are backed by the model."""
    from .oracles import GameOracle

    client = ChatClient(config, transport=transport)
    bank = QuestionBank()
    answerer = LlmAnswerer(client, domain, setting)
    gen = LlmQuestionGenerator(client, bank, answerer, setting, weighted=domain.weighted)
    return GameOracle(domain, gen, bank, answerer=answerer, m=m, max_resamples=config.max_retries, source="llm")
