"""Chat-completion clients for explanation generation and density rating.

Two interchangeable implementations: an HTTP client speaking the common
chat-completions JSON shape (endpoint, model, and key come from environment
variables), and a deterministic template stub so the whole pipeline and its
tests run offline. Requests carry an expected-format tag so the stub knows
whether to produce explanation text or a JSON rating body.
"""

from __future__ import annotations

import json
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

__all__ = [
    "EXPERT_SYSTEM_PROMPT",
    "DENSITY_RUBRIC_PROMPT",
    "LlmRequest",
    "LlmResponse",
    "LlmError",
    "HttpChatClient",
    "TemplateStubClient",
    "client_from_env",
]

ENV_BASE_URL = "ADIFF_LLM_BASE_URL"
ENV_MODEL = "ADIFF_LLM_MODEL"
ENV_API_KEY = "ADIFF_LLM_API_KEY"

EXPERT_SYSTEM_PROMPT = (
    "You are a helpful assistant with expert knowledge about audio, acoustics, and "
    "psychoacoustics. You study audio, which is the study of sound and its properties. "
    "You study acoustics, which revolve around the generation, propagation, and reception "
    "of sound waves. You study Psychology which posits that a sound is a complex stimulus "
    "that encompasses a vast range of acoustic properties involving aspects of cognition, "
    "psychoacoustics, and psychomechanics. Your task is to perform audio captioning which "
    "consists of describing audio content using natural language. To describe the acoustic "
    "content, you utilize words related to their acoustic properties, such as their semantic "
    "relations, their spectro-temporal characteristics, frequency, loudness, duration, "
    "materials, interactions, and sound sources."
)

DENSITY_RUBRIC_PROMPT = (
    "You are a helpful assistant with expert knowledge about audio, acoustics, and "
    "psychoacoustics. You study audio, which is the study of sound and its properties. "
    "You study acoustics, which revolve around the generation, propagation, and reception "
    "of sound waves. You study Psychology which posits that a sound is a complex stimulus "
    "that encompasses a vast range of acoustic properties involving aspects of cognition, "
    "psychoacoustics, and psychomechanics. Your task is to rate the difference explanation "
    "between the two audios and provide a score for how detailed and granular is the audio "
    "difference explanation. Pay attention to differences in terms of audio events (dog "
    "barking vs cat meowing), sound sources (musical instrument, human voice), acoustic "
    "scene (park vs living room), signal characteristics (frequency, pitch, loudness, etc) "
    "emotion response (listening to the audio invokes a sense of happiness, fear, in you) "
    "and any other difference using world-knowledge or using deductive reasoning. The score "
    "can take the value of 1,2,3,4, and 5. The score of 1 (poor) indicates the explanation "
    "is very vague, lacking detail and specificity. The score of 2 (fair) indicates the "
    "explanation provides some detail but is generally too broad. The score of 3 (good) "
    "indicates the explanation is moderately detailed, covering key aspects but missing "
    "finer points. The score of 4 (Very Good) indicates the explanation is detailed, "
    "covering most aspects with good specificity. 5 (Excellent) the explanation is highly "
    "detailed, thoroughly covering all relevant aspects with precise specificity. Return "
    'your rating as a JSON with the key "score".'
)


class LlmError(RuntimeError):
    """Client failure after retries; carries the request for replay."""

    def __init__(self, message: str, request: "LlmRequest | None" = None):
        super().__init__(message)
        self.request = request


@dataclass(frozen=True)
class LlmRequest:
    system: str
    user: str
    expect: str = "text"  # "text" | "json-score"


@dataclass
class LlmResponse:
    text: str
    latency: float = 0.0
    payload: dict | None = None


class HttpChatClient:
    """POSTs chat-completion requests to an OpenAI-style endpoint."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str = "",
        retries: int = 3,
        timeout: float = 60.0,
        backoff: float = 1.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff

    def complete(self, request: LlmRequest) -> LlmResponse:
        body = json.dumps(
            {
                "model": self.model,
                "messages": [
                    {"role": "system", "content": request.system},
                    {"role": "user", "content": request.user},
                ],
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_err: Exception | None = None
        for attempt in range(self.retries):
            start = time.monotonic()
            try:
                req = urllib.request.Request(
                    f"{self.base_url}/chat/completions", data=body, headers=headers
                )
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
                text = payload["choices"][0]["message"]["content"]
                return LlmResponse(text, time.monotonic() - start, payload)
            except (urllib.error.URLError, KeyError, json.JSONDecodeError, TimeoutError) as e:
                last_err = e
                time.sleep(self.backoff**attempt * 0.1)
        raise LlmError(f"chat endpoint failed after {self.retries} attempts: {last_err}", request)


_CAPTION_RE = re.compile(r'audio:\s*"(.*?)"')


@dataclass
class TemplateStubClient:
    """Offline stand-in producing deterministic tiered explanations.

    Text requests are answered from the two quoted captions in the user
    content; rating requests return a JSON score that grows with the length
    of the rated explanation (so longer, denser tiers rate higher).
    """

    calls: list[LlmRequest] = field(default_factory=list)

    def complete(self, request: LlmRequest) -> LlmResponse:
        self.calls.append(request)
        if request.expect == "json-score":
            words = len(request.user.split('"""')[1].split()) if '"""' in request.user else 0
            score = max(1, min(5, 1 + words // 16))
            return LlmResponse(json.dumps({"score": score}))
        captions = _CAPTION_RE.findall(request.user)
        if len(captions) < 2:
            raise LlmError("stub expects two quoted captions in the user content", request)
        c1, c2 = captions[0], captions[1]
        if "tier 1" in request.user:
            text = f"The first audio contains {c1}, while the second contains {c2}."
        elif "tier 2" in request.user:
            text = (
                f"The first audio opens with {c1} and holds that character throughout, "
                f"whereas the second audio instead carries {c2}, so the two clips differ "
                f"in their events, their ordering, and the scene they suggest."
            )
        else:
            text = (
                f"The first audio is dominated by {c1}, with a stable level and a narrow "
                f"spread of frequencies that gives it a focused character. The second "
                f"audio instead presents {c2}, spreading its energy differently across "
                f"the spectrum and changing more over time. Taken together the pair "
                f"differ in their sources, their signal texture, and the impression they "
                f"leave on a listener, with the second feeling noticeably more distinct."
            )
        return LlmResponse(text)


def client_from_env(kind: str = "auto"):
    """Pick a client: explicit 'stub'/'http', or auto-detect from env vars."""
    if kind == "stub":
        return TemplateStubClient()
    base = os.environ.get(ENV_BASE_URL, "")
    if kind == "http" or (kind == "auto" and base):
        if not base:
            raise LlmError(f"{ENV_BASE_URL} is not set; cannot build an HTTP client")
        return HttpChatClient(base, os.environ.get(ENV_MODEL, ""), os.environ.get(ENV_API_KEY, ""))
    return TemplateStubClient()
