"""Model clients: a fixture-replaying mock and an HTTP chat-completions client."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Protocol, Sequence

Sample = tuple[str, int]  # (text, compute metric such as reasoning tokens)

OFFLINE_ENV = "CPHARNESS_OFFLINE"


class ModelClient(Protocol):
    def sample(self, prompt: str, n: int, **params) -> list[Sample]: ...


class MissingFixtureError(KeyError):
    pass


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode()).hexdigest()


class MockModelClient:
    """Replays ``<fixtures>/<sha256(prompt)>.json`` files.

    Each file holds ``{"samples": [{"text": ..., "compute": ...}, ...]}``;
    ``sample(prompt, n)`` returns the first ``n`` entries.
    """

    def __init__(self, fixtures_dir):
        self.fixtures_dir = Path(fixtures_dir)
        self.calls: list[tuple[str, int]] = []

    def path_for(self, prompt: str) -> Path:
        return self.fixtures_dir / f"{prompt_key(prompt)}.json"

    def sample(self, prompt: str, n: int, **params) -> list[Sample]:
        path = self.path_for(prompt)
        if not path.exists():
            raise MissingFixtureError(f"no mock fixture {path.name} for prompt "
                                      f"starting {prompt[:60]!r}")
        self.calls.append((prompt_key(prompt), n))
        data = json.loads(path.read_text())
        return [(s["text"], int(s.get("compute", 0))) for s in data["samples"][:n]]

    def record(self, prompt: str, samples: Sequence) -> Path:
        """Write a fixture; `samples` are texts or (text, compute) pairs."""
        self.fixtures_dir.mkdir(parents=True, exist_ok=True)
        items = []
        for s in samples:
            text, compute = (s, 0) if isinstance(s, str) else s
            items.append({"text": text, "compute": int(compute)})
        path = self.path_for(prompt)
        path.write_text(json.dumps({"prompt": prompt, "samples": items}, indent=1))
        return path


class RemoteModelClient:
    """OpenAI-style ``/chat/completions`` client; auth token read from the environment."""

    def __init__(self, base_url: str, model: str, api_key_env: str = "CPHARNESS_API_KEY",
                 temperature: float = 1.0, timeout: float = 600.0, seed: int | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.temperature = temperature
        self.timeout = timeout
        self.seed = seed

    def sample(self, prompt: str, n: int, **params) -> list[Sample]:
        if os.environ.get(OFFLINE_ENV):
            raise RuntimeError(f"remote model client disabled ({OFFLINE_ENV} is set)")
        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}],
                "n": n, "temperature": params.get("temperature", self.temperature)}
        if self.seed is not None:
            body["seed"] = self.seed
        resp = requests.post(f"{self.base_url}/chat/completions", json=body, headers=headers,
                             timeout=self.timeout)
        resp.raise_for_status()
        data = resp.json()
        choices = data.get("choices", [])
        usage = data.get("usage") or {}
        details = usage.get("completion_tokens_details") or {}
        total = details.get("reasoning_tokens") or usage.get("completion_tokens") or 0
        per_choice = total // max(len(choices), 1)
        return [(c["message"]["content"], per_choice) for c in choices]
