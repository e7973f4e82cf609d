"""Run configuration (JSON or TOML) and labeled seed substreams."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from string import Template

from .rank import DEFAULT_RANGES, ScoreWeights
from .sandbox import DEFAULT_STDOUT_CAP, DEFAULT_TOOLCHAINS, Sandbox, Toolchain

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TEMPLATE_DIR = Path(__file__).parent / "templates"


@dataclass
class SandboxConfig:
    cache_dir: str = ".cpharness-cache"
    workers: int = 1
    stdout_cap: int = DEFAULT_STDOUT_CAP
    memory_slack_mib: int = 64
    retries: int = 2
    toolchains: dict = field(default_factory=dict)


@dataclass
class ModelConfig:
    kind: str = "mock"          # "mock" or "remote"
    fixtures: str = "fixtures"
    base_url: str = ""
    model: str = ""
    api_key_env: str = "CPHARNESS_API_KEY"
    language: str = "cpp"


@dataclass
class Config:
    seed: int = 0
    budget: int = 50
    pool_size: int = 64
    num_generators: int = 4
    num_validators: int = 8
    inputs_target: int = 256
    validator_threshold: float = 0.75
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    ranges: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_RANGES.items()})
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    templates: str = ""

    def to_json(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "Config":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if "weights" in d:
            d["weights"] = ScoreWeights(**d["weights"])
        if "sandbox" in d:
            d["sandbox"] = SandboxConfig(**d["sandbox"])
        if "model" in d:
            d["model"] = ModelConfig(**d["model"])
        cfg = cls(**d)
        if base is not None:
            cfg.sandbox.cache_dir = str(base / cfg.sandbox.cache_dir)
            cfg.model.fixtures = str(base / cfg.model.fixtures)
            if cfg.templates:
                cfg.templates = str(base / cfg.templates)
        return cfg


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    raw = path.read_bytes()
    data = tomllib.loads(raw.decode()) if path.suffix == ".toml" else json.loads(raw)
    return Config.from_dict(data, base=path.parent.resolve())


def derive_seed(seed: int, label: str) -> int:
    """Independent, reproducible substream seed for one labeled purpose."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def make_sandbox(cfg: Config) -> Sandbox:
    toolchains = dict(DEFAULT_TOOLCHAINS)
    for lang, tc in cfg.sandbox.toolchains.items():
        toolchains[lang] = Toolchain(
            compile=tuple(tc["compile"]) if tc.get("compile") else None,
            run=tuple(tc["run"]), source_name=tc["source_name"],
            version=tuple(tc.get("version", ())))
    return Sandbox(Path(cfg.sandbox.cache_dir), toolchains=toolchains, workers=cfg.sandbox.workers,
                   stdout_cap=cfg.sandbox.stdout_cap, retries=cfg.sandbox.retries,
                   memory_slack_mib=cfg.sandbox.memory_slack_mib)


def make_model(cfg: Config):
    from .models import MockModelClient, RemoteModelClient

    if cfg.model.kind == "mock":
        return MockModelClient(cfg.model.fixtures)
    if cfg.model.kind == "remote":
        return RemoteModelClient(cfg.model.base_url, cfg.model.model, cfg.model.api_key_env,
                                 seed=derive_seed(cfg.seed, "sampling"))
    raise ValueError(f"unknown model kind {cfg.model.kind!r}")


def render_prompt(kind: str, document: str, cfg: Config | None = None) -> str:
    """Fill the `kind` template (solution, generator, validator) with a subtask document."""
    folder = Path(cfg.templates) if cfg and cfg.templates else TEMPLATE_DIR
    text = (folder / f"{kind}.txt").read_text()
    return Template(text).safe_substitute(document=document)
