"""Synthesize random test inputs from model-written generators and validators."""

from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from .domain import Limits
from .sandbox import Artifact, GuestProgram, Sandbox, Status

log = logging.getLogger(__name__)

DEFAULT_TARGET = 256
DEFAULT_THRESHOLD = 0.75
# generator invocations allowed per requested input
RETRY_FACTOR = 4
GENERATOR_LIMITS = Limits(time_ms=2000, memory_mib=512)
VALIDATOR_LIMITS = Limits(time_ms=2000, memory_mib=512)

_FENCE = re.compile(r"```([A-Za-z0-9+#]*)[ \t]*\n(.*?)```", re.S)
_LANG_ALIASES = {"": None, "c++": "cpp", "cpp": "cpp", "cc": "cpp", "cxx": "cpp",
                 "python": "python", "py": "python", "python3": "python"}


class TestGenError(RuntimeError):
    __test__ = False


class PartialInputsWarning(UserWarning):
    """Fewer inputs were produced than requested."""


class NoValidatorsWarning(UserWarning):
    """Inputs were accepted without any validator."""


def extract_program(text: str, default_language: str = "cpp") -> GuestProgram:
    """Pull the last fenced code block out of a model response.

    Responses without a fence are taken verbatim.
    """
    blocks = _FENCE.findall(text)
    if not blocks:
        return GuestProgram(text, default_language)
    tag, body = blocks[-1]
    lang = _LANG_ALIASES.get(tag.lower(), None) or default_language
    return GuestProgram(body, lang)


@dataclass
class GeneratorSet:
    subtask_id: str
    generators: list[Artifact] = field(default_factory=list)
    validators: list[Artifact] = field(default_factory=list)
    seed_start: int = 0


@dataclass
class AcceptedInputs:
    subtask_id: str
    inputs: list[bytes]
    pass_fractions: list[float]
    threshold: float = DEFAULT_THRESHOLD

    def __len__(self):
        return len(self.inputs)


def _collect(model, prompt: str, n: int, sandbox: Sandbox, subtask_id: str, kind: str,
             language: str) -> list[Artifact]:
    if n < 1:
        raise ValueError("n must be at least 1")
    samples = model.sample(prompt, n)
    programs = []
    for i, (text, _compute) in enumerate(samples[:n]):
        try:
            prog = extract_program(text, language)
        except ValueError:
            log.info("subtask %s: %s sample %d is empty, dropped", subtask_id, kind, i)
            continue
        art = sandbox.compile(prog)
        if not art.ok:
            log.warning("subtask %s: %s sample %d does not compile, dropped", subtask_id, kind, i)
            continue
        programs.append(art)
    if not programs:
        raise TestGenError(f"subtask {subtask_id}: no {kind} compiled out of {len(samples)} samples")
    return programs


def collect_generators(model, prompt: str, n: int, sandbox: Sandbox, subtask_id: str = "?",
                       language: str = "cpp") -> list[Artifact]:
    """Sample `n` generator programs and keep the ones that compile.

    `prompt` is the rendered generator prompt for one subtask document.
    """
    return _collect(model, prompt, n, sandbox, subtask_id, "generator", language)


def collect_validators(model, prompt: str, n: int, sandbox: Sandbox, subtask_id: str = "?",
                       language: str = "cpp") -> list[Artifact]:
    """Validators read an input on stdin and exit 0 to accept it."""
    return _collect(model, prompt, n, sandbox, subtask_id, "validator", language)


def generate_inputs(gens: GeneratorSet, sandbox: Sandbox, target: int = DEFAULT_TARGET,
                    limits: Limits = GENERATOR_LIMITS) -> list[bytes]:
    """Run generators round-robin, seed ``seed_start + i`` for invocation ``i``.

    The seed is passed as the only command-line argument. Runs that do not
    finish OK are skipped. At most ``RETRY_FACTOR * target`` invocations.
    """
    if not gens.generators:
        raise TestGenError(f"subtask {gens.subtask_id}: no generators")
    inputs: list[bytes] = []
    budget = RETRY_FACTOR * target
    i = 0
    while len(inputs) < target and i < budget:
        # one batch per round keeps the pool busy while preserving seed order
        batch = range(i, min(i + target - len(inputs), budget))
        runs = sandbox.run_many(
            lambda j: sandbox.execute(gens.generators[j % len(gens.generators)], b"", limits,
                                      [str(gens.seed_start + j)]),
            batch)
        for j, run in zip(batch, runs):
            if run.status is Status.OK:
                inputs.append(run.stdout)
            else:
                log.info("subtask %s: generator %d seed %d -> %s, skipped", gens.subtask_id,
                         j % len(gens.generators), gens.seed_start + j, run.status.value)
        i = batch.stop
    if len(inputs) < target:
        warnings.warn(f"subtask {gens.subtask_id}: produced {len(inputs)} of {target} inputs "
                      f"after {i} generator runs", PartialInputsWarning, stacklevel=2)
    return inputs


def validator_accepts(sandbox: Sandbox, validator: Artifact, data: bytes,
                      limits: Limits = VALIDATOR_LIMITS) -> bool:
    return sandbox.execute(validator, data, limits).status is Status.OK


def filter_inputs(inputs: Sequence[bytes], validators: Sequence[Artifact], sandbox: Sandbox,
                  threshold: float = DEFAULT_THRESHOLD, subtask_id: str = "?",
                  limits: Limits = VALIDATOR_LIMITS) -> AcceptedInputs:
    """Keep inputs accepted by at least `threshold` of the validators (inclusive)."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    if not validators:
        warnings.warn(f"subtask {subtask_id}: no validators, accepting all {len(inputs)} inputs",
                      NoValidatorsWarning, stacklevel=2)
        return AcceptedInputs(subtask_id, list(inputs), [1.0] * len(inputs), threshold)
    pairs = [(x, v) for x in inputs for v in validators]
    verdicts = sandbox.run_many(lambda p: validator_accepts(sandbox, p[1], p[0], limits), pairs)
    m = len(validators)
    kept, fractions = [], []
    for idx, x in enumerate(inputs):
        accepted = sum(verdicts[idx * m:(idx + 1) * m])
        if accept_fraction(accepted, m, threshold):
            kept.append(x)
            fractions.append(accepted / m)
    return AcceptedInputs(subtask_id, kept, fractions, threshold)


def accept_fraction(accepted: int, total: int, threshold: float) -> bool:
    # compare in integers where possible: 3 of 4 at 0.75 must pass exactly
    return accepted >= threshold * total - 1e-9
