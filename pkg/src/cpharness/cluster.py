"""Group candidate programs by the outputs they produce on generated inputs."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from .domain import Limits
from .sandbox import Artifact, Sandbox, Status, normalize_output

Signature = tuple  # one token per accepted input, in input order

# Failures that collapse to a status token instead of an output hash.
SENTINELS = frozenset({Status.TIME_LIMIT.value, Status.RUNTIME_ERROR.value,
                       Status.MEMORY_LIMIT.value, Status.WRONG_OUTPUT.value,
                       Status.COMPILE_ERROR.value})


class ClusterError(ValueError):
    pass


def output_token(stdout: bytes) -> str:
    norm = normalize_output(stdout)
    return f"{len(norm)}:{hashlib.sha256(norm).hexdigest()[:32]}"


def signature_of(artifact: Artifact, inputs: Sequence[bytes], limits: Limits,
                 sandbox: Sandbox) -> Signature:
    """Per-input output hashes; failed runs contribute their status name."""
    runs = sandbox.run_many(lambda x: sandbox.execute(artifact, x, limits), inputs)
    return tuple(output_token(r.stdout) if r.status is Status.OK else r.status.value
                 for r in runs)


@dataclass(frozen=True)
class Cluster:
    id: int
    signature: Signature
    members: tuple

    def __len__(self):
        return len(self.members)

    @property
    def failure_tokens(self) -> dict[str, int]:
        return dict(Counter(t for t in self.signature if t in SENTINELS))


def cluster_candidates(signatures: Mapping[Hashable, Signature]) -> list[Cluster]:
    """Exact grouping by signature equality.

    Clusters come out in order of first appearance, members in mapping order.
    """
    lengths = {len(s) for s in signatures.values()}
    if len(lengths) > 1:
        raise ClusterError(f"signatures have mixed lengths {sorted(lengths)}")
    groups: dict[Signature, list] = {}
    for cid, sig in signatures.items():
        groups.setdefault(tuple(sig), []).append(cid)
    return [Cluster(i, sig, tuple(members)) for i, (sig, members) in enumerate(groups.items())]


def cluster_report(clusters: Sequence[Cluster]) -> dict:
    return {
        "num_clusters": len(clusters),
        "num_candidates": sum(len(c) for c in clusters),
        "clusters": [
            {"id": c.id, "size": len(c), "members": list(c.members),
             "failures": c.failure_tokens}
            for c in clusters
        ],
    }
