"""Color-refinement hashing of attributed graphs.

Used as a permutation-invariance oracle: the digest is identical for any
two node-relabelings of the same attributed graph. It is not a complete
isomorphism test.
"""

from __future__ import annotations

from dataclasses import dataclass
from hashlib import blake2b

from .graphs import MolecularGraph


@dataclass(frozen=True)
class WlHash:
    digest: int  # stable 64-bit value
    rounds: int


def _h64(text: str) -> int:
    return int.from_bytes(blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


def wl_hash(g: MolecularGraph, rounds: int = 3) -> WlHash:
    """Refine node colors `rounds` times and digest the color multiset.

    Initial colors come from the node feature pair; each round folds in the
    sorted multiset of (edge features, neighbor color) over incident edges.
    """
    if rounds < 1:
        raise ValueError("rounds must be positive")
    colors = [_h64(f"n:{a}:{c}") for a, c in g.node_features]
    adj: list[list[tuple[int, int]]] = [[] for _ in range(g.num_nodes)]
    for k, (u, v) in enumerate(g.edges):
        adj[u].append((k, v))
        adj[v].append((k, u))
    for _ in range(rounds):
        new = []
        for v in range(g.num_nodes):
            parts = sorted(
                f"{g.edge_features[k][0]}:{g.edge_features[k][1]}:{colors[u]}"
                for k, u in adj[v]
            )
            new.append(_h64(f"{colors[v]}|" + ";".join(parts)))
        colors = new
    summary = f"g:{g.num_nodes}:{g.num_edges}|" + ",".join(str(c) for c in sorted(colors))
    return WlHash(digest=_h64(summary), rounds=rounds)
