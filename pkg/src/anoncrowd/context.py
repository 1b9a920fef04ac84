"""Shared crypto context: one group backend plus the three message codecs.

Message domains are finite by design and pinned here:

* answers: ids below 2^16 (also reused for encrypted aggregates, so
  averaging tasks must keep domain_size * worker_count under 2^16);
* payout addresses: indices into a 2^32-entry registry;
* claim keys: per-task secrets below 2^16 that index and blind each
  worker's quality post. Desk-scale only; a deployment would widen this
  domain and replace the additive blinds, see the README limitations.

The params digest fingerprints the group, the generators and the codec
layout; every relation statement embeds it, so proofs cannot be replayed
across differently parameterized deployments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .encoding import enc_u64, record
from .group import Group, production_group, tiny_group
from .primitives import MessageCodec, hash_bytes

ANSWER_DOMAIN = 1 << 16
ADDRESS_DOMAIN = 1 << 32
CLAIM_DOMAIN = 1 << 16


@dataclass
class CryptoContext:
    group: Group
    answer_codec: MessageCodec = field(init=False)
    address_codec: MessageCodec = field(init=False)
    claim_codec: MessageCodec = field(init=False)
    params_digest: bytes = field(init=False)

    def __post_init__(self):
        g = self.group
        self.answer_codec = MessageCodec(g, ANSWER_DOMAIN)
        self.address_codec = MessageCodec(g, ADDRESS_DOMAIN, baby_size=1 << 16)
        self.claim_codec = MessageCodec(g, CLAIM_DOMAIN)
        self.params_digest = hash_bytes(
            record(
                "params",
                g.name.encode("ascii"),
                g.encode_element(g.generator),
                g.encode_element(g.blind_generator),
                enc_u64(ANSWER_DOMAIN) + enc_u64(ADDRESS_DOMAIN) + enc_u64(CLAIM_DOMAIN),
            )
        )


_PROD_CTX: CryptoContext | None = None
_TINY_CTX: CryptoContext | None = None


def production_context() -> CryptoContext:
    """Process-wide context over the production curve (codec table reuse)."""
    global _PROD_CTX
    if _PROD_CTX is None:
        _PROD_CTX = CryptoContext(production_group())
    return _PROD_CTX


def tiny_context() -> CryptoContext:
    """Context over the brute-forceable group. Oracle tests only."""
    global _TINY_CTX
    if _TINY_CTX is None:
        _TINY_CTX = CryptoContext(tiny_group())
    return _TINY_CTX
