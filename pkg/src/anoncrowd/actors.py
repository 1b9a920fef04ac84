"""Protocol parties: registration authority, workers, requesters.

The three agent classes speak in bytes. Responses, final-answer posts and
per-worker quality posts are canonical records that travel as ledger
payloads, so an auditor can replay every decision from a transaction log
and the registry tree alone. Nothing in here touches the chain directly;
the harness shuttles the bytes.

The claim channel works like this: each response carries an encrypted
claim key. The requester addresses the matching quality post with an index
derived from that key and pads the update blinding with scalars derived
from it, so only the submitting worker can recognize the post and strip
the pads. The claim ciphertext is the one response field outside the
proven relation; a worker who garbles it forfeits the claim (the update is
posted but unclaimable) and nothing else.

Workers never learn their correctness verdict directly. They test the two
candidate increments against the posted pair with their own opening, which
doubles as a check that the requester blinded honestly. A worker whose
post is missing, misaddressed or unopenable files a protest; the authority
re-derives the screening verdicts from the log and upholds or rejects it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .context import CryptoContext
from .encoding import enc_u32, enc_u64, record
from .errors import (
    DuplicateIdentifierError,
    EncodingError,
    ProtocolError,
    ThresholdError,
)
from .group import GroupElement, Scalar
from .merkle import DEFAULT_DEPTH, MerkleTree
from .policy import (
    FinalAnswer,
    QualityState,
    TaskPolicy,
    ans_calc,
    clears_threshold,
    is_correct,
    paym_calc,
)
from .primitives import (
    BlindingPair,
    Ciphertext,
    CommitmentPair,
    KeyPair,
    Signature,
    commit_pair,
    decode_ciphertext,
    decode_commitment_pair,
    decrypt_message,
    encrypt_message,
    hash_bytes,
    hash_to_scalar,
    keygen,
    open_pair_check,
    open_record,
    pair_add,
    pair_rerandomize,
    quality_tag,
    random_blinding_pair,
    sign,
)
from .relations import (
    AuthCalcStatement,
    AuthCalcWitness,
    AuthQualStatement,
    AuthQualWitness,
    AuthValueStatement,
    AuthValueWitness,
    Proof,
    ProofBackend,
    ProveQualStatement,
    ProveQualWitness,
    ident_message,
)

_DST_IDENT = b"anoncrowd/v1/ident-derive"
_DST_CLAIM_INDEX = b"anoncrowd/v1/claim-index"
_DST_CLAIM_PAD = b"anoncrowd/v1/claim-pad"

# screening verdicts, in the order the filters run
REJECT_MALFORMED = "malformed-bundle"
REJECT_PROOF = "invalid-proof"
REJECT_STALE = "stale-tag"
REJECT_DUP_TAG = "duplicate-tag"
REJECT_DUP_CT = "duplicate-answer-ct"


def derive_ident(ctx: CryptoContext, secret: bytes) -> Scalar:
    """Enrollment identifier derived from a long-term worker secret."""
    return hash_to_scalar(ctx.group, _DST_IDENT + secret)


def claim_index(ref: int, claim_key: int) -> bytes:
    return hash_bytes(_DST_CLAIM_INDEX + enc_u32(ref) + enc_u64(claim_key))


def claim_pads(ctx: CryptoContext, ref: int, claim_key: int) -> BlindingPair:
    base = _DST_CLAIM_PAD + enc_u32(ref) + enc_u64(claim_key)
    return BlindingPair(
        hash_to_scalar(ctx.group, base + b"\x00"),
        hash_to_scalar(ctx.group, base + b"\x01"),
    )


def dummy_pads(ctx: CryptoContext, ref: int, claim_key: int) -> BlindingPair:
    """Pads for the cover-term channel, independent of the update pads."""
    base = _DST_CLAIM_PAD + enc_u32(ref) + enc_u64(claim_key)
    return BlindingPair(
        hash_to_scalar(ctx.group, base + b"\x02"),
        hash_to_scalar(ctx.group, base + b"\x03"),
    )


def payout_account(address: int) -> str:
    """Ledger account name for a payout-registry index."""
    return f"addr:{address:08x}"


# ── wire bundles ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ParsedResponse:
    """A decoded response payload, tied to its ledger record index."""

    ref: int
    fresh_pair: CommitmentPair
    tag: bytes
    answer_ct: Ciphertext
    address_ct: Ciphertext
    claim_ct: Ciphertext
    proof: Proof


def encode_response_bundle(
    ctx: CryptoContext,
    fresh_pair: CommitmentPair,
    tag: bytes,
    answer_ct: Ciphertext,
    address_ct: Ciphertext,
    claim_ct: Ciphertext,
    proof: Proof,
) -> bytes:
    g = ctx.group
    return record(
        "response",
        fresh_pair.encode(g),
        tag,
        answer_ct.encode(g),
        address_ct.encode(g),
        claim_ct.encode(g),
        proof.encode(),
    )


def decode_response_bundle(ctx: CryptoContext, ref: int, data: bytes) -> ParsedResponse:
    g = ctx.group
    r = open_record(data, "response")
    parsed = ParsedResponse(
        ref=ref,
        fresh_pair=decode_commitment_pair(g, r.chunk()),
        tag=r.chunk(),
        answer_ct=decode_ciphertext(g, r.chunk()),
        address_ct=decode_ciphertext(g, r.chunk()),
        claim_ct=decode_ciphertext(g, r.chunk()),
        proof=Proof.decode(r.chunk()),
    )
    if not r.done():
        raise EncodingError("trailing bytes in response bundle")
    if len(parsed.tag) != 32:
        raise EncodingError("linkability tag must be 32 bytes")
    return parsed


def encode_final_bundle(ctx: CryptoContext, final_cts: tuple[Ciphertext, ...], proof: Proof) -> bytes:
    g = ctx.group
    return record(
        "final-answer",
        b"".join(ct.encode(g) for ct in final_cts),
        proof.encode(),
    )


def decode_final_bundle(ctx: CryptoContext, data: bytes, count: int) -> tuple[tuple[Ciphertext, ...], Proof]:
    r = open_record(data, "final-answer")
    body = r.chunk()
    proof = Proof.decode(r.chunk())
    if not r.done():
        raise EncodingError("trailing bytes in final-answer bundle")
    if count == 0 or len(body) % count:
        raise EncodingError("final ciphertext list length mismatch")
    step = len(body) // count
    cts = tuple(decode_ciphertext(ctx.group, body[i * step : (i + 1) * step]) for i in range(count))
    return cts, proof


@dataclass(frozen=True)
class QualityPost:
    """One worker's quality update, addressed through the claim channel.

    The posted pair excludes the cover term the accumulator folds into the
    registry leaf; the worker recovers that term from blinded_dummy and
    reconstructs the leaf locally, so the two never match byte for byte."""

    response_ref: int
    claim_index: bytes
    blinded_update: BlindingPair  # update blinding plus claim-key pads
    blinded_dummy: BlindingPair  # cover-term blinding plus its own pads
    new_pair: CommitmentPair
    qual_proof: Proof
    value_proof: Proof | None  # present exactly when the answer was correct

    def encode(self, ctx: CryptoContext) -> bytes:
        g = ctx.group
        return record(
            "quality-post",
            enc_u32(self.response_ref),
            self.claim_index,
            g.encode_scalar(self.blinded_update.alpha),
            g.encode_scalar(self.blinded_update.beta),
            g.encode_scalar(self.blinded_dummy.alpha),
            g.encode_scalar(self.blinded_dummy.beta),
            self.new_pair.encode(g),
            self.qual_proof.encode(),
            self.value_proof.encode() if self.value_proof else b"",
        )

    @classmethod
    def decode(cls, ctx: CryptoContext, data: bytes) -> "QualityPost":
        g = ctx.group
        r = open_record(data, "quality-post")
        ref_bytes = r.chunk()
        if len(ref_bytes) != 4:
            raise EncodingError("bad response reference")
        idx = r.chunk()
        if len(idx) != 32:
            raise EncodingError("claim index must be 32 bytes")
        blinded = BlindingPair(g.decode_scalar(r.chunk()), g.decode_scalar(r.chunk()))
        dummy = BlindingPair(g.decode_scalar(r.chunk()), g.decode_scalar(r.chunk()))
        new_pair = decode_commitment_pair(g, r.chunk())
        qual_proof = Proof.decode(r.chunk())
        value_bytes = r.chunk()
        value_proof = Proof.decode(value_bytes) if value_bytes else None
        if not r.done():
            raise EncodingError("trailing bytes in quality post")
        return cls(
            int.from_bytes(ref_bytes, "little"),
            idx,
            blinded,
            dummy,
            new_pair,
            qual_proof,
            value_proof,
        )


@dataclass(frozen=True)
class Protest:
    """Evidence a worker hands the authority over an anonymous channel.

    The claim randomness lets the authority re-encrypt the claim key and
    match it byte for byte against the on-chain response, binding the
    protest to one response without trusting either side's word."""

    response_ref: int
    claim_key: int
    claim_rand: Scalar
    payout: str


# ── task announcement and screening ──────────────────────────────────────────


@dataclass(frozen=True)
class TaskPublic:
    """What every party sees when a task opens."""

    policy: TaskPolicy
    requester_pk: GroupElement
    ra_pk: GroupElement
    tree_root: bytes


def response_statement(ctx: CryptoContext, task: TaskPublic, parsed: ParsedResponse) -> ProveQualStatement:
    return ProveQualStatement(
        params_digest=ctx.params_digest,
        policy=task.policy,
        ra_pk=task.ra_pk,
        requester_pk=task.requester_pk,
        tree_root=task.tree_root,
        fresh_pair=parsed.fresh_pair,
        quality_tag=parsed.tag,
        answer_ct=parsed.answer_ct,
        address_ct=parsed.address_ct,
    )


def screen_responses(
    ctx: CryptoContext,
    backend: ProofBackend,
    task: TaskPublic,
    included: list[tuple[int, bytes]],
    known_tags: frozenset[bytes] | set[bytes],
) -> tuple[list[ParsedResponse], list[tuple[int, str]]]:
    """The response filter, in fixed verdict order: malformed bundles,
    failing proofs, tags already seen in earlier tasks, then same-task
    duplicates by tag or by answer ciphertext (earlier inclusion wins).

    Deterministic given the same inputs; the requester, the authority and
    the log auditor all run this same function.
    """
    rejections: list[tuple[int, str]] = []
    survivors: list[ParsedResponse] = []
    for ref, payload in included:
        try:
            parsed = decode_response_bundle(ctx, ref, payload)
        except (EncodingError, ValueError):
            rejections.append((ref, REJECT_MALFORMED))
            continue
        if not backend.verify(ctx, response_statement(ctx, task, parsed), parsed.proof):
            rejections.append((ref, REJECT_PROOF))
            continue
        survivors.append(parsed)

    accepted: list[ParsedResponse] = []
    seen_tags: set[bytes] = set()
    seen_cts: set[bytes] = set()
    for parsed in survivors:
        if parsed.tag in known_tags:
            rejections.append((parsed.ref, REJECT_STALE))
            continue
        if parsed.tag in seen_tags:
            rejections.append((parsed.ref, REJECT_DUP_TAG))
            continue
        ct_bytes = parsed.answer_ct.encode(ctx.group)
        if ct_bytes in seen_cts:
            rejections.append((parsed.ref, REJECT_DUP_CT))
            continue
        seen_tags.add(parsed.tag)
        seen_cts.add(ct_bytes)
        accepted.append(parsed)
    rejections.sort()
    return accepted, rejections


# ── registration authority ───────────────────────────────────────────────────


@dataclass(frozen=True)
class Credential:
    """What a worker walks away from enrollment with: a certificate over
    the identifier and the opening of the accumulated starting pair.

    The leaf opening is split: blind carries the randomness of the pair as
    it last appeared on chain, dummy the cover term folded in on top when
    the leaf was accumulated. Their sum opens pair."""

    cert: Signature
    alpha: int
    beta: int
    blind: BlindingPair
    dummy: BlindingPair
    pair: CommitmentPair
    position: int


class RegistrationAuthority:
    """Enrolls workers, accumulates quality pairs, arbitrates protests.

    The registry tree is public: every enrollment and every settled update
    lands in it as an opaque commitment-pair payload (the posted pair with
    a cover term folded in, so leaves never repeat on-chain bytes), and
    workers locate their own leaf by recomputing it. The authority cannot
    tell whose any accumulated pair is after the enrollment handshake."""

    def __init__(
        self,
        ctx: CryptoContext,
        backend: ProofBackend,
        rng: random.Random,
        depth: int = DEFAULT_DEPTH,
        prior: tuple[int, int] = (1, 1),
    ):
        if prior[0] < 1 or prior[1] < 1:
            raise ValueError("the starting state needs at least one of each observation")
        self.ctx = ctx
        self.backend = backend
        self.rng = rng
        self.prior = prior
        self.keypair: KeyPair = keygen(ctx.group, rng)
        self.tree = MerkleTree(depth)
        self._positions: dict[bytes, int] = {}
        self._enrolled: set[bytes] = set()

    @property
    def pk(self) -> GroupElement:
        return self.keypair.pk

    def root(self) -> bytes:
        return self.tree.root()

    def enroll(self, ident: Scalar) -> Credential:
        g = self.ctx.group
        key = g.encode_scalar(ident)
        if key in self._enrolled:
            raise DuplicateIdentifierError("identifier is already enrolled")
        self._enrolled.add(key)
        alpha, beta = self.prior
        blind = random_blinding_pair(g, self.rng)
        dummy = random_blinding_pair(g, self.rng)
        pair = commit_pair(g, alpha, beta, blind + dummy)
        position = self.accumulate(pair.encode(g))
        cert = sign(g, self.keypair.sk, ident_message(self.ctx, ident))
        return Credential(cert, alpha, beta, blind, dummy, pair, position)

    def accumulate(self, pair_payload: bytes) -> int:
        position = self.tree.append(pair_payload)
        self._positions.setdefault(pair_payload, position)
        return position

    def find_position(self, pair_payload: bytes) -> int | None:
        return self._positions.get(pair_payload)

    def prove_membership(self, position: int):
        return self.tree.prove_membership(position)

    def arbitrate(
        self,
        protest: Protest,
        task: TaskPublic,
        included: list[tuple[int, bytes]],
        posts: list[bytes],
        final_cts: tuple[Ciphertext, ...],
        known_tags: frozenset[bytes] | set[bytes],
    ) -> bool:
        """True when the protest is upheld: the response was accepted by
        the screening rules, the claim key is bound to it, and no honest
        quality post serves it."""
        ctx, g = self.ctx, self.ctx.group
        accepted, _ = screen_responses(ctx, self.backend, task, included, known_tags)
        target = next((p for p in accepted if p.ref == protest.response_ref), None)
        if target is None:
            return False  # never accepted, nothing was owed

        try:
            bound_ct = encrypt_message(
                g, task.requester_pk, ctx.claim_codec, protest.claim_key, protest.claim_rand
            )
        except Exception:
            return False
        if bound_ct != target.claim_ct:
            return False  # claim key does not match the on-chain response

        expected_idx = claim_index(target.ref, protest.claim_key)
        pads = claim_pads(ctx, target.ref, protest.claim_key)
        for payload in posts:
            try:
                post = QualityPost.decode(ctx, payload)
            except (EncodingError, ValueError):
                continue
            if post.response_ref != target.ref or post.claim_index != expected_idx:
                continue
            stmt = AuthQualStatement(
                params_digest=ctx.params_digest,
                policy=task.policy,
                requester_pk=task.requester_pk,
                worker_ct=target.answer_ct,
                final_cts=final_cts,
                old_pair=target.fresh_pair,
                new_pair=post.new_pair,
            )
            if not self.backend.verify(ctx, stmt, post.qual_proof):
                continue
            # the pads recover the update blinding; binding commitments mean
            # exactly one admissible increment can close the equation
            update = post.blinded_update - pads
            increments = ((0, 0),) if len(final_cts) == 0 else ((1, 0), (0, 1))
            closes = any(
                post.new_pair == pair_add(g, target.fresh_pair, commit_pair(g, da, db, update))
                for da, db in increments
            )
            if not closes:
                continue
            # served means the worker can also move on: the covered leaf
            # must have landed in the registry
            dummy = post.blinded_dummy - dummy_pads(ctx, target.ref, protest.claim_key)
            leaf = pair_add(g, post.new_pair, commit_pair(g, 0, 0, dummy))
            if self.find_position(leaf.encode(g)) is not None:
                return False
        return True


# ── worker ───────────────────────────────────────────────────────────────────


@dataclass
class _PendingResponse:
    ref: int | None
    rerand: BlindingPair
    answer: int
    answer_rand: Scalar
    address: int
    address_rand: Scalar
    claim_key: int
    claim_rand: Scalar


class WorkerAgent:
    """One enrolled worker: quality state, response building, claim logic."""

    def __init__(self, ctx: CryptoContext, backend: ProofBackend, name: str, secret: bytes, rng: random.Random):
        self.ctx = ctx
        self.backend = backend
        self.name = name
        self.rng = rng
        self.ident: Scalar = derive_ident(ctx, secret)
        self.cred: Credential | None = None
        self._pending: _PendingResponse | None = None

    # enrolled state shorthands
    @property
    def quality(self) -> QualityState:
        self._require_enrolled()
        return QualityState(self.cred.alpha, self.cred.beta)

    def _require_enrolled(self) -> None:
        if self.cred is None:
            raise ProtocolError(f"worker {self.name} is not enrolled")

    def enroll(self, ra: RegistrationAuthority) -> None:
        self.cred = ra.enroll(self.ident)

    def qualifies(self, policy: TaskPolicy) -> bool:
        return clears_threshold(self.quality, policy)

    def current_tag(self) -> bytes:
        self._require_enrolled()
        return quality_tag(self.ctx.group, self.cred.pair, self.ident)

    def build_response(
        self,
        ra: RegistrationAuthority,
        task: TaskPublic,
        answer: int,
        address: int | None = None,
    ) -> bytes:
        """Builds the response payload and remembers the secrets needed to
        claim the eventual quality post. The reference is attached by
        mark_submitted once the transaction index is known."""
        self._require_enrolled()
        ctx, g, rng = self.ctx, self.ctx.group, self.rng
        if not self.qualifies(task.policy):
            raise ThresholdError(f"worker {self.name} does not clear the task threshold")
        if not (0 <= answer < task.policy.domain_size):
            raise ValueError("answer outside the task domain")
        if address is None:
            address = rng.randrange(ctx.address_codec.domain_size)

        pending = _PendingResponse(
            ref=None,
            rerand=random_blinding_pair(g, rng),
            answer=answer,
            answer_rand=g.random_scalar(rng),
            address=address,
            address_rand=g.random_scalar(rng),
            claim_key=rng.randrange(ctx.claim_codec.domain_size),
            claim_rand=g.random_scalar(rng),
        )
        fresh_pair = pair_rerandomize(g, self.cred.pair, pending.rerand)
        stmt = ProveQualStatement(
            params_digest=ctx.params_digest,
            policy=task.policy,
            ra_pk=task.ra_pk,
            requester_pk=task.requester_pk,
            tree_root=task.tree_root,
            fresh_pair=fresh_pair,
            quality_tag=self.current_tag(),
            answer_ct=encrypt_message(
                g, task.requester_pk, ctx.answer_codec, answer, pending.answer_rand
            ),
            address_ct=encrypt_message(
                g, task.requester_pk, ctx.address_codec, address, pending.address_rand
            ),
        )
        witness = ProveQualWitness(
            ident=self.ident,
            cert=self.cred.cert,
            alpha=self.cred.alpha,
            beta=self.cred.beta,
            base_blind=self.cred.blind,
            stored_pair=self.cred.pair,
            rerand=pending.rerand,
            dummy_blind=self.cred.dummy,
            answer=answer,
            answer_rand=pending.answer_rand,
            address=address,
            address_rand=pending.address_rand,
            path=ra.prove_membership(self.cred.position),
        )
        proof = self.backend.prove(ctx, stmt, witness)
        claim_ct = encrypt_message(
            g, task.requester_pk, ctx.claim_codec, pending.claim_key, pending.claim_rand
        )
        self._pending = pending
        return encode_response_bundle(
            ctx, fresh_pair, stmt.quality_tag, stmt.answer_ct, stmt.address_ct, claim_ct, proof
        )

    def mark_submitted(self, ref: int) -> None:
        if self._pending is None:
            raise ProtocolError("no response awaiting a reference")
        self._pending = replace(self._pending, ref=ref)

    def payout(self) -> str:
        if self._pending is None or self._pending.ref is None:
            raise ProtocolError("no submitted response on record")
        return payout_account(self._pending.address)

    def adopt_update(
        self,
        ra: RegistrationAuthority,
        task: TaskPublic,
        posts: list[bytes],
        final_cts: tuple[Ciphertext, ...],
    ) -> Protest | None:
        """Finds and verifies this worker's quality post. On success the
        local opening advances and None returns; otherwise the worker walks
        away with a ready-to-file protest."""
        self._require_enrolled()
        ctx, g = self.ctx, self.ctx.group
        p = self._pending
        if p is None or p.ref is None:
            raise ProtocolError("no submitted response on record")
        grievance = Protest(p.ref, p.claim_key, p.claim_rand, payout_account(p.address))

        expected_idx = claim_index(p.ref, p.claim_key)
        post = None
        for payload in posts:
            try:
                candidate = QualityPost.decode(ctx, payload)
            except (EncodingError, ValueError):
                continue
            if candidate.response_ref == p.ref and candidate.claim_index == expected_idx:
                post = candidate
                break
        if post is None:
            return grievance

        update = post.blinded_update - claim_pads(ctx, p.ref, p.claim_key)
        dummy = post.blinded_dummy - dummy_pads(ctx, p.ref, p.claim_key)
        new_blind = self.cred.blind + self.cred.dummy + p.rerand + update
        voided = len(final_cts) == 0
        candidates = ((0, 0),) if voided else ((1, 0), (0, 1))
        for da, db in candidates:
            if open_pair_check(g, post.new_pair, self.cred.alpha + da, self.cred.beta + db, new_blind):
                leaf = pair_add(g, post.new_pair, commit_pair(g, 0, 0, dummy))
                position = ra.find_position(leaf.encode(g))
                if position is None:
                    return grievance  # posted but never accumulated
                self.cred = Credential(
                    cert=self.cred.cert,
                    alpha=self.cred.alpha + da,
                    beta=self.cred.beta + db,
                    blind=new_blind,
                    dummy=dummy,
                    pair=leaf,
                    position=position,
                )
                self._pending = None
                return None
        return grievance  # addressed to us but the opening does not close


# ── requester ────────────────────────────────────────────────────────────────


@dataclass
class TaskOutcome:
    """Everything the requester computes for one task, ready to post."""

    accepted: list[ParsedResponse]
    rejections: list[tuple[int, str]]
    void: bool
    final: FinalAnswer | None
    final_cts: tuple[Ciphertext, ...]
    final_bundle: bytes | None
    quality_posts: list[bytes]  # aligned with accepted
    leaves: list[bytes]  # covered registry payloads, aligned with quality_posts
    payments: list[tuple[str, int]]  # (payout account, wei), aligned; empty when void
    correct_refs: list[int]


class RequesterAgent:
    """Crowdsourcer: screens responses, aggregates, settles quality and pay.

    Keeps the set of linkability tags accepted in earlier tasks; a tag
    reappearing there means a worker replayed an outdated quality state."""

    def __init__(self, ctx: CryptoContext, backend: ProofBackend, name: str, rng: random.Random):
        self.ctx = ctx
        self.backend = backend
        self.name = name
        self.rng = rng
        self.keypair: KeyPair = keygen(ctx.group, rng)
        self.seen_tags: set[bytes] = set()

    @property
    def pk(self) -> GroupElement:
        return self.keypair.pk

    def announce(self, policy: TaskPolicy, ra: RegistrationAuthority) -> TaskPublic:
        return TaskPublic(policy, self.keypair.pk, ra.pk, ra.root())

    def evaluate(
        self,
        task: TaskPublic,
        included: list[tuple[int, bytes]],
        min_workers: int,
    ) -> TaskOutcome:
        ctx, g = self.ctx, self.ctx.group
        accepted, rejections = screen_responses(ctx, self.backend, task, included, self.seen_tags)
        self.seen_tags.update(p.tag for p in accepted)

        if len(accepted) < min_workers:
            settled = [self._quality_post(task, p, final_cts=(), correct=None) for p in accepted]
            return TaskOutcome(
                accepted=accepted,
                rejections=rejections,
                void=True,
                final=None,
                final_cts=(),
                final_bundle=None,
                quality_posts=[post for post, _ in settled],
                leaves=[leaf for _, leaf in settled],
                payments=[],
                correct_refs=[],
            )

        sk = self.keypair.sk
        answers = [decrypt_message(g, sk, ctx.answer_codec, p.answer_ct) for p in accepted]
        final = ans_calc(answers, task.policy)
        final_cts = tuple(
            encrypt_message(g, self.keypair.pk, ctx.answer_codec, v, g.random_scalar(self.rng))
            for v in final.values
        )
        calc_stmt = AuthCalcStatement(
            params_digest=ctx.params_digest,
            policy=task.policy,
            requester_pk=self.keypair.pk,
            answer_cts=tuple(p.answer_ct for p in accepted),
            final_cts=final_cts,
        )
        calc_proof = self.backend.prove(ctx, calc_stmt, AuthCalcWitness(sk))
        final_bundle = encode_final_bundle(ctx, final_cts, calc_proof)

        posts, leaves, payments, correct_refs = [], [], [], []
        for parsed, answer in zip(accepted, answers):
            correct = is_correct(answer, final, task.policy)
            post, leaf = self._quality_post(task, parsed, final_cts, correct)
            posts.append(post)
            leaves.append(leaf)
            address = decrypt_message(g, sk, ctx.address_codec, parsed.address_ct)
            payments.append((payout_account(address), paym_calc(correct, task.policy)))
            if correct:
                correct_refs.append(parsed.ref)
        return TaskOutcome(
            accepted=accepted,
            rejections=rejections,
            void=False,
            final=final,
            final_cts=final_cts,
            final_bundle=final_bundle,
            quality_posts=posts,
            leaves=leaves,
            payments=payments,
            correct_refs=correct_refs,
        )

    def _quality_post(
        self,
        task: TaskPublic,
        parsed: ParsedResponse,
        final_cts: tuple[Ciphertext, ...],
        correct: bool | None,
    ) -> tuple[bytes, bytes]:
        """Builds one addressed quality post plus the covered registry leaf
        it should be accumulated as. correct is None on void."""
        ctx, g = self.ctx, self.ctx.group
        sk = self.keypair.sk
        update = random_blinding_pair(g, self.rng)
        dummy = random_blinding_pair(g, self.rng)
        if correct is None:
            increment = (0, 0)
        else:
            increment = (1, 0) if correct else (0, 1)
        new_pair = pair_add(g, parsed.fresh_pair, commit_pair(g, *increment, update))
        stmt = AuthQualStatement(
            params_digest=ctx.params_digest,
            policy=task.policy,
            requester_pk=self.keypair.pk,
            worker_ct=parsed.answer_ct,
            final_cts=final_cts,
            old_pair=parsed.fresh_pair,
            new_pair=new_pair,
        )
        qual_proof = self.backend.prove(ctx, stmt, AuthQualWitness(sk, update))
        value_proof = None
        if correct:
            value_stmt = AuthValueStatement(
                params_digest=ctx.params_digest,
                policy=task.policy,
                requester_pk=self.keypair.pk,
                worker_ct=parsed.answer_ct,
                final_cts=final_cts,
            )
            value_proof = self.backend.prove(ctx, value_stmt, AuthValueWitness(sk))

        try:
            key = decrypt_message(g, sk, ctx.claim_codec, parsed.claim_ct)
            idx = claim_index(parsed.ref, key)
            blinded = update + claim_pads(ctx, parsed.ref, key)
            covered = dummy + dummy_pads(ctx, parsed.ref, key)
        except Exception:
            # unproven claim field did not decrypt; the update is posted
            # unaddressed and the submitter has only themselves to blame
            idx = bytes(32)
            blinded = update
            covered = dummy
        post = QualityPost(parsed.ref, idx, blinded, covered, new_pair, qual_proof, value_proof)
        leaf = pair_add(g, new_pair, commit_pair(g, 0, 0, dummy))
        return post.encode(ctx), leaf.encode(g)
