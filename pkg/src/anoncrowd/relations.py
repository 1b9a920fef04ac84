"""Verification relations and the attestation proof backend.

Four relations tie the protocol together. Each one is a plain predicate
over (statement, witness), mirrored by a statement record format so logged
proofs can be re-checked from a transaction log alone:

* check_prove_qual: a submitted response is well-formed. Its quality pair
  is a re-randomization of a credentialed pair accumulated in the registry
  tree, the linkability tag binds that pair to the enrolled identifier,
  the answer and payout-address ciphertexts encrypt domain values under
  the requester key, and the hidden quality clears the task threshold.
* check_auth_calc: the requester key is genuine and the posted encrypted
  final answer equals the policy aggregation of all included answers.
* check_auth_value: one worker's encrypted answer is correct with respect
  to the encrypted final answer under the policy.
* check_auth_qual: a posted quality-pair update adds exactly one correct
  increment, (1,0) on a correct answer and (0,1) otherwise; voided tasks
  (empty final ciphertext list, void flag) must add (0,0).

Statements are structurally validated before use; a malformed statement
raises MalformedStatementError, which is deliberately distinct from a
well-formed but unsatisfied relation (a False result).

The proof backend is an attestation oracle standing in for a succinct
proving system: prove() runs the relation checker and, only on success,
emits a keyed digest of the statement. Attestations depend on the
statement alone, never on the witness, which is the unlinkability property
the protocol leans on. Soundness holds within one simulation run (the
setup secret could mint attestations), matching the trust model of a
simulated prover rather than re-implementing one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .context import CryptoContext
from .encoding import enc_u16, record
from .errors import (
    DomainError,
    EncodingError,
    MalformedStatementError,
    RelationUnsatisfiedError,
)
from .group import GroupElement, Scalar
from .merkle import MerklePath, verify_path
from .policy import (
    AVERAGE,
    MAJORITY,
    FinalAnswer,
    QualityState,
    TaskPolicy,
    ans_calc,
    clears_threshold,
    is_correct,
)
from .primitives import (
    BlindingPair,
    Ciphertext,
    CommitmentPair,
    Signature,
    commit_pair,
    decode_ciphertext,
    decode_commitment_pair,
    decode_signature,
    decrypt_message,
    encrypt,
    hash_bytes,
    open_pair_check,
    open_record,
    pair_add,
    pair_rerandomize,
    quality_tag,
    verify_sig,
)

PROVE_QUAL_ID = "prove-qual/v1"
AUTH_CALC_ID = "auth-calc/v1"
AUTH_VALUE_ID = "auth-value/v1"
AUTH_QUAL_ID = "auth-qual/v1"


def ident_message(ctx: CryptoContext, ident: Scalar) -> bytes:
    """The exact bytes the registration authority signs for an identifier."""
    return record("worker-ident", ctx.group.encode_scalar(ident))


def _need_digest(value: bytes, what: str) -> None:
    if not isinstance(value, bytes) or len(value) != 32:
        raise MalformedStatementError(f"{what} must be a 32-byte digest")


def _need(cond: bool, what: str) -> None:
    if not cond:
        raise MalformedStatementError(what)


def _final_ct_count(policy: TaskPolicy) -> int:
    # majority posts one ciphertext per winner; averaging posts the
    # unreduced numerator and denominator
    return policy.winners if policy.kind == MAJORITY else 2


# ── statements ───────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ProveQualStatement:
    params_digest: bytes
    policy: TaskPolicy
    ra_pk: GroupElement
    requester_pk: GroupElement
    tree_root: bytes
    fresh_pair: CommitmentPair  # re-randomized quality commitment pair
    quality_tag: bytes
    answer_ct: Ciphertext
    address_ct: Ciphertext

    def validate(self, ctx: CryptoContext) -> None:
        _need_digest(self.params_digest, "params digest")
        _need_digest(self.tree_root, "tree root")
        _need_digest(self.quality_tag, "quality tag")
        _need(isinstance(self.policy, TaskPolicy), "policy missing")
        for el in (self.ra_pk, self.requester_pk):
            _need(isinstance(el, GroupElement), "public key missing")
        _need(isinstance(self.fresh_pair, CommitmentPair), "commitment pair missing")
        for ct in (self.answer_ct, self.address_ct):
            _need(isinstance(ct, Ciphertext), "ciphertext missing")

    def encode(self, ctx: CryptoContext) -> bytes:
        self.validate(ctx)
        g = ctx.group
        return record(
            "stmt/" + PROVE_QUAL_ID,
            self.params_digest,
            self.policy.digest(),
            g.encode_element(self.ra_pk),
            g.encode_element(self.requester_pk),
            self.tree_root,
            self.fresh_pair.encode(g),
            self.quality_tag,
            self.answer_ct.encode(g),
            self.address_ct.encode(g),
        )

    @classmethod
    def decode(cls, ctx: CryptoContext, data: bytes, policy: TaskPolicy) -> "ProveQualStatement":
        g = ctx.group
        r = open_record(data, "stmt/" + PROVE_QUAL_ID)
        params = r.chunk()
        pol_digest = r.chunk()
        if pol_digest != policy.digest():
            raise EncodingError("statement was formed under a different policy")
        stmt = cls(
            params_digest=params,
            policy=policy,
            ra_pk=g.decode_element(r.chunk()),
            requester_pk=g.decode_element(r.chunk()),
            tree_root=r.chunk(),
            fresh_pair=decode_commitment_pair(g, r.chunk()),
            quality_tag=r.chunk(),
            answer_ct=decode_ciphertext(g, r.chunk()),
            address_ct=decode_ciphertext(g, r.chunk()),
        )
        if not r.done():
            raise EncodingError("trailing bytes in statement")
        return stmt


@dataclass(frozen=True)
class AuthCalcStatement:
    params_digest: bytes
    policy: TaskPolicy
    requester_pk: GroupElement
    answer_cts: tuple[Ciphertext, ...]  # all included responses, log order
    final_cts: tuple[Ciphertext, ...]

    def validate(self, ctx: CryptoContext) -> None:
        _need_digest(self.params_digest, "params digest")
        _need(isinstance(self.policy, TaskPolicy), "policy missing")
        _need(isinstance(self.requester_pk, GroupElement), "public key missing")
        _need(len(self.answer_cts) >= 1, "no included answers")
        _need(
            len(self.final_cts) == _final_ct_count(self.policy),
            "final ciphertext list has the wrong length for the policy",
        )

    def encode(self, ctx: CryptoContext) -> bytes:
        self.validate(ctx)
        g = ctx.group
        return record(
            "stmt/" + AUTH_CALC_ID,
            self.params_digest,
            self.policy.digest(),
            g.encode_element(self.requester_pk),
            enc_u16(len(self.answer_cts)) + b"".join(ct.encode(g) for ct in self.answer_cts),
            enc_u16(len(self.final_cts)) + b"".join(ct.encode(g) for ct in self.final_cts),
        )

    @classmethod
    def decode(cls, ctx: CryptoContext, data: bytes, policy: TaskPolicy) -> "AuthCalcStatement":
        g = ctx.group
        r = open_record(data, "stmt/" + AUTH_CALC_ID)
        params = r.chunk()
        if r.chunk() != policy.digest():
            raise EncodingError("statement was formed under a different policy")
        pk = g.decode_element(r.chunk())
        answer_cts = _split_ciphertexts(ctx, r.chunk())
        final_cts = _split_ciphertexts(ctx, r.chunk())
        if not r.done():
            raise EncodingError("trailing bytes in statement")
        return cls(params, policy, pk, answer_cts, final_cts)


@dataclass(frozen=True)
class AuthValueStatement:
    params_digest: bytes
    policy: TaskPolicy
    requester_pk: GroupElement
    worker_ct: Ciphertext
    final_cts: tuple[Ciphertext, ...]

    def validate(self, ctx: CryptoContext) -> None:
        _need_digest(self.params_digest, "params digest")
        _need(isinstance(self.policy, TaskPolicy), "policy missing")
        _need(isinstance(self.requester_pk, GroupElement), "public key missing")
        _need(isinstance(self.worker_ct, Ciphertext), "worker ciphertext missing")
        _need(
            len(self.final_cts) == _final_ct_count(self.policy),
            "final ciphertext list has the wrong length for the policy",
        )

    def encode(self, ctx: CryptoContext) -> bytes:
        self.validate(ctx)
        g = ctx.group
        return record(
            "stmt/" + AUTH_VALUE_ID,
            self.params_digest,
            self.policy.digest(),
            g.encode_element(self.requester_pk),
            self.worker_ct.encode(g),
            enc_u16(len(self.final_cts)) + b"".join(ct.encode(g) for ct in self.final_cts),
        )

    @classmethod
    def decode(cls, ctx: CryptoContext, data: bytes, policy: TaskPolicy) -> "AuthValueStatement":
        g = ctx.group
        r = open_record(data, "stmt/" + AUTH_VALUE_ID)
        params = r.chunk()
        if r.chunk() != policy.digest():
            raise EncodingError("statement was formed under a different policy")
        pk = g.decode_element(r.chunk())
        worker_ct = decode_ciphertext(g, r.chunk())
        final_cts = _split_ciphertexts(ctx, r.chunk())
        if not r.done():
            raise EncodingError("trailing bytes in statement")
        return cls(params, policy, pk, worker_ct, final_cts)


@dataclass(frozen=True)
class AuthQualStatement:
    """Quality-step statement. An empty final ciphertext list marks a voided
    task, whose only admissible increment is (0, 0)."""

    params_digest: bytes
    policy: TaskPolicy
    requester_pk: GroupElement
    worker_ct: Ciphertext
    final_cts: tuple[Ciphertext, ...]
    old_pair: CommitmentPair  # the pair the worker submitted (re-randomized)
    new_pair: CommitmentPair  # the posted updated pair, dummy term excluded

    @property
    def void(self) -> bool:
        return len(self.final_cts) == 0

    def validate(self, ctx: CryptoContext) -> None:
        _need_digest(self.params_digest, "params digest")
        _need(isinstance(self.policy, TaskPolicy), "policy missing")
        _need(isinstance(self.requester_pk, GroupElement), "public key missing")
        _need(isinstance(self.worker_ct, Ciphertext), "worker ciphertext missing")
        _need(
            len(self.final_cts) in (0, _final_ct_count(self.policy)),
            "final ciphertext list has the wrong length for the policy",
        )
        _need(isinstance(self.old_pair, CommitmentPair), "old pair missing")
        _need(isinstance(self.new_pair, CommitmentPair), "new pair missing")

    def encode(self, ctx: CryptoContext) -> bytes:
        self.validate(ctx)
        g = ctx.group
        return record(
            "stmt/" + AUTH_QUAL_ID,
            self.params_digest,
            self.policy.digest(),
            g.encode_element(self.requester_pk),
            self.worker_ct.encode(g),
            enc_u16(len(self.final_cts)) + b"".join(ct.encode(g) for ct in self.final_cts),
            self.old_pair.encode(g),
            self.new_pair.encode(g),
        )

    @classmethod
    def decode(cls, ctx: CryptoContext, data: bytes, policy: TaskPolicy) -> "AuthQualStatement":
        g = ctx.group
        r = open_record(data, "stmt/" + AUTH_QUAL_ID)
        params = r.chunk()
        if r.chunk() != policy.digest():
            raise EncodingError("statement was formed under a different policy")
        pk = g.decode_element(r.chunk())
        worker_ct = decode_ciphertext(g, r.chunk())
        final_cts = _split_ciphertexts(ctx, r.chunk())
        old_pair = decode_commitment_pair(g, r.chunk())
        new_pair = decode_commitment_pair(g, r.chunk())
        if not r.done():
            raise EncodingError("trailing bytes in statement")
        return cls(params, policy, pk, worker_ct, final_cts, old_pair, new_pair)


def _split_ciphertexts(ctx: CryptoContext, data: bytes) -> tuple[Ciphertext, ...]:
    if len(data) < 2:
        raise EncodingError("ciphertext list truncated")
    count = int.from_bytes(data[:2], "little")
    body = data[2:]
    if count == 0:
        if body:
            raise EncodingError("trailing bytes in ciphertext list")
        return ()
    if len(body) % count:
        raise EncodingError("ciphertext list length mismatch")
    step = len(body) // count
    return tuple(
        decode_ciphertext(ctx.group, body[i * step : (i + 1) * step]) for i in range(count)
    )


# ── witnesses ────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ProveQualWitness:
    ident: Scalar
    cert: Signature
    alpha: int
    beta: int
    base_blind: BlindingPair  # opens the bare pair posted last epoch
    stored_pair: CommitmentPair  # the accumulated registry leaf
    rerand: BlindingPair  # freshly drawn re-randomization
    dummy_blind: BlindingPair  # the accumulator's cover term; base + dummy opens the leaf
    answer: int
    answer_rand: Scalar
    address: int
    address_rand: Scalar
    path: MerklePath


@dataclass(frozen=True)
class AuthCalcWitness:
    sk: Scalar


@dataclass(frozen=True)
class AuthValueWitness:
    sk: Scalar


@dataclass(frozen=True)
class AuthQualWitness:
    sk: Scalar
    update_blind: BlindingPair  # randomness of the posted increment commitment


# ── checkers ─────────────────────────────────────────────────────────────────


def check_prove_qual(ctx: CryptoContext, stmt: ProveQualStatement, wit: ProveQualWitness) -> bool:
    stmt.validate(ctx)
    g = ctx.group

    # credential over the enrolled identifier
    if not verify_sig(g, stmt.ra_pk, ident_message(ctx, wit.ident), wit.cert):
        return False

    # hidden quality state is consistent and clears the admission threshold;
    # the leaf opens under the posted-pair randomness plus the cover term
    if wit.alpha < 1 or wit.beta < 1:
        return False
    if not clears_threshold(QualityState(wit.alpha, wit.beta), stmt.policy):
        return False
    if not open_pair_check(g, wit.stored_pair, wit.alpha, wit.beta, wit.base_blind + wit.dummy_blind):
        return False

    # tag binds the stored pair to the identifier
    if stmt.quality_tag != quality_tag(g, wit.stored_pair, wit.ident):
        return False

    # ciphertexts encrypt the claimed plaintexts under the requester key
    try:
        answer_elem = ctx.answer_codec.forward(wit.answer)
        address_elem = ctx.address_codec.forward(wit.address)
    except DomainError:
        return False
    if wit.answer >= stmt.policy.domain_size:
        return False
    if stmt.answer_ct != encrypt(g, stmt.requester_pk, answer_elem, wit.answer_rand):
        return False
    if stmt.address_ct != encrypt(g, stmt.requester_pk, address_elem, wit.address_rand):
        return False

    # the stored pair is accumulated under the pinned root
    if not verify_path(stmt.tree_root, wit.stored_pair.encode(g), wit.path):
        return False

    # the submitted pair re-randomizes the stored one
    return stmt.fresh_pair == pair_rerandomize(g, wit.stored_pair, wit.rerand)


def _decrypt_answers(ctx, sk: Scalar, cts) -> list[int] | None:
    out = []
    for ct in cts:
        try:
            out.append(decrypt_message(ctx.group, sk, ctx.answer_codec, ct))
        except DomainError:
            return None
    return out


def _decrypt_final(ctx, sk: Scalar, stmt) -> FinalAnswer | None:
    values = _decrypt_answers(ctx, sk, stmt.final_cts)
    if values is None:
        return None
    if stmt.policy.kind == AVERAGE:
        if values[1] < 1:
            return None
        return FinalAnswer(AVERAGE, (values[0], values[1]))
    return FinalAnswer(MAJORITY, tuple(values))


def check_auth_calc(ctx: CryptoContext, stmt: AuthCalcStatement, wit: AuthCalcWitness) -> bool:
    stmt.validate(ctx)
    if ctx.group.mul_gen(wit.sk) != stmt.requester_pk:
        return False
    answers = _decrypt_answers(ctx, wit.sk, stmt.answer_cts)
    if answers is None:
        return False
    try:
        recounted = ans_calc(answers, stmt.policy)
    except ValueError:
        return False
    posted = _decrypt_final(ctx, wit.sk, stmt)
    return posted is not None and posted == recounted


def check_auth_value(ctx: CryptoContext, stmt: AuthValueStatement, wit: AuthValueWitness) -> bool:
    stmt.validate(ctx)
    if ctx.group.mul_gen(wit.sk) != stmt.requester_pk:
        return False
    final = _decrypt_final(ctx, wit.sk, stmt)
    if final is None:
        return False
    try:
        answer = decrypt_message(ctx.group, wit.sk, ctx.answer_codec, stmt.worker_ct)
    except DomainError:
        return False
    if answer >= stmt.policy.domain_size:
        return False
    return is_correct(answer, final, stmt.policy)


def check_auth_qual(ctx: CryptoContext, stmt: AuthQualStatement, wit: AuthQualWitness) -> bool:
    stmt.validate(ctx)
    g = ctx.group
    if g.mul_gen(wit.sk) != stmt.requester_pk:
        return False
    if stmt.void:
        increment = (0, 0)
    else:
        final = _decrypt_final(ctx, wit.sk, stmt)
        if final is None:
            return False
        try:
            answer = decrypt_message(g, wit.sk, ctx.answer_codec, stmt.worker_ct)
        except DomainError:
            return False
        if answer >= stmt.policy.domain_size:
            return False
        increment = (1, 0) if is_correct(answer, final, stmt.policy) else (0, 1)
    expected = pair_add(
        g, stmt.old_pair, commit_pair(g, increment[0], increment[1], wit.update_blind)
    )
    return expected == stmt.new_pair


# ── proof backend ────────────────────────────────────────────────────────────

_DST_SETUP = b"anoncrowd/v1/backend-setup"
_DST_ATTEST = b"anoncrowd/v1/attestation"

_RELATIONS = {
    ProveQualStatement: (PROVE_QUAL_ID, check_prove_qual),
    AuthCalcStatement: (AUTH_CALC_ID, check_auth_calc),
    AuthValueStatement: (AUTH_VALUE_ID, check_auth_value),
    AuthQualStatement: (AUTH_QUAL_ID, check_auth_qual),
}

_DECODERS = {
    PROVE_QUAL_ID: ProveQualStatement.decode,
    AUTH_CALC_ID: AuthCalcStatement.decode,
    AUTH_VALUE_ID: AuthValueStatement.decode,
    AUTH_QUAL_ID: AuthQualStatement.decode,
}


def relation_id_for(stmt) -> str:
    try:
        return _RELATIONS[type(stmt)][0]
    except KeyError:
        raise MalformedStatementError(f"unknown statement type {type(stmt).__name__}")


def decode_statement(ctx: CryptoContext, relation_id: str, data: bytes, policy: TaskPolicy):
    try:
        decoder = _DECODERS[relation_id]
    except KeyError:
        raise EncodingError(f"unknown relation id {relation_id!r}")
    return decoder(ctx, data, policy)


def statement_digest(ctx: CryptoContext, stmt) -> bytes:
    return hash_bytes(stmt.encode(ctx))


@dataclass(frozen=True)
class Proof:
    relation_id: str
    statement_digest: bytes
    attestation: bytes

    def encode(self) -> bytes:
        return record(
            "proof",
            self.relation_id.encode("ascii"),
            self.statement_digest,
            self.attestation,
        )

    @classmethod
    def decode(cls, data: bytes) -> "Proof":
        r = open_record(data, "proof")
        rid = r.chunk().decode("ascii")
        digest = r.chunk()
        att = r.chunk()
        if not r.done():
            raise EncodingError("trailing bytes in proof")
        if len(digest) != 32 or len(att) != 32:
            raise EncodingError("proof digests must be 32 bytes")
        return cls(rid, digest, att)


class ProofBackend:
    """Attestation oracle over the four relations, keyed by a setup seed.

    One instance plays the role of the proving system for a whole
    simulation: all parties hold it, honest parties only obtain proofs via
    prove(), and an adversary without the instance cannot do better than
    guessing a 256-bit attestation.
    """

    def __init__(self, setup_seed: bytes):
        self._secrets = {
            rid: hash_bytes(_DST_SETUP + setup_seed + rid.encode("ascii"))
            for rid, _ in _RELATIONS.values()
        }
        self.setup_digest = hash_bytes(
            b"backend-public" + b"".join(hash_bytes(s) for s in sorted(self._secrets.values()))
        )

    def _attest(self, ctx: CryptoContext, rid: str, stmt) -> bytes:
        return hash_bytes(_DST_ATTEST + self._secrets[rid] + stmt.encode(ctx))

    def check(self, ctx: CryptoContext, stmt, witness) -> bool:
        """Runs the relation checker without producing a proof."""
        _, checker = _RELATIONS[type(stmt)]
        return checker(ctx, stmt, witness)

    def prove(self, ctx: CryptoContext, stmt, witness) -> Proof:
        rid, checker = _RELATIONS.get(type(stmt), (None, None))
        if rid is None:
            raise MalformedStatementError(f"unknown statement type {type(stmt).__name__}")
        if not checker(ctx, stmt, witness):
            raise RelationUnsatisfiedError(f"witness does not satisfy {rid}")
        return Proof(rid, statement_digest(ctx, stmt), self._attest(ctx, rid, stmt))

    def verify(self, ctx: CryptoContext, stmt, proof: Proof) -> bool:
        rid = relation_id_for(stmt)
        if proof.relation_id != rid:
            return False
        if proof.statement_digest != statement_digest(ctx, stmt):
            return False
        return proof.attestation == self._attest(ctx, rid, stmt)
