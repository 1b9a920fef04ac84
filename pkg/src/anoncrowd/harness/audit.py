"""Independent re-verification of a run's transaction log.

verify_log holds no agent secrets. From the log alone it rebuilds the
crypto context, replays every screening verdict, re-verifies every
attestation, recomputes fees and escrow flows, and checks that the hash
chain over the lines is intact and signed off by the registration
authority's key from the header.

Two trust anchors come from the header: the authority's public key (for
the signoff) and the attestation setup seed. A deployment would publish a
verification key instead of a seed; the simulated backend needs the seed
itself to recompute attestations, so the log carries it. Nothing else in
the audit depends on that shortcut.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from ..actors import QualityPost, TaskPublic, decode_final_bundle, screen_responses
from ..context import CryptoContext, production_context, tiny_context
from ..errors import EncodingError
from ..ledger import (
    CONFISCATE,
    CREATE_TASK,
    FINALIZE,
    REFUND,
    SUBMIT_AUTH_CALC,
    SUBMIT_QUALITY,
    SUBMIT_RESPONSE,
    VOID_TASK,
    WORKER_PAYMENT,
    FeeParams,
    GasSchedule,
    LedgerRecord,
)
from ..policy import MAJORITY, TaskPolicy
from ..primitives import decode_signature, hash_bytes, verify_sig
from ..relations import (
    AuthCalcStatement,
    AuthQualStatement,
    AuthValueStatement,
    ProofBackend,
)

CHAIN_SEED = hash_bytes(b"anoncrowd/v1/log-chain")


def canonical_line(obj: dict) -> str:
    """The one serialization the hash chain is defined over."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def chain_digest(prev: bytes, event: dict) -> bytes:
    """Next chain value; `event` must not carry its own chain field."""
    return hash_bytes(prev + canonical_line(event).encode("utf-8"))


@dataclass
class AuditReport:
    ok: bool
    problems: list[str] = field(default_factory=list)
    stats: dict[str, int] = field(default_factory=dict)

    def render(self) -> str:
        lines = [f"log audit: {'PASS' if self.ok else 'FAIL'}"]
        for key in sorted(self.stats):
            lines.append(f"  {key}: {self.stats[key]}")
        for problem in self.problems:
            lines.append(f"  problem: {problem}")
        return "\n".join(lines) + "\n"


def verify_log_text(text: str) -> AuditReport:
    return verify_log(text.splitlines())


def _context_for(backend: str) -> CryptoContext:
    if backend == "curve254":
        return production_context()
    if backend == "tiny31":
        return tiny_context()
    raise ValueError(f"unknown backend {backend!r}")


def _policy_from_header(d: dict) -> TaskPolicy:
    return TaskPolicy(
        kind=d["kind"],
        domain_size=d["domain_size"],
        threshold=Fraction(d["threshold"]),
        pay_correct=d["pay_correct"],
        pay_incorrect=d["pay_incorrect"],
        winners=d["winners"],
        epsilon=Fraction(d["epsilon"]),
    )


def verify_log(lines: Iterable[str]) -> AuditReport:
    problems: list[str] = []
    stats = {"lines": 0, "txs": 0, "rounds": 0, "proofs_verified": 0}

    # pass 1: parse and walk the hash chain
    events: list[dict] = []
    signoff: dict | None = None
    chain = CHAIN_SEED
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        stats["lines"] += 1
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError:
            return AuditReport(False, [f"line {lineno}: not valid json"], stats)
        if not isinstance(obj, dict) or "type" not in obj:
            return AuditReport(False, [f"line {lineno}: not a log event"], stats)
        if obj["type"] == "signoff":
            signoff = obj
            continue
        if signoff is not None:
            return AuditReport(False, [f"line {lineno}: event after the signoff"], stats)
        body = {k: v for k, v in obj.items() if k != "chain"}
        chain = chain_digest(chain, body)
        if obj.get("chain") != chain.hex():
            return AuditReport(False, [f"line {lineno}: hash chain mismatch"], stats)
        events.append(body)

    if not events or events[0]["type"] != "header":
        return AuditReport(False, ["log does not start with a header"], stats)
    header = events[0]
    try:
        if header["version"] != 1:
            return AuditReport(False, [f"unsupported log version {header['version']}"], stats)
        ctx = _context_for(header["backend"])
        g = ctx.group
        if header["params_digest"] != ctx.params_digest.hex():
            problems.append("header parameter digest does not match this build")
        ra_pk = g.decode_element(bytes.fromhex(header["ra_pk"]))
        requester_pk = g.decode_element(bytes.fromhex(header["requester_pk"]))
        backend = ProofBackend(bytes.fromhex(header["backend_seed"]))
        policy = _policy_from_header(header["policy"])
        min_workers = header["min_workers"]
        fee = FeeParams(header["base_fee_gwei"], header["tip_gwei"], header["eth_usd"])
    except (KeyError, ValueError, EncodingError) as exc:
        return AuditReport(False, [f"header does not parse: {exc}"], stats)

    if signoff is None:
        problems.append("log carries no signoff")
    else:
        if signoff.get("chain") != chain.hex():
            problems.append("signoff does not cover the log contents")
        try:
            sig = decode_signature(g, bytes.fromhex(signoff["sig"]))
            if not verify_sig(g, ra_pk, bytes.fromhex(signoff["chain"]), sig):
                problems.append("signoff signature does not verify")
        except (KeyError, ValueError, EncodingError):
            problems.append("signoff signature is malformed")

    # pass 2: group events
    metas: dict[int, dict] = {}
    screenings: dict[int, dict] = {}
    arbitrations: dict[int, list[dict]] = {}
    txs: list[LedgerRecord] = []
    summaries: list[dict] = []
    for event in events[1:]:
        kind = event["type"]
        if kind == "round":
            metas[event["round"]] = event
        elif kind == "screening":
            screenings[event["round"]] = event
        elif kind == "arbitration":
            arbitrations.setdefault(event["round"], []).append(event)
        elif kind == "tx":
            try:
                txs.append(LedgerRecord.from_json_dict(event))
            except (KeyError, ValueError) as exc:
                problems.append(f"transaction event does not parse: {exc}")
        elif kind == "summary":
            summaries.append(event)
        else:
            problems.append(f"unknown event type {kind!r}")
    stats["txs"] = len(txs)

    if sorted(metas) != list(range(header["rounds"])):
        problems.append("round metadata does not cover rounds 0..n-1")
    known_seqs = {meta["task_seq"] for meta in metas.values()}
    for rec in txs:
        if rec.task_seq != -1 and rec.task_seq not in known_seqs:
            problems.append(f"tx {rec.index} belongs to an unknown task {rec.task_seq}")
    for r in screenings:
        if r not in metas:
            problems.append(f"screening event for unknown round {r}")

    # pass 3: per-transaction fee and timing rules
    sched = GasSchedule()
    for rec in txs:
        try:
            gas = sched.for_method(rec.method)
        except KeyError:
            problems.append(f"tx {rec.index}: unknown method {rec.method!r}")
            continue
        if rec.gas != gas:
            problems.append(f"tx {rec.index}: gas {rec.gas} != schedule {gas}")
        if rec.fee_wei != fee.fee_wei(rec.gas):
            problems.append(f"tx {rec.index}: fee {rec.fee_wei} off the fee rule")
        if rec.inclusion_block <= rec.submitted_block:
            problems.append(f"tx {rec.index}: included before it was submitted")

    # pass 4: replay each round
    tags_seen: set[bytes] = set()
    for r in sorted(metas):
        meta = metas[r]
        prefix = f"round {r}: "
        round_txs = [t for t in txs if t.task_seq == meta["task_seq"]]
        stats["rounds"] += 1

        screening = screenings.get(r)
        if screening is None:
            problems.append(prefix + "no screening event")
            continue
        included = sorted(
            (
                t
                for t in round_txs
                if t.method == SUBMIT_RESPONSE and t.inclusion_block <= meta["response_deadline"]
            ),
            key=lambda t: (t.inclusion_block, t.index),
        )
        try:
            task_pub = TaskPublic(policy, requester_pk, ra_pk, bytes.fromhex(meta["tree_root"]))
        except ValueError:
            problems.append(prefix + "tree root does not parse")
            continue
        accepted, rejections = screen_responses(
            ctx, backend, task_pub, [(t.index, t.payload) for t in included], tags_seen
        )
        stats["proofs_verified"] += len(included)
        tags_seen.update(p.tag for p in accepted)
        if [p.ref for p in accepted] != list(screening["accepted"]):
            problems.append(prefix + "screening acceptances do not replay")
        if [[ref, why] for ref, why in rejections] != [list(x) for x in screening["rejections"]]:
            problems.append(prefix + "screening rejections do not replay")
        void = len(accepted) < min_workers
        if bool(screening["void"]) != void:
            problems.append(prefix + "void flag does not match the quorum rule")

        void_txs = [t for t in round_txs if t.method == VOID_TASK]
        if void and len(void_txs) != 1:
            problems.append(prefix + "voided round must carry exactly one void transaction")
        if not void and void_txs:
            problems.append(prefix + "quorate round carries a void transaction")

        calc_txs = [t for t in round_txs if t.method == SUBMIT_AUTH_CALC]
        final_cts = ()
        accepted_by_ref = {p.ref: p for p in accepted}
        if void:
            if calc_txs:
                problems.append(prefix + "voided round carries a final answer")
        elif len(calc_txs) != 1:
            problems.append(prefix + "expected exactly one final answer post")
        else:
            count = policy.winners if policy.kind == MAJORITY else 2
            try:
                final_cts, calc_proof = decode_final_bundle(ctx, calc_txs[0].payload, count)
            except (EncodingError, ValueError):
                problems.append(prefix + "final answer bundle does not decode")
            else:
                calc_stmt = AuthCalcStatement(
                    params_digest=ctx.params_digest,
                    policy=policy,
                    requester_pk=requester_pk,
                    answer_cts=tuple(p.answer_ct for p in accepted),
                    final_cts=final_cts,
                )
                if backend.verify(ctx, calc_stmt, calc_proof):
                    stats["proofs_verified"] += 1
                else:
                    problems.append(prefix + "final answer attestation fails")

        covered: set[int] = set()
        value_count = 0
        for t in (t for t in round_txs if t.method == SUBMIT_QUALITY):
            try:
                post = QualityPost.decode(ctx, t.payload)
            except (EncodingError, ValueError):
                problems.append(prefix + f"quality post tx {t.index} does not decode")
                continue
            target = accepted_by_ref.get(post.response_ref)
            if target is None:
                problems.append(prefix + f"quality post for unaccepted response {post.response_ref}")
                continue
            if post.response_ref in covered:
                problems.append(prefix + f"response {post.response_ref} has two quality posts")
                continue
            qual_stmt = AuthQualStatement(
                params_digest=ctx.params_digest,
                policy=policy,
                requester_pk=requester_pk,
                worker_ct=target.answer_ct,
                final_cts=final_cts,
                old_pair=target.fresh_pair,
                new_pair=post.new_pair,
            )
            if not backend.verify(ctx, qual_stmt, post.qual_proof):
                problems.append(prefix + f"quality attestation fails for response {post.response_ref}")
                continue
            stats["proofs_verified"] += 1
            covered.add(post.response_ref)
            if post.value_proof is None:
                continue
            if void:
                problems.append(prefix + "voided round carries a correctness attestation")
                continue
            value_stmt = AuthValueStatement(
                params_digest=ctx.params_digest,
                policy=policy,
                requester_pk=requester_pk,
                worker_ct=target.answer_ct,
                final_cts=final_cts,
            )
            if backend.verify(ctx, value_stmt, post.value_proof):
                value_count += 1
                stats["proofs_verified"] += 1
            else:
                problems.append(prefix + f"correctness attestation fails for response {post.response_ref}")

        upheld_refs = {a["ref"] for a in arbitrations.get(r, []) if a["upheld"]}
        confiscations = [t for t in round_txs if t.method == CONFISCATE]
        for p in accepted:
            if p.ref not in covered and p.ref not in upheld_refs:
                problems.append(
                    prefix + f"accepted response {p.ref} got no quality post and no upheld protest"
                )
        if upheld_refs and not confiscations:
            problems.append(prefix + "upheld protest without a confiscation")
        if confiscations and not upheld_refs:
            problems.append(prefix + "confiscation without an upheld protest")

        pay_txs = [t for t in round_txs if t.method == WORKER_PAYMENT]
        if void:
            if pay_txs:
                problems.append(prefix + "voided round pays workers")
        else:
            if len(pay_txs) != len(covered):
                problems.append(prefix + f"{len(pay_txs)} payments for {len(covered)} served responses")
            amounts = Counter(-t.value_wei for t in pay_txs)
            if any(a not in (policy.pay_correct, policy.pay_incorrect) for a in amounts):
                problems.append(prefix + "payment amount outside the policy")
            elif policy.pay_correct != policy.pay_incorrect:
                if amounts.get(policy.pay_correct, 0) != value_count:
                    problems.append(
                        prefix + "correct-answer payments do not match the correctness attestations"
                    )

        create_txs = [t for t in round_txs if t.method == CREATE_TASK]
        escrow_in = meta["escrow_wei"]
        if len(create_txs) != 1:
            problems.append(prefix + "expected exactly one task creation")
        elif create_txs[0].value_wei != escrow_in:
            problems.append(prefix + "escrow deposit does not match the announced amount")
        outgoing = sum(-t.value_wei for t in round_txs if t.value_wei < 0)
        closed = any(t.method in (FINALIZE, VOID_TASK, CONFISCATE) for t in round_txs)
        if closed and outgoing != escrow_in:
            problems.append(prefix + f"escrow not conserved: {escrow_in} in, {outgoing} out")
        if not closed:
            problems.append(prefix + "task was never closed")
        if void and len(create_txs) == 1:
            refunds = Counter(
                (t.beneficiary, -t.value_wei) for t in round_txs if t.method == REFUND
            )
            expected = Counter((t.sender, t.fee_wei) for t in included)
            remainder = escrow_in - sum(t.fee_wei for t in included)
            if remainder > 0:
                expected[(create_txs[0].sender, remainder)] += 1
            if refunds != expected:
                problems.append(prefix + "void refunds do not reimburse the responders")

    # pass 5: summary totals
    if len(summaries) != 1:
        problems.append("expected exactly one summary event")
    else:
        s = summaries[0]
        gas: dict[str, int] = {}
        for t in txs:
            gas[t.sender] = gas.get(t.sender, 0) + t.gas
        paid = sum(-t.value_wei for t in txs if t.method == WORKER_PAYMENT)
        confiscated = sum(-t.value_wei for t in txs if t.method == CONFISCATE)
        if s.get("gas_by_sender") != gas:
            problems.append("summary gas totals do not match the transactions")
        if s.get("payments_wei") != paid:
            problems.append("summary payment total does not match the transactions")
        if s.get("confiscated_wei") != confiscated:
            problems.append("summary confiscation total does not match the transactions")

    return AuditReport(not problems, problems, stats)
