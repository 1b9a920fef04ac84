"""The conductor: plays one scenario onto a simulated chain, end to end.

Everything a run produces is deterministic in (scenario, seed, attack):
agent randomness, inclusion latency, payout addresses and claim keys all
derive from the one seed, so two runs with the same inputs emit identical
reports and identical log bytes. The log is a hash-chained JSONL stream
signed off by the registration authority; audit.verify_log replays every
screening verdict and proof in it without any of the agents' secrets.

The runner also self-checks: escrow conservation, a plaintext recount of
the final answer, payment amounts against the policy, and (per attack
toggle) the one detection event the attack is supposed to trigger. Failed
checks land in RunResult.failures and the report; the CLI exits 1 on any.

Attack toggles wire one misbehaving party into an otherwise honest cast:

* duplicate-response: an outsider resubmits a worker's response verbatim;
* forged-proof: an outsider replays a response with a doctored proof;
* stale-quality: a worker replays last round's quality state (two rounds);
* deprivation: the requester withholds one worker's update and pay;
* void-task: too few workers respond and the task voids.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..actors import (
    QualityPost,
    RegistrationAuthority,
    RequesterAgent,
    WorkerAgent,
    payout_account,
    REJECT_DUP_TAG,
    REJECT_PROOF,
    REJECT_STALE,
)
from ..context import CryptoContext, production_context, tiny_context
from ..errors import ConfigError
from ..ledger import (
    BLOCK_SECONDS,
    PROCESSING,
    SUBMIT_RESPONSE,
    ChainTaskParams,
    FeeParams,
    Ledger,
)
from ..policy import AVERAGE, FinalAnswer, ans_calc, is_correct, paym_calc
from ..primitives import sign
from ..relations import (
    AUTH_CALC_ID,
    AUTH_QUAL_ID,
    AUTH_VALUE_ID,
    PROVE_QUAL_ID,
    ProofBackend,
)
from .audit import CHAIN_SEED, canonical_line, chain_digest
from .fixtures import load_fixture
from .scenario import ATTACKS, ScenarioConfig

REQUESTER = "requester"
ADVERSARY = "adversary"
LOG_VERSION = 1
_ADDRESS_SPACE = 1 << 20  # payout addresses drawn small so decryption is quick


def _context_for(name: str) -> CryptoContext:
    if name == "curve254":
        return production_context()
    if name == "tiny31":
        return tiny_context()
    raise ConfigError(f"unknown backend {name!r}")


@dataclass
class RoundStats:
    index: int
    task_seq: int
    opened_block: int
    collect_blocks: int
    process_blocks: int
    submitted: int
    included: int
    accepted: int
    rejections: list[tuple[int, str]]
    void: bool
    final_text: str
    value_proofs: int
    posts_onchain: int
    payments_wei: int
    refunded_wei: int
    confiscated_wei: int
    escrow_ok: bool
    protests: int
    upheld: int
    notes: list[str] = field(default_factory=list)


@dataclass
class WorkerRow:
    name: str
    alpha: int
    beta: int
    paid_wei: int
    status: str


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    attack: str | None
    rounds: list[RoundStats]
    worker_rows: list[WorkerRow]
    proof_counts: dict[str, int]
    failures: list[str]
    simulated_blocks: int
    report: str
    log_lines: list[str]

    def write_log(self, path: str) -> None:
        with open(path, "w") as fh:
            for line in self.log_lines:
                fh.write(line + "\n")


def _final_text(final: FinalAnswer | None) -> str:
    if final is None:
        return "void"
    if final.kind == AVERAGE:
        num, den = final.values
        return f"average -> {num}/{den} ({num / den:.3f})"
    return "majority -> " + ",".join(str(v) for v in final.values)


def _policy_header(policy) -> dict:
    return {
        "kind": policy.kind,
        "domain_size": policy.domain_size,
        "threshold": str(policy.threshold),
        "epsilon": str(policy.epsilon),
        "winners": policy.winners,
        "pay_correct": policy.pay_correct,
        "pay_incorrect": policy.pay_incorrect,
    }


def run(config: ScenarioConfig, seed: int, attack: str | None = None) -> RunResult:
    if attack is not None and attack not in ATTACKS:
        raise ConfigError(f"unknown attack {attack!r} (one of {', '.join(ATTACKS)})")
    config.validate()
    rounds = max(config.rounds, 2) if attack == "stale-quality" else config.rounds
    policy = config.policy

    ctx = _context_for(config.backend)
    g = ctx.group
    master = random.Random(seed)
    backend_seed = master.getrandbits(256).to_bytes(32, "little")
    backend = ProofBackend(backend_seed)
    ledger_seed = master.getrandbits(64)
    ra_rng = random.Random(master.getrandbits(64))
    req_rng = random.Random(master.getrandbits(64))
    worker_rngs = [random.Random(master.getrandbits(64)) for _ in range(config.worker_count)]
    address_rng = random.Random(master.getrandbits(64))

    fee = FeeParams(config.base_fee_gwei, config.tip_gwei, config.eth_usd)
    ledger = Ledger(seed=ledger_seed, profile=config.profile, fee=fee)
    ledger.fund(REQUESTER, config.requester_funding_wei)
    ledger.fund(ADVERSARY, config.worker_funding_wei)

    ra = RegistrationAuthority(ctx, backend, ra_rng, prior=config.prior)
    requester = RequesterAgent(ctx, backend, REQUESTER, req_rng)
    workers: list[WorkerAgent] = []
    for i in range(config.worker_count):
        name = f"worker-{i:03d}"
        ledger.fund(name, config.worker_funding_wei)
        w = WorkerAgent(ctx, backend, name, f"{config.name}/{seed}/{name}".encode(), worker_rngs[i])
        w.enroll(ra)
        workers.append(w)

    answers = load_fixture(config.fixture)
    if len(answers) < config.worker_count:
        raise ConfigError(
            f"fixture holds {len(answers)} answers but the scenario has {config.worker_count} workers"
        )
    answers = answers[: config.worker_count]
    for i, a in enumerate(answers):
        if not 0 <= a < policy.domain_size:
            raise ConfigError(f"fixture row {i}: answer {a} outside the policy domain")

    contract = ledger.deploy(REQUESTER)
    round_events: list[dict] = []
    screening_events: list[dict] = []
    arbitration_events: list[dict] = []
    stats: list[RoundStats] = []
    failures: list[str] = []
    proof_counts = {PROVE_QUAL_ID: 0, AUTH_CALC_ID: 0, AUTH_QUAL_ID: 0, AUTH_VALUE_ID: 0}
    paid_to_worker: dict[str, int] = {w.name: 0 for w in workers}
    status: dict[str, str] = {w.name: "idle" for w in workers}
    stale_snapshot = None

    for r in range(rounds):
        task_pub = requester.announce(policy, ra)
        params = ChainTaskParams(
            response_deadline=ledger.block + config.response_window,
            processing_deadline=ledger.block + config.response_window + config.processing_window,
            min_workers=config.min_workers,
            escrow_wei=config.escrow_wei,
        )
        opened_block = ledger.block
        task = ledger.create_task(contract, REQUESTER, params)
        round_events.append(
            {
                "type": "round",
                "round": r,
                "task_seq": task.seq,
                "tree_root": task_pub.tree_root.hex(),
                "response_deadline": params.response_deadline,
                "processing_deadline": params.processing_deadline,
                "escrow_wei": params.escrow_wei,
                "opened_block": opened_block,
            }
        )
        notes: list[str] = []

        if attack == "stale-quality" and r == 0:
            stale_snapshot = workers[0].cred  # replayed next round
        cheater_real_cred = None
        if attack == "stale-quality" and r == 1:
            cheater_real_cred = workers[0].cred
            workers[0].cred = stale_snapshot
            notes.append("worker-000 replays its previous quality state")

        responders = list(range(config.worker_count))
        if attack == "void-task":
            responders = responders[: config.min_workers - 1]
            notes.append(
                f"only {len(responders)} workers respond, below the quorum of {config.min_workers}"
            )

        addresses = address_rng.sample(range(_ADDRESS_SPACE), config.worker_count)
        account_to_worker = {payout_account(addresses[i]): workers[i].name for i in responders}
        submitted = 0
        ref_to_worker: dict[int, WorkerAgent] = {}
        ref_to_answer: dict[int, int] = {}
        kept_bundles: dict[int, bytes] = {}
        for pos, i in enumerate(responders):
            w = workers[i]
            if not w.qualifies(policy):
                status[w.name] = "sat out below threshold"
                notes.append(f"{w.name} no longer clears the admission threshold and sits out")
                continue
            bundle = w.build_response(ra, task_pub, answers[i], address=addresses[i])
            rec = ledger.submit_response(contract, w.name, bundle)
            w.mark_submitted(rec.index)
            ref_to_worker[rec.index] = w
            ref_to_answer[rec.index] = answers[i]
            kept_bundles[i] = bundle
            submitted += 1
            if pos % 7 == 6:
                ledger.tick(1)

        if attack == "duplicate-response" and 0 in kept_bundles:
            ledger.tick(2)
            rec = ledger.submit_response(contract, ADVERSARY, kept_bundles[0])
            ref_to_answer[rec.index] = answers[0]  # byte copy carries the same answer
            submitted += 1
            notes.append(f"an outsider resubmits worker-000's response verbatim (tx {rec.index})")
        if attack == "forged-proof" and 1 in kept_bundles:
            ledger.tick(2)
            source = kept_bundles[1]
            forged = source[:-1] + bytes([source[-1] ^ 0x01])
            rec = ledger.submit_response(contract, ADVERSARY, forged)
            submitted += 1
            notes.append(f"an outsider replays a response with a doctored attestation (tx {rec.index})")

        ledger.tick_to(params.response_deadline + 1)
        included_records = ledger.included_responses(task)
        included = [(rec.index, rec.payload) for rec in included_records]
        proof_counts[PROVE_QUAL_ID] += len(
            [t for t in ledger.records if t.method == SUBMIT_RESPONSE and t.task_seq == task.seq]
        )
        tags_before = set(requester.seen_tags)

        outcome = requester.evaluate(task_pub, included, config.min_workers)
        screening_events.append(
            {
                "type": "screening",
                "round": r,
                "accepted": [p.ref for p in outcome.accepted],
                "rejections": [[ref, reason] for ref, reason in outcome.rejections],
                "void": outcome.void,
            }
        )
        for ref, reason in outcome.rejections:
            w = ref_to_worker.get(ref)
            if w is not None:
                status[w.name] = f"rejected: {reason}"

        victim_ref = None
        if attack == "deprivation" and not outcome.void and outcome.accepted:
            victim_ref = outcome.accepted[1 if len(outcome.accepted) > 1 else 0].ref
            notes.append(f"the requester withholds the update and pay for response {victim_ref}")

        payments_total = 0
        landed_leaves: list[bytes] = []
        if outcome.void:
            ledger.void_task(contract, REQUESTER)
            for post, leaf in zip(outcome.quality_posts, outcome.leaves):
                ledger.submit_quality(contract, REQUESTER, post)
                landed_leaves.append(leaf)
        else:
            ledger.submit_auth_calc(contract, REQUESTER, outcome.final_bundle)
            proof_counts[AUTH_CALC_ID] += 1
            ledger.tick(1)
            for parsed, post, leaf in zip(outcome.accepted, outcome.quality_posts, outcome.leaves):
                if parsed.ref == victim_ref:
                    continue
                ledger.submit_quality(contract, REQUESTER, post)
                landed_leaves.append(leaf)
            for parsed, (account, amount) in zip(outcome.accepted, outcome.payments):
                if parsed.ref == victim_ref:
                    continue
                ledger.worker_payment(contract, REQUESTER, account, amount)
                payments_total += amount
                earner = account_to_worker.get(account)
                if earner is not None:
                    paid_to_worker[earner] += amount
        ledger.tick(1)

        chain_posts = [rec.payload for rec in task.quality_posts]
        for leaf in landed_leaves:
            ra.accumulate(leaf)
        proof_counts[AUTH_QUAL_ID] += len(chain_posts)
        value_proofs = sum(
            1 for p in chain_posts if QualityPost.decode(ctx, p).value_proof is not None
        )
        proof_counts[AUTH_VALUE_ID] += value_proofs

        protests = []
        for ref in sorted(ref_to_worker):
            w = ref_to_worker[ref]
            grievance = w.adopt_update(ra, task_pub, chain_posts, outcome.final_cts)
            if grievance is None:
                status[w.name] = "adopted"
            else:
                protests.append((w, grievance))
        upheld_count = 0
        for w, grievance in protests:
            upheld = ra.arbitrate(
                grievance, task_pub, included, chain_posts, outcome.final_cts, tags_before
            )
            arbitration_events.append(
                {"type": "arbitration", "round": r, "ref": grievance.response_ref, "upheld": upheld}
            )
            if upheld:
                upheld_count += 1
                status[w.name] = "protest upheld, escrow confiscated"
                notes.append(f"protest over response {grievance.response_ref} upheld, escrow confiscated")
                if task.phase == PROCESSING:
                    ledger.confiscate(contract, grievance.payout)
            else:
                base = status[w.name]
                status[w.name] = (
                    f"{base}; protest rejected" if base.startswith("rejected") else "protest rejected"
                )
                notes.append(f"protest over response {grievance.response_ref} rejected")

        if attack == "stale-quality" and r == 1 and cheater_real_cred is not None:
            workers[0].cred = cheater_real_cred  # back on the honest track
            workers[0]._pending = None

        close_block = ledger.block
        if task.phase == PROCESSING:
            close_block = ledger.finalize(contract, REQUESTER).inclusion_block

        stats.append(
            RoundStats(
                index=r,
                task_seq=task.seq,
                opened_block=opened_block,
                collect_blocks=params.response_deadline - opened_block,
                process_blocks=max(close_block - params.response_deadline, 0),
                submitted=submitted,
                included=len(included),
                accepted=len(outcome.accepted),
                rejections=outcome.rejections,
                void=outcome.void,
                final_text=_final_text(outcome.final),
                value_proofs=value_proofs,
                posts_onchain=len(chain_posts),
                payments_wei=payments_total,
                refunded_wei=task.refunded_wei,
                confiscated_wei=task.confiscated_wei,
                escrow_ok=ledger.escrow_conserved(task),
                protests=len(protests),
                upheld=upheld_count,
                notes=notes,
            )
        )

        # self checks: conservation, recount, policy payments
        if not stats[-1].escrow_ok:
            failures.append(f"round {r}: escrow not conserved")
        if not outcome.void:
            recount = ans_calc([ref_to_answer[p.ref] for p in outcome.accepted], policy)
            if recount != outcome.final:
                failures.append(f"round {r}: final answer differs from the plaintext recount")
            for parsed, (account, amount) in zip(outcome.accepted, outcome.payments):
                expected = paym_calc(is_correct(ref_to_answer[parsed.ref], recount, policy), policy)
                if amount != expected:
                    failures.append(f"round {r}: payment for response {parsed.ref} off the policy")
                    break
        if attack is None and protests:
            failures.append(f"round {r}: protest in an honest run")
        ledger.tick(2)

    failures.extend(_attack_checks(attack, config, ledger, stats))

    header = {
        "type": "header",
        "version": LOG_VERSION,
        "scenario": config.name,
        "seed": seed,
        "attack": attack,
        "backend": g.name,
        "profile": config.profile,
        "base_fee_gwei": config.base_fee_gwei,
        "tip_gwei": config.tip_gwei,
        "eth_usd": config.eth_usd,
        "policy": _policy_header(policy),
        "prior": list(config.prior),
        "rounds": rounds,
        "min_workers": config.min_workers,
        "worker_count": config.worker_count,
        "params_digest": ctx.params_digest.hex(),
        "ra_pk": g.encode_element(ra.pk).hex(),
        "requester_pk": g.encode_element(requester.pk).hex(),
        "backend_seed": backend_seed.hex(),
    }
    summary = {
        "type": "summary",
        "gas_by_sender": dict(sorted(ledger.gas_by_sender().items())),
        "payments_wei": sum(s.payments_wei for s in stats),
        "confiscated_wei": sum(s.confiscated_wei for s in stats),
        "escrow_ok": all(s.escrow_ok for s in stats),
        "final_block": ledger.block,
    }
    events = [header]
    events.extend(round_events)
    events.extend({"type": "tx", **rec.to_json_dict()} for rec in ledger.records)
    events.extend(screening_events)
    events.extend(arbitration_events)
    events.append(summary)

    log_lines: list[str] = []
    chain = CHAIN_SEED
    for event in events:
        chain = chain_digest(chain, event)
        log_lines.append(canonical_line({**event, "chain": chain.hex()}))
    signoff_sig = sign(g, ra.keypair.sk, chain)
    log_lines.append(
        canonical_line({"type": "signoff", "chain": chain.hex(), "sig": signoff_sig.encode(g).hex()})
    )

    worker_rows = [
        WorkerRow(w.name, w.quality.alpha, w.quality.beta, paid_to_worker[w.name], status[w.name])
        for w in workers
    ]
    simulated_blocks = max((rec.inclusion_block for rec in ledger.records), default=0)
    report = _render_report(
        config, seed, attack, stats, worker_rows, proof_counts, failures, simulated_blocks, ledger, fee
    )
    return RunResult(
        config=config,
        seed=seed,
        attack=attack,
        rounds=stats,
        worker_rows=worker_rows,
        proof_counts=proof_counts,
        failures=failures,
        simulated_blocks=simulated_blocks,
        report=report,
        log_lines=log_lines,
    )


def _attack_checks(
    attack: str | None, config: ScenarioConfig, ledger: Ledger, stats: list[RoundStats]
) -> list[str]:
    """One designated detection per toggle, plus attacker-got-nothing."""
    if attack is None:
        return []
    failures = []
    rejections = [reason for s in stats for _, reason in s.rejections]
    adversary_spent = sum(r.fee_wei for r in ledger.records if r.sender == ADVERSARY)
    adversary_flat = ledger.balance(ADVERSARY) == config.worker_funding_wei - adversary_spent
    if attack == "duplicate-response":
        if rejections.count(REJECT_DUP_TAG) != 1:
            failures.append("expected exactly one duplicate-tag detection")
        if not adversary_flat:
            failures.append("the duplicating outsider was paid")
    elif attack == "forged-proof":
        if rejections.count(REJECT_PROOF) != 1:
            failures.append("expected exactly one invalid-proof detection")
        if not adversary_flat:
            failures.append("the forging outsider was paid")
    elif attack == "stale-quality":
        if rejections.count(REJECT_STALE) != 1:
            failures.append("expected exactly one stale-tag detection")
        if any(s.upheld for s in stats):
            failures.append("a stale replay won arbitration")
    elif attack == "deprivation":
        if not any(s.upheld for s in stats):
            failures.append("deprivation protest was not upheld")
        if not any(s.confiscated_wei > 0 for s in stats):
            failures.append("no escrow was confiscated")
    elif attack == "void-task":
        if not any(s.void for s in stats):
            failures.append("the task did not void")
        if any(s.payments_wei for s in stats):
            failures.append("a voided task paid workers")
    return failures


def _render_report(
    config: ScenarioConfig,
    seed: int,
    attack: str | None,
    stats: list[RoundStats],
    worker_rows: list[WorkerRow],
    proof_counts: dict[str, int],
    failures: list[str],
    simulated_blocks: int,
    ledger: Ledger,
    fee: FeeParams,
) -> str:
    eth = lambda wei: f"{wei / 10**18:.6f}"
    lines = []
    lines.append(f"== scenario {config.name} (seed {seed}) ==")
    if config.description:
        lines.append(config.description)
    lines.append(
        f"backend {config.backend}, network {config.profile}"
        f" (base {config.base_fee_gwei:g} gwei, tip {config.tip_gwei:g} gwei, 1 ETH = {config.eth_usd:.2f} USD)"
    )
    pol = config.policy
    extra = f" epsilon={pol.epsilon}" if pol.kind == AVERAGE else f" winners={pol.winners}"
    lines.append(
        f"policy {pol.kind} domain={pol.domain_size}{extra} threshold={pol.threshold}"
        f" pay {eth(pol.pay_correct)}/{eth(pol.pay_incorrect)} ETH"
    )
    lines.append(f"workers {config.worker_count} enrolled at prior {config.prior[0]}/{config.prior[1]}")
    if attack:
        lines.append(f"attack enabled: {attack}")

    for s in stats:
        lines.append("")
        lines.append(f"-- round {s.index + 1} (task {s.task_seq}) --")
        lines.append(
            f"opened at block {s.opened_block}; collecting {s.collect_blocks} blocks,"
            f" processing {s.process_blocks} blocks"
        )
        lines.append(
            f"responses submitted {s.submitted}, included {s.included},"
            f" accepted {s.accepted}, rejected {len(s.rejections)}"
        )
        for ref, reason in s.rejections:
            lines.append(f"  rejected tx {ref}: {reason}")
        lines.append(f"final answer: {s.final_text}")
        lines.append(
            f"quality posts {s.posts_onchain}, value proofs {s.value_proofs},"
            f" payments {eth(s.payments_wei)} ETH"
        )
        lines.append(
            f"escrow: refunded {eth(s.refunded_wei)}, confiscated {eth(s.confiscated_wei)},"
            f" conserved {'yes' if s.escrow_ok else 'NO'}"
        )
        lines.append(f"protests {s.protests}, upheld {s.upheld}")
        for note in s.notes:
            lines.append(f"  note: {note}")

    lines.append("")
    lines.append("-- workers --")
    for row in worker_rows:
        mean = row.alpha / (row.alpha + row.beta)
        lines.append(
            f"{row.name} quality {row.alpha}/{row.beta} (mean {mean:.3f})"
            f" paid {eth(row.paid_wei)} ETH, {row.status}"
        )

    lines.append("")
    lines.append("-- proofs posted --")
    for rid in sorted(proof_counts):
        lines.append(f"{rid}: {proof_counts[rid]}")

    lines.append("")
    lines.append("-- chain totals --")
    by_sender = ledger.gas_by_sender()
    worker_gas = sum(gas for who, gas in by_sender.items() if who.startswith("worker-"))
    req_gas = by_sender.get(REQUESTER, 0)
    adv_gas = by_sender.get(ADVERSARY, 0)
    lines.append(f"requester gas {req_gas} (USD {fee.cost_usd(req_gas):.2f})")
    lines.append(f"worker gas total {worker_gas} (USD {fee.cost_usd(worker_gas):.2f})")
    if adv_gas:
        lines.append(f"adversary gas {adv_gas} (USD {fee.cost_usd(adv_gas):.2f})")
    charged = [r for r in ledger.records if r.gas > 0]
    if charged:
        mean_latency = sum(r.inclusion_block - r.submitted_block for r in charged) / len(charged)
        lines.append(f"inclusion latency mean {mean_latency:.2f} blocks over {len(charged)} txs")
    minutes = simulated_blocks * BLOCK_SECONDS / 60
    lines.append(f"simulated time {simulated_blocks} blocks ({minutes:.1f} min at {BLOCK_SECONDS} s/block)")

    lines.append("")
    if failures:
        for f in failures:
            lines.append(f"FAILED: {f}")
    else:
        lines.append("all run invariants hold")
    return "\n".join(lines) + "\n"
