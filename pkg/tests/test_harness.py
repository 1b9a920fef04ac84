"""Scenario plumbing, the runner, attack toggles, and log auditing.

Runner tests use the bundled scenarios switched onto the brute-forceable
backend; the production curve gets its exercise in the acceptance suite.
Every run here is seeded, so expectations are exact, not statistical.
"""

import json
import random
from dataclasses import replace
from fractions import Fraction

import pytest

from anoncrowd.errors import ConfigError
from anoncrowd.harness.audit import (
    CHAIN_SEED,
    canonical_line,
    chain_digest,
    verify_log,
    verify_log_text,
)
from anoncrowd.harness.cli import main
from anoncrowd.harness.fixtures import (
    generate_answers,
    load_fixture,
    parse_fixture,
    render_fixture,
)
from anoncrowd.harness.runner import run
from anoncrowd.harness.scenario import ATTACKS, list_bundled, load_scenario, parse_scenario
from anoncrowd.policy import ans_calc


@pytest.fixture(scope="module")
def tiny_image():
    return replace(load_scenario("image_annotation"), backend="tiny31")


@pytest.fixture(scope="module")
def honest_run(tiny_image):
    return run(tiny_image, seed=11)


@pytest.fixture(scope="module")
def attack_runs(tiny_image):
    return {attack: run(tiny_image, seed=11, attack=attack) for attack in ATTACKS}


class TestScenarios:
    def test_bundled_names(self):
        assert list_bundled() == ["avg_review", "gallup", "image_annotation"]

    def test_image_annotation_shape(self):
        cfg = load_scenario("image_annotation")
        assert cfg.worker_count == 39
        assert cfg.policy.kind == "majority"
        assert cfg.policy.domain_size == 2
        assert cfg.policy.winners == 1
        assert cfg.backend == "curve254"
        assert cfg.profile == "goerli"

    def test_money_is_parsed_exactly(self):
        cfg = load_scenario("avg_review")
        assert cfg.policy.pay_correct == 20_000_000_000_000_000
        assert cfg.policy.pay_incorrect == 2_000_000_000_000_000
        assert cfg.escrow_wei == 3 * 10**18

    def test_load_from_path(self, tmp_path):
        text = load_scenario("gallup")
        src = (
            "[task]\nmin_workers = 2\nescrow_eth = 1\n"
            "[policy]\nkind = majority\ndomain_size = 2\npay_correct_eth = 0.02\n"
            "[workers]\ncount = 4\nfixture = image_annotation\n"
        )
        path = tmp_path / "mini.ini"
        path.write_text(src)
        cfg = load_scenario(str(path))
        assert cfg.name == "mini"  # falls back to the file stem
        assert cfg.worker_count == 4
        assert text.name == "gallup"

    def test_unknown_name_lists_bundled(self):
        with pytest.raises(ConfigError, match="image_annotation"):
            load_scenario("no_such_scenario")

    def test_validation_rejects_bad_quorum(self):
        with pytest.raises(ConfigError, match="min_workers"):
            parse_scenario(
                "[task]\nmin_workers = 9\nescrow_eth = 1\n"
                "[policy]\nkind = majority\ndomain_size = 2\n"
                "[workers]\ncount = 4\nfixture = f\n",
                "bad",
            )

    def test_validation_rejects_thin_escrow(self):
        with pytest.raises(ConfigError, match="escrow"):
            parse_scenario(
                "[task]\nmin_workers = 2\nescrow_eth = 0.01\n"
                "[policy]\nkind = majority\ndomain_size = 2\npay_correct_eth = 0.02\n"
                "[workers]\ncount = 4\nfixture = f\n",
                "bad",
            )

    def test_missing_section_is_a_config_error(self):
        with pytest.raises(ConfigError):
            parse_scenario("[task]\nmin_workers = 1\n", "bad")


class TestFixtures:
    def test_generation_is_seeded(self):
        a = generate_answers("biased", 20, 5, seed=3, truth=2)
        b = generate_answers("biased", 20, 5, seed=3, truth=2)
        c = generate_answers("biased", 20, 5, seed=4, truth=2)
        assert a == b
        assert a != c
        assert all(0 <= v < 5 for v in a)

    def test_uniform_covers_domain_only(self):
        answers = generate_answers("uniform", 200, 3, seed=9)
        assert set(answers) == {0, 1, 2}

    def test_render_parse_round_trip(self):
        answers = [1, 0, 4, 2]
        text = render_fixture(answers, "four rows")
        assert text.startswith("# four rows\n")
        assert parse_fixture(text) == answers

    def test_parse_rejects_bad_shapes(self):
        with pytest.raises(ConfigError, match="header"):
            parse_fixture("a,b\n0,1\n")
        with pytest.raises(ConfigError, match="twice"):
            parse_fixture("worker,answer\n0,1\n0,2\n")
        with pytest.raises(ConfigError, match="gaps"):
            parse_fixture("worker,answer\n0,1\n2,1\n")
        with pytest.raises(ConfigError, match="row"):
            parse_fixture("worker,answer\n0,x\n")

    def test_bundled_fixtures_match_their_scenarios(self):
        for name in list_bundled():
            cfg = load_scenario(name)
            answers = load_fixture(cfg.fixture)
            assert len(answers) >= cfg.worker_count
            assert all(0 <= a < cfg.policy.domain_size for a in answers)

    def test_shuffled_fixture_same_final_answer(self):
        cfg = load_scenario("gallup")
        answers = load_fixture(cfg.fixture)
        shuffled = answers[:]
        random.Random(5).shuffle(shuffled)
        assert ans_calc(shuffled, cfg.policy) == ans_calc(answers, cfg.policy)


class TestRunner:
    def test_honest_run_holds_every_invariant(self, honest_run):
        assert honest_run.failures == []
        assert len(honest_run.rounds) == 1
        s = honest_run.rounds[0]
        assert not s.void
        assert s.accepted == 39
        assert s.rejections == []
        assert s.final_text == "majority -> 1"

    def test_honest_run_adopts_and_pays_everyone(self, honest_run, tiny_image):
        assert all(row.status == "adopted" for row in honest_run.worker_rows)
        answers = load_fixture(tiny_image.fixture)
        pay = tiny_image.policy
        expected = sum(pay.pay_correct if a == 1 else pay.pay_incorrect for a in answers)
        assert sum(row.paid_wei for row in honest_run.worker_rows) == expected
        # every correct worker moved to (5, 1), every incorrect one to (4, 2)
        for row, answer in zip(honest_run.worker_rows, answers):
            assert (row.alpha, row.beta) == ((5, 1) if answer == 1 else (4, 2))

    def test_same_seed_is_byte_identical(self, honest_run, tiny_image):
        again = run(tiny_image, seed=11)
        assert again.log_lines == honest_run.log_lines
        assert again.report == honest_run.report

    def test_different_seed_differs(self, honest_run, tiny_image):
        other = run(tiny_image, seed=12)
        assert other.log_lines != honest_run.log_lines

    def test_unknown_attack_rejected(self, tiny_image):
        with pytest.raises(ConfigError, match="unknown attack"):
            run(tiny_image, seed=1, attack="mitm")

    def test_short_fixture_rejected(self, tiny_image, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text(render_fixture([1, 0, 1]))
        cfg = replace(tiny_image, fixture=str(path))
        with pytest.raises(ConfigError, match="39 workers"):
            run(cfg, seed=1)

    def test_out_of_domain_fixture_rejected(self, tiny_image, tmp_path):
        path = tmp_path / "wide.csv"
        path.write_text(render_fixture([1, 7] + [0] * 37))
        cfg = replace(tiny_image, fixture=str(path))
        with pytest.raises(ConfigError, match="row 1"):
            run(cfg, seed=1)

    def test_report_carries_the_metrics_sections(self, honest_run):
        report = honest_run.report
        assert "-- workers --" in report
        assert "-- proofs posted --" in report
        assert "-- chain totals --" in report
        assert "all run invariants hold" in report
        assert "prove-qual/v1: 39" in report
        assert "auth-value/v1: 36" in report


class TestAttacks:
    def test_every_attack_clears_its_own_assertions(self, attack_runs):
        for attack, res in attack_runs.items():
            assert res.failures == [], attack

    def test_every_attack_log_still_audits(self, attack_runs):
        # detections are handled in protocol, so the logs stay honest
        for attack, res in attack_runs.items():
            assert verify_log(res.log_lines).ok, attack

    def test_duplicate_response_detected_once_and_unpaid(self, attack_runs):
        res = attack_runs["duplicate-response"]
        rejections = [why for s in res.rounds for _, why in s.rejections]
        assert rejections == ["duplicate-tag"]
        # the copied response pays its original author exactly once
        assert sum(1 for row in res.worker_rows if row.paid_wei > 0) == 39

    def test_forged_proof_detected(self, attack_runs):
        res = attack_runs["forged-proof"]
        assert [why for s in res.rounds for _, why in s.rejections] == ["invalid-proof"]

    def test_stale_quality_two_rounds_one_collision(self, attack_runs):
        res = attack_runs["stale-quality"]
        assert len(res.rounds) == 2
        rejections = [why for s in res.rounds for _, why in s.rejections]
        assert rejections == ["stale-tag"]
        assert sum(s.upheld for s in res.rounds) == 0
        cheater = res.worker_rows[0]
        assert "protest rejected" in cheater.status

    def test_deprivation_protest_confiscates(self, attack_runs):
        res = attack_runs["deprivation"]
        s = res.rounds[0]
        assert s.upheld == 1
        assert s.confiscated_wei > 0
        assert s.escrow_ok
        victims = [row for row in res.worker_rows if "upheld" in row.status]
        assert len(victims) == 1
        assert victims[0].paid_wei == 0

    def test_void_task_refunds_and_preserves_quality(self, attack_runs, tiny_image):
        res = attack_runs["void-task"]
        s = res.rounds[0]
        assert s.void
        assert s.payments_wei == 0
        assert s.refunded_wei == tiny_image.escrow_wei
        # responders adopt a zero increment: quality unchanged, still enrolled
        responders = res.worker_rows[: tiny_image.min_workers - 1]
        assert all(row.status == "adopted" for row in responders)
        assert all((row.alpha, row.beta) == tiny_image.prior for row in res.worker_rows)


class TestAudit:
    def test_honest_log_verifies(self, honest_run):
        report = verify_log(honest_run.log_lines)
        assert report.ok
        assert report.problems == []
        s = honest_run.rounds[0]
        expected_proofs = s.included + 1 + s.posts_onchain + s.value_proofs
        assert report.stats["proofs_verified"] == expected_proofs

    def test_text_entry_point(self, honest_run):
        assert verify_log_text("\n".join(honest_run.log_lines)).ok

    @pytest.mark.parametrize("which", ["header", "tx", "screening", "signoff"])
    def test_single_character_flip_rejected(self, honest_run, which):
        lines = list(honest_run.log_lines)
        idx = next(i for i, ln in enumerate(lines) if f'"type":"{which}"' in ln)
        ln = lines[idx]
        at = ln.rindex("0") if "0" in ln else len(ln) // 2
        lines[idx] = ln[:at] + "1" + ln[at + 1 :]
        assert not verify_log(lines).ok

    def test_rechained_tamper_fails_the_signoff(self, honest_run):
        lines = []
        chain = CHAIN_SEED
        for ln in honest_run.log_lines:
            obj = json.loads(ln)
            if obj["type"] == "signoff":
                obj["chain"] = chain.hex()
                lines.append(canonical_line(obj))
                continue
            body = {k: v for k, v in obj.items() if k != "chain"}
            if obj["type"] == "summary":
                body["payments_wei"] += 1
            chain = chain_digest(chain, body)
            lines.append(canonical_line({**body, "chain": chain.hex()}))
        report = verify_log(lines)
        assert not report.ok
        assert "signoff signature does not verify" in report.problems
        assert any("summary payment total" in p for p in report.problems)

    def test_dropped_line_rejected(self, honest_run):
        lines = list(honest_run.log_lines)
        del lines[len(lines) // 2]
        assert not verify_log(lines).ok

    def test_garbage_rejected(self):
        assert not verify_log(["not json"]).ok
        assert not verify_log([]).ok
        assert not verify_log(['{"type":"header","chain":"00"}']).ok


class TestCli:
    def test_scenarios_listing(self, capsys):
        assert main(["scenarios"]) == 0
        out = capsys.readouterr().out
        for name in ("image_annotation", "gallup", "avg_review"):
            assert name in out

    def test_gen_fixture_round_trip(self, tmp_path, capsys):
        out = tmp_path / "gen.csv"
        rc = main(
            ["gen-fixture", "biased", "--count", "12", "--domain", "3", "--seed", "8",
             "--truth", "1", "--out", str(out)]
        )
        assert rc == 0
        assert parse_fixture(out.read_text()) == generate_answers("biased", 12, 3, 8, truth=1)

    def test_run_verify_cycle(self, tmp_path, capsys):
        log = tmp_path / "run.jsonl"
        report = tmp_path / "report.txt"
        rc = main(
            ["run", "image_annotation", "--seed", "11", "--backend", "tiny31",
             "--out", str(log), "--report", str(report)]
        )
        assert rc == 0
        assert "all run invariants hold" in report.read_text()
        assert main(["verify-log", str(log)]) == 0
        assert "PASS" in capsys.readouterr().out

        text = log.read_text()
        flipped = text.replace("worker-000", "worker-xxx", 1)
        log.write_text(flipped)
        assert main(["verify-log", str(log)]) == 1

    def test_config_errors_exit_2(self, capsys):
        assert main(["run", "no_such_scenario"]) == 2
        assert main(["verify-log", "/nonexistent/path.jsonl"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_run_invariant_failure_exits_1(self, honest_run, monkeypatch, capsys):
        import dataclasses

        from anoncrowd.harness import cli

        broken = dataclasses.replace(honest_run, failures=["escrow for task 0 leaked 1 wei"])
        monkeypatch.setattr(cli, "run", lambda *a, **kw: broken)
        assert main(["run", "image_annotation", "--backend", "tiny31"]) == 1
        captured = capsys.readouterr()
        assert "escrow for task 0 leaked 1 wei" in captured.err
