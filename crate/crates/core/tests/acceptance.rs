//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Each criterion has a wall-clock limit; exceeding it counts as a failure.
//! Pass a substring such as `AC7` to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mpj_core::adversary::{attack, attack_uniform, verify_certificate, verify_certificate_with, FoolingCertificate};
use mpj_core::bounds::{ceil_log2, chain_budget_bound, crossing_budget_cap, pinned_budget_cap, uniform_budget_cap};
use mpj_core::lemmas::{
    chainpush, crosspush, find_chain_collision, find_crossing_collision, push, FnOracle, FoolingState, MessageOracle,
};
use mpj_core::oracle::{
    brute_force_fooling_search, correctness_report, decision_tree_correctness, popcount_monotone_check,
    two_player_exhaustion, EnumerationCap,
};
use mpj_core::protocols::{
    cheating_protocol, hashed_protocol, reordered_protocol, tpj_protocol, trivial_protocol, truncated_protocol,
    CheatingBase, TpjShape,
};
use mpj_core::{chain_string, dominance_less, is_crossing, total_cost, BitString, ProtocolDef};
use proptest::strategy::{Just, Strategy};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: &'static str,
    title: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cap() -> EnumerationCap {
    EnumerationCap::default()
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Pseudorandom function `{0,1}^n -> {0,1}^t` keyed by `seed`.
fn random_oracle(t: usize, seed: u64) -> FnOracle<impl Fn(&BitString) -> BitString> {
    FnOracle::new(t, move |g: &BitString| {
        let h = mix(seed ^ mix(g.to_index() ^ ((g.len() as u64) << 58)));
        BitString::new((0..t).map(|i| (h >> i) & 1 == 1).collect())
    })
}

fn ac1() -> Outcome {
    let mut lines = Vec::new();
    for (n, k) in [(2, 2), (3, 3), (4, 3), (3, 4), (4, 4)] {
        let p = trivial_protocol(n, k).map_err(|e| e.to_string())?;
        let report = correctness_report(&p, cap()).map_err(|e| e.to_string())?;
        ensure(report.all_correct(), || format!("trivial n={n} k={k}: {}/{} correct", report.correct, report.total))?;
        ensure(total_cost(&p) == n, || format!("trivial n={n} k={k}: C_total={} != n", total_cost(&p)))?;
        lines.push(format!("({n},{k}) {}/{}", report.correct, report.total));
    }
    Ok(format!("{}; C_total = n", lines.join(", ")))
}

fn ac2() -> Outcome {
    let mut parts = Vec::new();
    for n in [2usize, 4, 8] {
        for (first, second) in [(2, 1), (3, 1), (3, 2)] {
            let p = reordered_protocol(n, 3, first, second).map_err(|e| e.to_string())?;
            let want = ceil_log2(n) + 1;
            ensure(total_cost(&p) == want, || format!("reordered n={n}: C_total={} != {want}", total_cost(&p)))?;
            let tree = decision_tree_correctness(&p, cap()).map_err(|e| e.to_string())?;
            ensure(tree.all_correct(), || format!("reordered:{first}:{second} n={n}: {}/{} correct", tree.correct, tree.total))?;
            if n <= 4 {
                // Plain enumeration is feasible here; the two methods must agree.
                let plain = correctness_report(&p, cap()).map_err(|e| e.to_string())?;
                ensure(plain.all_correct() && plain.total == tree.total, || {
                    format!("enumeration and decision tree disagree at n={n}")
                })?;
            }
            if (first, second) == (3, 2) {
                parts.push(format!("n={n}: {} instances in {} leaves, C_total={want}", tree.total, tree.leaves));
            }
        }
    }
    Ok(parts.join("; "))
}

fn ac3() -> Outcome {
    let mut parts = Vec::new();
    for (b, k) in [(2usize, 3usize), (3, 3)] {
        let shape = TpjShape::new(b, k).map_err(|e| e.to_string())?;
        let p = tpj_protocol(shape).map_err(|e| e.to_string())?;
        let report = correctness_report(&p, cap()).map_err(|e| e.to_string())?;
        ensure(report.all_correct(), || format!("tpj b={b} k={k}: {}/{} correct", report.correct, report.total))?;
        ensure(total_cost(&p) == b && b.pow(k as u32 - 1) == shape.n(), || {
            format!("tpj b={b}: C_total={} is not n^(1/(k-1))", total_cost(&p))
        })?;
        parts.push(format!("b={b} k={k} n={}: {}/{} C_total={b}", shape.n(), report.correct, report.total));
    }
    Ok(parts.join("; "))
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sizes = [8usize, 12, 16];
    for trial in 0..1000 {
        let n = sizes[trial % sizes.len()];
        let max_t = (0..).take_while(|&t| (1usize << t) < n - 1).last().expect("t = 0 always fits");
        let t = rng.gen_range(0..=max_t);
        let oracle = random_oracle(t, rng.gen());
        let (x, y) = find_chain_collision(&oracle, n).map_err(|e| format!("trial {trial} n={n} t={t}: {e}"))?;
        let interior = |s: &BitString| (1..n).any(|i| &chain_string(n, i) == s);
        ensure(dominance_less(&x, &y).unwrap() && interior(&x) && interior(&y), || {
            format!("trial {trial}: pair {x}, {y} is not an ordered interior chain pair")
        })?;
        ensure(oracle.message(&x).unwrap() == oracle.message(&y).unwrap(), || format!("trial {trial}: messages differ"))?;
    }
    let bad: Vec<usize> = (1..=16).filter(|&n| !popcount_monotone_check(n)).collect();
    ensure(bad.is_empty(), || format!("popcount not monotone for n in {bad:?}"))?;
    Ok("1000/1000 chain collisions ordered; popcount monotone for n = 1..16".into())
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut parts = Vec::new();
    for n in [8usize, 10, 12] {
        let t = crossing_budget_cap(n) as usize;
        for trial in 0..200 {
            let oracle = random_oracle(t, rng.gen());
            let (x, y) = find_crossing_collision(&oracle, n).map_err(|e| format!("n={n} trial {trial}: {e}"))?;
            ensure(is_crossing(&x, &y).unwrap() && oracle.message(&x).unwrap() == oracle.message(&y).unwrap(), || {
                format!("n={n} trial {trial}: returned pair is not a crossing collision")
            })?;
        }
        parts.push(format!("n={n} t={t}: 200/200"));
    }
    Ok(parts.join(", "))
}

#[derive(Clone, Copy, Debug)]
enum Step {
    Push,
    Cross,
    Chain,
}

fn apply(step: Step, state: &FoolingState, oracle: &impl MessageOracle) -> Result<FoolingState, String> {
    match step {
        Step::Push => push(state, oracle),
        Step::Cross => crosspush(state, oracle),
        Step::Chain => chainpush(state, oracle),
    }
    .map_err(|e| e.to_string())
}

fn check_step(step: Step, before: &FoolingState, after: &FoolingState, oracle: &impl MessageOracle) -> Result<(), String> {
    let f = after.f_prefix.middles.last().ok_or("no new layer")?;
    ensure(after.x.compose(f).unwrap() == before.x && after.y.compose(f).unwrap() == before.y, || {
        "reconstruction identity fails".into()
    })?;
    let alpha = after.alphas.last().unwrap();
    ensure(&oracle.message(&after.x).unwrap() == alpha && &oracle.message(&after.y).unwrap() == alpha, || {
        "message consistency fails".into()
    })?;
    ensure(after.v == f.apply(before.v) && after.x.get(after.v) != after.y.get(after.v), || "fooling lost".into())?;
    let dominance = dominance_less(&after.x, &after.y).unwrap();
    let crossing = is_crossing(&after.x, &after.y).unwrap();
    ensure(after.flags.dominance == dominance && after.flags.crossing == crossing, || "flags are wrong".into())?;
    match step {
        Step::Chain => ensure(dominance, || "chainpush lost dominance".into()),
        Step::Cross => ensure(crossing, || "crosspush did not produce a crossing pair".into()),
        Step::Push => Ok(()),
    }
}

fn ac6() -> Outcome {
    let mut parts = Vec::new();
    for step in [Step::Push, Step::Cross, Step::Chain] {
        let (lo, hi) = match step {
            Step::Push => (5usize, 10usize),
            Step::Cross => (4, 10),
            Step::Chain => (4, 12),
        };
        let strategy = (lo..=hi)
            .prop_flat_map(move |n| {
                let max_t = match step {
                    Step::Push => pinned_budget_cap(n),
                    Step::Cross => crossing_budget_cap(n),
                    Step::Chain => chain_budget_bound(n) - 1,
                } as usize;
                // Column patterns (x_s, y_s): 0 -> (0,0), 1 -> (0,1), 2 -> (1,0),
                // 3 -> (1,1). Steps needing x < y never draw pattern 2.
                let patterns: &[u8] = if matches!(step, Step::Cross) { &[0, 1, 2, 3] } else { &[0, 1, 3] };
                let columns = proptest::collection::vec(proptest::sample::select(patterns), n);
                (Just(n), columns, 0..n, 0..=max_t, proptest::num::u64::ANY, proptest::bool::ANY)
            })
            .prop_map(|(n, mut columns, forced, t, seed, deeper)| {
                // One (0,1) column guarantees the strings differ.
                columns[forced] = 1;
                let x = BitString::new(columns.iter().map(|&c| c >= 2).collect());
                let y = BitString::new(columns.iter().map(|&c| c == 1 || c == 3).collect());
                (n, x, y, t, seed, deeper)
            });
        let mut runner = TestRunner::new_with_rng(
            Config { cases: 10_000, failure_persistence: None, ..Config::default() },
            TestRng::deterministic_rng(RngAlgorithm::ChaCha),
        );
        let result = runner.run(&strategy, |(_, x, y, t, seed, deeper)| {
            let v = (1..=x.len()).find(|&s| x.get(s) != y.get(s)).unwrap();
            let mut state = FoolingState::initial(5, x, y, v, BitString::empty()).unwrap();
            if deeper {
                // Start one stage later, keeping the pair shape the step needs.
                let warmup = random_oracle(0, seed ^ 1);
                let pre = if matches!(step, Step::Cross) { Step::Cross } else { Step::Chain };
                state = apply(pre, &state, &warmup).map_err(proptest::test_runner::TestCaseError::fail)?;
            }
            let oracle = random_oracle(t, seed);
            let next = apply(step, &state, &oracle).map_err(proptest::test_runner::TestCaseError::fail)?;
            check_step(step, &state, &next, &oracle).map_err(proptest::test_runner::TestCaseError::fail)?;
            Ok(())
        });
        result.map_err(|e| format!("{step:?}: {e}"))?;
        parts.push(format!("{step:?} 10000/10000"));
    }
    Ok(parts.join(", "))
}

fn attack_and_verify(p: &ProtocolDef) -> Result<FoolingCertificate, String> {
    let cert = attack(p).map_err(|e| format!("{}: {e}", p.id()))?;
    let verdict = verify_certificate(&cert).map_err(|e| format!("{}: {e}", p.id()))?;
    ensure(verdict.is_valid(), || format!("{} n={} k={}: {verdict:?}", p.id(), p.n(), p.k()))?;
    Ok(cert)
}

fn ac7() -> Outcome {
    let mut done = 0;
    let mut hashed = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [8usize, 10, 12, 14] {
        for k in 3..=6usize {
            for base in CheatingBase::ALL {
                let budgets = if base == CheatingBase::Silent { 0..=0 } else { 0..=n - 3 };
                for b in budgets {
                    let p = cheating_protocol(base, n, k, b).map_err(|e| e.to_string())?;
                    attack_and_verify(&p)?;
                    done += 1;
                }
            }
            // Beyond the named families: pseudorandom protocols with random budget splits.
            for _ in 0..3 {
                let mut budgets = vec![0; k - 1];
                for _ in 0..rng.gen_range(0..=n - 3) {
                    budgets[rng.gen_range(0..k - 1)] += 1;
                }
                let p = hashed_protocol(n, k, rng.gen_range(0..1 << 20), &budgets).map_err(|e| e.to_string())?;
                attack_and_verify(&p)?;
                hashed += 1;
            }
        }
    }
    Ok(format!("{done}/{done} cheating protocols fooled and verified, plus {hashed}/{hashed} hashed"))
}

fn ac8() -> Outcome {
    let mut done = 0;
    for n in [8usize, 12] {
        let cap = uniform_budget_cap(n) as usize;
        for k in [3usize, 5] {
            let mut protocols = vec![cheating_protocol(CheatingBase::Silent, n, k, 0)];
            for b in 0..=n - 3 {
                protocols.push(cheating_protocol(CheatingBase::FirstPlayer, n, k, b));
                if b <= cap {
                    protocols.push(cheating_protocol(CheatingBase::TruncatedTrivial, n, k, b));
                }
            }
            let mut full = vec![cap; k - 1];
            full[0] = n - 1;
            protocols.push(truncated_protocol(n, k, &full));
            protocols.push(hashed_protocol(n, k, 8, &full));
            protocols.push(truncated_protocol(n, k, &vec![cap; k - 1]));
            for p in protocols {
                let p = p.map_err(|e| e.to_string())?;
                let cert = attack_uniform(&p).map_err(|e| format!("{} n={n} k={k}: {e}", p.id()))?;
                let verdict = verify_certificate(&cert).map_err(|e| e.to_string())?;
                ensure(verdict.is_valid(), || format!("{} n={n} k={k}: {verdict:?}", p.id()))?;
                done += 1;
            }
        }
    }
    Ok(format!("{done}/{done} uniform attacks verified (per-player cap n - ceil(0.5 log2 n) - 3)"))
}

fn ac9() -> Outcome {
    let mut checked = 0;
    for n in 1..=3usize {
        let k = 3;
        let mut protocols = vec![
            trivial_protocol(n, k),
            cheating_protocol(CheatingBase::Silent, n, k, 0),
            reordered_protocol(n, k, 2, 1),
            reordered_protocol(n, k, 3, 1),
            reordered_protocol(n, k, 3, 2),
        ];
        if n >= 3 {
            protocols.push(cheating_protocol(CheatingBase::TruncatedTrivial, n, k, 0));
            protocols.push(cheating_protocol(CheatingBase::FirstPlayer, n, k, 0));
        }
        for t1 in 0..=n {
            for t2 in 0..=n {
                protocols.push(truncated_protocol(n, k, &[t1, t2]));
            }
        }
        for p in protocols {
            let p = p.map_err(|e| e.to_string())?;
            let correct = correctness_report(&p, cap()).map_err(|e| e.to_string())?.all_correct();
            let cert = brute_force_fooling_search(&p, cap()).map_err(|e| e.to_string())?;
            ensure(cert.is_some() != correct, || {
                format!("{} n={n}: correct={correct} but certificate found={}", p.id(), cert.is_some())
            })?;
            if let Some(cert) = cert {
                let verdict = verify_certificate(&cert).map_err(|e| e.to_string())?;
                ensure(verdict.is_valid(), || format!("{} n={n}: oracle certificate {verdict:?}", p.id()))?;
            }
            checked += 1;
        }
    }
    let mut two_player = Vec::new();
    for t in 0..=2usize {
        let (count, fooled) = two_player_exhaustion(3, t, cap(), |c, p| {
            verify_certificate_with(c, p).map(|v| v.is_valid()).unwrap_or(false)
        })
        .map_err(|e| e.to_string())?;
        ensure(count == fooled, || format!("k=2 n=3 t={t}: only {fooled}/{count} protocols fooled"))?;
        two_player.push(format!("t={t}: {fooled}/{count}"));
    }
    Ok(format!("{checked} protocols agree at k=3; k=2 n=3 all err ({})", two_player.join(", ")))
}

fn ac10() -> Outcome {
    let targets = [
        cheating_protocol(CheatingBase::TruncatedTrivial, 10, 3, 7),
        cheating_protocol(CheatingBase::FirstPlayer, 12, 5, 6),
        truncated_protocol(9, 4, &[0, 2, 3]),
        hashed_protocol(11, 4, 99, &[3, 2, 1]),
    ];
    for p in &targets {
        let p = p.as_ref().map_err(|e| e.to_string())?;
        let rebuilt = mpj_core::protocols::ProtocolSpec::from_id(p.id())
            .ok()
            .and_then(|s| s.build(p.n(), p.k()).ok())
            .ok_or("rebuild failed")?;
        let a = attack(p).map_err(|e| e.to_string())?.to_json();
        let b = attack(&rebuilt).map_err(|e| e.to_string())?.to_json();
        ensure(a == b, || format!("{}: attack output differs between runs", p.id()))?;
        let u1 = attack_uniform(p).ok().map(|c| c.to_json());
        let u2 = attack_uniform(&rebuilt).ok().map(|c| c.to_json());
        ensure(u1 == u2, || format!("{}: uniform attack output differs", p.id()))?;
    }
    for p in [cheating_protocol(CheatingBase::Silent, 2, 3, 0), truncated_protocol(3, 3, &[1, 1])] {
        let p = p.map_err(|e| e.to_string())?;
        let a = brute_force_fooling_search(&p, cap()).map_err(|e| e.to_string())?.map(|c| c.to_json());
        let b = brute_force_fooling_search(&p, cap()).map_err(|e| e.to_string())?.map(|c| c.to_json());
        ensure(a.is_some() && a == b, || format!("{}: brute output differs or is missing", p.id()))?;
    }
    Ok("attack, uniform attack and brute certificates byte-identical across runs".into())
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: "AC1", title: "trivial protocol exhaustive, C_total = n", limit: Duration::from_secs(60), check: ac1 },
        Criterion { id: "AC2", title: "reordered protocol exhaustive, C_total = ceil(log2 n) + 1", limit: Duration::from_secs(30), check: ac2 },
        Criterion { id: "AC3", title: "tree protocol exhaustive, C_total = b", limit: Duration::from_secs(30), check: ac3 },
        Criterion { id: "AC4", title: "chain collisions and popcount tightness", limit: Duration::from_secs(60), check: ac4 },
        Criterion { id: "AC5", title: "crossing collisions at the cap", limit: Duration::from_secs(300), check: ac5 },
        Criterion { id: "AC6", title: "push family properties, 10^4 cases each", limit: Duration::from_secs(60), check: ac6 },
        Criterion { id: "AC7", title: "adversary fools every cheating protocol", limit: Duration::from_secs(300), check: ac7 },
        Criterion { id: "AC8", title: "uniform adversary below the per-player cap", limit: Duration::from_secs(120), check: ac8 },
        Criterion { id: "AC9", title: "brute-force oracle agrees with exhaustive correctness", limit: Duration::from_secs(120), check: ac9 },
        Criterion { id: "AC10", title: "deterministic certificates", limit: Duration::from_secs(120), check: ac10 },
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| c.id == f || c.title.contains(f.as_str())) {
            continue;
        }
        let began = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = began.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > c.limit => Err(format!("took {elapsed:.1?}, limit {:?}", c.limit)),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("[{tag}] {} {} ({elapsed:.2?} / limit {:?}): {detail}", c.id, c.title, c.limit);
        failed += outcome.is_err() as usize;
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
