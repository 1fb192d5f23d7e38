//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line each, and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use lovesim::ablation::{compute_metrics, prepare_cv, run_cv, significance, AblationCondition, CvConfig, CvResult};
use lovesim::abtest::{
    binomial_significance, build_ab_items, ground_truth_increases, render_ab_report, scripted_choice, tally,
    DialogueRef, ParticipantDialogues,
};
use lovesim::corpus::synth::StyleLexicon;
use lovesim::corpus::{make_folds, synth_corpus, SynthConfig};
use lovesim::encoder::{
    adamw_step, batch_loss, loss_and_grad, AdamState, EncoderConfig, ModelParams, Tensor, TrainConfig, Vocab,
};
use lovesim::simulator::{
    choose_baseline, choose_by_votes, count_votes, run_simulation, tag_history, EncoderCohesion, Ensemble,
    CohesionScorer, MethodKind, Optimize, Party, SelectionMethod, SimConfig, SimTurn, TemplateGenerator,
    UtteranceGenerator,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS_SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Largest gradient relative error over one random model and batch.
fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab_size = 24;
    let config = EncoderConfig {
        vocab_size,
        d_model: 8,
        n_layers: 2,
        n_heads: 2,
        d_ff: 16,
        max_len: 32,
        seed,
        ..EncoderConfig::default()
    };
    let mut params = ModelParams::<f64>::init(&config).unwrap();
    // Perturb the zero-initialized tensors so every code path carries signal.
    for t in &mut params.tensors {
        for v in &mut t.data {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let batch: Vec<(Vec<u32>, bool)> = (0..3)
        .map(|i| {
            let len = rng.random_range(4..=32);
            let real = len - rng.random_range(0..3);
            let mut t = vec![1u32];
            t.extend((1..real).map(|_| rng.random_range(1..vocab_size as u32)));
            t.resize(len, 0);
            (t, i % 2 == 0)
        })
        .collect();

    let (_, grads) = loss_and_grad(&params, &batch).unwrap();
    let h = 1e-4;
    let mut worst = 0.0f64;
    for ti in 0..params.tensors.len() {
        for k in 0..params.tensors[ti].data.len() {
            let orig = params.tensors[ti].data[k];
            params.tensors[ti].data[k] = orig + h;
            let up = batch_loss(&params, &batch).unwrap();
            params.tensors[ti].data[k] = orig - h;
            let down = batch_loss(&params, &batch).unwrap();
            params.tensors[ti].data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.tensors[ti].data[k];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let worst = (0..5).map(gradient_check).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-3 && elapsed < Duration::from_secs(60),
        format!("max relative error {worst:.2e} over 5 seeds in {:.1}s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let cfg = TrainConfig { learning_rate: 0.05, weight_decay: 0.01, ..TrainConfig::default() };
    let mut params = ModelParams::<f64> {
        config: EncoderConfig::default(),
        tensors: vec![Tensor { name: "theta".into(), shape: vec![1, 1], data: vec![2.5], decay: true }],
    };
    let mut state = AdamState::new(&params);

    // Reference: textbook AdamW on f(θ) = (θ − 1)² · 0.5.
    let (mut theta, mut m, mut v) = (2.5f64, 0.0f64, 0.0f64);
    let mut worst = 0.0f64;
    for t in 1..=100u64 {
        let g = params.tensors[0].data[0] - 1.0;
        let mut grads = params.zeros_like();
        grads.tensors[0].data[0] = g;
        adamw_step(&mut params, &grads, &mut state, t, &cfg).unwrap();

        let g_ref = theta - 1.0;
        theta -= cfg.learning_rate * cfg.weight_decay * theta;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g_ref;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g_ref * g_ref;
        let m_hat = m / (1.0 - cfg.beta1.powi(t as i32));
        let v_hat = v / (1.0 - cfg.beta2.powi(t as i32));
        theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        worst = worst.max((params.tensors[0].data[0] - theta).abs());
    }
    outcome(worst < 1e-10, format!("max |Δ| {worst:.1e} over 100 steps, θ = {theta:.6}"))
}

fn exact_binomial_p(wins: u32, n: u32) -> f64 {
    let choose = |n: u32, k: u32| -> u128 { (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) };
    let lower: u128 = (0..=wins).map(|k| choose(n, k)).sum();
    let upper: u128 = (wins..=n).map(|k| choose(n, k)).sum();
    (2.0 * lower.min(upper) as f64 / (1u128 << n) as f64).min(1.0)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let bias = rng.random_range(0.0..1.0);
        let preds: Vec<bool> = (0..n).map(|_| rng.random_bool(bias)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
        for (p, l) in preds.iter().zip(&labels) {
            match (p, l) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = div(tp, tp + fp);
        let recall = div(tp, tp + fn_);
        let f1 = div(2 * tp, 2 * tp + fp + fn_);
        let m = compute_metrics(&preds, &labels).unwrap();
        let ok = (m.tp, m.fp, m.fn_, m.tn) == (tp, fp, fn_, tn)
            && m.accuracy == (tp + tn) as f64 / n as f64
            && m.precision == precision
            && m.recall == recall
            && m.f1 == f1;
        if !ok {
            mismatches += 1;
        }
    }
    let p = binomial_significance(15, 20).unwrap();
    let oracle = exact_binomial_p(15, 20);
    outcome(
        mismatches == 0 && (p - oracle).abs() < 1e-6 && (p - 0.041389).abs() < 1e-6 && p < 0.05,
        format!("{mismatches} metric mismatches in 1000 instances; binomial(15, 20) = {p:.8} vs oracle {oracle:.8}"),
    )
}

struct Trained {
    pd: CvResult,
    d: CvResult,
    vocab: Vocab,
    elapsed: Duration,
}

fn train_both() -> Trained {
    let start = Instant::now();
    let corpus = synth_corpus(&SynthConfig::default(), CORPUS_SEED).unwrap();
    let data = prepare_cv(&corpus, &CvConfig::default()).unwrap();
    let enc = EncoderConfig::default();
    let train = TrainConfig::synthetic();
    let pd = run_cv(&data, AblationCondition::Pd, &enc, &train).unwrap();
    let d = run_cv(&data, AblationCondition::DOnly, &enc, &train).unwrap();
    Trained { pd, d, vocab: data.vocab, elapsed: start.elapsed() }
}

fn criterion_4(t: &Trained) -> Outcome {
    let pd = t.pd.mean_accuracy().unwrap_or(0.0);
    let d = t.d.mean_accuracy().unwrap_or(1.0);
    let sig = significance(&t.pd.column(0), &t.d.column(0), 0).unwrap();
    let secs = t.elapsed.as_secs_f64();
    outcome(
        pd >= 0.85 && d <= 0.65 && sig.permutation_p < 0.05 && pd > d && secs <= 900.0,
        format!(
            "accuracy P+D {pd:.3}, D only {d:.3}, permutation p {:.2e} over {} folds, {secs:.0}s",
            sig.permutation_p,
            t.pd.folds.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let pairs: Vec<String> = (0..50).map(|i| format!("pair-{i:03}")).collect();
    let folds = make_folds(&pairs, 11).unwrap();
    let mut as_test: BTreeMap<&str, usize> = BTreeMap::new();
    let mut as_val: BTreeMap<&str, usize> = BTreeMap::new();
    let mut overlap = 0;
    for f in &folds {
        for (val, test) in f.orientations() {
            *as_val.entry(val).or_default() += 1;
            *as_test.entry(test).or_default() += 1;
            if f.train_pairs.iter().any(|p| p == test || p == val) {
                overlap += 1;
            }
        }
        if f.train_pairs.len() != 48 {
            overlap += 1;
        }
    }
    let once = |m: &BTreeMap<&str, usize>| m.len() == 50 && m.values().all(|&c| c == 1);
    outcome(
        folds.len() == 25 && once(&as_test) && once(&as_val) && overlap == 0,
        format!("{} folds, every pair once as test and once as validation, {overlap} leaks", folds.len()),
    )
}

fn ensemble<'a>(r: &'a CvResult, vocab: &'a Vocab) -> Ensemble<'a> {
    Ensemble { models: &r.models, condition: r.condition, vocab, threshold: 0.5 }
}

fn criterion_6(t: &Trained) -> Outcome {
    let fresh = synth_corpus(&SynthConfig { pairs: 4, ..SynthConfig::default() }, 99).unwrap();
    let config = SimConfig::new(fresh[0].profile_x.clone(), fresh[0].profile_y.clone(), 5);
    let generator = TemplateGenerator::default();
    let scorer = EncoderCohesion { params: &t.pd.models[0], vocab: &t.vocab };
    let methods = [
        SelectionMethod::Baseline,
        SelectionMethod::VotePd(ensemble(&t.pd, &t.vocab)),
        SelectionMethod::VoteD(ensemble(&t.d, &t.vocab)),
    ];
    let run = || run_simulation(&config, &generator, &generator, &methods, &scorer).unwrap();
    let a = run();
    let b = run();
    let same_bytes = serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap();
    let lengths = a.iter().all(|d| d.utterances.len() == 20);
    let alternating = a.iter().all(|d| {
        d.utterances.iter().enumerate().all(|(i, u)| u.speaker == if i % 2 == 0 { Party::Y } else { Party::X })
    });
    let prefix = a.iter().all(|d| d.utterances[..10] == a[0].utterances[..10]);
    let candidates = a.iter().all(|d| d.turns[1..].iter().all(|r| r.candidates.len() == 20));
    let branches_differ = a[1].utterances[10..] != a[0].utterances[10..];
    outcome(
        same_bytes && lengths && alternating && prefix && candidates,
        format!(
            "lengths {lengths}, alternating {alternating}, shared prefix {prefix}, 20 candidates {candidates}, \
             byte-identical rerun {same_bytes}, P+D branch differs from baseline {branches_differ}"
        ),
    )
}

fn criterion_7(t: &Trained) -> Outcome {
    let mut failures = Vec::new();
    let cohesion = [0.2, 0.9, 0.4, 0.7];
    if choose_by_votes(&[1, 6, 3, 2], &cohesion).unwrap() != (1, false) {
        failures.push("unique max");
    }
    // Candidates 2 and 3 tie; cohesion prefers 3 among them even though 1 scores higher overall.
    if choose_by_votes(&[1, 2, 5, 5], &cohesion).unwrap() != (3, true) {
        failures.push("partial tie");
    }
    let full = choose_by_votes(&[4, 4, 4, 4], &cohesion).unwrap();
    if full != (choose_baseline(&cohesion).unwrap(), true) {
        failures.push("full tie");
    }

    let fresh = synth_corpus(&SynthConfig { pairs: 4, ..SynthConfig::default() }, 77).unwrap();
    let generator = TemplateGenerator::default();
    let scorer = EncoderCohesion { params: &t.pd.models[0], vocab: &t.vocab };
    let ens = Ensemble { models: &t.pd.models[..5], ..ensemble(&t.pd, &t.vocab) };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut invariant = 0;
    let mut text_stable = 0;
    let mut checked_text = 0;
    for case in 0..100 {
        let rec = &fresh[case % fresh.len()];
        let history: Vec<SimTurn> = rec.utterances[..rng.random_range(1..8)]
            .iter()
            .enumerate()
            .map(|(i, u)| SimTurn { speaker: if i % 2 == 0 { Party::X } else { Party::Y }, text: u.text.clone() })
            .collect();
        let speaking = history.last().unwrap().speaker.other();
        let (speaker, listener) = match speaking {
            Party::X => (&rec.profile_x, &rec.profile_y),
            Party::Y => (&rec.profile_y, &rec.profile_x),
        };
        let n = rng.random_range(2..12);
        let candidates = generator.generate(speaker, &history, n, case as u64).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let permuted: Vec<String> = order.iter().map(|&i| candidates[i].clone()).collect();
        let tagged = tag_history(&history, speaking, 10);
        let votes = count_votes(&candidates, listener, speaker, &tagged, &ens).unwrap();
        let votes_p = count_votes(&permuted, listener, speaker, &tagged, &ens).unwrap();
        let mut a: Vec<(String, usize)> = candidates.iter().cloned().zip(votes.iter().copied()).collect();
        let mut b: Vec<(String, usize)> = permuted.iter().cloned().zip(votes_p.iter().copied()).collect();
        a.sort();
        b.sort();
        if a == b {
            invariant += 1;
        }
        // With distinct cohesion scores the chosen text cannot depend on order.
        let scores = scorer.score_all(&candidates, &history).unwrap();
        let distinct: std::collections::BTreeSet<u64> = scores.iter().map(|s| s.to_bits()).collect();
        if distinct.len() == n {
            checked_text += 1;
            let scores_p: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
            let (c1, _) = choose_by_votes(&votes, &scores).unwrap();
            let (c2, _) = choose_by_votes(&votes_p, &scores_p).unwrap();
            if candidates[c1] == permuted[c2] {
                text_stable += 1;
            }
        }
    }
    outcome(
        failures.is_empty() && invariant == 100 && text_stable == checked_text,
        format!(
            "constructed cases failing: {failures:?}; (candidate, votes) multiset invariant in {invariant}/100 \
             permutations; chosen text stable in {text_stable}/{checked_text} distinct-score cases"
        ),
    )
}

fn criterion_8(t: &Trained) -> Outcome {
    let participants = 12;
    let fresh = synth_corpus(&SynthConfig { pairs: participants, ..SynthConfig::default() }, 2024).unwrap();
    let generator = TemplateGenerator::default();
    let lexicon = StyleLexicon::default();
    let scorer = EncoderCohesion { params: &t.pd.models[0], vocab: &t.vocab };
    let methods = [
        SelectionMethod::Baseline,
        SelectionMethod::VotePd(ensemble(&t.pd, &t.vocab)),
        SelectionMethod::VoteD(ensemble(&t.d, &t.vocab)),
    ];
    let mut dialogues = BTreeMap::new();
    let mut groups = Vec::new();
    for (i, rec) in fresh.iter().enumerate() {
        let mut config = SimConfig::new(rec.profile_x.clone(), rec.profile_y.clone(), 100 + i as u64);
        config.optimize = Optimize::YOnly;
        let sims = run_simulation(&config, &generator, &generator, &methods, &scorer).unwrap();
        let id = format!("participant-{i:02}");
        let mut refs = Vec::new();
        for sim in sims {
            let key = format!("{id}#{}", sim.method);
            // X judges Y: count Y's condition-branch utterances X's hidden
            // preferences reward.
            let gains = ground_truth_increases(&sim, Party::Y, &rec.profile_x, &lexicon);
            refs.push(DialogueRef { method: sim.method, dialogue: key.clone() });
            dialogues.insert(key, gains);
        }
        groups.push(ParticipantDialogues { participant_id: id, dialogues: refs });
    }
    let mut items = build_ab_items(&groups, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for item in &mut items {
        item.choice = scripted_choice(dialogues[&item.first.dialogue], dialogues[&item.second.dialogue], &mut rng);
    }
    let order = [MethodKind::VotePd, MethodKind::VoteD, MethodKind::Baseline];
    let matrix = tally(&items, &order).unwrap();
    let rate = matrix.cell(MethodKind::VotePd, MethodKind::Baseline).map_or(0.0, |c| c.rate);
    let report = render_ab_report(&matrix);
    let layout = report.starts_with("| | P+D | D | Baseline |")
        && report.contains("| P+D | -- |")
        && report.contains("| D |")
        && report.contains("| Baseline |")
        && report.contains("winning rate of the leftmost listed methods");
    outcome(
        rate > 0.5 && layout,
        format!("P+D over Baseline {:.0}% across {participants} participants, Table 2 layout {layout}", rate * 100.0),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n, name, o: Outcome| {
        println!("criterion {n} [{name}]: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    record(1, "gradient fidelity", criterion_1());
    record(2, "optimizer oracle", criterion_2());
    record(3, "metrics oracle", criterion_3());
    record(5, "fold partition", criterion_5());
    let trained = train_both();
    record(4, "ablation reproduction", criterion_4(&trained));
    record(6, "simulation structure", criterion_6(&trained));
    record(7, "vote selection contract", criterion_7(&trained));
    record(8, "A/B smoke", criterion_8(&trained));
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
