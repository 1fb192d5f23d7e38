use lovesim::ablation::AblationCondition;
use lovesim::corpus::{HistoryTurn, PersonalityProfile, SpeakerTag};
use lovesim::encoder::io::{load_model, read_model, write_model};
use lovesim::encoder::vocab::{CLS, PAD};
use lovesim::encoder::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(vocab_size: usize, seed: u64) -> EncoderConfig {
    EncoderConfig { vocab_size, d_model: 8, n_layers: 2, n_heads: 2, d_ff: 16, max_len: 40, seed, ..Default::default() }
}

fn tensor_mut<'a>(p: &'a mut ModelParams<f64>, name: &str) -> &'a mut Vec<f64> {
    &mut p.tensors.iter_mut().find(|t| t.name == name).unwrap().data
}

fn random_tokens(rng: &mut ChaCha8Rng, vocab: usize, len: usize) -> Vec<u32> {
    let mut t = vec![CLS];
    t.extend((1..len).map(|_| rng.random_range(1..vocab as u32)));
    t
}

#[test]
fn pooling_and_head_examples() {
    let (m, arg) = max_pool(&[1.0, -2.0, 3.0, 0.5], 2, &[true, true]);
    assert_eq!(m, vec![3.0, 0.5]);
    assert_eq!(arg, vec![1, 1]);
    // Masked rows never win.
    let (m, _) = max_pool(&[1.0, -2.0, 9.0, 9.0], 2, &[true, false]);
    assert_eq!(m, vec![1.0, -2.0]);
    let (logit, p) = head_probability::<f64>(&[1.0, 0.0], 0.0, &[3.0, 0.5]);
    assert_eq!(logit, 3.0);
    assert!((p - 0.952574126822433).abs() < 1e-12);
}

#[test]
fn cls_with_padding_is_a_valid_input() {
    let params = ModelParams::<f64>::init(&config(20, 1)).unwrap();
    let out = forward(&params, &[CLS, PAD, PAD, PAD]).unwrap();
    assert!(out.prob.is_finite() && out.prob > 0.0 && out.prob < 1.0);
    assert_eq!(out.hidden.len(), 4 * 8);
    assert!(forward(&params, &[PAD, PAD]).is_err());
    assert!(forward(&params, &[]).is_err());
    assert!(forward(&params, &[CLS, 20]).is_err());
    assert!(forward(&params, &[CLS; 41]).is_err());
}

#[test]
fn bce_closed_forms() {
    let (loss, _) = bce(0.5f64, true);
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    for (p, y) in [(1.0f64, true), (0.0, false)] {
        assert!(bce(p, y).0 <= 1e-11 * 1e-12f64.ln().abs());
    }
    // Clamped the other way: finite.
    assert!(bce(0.0f64, true).0.is_finite());
}

#[test]
fn threshold_is_inclusive_and_prediction_pure() {
    let vocab = fit_vocab(&["hello there"], 16).unwrap();
    let mut params = ModelParams::<f64>::init(&EncoderConfig { vocab_size: vocab.len(), ..config(0, 2) }).unwrap();
    tensor_mut(&mut params, "head.w").fill(0.0);
    tensor_mut(&mut params, "head.b").fill(0.0);
    let blank = PersonalityProfile::blank("b");
    let input = ModelInput { partner: &blank, speaker: &blank, target: "hello", history: &[] };
    let (p, label) = predict(&params, &input, AblationCondition::Pd, &vocab, 0.5).unwrap();
    assert_eq!(p, 0.5);
    assert!(label);

    let params = ModelParams::<f64>::init(&EncoderConfig { vocab_size: vocab.len(), ..config(0, 3) }).unwrap();
    let history = [HistoryTurn { tag: SpeakerTag::Partner, text: "there".into() }];
    let input = ModelInput { partner: &blank, speaker: &blank, target: "hello", history: &history };
    let a = predict(&params, &input, AblationCondition::Pd, &vocab, 0.5).unwrap();
    assert_eq!(a, predict(&params, &input, AblationCondition::Pd, &vocab, 0.5).unwrap());
}

#[test]
fn save_load_is_bit_exact() {
    let vocab = fit_vocab(&["a b c d e f"], 32).unwrap();
    let params = ModelParams::<f64>::init(&EncoderConfig { vocab_size: vocab.len(), ..config(0, 4) }).unwrap();
    let mut bytes = Vec::new();
    write_model(&mut bytes, &params, &vocab).unwrap();
    let (loaded, v2) = read_model::<f64, _>(bytes.as_slice()).unwrap();
    assert_eq!(v2, vocab);
    assert_eq!(loaded, params);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10 {
        let t = random_tokens(&mut rng, vocab.len(), 12);
        assert_eq!(forward(&params, &t).unwrap().prob.to_bits(), forward(&loaded, &t).unwrap().prob.to_bits());
    }
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(read_model::<f64, _>(trailing.as_slice()).is_err());
    assert!(read_model::<f64, _>(&bytes[..bytes.len() - 3]).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    io::save_model(&path, &params, &vocab).unwrap();
    assert_eq!(load_model::<f64>(&path).unwrap().0, params);
}

fn toy() -> (Vec<Encoded>, EncoderConfig) {
    // Token 6 marks positives, 7 negatives; the rest is noise.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data = (0..10)
        .map(|i| {
            let label = i % 2 == 0;
            let mut tokens = random_tokens(&mut rng, 12, 6);
            tokens.retain(|&t| t != 6 && t != 7);
            tokens.insert(1 + i % 3, if label { 6 } else { 7 });
            Encoded { tokens, label }
        })
        .collect();
    (data, EncoderConfig { vocab_size: 12, d_model: 8, n_layers: 1, n_heads: 2, d_ff: 16, max_len: 16, seed: 5, ..Default::default() })
}

#[test]
fn separable_toy_is_learned() {
    let (data, enc) = toy();
    let tc = TrainConfig { learning_rate: 1e-2, batch_size: 2, ..TrainConfig::from_scratch() };
    let out = train_encoded::<f64>(&data, &data, &enc, &tc).unwrap();
    assert_eq!(accuracy(&out.params, &data, 0.5).unwrap(), 1.0);
    assert_eq!(out.val_accuracy.len(), 15);
    assert_eq!(out.best_val_accuracy, 1.0);
}

#[test]
fn training_is_deterministic_and_validated() {
    let (data, enc) = toy();
    let tc = TrainConfig { epochs: 3, ..TrainConfig::from_scratch() };
    let a = train_encoded::<f64>(&data, &data, &enc, &tc).unwrap();
    let b = train_encoded::<f64>(&data, &data, &enc, &tc).unwrap();
    let words: Vec<String> = (6..12).map(|i| format!("t{i}")).collect();
    let vocab = fit_vocab(&[words.join(" ")], 12).unwrap();
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    write_model(&mut ba, &a.params, &vocab).unwrap();
    write_model(&mut bb, &b.params, &vocab).unwrap();
    assert_eq!(ba, bb);

    let zero = TrainConfig { epochs: 0, ..tc.clone() };
    assert!(train_encoded::<f64>(&data, &data, &enc, &zero).unwrap_err().is_validation());
    assert!(train_encoded::<f64>(&[], &data, &enc, &tc).unwrap_err().is_validation());
    assert!(train_encoded::<f64>(&data, &[], &enc, &tc).unwrap_err().is_validation());
}

#[test]
fn single_precision_runs() {
    let (data, enc) = toy();
    let tc = TrainConfig { epochs: 2, ..TrainConfig::from_scratch() };
    let out = train_encoded::<f32>(&data, &data, &enc, &tc).unwrap();
    let p = forward(&out.params, &data[0].tokens).unwrap().prob;
    assert!(p > 0.0 && p < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn padding_is_neutral(seed in 0u64..1000, len in 1usize..20, pads in 1usize..10) {
        let params = ModelParams::<f64>::init(&config(30, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens = random_tokens(&mut rng, 30, len);
        let p = forward(&params, &tokens).unwrap().prob;
        let mut padded = tokens.clone();
        padded.extend(std::iter::repeat_n(PAD, pads));
        prop_assert_eq!(forward(&params, &padded).unwrap().prob, p);
    }

    #[test]
    fn max_pool_ignores_row_order(seed in 0u64..1000, rows in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let h: Vec<f64> = (0..rows * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let valid: Vec<bool> = (0..rows).map(|i| i == 0 || rng.random::<bool>()).collect();
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut rng);
        let hp: Vec<f64> = order.iter().flat_map(|&r| h[r * d..(r + 1) * d].to_vec()).collect();
        let vp: Vec<bool> = order.iter().map(|&r| valid[r]).collect();
        let (m, _) = max_pool(&h, d, &valid);
        let (mp, _) = max_pool(&hp, d, &vp);
        prop_assert_eq!(&m, &mp);
        let w = [0.3, -1.0, 2.0, 0.5];
        prop_assert_eq!(head_probability(&w, 0.1, &m), head_probability(&w, 0.1, &mp));
    }
}
