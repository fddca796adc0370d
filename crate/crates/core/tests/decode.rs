use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use contrast_core::models::BiasPair;
use contrast_core::testing::visual;
use contrast_core::{
    decode_sequence, eval_tree, step_distribution, Channel, ContrastNode, DecodeConfig,
    InstructionSpec, LogitSource, LogitVector, MockTable, ModelError, ModelInfo, QueryContext,
    SyntheticBiasModel, TokenId,
};
use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PREFIX: &str = "You are a confused object detector,";

/// Deterministic pseudo-random model: logits are a hash of the full query.
struct HashModel {
    info: ModelInfo,
    salt: u64,
    scale: f64,
}

impl HashModel {
    fn new(vocab: usize, salt: u64) -> Self {
        HashModel {
            info: ModelInfo {
                name: format!("hash-{salt}"),
                vocab_size: vocab,
                eos_token: TokenId(vocab as u32 - 1),
                tokens: None,
            },
            salt,
            scale: 4.0,
        }
    }
}

impl LogitSource for HashModel {
    fn info(&self) -> &ModelInfo {
        &self.info
    }

    fn next_logits(&self, ctx: &QueryContext) -> Result<LogitVector, ModelError> {
        let mut h = DefaultHasher::new();
        (self.salt, ctx).hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let v = (0..self.info.vocab_size)
            .map(|_| ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0 * self.scale)
            .collect();
        Ok(LogitVector::new(v).unwrap())
    }
}

fn icd_tree(q: &str, lambda: f64) -> ContrastNode {
    ContrastNode::contrast(
        ContrastNode::leaf(visual("img"), InstructionSpec::standard(q)),
        ContrastNode::leaf(visual("img"), InstructionSpec::disturbed(q, PREFIX, Channel::Fusion)),
        lambda,
    )
}

fn standard_tree(q: &str) -> ContrastNode {
    ContrastNode::leaf(visual("img"), InstructionSpec::standard(q))
}

/// Two-leaf mock: standard and disturbed first-step logits.
fn two_leaf_table(standard: &[f64], disturbed: &[f64]) -> MockTable {
    let n = standard.len();
    let info = ModelInfo {
        name: "two-leaf".into(),
        vocab_size: n,
        eos_token: TokenId(n as u32 - 1),
        tokens: None,
    };
    let mut t = MockTable::new(info, LogitVector::new(standard.to_vec()).unwrap()).unwrap();
    let ctx = |fusion: &str| QueryContext {
        visual: visual("img"),
        fusion_text: fusion.into(),
        llm_text: "q".into(),
        prefix_tokens: vec![],
    };
    t.insert(ctx("q"), LogitVector::new(standard.to_vec()).unwrap()).unwrap();
    t.insert(ctx(&format!("{PREFIX} q")), LogitVector::new(disturbed.to_vec()).unwrap())
        .unwrap();
    t
}

/// Independent recomputation of one step for a standard/disturbed pair:
/// softmax of the standard logits, head filter, contrast, masking, softmax.
fn oracle_step(standard: &[f64], disturbed: &[f64], lambda: f64, alpha: f64) -> Vec<f64> {
    let m = standard.iter().cloned().fold(f64::MIN, f64::max);
    let z: f64 = standard.iter().map(|x| (x - m).exp()).sum();
    let p: Vec<f64> = standard.iter().map(|x| (x - m).exp() / z).collect();
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<bool> = p.iter().map(|&x| x >= alpha * pmax).collect();
    let c: Vec<f64> = standard
        .iter()
        .zip(disturbed)
        .map(|(s, d)| s - lambda * d)
        .collect();
    let cm = c
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(x, _)| *x)
        .fold(f64::MIN, f64::max);
    let e: Vec<f64> = c
        .iter()
        .zip(&keep)
        .map(|(x, k)| if *k { (x - cm).exp() } else { 0.0 })
        .collect();
    let ze: f64 = e.iter().sum();
    e.iter().map(|x| x / ze).collect()
}

#[test]
fn worked_example_matches_hand_values() {
    let model = two_leaf_table(&[2.0, 0.0, 0.0], &[0.0, 2.0, 0.0]);
    let cfg = DecodeConfig::default();
    let step = step_distribution(&icd_tree("q", 1.0), &model, &[], &cfg).unwrap();
    assert_eq!(step.head, BTreeSet::from([TokenId(0), TokenId(1), TokenId(2)]));
    assert_eq!(step.contrasted_logits.values(), &[2.0, -2.0, 0.0]);
    let expected = [0.8668, 0.0159, 0.1173];
    let oracle = oracle_step(&[2.0, 0.0, 0.0], &[0.0, 2.0, 0.0], 1.0, 0.1);
    for i in 0..3 {
        assert!((step.distribution.probs()[i] - expected[i]).abs() < 1e-4);
        assert!((step.distribution.probs()[i] - oracle[i]).abs() < 1e-12);
    }
}

#[test]
fn identical_leaves_give_uniform_head() {
    let model = two_leaf_table(&[1.0, 0.5, 0.0, -0.5], &[1.0, 0.5, 0.0, -0.5]);
    let cfg = DecodeConfig {
        alpha: 0.01,
        ..DecodeConfig::default()
    };
    let step = step_distribution(&icd_tree("q", 1.0), &model, &[], &cfg).unwrap();
    assert_eq!(step.head.len(), 4);
    for p in step.distribution.probs() {
        assert!((p - 0.25).abs() < 1e-12);
    }
}

#[test]
fn lambda_zero_is_standard_restricted_to_head() {
    let model = two_leaf_table(&[3.0, 0.0, 1.0], &[0.0, 5.0, 0.0]);
    let cfg = DecodeConfig::default();
    let icd = step_distribution(&icd_tree("q", 0.0), &model, &[], &cfg).unwrap();
    let std = step_distribution(&standard_tree("q"), &model, &[], &cfg).unwrap();
    assert_eq!(icd.distribution, std.distribution);
    // threshold 0.1 * p(0) excludes token 1
    assert_eq!(icd.head, BTreeSet::from([TokenId(0), TokenId(2)]));
    let e = 1f64.exp() / (3f64.exp() + 1f64.exp());
    assert!((icd.distribution.probs()[2] - e).abs() < 1e-12);
}

#[test]
fn eos_first_step_gives_empty_sequence() {
    let model = two_leaf_table(&[0.0, 0.0, 9.0], &[0.0, 0.0, 9.0]);
    let out = decode_sequence(&icd_tree("q", 1.0), &model, &DecodeConfig::default()).unwrap();
    assert!(out.tokens.is_empty());
    assert_eq!(out.traces.len(), 1);
    assert_eq!(out.traces[0].chosen, TokenId(2));
}

#[test]
fn stop_tokens_end_decoding_and_are_kept() {
    let model = HashModel::new(12, 3);
    let base = DecodeConfig {
        max_tokens: 30,
        seed: 5,
        ..DecodeConfig::default()
    };
    let full = decode_sequence(&icd_tree("q", 1.0), &model, &base).unwrap();
    let Some(&stop) = full.tokens.get(2) else {
        return;
    };
    let cfg = DecodeConfig {
        stop_tokens: BTreeSet::from([stop]),
        ..base
    };
    let out = decode_sequence(&icd_tree("q", 1.0), &model, &cfg).unwrap();
    let first = full.tokens.iter().position(|t| *t == stop).unwrap();
    assert_eq!(out.tokens, full.tokens[..=first]);
}

#[test]
fn repetition_penalty_applies_to_generated_tokens() {
    let model = HashModel::new(8, 11);
    let cfg = DecodeConfig {
        repetition_penalty: 1.5,
        max_tokens: 6,
        greedy: true,
        ..DecodeConfig::default()
    };
    let out = decode_sequence(&icd_tree("q", 1.0), &model, &cfg).unwrap();
    let tree = icd_tree("q", 1.0);
    for (i, trace) in out.traces.iter().enumerate() {
        let step = step_distribution(&tree, &model, &out.tokens[..i], &cfg).unwrap();
        for t in out.tokens[..i].iter().collect::<BTreeSet<_>>() {
            if step.head.contains(t) {
                let c = trace.contrasted_logits.values()[t.index()];
                let expected = if c > 0.0 { c / 1.5 } else { c * 1.5 };
                assert_eq!(step.processed_logits.values()[t.index()], expected);
            }
        }
    }
}

#[test]
fn synthetic_bias_single_step() {
    let model = SyntheticBiasModel {
        info: ModelInfo {
            name: "synthetic".into(),
            vocab_size: 4,
            eos_token: TokenId(3),
            tokens: None,
        },
        base_logits: LogitVector::zeros(4),
        present_objects: BTreeMap::from([("img".into(), BTreeSet::from([TokenId(0)]))]),
        bias_pairs: vec![BiasPair {
            anchor: TokenId(0),
            hallucinated: TokenId(1),
            weight: 1.0,
        }],
        disturbance_gain: 2.0,
        disturbance_marker: "confused".into(),
    };
    let cfg = DecodeConfig {
        greedy: true,
        max_tokens: 1,
        ..DecodeConfig::default()
    };
    let std = decode_sequence(&standard_tree("q"), &model, &cfg).unwrap();
    let icd = decode_sequence(&icd_tree("q", 1.0), &model, &cfg).unwrap();
    assert_eq!(std.traces[0].chosen, TokenId(1));
    assert_ne!(icd.traces[0].chosen, TokenId(1));
    // contrasted: unbiased tokens 0, hallucinated 1 - 2 = -1
    assert_eq!(icd.traces[0].contrasted_logits.values(), &[0.0, -1.0, 0.0, 0.0]);
}

fn dyadic(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() % 257) as f64 / 4.0 - 32.0
}

#[test]
fn four_leaf_tree_equals_expanded_combination() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let vocab = 6;
        let leaves: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..vocab).map(|_| dyadic(&mut rng)).collect())
            .collect();
        let lv = (rng.next_u64() % 9) as f64 / 8.0;
        let li = (rng.next_u64() % 9) as f64 / 8.0;
        let info = ModelInfo {
            name: "leaves".into(),
            vocab_size: vocab,
            eos_token: TokenId(0),
            tokens: None,
        };
        let mut t = MockTable::new(info, LogitVector::zeros(vocab)).unwrap();
        let keys = [("img", "q"), ("img.d", "q"), ("img", "P q"), ("img.d", "P q")];
        for ((v, text), values) in keys.iter().zip(&leaves) {
            t.insert(
                QueryContext {
                    visual: visual(v),
                    fusion_text: text.to_string(),
                    llm_text: "q".into(),
                    prefix_tokens: vec![],
                },
                LogitVector::new(values.clone()).unwrap(),
            )
            .unwrap();
        }
        let std = || InstructionSpec::standard("q");
        let dist = || InstructionSpec::disturbed("q", "P", Channel::Fusion);
        let tree = ContrastNode::contrast(
            ContrastNode::contrast(
                ContrastNode::leaf(visual("img"), std()),
                ContrastNode::leaf(visual("img.d"), std()),
                lv,
            ),
            ContrastNode::contrast(
                ContrastNode::leaf(visual("img"), dist()),
                ContrastNode::leaf(visual("img.d"), dist()),
                lv,
            ),
            li,
        );
        let got = eval_tree(&tree, &t, &[]).unwrap();
        for k in 0..vocab {
            let (l1, l2, l3, l4) = (leaves[0][k], leaves[1][k], leaves[2][k], leaves[3][k]);
            let expanded = l1 - lv * l2 - li * l3 + li * lv * l4;
            assert_eq!(got.values()[k], expanded, "case {case}, token {k}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduction_to_standard_decoding(salt in any::<u64>(), seed in any::<u64>(), vocab in 3usize..24) {
        let model = HashModel::new(vocab, salt);
        let cfg = DecodeConfig { seed, max_tokens: 12, ..DecodeConfig::default() };
        let icd = decode_sequence(&icd_tree("q", 0.0), &model, &cfg).unwrap();
        let std = decode_sequence(&standard_tree("q"), &model, &cfg).unwrap();
        prop_assert_eq!(icd.tokens, std.tokens);
        for (a, b) in icd.traces.iter().zip(&std.traces) {
            prop_assert_eq!(&a.distribution, &b.distribution);
        }
    }

    #[test]
    fn chosen_tokens_lie_in_head(salt in any::<u64>(), seed in any::<u64>(), greedy in any::<bool>()) {
        let model = HashModel::new(10, salt);
        let cfg = DecodeConfig { seed, greedy, max_tokens: 10, top_p: 0.9, ..DecodeConfig::default() };
        let out = decode_sequence(&icd_tree("q", 1.0), &model, &cfg).unwrap();
        for t in &out.traces {
            prop_assert!(t.head_mask.contains(&t.chosen));
            prop_assert!(t.distribution.prob(t.chosen) > 0.0);
        }
    }

    #[test]
    fn decoding_is_deterministic(salt in any::<u64>(), seed in any::<u64>()) {
        let model = HashModel::new(9, salt);
        let cfg = DecodeConfig { seed, max_tokens: 8, ..DecodeConfig::default() };
        let a = decode_sequence(&icd_tree("q", 1.0), &model, &cfg).unwrap();
        let b = decode_sequence(&icd_tree("q", 1.0), &model, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn step_matches_brute_force(
        standard in prop::collection::vec(-6.0f64..6.0, 2..20),
        disturbed_seed in any::<u64>(),
        lambda in 0.0f64..3.0,
        alpha in 0.01f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(disturbed_seed);
        let disturbed: Vec<f64> = standard.iter().map(|_| dyadic(&mut rng) / 4.0).collect();
        let model = two_leaf_table(&standard, &disturbed);
        let cfg = DecodeConfig { alpha, ..DecodeConfig::default() };
        let step = step_distribution(&icd_tree("q", lambda), &model, &[], &cfg).unwrap();
        let oracle = oracle_step(&standard, &disturbed, lambda, alpha);
        for (a, b) in step.distribution.probs().iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_invariance(
        standard in prop::collection::vec(-6.0f64..6.0, 2..20),
        disturbed_seed in any::<u64>(),
        lambda in 0.0f64..3.0,
        shift in -20.0f64..20.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(disturbed_seed);
        let disturbed: Vec<f64> = standard.iter().map(|_| dyadic(&mut rng) / 4.0).collect();
        let cfg = DecodeConfig::default();
        let a = step_distribution(&icd_tree("q", lambda), &two_leaf_table(&standard, &disturbed), &[], &cfg).unwrap();
        let s2: Vec<f64> = standard.iter().map(|x| x + shift).collect();
        let d2: Vec<f64> = disturbed.iter().map(|x| x + shift).collect();
        let b = step_distribution(&icd_tree("q", lambda), &two_leaf_table(&s2, &d2), &[], &cfg).unwrap();
        prop_assume!(a.head == b.head);
        for (x, y) in a.distribution.probs().iter().zip(b.distribution.probs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    // Two head tokens with equal standard logits: the one the disturbed
    // query favors loses probability relative to the other as lambda grows.
    #[test]
    fn lambda_monotonicity(
        mut standard in prop::collection::vec(-2.0f64..2.0, 3..12),
        mut disturbed in prop::collection::vec(-3.0f64..3.0, 3..12),
        l1 in 0.0f64..2.0,
        dl in 0.01f64..2.0,
    ) {
        let n = standard.len().min(disturbed.len());
        standard.truncate(n);
        disturbed.truncate(n);
        standard[1] = standard[0];
        prop_assume!((disturbed[0] - disturbed[1]).abs() > 1e-3);
        let (hi, lo) = if disturbed[0] > disturbed[1] { (0, 1) } else { (1, 0) };
        let model = two_leaf_table(&standard, &disturbed);
        let cfg = DecodeConfig { alpha: 1e-6, ..DecodeConfig::default() };
        let at = |l: f64| step_distribution(&icd_tree("q", l), &model, &[], &cfg).unwrap().distribution;
        let (p1, p2) = (at(l1), at(l1 + dl));
        let r1 = p1.probs()[hi] / p1.probs()[lo];
        let r2 = p2.probs()[hi] / p2.probs()[lo];
        prop_assert!(r2 < r1);
        prop_assert!(p2.probs()[hi] < p2.probs()[lo]);
        let o1 = oracle_step(&standard, &disturbed, l1, 1e-6);
        let o2 = oracle_step(&standard, &disturbed, l1 + dl, 1e-6);
        prop_assert!((o2[hi] / o2[lo]) < (o1[hi] / o1[lo]));
        prop_assert!((r2 - o2[hi] / o2[lo]).abs() <= 1e-9 * r2.max(1.0));
    }
}
