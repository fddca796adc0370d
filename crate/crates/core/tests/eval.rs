use contrast_core::eval::{
    compute_metrics, cooccurrence_ratios, hallucination_ratios, percent, run_mme_subset, run_pope,
    BinaryAnswer, CaptionRecord, ConfusionCounts, Label, Lexicon, LexiconEntry, MmeItem, MmeTask,
};
use contrast_core::testing::{
    biased_pope_fixture, pope_item, script, visual, yes_no_table, Probe, PREFIX,
};
use contrast_core::{
    Channel, DecodeConfig, EvalError, InstructionSpec, LogitSource, LogitVector, MockTable,
    ModelError, ModelInfo, QueryContext, TreeTemplate,
};

fn greedy() -> DecodeConfig {
    DecodeConfig {
        greedy: true,
        max_tokens: 4,
        ..DecodeConfig::default()
    }
}

const SIX: [Probe; 6] = [
    Probe::Present,
    Probe::Absent,
    Probe::Present,
    Probe::CoOccurring,
    Probe::Absent,
    Probe::Present,
];

#[test]
fn scripted_pope_tally() {
    let (table, items) = biased_pope_fixture(&SIX);
    let report = run_pope(&items, &TreeTemplate::standard(), &table, &greedy(), 1).unwrap();
    // three present answered yes, two absent answered no, one co-occurring
    // object answered yes: tp 3, fp 1, fn 0, tn 2
    assert_eq!(report.overall.counts, ConfusionCounts::new(3, 1, 0, 2));
    let m = report.overall.metrics;
    assert_eq!(
        [m.accuracy, m.precision, m.recall, m.f1].map(percent),
        ["83.33", "75.00", "100.00", "85.71"]
    );
    assert_eq!(report.outcomes[3].response, "Yes");
}

#[test]
fn icd_removes_the_cooccurrence_false_positive() {
    let (table, items) = biased_pope_fixture(&SIX);
    let std = run_pope(&items, &TreeTemplate::standard(), &table, &greedy(), 1).unwrap();
    let icd = run_pope(&items, &TreeTemplate::icd(PREFIX, 1.0), &table, &greedy(), 1).unwrap();
    assert_eq!(icd.overall.counts, ConfusionCounts::new(3, 0, 0, 3));
    assert!(icd.overall.metrics.accuracy >= std.overall.metrics.accuracy);
}

#[test]
fn icd_accuracy_not_below_standard_on_larger_fixture() {
    let probes: Vec<Probe> = (0..60)
        .map(|i| match i % 5 {
            0 | 3 => Probe::Present,
            1 => Probe::Absent,
            _ => Probe::CoOccurring,
        })
        .collect();
    let (table, items) = biased_pope_fixture(&probes);
    for seed in 0..5 {
        let cfg = DecodeConfig {
            seed,
            max_tokens: 4,
            ..DecodeConfig::default()
        };
        let std = run_pope(&items, &TreeTemplate::standard(), &table, &cfg, 4).unwrap();
        let icd = run_pope(&items, &TreeTemplate::icd(PREFIX, 1.0), &table, &cfg, 4).unwrap();
        assert!(
            icd.overall.metrics.accuracy >= std.overall.metrics.accuracy,
            "seed {seed}: icd {} < standard {}",
            icd.overall.metrics.accuracy,
            std.overall.metrics.accuracy
        );
    }
}

#[test]
fn ambiguous_answers_score_as_no() {
    let table = yes_no_table("silent");
    let items: Vec<_> = (0..4)
        .map(|i| pope_item(&format!("q{i}"), "img", "Is there a cat?", Label::No))
        .collect();
    let report = run_pope(&items, &TreeTemplate::standard(), &table, &greedy(), 2).unwrap();
    assert_eq!(percent(report.overall.metrics.accuracy), "100.00");
    assert_eq!(report.overall.ambiguous, 4);
    assert!(report
        .outcomes
        .iter()
        .all(|o| o.answer == BinaryAnswer::Ambiguous && o.predicted == Label::No));
}

#[test]
fn empty_dataset_is_an_error() {
    let table = yes_no_table("t");
    assert!(matches!(
        run_pope(&[], &TreeTemplate::standard(), &table, &greedy(), 1),
        Err(EvalError::EmptyDataset)
    ));
}

#[test]
fn duplicate_question_ids_rejected() {
    let (table, mut items) = biased_pope_fixture(&[Probe::Present, Probe::Absent]);
    items[1].question_id = items[0].question_id.clone();
    assert!(run_pope(&items, &TreeTemplate::standard(), &table, &greedy(), 1).is_err());
}

#[test]
fn models_without_token_table_are_rejected() {
    let info = ModelInfo {
        name: "ids-only".into(),
        vocab_size: 2,
        eos_token: contrast_core::TokenId(1),
        tokens: None,
    };
    let table = MockTable::new(info, LogitVector::zeros(2)).unwrap();
    let items = vec![pope_item("q", "img", "Is there a dog?", Label::Yes)];
    assert!(matches!(
        run_pope(&items, &TreeTemplate::standard(), &table, &greedy(), 1),
        Err(EvalError::NoTokenTable(_))
    ));
}

struct FailsOn {
    inner: MockTable,
    visual: &'static str,
}

impl LogitSource for FailsOn {
    fn info(&self) -> &ModelInfo {
        self.inner.info()
    }

    fn next_logits(&self, ctx: &QueryContext) -> Result<LogitVector, ModelError> {
        if ctx.visual.as_str() == self.visual {
            return Err(ModelError::Transport("connection reset".into()));
        }
        self.inner.next_logits(ctx)
    }
}

#[test]
fn model_errors_name_the_question() {
    let (table, items) = biased_pope_fixture(&SIX);
    let model = FailsOn {
        inner: table,
        visual: "img004",
    };
    let err = run_pope(&items, &TreeTemplate::standard(), &model, &greedy(), 3).unwrap_err();
    match err {
        EvalError::Decode { id, .. } => assert_eq!(id, "q004"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn report_recount_matches_and_workers_do_not_matter() {
    let probes: Vec<Probe> = (0..30)
        .map(|i| [Probe::Present, Probe::CoOccurring, Probe::Absent][i % 3])
        .collect();
    let (table, mut items) = biased_pope_fixture(&probes);
    for (i, it) in items.iter_mut().enumerate() {
        it.setting = ["random", "popular", "adversarial"][i % 3].into();
    }
    items.reverse();
    let cfg = DecodeConfig {
        seed: 42,
        ..DecodeConfig::default()
    };
    let tpl = TreeTemplate::icd(PREFIX, 1.0);
    let one = run_pope(&items, &tpl, &table, &cfg, 1).unwrap();
    let eight = run_pope(&items, &tpl, &table, &cfg, 8).unwrap();
    assert_eq!(one, eight);
    let (overall, settings) = one.recount().unwrap();
    assert_eq!(overall, one.overall);
    assert_eq!(settings, one.settings);
    assert_eq!(settings.len(), 3);
    let mut brute = ConfusionCounts::default();
    for o in &one.outcomes {
        brute.record(o.label, o.predicted);
    }
    assert_eq!(brute, one.overall.counts);
    assert_eq!(compute_metrics(&brute).unwrap(), one.overall.metrics);
    assert!(one.outcomes.windows(2).all(|w| w[0].question_id < w[1].question_id));
}

fn mme_fixture(correct: &[(bool, bool)]) -> (MockTable, Vec<MmeItem>) {
    let mut table = yes_no_table("mme");
    let mut items = Vec::new();
    for (task, name) in [(MmeTask::Existence, "existence"), (MmeTask::Color, "color")] {
        for (i, (c1, c2)) in correct.iter().enumerate() {
            let image = format!("{name}-{i}");
            for (j, (label, right)) in [(Label::Yes, *c1), (Label::No, *c2)].into_iter().enumerate() {
                let text = format!("Question {j} about {image}?");
                let says_yes = (label == Label::Yes) == right;
                let (y, n) = if says_yes { (2.0, 0.0) } else { (0.0, 2.0) };
                script(&mut table, &image, &InstructionSpec::standard(text.clone()), y, n);
                items.push(MmeItem {
                    image_id: image.clone(),
                    visual: visual(&image),
                    task: task.clone(),
                    question_text: text,
                    label,
                });
            }
        }
    }
    (table, items)
}

#[test]
fn mme_all_correct_scores_200_per_task() {
    let (table, items) = mme_fixture(&[(true, true), (true, true)]);
    let r = run_mme_subset(&items, &TreeTemplate::standard(), &table, &greedy(), 2).unwrap();
    assert_eq!(format!("{:.2}", r.tasks["existence"].score), "200.00");
    assert_eq!(format!("{:.2}", r.tasks["color"].score), "200.00");
    assert_eq!(r.total, 400.0);
}

#[test]
fn mme_partial_and_wrong() {
    let (table, items) = mme_fixture(&[(true, false), (false, true)]);
    let r = run_mme_subset(&items, &TreeTemplate::standard(), &table, &greedy(), 1).unwrap();
    assert_eq!(format!("{:.2}", r.tasks["color"].score), "50.00");
    let (table, items) = mme_fixture(&[(false, false), (false, false)]);
    let r = run_mme_subset(&items, &TreeTemplate::standard(), &table, &greedy(), 1).unwrap();
    assert_eq!(format!("{:.2}", r.tasks["existence"].score), "0.00");
}

#[test]
fn mme_unpaired_names_image() {
    let (table, mut items) = mme_fixture(&[(true, true), (true, true)]);
    let removed = items.remove(1);
    match run_mme_subset(&items, &TreeTemplate::standard(), &table, &greedy(), 1) {
        Err(EvalError::Unpaired { image_id, .. }) => assert_eq!(image_id, removed.image_id),
        other => panic!("expected unpaired error, got {other:?}"),
    }
}

#[test]
fn icd_tree_uses_fusion_channel_by_default() {
    let mut table = yes_no_table("channel");
    let text = "Is there a fork?";
    script(&mut table, "img", &InstructionSpec::standard(text), 1.0, 0.5);
    script(
        &mut table,
        "img",
        &InstructionSpec::disturbed(text, PREFIX, Channel::Fusion),
        2.0,
        0.5,
    );
    let items = vec![pope_item("q", "img", text, Label::No)];
    let icd = run_pope(&items, &TreeTemplate::icd(PREFIX, 1.0), &table, &greedy(), 1).unwrap();
    assert_eq!(icd.outcomes[0].answer, BinaryAnswer::No);
    let mut llm = TreeTemplate::icd(PREFIX, 1.0);
    llm.channel = Channel::Llm;
    // unscripted llm-channel disturbance falls back to the EOS default
    let r = run_pope(&items, &llm, &table, &greedy(), 1).unwrap();
    assert_eq!(r.outcomes[0].answer, BinaryAnswer::Yes);
}

fn lexicon() -> Lexicon {
    let e = |name: &str, variants: &[&str]| LexiconEntry {
        name: name.into(),
        variants: variants.iter().map(|s| s.to_string()).collect(),
    };
    Lexicon::new(vec![
        e("dog", &["dogs"]),
        e("fork", &["forks"]),
        e("person", &["people", "man", "woman"]),
        e("dining table", &["table"]),
    ])
    .unwrap()
}

fn caption(v: &str, c: &str, truth: &[&str]) -> CaptionRecord {
    CaptionRecord {
        visual_id: v.into(),
        caption: c.into(),
        truth: truth.iter().map(|s| s.to_string()).collect(),
    }
}

fn ratio_of(rows: &[contrast_core::eval::ObjectRatio], object: &str) -> Option<f64> {
    rows.iter().find(|r| r.object == object).map(|r| r.ratio)
}

#[test]
fn hallucination_ratio_fixtures() {
    let lex = lexicon();
    let t = hallucination_ratios(&[caption("a", "a dog and a fork", &["dog"])], &lex);
    assert_eq!(ratio_of(&t.rows, "fork"), Some(1.0));
    assert_eq!(ratio_of(&t.rows, "dog"), Some(0.0));
    assert_eq!(ratio_of(&t.rows, "person"), None);
    assert_eq!(t.rows[0].object, "fork");

    let t = hallucination_ratios(
        &[
            caption("a", "a fork on a plate", &["fork"]),
            caption("b", "a dog with a fork", &["dog"]),
        ],
        &lex,
    );
    let fork = t.rows.iter().find(|r| r.object == "fork").unwrap();
    assert_eq!((fork.hallucination_count, fork.mention_count, fork.ratio), (1, 2, 0.5));
}

#[test]
fn cooccurrence_fixtures() {
    let lex = lexicon();
    let records = [caption("a", "a dog and a fork", &["dog"])];
    let t = cooccurrence_ratios(&records, &lex, "dining table").unwrap();
    assert!(t.empty && t.rows.is_empty());

    let records = [caption("a", "a person at a dining table", &["dining table"])];
    let t = cooccurrence_ratios(&records, &lex, "dining table").unwrap();
    let person = t.rows.iter().find(|r| r.object == "person").unwrap();
    assert_eq!(person.conditional_hallucination_ratio, 1.0);
    assert!(!t.empty);

    let records = [
        caption("a", "people and a fork at the table", &["dining table", "fork"]),
        caption("b", "a dog under the table", &["dining table"]),
        caption("c", "a woman with forks", &["table", "person"]),
    ];
    let global = hallucination_ratios(&records, &lex);
    let cond = cooccurrence_ratios(&records, &lex, "table").unwrap();
    assert_eq!(cond.anchor, "dining table");
    assert_eq!(cond.rows.len(), global.rows.len());
    for (c, g) in cond.rows.iter().zip(&global.rows) {
        assert_eq!(c.object, g.object);
        assert_eq!(c.conditional_hallucination_ratio, g.ratio);
    }

    assert!(matches!(
        cooccurrence_ratios(&records, &lex, "giraffe"),
        Err(EvalError::UnknownAnchor(_))
    ));
}
