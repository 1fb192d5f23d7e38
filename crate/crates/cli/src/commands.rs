//! Subcommand implementations.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use lovesim::ablation::report::{build_report, render_csv, render_markdown};
use lovesim::ablation::{compute_metrics, prepare_cv, run_cv, AblationCondition, CvResult};
use lovesim::abtest::{
    apply_choices, build_ab_items, ground_truth_increases, read_choices, render_ab_report, scripted_choice, tally,
    write_choices, AbItem, DialogueRef, ParticipantDialogues,
};
use lovesim::corpus::io::{read_corpus, read_json, write_corpus, write_examples, write_json};
use lovesim::corpus::{build_examples, synth_corpus, DialogueRecord, PersonalityProfile};
use lovesim::encoder::io::{load_model, save_model};
use lovesim::encoder::{encode_examples, forward, train_monitored, EncoderConfig, Encoded, TrainConfig, Vocab};
use lovesim::simulator::{
    render_transcript, run_simulation, EncoderCohesion, Ensemble, MethodKind, Optimize, Party, SelectionMethod,
    SimConfig, SimulatedDialogue,
};
use lovesim::{Error, Model, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::manifest::RunManifest;
use crate::{AbtestArgs, AblateArgs, AnnotateArgs, Cli, Command, ReportArgs, SimulateArgs, SynthArgs, TrainArgs};

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: Config,
    manifest: RunManifest,
}

impl Ctx<'_> {
    fn out(&self, explicit: Option<&PathBuf>, default_name: &str) -> Result<PathBuf> {
        let path = explicit.cloned().unwrap_or_else(|| self.cli.out_dir.join(default_name));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        Ok(path)
    }

    fn read(&mut self, path: &Path) -> Result<()> {
        self.manifest.input(path)?;
        Ok(())
    }

    fn wrote(&mut self, path: &Path) -> Result<()> {
        info!("wrote {}", path.display());
        self.manifest.output(path)?;
        Ok(())
    }

    fn write_text(&mut self, path: &Path, text: &str) -> Result<()> {
        fs::write(path, text)?;
        self.wrote(path)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    let name = match &cli.command {
        Command::Synth(_) => "synth",
        Command::Annotate(_) => "annotate",
        Command::Train(_) => "train",
        Command::Ablate(_) => "ablate",
        Command::Simulate(_) => "simulate",
        Command::Abtest(_) => "abtest",
        Command::Report(_) => "report",
    };
    let mut ctx = Ctx { cli, manifest: RunManifest::new(name, cli.config.as_deref()), config };
    if let Some(path) = &cli.config {
        ctx.read(path)?;
    }
    match &cli.command {
        Command::Synth(a) => synth(&mut ctx, a)?,
        Command::Annotate(a) => annotate(&mut ctx, a)?,
        Command::Train(a) => train(&mut ctx, a)?,
        Command::Ablate(a) => ablate(&mut ctx, a)?,
        Command::Simulate(a) => simulate(&mut ctx, a)?,
        Command::Abtest(a) => abtest(&mut ctx, a)?,
        Command::Report(a) => report(&mut ctx, a)?,
    }
    ctx.manifest.finish(start.elapsed());
    fs::create_dir_all(&cli.out_dir)?;
    write_json(&cli.out_dir.join(format!("{name}.manifest.json")), &ctx.manifest)
}

fn synth(ctx: &mut Ctx<'_>, a: &SynthArgs) -> Result<()> {
    if let Some(pairs) = a.pairs {
        ctx.config.synth.pairs = pairs;
    }
    let seed = ctx.config.seed;
    ctx.manifest.seed("synth", seed);
    let corpus = synth_corpus(&ctx.config.synth, seed)?;
    let path = ctx.out(a.output.as_ref(), "corpus.jsonl")?;
    write_corpus(&path, &corpus)?;
    ctx.wrote(&path)
}

fn load_corpus(ctx: &mut Ctx<'_>, path: &Path) -> Result<Vec<DialogueRecord>> {
    let corpus = read_corpus(path)?;
    ctx.read(path)?;
    if corpus.is_empty() {
        return Err(invalid(format!("{} holds no dialogues", path.display())));
    }
    Ok(corpus)
}

fn annotate(ctx: &mut Ctx<'_>, a: &AnnotateArgs) -> Result<()> {
    let corpus = load_corpus(ctx, &a.corpus)?;
    let cfg = &ctx.config.annotate;
    let examples = build_examples(&corpus, cfg.history_len, cfg.initial_score)?;
    let positives = examples.iter().filter(|e| e.label).count();
    info!("{} examples, {positives} positive", examples.len());
    let path = ctx.out(a.output.as_ref(), "examples.jsonl")?;
    write_examples(&path, &examples)?;
    ctx.wrote(&path)
}

fn condition(s: &str) -> Result<AblationCondition> {
    s.parse()
}

fn cv_settings(ctx: &mut Ctx<'_>, epochs: Option<usize>) -> (EncoderConfig, TrainConfig) {
    if let Some(e) = epochs {
        ctx.config.train.epochs = e;
    }
    let c = &ctx.config;
    ctx.manifest.seed("cv", c.cv.seed);
    ctx.manifest.seed("encoder", c.encoder.seed);
    ctx.manifest.seed("train", c.train.seed);
    (c.encoder.clone(), c.train.clone())
}

#[derive(Debug, Serialize)]
struct TrainSummary<'a> {
    condition: AblationCondition,
    fold: usize,
    val_pair: &'a str,
    test_pair: &'a str,
    best_epoch: usize,
    val_accuracy: &'a [f64],
    train_loss: &'a [f64],
    test_metrics: lovesim::ablation::Metrics,
}

fn train(ctx: &mut Ctx<'_>, a: &TrainArgs) -> Result<()> {
    let cond = condition(&a.condition)?;
    let corpus = load_corpus(ctx, &a.corpus)?;
    let (enc, tc) = cv_settings(ctx, a.epochs);
    let data = prepare_cv(&corpus, &ctx.config.cv)?;
    let fold = data
        .folds
        .get(a.fold)
        .ok_or_else(|| invalid(format!("fold {} out of range ({} folds)", a.fold, data.folds.len())))?;
    let enc = EncoderConfig {
        vocab_size: data.vocab.len(),
        seed: enc.seed.wrapping_add(a.fold as u64),
        ..enc
    };
    let tc = TrainConfig { seed: tc.seed.wrapping_add(a.fold as u64), ..tc };
    let encoded = encode_examples(&data.examples, cond, &data.vocab, enc.max_len)?;
    let train_pairs: HashSet<&str> = fold.train_pairs.iter().map(String::as_str).collect();
    let select = |keep: &dyn Fn(&str) -> bool| -> Vec<Encoded> {
        data.examples
            .iter()
            .zip(&encoded)
            .filter(|(e, _)| keep(&e.pair_id))
            .map(|(_, x)| x.clone())
            .collect()
    };
    let train_set = select(&|p| train_pairs.contains(p));
    let val = select(&|p| p == fold.val_pair);
    let test = select(&|p| p == fold.test_pair);
    if val.is_empty() || test.is_empty() {
        return Err(invalid(format!("fold {} has no validation or test examples", a.fold)));
    }
    let outcome = train_monitored::<f64>(&train_set, &[&val], &enc, &tc)?.remove(0);
    let mut preds = Vec::with_capacity(test.len());
    for e in &test {
        preds.push(forward(&outcome.params, &e.tokens)?.prob >= enc.threshold);
    }
    let labels: Vec<bool> = test.iter().map(|e| e.label).collect();
    let summary = TrainSummary {
        condition: cond,
        fold: a.fold,
        val_pair: &fold.val_pair,
        test_pair: &fold.test_pair,
        best_epoch: outcome.best_epoch,
        val_accuracy: &outcome.val_accuracy,
        train_loss: &outcome.train_loss,
        test_metrics: compute_metrics(&preds, &labels)?,
    };
    info!("fold {}: test accuracy {:.3}", a.fold, summary.test_metrics.accuracy);
    let model_path = ctx.out(a.output.as_ref(), "model.bin")?;
    save_model(&model_path, &outcome.params, &data.vocab)?;
    ctx.wrote(&model_path)?;
    let summary_path = model_path.with_extension("json");
    write_json(&summary_path, &summary)?;
    ctx.wrote(&summary_path)
}

fn models_dir(ctx: &Ctx<'_>, explicit: Option<&PathBuf>) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| ctx.cli.out_dir.join("models"))
}

fn ablate(ctx: &mut Ctx<'_>, a: &AblateArgs) -> Result<()> {
    let conditions: Vec<AblationCondition> = a.conditions.iter().map(|c| condition(c)).collect::<Result<_>>()?;
    if conditions.is_empty() {
        return Err(invalid("no conditions given"));
    }
    let corpus = load_corpus(ctx, &a.corpus)?;
    let (enc, tc) = cv_settings(ctx, a.epochs);
    let data = prepare_cv(&corpus, &ctx.config.cv)?;
    let folds_path = ctx.out(None, "folds.json")?;
    write_json(&folds_path, &data.folds)?;
    ctx.wrote(&folds_path)?;

    let models = models_dir(ctx, None);
    let mut results = Vec::new();
    for cond in conditions {
        let start = Instant::now();
        let result = run_cv(&data, cond, &enc, &tc)?;
        info!(
            "{cond}: mean accuracy {:?} over {} folds in {:.0}s",
            result.mean_accuracy(),
            result.folds.len(),
            start.elapsed().as_secs_f64()
        );
        let dir = models.join(cond.key());
        fs::create_dir_all(&dir)?;
        for (fold, model) in result.folds.iter().zip(&result.models) {
            let path = dir.join(format!("fold-{:02}.bin", fold.fold));
            save_model(&path, model, &data.vocab)?;
            ctx.wrote(&path)?;
        }
        results.push(result);
    }
    let json = ctx.out(None, "ablation.json")?;
    write_json(&json, &results)?;
    ctx.wrote(&json)?;
    write_ablation_report(ctx, &results)
}

fn write_ablation_report(ctx: &mut Ctx<'_>, results: &[CvResult]) -> Result<()> {
    // Build everything before writing so an invalid input leaves no files.
    let report = build_report(results, ctx.config.cv.seed)?;
    let md = render_markdown(&report);
    let csv = render_csv(&report);
    let md_path = ctx.out(None, "ablation_report.md")?;
    let csv_path = ctx.out(None, "ablation.csv")?;
    ctx.write_text(&md_path, &md)?;
    ctx.write_text(&csv_path, &csv)
}

fn load_ensemble(ctx: &mut Ctx<'_>, dir: &Path) -> Result<(Vec<Model>, Vocab)> {
    let mut paths: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "bin"))
            .collect(),
        Err(_) => Vec::new(),
    };
    if paths.is_empty() {
        return Err(invalid(format!(
            "no fold models in {}; run `ablate` first or pass --models",
            dir.display()
        )));
    }
    paths.sort();
    let mut models = Vec::with_capacity(paths.len());
    let mut vocab: Option<Vocab> = None;
    for p in &paths {
        let (m, v) = load_model::<f64>(p)?;
        ctx.read(p)?;
        if vocab.as_ref().is_some_and(|known| *known != v) {
            return Err(invalid(format!("{} uses a different vocabulary", p.display())));
        }
        vocab = Some(v);
        models.push(m);
    }
    Ok((models, vocab.expect("at least one model")))
}

/// Everything needed to score and replay one participant's dialogues.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationFile {
    pub participant_id: String,
    pub profile_x: PersonalityProfile,
    pub profile_y: PersonalityProfile,
    pub dialogues: Vec<SimulatedDialogue>,
}

fn find_pair<'a>(corpus: &'a [DialogueRecord], key: &str) -> Result<&'a DialogueRecord> {
    if let Some(d) = corpus.iter().find(|d| d.pair_id == key) {
        return Ok(d);
    }
    let index: usize = key
        .parse()
        .map_err(|_| invalid(format!("pair {key:?} is neither an index nor a pair id")))?;
    corpus
        .get(index)
        .ok_or_else(|| invalid(format!("pair index {index} out of range ({} pairs)", corpus.len())))
}

fn simulate(ctx: &mut Ctx<'_>, a: &SimulateArgs) -> Result<()> {
    let methods: Vec<MethodKind> = a.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(invalid("no selection methods given"));
    }
    let corpus = load_corpus(ctx, &a.corpus)?;
    let pair = find_pair(&corpus, &a.pair)?.clone();
    let seed = ctx.config.seed;
    ctx.manifest.seed("simulate", seed);
    let sc = ctx.config.simulate.clone();
    let mut config = SimConfig::new(pair.profile_x.clone(), pair.profile_y.clone(), seed);
    config.candidates_per_turn = sc.candidates_per_turn;
    config.common_turns = sc.common_turns;
    config.condition_turns = sc.condition_turns;
    config.initial_utterance = sc.initial_utterance.clone();
    config.history_len = sc.history_len;
    config.optimize = match &a.optimize {
        Some(o) => o.parse::<Optimize>()?,
        None => sc.optimize,
    };

    let dir = models_dir(ctx, a.models.as_ref());
    let mut ensembles: BTreeMap<AblationCondition, (Vec<Model>, Vocab)> = BTreeMap::new();
    for cond in methods.iter().filter_map(|m| m.condition()) {
        if let std::collections::btree_map::Entry::Vacant(e) = ensembles.entry(cond) {
            let loaded = load_ensemble(ctx, &dir.join(cond.key()))?;
            e.insert(loaded);
        }
    }
    if ensembles.is_empty() {
        // Baseline only: any trained model serves as the cohesion encoder.
        let cond = [AblationCondition::Pd, AblationCondition::DOnly]
            .into_iter()
            .find(|c| dir.join(c.key()).is_dir())
            .unwrap_or(AblationCondition::Pd);
        let loaded = load_ensemble(ctx, &dir.join(cond.key()))?;
        ensembles.insert(cond, loaded);
    }
    let vocabs: Vec<&Vocab> = ensembles.values().map(|(_, v)| v).collect();
    if vocabs.windows(2).any(|w| w[0] != w[1]) {
        return Err(invalid("ensembles were trained with different vocabularies"));
    }
    let (scorer_models, vocab) = ensembles
        .get(&AblationCondition::Pd)
        .or_else(|| ensembles.values().next())
        .expect("at least one ensemble");
    let scorer = EncoderCohesion { params: &scorer_models[0], vocab };
    let threshold = scorer_models[0].config.threshold;

    let selection: Vec<SelectionMethod<'_>> = methods
        .iter()
        .map(|m| match m.condition() {
            None => SelectionMethod::Baseline,
            Some(cond) => {
                let (models, vocab) = &ensembles[&cond];
                let e = Ensemble { models, condition: cond, vocab, threshold };
                if *m == MethodKind::VotePd {
                    SelectionMethod::VotePd(e)
                } else {
                    SelectionMethod::VoteD(e)
                }
            }
        })
        .collect();
    let generator = &sc.generator;
    let dialogues = run_simulation(&config, generator, generator, &selection, &scorer)?;
    let file = SimulationFile {
        participant_id: pair.pair_id.clone(),
        profile_x: pair.profile_x.clone(),
        profile_y: pair.profile_y.clone(),
        dialogues,
    };
    let path = ctx.out(a.output.as_ref(), "simulation.json")?;
    write_json(&path, &file)?;
    ctx.wrote(&path)?;
    if a.transcript {
        let text = render_transcript(&file.dialogues)?;
        let t = path.with_file_name("transcript.md");
        ctx.write_text(&t, &text)?;
    }
    Ok(())
}

fn load_simulations(ctx: &mut Ctx<'_>, paths: &[PathBuf]) -> Result<Vec<(PathBuf, SimulationFile)>> {
    let mut out = Vec::new();
    for p in paths {
        let file: SimulationFile = read_json(p)?;
        ctx.read(p)?;
        out.push((p.clone(), file));
    }
    Ok(out)
}

fn method_order(items: &[AbItem]) -> Vec<MethodKind> {
    let used: HashSet<MethodKind> = items.iter().flat_map(|i| [i.first.method, i.second.method]).collect();
    [MethodKind::VotePd, MethodKind::VoteD, MethodKind::Baseline]
        .into_iter()
        .filter(|m| used.contains(m))
        .collect()
}

fn abtest(ctx: &mut Ctx<'_>, a: &AbtestArgs) -> Result<()> {
    let sims = load_simulations(ctx, &a.simulations)?;
    let seed = ctx.config.abtest.seed.unwrap_or(ctx.config.seed);
    ctx.manifest.seed("abtest", seed);
    let participants: Vec<ParticipantDialogues> = sims
        .iter()
        .map(|(path, f)| ParticipantDialogues {
            participant_id: f.participant_id.clone(),
            dialogues: f
                .dialogues
                .iter()
                .enumerate()
                .map(|(i, d)| DialogueRef { method: d.method, dialogue: format!("{}#{i}", path.display()) })
                .collect(),
        })
        .collect();
    let mut items = build_ab_items(&participants, seed)?;

    if a.scripted {
        let lexicon = &ctx.config.simulate.generator.lexicon;
        let mut gains = BTreeMap::new();
        for (path, f) in &sims {
            for (i, d) in f.dialogues.iter().enumerate() {
                let key = format!("{}#{i}", path.display());
                gains.insert(key, ground_truth_increases(d, Party::Y, &f.profile_x, lexicon));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for item in &mut items {
            item.choice = scripted_choice(gains[&item.first.dialogue], gains[&item.second.dialogue], &mut rng);
        }
    } else if let Some(path) = &a.choices {
        let rows = read_choices(path)?;
        ctx.read(path)?;
        apply_choices(&mut items, &rows)?;
    }

    let items_path = ctx.out(None, "ab_items.json")?;
    write_json(&items_path, &items)?;
    ctx.wrote(&items_path)?;
    if a.choices.is_none() {
        // A template to fill in, or the scripted choices.
        let choices_path = ctx.out(None, "choices.csv")?;
        write_choices(&choices_path, &items)?;
        ctx.wrote(&choices_path)?;
    }
    if a.scripted || a.choices.is_some() {
        write_ab_report(ctx, &items)?;
    }
    Ok(())
}

fn write_ab_report(ctx: &mut Ctx<'_>, items: &[AbItem]) -> Result<()> {
    let order = method_order(items);
    if order.len() < 2 {
        return Err(invalid("A/B items compare fewer than two methods"));
    }
    let matrix = tally(items, &order)?;
    let md = render_ab_report(&matrix);
    let json = ctx.out(None, "ab.json")?;
    write_json(&json, &matrix)?;
    ctx.wrote(&json)?;
    let path = ctx.out(None, "ab_report.md")?;
    ctx.write_text(&path, &md)
}

fn report(ctx: &mut Ctx<'_>, a: &ReportArgs) -> Result<()> {
    if a.ablation.is_none() && a.ab_items.is_none() {
        return Err(invalid("nothing to report: pass --ablation and/or --ab-items"));
    }
    if let Some(path) = &a.ablation {
        let results: Vec<CvResult> = read_json(path)?;
        ctx.read(path)?;
        write_ablation_report(ctx, &results)?;
    }
    if let Some(path) = &a.ab_items {
        let mut items: Vec<AbItem> = read_json(path)?;
        ctx.read(path)?;
        if items.is_empty() {
            return Err(invalid(format!("{} holds no A/B items", path.display())));
        }
        if let Some(c) = &a.choices {
            let rows = read_choices(c)?;
            ctx.read(c)?;
            apply_choices(&mut items, &rows)?;
        }
        write_ab_report(ctx, &items)?;
    }
    Ok(())
}
