use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use hoid_core::dataset::prompt::build_prompt;
use hoid_core::dataset::sft::{assemble_sft, read_traces};
use hoid_core::dataset::simulate::{simulate_policy, NoiseProfile};
use hoid_core::dataset::traces::fetch_traces;
use hoid_core::dataset::{
    derive_rare_categories, load_annotations, AnnotationFormat, Dataset, Split,
};
use hoid_core::eval::{evaluate, triplets_from_completions, ScoreMode};
use hoid_core::reward::{score_sample, RewardBreakdown, RewardWeights};
use hoid_core::training::group_advantages;
use hoid_core::vocab::hico_reference_rare_set;
use hoid_core::Vocabulary;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{apply_weight_overrides, Config};
use crate::jsonl::{io_err, meta, read_values, Output};
use crate::{
    Cli, CliError, Command, DatasetArg, DatasetCmd, EvalCmd, GrpoCmd, OutputFormat, PromptsCmd,
    RewardCmd, SftCmd,
};

/// Lines scored per parallel batch.
const CHUNK: usize = 4096;

struct Ctx {
    cfg: Config,
    vocab: Vocabulary,
    format: OutputFormat,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.noise.seed = s;
    }
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Invalid(format!("worker pool: {e}")))?;
    }
    let vocab = match cli.vocab.as_ref().or(cfg.paths.vocab.as_ref()) {
        Some(p) => Vocabulary::load(p)?,
        None => Vocabulary::hico_det(),
    };
    for w in vocab.warnings() {
        log::warn!("vocabulary: {w}");
    }
    let ctx = Ctx {
        cfg,
        vocab,
        format: cli.format.unwrap_or_default(),
    };
    match cli.command {
        Command::Prompts(PromptsCmd::Build { data, out }) => {
            prompts_build(&ctx, &data, out.as_deref())
        }
        Command::Reward(RewardCmd::Score {
            data,
            completions,
            weights,
            dedup_mode,
            detail,
            out,
        }) => {
            let mut w = ctx.cfg.reward;
            if let Some(m) = dedup_mode {
                w.dedup_mode = m.parse().map_err(CliError::Invalid)?;
            }
            if let Some(spec) = weights {
                apply_weight_overrides(&mut w, &spec)?;
            }
            w.validate().map_err(CliError::Invalid)?;
            reward_score(&ctx, &data, &completions, &w, detail, out.as_deref())
        }
        Command::Eval(EvalCmd::Map {
            data,
            completions,
            rare_from_train,
            rare_list,
            score_mode,
            out,
        }) => {
            let mode = match score_mode {
                Some(s) => s.parse().map_err(CliError::Invalid)?,
                None => ctx.cfg.eval.score_mode,
            };
            let rare = RareSource::from_args(rare_from_train.as_deref(), rare_list.as_deref());
            eval_map(&ctx, &data, &completions, rare, mode, out.as_deref())
        }
        Command::Simulate(args) => {
            let noise = match args.noise {
                Some(level) => NoiseProfile::at_level(level, ctx.cfg.noise.seed),
                None => ctx.cfg.noise,
            };
            noise.validate().map_err(CliError::Invalid)?;
            simulate(&ctx, &args.data, &noise, args.samples, args.out.as_deref())
        }
        Command::Grpo(GrpoCmd::Advantages {
            input,
            group_size,
            out,
        }) => grpo_advantages(&ctx, &input, group_size, out.as_deref()),
        Command::Sft(SftCmd::Assemble { data, traces, out }) => {
            sft_assemble(&ctx, &data, &traces, out.as_deref())
        }
        Command::Sft(SftCmd::FetchTraces { data, out }) => sft_fetch(&ctx, &data, &out),
        Command::Dataset(DatasetCmd::Import { data, split, out }) => {
            let split: Split = split.parse().map_err(CliError::Invalid)?;
            dataset_import(&ctx, &data, split, &out)
        }
        Command::Dataset(DatasetCmd::Rare { data, out }) => {
            dataset_rare(&ctx, &data, out.as_deref())
        }
    }
}

fn load_dataset(ctx: &Ctx, data: &DatasetArg, split: Split) -> Result<Dataset, CliError> {
    let path = data
        .dataset
        .as_ref()
        .or(ctx.cfg.paths.dataset.as_ref())
        .ok_or_else(|| CliError::Invalid("no dataset given (--dataset or paths.dataset)".into()))?;
    let format: AnnotationFormat = data.annotation_format.parse().map_err(CliError::Invalid)?;
    let (ds, report) = load_annotations(path, format, split, &ctx.vocab)?;
    for (idx, msg) in &report.malformed {
        log::warn!("{}: record {idx}: {msg}", path.display());
    }
    if !report.malformed.is_empty() {
        eprintln!(
            "{}: {} malformed record(s) skipped",
            path.display(),
            report.malformed.len()
        );
    }
    Ok(ds)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config types serialize")
}

fn prompts_build(ctx: &Ctx, data: &DatasetArg, out: Option<&Path>) -> Result<(), CliError> {
    let ds = load_dataset(ctx, data, Split::Test)?;
    let prompt = build_prompt(&ctx.vocab, &ctx.cfg.template);
    let mut o = Output::create(out)?;
    o.line(&meta(
        "prompts build",
        json!({"template": to_value(&ctx.cfg.template)}),
    ))?;
    for img in &ds.images {
        o.line(&json!({"image_id": img.image_id, "prompt": prompt}))?;
    }
    o.finish()?;
    eprintln!("prompts: {} images", ds.len());
    Ok(())
}

fn str_field<'a>(v: &'a Value, key: &str) -> Result<&'a str, String> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string field {key:?}"))
}

fn breakdown_record(v: &Value, b: &RewardBreakdown, detail: bool) -> Value {
    let mut r = json!({
        "image_id": v["image_id"],
        "r_tag": b.r_tag,
        "r_format": b.r_format,
        "r_lo": b.r_lo,
        "r_lv": b.r_lv,
        "r_iou": b.r_iou,
        "total": b.total,
        "n_pred": b.per_instance.len(),
        "n_duplicates": b.per_instance.iter().filter(|p| p.duplicate).count(),
    });
    if let Some(s) = v.get("sample_index") {
        r["sample_index"] = s.clone();
    }
    if detail {
        r["per_instance"] = to_value(&b.per_instance);
        r["matching"] = to_value(&b.matching);
    }
    r
}

fn score_line(
    ds: &Dataset,
    w: &RewardWeights,
    detail: bool,
    line: usize,
    v: &Value,
) -> Result<(Value, f64), Value> {
    let fail = |msg: String| json!({"line": line, "image_id": v.get("image_id").cloned().unwrap_or(Value::Null), "error": msg});
    let id = str_field(v, "image_id").map_err(fail)?;
    let text = str_field(v, "completion").map_err(fail)?;
    let gt = ds
        .get(id)
        .ok_or_else(|| fail(format!("unknown image_id {id:?}")))?;
    let b = score_sample(text, gt, &ds.vocab, w);
    Ok((breakdown_record(v, &b, detail), b.total))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn reward_score(
    ctx: &Ctx,
    data: &DatasetArg,
    completions: &Path,
    w: &RewardWeights,
    detail: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_dataset(ctx, data, Split::Test)?;
    let mut o = Output::create(out)?;
    let table = ctx.format == OutputFormat::Table;
    if table {
        o.text(&format!(
            "# {} {} reward score\n",
            crate::jsonl::TOOL,
            env!("CARGO_PKG_VERSION")
        ))?;
        o.text(&format!(
            "{:<28} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "image_id", "total", "format", "lo", "lv", "iou"
        ))?;
    } else {
        o.line(&meta(
            "reward score",
            json!({"reward": to_value(w), "detail": detail}),
        ))?;
    }

    let mut totals = Vec::new();
    let mut failures = 0usize;
    let mut lines = read_values(completions)?;
    loop {
        let chunk: Vec<(usize, Value)> = lines.by_ref().take(CHUNK).collect::<Result<_, _>>()?;
        if chunk.is_empty() {
            break;
        }
        let scored: Vec<Result<(Value, f64), Value>> = chunk
            .par_iter()
            .map(|(n, v)| score_line(&ds, w, detail, *n, v))
            .collect();
        for r in scored {
            match r {
                Ok((rec, total)) => {
                    totals.push(total);
                    if table {
                        o.text(&format!(
                            "{:<28} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}\n",
                            rec["image_id"].as_str().unwrap_or(""),
                            total,
                            rec["r_format"].as_f64().unwrap_or(0.0),
                            rec["r_lo"].as_f64().unwrap_or(0.0),
                            rec["r_lv"].as_f64().unwrap_or(0.0),
                            rec["r_iou"].as_f64().unwrap_or(0.0)
                        ))?;
                    } else {
                        o.line(&rec)?;
                    }
                }
                Err(rec) => {
                    failures += 1;
                    log::error!("{rec}");
                    if table {
                        o.text(&format!("# error: {rec}\n"))?;
                    } else {
                        o.line(&rec)?;
                    }
                }
            }
        }
    }
    o.finish()?;

    let n = totals.len();
    let mean = if n == 0 {
        0.0
    } else {
        totals.iter().sum::<f64>() / n as f64
    };
    let mut sorted = totals;
    sorted.sort_by(f64::total_cmp);
    eprintln!(
        "scored {n} completion(s), {failures} error(s); total mean {mean:.4} p10 {:.4} p50 {:.4} p90 {:.4}",
        percentile(&sorted, 0.1),
        percentile(&sorted, 0.5),
        percentile(&sorted, 0.9)
    );
    if failures > 0 {
        return Err(CliError::RecordFailures(failures));
    }
    Ok(())
}

enum RareSource<'a> {
    Reference,
    Train(&'a Path),
    List(&'a Path),
}

impl<'a> RareSource<'a> {
    fn from_args(train: Option<&'a Path>, list: Option<&'a Path>) -> Self {
        match (train, list) {
            (Some(t), _) => Self::Train(t),
            (None, Some(l)) => Self::List(l),
            (None, None) => Self::Reference,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Self::Reference => "reference",
            Self::Train(_) => "train",
            Self::List(_) => "list",
        }
    }
}

fn rare_set(ctx: &Ctx, src: &RareSource, data: &DatasetArg) -> Result<BTreeSet<usize>, CliError> {
    Ok(match src {
        RareSource::Reference => hico_reference_rare_set().into_iter().collect(),
        RareSource::Train(p) => {
            let arg = DatasetArg {
                dataset: Some(p.to_path_buf()),
                annotation_format: data.annotation_format.clone(),
            };
            derive_rare_categories(&load_dataset(ctx, &arg, Split::Train)?)
        }
        RareSource::List(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let ids: BTreeSet<usize> = serde_json::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
            if let Some(bad) = ids.iter().find(|&&c| c >= ctx.vocab.num_categories()) {
                return Err(CliError::Invalid(format!(
                    "{}: category {bad} out of range",
                    p.display()
                )));
            }
            ids
        }
    })
}

fn eval_map(
    ctx: &Ctx,
    data: &DatasetArg,
    completions: &Path,
    rare: RareSource,
    mode: ScoreMode,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_dataset(ctx, data, Split::Test)?;
    let rare_ids = rare_set(ctx, &rare, data)?;
    let mut records: Vec<(String, String)> = Vec::new();
    let mut seen = HashSet::new();
    let mut extra = 0usize;
    for item in read_values(completions)? {
        let (n, v) = item?;
        let id = str_field(&v, "image_id")
            .map_err(|m| CliError::Invalid(format!("{}:{n}: {m}", completions.display())))?;
        let text = str_field(&v, "completion")
            .map_err(|m| CliError::Invalid(format!("{}:{n}: {m}", completions.display())))?;
        if seen.insert(id.to_string()) {
            records.push((id.to_string(), text.to_string()));
        } else {
            extra += 1;
        }
    }
    if extra > 0 {
        log::warn!("{extra} additional completion(s) for already-seen images ignored");
    }
    let unknown: Vec<String> = records
        .iter()
        .filter(|(id, _)| ds.get(id).is_none())
        .map(|(id, _)| id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(hoid_core::Error::UnknownImages(unknown).into());
    }
    let preds = triplets_from_completions(
        records.iter().map(|(a, b)| (a.as_str(), b.as_str())),
        &ds.vocab,
        mode,
    );
    let table = evaluate(&preds, &ds, &rare_ids)?;

    let mut o = Output::create(out)?;
    match ctx.format {
        OutputFormat::Table => {
            o.text(&format!(
                "# {} {} eval map\n",
                crate::jsonl::TOOL,
                env!("CARGO_PKG_VERSION")
            ))?;
            o.text(&table.to_text_table())?;
        }
        OutputFormat::Jsonl => {
            let mut m = meta(
                "eval map",
                json!({"score_mode": mode, "rare_source": rare.label()}),
            );
            m["report"] = to_value(&table);
            let mut s =
                serde_json::to_string_pretty(&m).map_err(|e| CliError::Invalid(e.to_string()))?;
            s.push('\n');
            o.text(&s)?;
        }
    }
    o.finish()?;
    eprintln!(
        "evaluated {} image(s), {} triplet(s), {} categories with ground truth",
        records.len(),
        preds.len(),
        table.categories_evaluated.full
    );
    eprint!("{}", table.to_text_table());
    Ok(())
}

fn simulate(
    ctx: &Ctx,
    data: &DatasetArg,
    noise: &NoiseProfile,
    samples: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_dataset(ctx, data, Split::Test)?;
    let lines: Vec<Vec<Value>> = ds
        .images
        .par_iter()
        .map(|img| {
            (0..samples)
                .map(|s| json!({"image_id": img.image_id, "sample_index": s, "completion": simulate_policy(img, &ds.vocab, noise, s)}))
                .collect()
        })
        .collect();
    let mut o = Output::create(out)?;
    o.line(&meta(
        "simulate",
        json!({"noise": to_value(noise), "samples": samples}),
    ))?;
    for v in lines.iter().flatten() {
        o.line(v)?;
    }
    o.finish()?;
    eprintln!("simulated {} completion(s)", ds.len() as u64 * samples);
    Ok(())
}

fn grpo_advantages(
    ctx: &Ctx,
    input: &Path,
    group_size: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut o = Output::create(out)?;
    o.line(&meta(
        "grpo advantages",
        json!({"grpo": to_value(&ctx.cfg.grpo), "group_size": group_size}),
    ))?;
    let mut failures = 0usize;
    let mut groups = 0usize;
    for item in read_values(input)? {
        let (n, v) = item?;
        let gid = v.get("group_id").cloned().unwrap_or(Value::Null);
        let rewards: Result<Vec<f64>, String> = match v.get("rewards").and_then(Value::as_array) {
            Some(a) => a
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| format!("non-numeric reward {x}")))
                .collect(),
            None => Err("missing array field \"rewards\"".into()),
        };
        let result = rewards.and_then(|r| {
            if let Some(g) = group_size.filter(|&g| g != r.len()) {
                return Err(format!("group has {} rewards, expected {g}", r.len()));
            }
            group_advantages(&r).map_err(|e| e.to_string())
        });
        match result {
            Ok(a) => {
                groups += 1;
                o.line(&json!({"group_id": gid, "advantages": a}))?;
            }
            Err(msg) => {
                failures += 1;
                o.line(&json!({"line": n, "group_id": gid, "error": msg}))?;
            }
        }
    }
    o.finish()?;
    eprintln!("{groups} group(s), {failures} error(s)");
    if failures > 0 {
        return Err(CliError::RecordFailures(failures));
    }
    Ok(())
}

fn sft_assemble(
    ctx: &Ctx,
    data: &DatasetArg,
    traces: &Path,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_dataset(ctx, data, Split::Train)?;
    let t = read_traces(traces)?;
    let prompt = build_prompt(&ctx.vocab, &ctx.cfg.template);
    let (records, summary) = assemble_sft(&ds, &t, &prompt);
    let mut o = Output::create(out)?;
    o.line(&meta(
        "sft assemble",
        json!({"template": to_value(&ctx.cfg.template)}),
    ))?;
    for r in &records {
        o.line(r)?;
    }
    o.finish()?;
    eprintln!(
        "sft: {} record(s) written, {} image(s) without a trace",
        summary.written, summary.skipped
    );
    Ok(())
}

fn sft_fetch(ctx: &Ctx, data: &DatasetArg, out: &Path) -> Result<(), CliError> {
    let ds = load_dataset(ctx, data, Split::Train)?;
    if !out.exists() {
        let mut o = Output::create(Some(out))?;
        o.line(&meta(
            "sft fetch-traces",
            json!({"endpoint": to_value(&ctx.cfg.endpoint)}),
        ))?;
        o.finish()?;
    }
    let report = fetch_traces(&ds, &ctx.cfg.endpoint, out)?;
    eprintln!(
        "traces: {} fetched, {} already present, {} failed, {} request(s)",
        report.fetched,
        report.skipped_existing,
        report.failed.len(),
        report.attempts.len()
    );
    if !report.failed.is_empty() {
        return Err(CliError::RecordFailures(report.failed.len()));
    }
    Ok(())
}

fn dataset_import(ctx: &Ctx, data: &DatasetArg, split: Split, out: &Path) -> Result<(), CliError> {
    let ds = load_dataset(ctx, data, split)?;
    ds.save_canonical(out)?;
    eprintln!(
        "imported {} image(s), {} pair(s)",
        ds.len(),
        ds.pair_count()
    );
    Ok(())
}

fn dataset_rare(ctx: &Ctx, data: &DatasetArg, out: Option<&Path>) -> Result<(), CliError> {
    let ds = load_dataset(ctx, data, Split::Train)?;
    let rare: Vec<usize> = derive_rare_categories(&ds).into_iter().collect();
    let mut o = Output::create(out)?;
    o.line(&rare)?;
    o.finish()?;
    eprintln!(
        "{} rare categor(ies) of {}",
        rare.len(),
        ds.vocab.num_categories()
    );
    Ok(())
}
