//! One PASS/FAIL line per acceptance criterion, written straight to stdout
//! so it shows up without `--nocapture`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hoid_core::dataset::answer::instance_to_pair;
use hoid_core::dataset::simulate::{simulate_policy, NoiseProfile};
use hoid_core::dataset::{
    gt_to_answer, load_annotations, wrap_completion, AnnotationFormat, Dataset, GtImage, Split,
};
use hoid_core::eval::{evaluate, PredictionTriplet};
use hoid_core::hungarian::hungarian_match;
use hoid_core::parser::parse_completion;
use hoid_core::reward::{score_sample, RewardWeights};
use hoid_core::training::{
    clipped_surrogate, group_advantages, grpo_objective, GrpoParams, SampleLogProbs, TokenLogProbs,
};
use hoid_core::vocab::{display_label, hico_reference_rare_set};
use hoid_core::{BBox, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn load(name: &str, format: AnnotationFormat) -> Dataset {
    load_annotations(
        &fixtures().join(name),
        format,
        Split::Test,
        &Vocabulary::hico_det(),
    )
    .unwrap()
    .0
}

fn corpus() -> Vec<Dataset> {
    vec![
        load("mini_test.json", AnnotationFormat::Canonical),
        load("golden/test.json", AnnotationFormat::Canonical),
    ]
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn echo_text(img: &GtImage, v: &Vocabulary) -> String {
    wrap_completion(
        "I identify each human and the objects they interact with.",
        &gt_to_answer(img, v),
    )
}

// ---------------------------------------------------------------- matching

fn brute_force_min(c: &[Vec<f64>]) -> f64 {
    let n = c.len();
    let m = c[0].len();
    let mut best = f64::INFINITY;
    let mut stack: Vec<(usize, u32, f64)> = vec![(0, 0, 0.0)];
    while let Some((r, used, acc)) = stack.pop() {
        let (rows, cols) = if n <= m { (n, m) } else { (m, n) };
        if r == rows {
            best = best.min(acc);
            continue;
        }
        for k in (0..cols).filter(|k| used & (1 << k) == 0) {
            {
                let cost = if n <= m { c[r][k] } else { c[k][r] };
                stack.push((r + 1, used | (1 << k), acc + cost));
            }
        }
    }
    best
}

fn hungarian_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(1..=7);
        let m = rng.random_range(1..=7);
        let c: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        if case % 4 == 0 {
                            rng.random_range(0..3) as f64 / 2.0
                        } else {
                            rng.random_range(0.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let got = hungarian_match(&c).unwrap().total_cost;
        worst = worst.max((got - brute_force_min(&c)).abs());
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && t < Duration::from_secs(10),
        format!(
            "1000 matrices, max |diff| {worst:.1e} (tol 1e-9), {:.2}s (< 10s)",
            t.as_secs_f64()
        ),
    )
}

// ----------------------------------------------------------------- reward

fn echo_optimality() -> Outcome {
    let w = RewardWeights::default();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for ds in corpus()
        .iter()
        .chain([load("mini_train.json", AnnotationFormat::Canonical)].iter())
    {
        for img in &ds.images {
            let total = score_sample(&echo_text(img, &ds.vocab), img, &ds.vocab, &w).total;
            worst = worst.max((total - 3.8).abs());
            n += 1;
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{n} fixture images, max |total - 3.8| {worst:.1e} (tol 1e-9)"),
    )
}

fn adversarial_without_answer_tag(
    img: &GtImage,
    v: &Vocabulary,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let a = gt_to_answer(img, v);
    let t = "<think>reasoning</think>";
    let mut out = vec![
        a.clone(),
        format!("{t}\n{a}"),
        format!("{t}<Answer>{a}</Answer>"),
        format!("{t}<ANSWER>{a}</ANSWER>"),
        format!("{t}< answer>{a}</answer>"),
        format!("{t}<answer >{a}</answer>"),
        format!("{t}<answers>{a}</answers>"),
        format!("{t}answer>{a}</answer>"),
        format!("{t}<answe>{a}</answe>"),
        format!("{t}&lt;answer&gt;{a}&lt;/answer&gt;"),
        format!("{t}{a}</answer>"),
        format!("{t}<ans wer>{a}</ans wer>"),
        format!("{t}[answer]{a}[/answer]"),
        format!("{t}<answer\u{200b}>{a}</answer>"),
        format!("{t}\u{ff1c}answer\u{ff1e}{a}"),
        format!("{t}<\\answer>{a}"),
        format!("<think><answer</think>{a}"),
        format!("{t}\\u003canswer\\u003e{a}"),
        format!("{t}{a}<answer"),
        format!("{t}<a n s w e r>{a}"),
        format!("{t}```json\n{a}\n```"),
        format!("{t}</answer></answer>{a}"),
        format!("{t}<answer/>{a}"),
        String::new(),
    ];
    let bytes: Vec<u8> = (0..rng.random_range(0..200))
        .map(|_| rng.random())
        .collect();
    out.push(String::from_utf8_lossy(&bytes).replace("<answer>", ""));
    out
}

fn zero_gate() -> Outcome {
    let ds = load("mini_test.json", AnnotationFormat::Canonical);
    let w = RewardWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut cases = 0;
    let mut bad = 0;
    for img in &ds.images {
        for text in adversarial_without_answer_tag(img, &ds.vocab, &mut rng) {
            assert!(!text.contains("<answer>"));
            let r = score_sample(&text, img, &ds.vocab, &w);
            cases += 1;
            if [r.r_tag, r.r_format, r.r_lo, r.r_lv, r.r_iou, r.total] != [0.0; 6] {
                bad += 1;
            }
        }
    }
    outcome(
        cases == 500 && bad == 0,
        format!("{cases} cases, {bad} with a nonzero component"),
    )
}

type Fields = Vec<(String, String)>;

fn instance_fields(img: &GtImage, v: &Vocabulary) -> Vec<Fields> {
    img.pairs
        .iter()
        .map(|p| {
            let b = |x: BBox| {
                let r = x.rounded();
                format!("[{}, {}, {}, {}]", r[0], r[1], r[2], r[3])
            };
            let verbs: Vec<String> = p
                .verb_classes
                .iter()
                .map(|&id| format!("\"{}\"", display_label(v.verb_name(id))))
                .collect();
            vec![
                ("human".into(), b(p.human)),
                ("object".into(), b(p.object)),
                (
                    "object class".into(),
                    format!("\"{}\"", display_label(v.object_name(p.object_class))),
                ),
                ("verb class".into(), format!("[{}]", verbs.join(", "))),
            ]
        })
        .collect()
}

fn render(insts: &[Fields]) -> String {
    let objs: Vec<String> = insts
        .iter()
        .map(|f| {
            format!(
                "{{{}}}",
                f.iter()
                    .map(|(k, v)| format!("\"{k}\": {v}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        })
        .collect();
    wrap_completion("r", &format!("[{}]", objs.join(", ")))
}

fn anti_hacking() -> Outcome {
    let w = RewardWeights::default();
    let mut checked = [0usize; 3];
    let mut violations = 0;
    for ds in corpus() {
        let v = &ds.vocab;
        for img in &ds.images {
            let base_insts = instance_fields(img, v);
            let base = score_sample(&render(&base_insts), img, v, &w).total;
            let mut check = |insts: &[Fields], family: usize| {
                checked[family] += 1;
                if score_sample(&render(insts), img, v, &w).total > base + 1e-12 {
                    violations += 1;
                }
            };
            for i in 0..base_insts.len() {
                for at in 0..=base_insts.len() {
                    let mut insts = base_insts.clone();
                    insts.insert(at, base_insts[i].clone());
                    check(&insts, 0);
                }
                for k in 0..4 {
                    for pos in 0..=4 {
                        for alt in ["[0, 0, 1, 1]", "\"toaster\"", "[\"ride\"]", "null"] {
                            let mut insts = base_insts.clone();
                            insts[i].insert(pos, (base_insts[i][k].0.clone(), alt.to_string()));
                            check(&insts, 1);
                        }
                        let mut insts = base_insts.clone();
                        insts[i].insert(pos, base_insts[i][k].clone());
                        check(&insts, 1);
                    }
                }
            }
            let first = &img.pairs[0];
            let junk: Vec<Fields> = vec![
                vec![],
                vec![("confidence".into(), "1".into())],
                vec![
                    ("human".into(), "[1, 1, 3, 3]".into()),
                    ("object".into(), "[5, 5, 9, 9]".into()),
                    (
                        "object class".into(),
                        format!("\"{}\"", display_label(v.object_name(first.object_class))),
                    ),
                    (
                        "verb class".into(),
                        format!(
                            "[\"{}\"]",
                            display_label(v.verb_name(*first.verb_classes.iter().next().unwrap()))
                        ),
                    ),
                ],
                vec![
                    ("human".into(), "[1, 1, 3, 3]".into()),
                    ("object".into(), "[5, 5, 9, 9]".into()),
                    ("object class".into(), "\"unicorn\"".into()),
                    ("verb class".into(), "[\"levitate\", \"levitate\"]".into()),
                ],
                instance_fields(img, v)[0]
                    .clone()
                    .into_iter()
                    .chain([("extra".to_string(), "0".to_string())])
                    .collect(),
            ];
            for j in &junk {
                for n in 1..=3 {
                    let mut insts = base_insts.clone();
                    insts.extend(std::iter::repeat_n(j.clone(), n));
                    check(&insts, 2);
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!(
            "{} duplicated-instance, {} duplicated-key, {} junk-append cases; {violations} increased the total",
            checked[0], checked[1], checked[2]
        ),
    )
}

fn monotonicity() -> Outcome {
    let start = Instant::now();
    let ds = load("mini_test.json", AnnotationFormat::Canonical);
    let w = RewardWeights::default();
    let means: Vec<f64> = [0.05, 0.15, 0.30]
        .iter()
        .map(|&level| {
            let noise = NoiseProfile::at_level(level, 2025);
            let mut sum = 0.0;
            for img in &ds.images {
                for s in 0..10 {
                    sum += score_sample(
                        &simulate_policy(img, &ds.vocab, &noise, s),
                        img,
                        &ds.vocab,
                        &w,
                    )
                    .total;
                }
            }
            sum / 200.0
        })
        .collect();
    let t = start.elapsed();
    let strictly = means[0] > means[1] && means[1] > means[2];
    outcome(
        strictly && t < Duration::from_secs(30),
        format!(
            "means {:.4} > {:.4} > {:.4} over 200 samples each, {:.2}s (< 30s)",
            means[0],
            means[1],
            means[2],
            t.as_secs_f64()
        ),
    )
}

// --------------------------------------------------------------- training

fn advantage_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_mean: f64 = 0.0;
    let mut worst_std: f64 = 0.0;
    let mut worst_affine: f64 = 0.0;
    for _ in 0..10_000 {
        let r: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.8)).collect();
        let a = group_advantages(&r).unwrap();
        let mean = a.iter().sum::<f64>() / 4.0;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((std - 1.0).abs());
        let scale = rng.random_range(0.01..100.0);
        let shift = rng.random_range(-10.0..10.0);
        let b = group_advantages(&r.iter().map(|x| scale * x + shift).collect::<Vec<_>>()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            worst_affine = worst_affine.max((x - y).abs());
        }
    }
    let degenerate = [vec![1.5; 4], vec![0.0; 4], vec![3.8, 3.8, 3.8, 3.8 + 1e-12]]
        .iter()
        .all(|g| group_advantages(g).unwrap() == vec![0.0; 4]);
    outcome(
        worst_mean <= 1e-9 && worst_std <= 1e-9 && worst_affine <= 1e-12 && degenerate,
        format!(
            "10000 groups: max |mean| {worst_mean:.1e}, max |std-1| {worst_std:.1e} (tol 1e-9); affine max |diff| {worst_affine:.1e} (f64 rounding, tol 1e-12); degenerate -> zeros: {degenerate}"
        ),
    )
}

fn grpo_spot_values() -> Outcome {
    let lp = vec![-0.2, -1.1, -0.05];
    let adv = group_advantages(&[0.3, 1.9, 3.8, 2.2]).unwrap();
    let samples: Vec<SampleLogProbs> = adv
        .iter()
        .map(|_| SampleLogProbs {
            new: TokenLogProbs::dense(lp.clone()),
            old: TokenLogProbs::dense(lp.clone()),
            reference: TokenLogProbs::dense(lp.clone()),
        })
        .collect();
    let obj = grpo_objective(&samples, &adv, &GrpoParams::default()).unwrap();
    let expect = -adv.iter().sum::<f64>() / adv.len() as f64;
    let e1 = (obj - expect).abs();
    let e2 = (clipped_surrogate(0.5f64.exp(), 1.0, 0.2) - 1.2).abs();
    outcome(
        e1 <= 1e-12 && e2 <= 1e-12,
        format!("identity case |diff| {e1:.1e}, clip case |diff| {e2:.1e} (tol 1e-12)"),
    )
}

// ------------------------------------------------------------------- eval

fn hoid() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hoid"))
}

fn run_ok(cmd: &mut Command) -> Result<(), String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{:?} exited {:?}: {}",
            cmd,
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn six_cells(report: &Value) -> Vec<f64> {
    let r = &report["report"];
    ["default", "known_object"]
        .iter()
        .flat_map(|s| ["full", "rare", "non_rare"].map(|c| r[s][c].as_f64().unwrap_or(f64::NAN)))
        .collect()
}

fn map_golden() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let g = fixtures().join("golden");
    let out = dir.path().join("report.json");
    if let Err(e) = run_ok(
        hoid()
            .args(["eval", "map", "--dataset"])
            .arg(g.join("test.json"))
            .arg("--completions")
            .arg(g.join("completions.jsonl"))
            .arg("--rare-list")
            .arg(g.join("rare.json"))
            .arg("-o")
            .arg(&out),
    ) {
        return outcome(false, e);
    }
    let bytes_equal = std::fs::read(&out).unwrap() == std::fs::read(g.join("report.json")).unwrap();

    // Echo over the 20-image fixture with the published rare list.
    let ds = load("mini_test.json", AnnotationFormat::Canonical);
    let rare: BTreeSet<usize> = hico_reference_rare_set().into_iter().collect();
    let texts: Vec<(String, String)> = ds
        .images
        .iter()
        .map(|i| (i.image_id.clone(), echo_text(i, &ds.vocab)))
        .collect();
    let preds = hoid_core::eval::triplets_from_completions(
        texts.iter().map(|(a, b)| (a.as_str(), b.as_str())),
        &ds.vocab,
        Default::default(),
    );
    let t = evaluate(&preds, &ds, &rare).unwrap();
    let cells = [
        t.default.full,
        t.default.rare,
        t.default.non_rare,
        t.known_object.full,
        t.known_object.rare,
        t.known_object.non_rare,
    ];
    let echo_ok = cells.iter().all(|&c| c == 100.0);

    // Known Object >= Default per category on randomized predictions.
    let mut rng = ChaCha8Rng::seed_from_u64(609);
    let mut ko_checks = 0;
    let mut ko_violations = 0;
    for ds in corpus() {
        let all_cats: Vec<usize> = ds
            .images
            .iter()
            .flat_map(|i| i.triplets(&ds.vocab))
            .map(|(_, c)| c)
            .collect();
        for _ in 0..100 {
            let mut preds = Vec::new();
            for img in &ds.images {
                for _ in 0..rng.random_range(0..5) {
                    let (h, o) = match img.pairs.get(rng.random_range(0..img.pairs.len() + 1)) {
                        Some(p) => (
                            p.human.translate(rng.random_range(0.0..30.0), 0.0),
                            p.object.translate(0.0, rng.random_range(0.0..30.0)),
                        ),
                        None => (
                            BBox::new(0.0, 0.0, 50.0, 80.0),
                            BBox::new(30.0, 30.0, 90.0, 90.0),
                        ),
                    };
                    preds.push(PredictionTriplet {
                        image_id: img.image_id.clone(),
                        human: h,
                        object: o,
                        hoi_category: all_cats[rng.random_range(0..all_cats.len())],
                        score: rng.random_range(0.0..1.0),
                    });
                }
            }
            let t = evaluate(&preds, &ds, &rare).unwrap();
            for c in &t.per_category {
                ko_checks += 1;
                if c.ap_known_object < c.ap_default {
                    ko_violations += 1;
                }
            }
        }
    }
    outcome(
        bytes_equal && echo_ok && ko_violations == 0,
        format!(
            "golden report byte-identical: {bytes_equal}; echo cells {cells:?}; Known Object < Default in {ko_violations} of {ko_checks} category checks"
        ),
    )
}

// ------------------------------------------------------------- ingestion

fn ingestion_counts() -> Outcome {
    let raw = load("mini_test_hico.json", AnnotationFormat::HicoJson);
    let triplets: usize = raw
        .images
        .iter()
        .map(|i| i.triplets(&raw.vocab).len())
        .sum();
    let fixture_ok = raw.len() == 20 && raw.pair_count() == 26 && triplets == 34;
    let mut detail = format!(
        "mini set {} images / {} pairs / {} triplets (expect 20/26/34)",
        raw.len(),
        raw.pair_count(),
        triplets
    );
    let mut real_ok = true;
    match (
        std::env::var("HOID_HICO_TRAIN"),
        std::env::var("HOID_HICO_TEST"),
    ) {
        (Ok(tr), Ok(te)) => {
            let v = Vocabulary::hico_det();
            let n = |p: &str, s| {
                load_annotations(Path::new(p), AnnotationFormat::HicoJson, s, &v).map(|d| d.0.len())
            };
            let (a, b) = (n(&tr, Split::Train), n(&te, Split::Test));
            real_ok = matches!((&a, &b), (Ok(38_118), Ok(9_658)));
            detail.push_str(&format!(
                "; real train {a:?} (expect 38118), test {b:?} (expect 9658)"
            ));
        }
        _ => detail
            .push_str("; real HICO-DET check skipped (HOID_HICO_TRAIN / HOID_HICO_TEST unset)"),
    }
    outcome(fixture_ok && real_ok, detail)
}

// ----------------------------------------------------------------- parser

fn parser_round_trip() -> Outcome {
    let mut pairs = 0;
    let mut recovered = 0;
    for ds in corpus()
        .into_iter()
        .chain([load("mini_train.json", AnnotationFormat::Canonical)])
    {
        for img in &ds.images {
            let p = parse_completion(&echo_text(img, &ds.vocab));
            pairs += img.pairs.len();
            recovered += p
                .instances
                .iter()
                .zip(&img.pairs)
                .filter(|(i, g)| instance_to_pair(i, &ds.vocab).as_ref() == Some(*g))
                .count();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut failures = 0;
    for _ in 0..10_000 {
        let bytes: Vec<u8> = (0..rng.random_range(0..512))
            .map(|_| rng.random())
            .collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        if std::panic::catch_unwind(|| parse_completion(&text)).is_err() {
            failures += 1;
        }
    }
    outcome(
        recovered == pairs && failures == 0,
        format!("{recovered}/{pairs} pairs recovered exactly; fuzz 10000 random byte strings, {failures} failures"),
    )
}

// -------------------------------------------------------------------- cli

fn cli_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ds = fixtures().join("mini_test.json");
    let steps: Vec<Command> = {
        let mut prompts = hoid();
        prompts
            .args(["prompts", "build", "--dataset"])
            .arg(&ds)
            .arg("-o")
            .arg(d.join("prompts.jsonl"));
        let mut sim = hoid();
        sim.args(["simulate", "--noise", "0", "--seed", "7", "--dataset"])
            .arg(&ds)
            .arg("-o")
            .arg(d.join("sim.jsonl"));
        let mut score = hoid();
        score
            .args(["reward", "score", "--dataset"])
            .arg(&ds)
            .arg("--completions")
            .arg(d.join("sim.jsonl"))
            .arg("-o")
            .arg(d.join("rewards.jsonl"));
        let mut eval = hoid();
        eval.args(["eval", "map", "--dataset"])
            .arg(&ds)
            .arg("--completions")
            .arg(d.join("sim.jsonl"))
            .arg("-o")
            .arg(d.join("report.json"));
        vec![prompts, sim, score, eval]
    };
    for mut s in steps {
        if let Err(e) = run_ok(&mut s) {
            return outcome(false, e);
        }
    }
    let t = start.elapsed();
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    let cells = six_cells(&report);
    let rewards = std::fs::read_to_string(d.join("rewards.jsonl")).unwrap();
    let totals: Vec<f64> = rewards
        .lines()
        .filter(|l| !l.starts_with("{\"_meta\""))
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["total"]
                .as_f64()
                .unwrap()
        })
        .collect();
    let rewards_ok = totals.len() == 20 && totals.iter().all(|x| (x - 3.8).abs() < 1e-9);
    outcome(
        cells.iter().all(|&c| c == 100.0) && rewards_ok && t < Duration::from_secs(60),
        format!(
            "mAP cells {cells:?}; {} reward lines at 3.8: {rewards_ok}; {:.2}s (< 60s)",
            totals.len(),
            t.as_secs_f64()
        ),
    )
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: Vec<Criterion> = vec![
        ("hungarian oracle", hungarian_oracle),
        ("echo optimality", echo_optimality),
        ("zero gate", zero_gate),
        ("anti-hacking", anti_hacking),
        ("reward monotonicity", monotonicity),
        ("advantage invariants", advantage_invariants),
        ("grpo objective spot values", grpo_spot_values),
        ("map golden", map_golden),
        ("ingestion counts", ingestion_counts),
        ("parser round-trip", parser_round_trip),
        ("cli end-to-end", cli_end_to_end),
    ];
    let mut failed = Vec::new();
    let mut lines = String::from("\n");
    for (name, f) in criteria {
        let o = f();
        lines.push_str(&format!(
            "[{}] {name}: {}\n",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        ));
        if !o.pass {
            failed.push(name);
        }
    }
    let mut out = std::io::stdout();
    let _ = out.write_all(lines.as_bytes());
    let _ = out.flush();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
