//! Subcommand bodies: read settings, write the snapshot, run the library
//! pipeline, write result files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use log::info;
use quadfuse::biosignal::{aggregate_to_seconds, segment_nbp, NbpExample, NbpRecord, SensorStream, TemplateBank};
use quadfuse::curation::{
    apply_review, build_conflict_sets, build_mcq, parse_review, read_mcq_items, read_samples, synthesize_matched,
    write_mcq_items, write_samples, McqItem, MultimodalSample,
};
use quadfuse::evaluation::{
    ablation_csv, ablation_grid, eval_mcq, predictive_entropy, train_bio_baseline, uq_report, BioConfig, BioTrainConfig,
    Extraction, ModalityMask, UqConfig, UqGroup,
};
use quadfuse::model::{checkpoint, FusionConfig, FusionModel};
use quadfuse::synthetic::{fixture_stream, fusion_taxonomy, imu_task, FusionTask, FusionTaskConfig, StreamFixture, FUSION_LABELS};
use quadfuse::taxonomy::IntentTaxonomy;
use quadfuse::tensor::Mat;
use quadfuse::training::{self, mcq_examples, mcq_vocab, Stage1Example, StageConfig};
use serde_json::json;

use crate::failure::{input, CliResult};
use crate::io::{read_nbp, write_json, write_jsonl, write_train_report};
use crate::settings::{must_exist, Settings};

fn load_checkpoint(path: &std::path::Path) -> CliResult<FusionModel> {
    must_exist(path)?;
    Ok(checkpoint::load(path)?)
}

pub fn synth(s: &mut Settings) -> CliResult<()> {
    let subjects = s.get("synth.subjects", 3usize)?;
    let sessions = s.get("synth.sessions", 1usize)?;
    let seconds = s.get("synth.seconds", 240usize)?;
    let n_av = s.get("synth.n_av", 200usize)?;
    let n_ts = s.get("synth.n_ts", 200usize)?;
    let imu_per_class = s.get("synth.imu_per_class", 100usize)?;
    let imu_len = s.get("synth.imu_len", 5usize)?;
    let imu_noise = s.get("synth.imu_noise", 0.3f64)?;
    let model = FusionConfig::default();
    let video_channels = s.get("synth.video_channels", model.vision.channels)?;
    let mel_bins = s.get("synth.mel_bins", model.audio.mel_bins)?;
    s.finish()?;
    let seed = s.seed;

    fs::write(s.output("taxonomy.tsv"), fusion_taxonomy().serialize())?;
    let dir = s.output("streams");
    fs::create_dir_all(&dir)?;
    let fx = StreamFixture { seconds, ..StreamFixture::default() };
    for subj in 0..subjects {
        for sess in 0..sessions {
            let (sid, sess_id) = (format!("subj{subj}"), format!("sess{sess}"));
            let stream = fixture_stream(&sid, &sess_id, &FUSION_LABELS, &fx, seed);
            fs::write(dir.join(format!("{sid}_{sess_id}.txt")), stream.to_text())?;
        }
    }

    let (av, ts) = FusionTask::new(FusionTaskConfig { channels: video_channels, mel_bins, ..FusionTaskConfig::default() })
        .pools(n_av, n_ts, seed);
    write_samples(&s.output("av_pool.jsonl"), &av)?;
    write_samples(&s.output("ts_pool.jsonl"), &ts)?;

    let (windows, labels) = imu_task(imu_per_class, imu_len, imu_noise, seed);
    let records: Vec<NbpRecord> = windows
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (w, &c))| NbpRecord {
            window: (0..w.rows).map(|r| w.row(r).to_vec()).collect(),
            window_len_s: imu_len,
            horizon_s: 0,
            target: format!("class{c}"),
            query: String::new(),
            response: String::new(),
            subject_id: "imu".into(),
            session_id: "imu".into(),
            start_s: i as f64,
        })
        .collect();
    write_jsonl(&s.output("imu.jsonl"), &records)?;
    info!("synth: {} streams, {} AV, {} TS, {} IMU windows", subjects * sessions, av.len(), ts.len(), records.len());
    Ok(())
}

fn stream_files(dir: &std::path::Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(input(format!("{}: no stream files", dir.display())));
    }
    Ok(files)
}

pub fn prepare_ts(s: &mut Settings) -> CliResult<()> {
    let dir = s.existing_path("streams_dir")?;
    let window_lens = s.list("nbp.window_lens", &[5usize, 7, 10, 15])?;
    let horizons = s.list("nbp.horizons", &[1usize, 2, 3, 5])?;
    let stride = s.get("nbp.stride", 1usize)?;
    let bank = match s.optional_path("templates_path")? {
        Some(p) => {
            must_exist(&p)?;
            TemplateBank::load(&p)?
        }
        None => TemplateBank::default(),
    };
    let taxonomy = s.taxonomy()?;
    s.finish()?;

    let mut records = Vec::new();
    let mut per_label: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_window: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_stream: BTreeMap<String, usize> = BTreeMap::new();
    for file in stream_files(&dir)? {
        let raw = SensorStream::load(&file)?;
        let stream = if raw.second_level { raw } else { aggregate_to_seconds(&raw)? };
        let key = format!("{}/{}", stream.subject_id, stream.session_id);
        for &a in &window_lens {
            for &b in &horizons {
                for w in segment_nbp(&stream, a, b, stride, &taxonomy)? {
                    let ex = NbpExample::build(&w, &taxonomy, &bank, s.seed)?;
                    *per_label.entry(ex.target.name.clone()).or_default() += 1;
                    *per_window.entry(format!("A={a},B={b}")).or_default() += 1;
                    *per_stream.entry(key.clone()).or_default() += 1;
                    records.push(ex.to_record());
                }
            }
        }
    }
    write_jsonl(&s.output("nbp.jsonl"), &records)?;
    let stats = json!({
        "total": records.len(),
        "per_label": per_label,
        "per_window_horizon": per_window,
        "per_stream": per_stream,
    });
    write_json(&s.output("nbp_stats.json"), &stats)?;
    info!("prepare-ts: {} examples", records.len());
    Ok(())
}

fn mcq_all(samples: &[MultimodalSample], taxonomy: &IntentTaxonomy, seed: u64) -> CliResult<Vec<McqItem>> {
    Ok(samples.iter().map(|m| build_mcq(m, taxonomy, seed)).collect::<quadfuse::Result<Vec<_>>>()?)
}

pub fn prepare_bench(s: &mut Settings) -> CliResult<()> {
    let taxonomy = s.taxonomy()?;
    let av_path = s.existing_path("av_pool")?;
    let ts_path = s.existing_path("ts_pool")?;
    let review_path = s.optional_path("review_path")?;
    let n_conflict = s.get("conflict_n", 50usize)?;
    s.finish()?;
    let seed = s.seed;

    let av = read_samples(&av_path, &taxonomy)?;
    let ts = read_samples(&ts_path, &taxonomy)?;
    let (matched, report) = synthesize_matched(&av, &ts, seed);
    let reviewed = match &review_path {
        Some(p) => {
            must_exist(p)?;
            let entries = parse_review(&fs::read_to_string(p)?, p)?;
            apply_review(matched.clone(), &entries)?
        }
        None => matched.clone(),
    };
    let items = mcq_all(&reviewed, &taxonomy, seed)?;
    write_mcq_items(&s.output("bench.jsonl"), &items)?;
    let (congruent, conflict) = build_conflict_sets(&reviewed, &ts, n_conflict, seed)?;
    write_mcq_items(&s.output("congruent.jsonl"), &mcq_all(&congruent, &taxonomy, seed)?)?;
    write_mcq_items(&s.output("conflict.jsonl"), &mcq_all(&conflict, &taxonomy, seed)?)?;
    let manifest = json!({
        "av_pool": av.len(),
        "ts_pool": ts.len(),
        "matched": report.merged,
        "unmatched": report.skipped,
        "unmatched_ids": report.skipped_ids,
        "rejected": matched.len() - reviewed.len(),
        "retained": reviewed.len(),
        "funnel": format!("{}->{}", matched.len(), reviewed.len()),
        "benchmark": items.len(),
        "congruent": congruent.len(),
        "conflict": conflict.len(),
    });
    write_json(&s.output("manifest.json"), &manifest)?;
    info!("prepare-bench: {} matched, {} retained", matched.len(), reviewed.len());
    Ok(())
}

pub fn train_stage1(s: &mut Settings) -> CliResult<()> {
    let taxonomy = s.taxonomy()?;
    let data = s.existing_path("data")?;
    let model_cfg = s.with_flat(|f| FusionConfig::from_flat(f, &FusionConfig::default()), FusionConfig::render)?;
    let eval = s.eval_config()?;
    let seed = s.seed;
    let stage = s.with_flat(|f| StageConfig::from_flat(f, "stage1", &StageConfig::align(seed)), |c| c.render("stage1"))?;
    s.finish_as("resolved.stage1.conf")?;

    let names: Vec<&str> = taxonomy.labels().iter().map(|l| l.name.as_str()).collect();
    let model = FusionModel::init(model_cfg, mcq_vocab(&names, &eval.question), seed)?.with_ts_tokens(seed)?;
    let mut examples = Vec::new();
    for r in read_nbp(&data)? {
        examples.push(Stage1Example {
            id: format!("{}/{}/{}/{}/{}", r.subject_id, r.session_id, r.start_s, r.window_len_s, r.horizon_s),
            prompt_ids: model.vocab.encode(&r.query),
            ts: Mat::from_rows(&r.window),
            target: taxonomy.parse_label(&r.target)?.id,
        });
    }
    let mut outcome = training::train_stage1(model, &examples, taxonomy.len(), &stage, Some(&s.out))?;
    write_train_report(&s.out, "stage1", &mut outcome.report)?;
    info!("train stage 1: best epoch {}", outcome.report.best_epoch);
    Ok(())
}

pub fn train_stage2(s: &mut Settings) -> CliResult<()> {
    let taxonomy = s.taxonomy()?;
    let data = s.existing_path("data")?;
    let default_init = s.out.join("aligned").display().to_string();
    let init = PathBuf::from(s.get("init_checkpoint", default_init)?);
    let eval = s.eval_config()?;
    let full_fraction = s.get("augment.full_fraction", 0.5f64)?;
    let seed = s.seed;
    let stage =
        s.with_flat(|f| StageConfig::from_flat(f, "stage2", &StageConfig::specialize(seed)), |c| c.render("stage2"))?;
    s.finish_as("resolved.stage2.conf")?;

    if !init.exists() {
        return Err(input(format!("{}: no aligned checkpoint; run `train --stage 1` first", init.display())));
    }
    let model = load_checkpoint(&init)?;
    let items = read_mcq_items(&data, &taxonomy)?;
    let examples = mcq_examples(&items, &model.vocab, &eval, full_fraction, seed)?;
    let mut outcome = training::train_stage2(model, &examples, &stage, Some(&s.out))?;
    write_train_report(&s.out, "stage2", &mut outcome.report)?;
    info!("train stage 2: best epoch {}", outcome.report.best_epoch);
    Ok(())
}

pub fn eval(s: &mut Settings, mask: Option<&str>) -> CliResult<()> {
    if let Some(m) = mask {
        s.set("eval.mask", m);
    }
    let taxonomy = s.taxonomy()?;
    let ckpt = s.existing_path("checkpoint")?;
    let items_path = s.existing_path("items")?;
    let eval = s.eval_config()?;
    let mask = ModalityMask::parse(&s.get("eval.mask", ModalityMask::FULL.label())?)?;
    s.finish()?;

    let model = load_checkpoint(&ckpt)?;
    let items = read_mcq_items(&items_path, &taxonomy)?;
    let (accuracy, records) = eval_mcq(&model, &items, mask, &eval)?;
    write_jsonl(&s.output("eval.jsonl"), &records)?;
    let correct = records.iter().filter(|r| r.correct).count();
    let summary = json!({ "mask": mask.label(), "accuracy": accuracy, "correct": correct, "total": records.len() });
    write_json(&s.output("eval_summary.json"), &summary)?;
    info!("eval {mask}: accuracy {accuracy:.4}");
    Ok(())
}

pub fn ablate(s: &mut Settings) -> CliResult<()> {
    let taxonomy = s.taxonomy()?;
    let ckpt = s.existing_path("checkpoint")?;
    let items_path = s.existing_path("items")?;
    let eval = s.eval_config()?;
    s.finish()?;

    let model = load_checkpoint(&ckpt)?;
    let items = read_mcq_items(&items_path, &taxonomy)?;
    let rows = ablation_grid(&model, &items, &eval)?;
    fs::write(s.output("ablation.csv"), ablation_csv(&rows))?;
    write_jsonl(&s.output("ablation.jsonl"), &rows)?;
    let records: Vec<serde_json::Value> = rows
        .iter()
        .flat_map(|r| r.records.iter().map(move |e| json!({ "mask": r.modalities, "record": e })))
        .collect();
    write_jsonl(&s.output("ablation_records.jsonl"), &records)?;
    for r in &rows {
        info!("ablate {}: {:.4}", r.modalities, r.accuracy);
    }
    Ok(())
}

pub fn uq(s: &mut Settings) -> CliResult<()> {
    let taxonomy = s.taxonomy()?;
    let ckpt = s.existing_path("checkpoint")?;
    let congruent_path = s.existing_path("congruent")?;
    let conflict_path = s.existing_path("conflict")?;
    let eval = s.eval_config()?;
    let defaults = UqConfig::default();
    let draws = s.get("uq.draws", defaults.draws)?;
    let temperature = s.get("uq.temperature", defaults.temperature)?;
    let extraction = match s.get("uq.extraction", "letter".to_string())?.as_str() {
        "letter" => Extraction::Letter,
        "class" => Extraction::ClassName(taxonomy.clone()),
        other => return Err(input(format!("uq.extraction: expected `letter` or `class`, got `{other}`"))),
    };
    s.finish()?;
    let cfg = UqConfig { draws, temperature, extraction };

    let model = load_checkpoint(&ckpt)?;
    let mut groups = Vec::new();
    for (path, group) in [(&congruent_path, UqGroup::Congruent), (&conflict_path, UqGroup::Conflict)] {
        let items = read_mcq_items(path, &taxonomy)?;
        let recs = items
            .iter()
            .map(|it| predictive_entropy(&model, it, group, &eval, &cfg, s.seed))
            .collect::<quadfuse::Result<Vec<_>>>()?;
        groups.push(recs);
    }
    let summary = uq_report(&groups[0], &groups[1])?;
    let all: Vec<_> = groups.concat();
    write_jsonl(&s.output("entropy.jsonl"), &all)?;
    let mut csv = String::from("item_id,group,entropy_bits\n");
    for r in &all {
        let _ = writeln!(csv, "{},{},{}", r.item_id, r.group, r.entropy_bits);
    }
    fs::write(s.output("entropy.csv"), csv)?;
    let table = format!(
        "group,mean_bits,mean_nats,n\ncongruent,{},{},{}\nconflict,{},{},{}\n",
        summary.congruent_mean_bits,
        summary.congruent_mean_nats,
        summary.n_congruent,
        summary.conflict_mean_bits,
        summary.conflict_mean_nats,
        summary.n_conflict
    );
    fs::write(s.output("uq_summary.csv"), table)?;
    write_json(&s.output("uq_summary.json"), &summary)?;
    info!("uq: difference {:.4} bits, separation {:.3}", summary.difference_bits, summary.separation);
    Ok(())
}

pub fn baseline_bio(s: &mut Settings) -> CliResult<()> {
    let data = s.existing_path("data")?;
    let window_len = s.get("bio.window_len", 0usize)?;
    let d = BioConfig::default();
    let conv1_channels = s.get("bio.conv1_channels", d.conv1_channels)?;
    let conv2_channels = s.get("bio.conv2_channels", d.conv2_channels)?;
    let kernel = s.get("bio.kernel", d.kernel)?;
    let pool = s.get("bio.pool", d.pool)?;
    let dropout = s.get("bio.dropout", d.dropout)?;
    let lstm_hidden = s.get("bio.lstm_hidden", d.lstm_hidden)?;
    let fc_hidden = s.get("bio.fc_hidden", d.fc_hidden)?;
    let t = BioTrainConfig::default();
    let learning_rate = s.get("bio.learning_rate", t.learning_rate)?;
    let batch_size = s.get("bio.batch_size", t.batch_size)?;
    let max_epochs = s.get("bio.max_epochs", t.max_epochs)?;
    let patience = s.get("bio.patience", t.patience)?;
    let fractions = s.list("bio.fractions", &t.fractions)?;
    s.finish()?;
    let fractions: [f64; 3] =
        fractions.try_into().map_err(|_| input("bio.fractions: expected three comma-separated values"))?;

    let records: Vec<NbpRecord> =
        read_nbp(&data)?.into_iter().filter(|r| window_len == 0 || r.window_len_s == window_len).collect();
    if records.is_empty() {
        return Err(input(format!("{}: no windows of the requested length", data.display())));
    }
    let classes: Vec<String> = records.iter().map(|r| r.target.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut windows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for r in &records {
        windows.push(r.to_window()?.values);
        labels.push(classes.binary_search(&r.target).expect("class collected above"));
    }
    let (rows, cols) = (windows[0].rows, windows[0].cols);
    if windows.iter().any(|w| (w.rows, w.cols) != (rows, cols)) {
        return Err(input("windows differ in shape; set bio.window_len"));
    }
    let cfg = BioConfig {
        in_steps: rows,
        in_channels: cols,
        n_classes: classes.len(),
        conv1_channels,
        conv2_channels,
        kernel,
        pool,
        dropout,
        lstm_hidden,
        fc_hidden,
        ..d
    };
    let tcfg = BioTrainConfig { learning_rate, batch_size, max_epochs, patience, fractions, seed: s.seed };
    let (_, report, _) = train_bio_baseline(&windows, &labels, &cfg, &tcfg)?;

    let mut epochs = String::from("epoch,train_loss,val_accuracy\n");
    for e in &report.epochs {
        let _ = writeln!(epochs, "{},{},{}", e.epoch, e.train_loss, e.val_accuracy);
    }
    fs::write(s.output("bio_epochs.csv"), epochs)?;
    let mut preds = String::from("index,label,predicted\n");
    for (&i, &p) in report.test_indices.iter().zip(&report.test_predictions) {
        let _ = writeln!(preds, "{i},{},{}", classes[labels[i]], classes[p]);
    }
    fs::write(s.output("bio_predictions.csv"), preds)?;
    write_json(&s.output("bio_report.json"), &json!({ "classes": classes, "report": report }))?;
    info!("baseline-bio: test accuracy {:.4}", report.test_accuracy);
    Ok(())
}
