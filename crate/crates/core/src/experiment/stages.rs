use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::ExperimentConfig;
use super::plot;
use super::store::{is_complete, open_stage, StageKey, StageWriter};
use crate::baselines::{train_ablation, train_gru, AblationSpec};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::eval::{comparison_table, mse_r2_traces, suppression_stats, EvalReport, RunRecord, SuppressionStats};
use crate::koopman::{predict_receding, train_with_terms, ActiveTerms, KoopmanModel};
use crate::mpc::{closed_loop, uncontrolled, ControlLog, ControlSummary};
use crate::neural_mass::{generate_trace, SimTrace};

/// Result of running one stage.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub dir: PathBuf,
    /// The stage had already completed with identical inputs.
    pub reused: bool,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub summary: ControlSummary,
    pub suppression: SuppressionStats,
    pub onset_time: f64,
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(v)?)
}

fn trace_bytes(t: &SimTrace) -> Result<(Vec<u8>, Vec<u8>)> {
    Ok((t.to_csv_string().into_bytes(), pretty(&t.meta())?))
}

fn write_trace(w: &mut StageWriter, name: &str, t: &SimTrace) -> Result<()> {
    let (csv, meta) = trace_bytes(t)?;
    w.write(name, &csv)?;
    w.write(&format!("{name}.meta.json"), &meta)
}

fn reused(stage: &'static str, dir: PathBuf) -> StageOutcome {
    info!("{stage}: inputs unchanged, reusing {}", dir.display());
    StageOutcome { stage, dir, reused: true, summary: "up to date".into() }
}

/// Koopman settings that affect training; the prediction-time re-fit
/// settings are hashed by the predict stage instead.
fn training_inputs(cfg: &ExperimentConfig, seed: u64) -> Result<serde_json::Value> {
    let mut k = to_json(&cfg.koopman_for_seed(seed))?;
    if let Some(map) = k.as_object_mut() {
        map.remove("refit_period");
        map.remove("refit_history");
    }
    Ok(json!({ "koopman": k, "gru": cfg.gru_for_seed(seed), "data": cfg.data }))
}

pub fn simulate_key(cfg: &ExperimentConfig) -> Result<StageKey> {
    let sim = cfg.simulation(cfg.data_duration())?;
    StageKey::new("simulate", 0, &[], to_json(&sim)?)
}

pub fn train_key(cfg: &ExperimentConfig) -> Result<StageKey> {
    let up = simulate_key(cfg)?;
    StageKey::new("train", cfg.seed, &[("simulate", &up.hash)], training_inputs(cfg, cfg.seed)?)
}

pub fn predict_key(cfg: &ExperimentConfig) -> Result<StageKey> {
    let up = train_key(cfg)?;
    let inputs = json!({ "refit_period": cfg.koopman.refit_period, "refit_history": cfg.koopman.refit_history });
    StageKey::new("predict", cfg.seed, &[("train", &up.hash)], inputs)
}

pub fn control_key(cfg: &ExperimentConfig) -> Result<StageKey> {
    let up = train_key(cfg)?;
    let inputs = json!({ "mpc": cfg.mpc, "simulation": cfg.simulation(cfg.control_duration)?, "window": cfg.evaluation.suppression_window });
    StageKey::new("control", cfg.seed, &[("train", &up.hash)], inputs)
}

/// The evaluate stage folds in control results when they exist.
pub fn evaluate_key(cfg: &ExperimentConfig) -> Result<StageKey> {
    let predict = predict_key(cfg)?;
    let control = control_key(cfg)?;
    let mut up = vec![("predict", predict.hash.as_str())];
    if is_complete(&control, &cfg.out) {
        up.push(("control", control.hash.as_str()));
    }
    StageKey::new("evaluate", cfg.seed, &up, to_json(&cfg.evaluation)?)
}

pub fn ablate_key(cfg: &ExperimentConfig) -> Result<StageKey> {
    let up = simulate_key(cfg)?;
    let inputs = json!({
        "training": training_inputs(cfg, 0)?,
        "refit_period": cfg.koopman.refit_period,
        "refit_history": cfg.koopman.refit_history,
        "ablation": cfg.ablation,
    });
    StageKey::new("ablate", cfg.seed, &[("simulate", &up.hash)], inputs)
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let key = simulate_key(cfg)?;
    if is_complete(&key, &cfg.out) {
        return Ok(reused("simulate", key.dir(&cfg.out)));
    }
    let trace = generate_trace(&cfg.simulation(cfg.data_duration())?, None)?;
    let mut w = StageWriter::new(key, &cfg.out)?;
    write_trace(&mut w, "trace.csv", &trace)?;
    let ptp = crate::neural_mass::peak_to_peak(&trace);
    let summary = format!("{} samples x {} channels, peak-to-peak {:?} mV", trace.len(), trace.n_channels(), ptp);
    w.write("summary.json", &pretty(&json!({ "samples": trace.len(), "peak_to_peak_mv": ptp }))?)?;
    Ok(StageOutcome { stage: "simulate", dir: w.finish()?, reused: false, summary })
}

fn load_trace(dir: &Path, name: &str) -> Result<SimTrace> {
    SimTrace::load(&dir.join(name))
}

fn training_split(cfg: &ExperimentConfig, trace: &SimTrace) -> Result<(SimTrace, usize)> {
    let (train, test) = cfg.split_samples();
    if trace.len() < train + test {
        return Err(Error::TraceTooShort { needed: train + test, available: trace.len() });
    }
    Ok((trace.slice(0, train), train))
}

pub fn run_train(cfg: &ExperimentConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let key = train_key(cfg)?;
    if is_complete(&key, &cfg.out) {
        return Ok(reused("train", key.dir(&cfg.out)));
    }
    let sim_dir = open_stage(&simulate_key(cfg)?, &cfg.out)?;
    let trace = load_trace(&sim_dir, "trace.csv")?;
    let (train, _) = training_split(cfg, &trace)?;
    info!("train: koopman on {} samples", train.len());
    let (koopman, history) = train_with_terms(&train, cfg.koopman_for_seed(cfg.seed), ActiveTerms::ALL)?;
    info!("train: gru on {} samples", train.len());
    let (gru, gru_losses) = train_gru(&train, cfg.gru_for_seed(cfg.seed))?;
    let mut w = StageWriter::new(key, &cfg.out)?;
    w.write("koopman.json", Checkpoint::koopman(&koopman).to_json()?.as_bytes())?;
    w.write("gru.json", Checkpoint::gru(&gru).to_json()?.as_bytes())?;
    w.write("history.json", &pretty(&json!({ "koopman": history, "gru": gru_losses }))?)?;
    let summary = format!(
        "koopman loss {:.4} -> {:.4}, gru loss {:.4} -> {:.4}",
        history.first().map_or(f64::NAN, |l| l.total),
        history.last().map_or(f64::NAN, |l| l.total),
        gru_losses.first().copied().unwrap_or(f64::NAN),
        gru_losses.last().copied().unwrap_or(f64::NAN),
    );
    Ok(StageOutcome { stage: "train", dir: w.finish()?, reused: false, summary })
}

/// First scored sample of the held-out segment: both models need a full
/// history window before it.
fn held_out_start(cfg: &ExperimentConfig) -> usize {
    let (train, _) = cfg.split_samples();
    train + cfg.koopman.window.max(cfg.gru.lookback())
}

fn koopman_prediction(cfg: &ExperimentConfig, model: &KoopmanModel, trace: &SimTrace) -> Result<SimTrace> {
    let (train, test) = cfg.split_samples();
    let start = held_out_start(cfg);
    predict_receding(model, trace, start, train + test - start, cfg.koopman.refit_period, cfg.koopman.refit_history)
}

fn truth_segment(cfg: &ExperimentConfig, trace: &SimTrace) -> SimTrace {
    let (train, test) = cfg.split_samples();
    let mut t = trace.slice(held_out_start(cfg), train + test);
    t.input = None;
    t
}

pub fn run_predict(cfg: &ExperimentConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let key = predict_key(cfg)?;
    if is_complete(&key, &cfg.out) {
        return Ok(reused("predict", key.dir(&cfg.out)));
    }
    let sim_dir = open_stage(&simulate_key(cfg)?, &cfg.out)?;
    let train_dir = open_stage(&train_key(cfg)?, &cfg.out)?;
    let trace = load_trace(&sim_dir, "trace.csv")?;
    training_split(cfg, &trace)?;
    let koopman = Checkpoint::load(&train_dir.join("koopman.json"))?.into_koopman()?;
    let gru = Checkpoint::load(&train_dir.join("gru.json"))?.into_gru()?;
    let truth = truth_segment(cfg, &trace);
    let kp = koopman_prediction(cfg, &koopman, &trace)?;
    let gp = gru.predict_segments(&trace, held_out_start(cfg), truth.len())?;
    let k_fit = mse_r2_traces(&truth, &kp)?;
    let g_fit = mse_r2_traces(&truth, &gp)?;
    let mut w = StageWriter::new(key, &cfg.out)?;
    write_trace(&mut w, "truth.csv", &truth)?;
    write_trace(&mut w, "koopman.csv", &kp)?;
    write_trace(&mut w, "gru.csv", &gp)?;
    let summary = format!(
        "koopman mse {:.4} r2 {:.4}; gru mse {:.4} r2 {:.4}",
        k_fit.total.mse,
        k_fit.total.r2.unwrap_or(f64::NAN),
        g_fit.total.mse,
        g_fit.total.r2.unwrap_or(f64::NAN)
    );
    Ok(StageOutcome { stage: "predict", dir: w.finish()?, reused: false, summary })
}

pub fn run_control(cfg: &ExperimentConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let key = control_key(cfg)?;
    if is_complete(&key, &cfg.out) {
        return Ok(reused("control", key.dir(&cfg.out)));
    }
    let train_dir = open_stage(&train_key(cfg)?, &cfg.out)?;
    let model = Checkpoint::load(&train_dir.join("koopman.json"))?.into_koopman()?;
    let sim = cfg.simulation(cfg.control_duration)?;
    let run = closed_loop(&sim, &model, &cfg.mpc)?;
    let free = uncontrolled(&sim)?;
    let suppression = suppression_stats(&free, &run.controlled, cfg.evaluation.suppression_window)?;
    let mut summary = run.log.summary(&cfg.mpc);
    if !cfg.mpc.record_timing {
        summary.mean_solve_time_s = 0.0;
    }
    let report = ControlReport { summary, suppression, onset_time: cfg.mpc.start_time };
    let mut w = StageWriter::new(key, &cfg.out)?;
    w.write("control_log.csv", run.log.to_csv_string(cfg.mpc.record_timing)?.as_bytes())?;
    w.write("control_log.json", &serde_json::to_vec(&timing_free(&run.log, cfg.mpc.record_timing))?)?;
    write_trace(&mut w, "controlled.csv", &run.controlled)?;
    write_trace(&mut w, "uncontrolled.csv", &free)?;
    w.write("model.json", Checkpoint::koopman(&run.model).to_json()?.as_bytes())?;
    w.write("summary.json", &pretty(&report)?)?;
    let text = format!(
        "suppression ratio {:?}, bound violations {}, degraded solves {}",
        report.suppression.channels.iter().map(|c| c.ratio).collect::<Vec<_>>(),
        report.summary.bound_violations,
        report.summary.degraded_steps
    );
    Ok(StageOutcome { stage: "control", dir: w.finish()?, reused: false, summary: text })
}

fn timing_free(log: &ControlLog, keep: bool) -> ControlLog {
    let mut log = log.clone();
    if !keep {
        log.qp_time_s.iter_mut().for_each(|t| *t = 0.0);
    }
    log
}

pub fn run_evaluate(cfg: &ExperimentConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let key = evaluate_key(cfg)?;
    let outcome = if is_complete(&key, &cfg.out) {
        reused("evaluate", key.dir(&cfg.out))
    } else {
        let pk = predict_key(cfg)?;
        let pdir = open_stage(&pk, &cfg.out)?;
        let truth = load_trace(&pdir, "truth.csv")?;
        let case = cfg.case.name();
        let mut koopman =
            EvalReport::prediction(case, "koopman", cfg.seed, &pk.hash, &truth, &load_trace(&pdir, "koopman.csv")?, &cfg.evaluation)?;
        let gru = EvalReport::prediction(case, "gru", cfg.seed, &pk.hash, &truth, &load_trace(&pdir, "gru.csv")?, &cfg.evaluation)?;
        if key.upstream.contains_key("control") {
            let cdir = open_stage(&control_key(cfg)?, &cfg.out)?;
            koopman = koopman.with_suppression(
                &load_trace(&cdir, "uncontrolled.csv")?,
                &load_trace(&cdir, "controlled.csv")?,
                &cfg.evaluation,
            )?;
        }
        let records: Vec<RunRecord> = [&koopman, &gru]
            .iter()
            .map(|r| Ok(RunRecord { case: r.case.clone(), model: r.model.clone(), seed: r.seed, mse: r.fit.mse, r2: r.fit.r2()? }))
            .collect::<Result<_>>()?;
        let table = comparison_table(&records)?;
        let mut w = StageWriter::new(key, &cfg.out)?;
        w.write("report_koopman.json", koopman.to_json()?.as_bytes())?;
        w.write("report_gru.json", gru.to_json()?.as_bytes())?;
        w.write("table.csv", table.to_csv_string()?.as_bytes())?;
        w.write("table.txt", table.to_text().as_bytes())?;
        let band: Vec<f64> = koopman.spectra.iter().map(|s| s.band_error).collect();
        let summary = format!("\n{}koopman band-limited PSD error {band:?}", table.to_text());
        StageOutcome { stage: "evaluate", dir: w.finish()?, reused: false, summary }
    };
    if cfg.plots {
        run_plot(cfg)?;
    }
    Ok(outcome)
}

fn record_path(dir: &Path, model: &str, seed: u64) -> PathBuf {
    dir.join("runs").join(format!("{}-{seed}.json", model.replace(' ', "_")))
}

/// Trains every configured variant (and the GRU) for each seed, scoring on
/// the held-out segment. Finished runs are kept on disk so an interrupted
/// sweep resumes where it stopped.
pub fn run_ablate(cfg: &ExperimentConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let key = ablate_key(cfg)?;
    if is_complete(&key, &cfg.out) {
        return Ok(reused("ablate", key.dir(&cfg.out)));
    }
    let sim_dir = open_stage(&simulate_key(cfg)?, &cfg.out)?;
    let trace = load_trace(&sim_dir, "trace.csv")?;
    let (train, _) = training_split(cfg, &trace)?;
    let truth = truth_segment(cfg, &trace);
    let mut w = StageWriter::new(key, &cfg.out)?;
    let case = cfg.case.name();
    let mut models: Vec<Option<AblationSpec>> = cfg.ablation.variants.iter().copied().map(Some).collect();
    if cfg.ablation.include_gru {
        models.push(None);
    }
    let mut records = Vec::new();
    for offset in 0..cfg.ablation.seeds as u64 {
        let seed = cfg.seed + offset;
        for spec in &models {
            let label = spec.map_or("gru", AblationSpec::label);
            let path = record_path(w.dir(), label, seed);
            let record = match std::fs::read(&path).ok().and_then(|b| serde_json::from_slice::<RunRecord>(&b).ok()) {
                Some(r) => r,
                None => {
                    info!("ablate: {label}, seed {seed}");
                    let prediction = match spec {
                        Some(s) => {
                            let (m, _) = train_ablation(&train, cfg.koopman_for_seed(seed), *s)?;
                            koopman_prediction(cfg, &m, &trace)?
                        }
                        None => {
                            let (g, _) = train_gru(&train, cfg.gru_for_seed(seed))?;
                            g.predict_segments(&trace, held_out_start(cfg), truth.len())?
                        }
                    };
                    let fit = mse_r2_traces(&truth, &prediction)?;
                    let r = RunRecord { case: case.into(), model: label.into(), seed, mse: fit.total.mse, r2: fit.total.r2()? };
                    crate::io::write_atomic(&path, &pretty(&r)?)?;
                    r
                }
            };
            records.push(record);
        }
    }
    for r in &records {
        let name = record_path(Path::new(""), &r.model, r.seed);
        w.adopt(&name.to_string_lossy())?;
    }
    let table = comparison_table(&records)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    for r in &records {
        csv.serialize(r)?;
    }
    w.write("runs.csv", &csv.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
    w.write("table.csv", table.to_csv_string()?.as_bytes())?;
    w.write("table.txt", table.to_text().as_bytes())?;
    w.write("table.json", &pretty(&table)?)?;
    let summary = format!("\n{}", table.to_text());
    Ok(StageOutcome { stage: "ablate", dir: w.finish()?, reused: false, summary })
}

/// Renders figures for every completed upstream stage of this config.
pub fn run_plot(cfg: &ExperimentConfig) -> Result<StageOutcome> {
    cfg.validate()?;
    let sim = simulate_key(cfg)?;
    let sim_dir = open_stage(&sim, &cfg.out)?;
    let predict = predict_key(cfg)?;
    let control = control_key(cfg)?;
    let evaluate = evaluate_key(cfg)?;
    let mut up = vec![("simulate", sim.hash.as_str())];
    for k in [&predict, &control, &evaluate] {
        if is_complete(k, &cfg.out) {
            up.push((k.stage, k.hash.as_str()));
        }
    }
    let key = StageKey::new("plot", cfg.seed, &up, json!({ "max_hz": cfg.plant.sample_rate / 2.0 }))?;
    if is_complete(&key, &cfg.out) {
        return Ok(reused("plot", key.dir(&cfg.out)));
    }
    let has = |stage: &str| key.upstream.contains_key(stage);
    let mut w = StageWriter::new(key.clone(), &cfg.out)?;
    let trace = load_trace(&sim_dir, "trace.csv")?;
    let first = trace.slice(0, (10.0 * trace.sample_rate) as usize);
    w.write("trace.svg", plot::trace_figure(&first, &format!("{} column, first 10 s", cfg.case.name()))?.as_bytes())?;
    let mut written = vec!["trace.svg"];
    if has("predict") {
        let pdir = open_stage(&predict, &cfg.out)?;
        let truth = load_trace(&pdir, "truth.csv")?;
        let kp = load_trace(&pdir, "koopman.csv")?;
        let gp = load_trace(&pdir, "gru.csv")?;
        w.write("prediction.svg", plot::prediction_figure(&truth, &[("koopman", &kp), ("gru", &gp)])?.as_bytes())?;
        written.push("prediction.svg");
    }
    if has("evaluate") {
        let edir = open_stage(&evaluate, &cfg.out)?;
        let k = EvalReport::from_json(&std::fs::read_to_string(edir.join("report_koopman.json"))?)?;
        let g = EvalReport::from_json(&std::fs::read_to_string(edir.join("report_gru.json"))?)?;
        let groups: Vec<Vec<(&str, &crate::eval::Psd)>> = k
            .spectra
            .iter()
            .zip(&g.spectra)
            .map(|(a, b)| vec![("truth", &a.truth), ("koopman", &a.prediction), ("gru", &b.prediction)])
            .collect();
        w.write("psd.svg", plot::psd_figure(&groups, cfg.plant.sample_rate / 2.0)?.as_bytes())?;
        written.push("psd.svg");
    }
    if has("control") {
        let cdir = open_stage(&control, &cfg.out)?;
        let log: ControlLog = serde_json::from_slice(&std::fs::read(cdir.join("control_log.json"))?)?;
        let fig = plot::control_figure(
            &load_trace(&cdir, "uncontrolled.csv")?,
            &load_trace(&cdir, "controlled.csv")?,
            &log,
            cfg.mpc.start_time,
        )?;
        w.write("control.svg", fig.as_bytes())?;
        written.push("control.svg");
    }
    let summary = written.join(", ");
    Ok(StageOutcome { stage: "plot", dir: w.finish()?, reused: false, summary })
}
