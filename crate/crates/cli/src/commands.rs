use std::fs;
use std::path::Path;

use mimo_align::channel::{sample_channel, sigma2_from_snr, SnrSpec};
use mimo_align::codec::{generate_synthetic, load_dataset, save_dataset, pair_rows, LatentDataset, SyntheticSpec};
use mimo_align::evalx::{self, fmt_sig9, Equalizer, SweepConfig};
use mimo_align::flops::{self, FlopsReport, NeuralShape};
use mimo_align::linalg::power;
use mimo_align::linear_eq::{objective, primal_residual, train_linear, training_channel};
use mimo_align::model_io::{self, SavedModel};
use mimo_align::neural_eq::train_neural;
use mimo_align::seed::{derive, stream};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, ArchRun, EvalRun, TrainRun};
use crate::{CliError, ModelArg};

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn gen_data(spec_file: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut spec: SyntheticSpec = config::read(spec_file)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    let ds = generate_synthetic(&spec)?;
    save_dataset(&ds, out)?;
    write(&config::resolved_in(out), &config::to_json(&spec))?;
    println!("wrote {} pairs (d={}, m={}, C={}) to {}", ds.n(), ds.d(), ds.m(), ds.classes, out.display());
    Ok(())
}

fn training_rows(ds: LatentDataset, n_train: Option<usize>) -> Result<LatentDataset, CliError> {
    match n_train {
        None => Ok(ds),
        Some(n) if n <= ds.n() && n >= 2 => Ok(ds.slice(0, n)?),
        Some(n) => Err(CliError::Config(format!("n_train = {n} must lie in [2, {}]", ds.n()))),
    }
}

#[derive(Serialize)]
struct TrainMetrics {
    kind: &'static str,
    objective: f64,
    primal_residual: Option<f64>,
    tx_power: f64,
    feasible: bool,
    sparsity: f64,
}

pub fn train(kind: ModelArg, data: &Path, cfg_file: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut run: TrainRun = config::read(cfg_file)?;
    if let Some(s) = seed {
        run.base_seed = s;
    }
    run.admm.p_t = run.p_t;
    run.neural.p_t = run.p_t;
    run.neural.seed = derive(run.base_seed, &[stream::INIT]);
    run.channel.validate()?;
    run.admm.validate()?;
    run.neural.validate()?;
    let snr = SnrSpec::new(run.snr_db, run.p_t)?;

    let ds = training_rows(load_dataset(data)?, run.n_train)?;
    let ch = sample_channel(run.channel, run.base_seed);
    let sigma2 = sigma2_from_snr(snr);
    let tol = run.p_t * (1.0 + 1e-6);

    let metrics = match kind {
        ModelArg::Linear => {
            let seed = derive(run.base_seed, &[stream::INIT]);
            let (eq, state) = train_linear(&ds, &ch, sigma2, &run.admm, run.whiten, run.knowledge, seed)?;
            let x = eq.whitener.apply_columns(&pair_rows(&ds.tx)?)?;
            let y = pair_rows(&ds.rx)?;
            let h = training_channel(&ch, run.knowledge);
            let obj = objective(&eq.g, &eq.f, &x, &y, &h, sigma2, ds.n())?;
            model_io::save_linear(out, &eq, &ch)?;
            let p = power(&eq.f);
            TrainMetrics {
                kind: "linear",
                objective: obj,
                primal_residual: Some(primal_residual(&state)),
                tx_power: p,
                feasible: p <= tol,
                sparsity: 0.0,
            }
        }
        ModelArg::Neural => {
            let (eq, hist) = train_neural(&ds, &ch, sigma2, &run.neural, run.whiten, run.knowledge)?;
            let x = eq.whitener.apply_columns(&pair_rows(&ds.tx)?)?;
            let sent = eq.nets.transmit_symbols(&x)?;
            let p = sent.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
            model_io::save_neural(out, &eq, &ch)?;
            let last = hist.last().expect("at least one epoch");
            TrainMetrics {
                kind: "neural",
                objective: last.loss,
                primal_residual: None,
                tx_power: p,
                feasible: p <= tol,
                sparsity: last.sparsity,
            }
        }
    };
    write(&config::resolved_in(out), &config::to_json(&run))?;
    write(&out.join("metrics.json"), &config::to_json(&metrics))?;
    let residual = metrics.primal_residual.map(|r| format!(" primal_residual={}", fmt_sig9(r))).unwrap_or_default();
    println!(
        "{}: objective={}{residual} tx_power={} feasible={} sparsity={}",
        metrics.kind,
        fmt_sig9(metrics.objective),
        fmt_sig9(metrics.tx_power),
        metrics.feasible,
        fmt_sig9(metrics.sparsity)
    );
    Ok(())
}

pub fn sweep(data: &Path, cfg_file: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg: SweepConfig = config::read(cfg_file)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let ds = load_dataset(data)?;
    cfg.validate(&ds)?;
    let (pilots, test) = evalx::split(&cfg, &ds)?;
    let jobs = evalx::jobs(&cfg);
    let per_job: Vec<_> = jobs.par_iter().map(|job| evalx::run_job(&cfg, &pilots, &test, job)).collect::<Result<_, _>>()?;
    let records: Vec<_> = per_job.into_iter().flatten().collect();
    write(out, &evalx::to_csv(&records))?;
    write(&config::resolved_beside(out), &config::to_json(&cfg))?;
    for (method, zeta, snr, acc) in evalx::mean_accuracy(&records) {
        println!("{method:<15} zeta={} snr_db={} mean_accuracy={}", fmt_sig9(zeta), fmt_sig9(snr), fmt_sig9(acc));
    }
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct FlopsOutput {
    linear: FlopsReport,
    neural_formula: Option<FlopsReport>,
    neural_exact: Option<FlopsReport>,
    ratio: Option<f64>,
}

/// Ratio sometimes quoted for the default architecture pair.
const QUOTED_RATIO: f64 = 113.0;

fn print_report(label: &str, r: &FlopsReport) {
    println!("{label}: {} FLOPs (s={}, c={})", r.total, fmt_sig9(r.sparsity_used), r.activation_cost_c);
    for (name, n) in &r.per_layer {
        println!("  {name:<20} {n}");
    }
}

pub fn flops(model: Option<&Path>, cfg_file: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let (output, resolved) = match model {
        Some(dir) => {
            let manifest = model_io::load_manifest(dir)?;
            let dims = manifest.dims()?;
            let linear = flops::linear_flops_report(dims, manifest.d as u64, manifest.m as u64);
            let out = match model_io::load_model(dir)? {
                SavedModel::Linear { .. } => FlopsOutput { linear, neural_formula: None, neural_exact: None, ratio: None },
                SavedModel::Neural { eq, .. } => {
                    let c = flops::DEFAULT_ACTIVATION_COST;
                    let exact = flops::exact_neural_flops(&eq.nets, c);
                    let formula = flops::neural_flops_report(NeuralShape::of(&eq.nets)?, exact.sparsity_used, c)?;
                    let ratio = exact.total as f64 / linear.total as f64;
                    FlopsOutput { linear, neural_formula: Some(formula), neural_exact: Some(exact), ratio: Some(ratio) }
                }
            };
            (out, None)
        }
        None => {
            let arch: ArchRun = config::read(cfg_file)?;
            arch.linear.channel.validate()?;
            let linear = flops::linear_flops_report(arch.linear.channel, arch.linear.d, arch.linear.m);
            let formula = flops::neural_flops_report(arch.neural, arch.sparsity, arch.activation_cost)?;
            let ratio = formula.total as f64 / linear.total as f64;
            (FlopsOutput { linear, neural_formula: Some(formula), neural_exact: None, ratio: Some(ratio) }, Some(arch))
        }
    };

    print_report("linear", &output.linear);
    if let Some(r) = &output.neural_formula {
        print_report("neural (formula)", r);
    }
    if let Some(r) = &output.neural_exact {
        print_report("neural (exact)", r);
    }
    if let Some(ratio) = output.ratio {
        println!("neural/linear ratio: {}", fmt_sig9(ratio));
        println!(
            "note: these counts give {:.1}x; the ~{QUOTED_RATIO}x figure often quoted for this comparison is not reproduced by the same formulas",
            ratio
        );
    }
    if let Some(path) = out {
        write(path, &config::to_json(&output))?;
        if let Some(arch) = resolved {
            write(&config::resolved_beside(path), &config::to_json(&arch))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalMetrics {
    mse: f64,
    accuracy: Option<f64>,
    flops: u64,
    rows: usize,
}

pub fn eval(model: &Path, data: &Path, cfg_file: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
    let mut run: EvalRun = config::read(cfg_file)?;
    if let Some(s) = seed {
        run.base_seed = s;
    }
    let saved = model_io::load_model(model)?;
    let ds = load_dataset(data)?;
    let end = match run.rows {
        Some(r) => run.start + r,
        None => ds.n(),
    };
    if run.start >= end || end > ds.n() {
        return Err(CliError::Config(format!("rows {}..{end} out of range for {} pairs", run.start, ds.n())));
    }
    let ds = ds.slice(run.start, end)?;

    let (eq, channel, manifest, flops): (&dyn Equalizer, _, _, u64) = match &saved {
        SavedModel::Linear { eq, channel, manifest } => {
            (eq, channel, manifest, flops::linear_model_flops(channel.dims, manifest.d as u64, manifest.m as u64))
        }
        SavedModel::Neural { eq, channel, manifest } => {
            (eq, channel, manifest, flops::exact_neural_flops(&eq.nets, run.activation_cost).total)
        }
    };
    if manifest.d != ds.d() || manifest.m != ds.m() {
        return Err(CliError::Config(format!(
            "model expects d={}, m={}; dataset has d={}, m={}",
            manifest.d,
            manifest.m,
            ds.d(),
            ds.m()
        )));
    }
    let sigma2 = sigma2_from_snr(SnrSpec::new(run.snr_db, manifest.p_t)?);
    let h = channel.lift();
    let noise_seed = derive(run.base_seed, &[stream::EVAL_NOISE]);
    let (mse, accuracy) = if ds.head.is_some() {
        let (mse, acc) = evalx::score(eq, &ds, &h, sigma2, noise_seed)?;
        (mse, Some(acc))
    } else {
        (evalx::mse_eval(eq, &ds, &h, sigma2, noise_seed)?, None)
    };
    let metrics = EvalMetrics { mse, accuracy, flops, rows: ds.n() };
    let acc = accuracy.map(fmt_sig9).unwrap_or_else(|| "n/a".into());
    println!("mse={} accuracy={acc} flops={} rows={}", fmt_sig9(mse), flops, ds.n());
    if let Some(path) = out {
        write(path, &config::to_json(&metrics))?;
        write(&config::resolved_beside(path), &config::to_json(&run))?;
    }
    Ok(())
}
