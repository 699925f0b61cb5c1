use crate::bundle::{self, column_header, create_dir, read_json, seq_path, write_json, write_matrix, write_rows};
use crate::svg::line_plot;
use crate::{CliError, EvalArgs, FitArgs, GenerateArgs, SampleArgs};
use gpalign_core::baselines::{dtw_align_dataset, fit_variant, VariantSpec};
use gpalign_core::synth::{alignment_error, cluster_purity, generate as synth_generate, warping_error, GenConfig};
use gpalign_core::{sample_manifold, Dataset, FitConfig, FitResult, ModelConfig, ModelState};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let config = GenConfig {
        j: args.j,
        n: args.n,
        d: args.d,
        groups: args.groups,
        warp_roughness: args.warp_roughness,
        noise_sd: args.noise_sd,
        seed: args.seed,
    };
    let data = synth_generate(&config)?;
    bundle::write_dataset(&args.out, &data)
}

/// Fit settings after merging the config file and the flags.
pub fn fit_config(args: &FitArgs) -> Result<FitConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => FitConfig::default(),
    };
    macro_rules! set {
        ($flag:expr => $($field:tt)+) => {
            if let Some(v) = $flag {
                config.$($field)+ = v;
            }
        };
    }
    set!(args.seed => seed);
    set!(args.iterations => iterations);
    set!(args.learning_rate => learning_rate);
    set!(args.adam_beta1 => adam_beta1);
    set!(args.adam_beta2 => adam_beta2);
    set!(args.adam_eps => adam_eps);
    set!(args.latent_dim => model.latent_dim);
    set!(args.lvm_weight => model.lvm_weight);
    set!(args.basis_count => model.warp.basis_count);
    if args.inducing.is_some() {
        config.model.inducing_count = args.inducing;
    }
    if args.optimize_omega {
        config.model.warp.optimize_omega = true;
    }
    if let Some(k) = args.two_stage {
        config = config.with_two_stage(k);
    }
    config.validate()?;
    Ok(config)
}

/// Everything `sample` needs to rebuild the fitted GP-LVM.
#[derive(Serialize, Deserialize)]
pub struct SavedModel {
    pub config: ModelConfig,
    pub state: ModelState,
}

#[derive(Serialize)]
struct Hyperparameters {
    theta: Vec<Vec<f64>>,
    beta: Vec<f64>,
    psi: Vec<f64>,
    gamma: f64,
    omega: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct FitMeta<'a> {
    method: &'a str,
    seed: u64,
    config: &'a FitConfig,
    /// Positive hyperparameter values (not logs).
    hyperparameters: Hyperparameters,
    wall_time: f64,
    iterations_completed: usize,
    final_loss: Option<f64>,
    failure: Option<String>,
}

#[derive(Serialize)]
struct DtwMeta {
    method: &'static str,
    reference: usize,
    wall_time: f64,
}

fn exp_all(v: &[f64]) -> Vec<f64> {
    v.iter().map(|p| p.exp()).collect()
}

fn write_plots(out: &Path, x: &[f64], warps: &[Vec<f64>], aligned: &[DMatrix<f64>]) -> Result<(), CliError> {
    let warp_series: Vec<Vec<(f64, f64)>> = warps.iter().map(|g| x.iter().copied().zip(g.iter().copied()).collect()).collect();
    let aligned_series: Vec<Vec<(f64, f64)>> = aligned
        .iter()
        .map(|s| {
            let t = gpalign_core::model::uniform_grid(s.nrows());
            t.into_iter().zip(s.column(0).iter().copied()).collect()
        })
        .collect();
    for (name, svg) in [
        ("warps.svg", line_plot("warps", &warp_series)),
        ("aligned.svg", line_plot("aligned (first dimension)", &aligned_series)),
    ] {
        let path = out.join(name);
        fs::write(&path, svg).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn write_fit(out: &Path, args: &FitArgs, config: &FitConfig, data: &Dataset, result: &FitResult) -> Result<(), CliError> {
    let state = &result.state;
    for (j, s) in state.s.iter().enumerate() {
        write_matrix(&seq_path(out, "aligned", j), "d", s)?;
    }
    bundle::write_warps(out, &data.x, &result.warps)?;
    write_matrix(&out.join("latent.csv"), "z", &state.z)?;
    let loss_rows: Vec<[f64; 2]> = result.loss_trace.iter().enumerate().map(|(i, l)| [i as f64, *l]).collect();
    write_rows(
        &out.join("loss.csv"),
        Some(&["iteration".into(), "loss".into()]),
        loss_rows.iter().map(|r| r.as_slice()),
    )?;
    let meta = FitMeta {
        method: &args.method,
        seed: config.seed,
        config,
        hyperparameters: Hyperparameters {
            theta: state.log_theta.iter().map(|p| exp_all(p)).collect(),
            beta: exp_all(&state.log_beta),
            psi: exp_all(&state.log_psi),
            gamma: state.gamma(),
            omega: state.log_omega.iter().map(|p| exp_all(p)).collect(),
        },
        wall_time: result.wall_time,
        iterations_completed: result.loss_trace.len(),
        final_loss: result.final_loss(),
        failure: result.failure.as_ref().map(|e| e.to_string()),
    };
    write_json(&out.join("fit_meta.json"), &meta)?;
    write_json(
        &out.join("state.json"),
        &SavedModel {
            config: config.model.clone(),
            state: state.clone(),
        },
    )?;
    if args.svg {
        write_plots(out, &data.x, &result.warps, &state.s)?;
    }
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let data = bundle::read_dataset(&args.data)?;
    create_dir(&args.out)?;
    if args.method == "dtw" {
        let start = std::time::Instant::now();
        let dtw = dtw_align_dataset(&data)?;
        for (j, s) in dtw.aligned.iter().enumerate() {
            write_matrix(&seq_path(&args.out, "aligned", j), "d", s)?;
        }
        bundle::write_warps(&args.out, &data.x, &dtw.warps)?;
        write_json(
            &args.out.join("fit_meta.json"),
            &DtwMeta {
                method: "dtw",
                reference: dtw.reference,
                wall_time: start.elapsed().as_secs_f64(),
            },
        )?;
        if args.svg {
            write_plots(&args.out, &data.x, &dtw.warps, &dtw.aligned)?;
        }
        return Ok(());
    }
    let spec = VariantSpec::from_name(&args.method).ok_or_else(|| {
        CliError::Input(format!(
            "unknown method {:?}; expected ours, energy+gplvm, gplvm+basis, energy+basis or dtw",
            args.method
        ))
    })?;
    let mut config = fit_config(args)?;
    config.model.warp.family = spec.warp_family;
    config.model.alignment = spec.alignment_objective;
    let result = fit_variant(&data, spec, &config)?;
    write_fit(&args.out, args, &config, &data, &result)?;
    match &result.failure {
        Some(e) => Err(CliError::Numerical(format!("{e}; best state so far written to {}", args.out.display()))),
        None => Ok(()),
    }
}

fn metric_line(out: &mut String, name: &str, value: Option<f64>) {
    match value {
        Some(v) => writeln!(out, "{name} {v}"),
        None => writeln!(out, "{name} absent"),
    }
    .expect("writing to a String");
}

/// Metric report, one `name value` line per metric; `absent` when the inputs
/// for a metric are not available.
pub fn eval(args: &EvalArgs) -> Result<String, CliError> {
    let data = bundle::read_dataset(&args.data)?;
    let j = data.n_sequences();
    if !args.results.is_dir() {
        return Err(CliError::Input(format!("{}: no such results directory", args.results.display())));
    }
    let warps = bundle::read_warps(&args.results, j)?;
    let aligned = bundle::read_aligned(&args.results, j)?;
    let warp_err = match &data.true_warps {
        Some(truth) => Some(warping_error(&warps, truth)?),
        None => None,
    };
    // without labels every sequence counts as one group
    let groups = data.groups.clone().unwrap_or_else(|| vec![0; j]);
    let align_err = alignment_error(&aligned, &groups).ok();
    let latent_path = args.results.join("latent.csv");
    let purity = match (&data.groups, latent_path.exists()) {
        (Some(g), true) => {
            let z = bundle::read_matrix(&latent_path)?;
            let mut labels = g.clone();
            labels.sort_unstable();
            labels.dedup();
            Some(cluster_purity(&z, g, labels.len())?)
        }
        _ => None,
    };
    let mut out = String::new();
    metric_line(&mut out, "warping_error", warp_err);
    metric_line(&mut out, "alignment_error", align_err);
    metric_line(&mut out, "purity", purity);
    Ok(out)
}

pub fn sample(args: &SampleArgs) -> Result<(), CliError> {
    let saved: SavedModel = read_json(&args.results.join("state.json"))?;
    let sample = sample_manifold(&saved.state, &saved.config, &args.z)?;
    let d = sample.mean.ncols();
    let mut header = column_header("d", d);
    header.push("variance".into());
    let rows: Vec<Vec<f64>> = (0..sample.mean.nrows())
        .map(|r| {
            let mut row: Vec<f64> = sample.mean.row(r).iter().copied().collect();
            row.push(sample.variance[r]);
            row
        })
        .collect();
    match &args.out {
        Some(path) => write_rows(path, Some(&header), rows.iter().map(Vec::as_slice)),
        None => {
            let mut text = header.join(",") + "\n";
            for row in &rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                text += &(cells.join(",") + "\n");
            }
            print!("{text}");
            Ok(())
        }
    }
}
