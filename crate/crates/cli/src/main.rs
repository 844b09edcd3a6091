use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use raqe::pipeline::{run, Mode, PipelineError, RunConfig, RunReport};
use raqe::validation::{validate_all, Budget};
use raqe::{CurveFamily, InputFormat, Weighting};

#[derive(Parser)]
#[command(name = "raqe", version, about = "Extreme quantiles from weighted tail fits of the empirical distribution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit tail curves and estimate quantiles.
    Fit(Box<FitArgs>),
    /// Run the bundled case studies and Monte Carlo property checks.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct FitArgs {
    /// TOML config file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV file(s).
    #[arg(long, value_delimiter = ',')]
    input: Vec<PathBuf>,
    /// wide (one column per sample) or long (label,value rows).
    #[arg(long)]
    format: Option<InputFormat>,
    /// single or pooled.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    lower_family: Option<CurveFamily>,
    #[arg(long)]
    upper_family: Option<CurveFamily>,
    /// edf or unweighted.
    #[arg(long)]
    lower_weighting: Option<Weighting>,
    /// edf or unweighted.
    #[arg(long)]
    upper_weighting: Option<Weighting>,
    #[arg(long)]
    tail_fraction: Option<f64>,
    /// Order statistics in the lower tail (m); overrides the fraction.
    #[arg(long)]
    lower_count: Option<usize>,
    /// Order statistics in the upper tail (l); overrides the fraction.
    #[arg(long)]
    upper_count: Option<usize>,
    /// Probabilities, comma separated.
    #[arg(long = "p", value_delimiter = ',', allow_negative_numbers = true)]
    probabilities: Vec<f64>,
    /// Return periods, comma separated; each maps to p = 1 - 1/T.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    return_periods: Vec<f64>,
    #[arg(long)]
    bootstrap_reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Samples are aligned row by row (enables paired tests).
    #[arg(long)]
    aligned: bool,
    /// Pool even when the shape diagnostics disagree.
    #[arg(long)]
    override_homogeneity: bool,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TSV plot data path.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value = "full")]
    budget: Budget,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the JSON summary here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: &Path) -> Result<RunConfig, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: RunConfig =
        toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    // paths in a config file are relative to the file
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    cfg.inputs.iter_mut().for_each(rebase);
    cfg.out.as_mut().map(rebase);
    cfg.plot_data.as_mut().map(rebase);
    Ok(cfg)
}

fn build_config(a: FitArgs) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &a.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if !a.input.is_empty() {
        cfg.inputs = a.input;
    }
    if let Some(v) = a.format {
        cfg.format = v;
    }
    if let Some(v) = a.mode {
        cfg.mode = v;
    }
    if let Some(v) = a.lower_family {
        cfg.lower.family = Some(v);
    }
    if let Some(v) = a.upper_family {
        cfg.upper.family = Some(v);
    }
    if let Some(v) = a.lower_weighting {
        cfg.lower.weighting = v;
    }
    if let Some(v) = a.upper_weighting {
        cfg.upper.weighting = v;
    }
    if let Some(v) = a.tail_fraction {
        cfg.tail_fraction = v;
    }
    if let Some(v) = a.lower_count {
        cfg.lower.count = Some(v);
    }
    if let Some(v) = a.upper_count {
        cfg.upper.count = Some(v);
    }
    if !a.probabilities.is_empty() {
        cfg.probabilities = a.probabilities;
    }
    if !a.return_periods.is_empty() {
        cfg.return_periods = a.return_periods;
    }
    if let Some(v) = a.bootstrap_reps {
        cfg.bootstrap_reps = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    cfg.aligned |= a.aligned;
    cfg.override_homogeneity |= a.override_homogeneity;
    if a.out.is_some() {
        cfg.out = a.out;
    }
    if a.plot_data.is_some() {
        cfg.plot_data = a.plot_data;
    }
    Ok(cfg)
}

fn print_summary(r: &RunReport) {
    let samples: Vec<String> = r.samples.iter().map(|s| format!("{} (n={})", s.label, s.n)).collect();
    println!("samples: {}", samples.join(", "));
    if let Some(n) = r.pooled_n {
        println!("pooled standardized sample: n={n}");
    }
    if let Some(h) = &r.homogeneity {
        for pair in &h.pairwise {
            if let Some(c) = &pair.correlation {
                println!("  {} vs {}: correlation r={:.4} p={:.4}", pair.first, pair.second, c.statistic, c.p_value);
            }
            println!(
                "  {} vs {}: {} t={:.4} p={:.4}",
                pair.first, pair.second, pair.location.method, pair.location.statistic, pair.location.p_value
            );
        }
        println!("  scale: {} F={:.4} p={:.4}", h.scale_test.method, h.scale_test.statistic, h.scale_test.p_value);
        for s in &h.shapes {
            println!(
                "  {}: skewness CI [{:.4}, {:.4}], kurtosis CI [{:.4}, {:.4}]",
                s.label, s.skewness_ci.lo, s.skewness_ci.hi, s.kurtosis_ci.lo, s.kurtosis_ci.hi
            );
        }
        println!("  shapes homogeneous: {}", h.shape_homogeneous);
    }
    for f in &r.fits {
        let params: Vec<String> = f.param_names.iter().zip(&f.params).map(|(n, v)| format!("{n}={v:.6}")).collect();
        println!(
            "{} {} fit ({} points, {} weights): {}  wsse={:.6} sse={:.6} converged={}",
            f.side,
            f.family,
            f.tail_points,
            match f.weighting {
                Weighting::EdfWeights => "edf",
                Weighting::Unweighted => "uniform",
            },
            params.join(" "),
            f.wsse,
            f.sse,
            f.converged
        );
    }
    for e in &r.estimates {
        let head = match e.return_period {
            Some(t) => format!("T={t} (p={})", e.p),
            None => format!("p={}", e.p),
        };
        match &e.per_sample_values {
            Some(per) => {
                let vals: Vec<String> = per.iter().map(|(k, v)| format!("{k}={v:.4}")).collect();
                println!("{head}: z={:.6}  {}", e.value, vals.join("  "));
            }
            None => println!("{head}: {:.6}", e.value),
        }
    }
    for w in &r.warnings {
        println!("warning: {w}");
    }
}

fn fit(args: FitArgs) -> ExitCode {
    let result = build_config(args).and_then(|cfg| run(&cfg).map(|r| (cfg, r)));
    match result {
        Ok((cfg, report)) => {
            print_summary(&report);
            if let Some(out) = &cfg.out {
                println!("report written to {}", out.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("hint: {}", e.remediation());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn validate(args: ValidateArgs) -> ExitCode {
    let summary = validate_all(args.seed, args.budget);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{json}"),
    }
    for c in &summary.case_studies {
        eprintln!("{:?} case study: {}", c.dataset, if c.passed { "PASS" } else { "FAIL" });
    }
    for p in &summary.properties.properties {
        eprintln!("{}: {} ({})", p.name, if p.passed { "PASS" } else { "FAIL" }, p.detail);
    }
    if summary.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Fit(a) => fit(*a),
        Command::Validate(a) => validate(a),
    }
}
