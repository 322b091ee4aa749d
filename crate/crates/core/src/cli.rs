//! Command-line front end: `estimate`, `correct`, `project`, `simulate`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::estimators::{estimate_cov_seqdepth, estimate_cov_transformed};
use crate::io::{read_counts, read_depths, read_matrix, write_matrix, write_vector, RunManifest};
use crate::moments::{LogParams, Polynomial, Transform};
use crate::projection::{naive_log_project, project_scores, ProjectionOptions, DEFAULT_ZERO_LOG};
use crate::seqdepth::{compositional_correct, minvar_correct, DEFAULT_ENERGY_THRESHOLD};
use crate::simbench::{run_comparison, worker_pool, Correction, Method, Preset, SimulationConfig};
use crate::types::{CountMatrix, CovarianceEstimate, LatentPCA, SequencingDepths};

#[derive(Debug, Parser)]
#[command(
    name = "poisson-pca",
    version,
    about = "Poisson measurement-error corrected PCA for count tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the latent covariance of a count table and its eigendecomposition.
    Estimate(EstimateArgs),
    /// Apply a sequencing-depth correction to a covariance matrix CSV.
    Correct(CorrectArgs),
    /// Project samples onto the latent log-scale principal components.
    Project(ProjectArgs),
    /// Run the simulation comparison of PCA variants.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectMethod {
    None,
    Compositional,
    Minvar,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// identity, log, or poly:c1,c2,... (coefficients of λ, λ², ...; no constant)
    #[arg(long, default_value = "identity")]
    pub transform: String,
    /// Log estimator parameters: centre a, order N, switch threshold.
    #[arg(long, value_name = "A,N,L0")]
    pub log_params: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Count table (CSV or TSV).
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub transform: TransformArgs,
    /// Known per-sample sequencing depths, one per line.
    #[arg(long, conflicts_with = "seqdepth_from_totals")]
    pub seqdepth_file: Option<PathBuf>,
    /// Use row totals as plug-in depths.
    #[arg(long)]
    pub seqdepth_from_totals: bool,
    #[arg(long, value_enum, default_value = "none")]
    pub correct_method: CorrectMethod,
    #[arg(long, default_value_t = DEFAULT_ENERGY_THRESHOLD)]
    pub energy_threshold: f64,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    /// Covariance matrix CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, alias = "correct-method", value_enum)]
    pub method: CorrectMethod,
    #[arg(long, default_value_t = DEFAULT_ENERGY_THRESHOLD)]
    pub energy_threshold: f64,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Count table (CSV or TSV).
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_name = "A,N,L0")]
    pub log_params: Option<String>,
    /// Covariance CSV to take components from instead of estimating one.
    #[arg(long, requires = "center")]
    pub covariance: Option<PathBuf>,
    /// Log-scale centre vector CSV matching --covariance.
    #[arg(long, requires = "covariance")]
    pub center: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "none")]
    pub correct_method: CorrectMethod,
    #[arg(long, default_value_t = DEFAULT_ENERGY_THRESHOLD)]
    pub energy_threshold: f64,
    /// Value substituted for log(0) in the naive projection.
    #[arg(long, default_value_t = DEFAULT_ZERO_LOG, allow_hyphen_values = true)]
    pub zero_sub: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "fig1")]
    pub preset: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subset of poisson-pca, naive-pca, naive-transform-pca, compositional-pca.
    #[arg(long, value_delimiter = ',', default_value = "poisson-pca,naive-pca")]
    pub methods: Vec<String>,
    /// Correction applied to the poisson-pca estimate.
    #[arg(long, value_enum, default_value = "none")]
    pub correct_method: CorrectMethod,
    #[arg(long, default_value_t = DEFAULT_ENERGY_THRESHOLD)]
    pub energy_threshold: f64,
    /// Also write per-replicate CPU times (not reproducible byte-for-byte).
    #[arg(long)]
    pub timings: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

/// Parses `identity`, `log` or `poly:c1,c2,...`.
pub fn parse_transform(text: &str, log_params: Option<&str>) -> Result<Transform> {
    let params = log_params.map(parse_log_params).transpose()?;
    match text {
        "identity" => {
            if params.is_some() {
                return Err(Error::Usage("--log-params only applies to --transform log".into()));
            }
            Ok(Transform::Identity)
        }
        "log" => Ok(Transform::Log(params.unwrap_or_default())),
        s if s.starts_with("poly:") => {
            if params.is_some() {
                return Err(Error::Usage("--log-params only applies to --transform log".into()));
            }
            let mut coeffs = vec![0.0];
            for c in s["poly:".len()..].split(',') {
                coeffs.push(c.trim().parse::<f64>().map_err(|_| {
                    Error::Usage(format!("bad polynomial coefficient {c:?}"))
                })?);
            }
            Ok(Transform::Polynomial(Polynomial::new(coeffs)?))
        }
        other => Err(Error::Usage(format!(
            "unknown transform {other:?} (expected identity, log or poly:c1,c2,...)"
        ))),
    }
}

pub fn parse_log_params(s: &str) -> Result<LogParams> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Usage(format!("--log-params expects a,N,l0, got {s:?}")));
    }
    let bad = |what: &str| Error::Usage(format!("--log-params: bad {what} in {s:?}"));
    let a = parts[0].parse::<f64>().map_err(|_| bad("centre"))?;
    let n = parts[1].parse::<u32>().map_err(|_| bad("order"))?;
    let l0 = parts[2].parse::<u64>().map_err(|_| bad("switch"))?;
    LogParams::new(a, n, l0)
}

fn default_labels(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn correction_for(method: CorrectMethod, threshold: f64) -> Correction {
    match method {
        CorrectMethod::None => Correction::None,
        CorrectMethod::Compositional => Correction::Compositional,
        CorrectMethod::Minvar => Correction::MinVar {
            energy_threshold: threshold,
        },
    }
}

fn method_name(m: CorrectMethod) -> &'static str {
    match m {
        CorrectMethod::None => "none",
        CorrectMethod::Compositional => "compositional",
        CorrectMethod::Minvar => "minvar",
    }
}

/// Writes covariance, eigenvalues and loadings; returns the PCA.
fn write_pca_outputs(
    out: &Path,
    sigma: &Array2<f64>,
    center: Array1<f64>,
    labels: &[String],
) -> Result<LatentPCA> {
    let p = sigma.nrows();
    let pcs = default_labels("pc", p);
    let path = out.join("covariance.csv");
    write_matrix(&path, sigma, Some(labels), labels)?;
    report(&path);
    let pca = LatentPCA::from_covariance(sigma.view(), center)?;
    let path = out.join("eigenvalues.csv");
    write_vector(&path, &pca.eigenvalues().to_owned(), &pcs, "eigenvalue")?;
    report(&path);
    let path = out.join("loadings.csv");
    write_matrix(&path, &pca.vectors().to_owned(), Some(labels), &pcs)?;
    report(&path);
    let path = out.join("center.csv");
    write_vector(&path, &pca.center().to_owned(), labels, "center")?;
    report(&path);
    Ok(pca)
}

fn column_labels(counts: &CountMatrix) -> Vec<String> {
    counts
        .col_labels()
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| default_labels("v", counts.p()))
}

fn row_labels(counts: &CountMatrix) -> Vec<String> {
    counts
        .row_labels()
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| default_labels("s", counts.n()))
}

fn apply_correction(
    sigma: Array2<f64>,
    method: CorrectMethod,
    threshold: f64,
    manifest: &mut RunManifest,
) -> Result<Array2<f64>> {
    match method {
        CorrectMethod::None => Ok(sigma),
        CorrectMethod::Compositional => compositional_correct(sigma.view()),
        CorrectMethod::Minvar => {
            let r = minvar_correct(sigma.view(), threshold)?;
            manifest.push("minvar_c", format!("{:?}", r.c));
            manifest.push("minvar_j", r.j);
            manifest.push("minvar_min_eigenvalue", format!("{:?}", r.min_eigenvalue));
            if r.psd_violation {
                eprintln!("warning: corrected covariance is not positive semidefinite");
            }
            Ok(r.corrected)
        }
    }
}

fn estimate(counts: &CountMatrix, transform: &Transform, depths: Option<&SequencingDepths>) -> Result<CovarianceEstimate> {
    match depths {
        Some(d) => estimate_cov_seqdepth(counts, d),
        None => estimate_cov_transformed(counts, transform),
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let transform = parse_transform(&args.transform.transform, args.transform.log_params.as_deref())?;
    let wants_depth = args.seqdepth_file.is_some() || args.seqdepth_from_totals;
    if wants_depth && !matches!(transform, Transform::Identity) {
        return Err(Error::Usage(
            "known sequencing depths are only modelled for --transform identity; \
             for log data depth noise is removed with --correct-method compositional|minvar"
                .into(),
        ));
    }
    let counts = read_counts(&args.input)?;
    let depths = match (&args.seqdepth_file, args.seqdepth_from_totals) {
        (Some(path), _) => Some(read_depths(path)?),
        (None, true) => {
            eprintln!("note: row totals used as depths; the estimator assumes depths are known");
            Some(SequencingDepths::from_row_totals(&counts)?)
        }
        (None, false) => None,
    };
    prepare_out(&args.out)?;
    let mut manifest = RunManifest::new("estimate");
    manifest.push("input", args.input.display());
    manifest.push("transform", &args.transform.transform);
    if let Transform::Log(lp) = &transform {
        manifest.push("log_params", format!("{:?},{},{}", lp.center, lp.order, lp.switch));
    }
    manifest.push(
        "seqdepth",
        match (&args.seqdepth_file, args.seqdepth_from_totals) {
            (Some(p), _) => format!("file:{}", p.display()),
            (None, true) => "row-totals".into(),
            (None, false) => "none".into(),
        },
    );
    manifest.push("correct_method", method_name(args.correct_method));
    manifest.push("energy_threshold", format!("{:?}", args.energy_threshold));

    let est = estimate(&counts, &transform, depths.as_ref())?;
    let (sigma, mean) = est.into_parts();
    let sigma = apply_correction(sigma, args.correct_method, args.energy_threshold, &mut manifest)?;
    write_pca_outputs(&args.out, &sigma, mean, &column_labels(&counts))?;
    report(&manifest.write(&args.out)?);
    Ok(())
}

fn cmd_correct(args: &CorrectArgs) -> Result<()> {
    let m = read_matrix(&args.input)?;
    if m.data.nrows() != m.data.ncols() {
        return Err(Error::DimensionMismatch {
            what: "covariance rows vs columns",
            expected: m.data.ncols(),
            found: m.data.nrows(),
        });
    }
    prepare_out(&args.out)?;
    let mut manifest = RunManifest::new("correct");
    manifest.push("input", args.input.display());
    manifest.push("correct_method", method_name(args.method));
    manifest.push("energy_threshold", format!("{:?}", args.energy_threshold));
    let corrected = apply_correction(m.data, args.method, args.energy_threshold, &mut manifest)?;
    let p = corrected.nrows();
    write_pca_outputs(&args.out, &corrected, Array1::zeros(p), &m.col_labels)?;
    report(&manifest.write(&args.out)?);
    Ok(())
}

fn read_center(path: &Path) -> Result<Array1<f64>> {
    let m = read_matrix(path)?;
    match m.data.ncols() {
        1 => Ok(m.data.column(0).to_owned()),
        _ if m.data.nrows() == 1 => Ok(m.data.row(0).to_owned()),
        _ => Err(Error::InvalidInput(format!(
            "{} must hold a single row or column",
            path.display()
        ))),
    }
}

fn cmd_project(args: &ProjectArgs) -> Result<()> {
    let counts = read_counts(&args.input)?;
    prepare_out(&args.out)?;
    let mut manifest = RunManifest::new("project");
    manifest.push("input", args.input.display());
    manifest.push("transform", "log");
    manifest.push("rank", args.rank);
    manifest.push("zero_sub", format!("{:?}", args.zero_sub));
    let labels = column_labels(&counts);
    let pca = match (&args.covariance, &args.center) {
        (Some(cov), Some(center)) => {
            manifest.push("covariance", cov.display());
            manifest.push("center", center.display());
            let sigma = read_matrix(cov)?.data;
            LatentPCA::from_covariance(sigma.view(), read_center(center)?)?
        }
        _ => {
            let params = args.log_params.as_deref().map(parse_log_params).transpose()?.unwrap_or_default();
            manifest.push("log_params", format!("{:?},{},{}", params.center, params.order, params.switch));
            manifest.push("correct_method", method_name(args.correct_method));
            manifest.push("energy_threshold", format!("{:?}", args.energy_threshold));
            let (sigma, mean) = estimate_cov_transformed(&counts, &Transform::Log(params))?.into_parts();
            let sigma = apply_correction(sigma, args.correct_method, args.energy_threshold, &mut manifest)?;
            write_pca_outputs(&args.out, &sigma, mean, &labels)?
        }
    };
    let scores = project_scores(&counts, &pca, args.rank, ProjectionOptions::default())?;
    let naive = naive_log_project(&counts, &pca, args.rank, args.zero_sub)?;
    let rows = row_labels(&counts);
    let pcs = default_labels("pc", pca.dim());
    for (name, data, cols) in [
        ("scores.csv", &scores.a, &pcs),
        ("reconstruction.csv", &scores.reconstruction, &labels),
        ("fitted_means.csv", &scores.lambda_hat, &labels),
        ("naive_scores.csv", &naive.a, &pcs),
    ] {
        let path = args.out.join(name);
        write_matrix(&path, data, Some(&rows), cols)?;
        report(&path);
    }
    let status = Array2::from_shape_fn((counts.n(), 2), |(i, j)| {
        if j == 0 {
            f64::from(u8::from(scores.converged[i]))
        } else {
            scores.iterations[i] as f64
        }
    });
    let path = args.out.join("convergence.csv");
    write_matrix(&path, &status, Some(&rows), &["converged".into(), "iterations".into()])?;
    report(&path);
    let failed = scores.converged.iter().filter(|c| !**c).count();
    manifest.push("rows_not_converged", failed);
    if failed > 0 {
        eprintln!("warning: {failed} rows hit the iteration cap; see convergence.csv");
    }
    report(&manifest.write(&args.out)?);
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let preset: Preset = args.preset.parse()?;
    let methods = args
        .methods
        .iter()
        .map(|m| m.trim().parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    let mut config = SimulationConfig::preset(preset, args.n, args.p);
    config.replicates = args.replicates;
    config.seed = args.seed;
    let correction = correction_for(args.correct_method, args.energy_threshold);
    let result = run_comparison(&config, &methods, correction)?;
    prepare_out(&args.out)?;
    let mut manifest = RunManifest::new("simulate");
    manifest.push("preset", preset);
    manifest.extend(config.manifest_entries());
    manifest.push(
        "methods",
        methods.iter().map(|m| m.label()).collect::<Vec<_>>().join(","),
    );
    manifest.push("correction", correction);
    manifest.push("skipped_replicates", result.skipped.len());
    manifest.push("clamped_entries", result.total_clamped());
    let path = args.out.join("curves.csv");
    result.write_curves(&path)?;
    report(&path);
    let path = args.out.join("replicate_curves.csv");
    result.write_replicate_curves(&path)?;
    report(&path);
    if args.timings {
        let path = args.out.join("timings.csv");
        result.write_timings(&path)?;
        report(&path);
    }
    report(&manifest.write(&args.out)?);
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let pool = worker_pool()?;
    pool.install(|| match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Correct(a) => cmd_correct(a),
        Command::Project(a) => cmd_project(a),
        Command::Simulate(a) => cmd_simulate(a),
    })
}

fn error_line(kind: &str, message: &str) -> String {
    let flat: String = message
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    format!("error: kind={kind} message={flat}")
}

/// Parses arguments, runs the command and returns the process exit code.
/// Failures print a single `error: kind=... message=...` line to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", error_line("usage", first.trim_start_matches("error: ")));
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}
