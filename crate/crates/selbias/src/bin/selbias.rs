//! Command-line front end. Every subcommand runs one library report and
//! emits it as long-format CSV or JSON.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use selbias::{
    audit, bias_concentration, envelope_sweep, g_normal, premium_exact_2, premium_mc,
    premium_profile, simulate_stopped, winners_curse, EnsembleConfig, Error, Family,
    Format, IncrementModel, MeanVector, Record, Report, ScoreMatrix, SeedSpec, StoppingRule,
};

#[derive(Parser)]
#[command(name = "selbias", version, about = "Selection-bias simulation and audit reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the simulation subcommands.
#[derive(Args, Clone)]
struct Common {
    /// Increment family: gaussian, student_t5, exponential_centered,
    /// uniform_centered, laplace, rademacher
    #[arg(long, default_value = "gaussian")]
    dist: String,
    /// Number of arms (models)
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Horizon (observations)
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Monte Carlo paths
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// Root seed; fixed seed means byte-identical output
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Common per-arm scale
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Exchangeable correlation in [0, 1)
    #[arg(long)]
    rho: Option<f64>,
    /// CSV file with a full KxK covariance (gaussian only)
    #[arg(long)]
    cov: Option<PathBuf>,
    /// Output format
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the simulation (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One-step selection premium at a given state
    Premium {
        #[command(flatten)]
        common: Common,
        /// State vector, comma separated; zeros when omitted
        #[arg(long)]
        u: Option<String>,
        /// Monte Carlo replicas
        #[arg(long, default_value_t = 1_000_000)]
        replicas: usize,
    },
    /// Per-step premium profile, expected maximum, and decay times
    Profile {
        #[command(flatten)]
        common: Common,
        /// Inner replicas for the nested conditional estimator
        #[arg(long)]
        nested: Option<usize>,
        /// Decay thresholds
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        alpha: Vec<f64>,
    },
    /// Early-step share of the total selection bias
    Concentration {
        #[command(flatten)]
        common: Common,
        /// Early fractions to evaluate
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.04,0.25")]
        alpha: Vec<f64>,
    },
    /// Empirical E[max] against the sub-Gaussian envelope over an (n, K) grid
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long = "n-grid", value_delimiter = ',', default_value = "50,100,200,500,1000")]
        n_grid: Vec<usize>,
        #[arg(long = "k-grid", value_delimiter = ',', default_value = "2,10,50,200")]
        k_grid: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "uniform_centered,rademacher")]
        families: Vec<String>,
        /// Replicas for the crude one-shot upper bound
        #[arg(long, default_value_t = 100_000)]
        replicas: usize,
    },
    /// Stopped maximum against the truncated premium series
    Stopping {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "threshold")]
        rule: String,
        /// Threshold level for --rule threshold
        #[arg(long, default_value_t = 3.0)]
        c: f64,
        /// Margin for --rule leader-gap
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        /// Hard cap on the stopping time
        #[arg(long, default_value_t = 100)]
        cap: usize,
        /// Inner replicas for the truncated premiums
        #[arg(long, default_value_t = 500)]
        inner: usize,
    },
    /// Winner's curse under unequal means
    Curse {
        #[command(flatten)]
        common: Common,
        /// Per-arm means, comma separated
        #[arg(long)]
        means: String,
        /// Inner replicas for nested drifted premiums
        #[arg(long)]
        nested: Option<usize>,
    },
    /// Audit an observations-by-models score matrix for selection optimism
    Audit {
        /// CSV score file, optional header of model names
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        replicas: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaussian premium constants g(K) by quadrature
    Gtable {
        #[arg(long = "k-max", default_value_t = 20)]
        k_max: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn build_model(common: &Common) -> Result<IncrementModel, Error> {
    let family: Family = common.dist.parse()?;
    if let Some(path) = &common.cov {
        let m = ScoreMatrix::load(path)?;
        if m.rows() != common.k || m.cols() != common.k {
            return Err(Error::DimensionMismatch(format!(
                "covariance file is {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                common.k,
                common.k
            )));
        }
        let mut flat = Vec::with_capacity(common.k * common.k);
        for i in 0..common.k {
            flat.extend_from_slice(m.row(i));
        }
        if family != Family::Gaussian {
            return Err(Error::InvalidConfig(
                "full covariance is supported for the gaussian family only".into(),
            ));
        }
        return IncrementModel::gaussian_cov(flat, common.k);
    }
    match common.rho {
        Some(rho) => IncrementModel::exchangeable(family, common.k, common.sigma, rho),
        None => IncrementModel::iid(family, common.k, common.sigma),
    }
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad {what} entry '{s}'")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Premium {
            common,
            u,
            replicas,
        } => {
            let model = build_model(&common)?;
            let state = match &u {
                Some(text) => parse_f64_list(text, "--u")?,
                None => vec![0.0; common.k],
            };
            let start = Instant::now();
            let est = premium_mc(&state, &model, replicas, SeedSpec::new(common.seed))?;
            let mut records = vec![Record::new("premium", est.value)
                .family(model.family().name())
                .k(common.k)
                .se(est.std_error)];
            if model.family() == Family::Gaussian && common.k == 2 {
                let cov = model.covariance();
                let exact = premium_exact_2(
                    &state,
                    [[cov[0], cov[1]], [cov[2], cov[3]]],
                )?;
                records.push(
                    Record::new("premium_exact", exact.value)
                        .family("gaussian")
                        .k(2),
                );
            }
            emit(&common, "premium", records, start)
        }
        Command::Profile {
            common,
            nested,
            alpha,
        } => {
            let model = build_model(&common)?;
            let mut config = EnsembleConfig::new(model, common.n, common.paths, common.seed);
            if let Some(inner) = nested {
                config = config.with_nested(inner);
            }
            let start = Instant::now();
            let report = with_threads(common.threads, || premium_profile(&config, &alpha))??;
            let fam = report.family.name();
            let mut records = Vec::new();
            for i in 0..report.horizon {
                let step = (i + 1) as f64;
                records.push(
                    Record::new("premium", report.premium[i])
                        .family(fam)
                        .k(report.arm_count)
                        .n(report.horizon)
                        .index(step)
                        .se(report.premium_se[i]),
                );
                records.push(
                    Record::new("expected_max", report.expected_max[i])
                        .family(fam)
                        .k(report.arm_count)
                        .n(report.horizon)
                        .index(step)
                        .se(report.expected_max_se[i]),
                );
                if let (Some(nested), Some(nested_se)) = (&report.nested, &report.nested_se) {
                    records.push(
                        Record::new("nested", nested[i])
                            .family(fam)
                            .k(report.arm_count)
                            .n(report.horizon)
                            .index(step)
                            .se(nested_se[i]),
                    );
                }
                if let Some(norm) = &report.normalized {
                    records.push(
                        Record::new("psi", norm.psi[i])
                            .family(fam)
                            .k(report.arm_count)
                            .n(report.horizon)
                            .index(step)
                            .se(norm.psi_se[i]),
                    );
                    records.push(
                        Record::new("psi_smoothed", norm.psi_smoothed[i])
                            .family(fam)
                            .k(report.arm_count)
                            .n(report.horizon)
                            .index(step),
                    );
                }
            }
            for (alpha, crossing) in &report.decay_times {
                if let Some(step) = crossing {
                    records.push(
                        Record::new("decay_time", *step as f64)
                            .family(fam)
                            .k(report.arm_count)
                            .n(report.horizon)
                            .index(*alpha),
                    );
                }
            }
            emit(&common, "profile", records, start)
        }
        Command::Concentration { common, alpha } => {
            let model = build_model(&common)?;
            let config = EnsembleConfig::new(model, common.n, common.paths, common.seed);
            let start = Instant::now();
            let ratios = with_threads(common.threads, || bias_concentration(&config, &alpha))??;
            let mut records = Vec::new();
            for r in &ratios {
                records.push(
                    Record::new("ratio", r.ratio)
                        .family(common.dist.clone())
                        .k(common.k)
                        .n(common.n)
                        .index(r.alpha)
                        .se(r.std_error),
                );
                records.push(Record::new("sqrt_alpha", r.alpha.sqrt()).index(r.alpha));
            }
            emit(&common, "concentration", records, start)
        }
        Command::Bounds {
            common,
            n_grid,
            k_grid,
            families,
            replicas,
        } => {
            let fams: Vec<Family> = families
                .iter()
                .map(|f| f.parse())
                .collect::<Result<_, _>>()?;
            let start = Instant::now();
            let report = with_threads(common.threads, || {
                envelope_sweep(&n_grid, &k_grid, &fams, common.paths, common.seed, replicas)
            })??;
            let mut records = Vec::new();
            for cell in &report.cells {
                let fam = cell.family.name();
                records.push(
                    Record::new("empirical", cell.empirical)
                        .family(fam)
                        .k(cell.arm_count)
                        .n(cell.horizon)
                        .se(cell.std_error),
                );
                records.push(
                    Record::new("envelope", cell.envelope)
                        .family(fam)
                        .k(cell.arm_count)
                        .n(cell.horizon),
                );
                records.push(
                    Record::new("crude_bound", cell.crude_bound)
                        .family(fam)
                        .k(cell.arm_count)
                        .n(cell.horizon)
                        .se(cell.crude_bound_se),
                );
            }
            emit(&common, "bounds", records, start)
        }
        Command::Stopping {
            common,
            rule,
            c,
            gamma,
            cap,
            inner,
        } => {
            let model = build_model(&common)?;
            let rule = match rule.as_str() {
                "fixed" => StoppingRule::Fixed(common.n),
                "threshold" => StoppingRule::Threshold { c, cap },
                "leader-gap" => StoppingRule::LeaderGap { gamma, cap },
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown rule '{other}' (expected fixed, threshold, leader-gap)"
                    )))
                }
            };
            let start = Instant::now();
            let summary = with_threads(common.threads, || {
                simulate_stopped(&model, rule, common.paths, common.seed, inner)
            })??;
            let fam = common.dist.clone();
            let mut records = vec![
                Record::new("stop_time", summary.mean_stop_time)
                    .family(fam.clone())
                    .k(common.k)
                    .se(summary.stop_time_se),
                Record::new("stopped_max", summary.stopped_max)
                    .family(fam.clone())
                    .k(common.k)
                    .se(summary.stopped_max_se),
                Record::new("rhs_total", summary.rhs_total)
                    .family(fam.clone())
                    .k(common.k)
                    .se(summary.rhs_total_se),
            ];
            for (i, (v, se)) in summary
                .rhs_terms
                .iter()
                .zip(&summary.rhs_terms_se)
                .enumerate()
            {
                records.push(
                    Record::new("rhs_term", *v)
                        .family(fam.clone())
                        .k(common.k)
                        .index((i + 1) as f64)
                        .se(*se),
                );
            }
            emit(&common, "stopping", records, start)
        }
        Command::Curse {
            common,
            means,
            nested,
        } => {
            let model = build_model(&common)?;
            let means = MeanVector::new(parse_f64_list(&means, "--means")?)?;
            let mut config = EnsembleConfig::new(model, common.n, common.paths, common.seed);
            if let Some(inner) = nested {
                config = config.with_nested(inner);
            }
            let start = Instant::now();
            let report = with_threads(common.threads, || winners_curse(&config, &means))??;
            let fam = common.dist.clone();
            let mut records = vec![
                Record::new("drift_term", report.drift_term)
                    .family(fam.clone())
                    .k(common.k)
                    .n(common.n),
                Record::new("residual_max", report.residual_max)
                    .family(fam.clone())
                    .k(common.k)
                    .n(common.n)
                    .se(report.residual_max_se),
                Record::new("uncentered_max", report.uncentered_max)
                    .family(fam.clone())
                    .k(common.k)
                    .n(common.n),
                Record::new("optimism", report.optimism)
                    .family(fam.clone())
                    .k(common.k)
                    .n(common.n)
                    .se(report.optimism_se),
            ];
            for i in 0..report.horizon {
                records.push(
                    Record::new("drifted_premium", report.drifted_premium[i])
                        .family(fam.clone())
                        .k(common.k)
                        .n(common.n)
                        .index((i + 1) as f64)
                        .se(report.drifted_premium_se[i]),
                );
                if let (Some(nested), Some(nested_se)) = (&report.nested, &report.nested_se) {
                    records.push(
                        Record::new("nested", nested[i])
                            .family(fam.clone())
                            .k(common.k)
                            .n(common.n)
                            .index((i + 1) as f64)
                            .se(nested_se[i]),
                    );
                }
            }
            for (idx, freq) in report.selected_frequency.iter().enumerate() {
                records.push(
                    Record::new("selected_frequency", *freq)
                        .family(fam.clone())
                        .k(common.k)
                        .n(common.n)
                        .index((idx + 1) as f64),
                );
            }
            emit(&common, "curse", records, start)
        }
        Command::Audit {
            input,
            replicas,
            seed,
            format,
            out,
        } => {
            let scores = ScoreMatrix::load(&input)?;
            let start = Instant::now();
            let report = audit(&scores, replicas, seed)?;
            let n = report.observations;
            let k = report.model_count;
            let mut records = Vec::new();
            for (idx, mean) in report.means.iter().enumerate() {
                records.push(Record::new("model_mean", *mean).k(k).n(n).index((idx + 1) as f64));
            }
            records.push(Record::new("winner", (report.winner + 1) as f64).k(k).n(n));
            records.push(Record::new("winner_mean", report.winner_mean).k(k).n(n));
            records.push(
                Record::new("premium_constant", report.premium_constant)
                    .k(k)
                    .n(n)
                    .se(report.premium_constant_se),
            );
            records.push(Record::new("optimism", report.optimism).k(k).n(n));
            records.push(
                Record::new("debiased_winner_mean", report.debiased_winner_mean)
                    .k(k)
                    .n(n),
            );
            records.push(Record::new("leader_changes", report.leader_changes as f64).k(k).n(n));
            let fmt: Format = format.parse()?;
            Report::new("audit", seed, records)
                .with_elapsed(start.elapsed().as_secs_f64())
                .emit(fmt, out.as_deref())
        }
        Command::Gtable {
            k_max,
            tol,
            format,
            out,
        } => {
            if k_max == 0 {
                return Err(Error::InvalidConfig("--k-max must be positive".into()));
            }
            let start = Instant::now();
            let mut records = Vec::new();
            for k in 1..=k_max {
                let g = g_normal(k, tol)?;
                records.push(Record::new("g", g.value).family("gaussian").k(k));
            }
            let fmt: Format = format.parse()?;
            Report::new("gtable", 0, records)
                .with_elapsed(start.elapsed().as_secs_f64())
                .emit(fmt, out.as_deref())
        }
    }
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, Error> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            if t == 0 {
                return Err(Error::InvalidConfig("--threads must be positive".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn emit(
    common: &Common,
    command: &str,
    records: Vec<Record>,
    start: Instant,
) -> Result<(), Error> {
    let format: Format = common.format.parse()?;
    Report::new(command, common.seed, records)
        .with_elapsed(start.elapsed().as_secs_f64())
        .emit(format, common.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
