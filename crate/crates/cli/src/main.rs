use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ispw_cli::{
    render, run, AnalysisRequest, CliError, Command, DataOptions, OutputFormat, StudyKind,
};
use ispw_core::{AicConvention, DistributionKind, LassoConfig, Link, LossScale, TauEventRule};

/// Inverse-survival-probability-weighted analysis of restricted survival
/// times: Kaplan-Meier curves, weighted least squares, lasso variable
/// selection, AIC subset search over AFT families, and simulation studies.
#[derive(Parser)]
#[command(name = "ispw", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Output file; stdout when omitted. Relative paths are resolved against
    /// $ISPW_OUT_DIR when that variable is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    /// Keep each record's event flag after truncation.
    AsRecorded,
    /// Records reaching tau become events at tau.
    TauReachedIsEvent,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LinkArg {
    Log,
    Identity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossScaleArg {
    /// Loss divided by the subject count.
    SubjectCount,
    /// Loss divided by twice the weight sum.
    HalfWeightSum,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AicScalingArg {
    /// Criterion on the raw log-likelihood.
    Unscaled,
    /// Log-likelihood divided by the subject count first.
    PerSubject,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyArg {
    Mse,
    Selection,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistributionArg {
    LogNormal,
    Weibull,
    LogLogistic,
}

impl From<DistributionArg> for DistributionKind {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::LogNormal => DistributionKind::LogNormal,
            DistributionArg::Weibull => DistributionKind::Weibull,
            DistributionArg::LogLogistic => DistributionKind::LogLogistic,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with `time` and `status` columns (status: 1 = event,
    /// 0 = censored); remaining numeric columns are covariates.
    #[arg(long)]
    input: PathBuf,

    /// Restriction time.
    #[arg(long)]
    tau: f64,

    /// Handling of records whose observed time reaches tau.
    #[arg(long, value_enum, default_value_t = RuleArg::AsRecorded)]
    tau_event_rule: RuleArg,

    /// Do not prepend the automatic intercept column.
    #[arg(long)]
    no_intercept: bool,
}

impl DataArgs {
    fn options(&self) -> DataOptions {
        DataOptions {
            input: self.input.clone(),
            tau: self.tau,
            tau_event_rule: match self.tau_event_rule {
                RuleArg::AsRecorded => TauEventRule::AsRecorded,
                RuleArg::TauReachedIsEvent => TauEventRule::TauReachedIsEvent,
            },
            add_intercept: !self.no_intercept,
        }
    }
}

#[derive(Args)]
struct LassoArgs {
    /// L1 tuning parameter.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,

    #[arg(long, value_enum, default_value_t = LinkArg::Log)]
    link: LinkArg,

    /// Penalize the intercept column too.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    penalize_intercept: bool,

    /// Center and scale covariates to weighted mean 0 / variance 1 before
    /// fitting.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    standardize: bool,

    #[arg(long, value_enum, default_value_t = LossScaleArg::SubjectCount)]
    loss_scale: LossScaleArg,

    /// Cross-validation fold count (cv-lasso only).
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,

    /// Comma-separated decreasing lambda path for cross-validation.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,

    /// Fold-assignment seed (cv-lasso only).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl LassoArgs {
    fn config(&self) -> LassoConfig {
        let mut config = LassoConfig {
            lambda: self.lambda,
            link: match self.link {
                LinkArg::Log => Link::Log,
                LinkArg::Identity => Link::Identity,
            },
            penalize_intercept: self.penalize_intercept,
            standardize: self.standardize,
            loss_scale: match self.loss_scale {
                LossScaleArg::SubjectCount => LossScale::SubjectCount,
                LossScaleArg::HalfWeightSum => LossScale::HalfWeightSum,
            },
            cv_folds: self.cv_folds,
            cv_seed: self.seed,
            ..LassoConfig::default()
        };
        if let Some(grid) = &self.lambda_grid {
            config.lambda_grid = grid.clone();
        }
        config
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Kaplan-Meier curve with censoring marks.
    Km(DataArgs),
    /// Unpenalized inverse-probability-weighted least squares.
    Tian {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = LinkArg::Log)]
        link: LinkArg,
    },
    /// Weighted L1-penalized least squares at a fixed lambda.
    Lasso {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        lasso: LassoArgs,
    },
    /// Weighted lasso with lambda chosen by K-fold cross-validation.
    CvLasso {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        lasso: LassoArgs,
    },
    /// Exhaustive AIC search over covariate subsets and AFT families.
    AicSearch {
        #[command(flatten)]
        data: DataArgs,
        /// Families to fit.
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = [DistributionArg::LogNormal, DistributionArg::Weibull, DistributionArg::LogLogistic])]
        distributions: Vec<DistributionArg>,
        /// Candidate subsets as semicolon-separated groups of comma-separated
        /// covariate indices (0 is the intercept when present), e.g.
        /// "0,2,3;0,3". Defaults to every subset containing column 0.
        #[arg(long)]
        subsets: Option<String>,
        #[arg(long, value_enum, default_value_t = AicScalingArg::Unscaled)]
        aic_scaling: AicScalingArg,
        /// Exclude the scale parameter from the AIC's parameter count.
        #[arg(long)]
        no_scale_in_k: bool,
    },
    /// Monte Carlo study on a generated scenario.
    Simulate {
        /// Scenario number, 1 through 6.
        #[arg(long)]
        scenario: usize,
        /// Comma-separated subject counts.
        #[arg(long, value_delimiter = ',', default_values_t = [200usize, 1000])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = StudyArg::Both)]
        study: StudyArg,
        /// Fixed lasso tuning parameter used inside the study.
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        /// Tune the study's lasso by cross-validation instead.
        #[arg(long)]
        cv: bool,
        /// Worker thread count (default: all cores). Results do not depend
        /// on this.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn parse_subsets(raw: &str) -> Result<Vec<Vec<usize>>, CliError> {
    raw.split(';')
        .map(|group| {
            group
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Input(format!("bad subset index `{tok}`")))
                })
                .collect()
        })
        .collect()
}

fn build_request(cli: &Cli) -> Result<AnalysisRequest, CliError> {
    let command = match &cli.command {
        Cmd::Km(data) => Command::Km(data.options()),
        Cmd::Tian { data, link } => Command::Tian(
            data.options(),
            match link {
                LinkArg::Log => Link::Log,
                LinkArg::Identity => Link::Identity,
            },
        ),
        Cmd::Lasso { data, lasso } => Command::Lasso(data.options(), lasso.config()),
        Cmd::CvLasso { data, lasso } => Command::CvLasso(data.options(), lasso.config()),
        Cmd::AicSearch { data, distributions, subsets, aic_scaling, no_scale_in_k } => {
            Command::AicSearch {
                data: data.options(),
                kinds: distributions.iter().map(|d| DistributionKind::from(*d)).collect(),
                subsets: subsets.as_deref().map(parse_subsets).transpose()?,
                convention: AicConvention {
                    count_scale_param: !no_scale_in_k,
                    scale_by_n: *aic_scaling == AicScalingArg::PerSubject,
                },
            }
        }
        Cmd::Simulate { scenario, n, reps, seed, study, lambda, cv, workers } => {
            Command::Simulate {
                scenario: *scenario,
                sizes: n.clone(),
                reps: *reps,
                seed: *seed,
                study: match study {
                    StudyArg::Mse => StudyKind::Mse,
                    StudyArg::Selection => StudyKind::Selection,
                    StudyArg::Both => StudyKind::Both,
                },
                lambda: *lambda,
                cv: *cv,
                workers: *workers,
            }
        }
    };
    let output = cli.out.as_ref().map(|p| {
        if p.is_relative() {
            match std::env::var_os("ISPW_OUT_DIR") {
                Some(dir) => PathBuf::from(dir).join(p),
                None => p.clone(),
            }
        } else {
            p.clone()
        }
    });
    Ok(AnalysisRequest {
        command,
        output,
        format: match cli.format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        },
    })
}

fn main() {
    let cli = Cli::parse();
    let outcome = build_request(&cli).and_then(|request| {
        let report = run(&request)?;
        let text = render(&report, request.format);
        match &request.output {
            Some(path) => std::fs::write(path, text.as_bytes())
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
            None => {
                println!("{text}");
                Ok(())
            }
        }
    });
    if let Err(err) = outcome {
        eprintln!("{}", err.to_json());
        std::process::exit(err.exit_code());
    }
}
