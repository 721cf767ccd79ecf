//! Command-line front end. `dispatch` runs one invocation against the
//! process environment; `dispatch_with` takes everything explicitly so tests
//! can drive it in-process.

mod config;
mod diagnose;

pub use config::{resolve, CliConfig, Format, Layer, CONFIG_FILE, ENV_PREFIX};
pub use diagnose::{parse_assertion, render_text as render_diagnosis, DiagnoseReport};

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::adapt::{em_prior_adjust, kernel_mean_matching, EmOptions, KmmOptions};
use crate::data::{
    empirical_prior, read_csv_feature_names, read_csv_path, read_weights_csv, write_weights_csv, Causality, Dataset,
    DomainPair, LabelSpace,
};
use crate::density::{fit_kde, js_divergence, kl_divergence, mmd, renyi_divergence, DivergenceEstimate};
use crate::error::{Error, Result};
use crate::ingest::{ingest, IngestTarget};
use crate::learners::{evaluate, train, Hyperparameters, LearnerKind, TrainedModel, TrainingInfo};
use crate::repro::{self, ReproTarget};
use crate::stats::{feature_shift_screen, ks_two_sample, label_shift_test, mmd_permutation_test};

#[derive(Parser, Debug)]
#[command(name = "shiftscope", version, about = "Diagnose dataset shift and adapt to it")]
struct Cli {
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Root seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Significance level.
    #[arg(long, global = true)]
    level: Option<f64>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Log filter, e.g. `info` or `shiftscope=debug`.
    #[arg(long, global = true)]
    verbosity: Option<String>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Divergence between source and target feature distributions.
    Divergence(DivergenceArgs),
    /// Two-sample hypothesis tests.
    #[command(subcommand)]
    Test(TestCmd),
    /// Corrective reweighting.
    #[command(subcommand)]
    Adapt(AdaptCmd),
    /// Fit a classifier and save it as JSON.
    Train(TrainArgs),
    /// Score a saved classifier on labeled data.
    Eval(EvalArgs),
    /// Interactive scenario diagnosis.
    Diagnose(DiagnoseArgs),
    /// Regenerate a reproduction table or experiment.
    Repro(ReproArgs),
    /// Normalize raw UCI files into the dataset CSV format.
    Ingest(IngestArgs),
    /// Run the HTTP diagnosis service.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct PairArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeasureArg {
    Kl,
    Js,
    Renyi,
    Mmd,
}

#[derive(Args, Debug)]
struct DivergenceArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum)]
    measure: MeasureArg,
    /// Rényi order.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// RBF width for MMD; median heuristic when absent.
    #[arg(long)]
    gamma: Option<f64>,
    /// Feature column to compare; required for KDE measures on d > 1.
    #[arg(long)]
    column: Option<String>,
    /// Report the unbiased MMD statistic instead of the biased one.
    #[arg(long)]
    unbiased: bool,
}

#[derive(Subcommand, Debug)]
enum TestCmd {
    /// Kolmogorov-Smirnov on one column, or a Bonferroni screen over all.
    Ks {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        column: Option<String>,
    },
    /// Chi-squared test on label counts.
    Label {
        #[command(flatten)]
        pair: PairArgs,
    },
    /// MMD permutation test on the joint feature law.
    Mmd {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
    },
}

#[derive(Subcommand, Debug)]
enum AdaptCmd {
    /// EM estimate of the target class prior.
    Prior {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
    /// Kernel mean matching weights for the source rows.
    Covariate {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1000.0)]
        upper_bound: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        weights_out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    kind: LearnerKind,
    #[arg(long)]
    out: PathBuf,
    /// CSV with a `weight` column aligned to the data rows.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// XtoY, YtoX or Unknown; prompted when absent.
    #[arg(long)]
    causality: Option<Causality>,
    /// `claim=yes|no|unknown[:justification]`; repeatable. Prompted for
    /// claims not given and not settled by a test.
    #[arg(long = "assert")]
    assertions: Vec<String>,
    #[arg(long, default_value = "logistic")]
    learner: LearnerKind,
}

#[derive(Args, Debug)]
struct ReproArgs {
    /// prior-table, kl-table, general-benign, heart, breast, transformation or all.
    #[arg(value_parser = ["prior-table", "kl-table", "general-benign", "heart", "breast", "transformation", "all"])]
    target: String,
    /// Directory for `<name>.json` and `<name>.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(value_parser = ["heart", "breast"])]
    target: String,
    /// Directory, file or http(s) base URL holding the raw UCI files.
    #[arg(long)]
    from: String,
    /// Data directory; the configured one when absent.
    #[arg(long)]
    to: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Bearer token; falls back to SHIFTSCOPE_TOKEN.
    #[arg(long)]
    token: Option<String>,
    #[arg(long, default_value_t = 50)]
    max_upload_mb: u64,
}

/// Working directory and environment of one invocation.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub cwd: PathBuf,
    pub env: HashMap<String, String>,
}

impl Context {
    pub fn from_process() -> Self {
        Self {
            cwd: std::env::current_dir().unwrap_or_default(),
            env: std::env::vars().collect(),
        }
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.cwd.join(p)
        }
    }
}

pub struct Io<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// Runs against the real process; returns the exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let mut io = Io {
        input: &mut input,
        out: &mut out,
        err: &mut err,
    };
    dispatch_with(argv, &Context::from_process(), &mut io)
}

/// Exit 0 on success, 1 on a domain error (one `error:` line on `err`),
/// 2 on a usage error (usage text on `err`).
pub fn dispatch_with<I, S>(argv: I, ctx: &Context, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(io.out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(io.err, "{text}");
                    2
                }
            };
        }
    };
    match run(cli, ctx, io) {
        Ok(code) => code,
        // Reader went away, e.g. `| head`.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let _ = writeln!(io.err, "error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

fn run(cli: Cli, ctx: &Context, io: &mut Io<'_>) -> Result<i32> {
    let flags = Layer {
        data_dir: cli.data_dir.clone(),
        level: cli.level,
        seed: cli.seed,
        format: cli.json.then_some(Format::Json),
        verbosity: cli.verbosity.clone(),
    };
    let mut cfg = resolve(flags, Layer::from_env(&ctx.env)?, Layer::from_file(&ctx.cwd)?)?;
    cfg.data_dir = ctx.path(&cfg.data_dir);
    let _ = env_logger::Builder::new()
        .parse_filters(&cfg.verbosity)
        .target(env_logger::Target::Stderr)
        .try_init();
    if cli.show_config {
        let text = toml::to_string(&cfg).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        emit(io, &cfg, &cfg, || text)?;
        return Ok(0);
    }
    let Some(command) = cli.command else {
        use clap::CommandFactory;
        write!(io.err, "{}", Cli::command().render_usage())?;
        writeln!(io.err)?;
        return Ok(2);
    };
    match command {
        Command::Divergence(a) => divergence(a, ctx, &cfg, io),
        Command::Test(t) => test(t, ctx, &cfg, io),
        Command::Adapt(a) => adapt(a, ctx, &cfg, io),
        Command::Train(a) => train_cmd(a, ctx, &cfg, io),
        Command::Eval(a) => {
            let model = TrainedModel::from_json(&std::fs::read_to_string(ctx.path(&a.model))?)?;
            let report = evaluate(&model, &read_csv_path(&ctx.path(&a.data))?)?;
            emit(io, &cfg, &report, || format!("accuracy {:.4} on {} rows\n", report.accuracy, report.n_eval))
        }
        Command::Diagnose(a) => diagnose_cmd(a, ctx, &cfg, io),
        Command::Repro(a) => repro_cmd(a, ctx, &cfg, io),
        Command::Ingest(a) => {
            let target: IngestTarget = a.target.parse()?;
            let to = a.to.map(|p| ctx.path(&p)).unwrap_or_else(|| cfg.data_dir.clone());
            let summary = ingest(target, &a.from, &to)?;
            emit(io, &cfg, &summary, || {
                summary
                    .files
                    .iter()
                    .map(|f| format!("{}: {} rows kept, {} dropped\n", f.path.display(), f.rows_kept, f.rows_dropped))
                    .collect()
            })
        }
        Command::Serve(a) => {
            let token = a
                .token
                .or_else(|| ctx.env.get(&format!("{ENV_PREFIX}TOKEN")).cloned())
                .ok_or_else(|| Error::InvalidArgument("serve needs --token or SHIFTSCOPE_TOKEN".into()))?;
            let service = crate::service::ServiceConfig {
                data_dir: cfg.data_dir.clone(),
                token,
                max_upload_bytes: a.max_upload_mb * 1024 * 1024,
                seed: cfg.seed,
                level: cfg.level,
            };
            let addr = format!("{}:{}", a.bind, a.port);
            writeln!(io.err, "listening on http://{addr}/api/v1")?;
            tokio::runtime::Runtime::new()?.block_on(crate::service::serve(&addr, service))?;
            Ok(0)
        }
    }
}

fn emit<T: Serialize>(io: &mut Io<'_>, cfg: &CliConfig, value: &T, text: impl FnOnce() -> String) -> Result<i32> {
    match cfg.format {
        Format::Json => writeln!(io.out, "{}", serde_json::to_string_pretty(value)?)?,
        Format::Text => write!(io.out, "{}", text())?,
    }
    Ok(0)
}

fn load_pair(p: &PairArgs, ctx: &Context) -> Result<(Dataset, Dataset)> {
    Ok((read_csv_path(&ctx.path(&p.source))?, read_csv_path(&ctx.path(&p.target))?))
}

/// Index of feature `name` in the source CSV header.
fn column_index(path: &Path, name: &str) -> Result<usize> {
    read_csv_feature_names(path)?
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| Error::InvalidArgument(format!("no feature column `{name}` in {}", path.display())))
}

fn select(ds: Dataset, column: Option<usize>) -> Dataset {
    match column {
        Some(j) => ds.select_column(j),
        None => ds,
    }
}

fn estimate_text(e: &DivergenceEstimate) -> String {
    format!("{:?} {} -> {}: {} ({:?})\n", e.measure, e.direction.0, e.direction.1, e.value, e.method)
}

fn divergence(a: DivergenceArgs, ctx: &Context, cfg: &CliConfig, io: &mut Io<'_>) -> Result<i32> {
    let (s, t) = load_pair(&a.pair, ctx)?;
    let col = a.column.as_deref().map(|c| column_index(&ctx.path(&a.pair.source), c)).transpose()?;
    if let Some(j) = col {
        if j >= t.d() {
            return Err(Error::DimensionMismatch(s.d(), t.d()));
        }
    }
    let (s, t) = (select(s.without_labels(), col), select(t.without_labels(), col));
    let est = match a.measure {
        MeasureArg::Mmd => {
            let stat = mmd(&s, &t, a.gamma)?;
            let all = stat.estimates(s.name(), t.name());
            let pick = if a.unbiased { all.get(1) } else { all.first() };
            pick.cloned().ok_or_else(|| Error::InsufficientSamples { needed: 2, got: s.n().min(t.n()) })?
        }
        kde_measure => {
            let (p, q) = (fit_kde(&s, None)?, fit_kde(&t, None)?);
            match kde_measure {
                MeasureArg::Kl => kl_divergence(&p, &q)?,
                MeasureArg::Js => js_divergence(&p, &q)?,
                _ => renyi_divergence(&p, &q, a.alpha)?,
            }
        }
    };
    emit(io, cfg, &est, || estimate_text(&est))
}

fn test(t: TestCmd, ctx: &Context, cfg: &CliConfig, io: &mut Io<'_>) -> Result<i32> {
    match t {
        TestCmd::Ks { pair, column } => {
            let (s, tg) = load_pair(&pair, ctx)?;
            match column {
                Some(c) => {
                    let j = column_index(&ctx.path(&pair.source), &c)?;
                    if j >= tg.d() {
                        return Err(Error::DimensionMismatch(s.d(), tg.d()));
                    }
                    let r = ks_two_sample(&s.column(j).to_vec(), &tg.column(j).to_vec())?;
                    emit(io, cfg, &r, || format!("KS D = {:.4}, p = {:.4e}\n", r.statistic, r.p_value))
                }
                None if s.d() == 1 && tg.d() == 1 => {
                    let r = ks_two_sample(&s.column(0).to_vec(), &tg.column(0).to_vec())?;
                    emit(io, cfg, &r, || format!("KS D = {:.4}, p = {:.4e}\n", r.statistic, r.p_value))
                }
                None => {
                    let space = LabelSpace::infer(&[&s])?;
                    let pair = DomainPair::new(s, tg.without_labels(), space)?;
                    let screen = feature_shift_screen(&pair, cfg.level)?;
                    emit(io, cfg, &screen, || format!("{} (level {} / d)\n", screen.verdict, screen.level))
                }
            }
        }
        TestCmd::Label { pair } => {
            let (s, tg) = load_pair(&pair, ctx)?;
            if !tg.is_labeled() {
                return Err(Error::TargetLabelsRequired);
            }
            let space = LabelSpace::infer(&[&s, &tg])?;
            let r = label_shift_test(&s.encoded_labels(&space)?, &tg.encoded_labels(&space)?, space.len())?;
            emit(io, cfg, &r, || format!("chi-squared = {:.4}, p = {:.4e}\n", r.statistic, r.p_value))
        }
        TestCmd::Mmd { pair, permutations } => {
            let (s, tg) = load_pair(&pair, ctx)?;
            let seed = crate::rng::derive_seed(cfg.seed, "cli/test-mmd");
            let r = mmd_permutation_test(&s.without_labels(), &tg.without_labels(), permutations, seed)?;
            emit(io, cfg, &r, || format!("MMD^2 = {:.6}, p = {:.4}\n", r.statistic, r.p_value))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WeightsWritten {
    path: PathBuf,
    n: usize,
}

fn write_weights(ctx: &Context, out: Option<PathBuf>, weights: &[f64]) -> Result<Option<WeightsWritten>> {
    let Some(p) = out else { return Ok(None) };
    let path = ctx.path(&p);
    write_weights_csv(weights, std::fs::File::create(&path)?)?;
    Ok(Some(WeightsWritten { path, n: weights.len() }))
}

fn adapt(a: AdaptCmd, ctx: &Context, cfg: &CliConfig, io: &mut Io<'_>) -> Result<i32> {
    match a {
        AdaptCmd::Prior {
            pair,
            model,
            tol,
            max_iter,
            weights_out,
        } => {
            let (s, t) = load_pair(&pair, ctx)?;
            let model = TrainedModel::from_json(&std::fs::read_to_string(ctx.path(&model))?)?;
            let space = &model.label_space;
            let source_prior = empirical_prior(&s, space)?;
            let post = model.predict_posterior(&t.without_labels())?;
            let r = em_prior_adjust(post.view(), &source_prior, EmOptions { max_iter, tol })?;
            let per_row = r.class_weights.expand(&s.encoded_labels(space)?)?;
            write_weights(ctx, weights_out, per_row.values())?;
            emit(io, cfg, &r, || {
                format!(
                    "estimated target prior {:?} after {} iterations (converged: {})\n",
                    r.estimated_target_prior, r.iterations, r.converged
                )
            })
        }
        AdaptCmd::Covariate {
            pair,
            gamma,
            upper_bound,
            epsilon,
            weights_out,
        } => {
            let (s, t) = load_pair(&pair, ctx)?;
            let space = LabelSpace::infer(&[&s])?;
            let pair = DomainPair::new(s, t.without_labels(), space)?;
            let r = kernel_mean_matching(
                &pair,
                KmmOptions {
                    gamma,
                    upper_bound,
                    epsilon,
                    ..KmmOptions::default()
                },
            )?;
            write_weights(ctx, weights_out, r.weights.values())?;
            emit(io, cfg, &r, || {
                format!(
                    "{} weights, gamma {:.4}, converged {} after {} iterations\n",
                    r.weights.len(),
                    r.gamma,
                    r.converged,
                    r.iterations
                )
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub out: PathBuf,
    pub kind: LearnerKind,
    pub labels: Vec<String>,
    pub seed: u64,
    pub training: TrainingInfo,
}

fn train_cmd(a: TrainArgs, ctx: &Context, cfg: &CliConfig, io: &mut Io<'_>) -> Result<i32> {
    let data = read_csv_path(&ctx.path(&a.data))?;
    let space = LabelSpace::infer(&[&data])?;
    let weights = a
        .weights
        .map(|p| read_weights_csv(std::fs::File::open(ctx.path(&p))?))
        .transpose()?;
    let model = train(&data, &space, a.kind, Hyperparameters::for_kind(a.kind), weights.as_ref(), cfg.seed)?;
    let out = ctx.path(&a.out);
    std::fs::write(&out, model.to_json()?)?;
    let summary = TrainSummary {
        out,
        kind: a.kind,
        labels: space.labels().to_vec(),
        seed: cfg.seed,
        training: model.training.clone(),
    };
    emit(io, cfg, &summary, || {
        format!("{} model written to {}\n", summary.kind, summary.out.display())
    })
}

fn diagnose_cmd(a: DiagnoseArgs, ctx: &Context, cfg: &CliConfig, io: &mut Io<'_>) -> Result<i32> {
    let (s, t) = load_pair(&a.pair, ctx)?;
    let space = LabelSpace::infer(&[&s, &t])?;
    let pair = DomainPair::new(s, t, space)?;
    let preset = a.assertions.iter().map(|s| parse_assertion(s)).collect::<Result<Vec<_>>>()?;
    let mut prompter = diagnose::Prompter {
        input: &mut *io.input,
        prompt: &mut *io.err,
    };
    let report = diagnose::run(&pair, a.causality, preset, a.learner, cfg.seed, cfg.level, &mut prompter)?;
    emit(io, cfg, &report, || render_diagnosis(&report))
}

fn repro_cmd(a: ReproArgs, ctx: &Context, cfg: &CliConfig, io: &mut Io<'_>) -> Result<i32> {
    let targets: Vec<ReproTarget> = if a.target == "all" {
        ReproTarget::ALL.to_vec()
    } else {
        vec![a.target.parse()?]
    };
    let mut json = BTreeMap::new();
    let mut text = String::new();
    for target in &targets {
        let art = repro::run(*target, cfg.seed, Some(&cfg.data_dir))?;
        if let Some(dir) = &a.out {
            art.write_to(&ctx.path(dir))?;
        }
        json.insert(target.name().to_string(), serde_json::from_str::<serde_json::Value>(&art.json)?);
        text.push_str(&art.text);
        text.push('\n');
    }
    let value = if targets.len() == 1 {
        json.into_values().next().expect("one target")
    } else {
        serde_json::to_value(json)?
    };
    emit(io, cfg, &value, || text)
}
