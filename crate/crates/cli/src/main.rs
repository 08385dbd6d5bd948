use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Arg, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};

use anomix::encoder::{load_params, save_params};
use anomix::evaluator::{auc, roc_curve, write_roc, write_summary, RunSummary};
use anomix::graph::{load_graph, save_attributes, save_edges, save_labels};
use anomix::injector::inject;
use anomix::pipeline::{self, dump_ego_nets, prepare_graph, write_sweep, RunConfig, CONFIG_KEYS};
use anomix::scorer::{read_scores, score_all, write_scores};
use anomix::trainer::{train, write_loss_history};

#[derive(Parser)]
#[command(name = "anomix", version, about = "Graph anomaly detection with label-guided mixing")]
struct Cli {
    /// `key = value` config file; flags and ANOMIX_* variables override it.
    #[arg(long, global = true, env = "ANOMIX_CONFIG")]
    config: Option<PathBuf>,

    /// Worker threads (0 = all cores); 1 is the strict sequential mode.
    #[arg(long, global = true, default_value_t = 0, env = "ANOMIX_THREADS")]
    threads: usize,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Inject anomalies and write edges.txt, attrs.csv and labels.csv.
    Inject {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train and write params.bin, loss.csv and config.txt.
    Train {
        /// Write sampled ego-nets as JSON lines before training.
        #[arg(long)]
        dump_egos: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score every node with trained parameters and write scores.csv.
    Score {
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compute AUC and the ROC curve of a scores file.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Whole pipeline; prints the AUC.
    Run {
        #[arg(long)]
        dump_egos: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Rerun the pipeline over values of one parameter; writes `<param>,auc` CSV.
    Sweep {
        /// One of alpha, beta, r, gamma, sample_budget.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

/// One optional flag per config key, e.g. `--batch-size` / `ANOMIX_BATCH_SIZE`.
#[derive(Debug, Clone, Default)]
struct ConfigArgs {
    overrides: Vec<(String, String)>,
}

impl FromArgMatches for ConfigArgs {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let overrides = CONFIG_KEYS
            .iter()
            .filter_map(|&k| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
            .collect();
        Ok(Self { overrides })
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}

impl Args for ConfigArgs {
    fn augment_args(mut cmd: Command) -> Command {
        for &key in CONFIG_KEYS {
            cmd = cmd.arg(
                Arg::new(key)
                    .long(key.replace('_', "-"))
                    .env(format!("ANOMIX_{}", key.to_uppercase()))
                    .value_name("VALUE")
                    .help(format!("override `{key}`")),
            );
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

fn resolve(file: Option<&Path>, args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match file {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for (k, v) in &args.overrides {
        cfg.set(k, v).with_context(|| format!("--{}", k.replace('_', "-")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let p = dir.join("config.txt");
    std::fs::write(&p, cfg.to_kv_string()).with_context(|| format!("writing {}", p.display()))
}

fn execute(cli: &Cli) -> Result<()> {
    let file = cli.config.as_deref();
    match &cli.command {
        Cmd::Inject { cfg } => {
            let cfg = resolve(file, cfg)?;
            let graph = load_graph(cfg.edge_path()?, cfg.attr_path()?, None).context("load")?;
            let graph = inject(&graph, &cfg.injection()).context("inject")?;
            let dir = out_dir(&cfg)?;
            save_edges(&graph, dir.join("edges.txt"))?;
            save_attributes(&graph, dir.join("attrs.csv"))?;
            save_labels(&graph, dir.join("labels.csv"))?;
            write_config(&cfg, &dir)?;
            println!(
                "injected {} anomalies into {} nodes -> {}",
                graph.anomalies().len(),
                graph.num_nodes(),
                dir.display()
            );
        }
        Cmd::Train { dump_egos, cfg } => {
            let cfg = resolve(file, cfg)?;
            let graph = prepare_graph(&cfg)?;
            if let Some(p) = dump_egos {
                dump_ego_nets(&graph, &cfg, cfg.batch_size, p).context("dump")?;
            }
            let eligible = (0..graph.num_nodes()).filter(|&i| !graph.is_revealed(i)).count();
            let out = train(&graph, &cfg.sampler(), &cfg.mixing(), &cfg.training(eligible)).context("train")?;
            let dir = out_dir(&cfg)?;
            save_params(&out.params, dir.join("params.bin"))?;
            write_loss_history(&out.history, dir.join("loss.csv"))?;
            write_config(&cfg, &dir)?;
            if let Some(last) = out.history.last() {
                println!("final l_joint {:.6}", last.loss.l_joint);
            }
        }
        Cmd::Score { params, cfg } => {
            let cfg = resolve(file, cfg)?;
            let graph = prepare_graph(&cfg)?;
            let params = load_params(params).context("load params")?;
            let scores = score_all(&graph, &params, &cfg.sampler(), &cfg.scoring()).context("score")?;
            let dir = out_dir(&cfg)?;
            write_scores(&scores, dir.join("scores.csv"))?;
            write_config(&cfg, &dir)?;
            println!(
                "scored {} nodes -> {}",
                scores.scores.len(),
                dir.join("scores.csv").display()
            );
        }
        Cmd::Eval { scores, cfg } => {
            let start = std::time::Instant::now();
            let cfg = resolve(file, cfg)?;
            let graph = prepare_graph(&cfg)?;
            let values = read_scores(scores)?;
            let labels = graph.labels().context("graph has no labels")?;
            if values.len() != labels.len() {
                bail!("{} scores for {} nodes", values.len(), labels.len());
            }
            let value = auc(&values, labels).context("eval")?;
            let roc = roc_curve(&values, labels).context("eval")?;
            let dir = out_dir(&cfg)?;
            write_roc(&roc, dir.join("roc.csv"))?;
            let summary = RunSummary {
                auc: value,
                seed: cfg.seed,
                wall_clock_secs: start.elapsed().as_secs_f64(),
                stage_secs: Default::default(),
                num_nodes: graph.num_nodes(),
                num_anomalies: graph.anomalies().len(),
                config: cfg.to_map(),
            };
            write_summary(&summary, dir.join("summary.json"))?;
            println!("AUC {:.4}", value * 100.0);
        }
        Cmd::Run { dump_egos, cfg } => {
            let cfg = resolve(file, cfg)?;
            if let Some(p) = dump_egos {
                let graph = prepare_graph(&cfg)?;
                dump_ego_nets(&graph, &cfg, cfg.batch_size, p).context("dump")?;
            }
            let out = pipeline::run(&cfg)?;
            println!("AUC {:.4}", out.auc * 100.0);
        }
        Cmd::Sweep { param, values, cfg } => {
            let cfg = resolve(file, cfg)?;
            let rows = pipeline::sweep(&cfg, param, values)?;
            let dir = out_dir(&cfg)?;
            let path = dir.join(format!("sweep_{param}.csv"));
            write_sweep(&rows, param, &path)?;
            write_config(&cfg, &dir)?;
            println!("{param},auc");
            for r in &rows {
                println!("{},{}", r.value, r.auc);
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    anomix::with_threads(cli.threads, || execute(&cli))?
}
