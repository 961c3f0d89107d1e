use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use lemp::experiment::{
    budget_sweep, build_provider, export_report, export_sweep, ingest, probe, rank_edges, run_lemp, run_plain,
    synth_dataset, write_bundle, ExperimentConfig, ProviderKind, SynthKind, SynthSpec,
};
use lemp::models::ModelKind;
use lemp::providers::{
    estimate_cost, query_connection_analysis, BudgetLedger, PairCache, PromptTemplate, Clock, RateLimit,
    RateLimiter, SystemClock, TokenUsage, VirtualClock,
};
use lemp::{Error, Result};

#[derive(Parser)]
#[command(name = "lemp", version, about = "LM-enhanced message passing on text-attributed graphs")]
struct Cli {
    /// Overrides the training seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and artefacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Categorise a dataset with MLP and GCN probes.
    Probe { dir: PathBuf },
    /// Train one model without enhancement.
    Train {
        dir: PathBuf,
        #[arg(long, default_value = "gcn")]
        model: ModelKind,
    },
    /// Rank edges as the first selection round would.
    Select {
        dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        k: usize,
    },
    /// Fetch connection analyses for a list of pairs.
    Enhance(EnhanceArgs),
    /// Run the full active enhancement loop.
    Run(RunArgs),
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Report token usage and cost recorded in a cache file.
    Cost { cache: PathBuf },
    /// Rewrite a cache file with one line per pair.
    Compact { cache: PathBuf },
}

#[derive(Args)]
struct EnhanceArgs {
    /// Dataset supplying node texts (and features for the synthetic provider).
    dir: PathBuf,
    /// CSV of `u,v` pairs.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    qpm: Option<u32>,
    #[arg(long)]
    tpm: Option<u64>,
    #[arg(long)]
    cache: PathBuf,
    #[arg(long, default_value = "synthetic")]
    provider: ProviderKind,
}

#[derive(Args)]
struct RunArgs {
    dir: PathBuf,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    interval: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, default_value = "synthetic")]
    provider: ProviderKind,
    /// Persistent pair cache; in-memory when omitted.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Comma-separated budgets to sweep instead of a single run.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<usize>,
    /// Attach a probe verdict to the report.
    #[arg(long)]
    with_probe: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "heterophilic")]
    kind: SynthKind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    p_intra: Option<f64>,
    #[arg(long)]
    p_inter: Option<f64>,
    #[arg(long)]
    feature_noise: Option<f64>,
    #[arg(long)]
    feature_dim: Option<usize>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io { path: parent.into(), source: e })?;
    }
    let f = File::create(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush().map_err(|e| Error::Io { path: path.into(), source: e })
}

/// The synthetic oracle answers instantly, so its limiter runs on simulated
/// time instead of sleeping through the windows.
fn limiter(rate: RateLimit, provider: ProviderKind) -> Result<RateLimiter> {
    let clock: Arc<dyn Clock> = match provider {
        ProviderKind::Synthetic => Arc::new(VirtualClock::new()),
        ProviderKind::Http => Arc::new(SystemClock::default()),
    };
    RateLimiter::new(rate, clock)
}

fn read_pairs(path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (Some(a), Some(b)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Dataset(format!("{}: expected u,v per row", path.display())));
        };
        match (a.parse(), b.parse()) {
            (Ok(u), Ok(v)) => pairs.push((u, v)),
            _ if pairs.is_empty() => continue, // header row
            _ => return Err(Error::Dataset(format!("{}: bad pair `{a},{b}`", path.display()))),
        }
    }
    Ok(pairs)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = out_dir(cli);
    match &cli.cmd {
        Cmd::Probe { dir } => {
            let bundle = ingest(dir)?;
            let report = probe(&bundle, &cfg.train, cfg.probe_seeds)?;
            for r in &report.rows {
                println!("{}-{}  {:.4}", r.layers, r.model, r.mean_test_acc);
            }
            println!("verdict: {}", report.verdict);
            write_json(&out.join("probe.json"), &report)
        }
        Cmd::Train { dir, model } => {
            let bundle = ingest(dir)?;
            let report = if *model == ModelKind::Lemp {
                let provider = build_provider(ProviderKind::Synthetic, &bundle, &cfg)?;
                let lim = limiter(cfg.rate, ProviderKind::Synthetic)?;
                let no_budget = ExperimentConfig { budget: Some(0), ..cfg.clone() };
                run_lemp(&bundle, &no_budget, provider.as_ref(), &mut PairCache::in_memory(), &lim)?
            } else {
                run_plain(&bundle, *model, &cfg)?
            };
            println!("{}: best val {:.4} at epoch {}, test {:.4}", model, report.best_val_acc, report.best_epoch, report.test_acc);
            export_report(&report, &out)
        }
        Cmd::Select { dir, k } => {
            let bundle = ingest(dir)?;
            let (lambda, ranked) = rank_edges(&bundle, &cfg, *k)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let path = out.join("selected.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["u", "v", "score_wf", "score_wb", "lambda", "fused"])?;
            for e in &ranked {
                w.write_record([
                    e.u.to_string(),
                    e.v.to_string(),
                    e.score_wf.to_string(),
                    e.score_wb.to_string(),
                    lambda.to_string(),
                    e.fused.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
            println!("wrote {} edges to {}", ranked.len(), path.display());
            Ok(())
        }
        Cmd::Enhance(a) => {
            let bundle = ingest(&a.dir)?;
            let pairs = read_pairs(&a.pairs)?;
            let template = PromptTemplate::by_id(a.template.as_deref().unwrap_or(&bundle.domain))?;
            let mut rate = cfg.rate;
            if let Some(q) = a.qpm {
                rate.queries_per_minute = q;
            }
            if let Some(t) = a.tpm {
                rate.tokens_per_minute = t;
            }
            let lim = limiter(rate, a.provider)?;
            let provider = build_provider(a.provider, &bundle, &cfg)?;
            let mut cache = PairCache::open(&a.cache)?;
            let mut ledger = BudgetLedger::new(a.budget.unwrap_or(pairs.len()), cfg.prices);
            let texts = bundle.node_texts();
            let outcome =
                query_connection_analysis(&pairs, &texts, template, provider.as_ref(), &mut cache, &mut ledger, &lim)?;
            println!(
                "{} pairs, {} provider calls, {} paid, cost ${:.6}",
                outcome.messages.len(),
                outcome.provider_calls,
                outcome.paid_pairs,
                ledger.cost()
            );
            Ok(())
        }
        Cmd::Run(a) => {
            let bundle = ingest(&a.dir)?;
            let mut cfg = cfg.clone();
            if a.budget.is_some() {
                cfg.budget = a.budget;
            }
            if let Some(i) = a.interval {
                cfg.interval = i;
            }
            if let Some(b) = a.batch {
                cfg.batch = b;
            }
            let provider = build_provider(a.provider, &bundle, &cfg)?;
            let lim = limiter(cfg.rate, a.provider)?;
            if !a.sweep.is_empty() {
                let rows = budget_sweep(&bundle, &cfg, &a.sweep, provider.as_ref(), &lim)?;
                for r in &rows {
                    println!("budget {:>6}  test {:.4}  cost ${:.6}", r.budget, r.test_acc, r.cost_usd);
                }
                std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
                return export_sweep(&rows, out.join("sweep.csv"));
            }
            let mut cache = match &a.cache {
                Some(p) => PairCache::open(p)?,
                None => PairCache::in_memory(),
            };
            let mut report = run_lemp(&bundle, &cfg, provider.as_ref(), &mut cache, &lim)?;
            if a.with_probe {
                report.probe = Some(probe(&bundle, &cfg.train, cfg.probe_seeds)?);
            }
            println!(
                "lemp: test {:.4}, {} pairs enhanced over {} rounds, cost ${:.6}",
                report.test_acc,
                report.budget.selected,
                report.rounds.len(),
                report.budget.cost_usd
            );
            export_report(&report, &out)
        }
        Cmd::Synth(a) => {
            let d = SynthSpec::default();
            let (p_intra, p_inter) = match a.kind {
                SynthKind::Heterophilic => (d.p_intra, d.p_inter),
                SynthKind::Homophilic => (d.p_inter, d.p_intra),
            };
            let spec = SynthSpec {
                kind: a.kind,
                n: a.n.unwrap_or(d.n),
                classes: a.classes.unwrap_or(d.classes),
                p_intra: a.p_intra.unwrap_or(p_intra),
                p_inter: a.p_inter.unwrap_or(p_inter),
                feature_noise: a.feature_noise.unwrap_or(d.feature_noise),
                feature_dim: a.feature_dim.unwrap_or(d.feature_dim),
                seed: cli.seed.unwrap_or(d.seed),
                ..d
            };
            let bundle = synth_dataset(&spec)?;
            write_bundle(&bundle, &out)?;
            println!(
                "wrote {} nodes, {} edges to {}",
                bundle.graph.n(),
                bundle.graph.num_edges(),
                out.display()
            );
            Ok(())
        }
        Cmd::Cost { cache } => {
            let cache = PairCache::open(cache)?;
            let usage: Vec<TokenUsage> = cache
                .records()
                .iter()
                .map(|m| TokenUsage { prompt_tokens: m.prompt_tokens, completion_tokens: m.completion_tokens })
                .collect();
            let total = usage.iter().fold(TokenUsage::default(), |acc, u| TokenUsage {
                prompt_tokens: acc.prompt_tokens + u.prompt_tokens,
                completion_tokens: acc.completion_tokens + u.completion_tokens,
            });
            println!(
                "{} pairs, {} prompt tokens, {} completion tokens, ${:.6}",
                usage.len(),
                total.prompt_tokens,
                total.completion_tokens,
                estimate_cost(&usage, &cfg.prices)?
            );
            Ok(())
        }
        Cmd::Compact { cache } => {
            let mut c = PairCache::open(cache)?;
            let before = c.line_count();
            c.compact()?;
            println!("{} lines -> {}", before, c.line_count());
            Ok(())
        }
    }
}
