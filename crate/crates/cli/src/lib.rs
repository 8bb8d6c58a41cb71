//! Subcommands of the `hetlink` binary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hetlink_core::evaluator::{
    adjacency_heatmap, cm_histogram, common_neighbor_stat, evaluate_checkpoint, heatmap_tsv,
    predictions_tsv, score_pairs, CmHistogram, NeighborType, RepeatReport,
};
use hetlink_core::explain::{explain_pair, mu_hierarchy, ExportFormat};
use hetlink_core::graph_store::{
    build_graph, load_dataset, GraphOptions, HeteroGraph, NodeType, DEFAULT_TEXT_HALF_WIDTH,
};
use hetlink_core::model::Checkpoint;
use hetlink_core::split_bench::{load_mda, SplitConfig, SplitManifest};
use hetlink_core::trainer::{train, Phase, RepeatSummary, RunConfig, TrainOutcome};

#[derive(Debug, Parser)]
#[command(
    name = "hetlink",
    version,
    about = "miRNA-disease link prediction on a heterogeneous graph"
)]
pub struct Cli {
    /// Seed for splitting and training; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for independent training repeats.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output directory; default input paths are resolved against it too.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a dataset directory and write `graph.bin`.
    BuildGraph {
        #[arg(long)]
        data: PathBuf,
        /// Half width of hashed text features when no embedding file exists.
        #[arg(long, default_value_t = DEFAULT_TEXT_HALF_WIDTH)]
        half_width: usize,
    },
    /// Time-split `mda.tsv` into `manifest.json`.
    Split {
        #[arg(long)]
        mda: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 2019)]
        y1: i32,
        #[arg(long, default_value_t = 2020)]
        y2: i32,
        /// Negatives per test positive.
        #[arg(long, default_value_t = 100)]
        test_ratio: usize,
    },
    /// Train one or more repeats and write checkpoints and histories.
    Train(TrainArgs),
    /// Score the test partitions and write `report.json`.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        /// One or more checkpoints; metrics are averaged across them.
        #[arg(long, num_args = 1.., required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        recall: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        heatmap_bins: usize,
    },
    /// Score given pairs, or every candidate of one miRNA or disease.
    Predict(PredictArgs),
    /// Attention subgraph around a pair and the μ hierarchy.
    Explain {
        #[arg(long, num_args = 1.., required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        mirna: String,
        #[arg(long)]
        disease: String,
        /// `json`, `dot` or `both`.
        #[arg(long, default_value = "both")]
        format: String,
    },
    /// Common-neighbor histograms and degree heatmap of a split.
    Stats {
        #[command(flatten)]
        inputs: Inputs,
        /// `miRNA`, `disease`, `PCG` or `all`; repeatable.
        #[arg(long, default_value = "all")]
        tau: Vec<NeighborType>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Defaults to `<out>/graph.bin`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Defaults to `<out>/manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_phase)]
    pub phase: Option<Phase>,
    /// Ablation preset 0 to 4.
    #[arg(long)]
    pub condition: Option<u8>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// `MIRNA:DISEASE` identifier pairs; repeatable.
    #[arg(long)]
    pub pair: Vec<String>,
    /// Rank every miRNA against this disease.
    #[arg(long, conflicts_with = "mirna")]
    pub disease: Option<String>,
    /// Rank every disease against this miRNA.
    #[arg(long)]
    pub mirna: Option<String>,
    #[arg(long)]
    pub top: Option<usize>,
    /// Marks pairs already known in train or validation.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Drops known pairs from the ranking; needs `--manifest`.
    #[arg(long, requires = "manifest")]
    pub exclude_known: bool,
}

fn parse_phase(s: &str) -> std::result::Result<Phase, String> {
    match s {
        "select" => Ok(Phase::Select),
        "final" => Ok(Phase::Final),
        _ => Err(format!("expected `select` or `final`, got `{s}`")),
    }
}

fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

impl TrainArgs {
    /// Layers flag overrides over `base`, then applies the preset and
    /// validates.
    pub fn resolve(&self, base: RunConfig, seed: Option<u64>) -> Result<RunConfig> {
        let (args, mut c) = (self, base);
        if let Some(preset) = args.condition {
            c.condition = Some(preset);
        }
        if let Some(p) = args.phase {
            c.train.phase = p;
        }
        if let Some(r) = args.repeats {
            c.train.repeats = r;
        }
        if let Some(e) = args.max_epochs {
            c.train.max_epochs = e;
        }
        if let Some(lr) = args.lr {
            c.train.adam.lr = lr;
        }
        if let Some(s) = seed {
            c.train.seed = s;
        }
        let c = c.resolved()?;
        if !c.model.in_tuned_grid() {
            log::warn!(
                "model dim {} / heads {} is outside the tuned grid (dim 32..128, heads 1..8)",
                c.model.dim,
                c.model.heads
            );
        }
        Ok(c)
    }
}

impl Cli {
    fn path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join(default))
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.out_file(name)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}

fn load_graph(path: &Path) -> Result<HeteroGraph> {
    HeteroGraph::load(path).with_context(|| format!("loading graph {}", path.display()))
}

fn load_manifest(path: &Path) -> Result<SplitManifest> {
    SplitManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::BuildGraph { data, half_width } => build_graph_cmd(cli, data, *half_width),
        Command::Split {
            mda,
            graph,
            y1,
            y2,
            test_ratio,
        } => {
            let graph = load_graph(&cli.path(graph, "graph.bin"))?;
            let (records, dropped) = load_mda(mda, graph.nodes())?;
            let config = SplitConfig {
                y1: *y1,
                y2: *y2,
                seed: cli.seed.unwrap_or(0),
                negative_ratio_test: *test_ratio,
            };
            let manifest = SplitManifest::build(
                &records,
                graph.nodes().counts(),
                graph.nodes().fingerprint(),
                dropped,
                config,
            )?;
            let path = cli.out_file("manifest.json")?;
            manifest.save(&path)?;
            log::info!(
                "split {} / {} / {} positives into {}",
                manifest.train.positives.len(),
                manifest.val.positives.len(),
                manifest.test.positives.len(),
                path.display()
            );
            Ok(())
        }
        Command::Train(args) => train_cmd(cli, args),
        Command::Evaluate {
            inputs,
            checkpoint,
            recall,
            heatmap_bins,
        } => evaluate_cmd(cli, inputs, checkpoint, recall, *heatmap_bins),
        Command::Predict(args) => predict_cmd(cli, args),
        Command::Explain {
            checkpoint,
            graph,
            mirna,
            disease,
            format,
        } => {
            let formats = match format.as_str() {
                "both" => vec![ExportFormat::Json, ExportFormat::Dot],
                f => vec![f.parse::<ExportFormat>()?],
            };
            let base = load_graph(&cli.path(graph, "graph.bin"))?;
            let checkpoints = checkpoint
                .iter()
                .map(|p| load_checkpoint(p))
                .collect::<Result<Vec<_>>>()?;
            let first = &checkpoints[0];
            let graph = first.graph_for(&base)?;
            let x = explain_pair(&first.model, &graph, mirna, disease)?;
            for f in formats {
                let name = match f {
                    ExportFormat::Json => "explain.json",
                    ExportFormat::Dot => "explain.dot",
                };
                x.export(&cli.out_file(name)?, f)?;
            }
            let mu = mu_hierarchy(&checkpoints.iter().map(|c| &c.model).collect::<Vec<_>>())?;
            cli.write("mu_report.json", &mu.to_json()?)?;
            cli.write("mu_report.tsv", &mu.to_tsv())?;
            println!("{}\t{}\t{}", mirna, disease, x.score);
            Ok(())
        }
        Command::Stats { inputs, tau, bins } => stats_cmd(cli, inputs, tau, *bins),
    }
}

fn build_graph_cmd(cli: &Cli, data: &Path, half_width: usize) -> Result<()> {
    let ds = load_dataset(data, half_width)
        .with_context(|| format!("loading dataset {}", data.display()))?;
    // The stored graph carries every input edge kind; training derives the
    // configured view from it.
    let graph = build_graph(ds.nodes, ds.features, &ds.edges, GraphOptions::default())?;
    let path = cli.out_file("graph.bin")?;
    graph.save(&path)?;
    cli.write("load_report.json", &to_json(&ds.report)?)?;
    log::info!(
        "{} nodes, {} edges in {}",
        graph.nodes().counts().iter().sum::<usize>(),
        graph.edge_count(),
        path.display()
    );
    Ok(())
}

fn train_cmd(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let base = match &args.config {
        Some(p) => load_run_config(p)?,
        None => RunConfig::default(),
    };
    let config = args.resolve(base, cli.seed)?;
    let base = load_graph(&cli.path(&args.inputs.graph, "graph.bin"))?;
    let manifest = load_manifest(&cli.path(&args.inputs.manifest, "manifest.json"))?;
    let seeds: Vec<u64> = (0..config.train.repeats as u64)
        .map(|i| config.train.seed.wrapping_add(i))
        .collect();

    // Repeats are independent and individually seeded, so running them on
    // several threads does not change any output.
    let threads = cli.threads.max(1);
    let mut outcomes: Vec<TrainOutcome> = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(threads) {
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| {
                    let (base, manifest, config) = (&base, &manifest, &config);
                    s.spawn(move || train(base, manifest, config.model, &config.train, seed))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .collect()
        });
        for r in results {
            outcomes.push(r?);
        }
    }

    cli.write("run_config.json", &to_json(&config)?)?;
    let mut runs = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        let dir = cli.out_file(&format!("run{i}"))?;
        o.save(&dir)?;
        runs.push(dir.join("checkpoint.bin"));
    }
    let summary = RepeatSummary::of(&outcomes.iter().map(|o| &o.history).collect::<Vec<_>>());
    cli.write("train_summary.json", &to_json(&summary)?)?;
    for (r, path) in summary.runs.iter().zip(&runs) {
        println!(
            "seed {}\tepochs {}\tbest {}\t{}",
            r.seed,
            r.epochs,
            r.best_epoch,
            path.display()
        );
    }
    Ok(())
}

fn evaluate_cmd(
    cli: &Cli,
    inputs: &Inputs,
    checkpoints: &[PathBuf],
    recall: &[f64],
    bins: usize,
) -> Result<()> {
    let base = load_graph(&cli.path(&inputs.graph, "graph.bin"))?;
    let manifest = load_manifest(&cli.path(&inputs.manifest, "manifest.json"))?;
    let mut reports = Vec::new();
    for (i, path) in checkpoints.iter().enumerate() {
        let ckpt = load_checkpoint(path)?;
        let (report, scored) = evaluate_checkpoint(&ckpt, &base, &manifest, recall)?;
        let name = if checkpoints.len() == 1 {
            "predictions.tsv".to_string()
        } else {
            format!("predictions_{i}.tsv")
        };
        cli.write(&name, &predictions_tsv(&scored, base.nodes()))?;
        if i == 0 {
            cli.write("region_table.tsv", &report.region_table())?;
        }
        reports.push(report);
    }
    let report = RepeatReport::new(reports)?;
    cli.write("report.json", &report.to_json()?)?;
    let grid = adjacency_heatmap(&manifest.test.positives, &manifest.region_map(), bins)?;
    cli.write("adjacency_heatmap.tsv", &heatmap_tsv(&grid))?;
    for key in ["balanced.auc", "balanced.aupr", "balanced.accuracy"] {
        println!("{key}\t{:.4}", report.mean[key]);
    }
    Ok(())
}

fn predict_cmd(cli: &Cli, args: &PredictArgs) -> Result<()> {
    let base = load_graph(&cli.path(&args.graph, "graph.bin"))?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let nodes = base.nodes();
    let mut pairs = Vec::new();
    for p in &args.pair {
        let Some((m, d)) = p.split_once(':') else {
            bail!("pair `{p}` is not MIRNA:DISEASE");
        };
        pairs.push((
            nodes.require(NodeType::Mirna, m)?,
            nodes.require(NodeType::Disease, d)?,
        ));
    }
    if let Some(d) = &args.disease {
        let d = nodes.require(NodeType::Disease, d)?;
        pairs.extend((0..nodes.count(NodeType::Mirna)).map(|m| (m, d)));
    }
    if let Some(m) = &args.mirna {
        let m = nodes.require(NodeType::Mirna, m)?;
        pairs.extend((0..nodes.count(NodeType::Disease)).map(|d| (m, d)));
    }
    if pairs.is_empty() {
        bail!("nothing to score: give --pair, --disease or --mirna");
    }
    let known: BTreeSet<(usize, usize)> = match &args.manifest {
        Some(p) => load_manifest(p)?.known_positives().into_iter().collect(),
        None => BTreeSet::new(),
    };
    if args.exclude_known {
        pairs.retain(|p| !known.contains(p));
    }
    let scores = score_pairs(&ckpt, &base, &pairs)?;
    let mut ranked: Vec<((usize, usize), f64)> = pairs.into_iter().zip(scores).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if let Some(k) = args.top {
        ranked.truncate(k);
    }
    let mut s =
        String::from("rank\tmirna_id\tmirna_name\tdisease_id\tdisease_name\tscore\tknown\n");
    for (i, ((m, d), score)) in ranked.iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{score}\t{}",
            i + 1,
            nodes.id(NodeType::Mirna, *m),
            nodes.display_name(NodeType::Mirna, *m),
            nodes.id(NodeType::Disease, *d),
            nodes.display_name(NodeType::Disease, *d),
            u8::from(known.contains(&(*m, *d)))
        );
    }
    cli.write("predict.tsv", &s)?;
    print!("{s}");
    Ok(())
}

#[derive(Serialize)]
struct CmStats {
    positives: CmHistogram,
    negatives: CmHistogram,
}

#[derive(Serialize)]
struct Stats {
    node_counts: [usize; 3],
    edge_count: usize,
    known_positives: usize,
    mirna_median: usize,
    disease_median: usize,
    /// Test-set common-neighbor histograms per neighbor type.
    cm: BTreeMap<String, CmStats>,
}

fn stats_cmd(cli: &Cli, inputs: &Inputs, taus: &[NeighborType], bins: usize) -> Result<()> {
    let base = load_graph(&cli.path(&inputs.graph, "graph.bin"))?;
    let manifest = load_manifest(&cli.path(&inputs.manifest, "manifest.json"))?;
    let known = manifest.known_positives();
    // Neighborhoods see every association known before the test period.
    let graph = base.with_mda_edges(&known)?;
    let test = manifest.balanced_test();
    let mut cm = BTreeMap::new();
    for &tau in taus {
        let pos = common_neighbor_stat(&graph, &test.positives, tau);
        let neg = common_neighbor_stat(&graph, &test.negatives, tau);
        cm.insert(
            tau.as_str().to_string(),
            CmStats {
                positives: cm_histogram(&pos, bins)?,
                negatives: cm_histogram(&neg, bins)?,
            },
        );
    }
    let stats = Stats {
        node_counts: base.nodes().counts(),
        edge_count: base.edge_count(),
        known_positives: known.len(),
        mirna_median: manifest.regions.mirna_median,
        disease_median: manifest.regions.disease_median,
        cm,
    };
    cli.write("stats.json", &to_json(&stats)?)?;
    let grid = adjacency_heatmap(&known, &manifest.region_map(), bins)?;
    cli.write("adjacency_heatmap.tsv", &heatmap_tsv(&grid))?;
    Ok(())
}
