use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use uavnoma::baselines::{self, static_hover_eval};
use uavnoma::config::Config;
use uavnoma::env::TraceWriter;
use uavnoma::error::{Error, Result};
use uavnoma::harness::{self, EpisodeRecord};
use uavnoma::manifest::RunManifest;
use uavnoma::nn::QNetwork;

#[derive(Parser, Debug)]
#[command(name = "uavnoma", version, about = "UAV placement and NOMA power allocation with deep Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory [default: $UAVNOMA_OUT/<command> or runs/<command>].
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweep and layouts.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Shorthand for train.episodes=N.
    #[arg(long, global = true)]
    episodes: Option<usize>,

    /// Steps per episode (train) or rollout length (eval, layouts, baseline).
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Checkpoint to evaluate.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,

    /// Dotted-path config overrides, e.g. train.episodes=2.
    #[arg(global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Train an agent; writes episodes.csv and model.bin.
    Train {
        /// Also stream every step to trace.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Greedy rollout of a checkpoint; writes eval.csv.
    Eval,
    /// One training run per minimum spectral efficiency; writes sweep.csv.
    Sweep,
    /// Compare two checkpoints over random layouts; writes layouts.csv.
    Layouts,
    /// Exhaustive grid search; writes oracle.csv.
    Oracle,
    /// Static hover at the initial point; writes baseline.csv.
    Baseline,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::Eval => "eval",
            Command::Sweep => "sweep",
            Command::Layouts => "layouts",
            Command::Oracle => "oracle",
            Command::Baseline => "baseline",
        }
    }
}

fn overrides(cli: &Cli) -> Vec<String> {
    let mut o = cli.overrides.clone();
    if let Some(s) = cli.seed {
        o.push(format!("seed={s}"));
    }
    if let Some(e) = cli.episodes {
        o.push(format!("train.episodes={e}"));
    }
    if let Some(s) = cli.steps {
        let section = match cli.command {
            Command::Train { .. } | Command::Sweep => "train",
            Command::Eval => "eval",
            Command::Layouts => "layouts",
            Command::Baseline => "baseline",
            Command::Oracle => return o,
        };
        o.push(format!("{section}.steps={s}"));
    }
    o
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| {
        let root = std::env::var_os("UAVNOMA_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(cli.command.name())
    })
}

fn load_checkpoint(path: Option<&PathBuf>, what: &str) -> Result<QNetwork> {
    let p = path.ok_or_else(|| Error::Config(format!("{what}: no checkpoint given")))?;
    QNetwork::load(p)
}

fn progress(total: usize) -> impl FnMut(&EpisodeRecord) {
    let every = (total / 20).max(1);
    move |r: &EpisodeRecord| {
        if r.episode.is_multiple_of(every) || r.episode == total {
            eprintln!(
                "episode {:>5}/{total}  rate {:>10.4} Mbps  jain {:.3}  reward {:.4}",
                r.episode,
                r.mean_rate_bps / 1e6,
                r.mean_jain,
                r.mean_reward
            );
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::from_file(p, &overrides(cli))?,
        None => Config::from_str_with("[channel]\nspectrum = \"sub6\"\n", &overrides(cli))?,
    };
    let out = out_dir(cli);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let started = Instant::now();
    let mut manifest = RunManifest::new(cli.command.name(), cfg.train.seed, &cfg.snapshot, &out);
    let file = |name: &str, m: &mut RunManifest| -> PathBuf {
        m.outputs.push(name.to_string());
        out.join(name)
    };

    match cli.command {
        Command::Train { trace } => {
            let sc = &cfg.train.scenario;
            let mut tw = if trace {
                Some(TraceWriter::create(&file("trace.csv", &mut manifest), sc.n_clusters(), sc.n_users())?)
            } else {
                None
            };
            let res = harness::train_with(&cfg.train, tw.as_mut(), progress(cfg.train.episodes))?;
            if let Some(tw) = tw {
                tw.finish().map_err(|e| Error::io(out.join("trace.csv"), e))?;
            }
            harness::write_episodes_csv(&file("episodes.csv", &mut manifest), &res.records, cfg.window)?;
            res.policy.save(&file("model.bin", &mut manifest))?;
            let (r, j) = harness::final_metrics(&res.records, cfg.window);
            println!("R_e_tot {r} bps  J_e_f {j}");
        }
        Command::Eval => {
            let ck = cli.checkpoint.as_ref().or(cfg.eval.checkpoint.as_ref());
            let net = load_checkpoint(ck, "eval")?;
            let m = harness::evaluate(&net, &cfg.train.scenario, &cfg.train.weights, cfg.eval.steps, cfg.train.seed)?;
            harness::write_eval_csv(&file("eval.csv", &mut manifest), &m)?;
            println!(
                "avg sum rate {} bps  avg jain {}  satisfaction {}",
                m.avg_sum_rate, m.avg_jain, m.satisfaction
            );
        }
        Command::Sweep => {
            let pts = harness::rmin_sweep(&cfg.train, &cfg.sweep_points, cfg.window, cli.jobs)?;
            harness::write_sweep_csv(&file("sweep.csv", &mut manifest), &pts)?;
            for p in &pts {
                println!(
                    "R_min/W {:>4}  R_e_tot {} bps  satisfaction {}",
                    p.rmin_over_w, p.r_e_tot, p.satisfaction
                );
            }
        }
        Command::Layouts => {
            let a = load_checkpoint(cfg.layouts.checkpoint_a.as_ref(), "layouts.checkpoint_a")?;
            let b = load_checkpoint(cfg.layouts.checkpoint_b.as_ref(), "layouts.checkpoint_b")?;
            let s = harness::layout_sweep(
                &a,
                &b,
                &cfg.train.scenario,
                &cfg.train.weights,
                cfg.layouts.n_layouts,
                cfg.layouts.steps,
                cfg.train.seed,
                cli.jobs,
            )?;
            harness::write_layouts_csv(&file("layouts.csv", &mut manifest), &s)?;
            let i = s.improvement_pct;
            println!(
                "a wins {:.3}  improvement % min {} median {} mean {} max {}",
                s.win_fraction, i.min, i.median, i.mean, i.max
            );
        }
        Command::Oracle => {
            let o = cfg
                .oracle
                .as_ref()
                .ok_or_else(|| Error::Config("oracle: missing [oracle] section".into()))?;
            let mut best = baselines::grid_search_oracle(&cfg.train.scenario, &o.grid)?;
            if o.refine {
                best = baselines::refine_oracle(&cfg.train.scenario, &o.grid, &best)?;
            }
            baselines::write_oracle_csv(&file("oracle.csv", &mut manifest), &best)?;
            println!("best {:?} alphas {:?} objective {}", best.uav, best.alphas, best.objective);
        }
        Command::Baseline => {
            let b = &cfg.baseline;
            let m = static_hover_eval(&cfg.train.scenario, b.alpha, b.steps, cfg.train.seed)?;
            baselines::write_baseline_csv(&file("baseline.csv", &mut manifest), &m, b.alpha, b.steps)?;
            println!("avg sum rate {} bps  avg jain {}", m.avg_sum_rate, m.avg_jain);
        }
    }
    manifest.duration_secs = started.elapsed().as_secs_f64();
    manifest.write()?;
    eprintln!("wrote {}", Path::new(&out).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
