use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bheight::pipeline::{self, synth, PipelineConfig};
use bheight::raster::read_raster;
use bheight::{Error, Result};

#[derive(Parser)]
#[command(name = "bh", version, about = "Building height estimation from raster stacks and footprints")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    buffer_m: Option<f64>,
    /// Moving-window size in meters; 0 disables smoothing.
    #[arg(long)]
    window_m: Option<f64>,
    /// Number of features to select.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(v) = self.buffer_m {
            cfg.buffer_m = v;
        }
        if let Some(v) = self.window_m {
            cfg.window_m = v;
        }
        if let Some(v) = self.k {
            cfg.selection.k = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.n_trees {
            cfg.forest.n_trees = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build feature rasters from the configured stacks.
    Features(Common),
    /// Assemble samples, select features and fit the forest.
    Train(Common),
    /// Predict a building height raster.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to `<out_dir>/model.json`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Keep predictions off building footprints too.
        #[arg(long)]
        unmasked: bool,
    },
    /// Object-level accuracy of a prediction raster against reference heights.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Prediction raster; defaults to `<out_dir>/height.bhgr`.
        #[arg(long)]
        prediction: Option<PathBuf>,
    },
    /// R² summaries of several model families over repeated splits.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated labels; all families when omitted.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[arg(long, default_value_t = 30)]
        n_splits: usize,
    },
    /// Train and evaluate with buffer and window set to each candidate.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 30.0, 50.0, 80.0, 100.0])]
        candidates: Vec<f64>,
    },
    /// Per-region building statistics from a prediction raster.
    Aggregate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        prediction: Option<PathBuf>,
    },
    /// Write a synthetic city with a ready-to-run config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 450)]
        n_buildings: usize,
    },
    /// Dump a raster as `row,col,x,y,value` CSV, skipping nodata.
    DumpCsv { raster: PathBuf, out: PathBuf },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    use std::io::Write;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Features(c) => {
            let cfg = c.load()?;
            let f = pipeline::cmd_features(&cfg)?;
            println!("{} features written to {}", f.len(), cfg.features_dir.display());
        }
        Cmd::Train(c) => {
            let cfg = c.load()?;
            let out = pipeline::cmd_train(&cfg)?;
            println!("selected: {}", out.model.features.join(", "));
            print_json(&out.training_eval)?;
        }
        Cmd::Predict { common, model, unmasked } => {
            let cfg = common.load()?;
            let model = model.unwrap_or_else(|| cfg.out_dir.join("model.json"));
            let path = pipeline::cmd_predict(&cfg, &model, unmasked)?;
            println!("{}", path.display());
        }
        Cmd::Evaluate { common, prediction } => {
            let cfg = common.load()?;
            let p = prediction.unwrap_or_else(|| cfg.out_dir.join("height.bhgr"));
            print_json(&pipeline::cmd_evaluate(&cfg, &p)?)?;
        }
        Cmd::Compare { common, models, n_splits } => {
            let cfg = common.load()?;
            let t = pipeline::cmd_compare(&cfg, &models, n_splits)?;
            println!("{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "model", "min", "q1", "median", "mean", "q3", "max");
            for r in &t.rows {
                let s = r.r2;
                println!(
                    "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                    r.model, s.min, s.q1, s.median, s.mean, s.q3, s.max
                );
            }
        }
        Cmd::Sweep { common, candidates } => {
            let cfg = common.load()?;
            for r in pipeline::cmd_sweep(&cfg, &candidates)? {
                match (&r.report, &r.error) {
                    (Some(rep), _) => println!("{:>6} m  r2 {:?}  mse {:.4}", r.value_m, rep.r2, rep.mse),
                    (None, Some(e)) => println!("{:>6} m  error: {e}", r.value_m),
                    _ => {}
                }
            }
        }
        Cmd::Aggregate { common, prediction } => {
            let cfg = common.load()?;
            let p = prediction.unwrap_or_else(|| cfg.out_dir.join("height.bhgr"));
            print_json(&pipeline::cmd_aggregate(&cfg, &p)?)?;
        }
        Cmd::Synth { out, seed, size, n_buildings } => {
            let params = synth::SynthParams {
                seed,
                size,
                n_buildings,
                ..Default::default()
            };
            let city = synth::synth_generate(&params)?;
            synth::write_city(&city, &out)?;
            println!("{}", out.join("config.json").display());
        }
        Cmd::DumpCsv { raster, out } => {
            let g = read_raster(&raster)?;
            let geom = *g.geometry();
            let mut w = csv::Writer::from_path(&out)?;
            w.write_record(["row", "col", "x", "y", "value"])?;
            for r in 0..geom.rows {
                for c in 0..geom.cols {
                    if let Some(v) = g.valid_at(geom.index(r, c)) {
                        let (x, y) = geom.center(r, c);
                        w.write_record([r.to_string(), c.to_string(), x.to_string(), y.to_string(), v.to_string()])?;
                    }
                }
            }
            w.flush().map_err(|e| Error::Io { path: out, source: e })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
