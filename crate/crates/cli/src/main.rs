use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gpgreeks::experiment::{
    self, benchmark_for, build_design, convention_for, evaluate_surface, fit_config, market_model, resolve,
    run_experiment, run_hedge, run_online_demo, trend_spec, training_set, ExperimentConfig, OutputLayout, Scale,
    TestGridChoice, Variant,
};
use gpgreeks::greeks::{credible_band, write_greeks_csv};
use gpgreeks::hedging::write_outcomes_csv;
use gpgreeks::io::write_json;
use gpgreeks::{Error, Gp, Result};

#[derive(Parser)]
#[command(name = "gpgreeks", version, about = "Gaussian process surrogates for option Greeks and Delta hedging")]
struct Cli {
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Paper)]
    scale: ScaleArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Fast,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Fast => Scale::Fast,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Bs,
    Lv,
}

#[derive(Args)]
struct ConfigArg {
    /// Preset name or path to a TOML configuration.
    config: String,
}

#[derive(Subcommand)]
enum Command {
    /// Build the design, simulate training data and fit the base surrogate.
    Fit(ConfigArg),
    /// Evaluate Greeks of a saved model on a test grid or at one site.
    Greeks {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = GridArg::Bs)]
        grid: GridArg,
        /// Calendar time of a single site.
        #[arg(long, requires = "s")]
        t: Option<f64>,
        /// Spot of a single site.
        #[arg(long, requires = "t")]
        s: Option<f64>,
    },
    /// Delta-hedge with a saved model on the configuration's hedging paths.
    Hedge {
        config: String,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run a preset or configuration file.
    Experiment(ConfigArg),
    /// Run model variants on a base configuration.
    Variants {
        config: String,
        /// Comma-separated variant names; defaults to M1..M6.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Stream a fresh path through rank-one updates of the surrogate.
    OnlineDemo {
        #[arg(default_value = "fig6")]
        config: String,
    },
}

fn load(cli: &Cli, name: &str) -> Result<ExperimentConfig> {
    let mut cfg = resolve(name)?.scaled(cli.scale.into());
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    OutputLayout::new(cfg, cli.out.as_deref()).dir
}

fn fit_base(cfg: &ExperimentConfig, dir: &Path) -> Result<Gp> {
    let model = market_model(cfg.case_study);
    let conv = convention_for(cfg.case_study, &model);
    let design = build_design(cfg, &model)?;
    design.write_csv(&dir.join("design.csv"))?;
    let ts = training_set(cfg, &model, &design, conv)?;
    let gp = gpgreeks::gp::fit(ts, cfg.model.kernel, trend_spec(cfg.model.trend, &model), cfg.model.noise, &fit_config(cfg))?;
    gp.save(&dir.join("model.json"))?;
    Ok(gp)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => {
            let cfg = load(cli, &a.config)?;
            let dir = out_dir(cli, &cfg).join("fit");
            let gp = fit_base(&cfg, &dir)?;
            println!(
                "fitted {} on {} points: lengthscales {:?}, process variance {:.6e}, noise {:?}, log-likelihood {:.4}",
                gp.kernel().family(),
                gp.training_set().len(),
                gp.kernel().lengthscales(),
                gp.kernel().process_variance(),
                gp.noise().constant_variance(),
                gp.log_likelihood()
            );
            println!("wrote {}", dir.display());
        }
        Command::Greeks { model, grid, t, s } => {
            let gp = Gp::load(model)?;
            if let (Some(t), Some(s)) = (t, s) {
                let x0 = gp.convention().from_calendar(*t);
                for est in [
                    gpgreeks::greeks::price(&gp, x0, *s)?,
                    gpgreeks::greeks::delta(&gp, x0, *s)?,
                    gpgreeks::greeks::theta(&gp, x0, *s)?,
                ] {
                    let band = credible_band(&est, 0.95)?;
                    println!(
                        "{:<6} {:>12.6} [{:.6}, {:.6}]",
                        est.kind.as_str(),
                        est.value,
                        band.lower,
                        band.upper
                    );
                }
                return Ok(());
            }
            let choice = match grid {
                GridArg::Bs => TestGridChoice::BlackScholes,
                GridArg::Lv => TestGridChoice::LocalVol,
            };
            let g = choice.grid();
            let rows = evaluate_surface(&gp, &g)?.rows(&g)?;
            let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("out")).join("greeks.csv");
            write_greeks_csv(&path, &rows)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::Hedge { config, model } => {
            let cfg = load(cli, config)?;
            let gp = Gp::load(model)?;
            let layout = OutputLayout::new(&cfg, cli.out.as_deref());
            let bench = benchmark_for(&cfg, &layout.cache_dir)?;
            let report = run_hedge(&gp, &market_model(cfg.case_study), &bench, &cfg.hedge, cfg.seed)?;
            let dir = layout.dir.join("hedge");
            write_outcomes_csv(&dir.join("hedge.csv"), &report.outcomes)?;
            write_json(&dir.join("summary.json"), &report.summary)?;
            if let Some(c) = report.summary.total_error {
                println!("E_T mean {:.5} variance {:.5}", c.mean, c.variance);
            }
            println!("mu_E {:.6} V_E {:.6}", report.mu_e, report.v_e);
            println!("wrote {}", dir.display());
        }
        Command::Experiment(a) => {
            let cfg = load(cli, &a.config)?;
            let report = run_experiment(&cfg, cli.out.as_deref())?;
            print_rows(&report);
        }
        Command::Variants { config, only } => {
            let mut cfg = load(cli, config)?;
            cfg.variants = if only.is_empty() {
                Variant::ALL.iter().map(|v| v.to_string()).collect()
            } else {
                only.clone()
            };
            cfg.validate()?;
            let report = run_experiment(&cfg, cli.out.as_deref())?;
            print_rows(&report);
        }
        Command::OnlineDemo { config } => {
            let cfg = load(cli, config)?;
            let r = run_online_demo(&cfg, cli.out.as_deref())?;
            println!(
                "{} streamed points: mean |error| original {:.5} online {:.5}; mean band width original {:.5} online {:.5}",
                r.n_steps, r.mean_abs_error_original, r.mean_abs_error_online, r.mean_width_original, r.mean_width_online
            );
            if let Some(s) = &r.sticky {
                println!(
                    "sticky hedge: {} trades of {} rebalances, E_T {:.4} (surrogate {:.4}, benchmark {:.4})",
                    s.n_trades, s.n_rebalances, s.error_sticky, s.error_surrogate, s.error_bench
                );
            }
        }
    }
    Ok(())
}

fn print_rows(report: &experiment::ExperimentReport) {
    println!("{:<44} {:>8} {:>8} {:>7} {:>9} {:>8}", "run", "RIMSE", "MAD", "Cvr95", "Bias", "Var(E_T)");
    for r in &report.rows {
        let name = match &r.variant {
            Some(v) => format!("{v} {}", r.label),
            None => r.label.clone(),
        };
        let var = r.var_et.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<44} {:>8.4} {:>8.4} {:>7.4} {:>9.5} {:>8}",
            name, r.rimse, r.mad, r.cvr95, r.bias, var
        );
    }
    println!("wrote {}", report.dir.join("metrics.json").display());
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_numerical() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
