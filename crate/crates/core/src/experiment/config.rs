use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::designs::DesignBox;
use crate::error::{Error, Result};
use crate::gp::NoiseSpec;
use crate::kernels::KernelFamily;
use crate::metrics::TestGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStudy {
    BlackScholes,
    LocalVolatility,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Halton,
    Grid,
    Path,
}

impl DesignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Halton => "halton",
            DesignKind::Grid => "grid",
            DesignKind::Path => "path",
        }
    }
}

/// How path designs pick their initial prices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathStarts {
    Normal { mean: f64, sd: f64 },
    Levels { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub kind: DesignKind,
    /// Number of sampled (non-virtual) inputs. Grid designs use `n_t × n_s`.
    pub n: usize,
    #[serde(default)]
    pub n_t: Option<usize>,
    #[serde(default)]
    pub n_s: Option<usize>,
    #[serde(rename = "box")]
    pub bbox: DesignBox,
    /// Recording interval of path designs; `n / (T / path_dt)` paths are used.
    #[serde(default = "default_path_dt")]
    pub path_dt: f64,
    pub path_starts: PathStarts,
    pub virtual_itm: usize,
    pub virtual_otm: usize,
    pub virtual_maturity: usize,
}

fn default_path_dt() -> f64 {
    0.04
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Inner Monte Carlo draws per training input.
    pub n_inner: usize,
    /// Use exact prices instead of Monte Carlo (Black–Scholes only).
    #[serde(default)]
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrendChoice {
    Constant,
    Linear,
    /// Black–Scholes reference price with a fixed volatility.
    Reference { volatility: f64 },
}

impl TrendChoice {
    pub fn label(&self) -> String {
        match self {
            TrendChoice::Constant => "constant".into(),
            TrendChoice::Linear => "linear".into(),
            TrendChoice::Reference { volatility } => format!("bs{volatility}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kernel: KernelFamily,
    pub trend: TrendChoice,
    pub noise: NoiseSpec,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeConfig {
    pub enabled: bool,
    pub n_paths: usize,
    pub dt: f64,
    /// Simulation steps per rebalance interval.
    pub fine_steps: usize,
    pub start_mean: f64,
    pub start_sd: f64,
    #[serde(default)]
    pub w0: InitialWealth,
}

/// Initial wealth of each hedge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialWealth {
    /// Benchmark price at the initial state.
    #[default]
    Benchmark,
    /// Surrogate posterior mean price at the initial state.
    Surrogate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestGridChoice {
    BlackScholes,
    LocalVol,
}

impl TestGridChoice {
    pub fn grid(self) -> TestGrid {
        match self {
            TestGridChoice::BlackScholes => TestGrid::black_scholes(),
            TestGridChoice::LocalVol => TestGrid::local_vol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldConfig {
    pub n_paths: usize,
    /// Seed of the benchmark simulation, separate from the run seed so the
    /// benchmark can be shared across replications.
    pub seed: u64,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

/// Lists of values to sweep; an empty list keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub kernels: Vec<KernelFamily>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub n_inner: Vec<usize>,
    #[serde(default)]
    pub design_kinds: Vec<DesignKind>,
    /// Path recording intervals (path designs only).
    #[serde(default)]
    pub path_dt: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    /// Initial price of the streamed path.
    pub s0: f64,
    /// Sampling interval of the streamed path.
    pub dt: f64,
    /// Paths for the benchmark Delta at each streamed site.
    pub gold_paths: usize,
    /// Credible level of the sticky hedge on the coarse grid.
    pub sticky_level: f64,
    /// Stop after this many streamed observations.
    #[serde(default)]
    pub max_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub case_study: CaseStudy,
    pub seed: u64,
    pub design: DesignConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub hedge: HedgeConfig,
    pub gold: GoldConfig,
    /// Defaults to the grid of the case study.
    #[serde(default)]
    pub test_grid: Option<TestGridChoice>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Model variants (`M1` … `M6`) applied to the base configuration.
    #[serde(default)]
    pub variants: Vec<String>,
    #[serde(default)]
    pub online: Option<OnlineConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Fast,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Scale::Fast),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::Config(format!("unknown scale '{other}'"))),
        }
    }
}

/// Caps used by the fast scale.
pub const FAST_MAX_N: usize = 200;
pub const FAST_MAX_INNER: usize = 500;
pub const FAST_MAX_HEDGE_PATHS: usize = 500;
pub const FAST_MAX_GOLD_PATHS: usize = 20_000;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let d = &self.design;
        if d.n == 0 && d.kind != DesignKind::Grid {
            return bad("design.n must be positive");
        }
        if d.kind == DesignKind::Grid && (d.n_t.unwrap_or(0) < 2 || d.n_s.unwrap_or(0) < 2) {
            return bad("grid designs need n_t >= 2 and n_s >= 2");
        }
        if !(d.bbox.t_min < d.bbox.t_max && d.bbox.s_min < d.bbox.s_max && d.bbox.s_min > 0.0) {
            return bad("design box must be non-degenerate with positive prices");
        }
        if !(d.path_dt > 0.0) {
            return bad("design.path_dt must be positive");
        }
        if self.data.n_inner < 2 && !self.data.exact {
            return bad("data.n_inner must be at least 2");
        }
        if self.data.exact && self.case_study == CaseStudy::LocalVolatility {
            return bad("exact prices are only available for the Black-Scholes case");
        }
        if self.model.restarts == 0 {
            return bad("model.restarts must be positive");
        }
        if let TrendChoice::Reference { volatility } = self.model.trend {
            if !(volatility > 0.0) {
                return bad("reference volatility must be positive");
            }
        }
        if self.hedge.enabled && (self.hedge.n_paths < 2 || !(self.hedge.dt > 0.0) || self.hedge.fine_steps == 0) {
            return bad("hedge needs n_paths >= 2, dt > 0 and fine_steps >= 1");
        }
        if self.gold.n_paths < 2 {
            return bad("gold.n_paths must be at least 2");
        }
        if let Some(o) = &self.online {
            if !(o.dt > 0.0 && o.s0 > 0.0 && o.gold_paths >= 2 && o.sticky_level > 0.0 && o.sticky_level <= 1.0) {
                return bad("online section has invalid values");
            }
        }
        for v in &self.variants {
            super::variants::Variant::parse(v)?;
        }
        Ok(())
    }

    /// Caps sizes at the fast scale; the paper scale leaves them unchanged.
    pub fn scaled(mut self, scale: Scale) -> Self {
        if scale == Scale::Fast {
            let cap_n = |n: usize| n.min(FAST_MAX_N);
            self.design.n = cap_n(self.design.n);
            self.sweep.n.iter_mut().for_each(|n| *n = cap_n(*n));
            self.sweep.n.dedup();
            self.data.n_inner = self.data.n_inner.min(FAST_MAX_INNER);
            self.sweep.n_inner.iter_mut().for_each(|n| *n = (*n).min(FAST_MAX_INNER));
            self.sweep.n_inner.dedup();
            self.hedge.n_paths = self.hedge.n_paths.min(FAST_MAX_HEDGE_PATHS);
            self.gold.n_paths = self.gold.n_paths.min(FAST_MAX_GOLD_PATHS);
            if let Some(o) = self.online.as_mut() {
                o.gold_paths = o.gold_paths.min(FAST_MAX_GOLD_PATHS / 4);
            }
        }
        self
    }

    /// One configuration per point of the sweep, each with an empty sweep.
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let s = &self.sweep;
        let mut out = Vec::new();
        for seed in axis(&s.seeds, self.seed) {
            for kind in axis(&s.design_kinds, self.design.kind) {
                let dts = if kind == DesignKind::Path {
                    axis(&s.path_dt, self.design.path_dt)
                } else {
                    vec![self.design.path_dt]
                };
                for dt in dts {
                    for n in axis(&s.n, self.design.n) {
                        for n_inner in axis(&s.n_inner, self.data.n_inner) {
                            for kernel in axis(&s.kernels, self.model.kernel) {
                                let mut c = self.clone();
                                c.sweep = SweepConfig::default();
                                c.seed = seed;
                                c.design.kind = kind;
                                c.design.path_dt = dt;
                                c.design.n = n;
                                c.data.n_inner = n_inner;
                                c.model.kernel = kernel;
                                out.push(c);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn test_grid_choice(&self) -> TestGridChoice {
        self.test_grid.unwrap_or(match self.case_study {
            CaseStudy::BlackScholes => TestGridChoice::BlackScholes,
            CaseStudy::LocalVolatility => TestGridChoice::LocalVol,
        })
    }

    /// Short identifier of a single (expanded) run.
    pub fn run_label(&self) -> String {
        let mut label = format!(
            "{}_{}_n{}_ninner{}_{}",
            self.model.kernel,
            self.design.kind.as_str(),
            self.design.n,
            self.data.n_inner,
            self.model.trend.label()
        );
        if self.design.kind == DesignKind::Path {
            label.push_str(&format!("_dt{}", self.design.path_dt));
        }
        label.push_str(&format!("_seed{}", self.seed));
        label
    }
}
