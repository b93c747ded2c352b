use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use explab::binary::BinaryExample;
use explab::sim::{self, SimConfig};
use explab::sw::{self, SwCurvePoint};
use explab::{degeneracy, rate_thresholds, ExtReal, JointSource, RateThresholds};

mod output;

use output::{fmt_ext, fmt_num, fmt_opt, write_atomic};

#[derive(Parser)]
#[command(name = "explab", version, about = "Slepian-Wolf and channel error exponents")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep a rate grid and write every exponent column as CSV.
    Curve(CurveArgs),
    /// Run a simulation described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rate thresholds of the source viewed as input plus channel.
    Thresholds {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Limit of E_v(H(X|Y) + r) / r^2 as r -> 0.
    SecondOrder {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Largest correct-decoding probability of variable-rate codes.
    Pcmax {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        rate: f64,
        /// Read the rate in bits instead of nats.
        #[arg(long)]
        bits: bool,
    },
}

#[derive(Args)]
struct SourceArgs {
    /// JSON source: {"alphabet_x": n, "alphabet_y": m, "joint": [[...]]}.
    #[arg(long, conflicts_with_all = ["p", "tau"])]
    source: Option<PathBuf>,
    /// Binary preset: crossover P_{X|Y}(1|0) = P_{X|Y}(0|1).
    #[arg(long, requires = "tau")]
    p: Option<f64>,
    /// Binary preset: P_Y(0).
    #[arg(long, requires = "p")]
    tau: Option<f64>,
}

impl SourceArgs {
    fn load(&self) -> Result<JointSource> {
        match (&self.source, self.p, self.tau) {
            (Some(path), _, _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(JointSource::from_json(&text)?)
            }
            (None, Some(p), Some(tau)) => Ok(BinaryExample::new(p, tau)?.source()),
            _ => bail!("give either --source FILE or both --p and --tau"),
        }
    }
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Lowest rate; defaults to H(X|Y).
    #[arg(long)]
    r_min: Option<f64>,
    /// Highest rate; defaults to ln |X|.
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Comma-separated subset of columns; all by default.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// Rates and exponents in bits instead of nats (input and output).
    #[arg(long)]
    bits: bool,
    #[arg(long)]
    out: PathBuf,
}

const COLUMNS: [&str; 10] = [
    "fixed_sp",
    "fixed_rc",
    "fixed_ex",
    "fixed_correct",
    "var_lower",
    "var_upper_sp",
    "var_upper_sl",
    "var_upper_env",
    "var_exact",
    "flag",
];

fn cell(p: &SwCurvePoint, col: &str, scale: f64) -> String {
    match col {
        "fixed_sp" => fmt_ext(p.fixed_sp, scale),
        "fixed_rc" => fmt_ext(p.fixed_rc, scale),
        "fixed_ex" => fmt_ext(p.fixed_ex, scale),
        "fixed_correct" => fmt_ext(p.fixed_correct, scale),
        "var_lower" => fmt_ext(p.var_lower, scale),
        "var_upper_sp" => fmt_ext(p.var_upper_sp, scale),
        "var_upper_sl" => fmt_opt(p.var_upper_sl, scale),
        "var_upper_env" => fmt_opt(p.var_upper_env, scale),
        "var_exact" => fmt_opt(p.var_exact, scale),
        "flag" => {
            let mut f = Vec::new();
            if p.fixed_sp_exception {
                f.push("fixed_sp_exception");
            }
            if p.var_sp_exception {
                f.push("var_sp_exception");
            }
            f.join(";")
        }
        _ => unreachable!("validated column"),
    }
}

fn cmd_curve(a: &CurveArgs) -> Result<()> {
    let src = a.source.load()?;
    let to_nats = if a.bits { 2f64.ln() } else { 1.0 };
    let r_min = a.r_min.map_or(src.conditional_entropy(), |r| r * to_nats);
    let r_max = a.r_max.map_or((src.nx() as f64).ln(), |r| r * to_nats);
    if !(r_min.is_finite() && r_max.is_finite() && r_min >= 0.0 && r_min < r_max) {
        bail!("need 0 <= r_min < r_max");
    }
    if !(2..=1_000_000).contains(&a.points) {
        bail!("points must lie in 2..=1000000");
    }
    let cols: Vec<&str> = if a.columns.is_empty() {
        COLUMNS.to_vec()
    } else {
        let mut v = Vec::new();
        for c in &a.columns {
            match COLUMNS.iter().find(|&&k| k == c.trim()) {
                Some(&k) => v.push(k),
                None => bail!("unknown column {c:?}; expected one of {}", COLUMNS.join(", ")),
            }
        }
        v
    };
    let last = a.points - 1;
    let rates: Vec<f64> = (0..a.points)
        .map(|k| if k == last { r_max } else { r_min + (r_max - r_min) * k as f64 / last as f64 })
        .collect();
    let pts = sw::sw_curve(&src, &rates)?;

    let unit = if a.bits { "bits" } else { "nats" };
    let scale = 1.0 / to_nats;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![format!("rate_{unit}")];
    header.extend(cols.iter().map(|c| if *c == "flag" { c.to_string() } else { format!("{c}_{unit}") }));
    w.write_record(&header)?;
    for p in &pts {
        let mut row = vec![fmt_num(p.rate * scale)];
        row.extend(cols.iter().map(|c| cell(p, c, scale)));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    write_atomic(&a.out, &bytes)
}

fn cmd_simulate(config: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg: SimConfig = serde_json::from_str(&text).context("parsing simulation config")?;
    let res = sim::run(&cfg)?;
    let mut bytes = serde_json::to_vec_pretty(&res)?;
    bytes.push(b'\n');
    write_atomic(out, &bytes)
}

#[derive(Serialize)]
struct ThresholdReport {
    conditional_entropy: f64,
    entropy_x: f64,
    channel: RateThresholds,
    r_f_cr: f64,
    r_f_sp_inf: f64,
    zero_error_window: (f64, f64),
    degenerate_per_input: bool,
    degenerate_global: bool,
}

fn cmd_thresholds(source: &SourceArgs, out: Option<&Path>) -> Result<()> {
    let src = source.load()?;
    let dg = degeneracy(src.marginal_x(), src.forward())?;
    let rep = ThresholdReport {
        conditional_entropy: src.conditional_entropy(),
        entropy_x: src.entropy_x(),
        channel: rate_thresholds(src.marginal_x(), src.forward())?,
        r_f_cr: sw::r_f_cr(&src),
        r_f_sp_inf: sw::r_f_sp_inf(&src),
        zero_error_window: sw::zero_error_rate_window(&src)?,
        degenerate_per_input: dg.per_input,
        degenerate_global: dg.global,
    };
    let mut text = serde_json::to_string_pretty(&rep)?;
    text.push('\n');
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Curve(a) => cmd_curve(a),
        Cmd::Simulate { config, out } => cmd_simulate(config, out),
        Cmd::Thresholds { source, out } => cmd_thresholds(source, out.as_deref()),
        Cmd::SecondOrder { source } => {
            let c: ExtReal = sw::second_order_coefficient(&source.load()?)?;
            println!("{c}");
            Ok(())
        }
        Cmd::Pcmax { source, rate, bits } => {
            let r = if *bits { rate * 2f64.ln() } else { *rate };
            println!("{}", fmt_num(sw::p_c_max(&source.load()?, r)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let limit = e.chain().any(|c| matches!(c.downcast_ref::<explab::Error>(), Some(explab::Error::EnumerationLimit(_))));
            ExitCode::from(if limit { 2 } else { 1 })
        }
    }
}
