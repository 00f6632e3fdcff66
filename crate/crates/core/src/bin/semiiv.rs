use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use semiiv::additive::{AdditiveEngine, BACKFIT_MAX_ITER, BACKFIT_TOL, DEFAULT_BASIS_SIZE};
use semiiv::Dataset;
use semiiv::ivtest::{
    double_instrument_test, linear_double_instrument_test, semi_instrument_test, CombineMethod,
    StructuralRoles, TestConfig, DEFAULT_ALPHA,
};
use semiiv::report::{general_double_summary, linear_double_summary, semi_summary, Envelope};
use semiiv::scoring::BootstrapOptions;
use semiiv::simgen::{gen_double_instrument, gen_single_instrument};
use semiiv::smoothers::{Kernel, SmootherConfig};
use semiiv::tables;

#[derive(Parser)]
#[command(name = "semiiv", version, about = "Instrument admissibility tests for additive structural models")]
struct Cli {
    /// TOML file with default test settings; command-line flags take precedence.
    #[arg(long, global = true, env = "SEMIIV_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether a single candidate is a semi-instrument.
    TestSemi {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        instrument: String,
        #[arg(long, default_value = "X")]
        treatment: String,
        #[arg(long, default_value = "Y")]
        outcome: String,
        #[command(flatten)]
        settings: Settings,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Test whether two candidates share the same linear coefficient.
    TestDouble {
        #[arg(long)]
        data: PathBuf,
        /// Two instrument columns separated by a comma.
        #[arg(long, value_delimiter = ',', required = true)]
        instruments: Vec<String>,
        #[arg(long, default_value = "X")]
        treatment: String,
        #[arg(long, default_value = "Y")]
        outcome: String,
        #[arg(long, value_enum, default_value_t = Variant::Linear)]
        variant: Variant,
        #[command(flatten)]
        settings: Settings,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Write a simulated sample to CSV.
    Simulate {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Also write the hidden latent and noise columns.
        #[arg(long)]
        with_truth: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun both simulation grids and write table1.csv, table2.csv and summary.txt.
    Reproduce {
        /// First seed; cells use seeds `seed .. seed + seeds`.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Seeds per cell for the additivity grid (defaults to --seeds).
        #[arg(long)]
        single_seeds: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Linear,
    General,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Single,
    Double,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Engine {
    Backfit,
    DirectLs,
}

#[derive(Args, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    span: Option<f64>,
    #[arg(long)]
    kernel: Option<Kernel>,
    #[arg(long, value_enum)]
    engine: Option<Engine>,
    #[arg(long)]
    basis_size: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    combine: Option<Combine>,
    /// Bootstrap replicates for the measurability stage; omit for a plain comparison.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Bootstrap seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Combine {
    Joint,
    Marginal,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Settings {
    fn merged(self, file: Settings) -> Settings {
        Settings {
            degree: self.degree.or(file.degree),
            span: self.span.or(file.span),
            kernel: self.kernel.or(file.kernel),
            engine: self.engine.or(file.engine),
            basis_size: self.basis_size.or(file.basis_size),
            tol: self.tol.or(file.tol),
            max_iter: self.max_iter.or(file.max_iter),
            combine: self.combine.or(file.combine),
            bootstrap: self.bootstrap.or(file.bootstrap),
            seed: self.seed.or(file.seed),
            alpha: self.alpha.or(file.alpha),
            format: self.format.or(file.format),
        }
    }

    fn test_config(&self) -> Result<TestConfig> {
        let base = SmootherConfig::default();
        let smoother = SmootherConfig::new(
            self.degree.unwrap_or(base.degree),
            self.span.unwrap_or(base.span),
            self.kernel.unwrap_or(base.kernel),
        )?;
        let engine = match self.engine.unwrap_or(Engine::DirectLs) {
            Engine::Backfit => AdditiveEngine::Backfit {
                smoother,
                tol: self.tol.unwrap_or(BACKFIT_TOL),
                max_iter: self.max_iter.unwrap_or(BACKFIT_MAX_ITER),
            },
            Engine::DirectLs => AdditiveEngine::DirectLs {
                basis_size: self.basis_size.unwrap_or(DEFAULT_BASIS_SIZE),
            },
        };
        let alpha = self.alpha.unwrap_or(DEFAULT_ALPHA);
        if !(alpha > 0.0 && alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {alpha}");
        }
        let bootstrap = match (self.bootstrap, self.seed) {
            (Some(b), Some(seed)) => Some(BootstrapOptions::new(b, seed)),
            (Some(_), None) => bail!("--bootstrap requires --seed"),
            (None, _) => None,
        };
        Ok(TestConfig {
            smoother,
            engine,
            combine: match self.combine.unwrap_or(Combine::Joint) {
                Combine::Joint => CombineMethod::Joint,
                Combine::Marginal => CombineMethod::Marginal,
            },
            bootstrap,
            alpha,
        })
    }
}

fn load_settings(path: Option<&Path>) -> Result<Settings> {
    let Some(path) = path else {
        return Ok(Settings::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Flattens a JSON report into `field,value` rows; arrays of numbers are
/// skipped.
fn flat_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            Value::Array(a) if a.iter().all(|x| !x.is_object() && !x.is_array()) && a.len() <= 8 => {
                let items: Vec<String> = a.iter().map(scalar).collect();
                out.push((prefix.to_string(), items.join(";")));
            }
            Value::Array(_) => {}
            x => out.push((prefix.to_string(), scalar(x))),
        }
    }
    fn scalar(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            x => x.to_string(),
        }
    }
    let mut rows = Vec::new();
    walk("", v, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["field", "value"]).expect("in-memory write");
    for (k, v) in rows {
        w.write_record([k, v]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv output is utf-8")
}

fn emit<T>(env: &Envelope<T>, summary: String, format: Format, output: Option<&Path>) -> Result<()>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let text = match format {
        Format::Text => summary,
        Format::Json => env.to_json()? + "\n",
        Format::Csv => flat_csv(&serde_json::to_value(env)?),
    };
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn decision(accepted: bool) -> ExitCode {
    if accepted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = load_settings(cli.config.as_deref())?;
    match cli.command {
        Command::TestSemi {
            data,
            instrument,
            treatment,
            outcome,
            settings,
            out,
        } => {
            let settings = settings.merged(file);
            let cfg = settings.test_config()?;
            let ds = Dataset::read_csv_path(&data).with_context(|| format!("loading {}", data.display()))?;
            let roles = StructuralRoles::single(&instrument, &treatment, &outcome);
            let r = semi_instrument_test(&ds, &roles, &cfg)?;
            let accepted = r.accepted;
            let summary = semi_summary(&r);
            emit(&Envelope::new("semi-instrument", cfg, r), summary, settings.format.unwrap_or(Format::Text), out.output.as_deref())?;
            Ok(decision(accepted))
        }
        Command::TestDouble {
            data,
            instruments,
            treatment,
            outcome,
            variant,
            settings,
            out,
        } => {
            let settings = settings.merged(file);
            let cfg = settings.test_config()?;
            let ds = Dataset::read_csv_path(&data).with_context(|| format!("loading {}", data.display()))?;
            let [a, b] = <[String; 2]>::try_from(instruments).map_err(|v| anyhow!("expected two instruments, got {}", v.len()))?;
            let roles = StructuralRoles::pair(&a, &b, &treatment, &outcome);
            let format = settings.format.unwrap_or(Format::Text);
            let accepted = match variant {
                Variant::Linear => {
                    let r = linear_double_instrument_test(&ds, &roles, &cfg)?;
                    let accepted = r.accepted;
                    let summary = linear_double_summary(&r);
                    emit(&Envelope::new("linear-double-instrument", cfg, r), summary, format, out.output.as_deref())?;
                    accepted
                }
                Variant::General => {
                    let r = double_instrument_test(&ds, &roles, &cfg)?;
                    let accepted = r.accepted;
                    let summary = general_double_summary(&r);
                    emit(&Envelope::new("double-instrument", cfg, r), summary, format, out.output.as_deref())?;
                    accepted
                }
            };
            Ok(decision(accepted))
        }
        Command::Simulate {
            model,
            c,
            n,
            seed,
            with_truth,
            out,
        } => {
            let sample = match model {
                Model::Single => gen_single_instrument(c, n, seed)?,
                Model::Double => gen_double_instrument(c, n, seed)?,
            };
            let ds = if with_truth { sample.with_truth() } else { sample.data };
            ds.write_csv_path(&out).with_context(|| format!("writing {}", out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Reproduce {
            seed,
            seeds,
            single_seeds,
            out,
        } => {
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let seed_list: Vec<u64> = (seed..seed + seeds).collect();
            let single_list: Vec<u64> = (seed..seed + single_seeds.unwrap_or(seeds)).collect();
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let single = tables::additivity_grid(
                &tables::SINGLE_SIZES,
                &tables::SINGLE_COEFS,
                &single_list,
                AdditiveEngine::backfit_default(),
            )?;
            let cfg = file.test_config()?;
            let double = tables::double_grid(&tables::DOUBLE_SIZES, &tables::DOUBLE_COEFS, &seed_list, &cfg)?;
            for (name, text) in [
                ("table1.csv", tables::additivity_csv(&single)),
                ("table2.csv", tables::double_csv(&double)),
                ("summary.txt", tables::summary_text(&single, &double)),
            ] {
                let p = out.join(name);
                fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
