use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use ufhc::experiment::{run, ExperimentConfig, Outcome};

const CHAOS_FIXTURE: &str = include_str!("../fixtures/chaos.json");

#[derive(Parser)]
#[command(name = "ufhc", version, about = "Weighted density and C-type operator experiments")]
struct Cli {
    /// Experiment config (JSON). Flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the report and CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Weighted and natural density profile of a set.
    Density(DensityArgs),
    #[command(subcommand)]
    Weights(WeightsCmd),
    #[command(subcommand)]
    Furstenberg(FurstenbergCmd),
    #[command(subcommand)]
    Ctype(CtypeCmd),
    #[command(subcommand)]
    Audit(AuditCmd),
}

#[derive(Args)]
struct DensityArgs {
    /// Set spec as JSON, e.g. '{"kind":"periodic","modulus":2,"residues":[0]}'.
    #[arg(long)]
    set: Option<String>,
    /// Weight spec as JSON, e.g. '{"kind":"power","alpha":2}'.
    #[arg(long)]
    weight: Option<String>,
    /// Last horizon of a log-spaced plan starting at 1000.
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Subcommand)]
enum WeightsCmd {
    /// Block-recursive weight that sees Banach density up to a factor e.
    BuildProp3 {
        #[arg(long)]
        horizon: Option<u64>,
        /// Common density target for every input set.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Union of growing intervals with vanishing weighted density.
    SparseSet {
        /// Largest admissible interval start.
        #[arg(long)]
        horizon: Option<u64>,
        /// First epsilon of the halving schedule.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        kmax: Option<usize>,
        /// Accepted for scripts; every construction is deterministic.
        #[arg(long)]
        seed_free: bool,
    },
}

#[derive(Subcommand)]
enum FurstenbergCmd {
    /// Bounded membership search in a density family.
    Check {
        /// ud, uBd or ud_a.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        bound: Option<u64>,
        /// Weight spec for ud_a.
        #[arg(long)]
        weight: Option<String>,
    },
}

#[derive(Subcommand)]
enum CtypeCmd {
    /// Exact orbit of a sparse vector.
    Simulate {
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Parameter-chain checks.
    ValidateParams {
        /// Comma-separated delta values.
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<u64>>,
        /// Comma-separated tau values; default is delta / 2.
        #[arg(long, value_delimiter = ',')]
        tau: Option<Vec<u64>>,
        /// Comma-separated block lengths.
        #[arg(long = "big-delta", value_delimiter = ',')]
        big_delta: Option<Vec<u64>>,
        #[arg(long)]
        kmax: Option<usize>,
    },
}

#[derive(Subcommand)]
enum AuditCmd {
    /// Coverage margins and window inclusion for a C+1 operator.
    ChaosNotUfhca {
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// Density inequalities on a fixed corpus.
    Equivalences {
        #[arg(long)]
        horizon: Option<u64>,
    },
}

fn parse_json(flag: &str, text: &str) -> anyhow::Result<Value> {
    serde_json::from_str(text).with_context(|| format!("--{flag} is not valid JSON"))
}

fn default_config(tag: &str) -> Value {
    match tag {
        "build-prop3" => json!({
            "input": {
                "sets": [
                    {"kind": "periodic", "modulus": 2, "residues": [0]},
                    {"kind": "periodic", "modulus": 3, "residues": [0]},
                    {"kind": "periodic", "modulus": 5, "residues": [0, 1, 2]}
                ],
                "deltas": [0.3, 0.3, 0.3]
            }
        }),
        "ctype-simulate" => {
            serde_json::from_str(include_str!("../fixtures/small-ctype.json")).expect("fixture parses")
        }
        "ctype-validate-params" => json!({
            "delta": [1, 10, 36, 96, 224, 488, 1024],
            "tau_rule": "half-delta"
        }),
        "chaos-not-ufhca" => serde_json::from_str(CHAOS_FIXTURE).expect("fixture parses"),
        _ => json!({}),
    }
}

fn load(path: Option<&Path>, tag: &str) -> anyhow::Result<Map<String, Value>> {
    let value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", p.display()))?
        }
        None => default_config(tag),
    };
    let Value::Object(mut map) = value else {
        bail!("config must be a JSON object");
    };
    match map.get("command") {
        Some(Value::String(c)) if c != tag => {
            bail!("config is for command `{c}`, not `{tag}`")
        }
        Some(Value::String(_)) | None => {}
        Some(_) => bail!("config field `command` must be a string"),
    }
    map.insert("command".into(), Value::String(tag.into()));
    Ok(map)
}

fn set(map: &mut Map<String, Value>, key: &str, v: Option<Value>) {
    if let Some(v) = v {
        map.insert(key.into(), v);
    }
}

fn build_config(cli: &Cli) -> anyhow::Result<Map<String, Value>> {
    let cfg = cli.config.as_deref();
    Ok(match &cli.command {
        Command::Density(a) => {
            let mut m = load(cfg, "density")?;
            set(&mut m, "set", a.set.as_deref().map(|s| parse_json("set", s)).transpose()?);
            set(&mut m, "weight", a.weight.as_deref().map(|s| parse_json("weight", s)).transpose()?);
            set(
                &mut m,
                "horizons",
                a.horizon.map(|h| json!({"lo": 1000.min(h), "hi": h, "per_decade": 4})),
            );
            m
        }
        Command::Weights(WeightsCmd::BuildProp3 { horizon, delta }) => {
            let mut m = load(cfg, "build-prop3")?;
            set(&mut m, "horizon", horizon.map(Value::from));
            if let Some(d) = delta {
                if let Some(Value::Object(input)) = m.get_mut("input") {
                    let n = input.get("sets").and_then(Value::as_array).map_or(0, Vec::len);
                    input.insert("deltas".into(), json!(vec![*d; n]));
                }
            }
            m
        }
        Command::Weights(WeightsCmd::SparseSet {
            horizon, eps, kmax, ..
        }) => {
            let mut m = load(cfg, "sparse-set")?;
            set(&mut m, "index_cap", horizon.map(Value::from));
            set(&mut m, "kmax", kmax.map(Value::from));
            set(&mut m, "eps", eps.map(|e| json!({"first": e, "ratio": 0.5})));
            m
        }
        Command::Furstenberg(FurstenbergCmd::Check {
            family,
            delta,
            n,
            set: s,
            bound,
            weight,
        }) => {
            let mut m = load(cfg, "furstenberg-check")?;
            let mut fam = match m.remove("family") {
                Some(Value::Object(f)) => f,
                _ => Map::new(),
            };
            set(&mut fam, "family", family.clone().map(Value::from));
            set(&mut fam, "delta", delta.map(Value::from));
            set(&mut fam, "n", n.map(Value::from));
            set(&mut fam, "weight", weight.as_deref().map(|w| parse_json("weight", w)).transpose()?);
            m.insert("family".into(), Value::Object(fam));
            set(&mut m, "set", s.as_deref().map(|v| parse_json("set", v)).transpose()?);
            set(&mut m, "bound", bound.map(Value::from));
            m
        }
        Command::Ctype(CtypeCmd::Simulate { steps }) => {
            let mut m = load(cfg, "ctype-simulate")?;
            set(&mut m, "steps", steps.map(Value::from));
            m
        }
        Command::Ctype(CtypeCmd::ValidateParams {
            delta,
            tau,
            big_delta,
            kmax,
        }) => {
            let mut m = load(cfg, "ctype-validate-params")?;
            set(&mut m, "delta", delta.clone().map(|d| json!(d)));
            set(&mut m, "tau_rule", tau.clone().map(|t| json!({ "explicit": t })));
            set(&mut m, "Delta", big_delta.clone().map(|d| json!(d)));
            set(&mut m, "kmax", kmax.map(Value::from));
            m
        }
        Command::Audit(AuditCmd::ChaosNotUfhca { kmax }) => {
            let mut m = load(cfg, "chaos-not-ufhca")?;
            set(&mut m, "kmax", kmax.map(Value::from));
            m
        }
        Command::Audit(AuditCmd::Equivalences { horizon }) => {
            let mut m = load(cfg, "equivalences")?;
            set(&mut m, "horizon", horizon.map(Value::from));
            m
        }
    })
}

fn parse_as<T: serde::de::DeserializeOwned>(text: &str) -> anyhow::Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("invalid config at `{path}`: {}", e.into_inner())
    })
}

fn parse_config(mut map: Map<String, Value>) -> anyhow::Result<ExperimentConfig> {
    let tag = map.remove("command").and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let text = Value::Object(map).to_string();
    Ok(match tag.as_str() {
        "density" => ExperimentConfig::Density(parse_as(&text)?),
        "build-prop3" => ExperimentConfig::BuildProp3(parse_as(&text)?),
        "sparse-set" => ExperimentConfig::SparseSet(parse_as(&text)?),
        "furstenberg-check" => ExperimentConfig::FurstenbergCheck(parse_as(&text)?),
        "ctype-simulate" => ExperimentConfig::CtypeSimulate(parse_as(&text)?),
        "ctype-validate-params" => ExperimentConfig::CtypeValidateParams(parse_as(&text)?),
        "chaos-not-ufhca" => ExperimentConfig::ChaosNotUfhca(parse_as(&text)?),
        "equivalences" => ExperimentConfig::Equivalences(parse_as(&text)?),
        other => bail!("unknown command `{other}`"),
    })
}

fn checks_csv(out: &Outcome) -> String {
    let mut s = String::from("name,passed,value,threshold,horizon\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for c in &out.report.checks {
        s += &format!(
            "{},{},{},{},{}\n",
            c.name,
            c.passed,
            opt(c.value),
            opt(c.threshold),
            c.horizon.map_or(String::new(), |h| h.to_string())
        );
    }
    s
}

fn emit(cli: &Cli, name: &str, out: &Outcome) -> anyhow::Result<()> {
    let report = serde_json::to_string_pretty(&out.report)? + "\n";
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join(format!("{name}.json")), &report)?;
            for t in &out.tables {
                fs::write(dir.join(format!("{}.csv", t.name)), &t.csv)?;
            }
            fs::write(dir.join("checks.csv"), checks_csv(out))?;
        }
        None => match cli.format {
            Format::Json => print!("{report}"),
            Format::Csv => match out.tables.first() {
                Some(t) => print!("{}", t.csv),
                None => print!("{}", checks_csv(out)),
            },
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli).and_then(parse_config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    if let Err(e) = emit(&cli, cfg.command(), &outcome) {
        eprintln!("error: {e:#}");
        return ExitCode::from(3);
    }
    for c in outcome.report.failed_checks() {
        eprintln!("FAIL {}", c.name);
    }
    if outcome.report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
