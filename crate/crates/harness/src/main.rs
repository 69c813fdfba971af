use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ricci_harness::report::{Report, Verdict};
use ricci_harness::tolerances::ToleranceProfile;
use ricci_harness::{run_scenario, scenarios, ScenarioConfig};

#[derive(Parser)]
#[command(name = "ricci-lab", version, about = "Check local entropy inequalities on model Ricci flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, a bundled scenario by name, or `all`.
    Run {
        target: String,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "ricci-lab-out")]
        out: PathBuf,
    },
    /// List the bundled scenarios.
    ListScenarios,
    /// Rerun the stored inputs of a previous run and compare reports.
    Replay {
        hash: String,
        #[arg(long, default_value = "ricci-lab-out")]
        out: PathBuf,
    },
    /// Summarize the report(s) under a directory.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct Overrides {
    /// Grid nodes (per direction on the torus).
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, value_parser = parse_profile)]
    tolerance_profile: Option<ToleranceProfile>,
    /// Comma-separated subset of checks.
    #[arg(long, value_delimiter = ',')]
    checks: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Shift the Nash entropies of a check by +1.
    #[arg(long)]
    fault_inject: Vec<String>,
}

fn parse_profile(s: &str) -> Result<ToleranceProfile, String> {
    ToleranceProfile::parse(s).ok_or_else(|| format!("unknown profile `{s}` (strict, default, fast)"))
}

impl Overrides {
    fn apply(&self, cfg: ScenarioConfig) -> ScenarioConfig {
        let mut cfg = match self.resolution {
            Some(n) => cfg.with_resolution(n),
            None => cfg,
        };
        if let Some(p) = self.tolerance_profile {
            cfg.tolerance_profile = p;
        }
        if !self.checks.is_empty() {
            cfg.checks = self.checks.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        for f in &self.fault_inject {
            if !cfg.fault_inject.contains(f) {
                cfg.fault_inject.push(f.clone());
            }
        }
        cfg
    }
}

fn load(target: &str) -> Result<Vec<ScenarioConfig>, String> {
    if target == "all" {
        return scenarios::names()
            .map(|n| scenarios::bundled(n).expect("bundled").map_err(|e| format!("{n}: {e}")))
            .collect();
    }
    let path = Path::new(target);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| format!("{target}: {e}"))?;
        return ScenarioConfig::from_toml_str(&text)
            .map(|c| vec![c])
            .map_err(|e| format!("{target}: {e}"));
    }
    match scenarios::bundled(target) {
        Some(c) => c.map(|c| vec![c]).map_err(|e| format!("{target}: {e}")),
        None => Err(format!("`{target}` is neither a file nor a bundled scenario")),
    }
}

fn run_all(configs: Vec<ScenarioConfig>, out: &Path) -> Result<Verdict, String> {
    let mut worst = Verdict::Pass;
    for cfg in configs {
        let outcome = run_scenario(&cfg, Some(out)).map_err(|e| format!("{}: {e}", cfg.name))?;
        print!("{}", outcome.report.summary());
        if let Some(dir) = &outcome.dir {
            println!("  written to {}", dir.display());
        }
        worst = worst.max(outcome.report.verdict);
    }
    Ok(worst)
}

fn replay(hash: &str, out: &Path) -> Result<Verdict, String> {
    let input = out.join("inputs").join(format!("{hash}.toml"));
    let text = fs::read_to_string(&input).map_err(|e| format!("{}: {e}", input.display()))?;
    let cfg = ScenarioConfig::from_toml_str(&text).map_err(|e| format!("{}: {e}", input.display()))?;
    if cfg.input_hash() != hash {
        return Err(format!("{} does not hash to {hash}", input.display()));
    }
    let outcome = run_scenario(&cfg, Some(&out.join("replay"))).map_err(|e| e.to_string())?;
    print!("{}", outcome.report.summary());
    let previous = out.join(&cfg.name).join("report.json");
    match fs::read_to_string(&previous) {
        Ok(old) if old == outcome.report.to_json() => println!("  identical to {}", previous.display()),
        Ok(_) => println!("  differs from {}", previous.display()),
        Err(_) => println!("  no earlier report at {}", previous.display()),
    }
    Ok(outcome.report.verdict)
}

fn summarize(dir: &Path) -> Result<Verdict, String> {
    let mut files = Vec::new();
    if dir.join("report.json").exists() {
        files.push(dir.join("report.json"));
    } else {
        let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let mut subdirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        subdirs.sort();
        files.extend(subdirs.into_iter().map(|d| d.join("report.json")).filter(|f| f.exists()));
    }
    if files.is_empty() {
        return Err(format!("no report.json under {}", dir.display()));
    }
    let mut worst = Verdict::Pass;
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| format!("{}: {e}", f.display()))?;
        let report = Report::from_json(&text).map_err(|e| format!("{}: {e}", f.display()))?;
        print!("{}", report.summary());
        worst = worst.max(report.verdict);
    }
    Ok(worst)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { target, overrides, out } => {
            load(&target).and_then(|cs| run_all(cs.into_iter().map(|c| overrides.apply(c)).collect(), &out))
        }
        Command::ListScenarios => {
            for name in scenarios::names() {
                println!("{name}");
            }
            Ok(Verdict::Pass)
        }
        Command::Replay { hash, out } => replay(&hash, &out),
        Command::Report { dir } => summarize(&dir),
    };
    match result {
        Ok(Verdict::Fail) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
