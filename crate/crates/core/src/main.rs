use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use softquant::experiment::{self, Recipe};
use softquant::Error;

/// Entropy-regularized quantization experiments.
#[derive(Parser)]
#[command(name = "softquant", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a recipe for a single seed over its lambda grid.
    Run {
        /// Built-in recipe name or path to a TOML recipe file.
        target: String,
        #[arg(long)]
        out: PathBuf,
        /// Seed of the run; defaults to the recipe's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict the lambda grid (repeatable).
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
    },
    /// Run a recipe over its full lambda grid and all replicates.
    Sweep {
        target: String,
        #[arg(long)]
        out: PathBuf,
        /// First seed; replicates use consecutive seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Run the randomized oracle and property suite.
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// List the built-in recipes.
    ListRecipes,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::NoConvergence { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn load(target: &str) -> Result<Vec<Recipe>, Failure> {
    if let Some(r) = experiment::builtin(target) {
        return Ok(vec![r]);
    }
    let path = Path::new(target);
    if !path.is_file() {
        return Err(Failure::Config(format!(
            "{target:?} is neither a built-in recipe nor a file (see list-recipes)"
        )));
    }
    experiment::read_recipes(path).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("{target}: {io}")),
        e => Failure::Config(format!("{target}: {e}")),
    })
}

fn execute(recipes: Vec<Recipe>, out: &Path) -> Result<(), Failure> {
    for recipe in &recipes {
        recipe.validate()?;
    }
    for recipe in recipes {
        let records = experiment::run_recipe(&recipe, out).map_err(|e| match e {
            Error::Io(io) => Failure::Runtime(io.to_string()),
            e => Failure::from(e),
        })?;
        for r in records {
            println!(
                "{} lambda={} seed={} distinct={} charged={} objective={:.6} center_distance={:.4}",
                r.recipe,
                r.lambda,
                r.seed,
                r.distinct_count,
                r.charged_count,
                r.final_objective_at_lambda,
                r.center_distance
            );
        }
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            target,
            out,
            seed,
            lambdas,
        } => {
            let mut recipes = load(&target)?;
            for r in &mut recipes {
                r.replicates = 1;
                if let Some(s) = seed {
                    r.base.seed = s;
                }
                if !lambdas.is_empty() {
                    let mut grid = lambdas.clone();
                    grid.sort_by(f64::total_cmp);
                    grid.dedup();
                    r.lambdas = grid;
                }
            }
            execute(recipes, &out)
        }
        Command::Sweep {
            target,
            out,
            seed,
            replicates,
        } => {
            let mut recipes = load(&target)?;
            for r in &mut recipes {
                if let Some(s) = seed {
                    r.base.seed = s;
                }
                if let Some(n) = replicates {
                    r.replicates = n;
                }
            }
            execute(recipes, &out)
        }
        Command::Verify { out, seed } => {
            let report = experiment::verify(out.as_deref(), seed)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            print!("{}", report.to_text());
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Runtime("verification failed".into()))
            }
        }
        Command::ListRecipes => {
            for r in experiment::builtin_recipes() {
                let grid: Vec<String> = r.lambdas.iter().map(f64::to_string).collect();
                println!(
                    "{:<18} lambdas=[{}]  {}",
                    r.name,
                    grid.join(", "),
                    r.description
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
