//! `probterm`: prove AST, bAST or iAST of probabilistic term rewrite
//! systems, simulate them, draw dependency graphs and run the corpus.
//!
//! Exit codes: 0 proved (or success), 1 MAYBE or benchmark regression,
//! 2 input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use probterm::adp::{canonical_problem, Goal};
use probterm::bench::run_benchmarks;
use probterm::processors::proc_dg;
use probterm::proof::check_proof;
use probterm::prover::{prove, Answer, ProverConfig};
use probterm::ptrs::Ptrs;
use probterm::redpair::Backend;
use probterm::simulate::{estimate_termination_prob, expand_bounded, Policy, PositionStrategy};
use probterm::syntax::{parse_ptrs, parse_term};
use probterm::term::Term;

#[derive(Parser)]
#[command(name = "probterm", version, about = "Almost-sure termination prover for probabilistic term rewriting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GoalArg {
    Ast,
    Bast,
    Iast,
}

impl From<GoalArg> for Goal {
    fn from(g: GoalArg) -> Goal {
        match g {
            GoalArg::Ast => Goal::Ast,
            GoalArg::Bast => Goal::Bast,
            GoalArg::Iast => Goal::Iast,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProofFormat {
    Text,
    Json,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    #[value(name = "lo", alias = "leftmost-outermost")]
    Lo,
    #[value(name = "li", alias = "leftmost-innermost")]
    Li,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Try to prove the goal; prints the verdict and the proof.
    Prove {
        file: PathBuf,
        #[arg(long, value_enum)]
        goal: GoalArg,
        /// Upper bound on interpretation coefficients.
        #[arg(long, default_value_t = 3)]
        max_coeff: i128,
        /// Template degree: 1 linear, 2 with pairwise products.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
        degree: u32,
        /// External SMT-LIB solver command (reads the script on stdin).
        #[arg(long)]
        smt: Option<String>,
        /// Wall-clock budget in seconds.
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        #[arg(long, value_enum, default_value_t = ProofFormat::Text)]
        proof: ProofFormat,
        /// Accepted for reproducibility of scripted runs; the prover is
        /// deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replay the emitted proof with the independent checker.
        #[arg(long)]
        check: bool,
    },
    /// Monte-Carlo estimate of the termination probability.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[arg(long, default_value_t = 2000)]
        max_steps: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::Lo)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rule ranking as 1-based rule numbers, e.g. `2,1,3`.
        #[arg(long, value_delimiter = ',')]
        priority: Vec<usize>,
        /// Pick the best-ranked applicable rule before the position.
        #[arg(long)]
        rule_first: bool,
        /// Start term; defaults to the file's START term.
        #[arg(long)]
        start: Option<String>,
        /// Write per-run outcomes as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also print the exact leaf mass up to this depth.
        #[arg(long)]
        exact: Option<usize>,
    },
    /// Dependency graph of the canonical ADP problem.
    Graph {
        file: PathBuf,
        #[arg(long, value_enum)]
        goal: GoalArg,
        /// Write DOT here instead of stdout.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Prove every corpus entry and compare with its `.expected` sidecar.
    Bench {
        dir: PathBuf,
        #[arg(long, default_value_t = 120.0)]
        timeout: f64,
    },
}

/// Failures caused by the input, reported with exit code 2.
struct InputError(anyhow::Error);

fn load(path: &Path) -> Result<Ptrs, InputError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(InputError)?;
    parse_ptrs(&text)
        .with_context(|| format!("{}", path.display()))
        .map_err(InputError)
}

fn duration(secs: f64) -> Result<Duration, InputError> {
    Duration::try_from_secs_f64(secs)
        .context("invalid timeout")
        .map_err(InputError)
}

fn run(cli: Cli) -> Result<ExitCode, InputError> {
    match cli.command {
        Command::Prove {
            file,
            goal,
            max_coeff,
            degree,
            smt,
            timeout,
            proof,
            seed: _,
            check,
        } => {
            let r = load(&file)?;
            let mut config = ProverConfig {
                timeout: Some(duration(timeout)?),
                ..ProverConfig::default()
            };
            config.rp.max_coeff = max_coeff;
            config.rp.degree = degree;
            if let Some(cmd) = smt {
                config.rp.backend = Backend::Smt(cmd);
            }
            let v = prove(&r, goal.into(), &config);
            println!("{}", v.answer);
            if let Some(note) = &v.note {
                eprintln!("note: {note}");
            }
            eprintln!("time: {:.3}s", v.elapsed.as_secs_f64());
            if let Some(doc) = &v.proof {
                match proof {
                    ProofFormat::Text => print!("{}", doc.to_text()),
                    ProofFormat::Json => println!("{}", doc.to_json()),
                    ProofFormat::None => {}
                }
                if check {
                    match check_proof(doc) {
                        Ok(()) => eprintln!("proof check: ok"),
                        Err(e) => {
                            eprintln!("proof check: FAILED: {e}");
                            return Ok(ExitCode::from(1));
                        }
                    }
                }
            }
            Ok(ExitCode::from(if v.answer == Answer::Maybe { 1 } else { 0 }))
        }
        Command::Simulate {
            file,
            runs,
            max_steps,
            policy,
            seed,
            priority,
            rule_first,
            start,
            csv,
            exact,
        } => {
            let r = load(&file)?;
            let start: Term = match start {
                Some(s) => parse_term(&s, &Default::default())
                    .context("invalid start term")
                    .map_err(InputError)?,
                None => r
                    .start
                    .clone()
                    .context("no start term: pass --start or add (START ...)")
                    .map_err(InputError)?,
            };
            if priority.iter().any(|&k| k == 0 || k > r.rules.len()) {
                return Err(InputError(anyhow::anyhow!(
                    "priority entries must be rule numbers 1..={}",
                    r.rules.len()
                )));
            }
            let policy = Policy {
                position: match policy {
                    PolicyArg::Lo => PositionStrategy::LeftmostOutermost,
                    PolicyArg::Li => PositionStrategy::LeftmostInnermost,
                    PolicyArg::Random => PositionStrategy::Random,
                },
                rule_priority: (!priority.is_empty()).then(|| priority.iter().map(|k| k - 1).collect()),
                rule_first,
            };
            let est = estimate_termination_prob(&r, &start, &policy, runs, max_steps, seed)
                .context("simulation failed")
                .map_err(InputError)?;
            println!(
                "terminated {}/{} = {:.4} ± {:.4} (95%, cut-off runs count as non-terminating)",
                est.terminated, est.runs, est.probability, est.half_width
            );
            if let Some(path) = csv {
                std::fs::write(&path, est.to_csv())
                    .with_context(|| format!("cannot write {}", path.display()))
                    .map_err(InputError)?;
            }
            if let Some(depth) = exact {
                let e = expand_bounded(&r, &start, &policy, depth)
                    .context("expansion failed")
                    .map_err(InputError)?;
                println!("exact leaf mass within depth {depth}: {} ≈ {:.6}", e.mass, e.mass.to_f64());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Graph { file, goal, dot } => {
            let r = load(&file)?;
            let p = canonical_problem(&r, goal.into());
            let res = proc_dg(&p);
            for (i, a) in p.adps.iter().enumerate() {
                println!("{i}: {a}");
            }
            println!("SCCs: {:?}", res.sccs);
            let text = res.graph.to_dot();
            match dot {
                Some(path) => std::fs::write(&path, text)
                    .with_context(|| format!("cannot write {}", path.display()))
                    .map_err(InputError)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { dir, timeout } => {
            let config = ProverConfig {
                timeout: Some(duration(timeout)?),
                ..ProverConfig::default()
            };
            let report = run_benchmarks(&dir, &config)
                .context("benchmark failed")
                .map_err(InputError)?;
            println!("{report}");
            Ok(ExitCode::from(if report.regressions() == 0 { 0 } else { 1 }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

