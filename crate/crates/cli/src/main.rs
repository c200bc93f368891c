use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gsdf::corpus::{default_corpus_dir, run_corpus, CorpusOptions};
use gsdf::primes::{census, census_tsv, DEFAULT_EMAX, MAX_EMAX};
use gsdf::record::{load_family, FamilyRecord};
use gsdf::search::{parse_symmetry, search, SearchProblem, Structure};
use gsdf::{assemble_gs, classify, find_multipliers, verify, ParameterSet, StructureReport, UnitSubgroup};

/// Goethals-Seidel difference families: verify, classify, search, build.
#[derive(Parser)]
#[command(name = "gsdf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a family file is a difference family of GS type.
    Verify {
        file: PathBuf,
        /// Also assemble the GS matrix and check that it is Hadamard.
        #[arg(long)]
        matrix: bool,
    },
    /// Write the GS array of a family in matrix text format.
    Build {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Report spin/slide structure and symmetry.
    Classify {
        file: PathBuf,
        /// Multiplier to test (defaults to the file's `mu`).
        #[arg(long, conflicts_with = "all")]
        mu: Option<i64>,
        /// Scan every unit multiplier.
        #[arg(long)]
        all: bool,
    },
    /// Search for spin or slide families.
    Search(SearchArgs),
    /// Print the prime chain census as TSV.
    Census {
        #[arg(long, default_value_t = DEFAULT_EMAX)]
        emax: u32,
        /// Allow exponents above the default bound.
        #[arg(long)]
        extended: bool,
    },
    /// Bundled corpus operations.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Verify every family file and all annotated claims.
    VerifyAll {
        #[arg(long, default_value_t = 631)]
        hadamard_vmax: u32,
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    v: u32,
    /// Block sizes `K0,K` or `K0,K,K,K`.
    #[arg(long, value_delimiter = ',')]
    k: Vec<u32>,
    #[arg(long)]
    lambda: u32,
    /// spin, slide or either.
    #[arg(long)]
    structure: Structure,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<i64>,
    /// Subgroup elements or generators; blocks are unions of its orbits.
    #[arg(long, value_delimiter = ',')]
    group: Vec<u32>,
    /// Two letters for X0 and X1: `s` symmetric, `k` skew, `*` free.
    #[arg(long)]
    symmetry: Option<String>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    node_budget: Option<u64>,
    /// Report one translate per block instead of every translate.
    #[arg(long)]
    reduce: bool,
    /// Print one JSON record per solution instead of a summary line.
    #[arg(long)]
    json: bool,
}

enum Failure {
    /// Well-formed request with a negative answer.
    Negative(String),
    Usage(String),
}

impl From<gsdf::Error> for Failure {
    fn from(e: gsdf::Error) -> Self {
        match e {
            gsdf::Error::Io(_) | gsdf::Error::Parse(_) => Failure::Usage(e.to_string()),
            other => Failure::Negative(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Verify { file, matrix } => cmd_verify(&file, matrix),
        Command::Build { file, output } => cmd_build(&file, &output),
        Command::Classify { file, mu, all } => cmd_classify(&file, mu, all),
        Command::Search(args) => cmd_search(&args),
        Command::Census { emax, extended } => cmd_census(emax, extended),
        Command::Corpus { command: CorpusCommand::VerifyAll { hadamard_vmax, dir } } => {
            cmd_corpus(dir, hadamard_vmax)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_verify(file: &Path, matrix: bool) -> Outcome {
    let rec = load_family(file)?;
    let f = rec.family()?;
    let ver = verify(&f);
    let Some(p) = ver.params else {
        let bad: Vec<usize> = (1..ver.per_d.len()).filter(|&d| ver.per_d[d] != ver.per_d[1]).collect();
        return Err(Failure::Negative(format!(
            "invalid: difference counts are not constant (first differing d = {})",
            bad.first().copied().unwrap_or(0)
        )));
    };
    if !ver.is_gs_type() {
        return Err(Failure::Negative(format!("valid {p} but order {} != v", p.order())));
    }
    println!("valid {p}");
    if matrix {
        let m = assemble_gs(&f);
        if !m.is_hadamard() {
            return Err(Failure::Negative(format!("matrix of order {} is not Hadamard", m.order())));
        }
        let skew = if m.is_skew_type() { ", skew-type" } else { "" };
        println!("hadamard order {}{skew}", m.order());
    }
    Ok(())
}

fn cmd_build(file: &Path, output: &Path) -> Outcome {
    let rec = load_family(file)?;
    let f = rec.family()?;
    let m = assemble_gs(&f);
    std::fs::write(output, m.to_text()).map_err(|e| Failure::Usage(format!("{}: {e}", output.display())))?;
    Ok(())
}

fn print_report(r: &StructureReport) {
    println!(
        "mu={} order={} kind={} symbol={} x0_fixed={} x3_neg_x1={} classes={:?}",
        r.mu, r.mu_order, r.kind, r.symbol, r.fixes_x0, r.x3_is_neg_x1, r.classes
    );
}

fn cmd_classify(file: &Path, mu: Option<i64>, all: bool) -> Outcome {
    let rec = load_family(file)?;
    let f = rec.family()?;
    if all {
        let reports = find_multipliers(&f);
        if reports.is_empty() {
            return Err(Failure::Negative("no spin or slide multiplier".into()));
        }
        reports.iter().for_each(print_report);
        return Ok(());
    }
    let mu = match mu {
        Some(m) => m.rem_euclid(rec.v as i64) as u32,
        None => rec.mu().ok_or_else(|| Failure::Usage("no --mu given and the file has no `mu`".into()))?,
    };
    print_report(&classify(&f, mu)?);
    Ok(())
}

fn cmd_search(a: &SearchArgs) -> Outcome {
    let k = match *a.k.as_slice() {
        [k0, k] => [k0, k, k, k],
        [k0, k1, k2, k3] => [k0, k1, k2, k3],
        _ => return Err(Failure::Usage("--k takes K0,K or K0,K,K,K".into())),
    };
    let mut problem = SearchProblem::new(ParameterSet::new(a.v, k, a.lambda), a.structure)
        .with_threads(a.threads)
        .with_reduced_translations(a.reduce);
    if let Some(mu) = a.mu {
        problem = problem.with_mu(mu.rem_euclid(a.v.max(1) as i64) as u32);
    }
    if !a.group.is_empty() {
        problem = problem.with_group(UnitSubgroup::closure(a.v, &a.group).map_err(|e| Failure::Usage(e.to_string()))?);
    }
    if let Some(s) = &a.symmetry {
        let (c0, c1) = parse_symmetry(s).map_err(|e| Failure::Usage(e.to_string()))?;
        problem = problem.with_symmetry(c0, c1);
    }
    if let Some(l) = a.limit {
        problem = problem.with_limit(l);
    }
    if let Some(b) = a.node_budget {
        problem = problem.with_node_budget(b);
    }
    let out = search(&problem).map_err(|e| match e {
        gsdf::Error::InfeasibleParameters(_) | gsdf::Error::NotInvertible { .. } => Failure::Usage(e.to_string()),
        other => Failure::from(other),
    })?;
    for s in &out.solutions {
        if a.json {
            let mut rec = FamilyRecord::from_family(&s.family, Some(s.mu));
            rec.annotations.structure = Some(s.report.kind);
            println!("{}", serde_json_line(&rec));
        } else {
            let blocks: Vec<Vec<u32>> = s.family.blocks().iter().map(|b| b.to_vec()).collect();
            println!("mu={} {} {:?}", s.mu, s.report.symbol, blocks);
        }
    }
    println!(
        "# solutions={} exhausted={} nodes={}",
        out.solutions.len(),
        out.exhausted,
        out.nodes_explored
    );
    if out.solutions.is_empty() {
        return Err(Failure::Negative("no solutions found".into()));
    }
    Ok(())
}

fn serde_json_line(rec: &FamilyRecord) -> String {
    rec.to_json().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn cmd_census(emax: u32, extended: bool) -> Outcome {
    if emax == 0 || emax > MAX_EMAX {
        return Err(Failure::Usage(format!("--emax must be in 1..={MAX_EMAX}")));
    }
    if emax > DEFAULT_EMAX && !extended {
        return Err(Failure::Usage(format!("--emax above {DEFAULT_EMAX} requires --extended")));
    }
    let rows = census(emax).map_err(|e| Failure::Usage(e.to_string()))?;
    print!("{}", census_tsv(&rows));
    Ok(())
}

fn cmd_corpus(dir: Option<PathBuf>, hadamard_vmax: u32) -> Outcome {
    let dir = dir.unwrap_or_else(default_corpus_dir);
    let report = run_corpus(&dir, &CorpusOptions { hadamard_vmax })?;
    println!("{report}");
    if report.pass() {
        Ok(())
    } else {
        Err(Failure::Negative("corpus verification failed".into()))
    }
}
