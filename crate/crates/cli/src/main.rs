use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use csdk::bench::{default_sizes, format_csv, format_table, run_bench, BenchConfig};
use csdk::csd::{csd, CsExtraction, CsdOptions, RankMode};
use csdk::io::{read_matrix, write_matrix, write_vector};
use csdk::isometry::{stability_report, StabilityReport};
use csdk::polar::{PolarMethod, DEFAULT_EPSILON};
use csdk::selftest::{run_all, SelftestConfig};
use csdk::testgen::TestClass;
use csdk::{Error, Matrix};

const EXIT_INTERNAL: u8 = 1;
const EXIT_REJECTED: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "csdk", version, about = "CS decomposition of partial isometries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Jsonl,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose a matrix file and write the factors as CMAT files.
    Compute {
        #[arg(long)]
        input: PathBuf,
        /// Number of rows in the top block.
        #[arg(long)]
        m1: usize,
        #[arg(long, default_value = "qdwh")]
        method: PolarMethod,
        #[arg(long, default_value = "auto")]
        rank_mode: RankMode,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value = "diag")]
        cs_extraction: CsExtraction,
        #[arg(long)]
        no_postprocess: bool,
        /// Output prefix; writes <prefix>.{u1,u2,c,s,v1,theta}.cmat
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Residual and orthogonality measurements over generated test classes.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        classes: Vec<u8>,
        /// Perturb every test matrix by 1e-10 complex Gaussian noise.
        #[arg(long)]
        noisy: bool,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Comma list or inclusive range such as 1..5
        #[arg(long, default_value = "1..3")]
        seeds: String,
        #[arg(long, default_value = "qdwh")]
        method: PolarMethod,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run the acceptance checks.
    Selftest {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::Io(_) => EXIT_INPUT,
            Error::NotNearPartialIsometry { .. } | Error::DimensionMismatch(_) | Error::InvalidArgument(_) => {
                EXIT_REJECTED
            }
            _ => EXIT_INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure {
        code: EXIT_REJECTED,
        message: format!("bad seed list '{s}'"),
    };
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn report_json(r: &StabilityReport, k: usize, rank: usize, branch: &str) -> String {
    serde_json::json!({
        "k": k,
        "rank": rank,
        "branch": branch,
        "residual_2norm": r.residual_2norm,
        "d_of_a": r.d_of_a,
        "scaled_residual": r.scaled_residual,
        "orth_u1": r.orth_u1,
        "orth_u2": r.orth_u2,
        "orth_v1": r.orth_v1,
        "cs_identity_err": r.cs_identity_err,
    })
    .to_string()
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!(".{suffix}.cmat"));
    PathBuf::from(s)
}

fn run_compute(
    input: &Path,
    m1: usize,
    opts: CsdOptions,
    out: &Path,
    format: Format,
) -> Result<(), Failure> {
    let a = read_matrix(input)?;
    let r = csd(&a, m1, &opts)?;
    let rep = stability_report(&a, &r)?;
    write_matrix(with_suffix(out, "u1"), &r.u1)?;
    write_matrix(with_suffix(out, "u2"), &r.u2)?;
    write_matrix(with_suffix(out, "c"), &Matrix::from_real_diag(&r.c))?;
    write_matrix(with_suffix(out, "s"), &Matrix::from_real_diag(&r.s))?;
    write_matrix(with_suffix(out, "v1"), &r.v1)?;
    write_vector(with_suffix(out, "theta"), &r.theta)?;
    let branch = r.branch.as_str();
    match format {
        Format::Table => {
            println!("branch           {branch}");
            println!("k                {}", r.k());
            println!("rank             {}", r.rank);
            println!("d(A)             {:.3e}", rep.d_of_a);
            println!("residual         {:.3e}", rep.residual_2norm);
            println!("residual/d(A)    {:.3e}", rep.scaled_residual);
            println!("orth U1 / u      {:.3e}", rep.orth_u1);
            println!("orth U2 / u      {:.3e}", rep.orth_u2);
            println!("orth V1 / u      {:.3e}", rep.orth_v1);
            println!("||C^2+S^2-I||    {:.3e}", rep.cs_identity_err);
        }
        Format::Csv => {
            println!("k,rank,branch,residual_2norm,d_of_a,scaled_residual,orth_u1,orth_u2,orth_v1,cs_identity_err");
            println!(
                "{},{},{branch},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.k(),
                r.rank,
                rep.residual_2norm,
                rep.d_of_a,
                rep.scaled_residual,
                rep.orth_u1,
                rep.orth_u2,
                rep.orth_v1,
                rep.cs_identity_err
            );
        }
        Format::Jsonl => println!("{}", report_json(&rep, r.k(), r.rank, branch)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Compute {
            input,
            m1,
            method,
            rank_mode,
            epsilon,
            cs_extraction,
            no_postprocess,
            out,
            format,
        } => {
            let opts = CsdOptions {
                polar_method: method,
                epsilon,
                rank_mode,
                postprocess: !no_postprocess,
                cs_extraction,
                ..CsdOptions::default()
            };
            run_compute(&input, m1, opts, &out, format)?;
            Ok(true)
        }
        Command::Bench {
            classes,
            noisy,
            sizes,
            seeds,
            method,
            format,
        } => {
            let cfg = BenchConfig {
                classes: classes.into_iter().map(TestClass::from_id).collect::<csdk::Result<_>>()?,
                noisy,
                sizes: sizes.unwrap_or_else(|| default_sizes(5)),
                seeds: parse_seeds(&seeds)?,
                options: CsdOptions::with_method(method),
            };
            let rows = run_bench(&cfg)?;
            match format {
                Format::Table => print!("{}", format_table(&rows)),
                Format::Csv => print!("{}", format_csv(&rows)),
                Format::Jsonl => {
                    for r in &rows {
                        println!("{}", serde_json::to_string(r).expect("rows serialize"));
                    }
                }
            }
            Ok(true)
        }
        Command::Selftest { format } => {
            let results = run_all(&SelftestConfig::default());
            match format {
                Format::Table => {
                    for r in &results {
                        println!("{}", r.line());
                    }
                }
                Format::Csv => {
                    println!("id,passed,title,detail");
                    for r in &results {
                        println!("{},{},\"{}\",\"{}\"", r.id, r.passed, r.title, r.detail.replace('"', "'"));
                    }
                }
                Format::Jsonl => {
                    for r in &results {
                        println!("{}", serde_json::to_string(r).expect("results serialize"));
                    }
                }
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("CSDK_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure {
        code: EXIT_REJECTED,
        message: format!("CSDK_THREADS must be a positive integer, got '{v}'"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INTERNAL),
        Err(f) => {
            eprintln!("csdk: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
