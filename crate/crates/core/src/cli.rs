//! Command-line front end. Exit codes: 0 all checks passed, 1 a check failed,
//! 2 a check was inconclusive (and none failed), 3 usage or input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::families::{Bipartition, FamilyId};
use crate::io::{read_set, write_set};
use crate::lemma::certify;
use crate::linalg::Tolerances;
use crate::opm::MeasuredSubset;
use crate::report::{run_checks, sweep, write_csv, Check, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "upbv", version, about = "Verify strongly nonlocal unextendible product bases")]
struct Cli {
    /// Worker threads (falls back to UPBV_JOBS, then the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_zero: f64,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_rank: f64,
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol_psd: f64,
    #[arg(long, global = true, default_value_t = 1e6)]
    gap_min: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Caps {
    /// Largest local dimension for the unextendibility check.
    #[arg(long, default_value_t = 5)]
    upb_max_d: usize,
    /// Largest local dimension for the OPM checks.
    #[arg(long, default_value_t = 6)]
    opm_max_d: usize,
    /// Solve all three cuts even for cyclically invariant sets.
    #[arg(long)]
    no_symmetry: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a family and write it as a JSON state-set file.
    Construct {
        #[arg(long)]
        family: String,
        #[arg(short)]
        d: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run checks on a state-set file.
    Verify {
        input: PathBuf,
        /// Comma-separated subset of orth,upb,strong,ppt.
        #[arg(long, value_delimiter = ',', default_value = "orth,upb,strong,ppt")]
        checks: Vec<String>,
        #[command(flatten)]
        caps: Caps,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Derive the OPM zero pattern by the block lemmas and write certificates.
    Certify {
        input: PathBuf,
        /// Measured parties (`BC`) or the cut (`A|BC`).
        #[arg(long, default_value = "BC")]
        cut: String,
        /// Output prefix; `.txt` and `.json` are appended.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// CSV sweep over the general family.
    Report {
        #[arg(long)]
        dmin: usize,
        #[arg(long)]
        dmax: usize,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        caps: Caps,
    },
}

fn jobs(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("UPBV_JOBS") {
        Ok(v) => v.trim().parse().map_err(|_| Error::Domain(format!("UPBV_JOBS is not a number: '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn options(cli: &Cli, caps: &Caps) -> RunOptions {
    RunOptions {
        tol: tolerances(cli),
        upb_max_d: caps.upb_max_d,
        opm_max_d: caps.opm_max_d,
        use_symmetry: !caps.no_symmetry,
    }
}

fn tolerances(cli: &Cli) -> Tolerances {
    Tolerances { zero: cli.tol_zero, rank: cli.tol_rank, psd: cli.tol_psd, gap_min: cli.gap_min }
}

fn parse_measured(dims: &[usize], cut: &str) -> Result<MeasuredSubset> {
    if cut.contains('|') {
        MeasuredSubset::across(dims, &cut.parse::<Bipartition>()?)
    } else {
        MeasuredSubset::parse(dims, cut)
    }
}

fn execute(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<i32> {
    match &cli.command {
        Command::Construct { family, d, out: path } => {
            let set = FamilyId::parse(family, *d)?.build()?;
            write_set(&set, path)?;
            writeln!(out, "wrote {} ({} states, dims {:?}) to {}", set.name, set.len(), set.dims, path.display())?;
            Ok(EXIT_OK)
        }
        Command::Verify { input, checks, caps, report } => {
            let checks = checks.iter().map(|c| c.trim().parse()).collect::<Result<Vec<Check>>>()?;
            let set = read_set(input)?;
            let rep = run_checks(&set, &checks, &options(cli, caps));
            write!(out, "{}", rep.to_text())?;
            if let Some(path) = report {
                std::fs::write(path, serde_json::to_string_pretty(&rep)?)?;
            }
            Ok(rep.exit_code())
        }
        Command::Certify { input, cut, out: prefix } => {
            let set = read_set(input)?;
            if set.parties() != 3 {
                return Err(Error::Precondition(format!("certify needs 3 parties, got {}", set.parties())));
            }
            let measured = parse_measured(&set.dims, cut)?;
            let tol = tolerances(cli);
            let outcome = certify(&set, &measured, &tol)?;
            let cert = &outcome.certificate;
            let txt = prefix.with_extension("txt");
            let json = prefix.with_extension("json");
            std::fs::write(&txt, cert.to_text())?;
            std::fs::write(&json, cert.to_json()?)?;
            writeln!(
                out,
                "{} measured {}: {} steps, {} zeros after the first phase, residual dim {} (gap {:.3e}, gap_min {:e})",
                set.name,
                measured,
                cert.steps.len(),
                outcome.first_phase.zero_count(),
                outcome.residual.dim,
                outcome.residual.gap_ratio,
                tol.gap_min
            )?;
            writeln!(out, "wrote {} and {}", txt.display(), json.display())?;
            Ok(if outcome.residual.dim == 1 && outcome.residual.gap_ratio >= tol.gap_min { EXIT_OK } else { EXIT_INCONCLUSIVE })
        }
        Command::Report { dmin, dmax, out: path, caps } => {
            let opts = options(cli, caps);
            let rows = sweep(*dmin, *dmax, &opts)?;
            write_csv(&rows, std::fs::File::create(path)?)?;
            let t = opts.tol;
            writeln!(
                out,
                "wrote {} rows to {} (tolerances: zero {:e}, rank {:e}, psd {:e}, gap_min {:e}; upb d <= {}, opm d <= {})",
                rows.len(),
                path.display(),
                t.zero,
                t.rank,
                t.psd,
                t.gap_min,
                opts.upb_max_d,
                opts.opm_max_d
            )?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let pool = jobs(cli.jobs).and_then(|n| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Resource(e.to_string()))
    });
    let result = match pool {
        Ok(pool) => pool.install(|| execute(&cli, out)),
        Err(e) => Err(e),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
