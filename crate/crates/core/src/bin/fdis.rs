use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use intelligent_states::nonclassicality::full_report;
use intelligent_states::scan::{self, Format, ScanSpec, Sweep, SweepParam};
use intelligent_states::states::{self, Case, IntelligentStateRequest, TruncationPolicy};
use intelligent_states::verify::{self, VerifyOptions};
use intelligent_states::{Error, NonlinearityFunction};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "fdis", version, about = "Build and analyse f-deformed intelligent states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one state and print its amplitudes as JSON.
    State {
        #[command(flatten)]
        params: StateParams,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter and tabulate the statistics of every point.
    Scan {
        #[command(flatten)]
        params: StateParams,
        /// `z|lambda|eta=start:stop:steps`
        #[arg(long)]
        sweep: Sweep,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Run the invariant suite.
    Verify {
        #[arg(long)]
        quick: bool,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Args)]
struct StateParams {
    /// identity, trapped-ion, harmonious, hydrogen, penson-solomon,
    /// dual:<name> or spectrum:<file>
    #[arg(long = "f")]
    f: String,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// `RE[,IM]`
    #[arg(long, allow_hyphen_values = true, value_parser = parse_z)]
    z: Option<Complex64>,
    #[arg(long = "case", value_enum, default_value_t = CaseArg::Auto)]
    case: CaseArg,
    #[arg(long, default_value_t = 1e-12)]
    tail_eps: f64,
    #[arg(long, default_value_t = 512)]
    n_max: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Auto,
    I,
    Iii,
    Iv,
}

impl CaseArg {
    fn forced(self) -> Option<Case> {
        match self {
            CaseArg::Auto => None,
            CaseArg::I => Some(Case::I),
            CaseArg::Iii => Some(Case::III),
            CaseArg::Iv => Some(Case::IV),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn parse_z(s: &str) -> Result<Complex64, String> {
    let parse = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse(re)?, parse(im)?)),
        None => Ok(Complex64::new(parse(s)?, 0.0)),
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {}: {e}", e.name());
    ExitCode::from(EXIT_USAGE)
}

fn cmd_state(p: &StateParams, out: Option<&PathBuf>) -> Result<(), Error> {
    let lambda = p.lambda.ok_or_else(|| Error::InvalidParam("--lambda is required".into()))?;
    let z = p.z.unwrap_or_default();
    let f = NonlinearityFunction::parse(&p.f, p.eta, p.q)?;
    let truncation = TruncationPolicy::new(p.tail_eps, p.n_max)?;
    let request = IntelligentStateRequest::with_case(f, lambda, z, truncation, p.case.forced())?;
    let state = states::build(&request)?;

    let mut w = output(out)?;
    serde_json::to_writer(&mut w, &state.to_dump(request.f.name(), lambda, z)).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;

    match full_report(&state, &request.f, lambda, z) {
        Ok(r) => eprintln!("case {} N={} {}", request.case_tag.label(), state.max_n(), r.summary()),
        Err(Error::VacuumUndefined) => eprintln!("case {} N={} vacuum: Q undefined", request.case_tag.label(), state.max_n()),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn cmd_scan(p: &StateParams, sweep: Sweep, out: Option<&PathBuf>, format: FormatArg) -> Result<bool, Error> {
    let lambda = match (sweep.param, p.lambda) {
        (SweepParam::Lambda, _) => 0.0,
        (_, Some(l)) => l,
        (_, None) => return Err(Error::InvalidParam("--lambda is required unless lambda is swept".into())),
    };
    if sweep.param == SweepParam::Z && p.z.is_some() {
        return Err(Error::InvalidParam("--z conflicts with a z sweep".into()));
    }
    let spec = ScanSpec {
        sweep,
        f_name: p.f.clone(),
        eta: p.eta,
        q: p.q,
        lambda,
        z: p.z.unwrap_or_default(),
        case: p.case.forced(),
        truncation: TruncationPolicy::new(p.tail_eps, p.n_max)?,
    };
    let rows = scan::run(&spec)?;
    let format = match format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let mut w = output(out)?;
    scan::write(&rows, format, &mut w)?;
    w.flush()?;
    let ok = rows.iter().filter(|r| r.result.is_ok()).count();
    eprintln!("{ok} of {} points ok", rows.len());
    Ok(ok > 0)
}

fn cmd_verify(quick: bool, inject_fault: bool) -> bool {
    let start = Instant::now();
    let report = verify::run(VerifyOptions { quick, inject_fault });
    for check in &report.checks {
        println!("{check}");
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!(
        "{} of {} checks passed in {:.2?}",
        report.checks.len() - failed,
        report.checks.len(),
        start.elapsed()
    );
    report.passed()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::State { params, out } => match cmd_state(&params, out.as_ref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        },
        Command::Scan { params, sweep, out, format } => match cmd_scan(&params, sweep, out.as_ref(), format) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => {
                eprintln!("error: no grid point could be evaluated");
                ExitCode::from(EXIT_USAGE)
            }
            Err(e) => fail(&e),
        },
        Command::Verify { quick, inject_fault } => {
            if cmd_verify(quick, inject_fault) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY_FAILED)
            }
        }
    }
}
