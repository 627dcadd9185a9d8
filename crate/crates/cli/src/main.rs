// Stdout writes that ignore a closed pipe, so `iwe ... | head` stops quietly
// and the exit code still reflects the verdict.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod render;

use std::fmt::Display;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use iwe::corpus::{self, CORPUS};
use iwe::domain::{IwRow, Outcome};
use iwe::invariants::{entry_bounds, Direction, EntryBound};
use iwe::oracle::{MatchStatus, OracleComparison};
use iwe::wp::{wp_entry_bounds, NonNegCheckReport, WpBound, WpEntryBound};
use iwe::{
    check_mixed_lower, check_mixed_upper, compare_with_wpt, enumerate_from, expected_value,
    parse_expression, parse_grid, parse_program, verify_lower_omega_invariant,
    verify_upper_invariant, wp_value, wpt_value, CertificateReport, EvalOptions, Expr, IwPairExpr,
    MixedCertificate, ProbGuard, Program, State,
};

#[derive(Parser)]
#[command(
    name = "iwe",
    version,
    about = "Weakest pre-expectations for mixed-sign expectations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print it in normal form.
    Parse {
        /// Program file, or `corpus:<name>` for a bundled program.
        program: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Classical weakest pre-expectation of a non-negative post.
    Wp {
        /// Program file, or `corpus:<name>` for a bundled program.
        program: String,
        /// Post-expectation; must be non-negative wherever the program ends.
        #[arg(long, allow_hyphen_values = true)]
        post: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Integrability-witnessing pre-expectation of a mixed-sign post.
    Wpt {
        /// Program file, or `corpus:<name>` for a bundled program.
        program: String,
        /// Post-expectation; may take both signs.
        #[arg(long, allow_hyphen_values = true)]
        post: String,
        /// Witness expression; defaults to `abs(post)`.
        #[arg(long, allow_hyphen_values = true)]
        witness: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Enumerate executions exactly up to a number of guard evaluations.
    Oracle {
        /// Program file, or `corpus:<name>` for a bundled program.
        program: String,
        /// Post whose partial expectation to report.
        #[arg(long, allow_hyphen_values = true)]
        post: Option<String>,
        /// Witness for --compare; defaults to `abs(post)`.
        #[arg(long, allow_hyphen_values = true)]
        witness: Option<String>,
        /// Guard evaluations explored per execution.
        #[arg(long, default_value_t = 40)]
        depth: usize,
        /// Compare against the transformer (needs --post).
        #[arg(long)]
        compare: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check a loop-invariant certificate on a grid of states.
    Check {
        /// Program file, or `corpus:<name>` for a bundled program.
        program: String,
        #[command(flatten)]
        mode: Mode,
        /// Post-expectation of the loop.
        #[arg(long, allow_hyphen_values = true)]
        post: String,
        /// Witness of a mixed-sign post; defaults to `abs(post)`.
        #[arg(long, allow_hyphen_values = true)]
        witness: Option<String>,
        /// Invariant `I` (--upper, --lower, --wp-upper).
        #[arg(long = "I", allow_hyphen_values = true)]
        inv: Option<String>,
        /// Witness invariant `G` (--upper, --lower).
        #[arg(long = "G", allow_hyphen_values = true)]
        witness_inv: Option<String>,
        /// Family `H_n` (--upper, --lower, --wp-lower).
        #[arg(long = "H", allow_hyphen_values = true)]
        family: Option<String>,
        /// Name of the family index in --H.
        #[arg(long, default_value = "n")]
        index: String,
        /// Members `H_0 .. H_n-max` of the family that are checked.
        #[arg(long, default_value_t = 50)]
        n_max: usize,
        /// Check the k-th loop of the program (1-based, in textual order).
        #[arg(long = "loop")]
        loop_index: Option<usize>,
        /// Initial states of the whole program at which to report the bound
        /// pushed back through the statements before the loop.
        #[arg(long)]
        entry: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// List the bundled programs, or print one.
    Corpus {
        /// Print the source of this entry instead of the list.
        name: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Mode {
    /// Mixed-sign upper bound.
    #[arg(long)]
    upper: bool,
    /// Mixed-sign lower bound.
    #[arg(long)]
    lower: bool,
    /// Non-negative upper invariant.
    #[arg(long)]
    wp_upper: bool,
    /// Non-negative lower omega-invariant.
    #[arg(long)]
    wp_lower: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Grid of initial states, e.g. `x=-3..3,y=0`.
    #[arg(long, alias = "state", default_value = "")]
    states: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Comparison tolerance for certificates and oracle checks.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Precision to which series and loops are evaluated.
    #[arg(long, default_value_t = 1e-12)]
    eval_tol: f64,
    /// Values above this are treated as divergent.
    #[arg(long, default_value_t = 1e9)]
    threshold: f64,
    /// Unfoldings allowed per loop evaluation.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Include per-iteration loop values in the output.
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

enum Failure {
    Check,
    Input(String),
    Eval(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check => 1,
            Failure::Input(_) => 2,
            Failure::Eval(_) => 3,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn input(e: impl Display) -> Failure {
    Failure::Input(e.to_string())
}

fn eval(e: impl Display) -> Failure {
    Failure::Eval(e.to_string())
}

struct Run {
    states: Vec<State>,
    opts: EvalOptions,
    tol: f64,
    format: Format,
}

impl RunArgs {
    fn resolve(&self) -> Result<Run, Failure> {
        for (name, v) in [
            ("tol", self.tol),
            ("eval-tol", self.eval_tol),
            ("threshold", self.threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::Input(format!("--{name} must be positive")));
            }
        }
        let states = parse_grid(&self.states).map_err(input)?;
        let mut opts = EvalOptions::default()
            .with_tol(self.eval_tol)
            .with_threshold(self.threshold)
            .with_max_iterations(self.max_iter);
        opts.trace = self.trace;
        Ok(Run {
            states,
            opts,
            tol: self.tol,
            format: self.format,
        })
    }
}

fn load_program(arg: &str) -> Result<Program, Failure> {
    let source = match arg.strip_prefix("corpus:") {
        Some(name) => corpus::lookup(name)
            .ok_or_else(|| Failure::Input(format!("no bundled program named `{name}`")))?
            .source
            .to_string(),
        None => std::fs::read_to_string(arg).map_err(|e| Failure::Input(format!("{arg}: {e}")))?,
    };
    parse_program(&source).map_err(|e| Failure::Input(format!("{arg}: {e}")))
}

fn expr(flag: &str, src: &str) -> Result<Expr, Failure> {
    parse_expression(src).map_err(|e| Failure::Input(format!("--{flag}: {e}")))
}

fn pair(post: &str, witness: Option<&str>) -> Result<IwPairExpr, Failure> {
    let f = expr("post", post)?;
    match witness {
        Some(w) => IwPairExpr::new(f, expr("witness", w)?),
        None => IwPairExpr::with_abs_witness(f),
    }
    .map_err(input)
}

/// Evaluates `f` at every state in parallel; the first error in grid order
/// wins.
fn per_state<T: Send>(
    states: &[State],
    f: impl Fn(&State) -> iwe::EvalResult<T> + Sync,
) -> Result<Vec<T>, Failure> {
    states
        .par_iter()
        .map(|s| f(s).map_err(|e| Failure::Eval(format!("at {s}: {e}"))))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn emit_json<T: Serialize>(v: &T) {
    outln!(
        "{}",
        serde_json::to_string_pretty(v).expect("reports serialise")
    );
}

#[derive(Serialize)]
struct ValueRow<V> {
    state: State,
    #[serde(flatten)]
    outcome: Outcome<V>,
}

#[derive(Serialize)]
struct Report<'a, R> {
    command: &'static str,
    program: &'a str,
    post: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
    rows: Vec<R>,
}

fn cmd_parse(program: &str, format: Format) -> CmdResult {
    let p = load_program(program)?;
    match format {
        Format::Text => outln!("{p}"),
        Format::Json => {
            #[derive(Serialize)]
            struct Parsed {
                program: String,
                variables: Vec<String>,
                loops: usize,
                loop_free: bool,
            }
            emit_json(&Parsed {
                program: p.to_string(),
                variables: iwe::frontend::free_variables(&p).into_iter().collect(),
                loops: p.loops().len(),
                loop_free: p.is_loop_free(),
            });
        }
    }
    Ok(())
}

fn cmd_wp(program: &str, post: &str, run: &RunArgs) -> CmdResult {
    let p = load_program(program)?;
    let f = expr("post", post)?;
    let run = run.resolve()?;
    let rows = per_state(&run.states, |s| {
        Ok(ValueRow {
            state: s.clone(),
            outcome: wp_value(&p, &f, s, &run.opts)?,
        })
    })?;
    match run.format {
        Format::Json => emit_json(&Report {
            command: "wp",
            program,
            post: f.to_string(),
            witness: None,
            rows,
        }),
        Format::Text => {
            for r in &rows {
                outln!("{}", render::wp_row(&r.state, &r.outcome));
            }
        }
    }
    Ok(())
}

fn cmd_wpt(program: &str, post: &str, witness: Option<&str>, run: &RunArgs) -> CmdResult {
    let p = load_program(program)?;
    let pe = pair(post, witness)?;
    let run = run.resolve()?;
    let rows = per_state(&run.states, |s| {
        Ok(IwRow::from_outcome(
            s.clone(),
            wpt_value(&p, &pe, s, &run.opts)?,
        ))
    })?;
    match run.format {
        Format::Json => emit_json(&Report {
            command: "wpt",
            program,
            post: pe.first.to_string(),
            witness: Some(pe.witness.to_string()),
            rows,
        }),
        Format::Text => {
            for r in &rows {
                outln!("{}", render::wpt_row(r));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleRow {
    state: State,
    distribution: iwe::SubDistribution,
    #[serde(skip_serializing_if = "Option::is_none")]
    expectation: Option<iwe::oracle::JordanReport>,
}

fn cmd_oracle(
    program: &str,
    post: Option<&str>,
    witness: Option<&str>,
    depth: usize,
    compare: bool,
    run: &RunArgs,
) -> CmdResult {
    let p = load_program(program)?;
    let run = run.resolve()?;
    if compare {
        let post = post.ok_or_else(|| Failure::Input("--compare needs --post".into()))?;
        let pe = pair(post, witness)?;
        let rows: Vec<OracleComparison> = per_state(&run.states, |s| {
            compare_with_wpt(&p, &pe, s, depth, run.tol, &run.opts)
        })?;
        match run.format {
            Format::Json => emit_json(&Report {
                command: "oracle",
                program,
                post: pe.first.to_string(),
                witness: Some(pe.witness.to_string()),
                rows: rows.clone(),
            }),
            Format::Text => {
                for r in &rows {
                    outln!("{}", render::comparison(r));
                }
            }
        }
        return if rows.iter().any(|r| r.status == MatchStatus::Mismatch) {
            Err(Failure::Check)
        } else {
            Ok(())
        };
    }
    let f = post.map(|src| expr("post", src)).transpose()?;
    let rows = per_state(&run.states, |s| {
        let distribution = enumerate_from(&p, s, depth, &run.opts.series)?;
        let expectation = match &f {
            Some(f) => Some(expected_value(
                &distribution,
                f,
                run.opts.loops.threshold,
                &run.opts.series,
            )?),
            None => None,
        };
        Ok(OracleRow {
            state: s.clone(),
            distribution,
            expectation,
        })
    })?;
    match run.format {
        Format::Json => emit_json(&Report {
            command: "oracle",
            program,
            post: f.map(|f| f.to_string()).unwrap_or_default(),
            witness: None,
            rows,
        }),
        Format::Text => {
            for r in &rows {
                out!(
                    "{}",
                    render::distribution(&r.state, &r.distribution, r.expectation.as_ref())
                );
            }
        }
    }
    Ok(())
}

struct CheckArgs<'a> {
    program: &'a str,
    mode: &'a Mode,
    post: &'a str,
    witness: Option<&'a str>,
    inv: Option<&'a str>,
    witness_inv: Option<&'a str>,
    family: Option<&'a str>,
    index: &'a str,
    n_max: usize,
    loop_index: Option<usize>,
    entry: Option<&'a str>,
    run: &'a RunArgs,
}

/// The loop to certify and, for `prefix; while ...` programs, the prefix.
fn select_loop(
    p: &Program,
    k: Option<usize>,
) -> Result<(ProbGuard, Program, Option<Program>), Failure> {
    if let Some(k) = k {
        let loops = p.loops();
        return match k.checked_sub(1).and_then(|i| loops.get(i)) {
            Some(Program::While(g, b)) => Ok((g.clone(), (**b).clone(), None)),
            _ => Err(Failure::Input(format!(
                "program has {} loop(s), no loop {k}",
                loops.len()
            ))),
        };
    }
    let stmts = p.statements();
    match stmts.split_last() {
        Some((Program::While(g, b), rest)) if rest.iter().all(|s| s.is_loop_free()) => {
            let prefix = Program::sequence(rest.iter().map(|s| (*s).clone()).collect());
            Ok((g.clone(), (**b).clone(), Some(prefix)))
        }
        _ => Err(Failure::Input(
            "the program does not end in a loop preceded by loop-free code; use --loop".into(),
        )),
    }
}

fn required<'a>(v: Option<&'a str>, flag: &str) -> Result<&'a str, Failure> {
    v.ok_or_else(|| Failure::Input(format!("this mode needs --{flag}")))
}

#[derive(Serialize)]
struct MixedCheckOutput<'a> {
    command: &'static str,
    program: &'a str,
    #[serde(flatten)]
    report: CertificateReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    entry: Vec<EntryBound>,
}

#[derive(Serialize)]
struct WpCheckOutput<'a> {
    command: &'static str,
    program: &'a str,
    direction: Direction,
    #[serde(flatten)]
    report: NonNegCheckReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    entry: Vec<WpEntryBound>,
}

fn cmd_check(a: CheckArgs) -> CmdResult {
    let p = load_program(a.program)?;
    let run = a.run.resolve()?;
    let (guard, body, prefix) = select_loop(&p, a.loop_index)?;
    let entries = match a.entry {
        Some(spec) => {
            if prefix.is_none() {
                return Err(Failure::Input(
                    "--entry cannot be combined with --loop".into(),
                ));
            }
            parse_grid(spec).map_err(input)?
        }
        None => Vec::new(),
    };
    let prefix = prefix.unwrap_or(Program::Skip);

    if a.mode.wp_upper || a.mode.wp_lower {
        let f = expr("post", a.post)?;
        let (report, bound, direction) = if a.mode.wp_upper {
            let inv = expr("I", required(a.inv, "I")?)?;
            let r =
                verify_upper_invariant(&guard, &body, &f, &inv, &run.states, run.tol, &run.opts);
            (r, WpBound::Upper(inv), Direction::Upper)
        } else {
            let h = expr("H", required(a.family, "H")?)?;
            let r = verify_lower_omega_invariant(
                &guard,
                &body,
                &f,
                &h,
                a.index,
                &run.states,
                a.n_max,
                run.tol,
                &run.opts,
            );
            (r, WpBound::Lower(h, a.index.to_string()), Direction::Lower)
        };
        let report = report.map_err(eval)?;
        let entry = if report.pass && !entries.is_empty() {
            wp_entry_bounds(
                &prefix,
                &guard,
                &body,
                &f,
                &bound,
                &run.states,
                &entries,
                run.tol,
                &run.opts,
            )
            .map_err(eval)?
        } else {
            Vec::new()
        };
        let pass = report.pass && entry.iter().all(|e| e.consistent);
        match run.format {
            Format::Json => emit_json(&WpCheckOutput {
                command: "check",
                program: a.program,
                direction,
                report,
                entry,
            }),
            Format::Text => out!("{}", render::wp_check(&report, &entry)),
        }
        return if pass { Ok(()) } else { Err(Failure::Check) };
    }

    let cert = MixedCertificate {
        guard,
        body,
        post: pair(a.post, a.witness)?,
        inv: expr("I", required(a.inv, "I")?)?,
        witness_inv: expr("G", required(a.witness_inv, "G")?)?,
        family: expr("H", required(a.family, "H")?)?,
        index: a.index.to_string(),
        grid: run.states.clone(),
        n_max: a.n_max,
        tol: run.tol,
    };
    let direction = if a.mode.upper {
        Direction::Upper
    } else {
        Direction::Lower
    };
    let report = match direction {
        Direction::Upper => check_mixed_upper(&cert, &run.opts),
        Direction::Lower => check_mixed_lower(&cert, &run.opts),
    }
    .map_err(eval)?;
    let entry = if report.pass && !entries.is_empty() {
        entry_bounds(&prefix, &cert, direction, &entries, &run.opts).map_err(eval)?
    } else {
        Vec::new()
    };
    let pass = report.pass && report.engine_consistent && entry.iter().all(|e| e.consistent);
    match run.format {
        Format::Json => emit_json(&MixedCheckOutput {
            command: "check",
            program: a.program,
            report,
            entry,
        }),
        Format::Text => out!("{}", render::mixed_check(&report, &entry)),
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn cmd_corpus(name: Option<&str>, format: Format) -> CmdResult {
    #[derive(Serialize)]
    struct Entry {
        name: &'static str,
        summary: &'static str,
        post: &'static str,
        states: &'static str,
        source: &'static str,
    }
    let entry = |e: &'static corpus::CorpusEntry| Entry {
        name: e.name,
        summary: e.summary,
        post: e.post,
        states: e.states,
        source: e.source,
    };
    match name {
        Some(n) => {
            let e = corpus::lookup(n)
                .ok_or_else(|| Failure::Input(format!("no bundled program named `{n}`")))?;
            match format {
                Format::Json => emit_json(&entry(e)),
                Format::Text => out!("{}", e.source),
            }
        }
        None => match format {
            Format::Json => emit_json(&CORPUS.iter().map(entry).collect::<Vec<_>>()),
            Format::Text => {
                for e in &CORPUS {
                    outln!("{:<14} {}", e.name, e.summary);
                }
            }
        },
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("IWE_WP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Only fails if a pool was already built, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Parse { program, format } => cmd_parse(program, *format),
        Command::Wp { program, post, run } => cmd_wp(program, post, run),
        Command::Wpt {
            program,
            post,
            witness,
            run,
        } => cmd_wpt(program, post, witness.as_deref(), run),
        Command::Oracle {
            program,
            post,
            witness,
            depth,
            compare,
            run,
        } => cmd_oracle(
            program,
            post.as_deref(),
            witness.as_deref(),
            *depth,
            *compare,
            run,
        ),
        Command::Check {
            program,
            mode,
            post,
            witness,
            inv,
            witness_inv,
            family,
            index,
            n_max,
            loop_index,
            entry,
            run,
        } => cmd_check(CheckArgs {
            program,
            mode,
            post,
            witness: witness.as_deref(),
            inv: inv.as_deref(),
            witness_inv: witness_inv.as_deref(),
            family: family.as_deref(),
            index,
            n_max: *n_max,
            loop_index: *loop_index,
            entry: entry.as_deref(),
            run,
        }),
        Command::Corpus { name, format } => cmd_corpus(name.as_deref(), *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Check => {}
                Failure::Input(m) | Failure::Eval(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
