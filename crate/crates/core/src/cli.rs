//! Command-line front end. [`run`] parses arguments, dispatches, and returns
//! the exit code together with the serialized report.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::arith::{Budget, Rational};
use crate::error::{Error, Result};
use crate::lattice::{Coset, IntegralLattice};
use crate::local::{self, LocalOptions};
use crate::poly::QuadPoly;
use crate::reduce;
use crate::search::{self, SearchConfig};
use crate::triangular::TriangularForm;

pub const EXIT_DECIDED: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;

/// Environment variable overriding enumeration ceilings. Either a single
/// point count or `points=N,sieve=M`.
pub const BUDGET_ENV: &str = "QPOLY_BUDGET";

#[derive(Debug, Parser)]
#[command(name = "qpoly", version, about = "Representations by positive integral quadratic polynomials")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    /// Output format: JSON lines or CSV.
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Enumeration ceiling: `N` points, or `points=N,sieve=M`.
    #[arg(long, env = BUDGET_ENV, global = true)]
    pub budget: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct FormInput {
    /// Inline form: `tri 1,2,3`, `quadpoly n=.. G=.. L=.. c=..`, or JSON.
    #[arg(long, required_unless_present = "input")]
    pub form: Option<String>,
    /// File with one form per line.
    #[arg(long, conflicts_with = "form")]
    pub input: Option<PathBuf>,
}

impl FormInput {
    fn forms(&self) -> Result<Vec<QuadPoly>> {
        if let Some(text) = &self.form {
            return Ok(vec![text.parse()?]);
        }
        let path = self.input.as_ref().ok_or_else(|| Error::invalid("no form given"))?;
        let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| l.parse().map_err(|e| Error::invalid(format!("line {}: {e}", i + 1))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TriCheck {
    /// Every natural number is represented (sieve with `--no-toe`).
    Universal,
    /// Every locally represented value up to `--bound` is represented.
    Regular,
    /// The eight targets 1, 2, 4, 5, 8 are represented.
    Eight,
}

#[derive(Debug, Subcommand)]
pub enum SearchCommand {
    /// Escalate to every universal ternary triangular form.
    Universal {
        /// Largest coefficient the escalator may add.
        #[arg(long, default_value_t = 30)]
        coeff_bound: i128,
        /// Values checked up to this bound.
        #[arg(long, default_value_t = 5000)]
        verify_n: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Sweep primitive ternary triangular forms for regularity.
    Regular {
        /// Largest discriminant α₁α₂α₃ swept.
        #[arg(long, default_value_t = 100)]
        disc_bound: i128,
        /// Values checked up to this bound.
        #[arg(long, default_value_t = 5000)]
        verify_n: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a polynomial at an integer vector.
    Eval {
        #[command(flatten)]
        input: FormInput,
        /// Comma separated integer vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<i128>,
    },
    /// Reduce a ternary polynomial to its canonical form.
    Reduce {
        #[command(flatten)]
        input: FormInput,
    },
    /// Decide affine equivalence of two ternary polynomials.
    Equiv {
        /// First polynomial.
        #[arg(long)]
        form: String,
        /// Second polynomial.
        #[arg(long)]
        other: String,
    },
    /// Decide whether `f(x) = a` is soluble over the p-adic integers.
    Local {
        #[command(flatten)]
        input: FormInput,
        /// Value `a` to represent.
        #[arg(long, allow_hyphen_values = true)]
        target: i128,
        /// Prime `p`.
        #[arg(long)]
        prime: i64,
        /// Deepest residue level searched; defaults to the decisive level.
        #[arg(long)]
        max_exp: Option<u32>,
    },
    /// Universality and regularity checks for triangular forms.
    Tri {
        /// Coefficients α₁,α₂,... of Σ αᵢ xᵢ(xᵢ+1)/2.
        #[arg(long, value_delimiter = ',')]
        coeffs: Vec<i128>,
        /// Which property to decide.
        #[arg(long, value_enum)]
        check: TriCheck,
        /// Values checked up to this bound.
        #[arg(long, default_value_t = 1000)]
        bound: u64,
        /// Decide universality by sieve up to `--bound` instead of the eight targets.
        #[arg(long)]
        no_toe: bool,
    },
    /// Represent a rational by a lattice coset `M + v`.
    Coset {
        /// Doubled Gram matrix as a JSON array.
        #[arg(long)]
        gram: String,
        /// Shift vector, comma separated rationals such as `1/2,0,1/2`.
        #[arg(long, allow_hyphen_values = true)]
        shift: String,
        /// Rational norm to represent.
        #[arg(long, allow_hyphen_values = true)]
        represent: String,
    },
    /// Search for universal or regular ternary triangular forms.
    #[command(subcommand)]
    Search(SearchCommand),
}

/// Exit code plus the text written to the report sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn parse_budget(text: &str) -> Result<Budget> {
    let mut b = Budget::default();
    let text = text.trim();
    if let Ok(n) = text.parse::<u64>() {
        b.max_points = n;
        return Ok(b);
    }
    for part in text.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("bad budget item `{part}`")))?;
        let v: u64 = v.trim().parse().map_err(|_| Error::invalid(format!("bad budget value `{v}`")))?;
        match k.trim() {
            "points" => b.max_points = v,
            "sieve" => b.max_sieve = v,
            other => return Err(Error::invalid(format!("unknown budget key `{other}`"))),
        }
    }
    if b.max_points == 0 {
        return Err(Error::invalid("budget must be positive"));
    }
    Ok(b)
}

/// Parses `n` or `n/d`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::invalid(format!("bad rational `{s}`"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i128 = n.trim().parse().map_err(|_| bad())?;
            let d: i128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// `n` or `n/d`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Tags a report as decided and turns it into a JSON object.
fn record<T: Serialize>(report: &T) -> Value {
    let mut v = serde_json::to_value(report).expect("reports serialize");
    if let Value::Object(m) = &mut v {
        m.insert("decided".into(), Value::Bool(true));
    }
    v
}

fn run_command(cli: &Cli, budget: Budget) -> Result<Vec<Value>> {
    match &cli.command {
        Command::Eval { input, at } => input
            .forms()?
            .iter()
            .map(|f| {
                let value = f.evaluate(at)?;
                Ok(record(&EvalReport { form: f.to_string(), at: at.clone(), value: format_rational(&value) }))
            })
            .collect(),
        Command::Reduce { input } => input
            .forms()?
            .iter()
            .map(|f| {
                let r = reduce::minkowski_reduce(f)?;
                let completion = f.complete_with(budget.max_points)?;
                Ok(record(&ReduceReport {
                    form: f.to_string(),
                    reduced_text: r.reduced.to_string(),
                    minimum: format_rational(&completion.int_min),
                    reduction: r,
                }))
            })
            .collect(),
        Command::Equiv { form, other } => {
            let f: QuadPoly = form.parse()?;
            let g: QuadPoly = other.parse()?;
            let t = reduce::equivalence(&f, &g)?;
            Ok(vec![record(&EquivReport { equivalent: t.is_some(), transform: t })])
        }
        Command::Local { input, target, prime, max_exp } => {
            let opts = LocalOptions { max_exp: *max_exp, budget };
            input
                .forms()?
                .iter()
                .map(|f| Ok(record(&local::represents_locally(f, *target, *prime, &opts)?)))
                .collect()
        }
        Command::Tri { coeffs, check, bound, no_toe } => {
            let d = TriangularForm::new(coeffs.clone())?;
            Ok(vec![tri_report(&d, *check, *bound, *no_toe, budget)?])
        }
        Command::Coset { gram, shift, represent } => {
            let g: Vec<Vec<i128>> =
                serde_json::from_str(gram).map_err(|e| Error::parse(e.column().saturating_sub(1), e.to_string()))?;
            let v = shift.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?;
            let a = parse_rational(represent)?;
            let coset = Coset::new(IntegralLattice::new(g)?, v)?;
            let witness = coset.represents_with(a, budget.max_points)?;
            Ok(vec![record(&CosetReport {
                target: format_rational(&a),
                represented: witness.is_some(),
                witness,
                index: coset.index(),
            })])
        }
        Command::Search(cmd) => {
            let report = match *cmd {
                SearchCommand::Universal { coeff_bound, verify_n, jobs } => {
                    let cfg = SearchConfig { coeff_bound, verify_n, jobs, budget, ..SearchConfig::default() };
                    search::escalate_universal_ternary(&cfg)?
                }
                SearchCommand::Regular { disc_bound, verify_n, jobs } => {
                    let cfg = SearchConfig { disc_bound, verify_n, jobs, budget, ..SearchConfig::default() };
                    search::enumerate_regular_ternary(&cfg)?
                }
            };
            let mut out: Vec<Value> = report.candidates.iter().map(record).collect();
            let summary = SearchSummary {
                summary: true,
                kind: report.kind,
                candidates: report.candidates.len(),
                rejected: report.rejected.len(),
                coverage: report.coverage.clone(),
                config: report.config,
                elapsed_ms: report.elapsed_ms,
            };
            out.push(record(&summary));
            Ok(out)
        }
    }
}

fn tri_report(d: &TriangularForm, check: TriCheck, bound: u64, no_toe: bool, budget: Budget) -> Result<Value> {
    let coeffs = d.coeffs().to_vec();
    let label = if check == TriCheck::Eight { "eight" } else { "universal" };
    match check {
        TriCheck::Eight | TriCheck::Universal if !no_toe => {
            let failures = d.eight_failures();
            let truant = if failures.is_empty() { None } else { d.truant(i128::from(u32::MAX)) };
            Ok(record(&TriUniversal {
                coeffs,
                check: label.into(),
                method: "theorem_of_eight".into(),
                universal: failures.is_empty(),
                failures,
                truant,
                bound: None,
            }))
        }
        TriCheck::Eight | TriCheck::Universal => {
            let missing = d.first_unrepresented(bound, &budget)?;
            Ok(record(&TriUniversal {
                coeffs,
                check: label.into(),
                method: "sieve".into(),
                universal: missing.is_none(),
                failures: Vec::new(),
                truant: missing,
                bound: Some(bound),
            }))
        }
        TriCheck::Regular => {
            let opts = LocalOptions { max_exp: None, budget };
            let verdict = d.is_regular_up_to(bound, &opts)?;
            Ok(record(&TriRegular { coeffs, check: "regular".into(), regular: verdict.is_regular_up_to_bound(), verdict }))
        }
    }
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct EvalReport {
    pub form: String,
    pub at: Vec<i128>,
    /// Exact value, `n` or `n/d`.
    pub value: String,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct ReduceReport {
    pub form: String,
    pub reduced_text: String,
    pub minimum: String,
    pub reduction: reduce::Reduction,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct EquivReport {
    pub equivalent: bool,
    pub transform: Option<crate::poly::AffineTransform>,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct TriUniversal {
    pub coeffs: Vec<i128>,
    pub check: String,
    pub method: String,
    pub universal: bool,
    pub failures: Vec<i128>,
    pub truant: Option<i128>,
    pub bound: Option<u64>,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct TriRegular {
    pub coeffs: Vec<i128>,
    pub check: String,
    pub regular: bool,
    pub verdict: crate::triangular::RegularityVerdict,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct CosetReport {
    pub target: String,
    pub represented: bool,
    pub witness: Option<Vec<i128>>,
    pub index: i128,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct SearchSummary {
    pub summary: bool,
    pub kind: search::SearchKind,
    pub candidates: usize,
    pub rejected: usize,
    pub coverage: search::Coverage,
    pub config: SearchConfig,
    pub elapsed_ms: u64,
}

fn csv_cell(v: &Value) -> String {
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// One header per distinct key set, then rows; nested values stay JSON.
fn to_csv(records: &[Value]) -> String {
    let mut out = String::new();
    let mut header: Option<Vec<String>> = None;
    for r in records {
        let Value::Object(m) = r else { continue };
        let keys: Vec<String> = m.keys().cloned().collect();
        if header.as_ref() != Some(&keys) {
            out.push_str(&keys.join(","));
            out.push('\n');
            header = Some(keys);
        }
        let row: Vec<String> = m.values().map(csv_cell).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn to_json_lines(records: &[Value]) -> String {
    records.iter().map(|r| r.to_string() + "\n").collect()
}

fn error_record(e: &Error) -> Value {
    let mut m = Map::new();
    m.insert("decided".into(), Value::Bool(false));
    m.insert("error".into(), Value::String(e.to_string()));
    Value::Object(m)
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_DECIDED };
            let text = e.render().to_string();
            return if code == EXIT_DECIDED {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let budget = match cli.budget.as_deref().map(parse_budget).transpose() {
        Ok(b) => b.unwrap_or_default(),
        Err(e) => return Outcome { code: EXIT_INPUT, stdout: String::new(), stderr: format!("error: {e}\n") },
    };
    let render = |records: &[Value]| match cli.format {
        Format::Json => to_json_lines(records),
        Format::Csv => to_csv(records),
    };
    let (code, stdout, stderr) = match run_command(&cli, budget) {
        Ok(records) => (EXIT_DECIDED, render(&records), String::new()),
        Err(e @ Error::BudgetExceeded(_)) => (EXIT_BUDGET, render(&[error_record(&e)]), format!("error: {e}\n")),
        Err(e) => (EXIT_INPUT, String::new(), format!("error: {e}\n")),
    };
    if let Some(path) = &cli.output {
        if let Err(e) = fs::write(path, &stdout) {
            return Outcome { code: EXIT_INPUT, stdout: String::new(), stderr: format!("error: {}: {e}\n", path.display()) };
        }
        return Outcome { code, stdout: String::new(), stderr };
    }
    Outcome { code, stdout, stderr }
}
