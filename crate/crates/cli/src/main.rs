mod document;
mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncmaj::algebra::{compress, ProjectionSystem, SpectralList};
use ncmaj::hermitian::{apply_function, max_abs_diff, CMatrix, Contraction, Hermitian, Spectrum, TOL};
use ncmaj::klyachko::{enumerate_admissible, klyachko_feasible_dominated, klyachko_feasible_sum, EnumerationOptions, MemoStore};
use ncmaj::majorization::{majorization_violation, schur_horn_construct, weak_majorization_violation};
use ncmaj::nc_schur_horn::{self as nc, Mode, SearchResolution, ShiftParameter};
use ncmaj::oracle::{cross_validate, OracleBudget, SumInstance};
use ncmaj::{Certificate, Decision, Execution, Verdict};
use serde_json::{json, Value};

use document::{read_hermitian, read_psd, MatrixDocument};

const EXIT_USAGE: u8 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no verified witness: {0}")]
    Unverified(String),
    #[error(transparent)]
    Core(#[from] ncmaj::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) | CliError::Core(ncmaj::Error::Infeasible(_) | ncmaj::Error::NotMajorized(_)) => 1,
            CliError::Unverified(_) | CliError::Core(ncmaj::Error::BudgetExhausted(_)) => 2,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ncmaj", version, about = "Extended majorization checks and witness constructions")]
struct Cli {
    /// Run every sweep on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide a relation and print a verdict object.
    #[command(subcommand)]
    Check(Check),
    /// Build a witness, verify it, and write it as matrix documents.
    #[command(subcommand)]
    Construct(Construct),
    /// List admissible index tuples for `n`, `m`.
    Admissible {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Allow sizes beyond the enumeration caps.
        #[arg(long)]
        force: bool,
    },
    /// Cross-validate the inequality engine against the orbit oracle.
    Validate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Unitary,
    Contractive,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Unitary => Mode::Unitary,
            ModeArg::Contractive => Mode::Contractive,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FunctionArg {
    /// `t²`
    Square,
    /// `2·max(t − 1, 0)`
    Hinge,
    /// `t·e^{t−1}`
    Texp,
}

impl FunctionArg {
    fn eval(self, t: f64) -> f64 {
        match self {
            FunctionArg::Square => t * t,
            FunctionArg::Hinge => 2.0 * (t - 1.0).max(0.0),
            FunctionArg::Texp => t * (t - 1.0).exp(),
        }
    }
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Oracle master seed.
    #[arg(long, default_value_t = 0)]
    budget_seed: u64,
    /// Oracle restarts.
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    /// Oracle iterations per restart.
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
}

impl BudgetArgs {
    fn budget(&self, exec: Execution) -> OracleBudget {
        OracleBudget { seed: self.budget_seed, restarts: self.restarts, iterations: self.iterations, exec, ..Default::default() }
    }
}

#[derive(Debug, Args)]
struct SpectrumSource {
    /// Inline spectrum of S, comma separated.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "matrix")]
    spectrum: Option<String>,
    /// Matrix document for S.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

impl SpectrumSource {
    fn load(&self) -> Result<Spectrum, CliError> {
        match (&self.spectrum, &self.matrix) {
            (Some(s), None) => parse_spectrum(s),
            (None, Some(p)) => Ok(read_hermitian(p)?.spectrum()),
            _ => Err(CliError::Usage("give exactly one of --spectrum or --matrix".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Check {
    /// `x ≺ y` (or `x ≺_w y` with --weak).
    Majorize {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long)]
        weak: bool,
    },
    /// `A ≺_l B` for Hermitian documents.
    ExtMajorize {
        #[arg(long)]
        list: String,
        a: PathBuf,
        b: PathBuf,
    },
    /// `A ≺_{l,w} B` for PSD documents.
    ExtSubmajorize {
        #[arg(long)]
        list: String,
        a: PathBuf,
        b: PathBuf,
    },
    /// Block spectra of a compression of S along --ranks.
    Block {
        #[arg(long)]
        ranks: String,
        #[arg(long, value_enum, default_value = "unitary")]
        mode: ModeArg,
        /// Shift for the unitary case; defaults to the operator norm.
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        source: SpectrumSource,
        /// One target spectrum per block, in order.
        #[arg(long = "target", allow_hyphen_values = true, required = true)]
        targets: Vec<String>,
    },
    /// Spectrum of a partial trace `Tr_m` of the orbit of S.
    PartialTrace {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value = "unitary")]
        mode: ModeArg,
        #[command(flatten)]
        source: SpectrumSource,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
    },
    /// `λ⁰` is the spectrum of a sum with summand spectra `λⁱ`.
    KlyachkoSum {
        #[arg(long, allow_hyphen_values = true)]
        l0: String,
        #[arg(long = "li", allow_hyphen_values = true, required = true)]
        li: Vec<String>,
    },
    /// `λ⁰` dominates the spectrum of such a sum.
    KlyachkoDominated {
        #[arg(long, allow_hyphen_values = true)]
        l0: String,
        #[arg(long = "li", allow_hyphen_values = true, required = true)]
        li: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum Construct {
    /// Hermitian matrix with diagonal x and spectrum y.
    SchurHorn {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Unitaries U, U′ with `E(U*BU) = U′*AU′` for `A ≺_l B`.
    Witness {
        #[arg(long)]
        list: String,
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Block-Fourier unitary equalizing all `d × d` blocks of A.
    NcHorn {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        a: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Unitaries U, V with `U*f(A)U + V*f(B)V ≤ f(A+B)`.
    Bourin {
        #[arg(long, value_enum, default_value = "square")]
        f: FunctionArg,
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Contraction carrying `f(B)` to the blocks `f(A_i)` of `A = E(W*BW)`.
    Transport {
        #[arg(long)]
        ranks: String,
        #[arg(long, value_enum, default_value = "square")]
        f: FunctionArg,
        b: PathBuf,
        w: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Non-convexity example for compressed unitary orbits.
    Counterexample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ranks: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("`{t}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(v)
            } else {
                Err(CliError::Usage(format!("non-finite value in `{s}`")))
            }
        })
}

fn parse_spectrum(s: &str) -> Result<Spectrum, CliError> {
    Ok(Spectrum::new(parse_values(s)?))
}

fn parse_ranks(s: &str) -> Result<ProjectionSystem, CliError> {
    let ranks = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| CliError::Usage(format!("`{t}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProjectionSystem::new(ranks)?)
}

fn parse_list(s: &str) -> Result<SpectralList, CliError> {
    s.parse::<SpectralList>().map_err(CliError::Core)
}

fn emit(value: &Value) {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn decided(d: &Decision) -> Result<u8, CliError> {
    emit(&report::verdict(d));
    Ok(match d.verdict {
        Verdict::Feasible => 0,
        Verdict::Infeasible => 1,
        Verdict::Inconclusive => 2,
    })
}

fn write_docs(dir: &Path, docs: &[(&str, MatrixDocument)]) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    docs.iter()
        .map(|(name, doc)| {
            let path = dir.join(format!("{name}.json"));
            doc.write(&path)?;
            Ok(path.display().to_string())
        })
        .collect()
}

fn require(ok: bool, what: &str, value: f64) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Unverified(format!("{what} = {value:e} exceeds tolerance")))
    }
}

fn check(cmd: Check) -> Result<u8, CliError> {
    let d = match cmd {
        Check::Majorize { x, y, weak } => {
            let (x, y) = (parse_values(&x)?, parse_values(&y)?);
            let v = if weak { weak_majorization_violation(&y, &x)? } else { majorization_violation(&y, &x)? };
            match v {
                None => Decision::feasible(),
                Some(v) => Decision::infeasible(Certificate::Majorization { k: v.k, lhs: v.lhs, rhs: v.rhs }),
            }
        }
        Check::ExtMajorize { list, a, b } => nc::ext_majorizes(&read_hermitian(&a)?, &read_hermitian(&b)?, &parse_list(&list)?)?,
        Check::ExtSubmajorize { list, a, b } => nc::ext_submajorizes(&read_psd(&a)?, &read_psd(&b)?, &parse_list(&list)?)?,
        Check::Block { ranks, mode, alpha, source, targets } => {
            let ls = source.load()?;
            let ranks = parse_ranks(&ranks)?;
            let targets = targets.iter().map(|t| parse_spectrum(t)).collect::<Result<Vec<_>, _>>()?;
            match Mode::from(mode) {
                Mode::Unitary => {
                    let alpha = alpha.map(ShiftParameter::new).transpose()?;
                    nc::block_feasible_unitary(&ls, &targets, &ranks, alpha)?
                }
                Mode::Contractive => {
                    if alpha.is_some() {
                        return Err(CliError::Usage("--alpha applies to the unitary mode only".into()));
                    }
                    nc::block_feasible_contractive(&ls, &targets, &ranks)?
                }
            }
        }
        Check::PartialTrace { d, m, mode, source, target } => nc::partial_trace_feasible(
            &source.load()?,
            &parse_spectrum(&target)?,
            d,
            m,
            mode.into(),
            &SearchResolution::default(),
        )?,
        Check::KlyachkoSum { l0, li } => {
            let ls = li.iter().map(|s| parse_spectrum(s)).collect::<Result<Vec<_>, _>>()?;
            klyachko_feasible_sum(&parse_spectrum(&l0)?, &ls)?
        }
        Check::KlyachkoDominated { l0, li } => {
            let ls = li.iter().map(|s| parse_spectrum(s)).collect::<Result<Vec<_>, _>>()?;
            klyachko_feasible_dominated(&parse_spectrum(&l0)?, &ls)?
        }
    };
    decided(&d)
}

fn construct(cmd: Construct, exec: Execution) -> Result<u8, CliError> {
    let report = match cmd {
        Construct::SchurHorn { x, y, output } => {
            let (x, y) = (parse_values(&x)?, parse_values(&y)?);
            let a = schur_horn_construct(&x, &y)?;
            let diag = a.diagonal().iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            let spec = a.spectrum().values().iter().zip(Spectrum::new(y).values()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            require(diag <= TOL.witness, "diagonal residual", diag)?;
            require(spec <= TOL.witness, "spectrum residual", spec)?;
            let doc = MatrixDocument::from_matrix(a.matrix(), "A", true);
            let mut r = json!({ "verification": { "diagonal_residual": diag, "spectrum_residual": spec } });
            match output {
                Some(p) => {
                    doc.write(&p)?;
                    r["outputs"] = json!([p.display().to_string()]);
                }
                None => r["matrix"] = serde_json::to_value(&doc).expect("documents serialize"),
            }
            r
        }
        Construct::Witness { list, a, b, out_dir, budget } => {
            let (a, b, l) = (read_hermitian(&a)?, read_hermitian(&b)?, parse_list(&list)?);
            let w = nc::construct_expectation_witness(&a, &b, &l, &budget.budget(exec)).map_err(|e| match e {
                ncmaj::Error::Precondition(msg) => CliError::Unverified(msg),
                other => CliError::Core(other),
            })?;
            require(w.residual <= TOL.witness, "expectation residual", w.residual)?;
            let outputs = write_docs(
                &out_dir,
                &[("U", MatrixDocument::from_matrix(w.u.matrix(), "U", false)), ("U_prime", MatrixDocument::from_matrix(w.u_prime.matrix(), "U'", false))],
            )?;
            json!({ "verification": { "expectation_residual": w.residual }, "outputs": outputs })
        }
        Construct::NcHorn { d, m, a, out_dir } => {
            let a = read_psd(&a)?;
            let h = nc::nc_horn_lemma(&a, d, m)?;
            let trace_gap = (h.d.hermitian().trace() - a.hermitian().trace()).abs();
            let p = ProjectionSystem::new(vec![d; m])?;
            let mut factor = 0.0f64;
            let mut sum = CMatrix::zeros(d * m, d * m);
            for (i, (x, u)) in h.factors.iter().zip(&h.factor_unitaries).enumerate() {
                let xx = x * x.adjoint();
                sum += &xx;
                let got = u.matrix().adjoint() * xx * u.matrix();
                factor = factor.max(max_abs_diff(&got, &ncmaj::algebra::embed_block(&p, i, h.d.matrix())));
            }
            factor = factor.max(max_abs_diff(&sum.map(|z| z / m as f64), a.matrix()));
            require(h.residual <= 1e-10 * a.hermitian().trace().abs().max(1.0), "block residual", h.residual)?;
            require(factor <= 1e-8 * a.hermitian().trace().abs().max(1.0), "factor residual", factor)?;
            let outputs = write_docs(
                &out_dir,
                &[("U", MatrixDocument::from_matrix(h.u.matrix(), "U", false)), ("D", MatrixDocument::from_matrix(h.d.matrix(), "D", true))],
            )?;
            json!({
                "verification": { "block_residual": h.residual, "trace_residual": trace_gap, "factor_residual": factor },
                "outputs": outputs,
            })
        }
        Construct::Bourin { f, a, b, out_dir, budget } => {
            let (a, b) = (read_psd(&a)?, read_psd(&b)?);
            let out = nc::bourin_decomposition(&|t| f.eval(t), &a, &b, &budget.budget(exec))?;
            let outputs = write_docs(
                &out_dir,
                &[("U", MatrixDocument::from_matrix(out.u.matrix(), "U", false)), ("V", MatrixDocument::from_matrix(out.v.matrix(), "V", false))],
            )?;
            json!({ "verification": { "min_eigenvalue": out.min_eigenvalue, "via_oracle": out.via_oracle }, "outputs": outputs })
        }
        Construct::Transport { ranks, f, b, w, out_dir } => {
            let (b, p) = (read_psd(&b)?, parse_ranks(&ranks)?);
            let w = Contraction::new(MatrixDocument::read(&w)?.to_matrix()?)?;
            let g = |t: f64| f.eval(t);
            let wt = nc::monotone_transport(&g, &b, &w, &p)?;
            let fb = apply_function(g, b.hermitian())?;
            let got = compress(&p, &(wt.matrix().adjoint() * fb.matrix() * wt.matrix()))?;
            let base = compress(&p, &(w.matrix().adjoint() * b.matrix() * w.matrix()))?;
            let mut residual = 0.0f64;
            for (x, y) in got.blocks().iter().zip(base.blocks()) {
                let fy = apply_function(g, &Hermitian::symmetrized(y.clone()))?;
                residual = residual.max(max_abs_diff(x, fy.matrix()));
            }
            require(residual <= 1e-7 * fb.matrix().iter().map(|z| z.norm()).fold(1.0, f64::max), "compression residual", residual)?;
            let outputs = write_docs(&out_dir, &[("W_transport", MatrixDocument::from_matrix(wt.matrix(), "W~", false))])?;
            json!({ "verification": { "compression_residual": residual, "norm": wt.norm() }, "outputs": outputs })
        }
        Construct::Counterexample { n, ranks, out_dir } => {
            let ce = nc::convexity_counterexample(n, &parse_ranks(&ranks)?)?;
            require(ce.midpoint_residual == 0.0, "midpoint residual", ce.midpoint_residual)?;
            let outputs = write_docs(
                &out_dir,
                &[
                    ("S", MatrixDocument::from_matrix(ce.s.matrix(), "S", true)),
                    ("V", MatrixDocument::from_matrix(ce.v.matrix(), "V", false)),
                    ("T", MatrixDocument::from_matrix(ce.t.matrix(), "T", true)),
                ],
            )?;
            json!({
                "verification": { "midpoint_residual": ce.midpoint_residual },
                "decision": report::verdict(&ce.decision),
                "outputs": outputs,
            })
        }
    };
    emit(&report);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Check(c) => check(c),
        Command::Construct(c) => construct(c, exec),
        Command::Admissible { n, m, force } => {
            let opts = EnumerationOptions { force, memo: Some(MemoStore::from_env()), exec };
            let mut out = std::io::stdout().lock();
            for t in enumerate_admissible(n, m, &opts)? {
                if writeln!(out, "{}", t.to_line()).is_err() {
                    break;
                }
            }
            Ok(0)
        }
        Command::Validate { n, m, samples, seed, budget } => {
            let instances: Vec<SumInstance> =
                (0..samples).map(|i| SumInstance::random(n, m, seed.wrapping_add(i as u64))).collect();
            let rep = cross_validate(&instances, klyachko_feasible_sum, &budget.budget(exec))?;
            emit(&json!({
                "samples": samples,
                "feasible": rep.feasible_count(),
                "feasible_witnessed": rep.feasible_with_witness(1e-6),
                "agreements": rep.agreements,
                "suspicious": rep.suspicious,
                "hard_failures": rep.hard_failures,
                "conventions-version": ncmaj::CONVENTIONS_VERSION,
            }));
            Ok(if rep.hard_failures.is_empty() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ncmaj: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn arguments_are_well_formed() {
        Cli::command().debug_assert();
    }
}
