//! Command-line driver: analyze filtrations, run check suites, generate
//! corpus files, and verify or solve Sen operators on module records.
//!
//! Exit codes: 0 all pass; 1 at least one failing check; 2 usage or parse
//! error; 3 inconclusive-at-precision present and --strict set.

use bkfilt::bk::{matching_check, BKModule};
use bkfilt::corpus::{corpus_generate, CorpusKind, CorpusParams};
use bkfilt::error::Error as CoreError;
use bkfilt::format::ModuleSpec;
use bkfilt::modp::ModpBK;
use bkfilt::report::Report;
use bkfilt::sen;
use bkfilt::suite::{run_suite, SuiteKind};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bkfilt", version, about = "Filtration engine for effective Breuil-Kisin modules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PrecOverride {
    /// lower the p-adic precision exponent when loading
    #[arg(long = "prec-np")]
    prec_np: Option<u32>,
    /// lower the u-adic truncation order when loading
    #[arg(long = "prec-nu")]
    prec_nu: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Filtrations and graded-invariant table for one module file
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        prec: PrecOverride,
    },
    /// Mod-p analysis: jumps, sub-Hodge dimensions, unaligned criterion
    Modp {
        file: PathBuf,
        #[command(flatten)]
        prec: PrecOverride,
    },
    /// Run a check suite over the module file (single record or an array)
    Check {
        file: PathBuf,
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// exit 3 when inconclusive-at-precision records are present
        #[arg(long)]
        strict: bool,
        /// write the JSON report here in addition to the text table
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        prec: PrecOverride,
    },
    /// Generate corpus module files
    Corpus {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        p: u64,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long = "prec-np", default_value_t = 6)]
        prec_np: u32,
        #[arg(long)]
        max_weight: Option<u32>,
        #[arg(long, default_value_t = 3)]
        max_rank: usize,
    },
    /// Sen-operator verification and solving
    Sen {
        #[command(subcommand)]
        action: SenAction,
    },
}

#[derive(Subcommand)]
enum SenAction {
    /// Verify the sen_operator field of the file against the theorems
    Verify {
        file: PathBuf,
        #[command(flatten)]
        prec: PrecOverride,
    },
    /// Solve for an operator on a crystalline-flagged module
    Solve {
        file: PathBuf,
        #[command(flatten)]
        prec: PrecOverride,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Analyze { file, prec } => analyze(&file, &prec),
        Command::Modp { file, prec } => modp(&file, &prec),
        Command::Check {
            file,
            suite,
            seed,
            strict,
            out,
            prec,
        } => check(&file, &suite, seed, strict, out.as_deref(), &prec),
        Command::Corpus {
            kind,
            seed,
            out,
            p,
            count,
            prec_np,
            max_weight,
            max_rank,
        } => corpus(&kind, seed, &out, p, count, prec_np, max_weight, max_rank),
        Command::Sen { action } => match action {
            SenAction::Verify { file, prec } => sen_verify(&file, &prec),
            SenAction::Solve { file, prec } => sen_solve(&file, &prec),
        },
    }
}

fn load_specs(path: &Path, prec: &PrecOverride) -> Result<Vec<ModuleSpec>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut specs: Vec<ModuleSpec> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| format!("parse: {e}"))?
    } else {
        vec![ModuleSpec::parse(&text).map_err(|e| e.to_string())?]
    };
    for spec in specs.iter_mut() {
        if let Some(np) = prec.prec_np {
            if np > spec.n_p {
                return Err(format!(
                    "--prec-np {np} exceeds the file's n_p = {}; coefficients are \
                     only stored mod p^n_p, so precision can be lowered, not raised",
                    spec.n_p
                ));
            }
            spec.n_p = np;
        }
        if let Some(nu) = prec.prec_nu {
            if nu > spec.n_u {
                return Err(format!(
                    "--prec-nu {nu} exceeds the file's n_u = {}",
                    spec.n_u
                ));
            }
            spec.n_u = nu;
            for row in spec.a.iter_mut() {
                for entry in row.iter_mut() {
                    entry.truncate(nu);
                }
            }
        }
    }
    Ok(specs)
}

fn load_one(path: &Path, prec: &PrecOverride) -> Result<(ModuleSpec, BKModule), String> {
    let specs = load_specs(path, prec)?;
    if specs.len() != 1 {
        return Err("this subcommand takes a single-module file".into());
    }
    let spec = specs.into_iter().next().unwrap();
    let module = spec.to_module().map_err(|e| e.to_string())?;
    Ok((spec, module))
}

fn analyze(path: &Path, prec: &PrecOverride) -> Result<u8, String> {
    let (_, module) = load_one(path, prec)?;
    let analysis = module.analyze().map_err(|e| e.to_string())?;
    println!(
        "module {} | rank {} | height {} | p = {}, N = {}, M = {}",
        module.label(),
        module.rank(),
        module.height(),
        module.prec().p(),
        module.prec().n_p(),
        module.prec().n_u()
    );
    println!(
        "derived weights: {:?}{}",
        analysis.derived_weights,
        match module.declared_weights() {
            Some(w) => format!(" (declared {w:?})"),
            None => String::new(),
        }
    );
    println!("\n  n  gr^n M_dR            gr_n M_HT            dim Fil_n^conj");
    for n in 0..analysis.hodge_graded.len() {
        println!(
            "{:>3}  {:<20} {:<20} {}",
            n,
            format!("{}", analysis.hodge_graded[n]),
            format!("{}", analysis.conj_graded[n]),
            analysis.conjugate[n].free_pivot_count()
        );
    }
    let mat = matching_check(&module, &analysis).map_err(|e| e.to_string())?;
    println!("\ngraded matching: {:?}", mat.verdict);
    match bkfilt::bk::torsion_crosscheck(&module, &analysis) {
        Ok(tc) => {
            println!(
                "torsion crosscheck: max graded torsion exponent {}, comparison \
                 cokernels within bounds: {}",
                tc.max_torsion_exponent, tc.all_within_bounds
            );
        }
        Err(CoreError::InsufficientPrecision(msg)) => {
            println!("torsion crosscheck inconclusive: {msg}");
        }
        Err(e) => return Err(e.to_string()),
    }
    Ok(0)
}

fn modp(path: &Path, prec: &PrecOverride) -> Result<u8, String> {
    let (_, module) = load_one(path, prec)?;
    let mb = ModpBK::from_reduction(&module).map_err(|e| e.to_string())?;
    let jumps = mb.jumps().map_err(|e| e.to_string())?;
    println!(
        "module {} | rank {} | hbar {} | jumps {:?}",
        module.label(),
        mb.rank(),
        mb.hbar(),
        jumps
    );
    match mb.sub_hodge() {
        Ok(sh) => {
            println!("\n  n  dim Fil^n_Hod phi(M_k)  dim Fil^n M_dR");
            for (n, (a, b)) in sh.dims.iter().zip(&sh.hodge_dims).enumerate() {
                println!("{n:>3}  {a:>22}  {b:>14}");
            }
            let (ok, witness) = mb.unaligned_check().map_err(|e| e.to_string())?;
            match ok {
                true => println!("\nunaligned mod-p Frobenius condition: satisfied"),
                false => println!(
                    "\nunaligned mod-p Frobenius condition: fails at level {}",
                    witness.unwrap_or_default()
                ),
            }
        }
        Err(CoreError::InsufficientPrecision(msg)) => {
            println!("\nsub-Hodge filtration inconclusive: {msg}");
        }
        Err(e) => return Err(e.to_string()),
    }
    Ok(0)
}

fn check(
    path: &Path,
    suite: &str,
    seed: u64,
    strict: bool,
    out: Option<&Path>,
    prec: &PrecOverride,
) -> Result<u8, String> {
    let suite = SuiteKind::parse(suite)
        .ok_or_else(|| format!("unknown suite {suite:?}; use universal|crystalline|modp|sen|all"))?;
    let specs = load_specs(path, prec)?;
    let report: Report = run_suite(&specs, suite, seed);
    print!("{}", report.render_text());
    if let Some(out) = out {
        std::fs::write(out, report.to_json())
            .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    }
    Ok(report.exit_code(strict) as u8)
}

#[allow(clippy::too_many_arguments)]
fn corpus(
    kind: &str,
    seed: u64,
    out: &Path,
    p: u64,
    count: usize,
    prec_np: u32,
    max_weight: Option<u32>,
    max_rank: usize,
) -> Result<u8, String> {
    let kind = CorpusKind::parse(kind).ok_or_else(|| {
        format!("unknown kind {kind:?}; use rank-one|direct-sum|tensor|base-change|fuzz|borderline-placeholder")
    })?;
    let params = CorpusParams {
        p,
        n_p: prec_np,
        count,
        max_weight: max_weight.unwrap_or(2 * p as u32),
        max_rank,
    };
    let specs = corpus_generate(kind, &params, seed).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    for spec in &specs {
        let name = format!("{}.json", spec.label_or_default());
        let path = out.join(&name);
        std::fs::write(&path, spec.emit())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        println!("{}", path.display());
    }
    if specs.is_empty() {
        println!("(kind {} produced no modules)", kind.name());
    }
    Ok(0)
}

fn sen_verify(path: &Path, prec: &PrecOverride) -> Result<u8, String> {
    let (spec, module) = load_one(path, prec)?;
    let theta = spec
        .sen_operator
        .clone()
        .ok_or_else(|| "the file carries no sen_operator field".to_string())?;
    let analysis = module.analyze().map_err(|e| e.to_string())?;
    let flavor = spec.flavor_enum().map_err(|e| e.to_string())?;
    let a = module
        .eisenstein()
        .amplification_constant(flavor)
        .map_err(|e| e.to_string())?;
    let op = sen::SenOperator { theta, a, flavor };
    let rep = sen::verify_sen(&module, &analysis, &op).map_err(|e| e.to_string())?;
    for (name, clause) in [
        ("shift", &rep.shift),
        ("stability", &rep.stability),
        ("char-poly", &rep.char_poly),
        ("eigen-filtration", &rep.eigen_filtration),
    ] {
        match clause {
            sen::ClauseVerdict::Pass => println!("{name}: pass"),
            sen::ClauseVerdict::Fail(why) => println!("{name}: fail ({why})"),
        }
    }
    Ok(if rep.all_passed() { 0 } else { 1 })
}

fn sen_solve(path: &Path, prec: &PrecOverride) -> Result<u8, String> {
    let (_, module) = load_one(path, prec)?;
    let analysis = module.analyze().map_err(|e| e.to_string())?;
    let sol = sen::solve_sen(&module, &analysis).map_err(|e| e.to_string())?;
    println!(
        "solution space free dimension: {}",
        sol.free_dimension
    );
    println!("theta = {:?}", sol.operator.theta);
    let rep = sen::verify_sen(&module, &analysis, &sol.operator).map_err(|e| e.to_string())?;
    println!(
        "verification: shift {}, stability {}, char-poly {}, eigen-filtration {}",
        ok(&rep.shift),
        ok(&rep.stability),
        ok(&rep.char_poly),
        ok(&rep.eigen_filtration)
    );
    Ok(if rep.all_passed() { 0 } else { 1 })
}

fn ok(c: &sen::ClauseVerdict) -> &'static str {
    match c {
        sen::ClauseVerdict::Pass => "pass",
        sen::ClauseVerdict::Fail(_) => "fail",
    }
}
