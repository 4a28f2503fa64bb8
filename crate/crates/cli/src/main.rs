//! `satpoly`: build gadget reductions from 3-CNF formulas, produce and
//! verify sparsifying witnesses, search candidate families, and aggregate
//! results. Every run writes a manifest next to its outputs; identical
//! manifests (same inputs, flags, versions, seed) give byte-identical
//! outputs. Exit codes: 0 success, 1 verification failure, 2 input error,
//! 3 cap exceeded.

mod report;
mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use satpoly_core::algebra::FieldSpec;
use satpoly_core::cnf::{normalize_distinct, parse_dimacs, Clause, CnfFormula};
use satpoly_core::reductions::{
    build_instance, instance_to_json, GapSpec, ReductionError, ReductionInstance, Variant,
};
use satpoly_core::sparsepoly::{field_from_str, PolyError};
use satpoly_core::witness::{
    brute_force_search, extract_assignment, forward_witness, report_to_json, verify_witness,
    witness_from_json, witness_to_json, SearchFamily, Witness, WitnessError, DEFAULT_SEARCH_CAP,
};

/// A failed run: exit code plus a one-line machine-parsable reason.
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub msg: String,
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            kind: "input",
            msg: msg.into(),
        }
    }
    pub fn verification(msg: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            kind: "verification",
            msg: msg.into(),
        }
    }
    pub fn cap(msg: impl Into<String>) -> Failure {
        Failure {
            code: 3,
            kind: "cap",
            msg: msg.into(),
        }
    }
}

fn witness_failure(e: WitnessError) -> Failure {
    match &e {
        WitnessError::TooLarge { .. }
        | WitnessError::FamilyTooLarge { .. }
        | WitnessError::Poly(PolyError::TermCapExceeded { .. }) => Failure::cap(e.to_string()),
        WitnessError::NotPassing => Failure::verification(e.to_string()),
        _ => Failure::input(e.to_string()),
    }
}

fn reduction_failure(e: ReductionError) -> Failure {
    let msg = e.to_string();
    if msg.contains("cap") {
        Failure::cap(msg)
    } else {
        Failure::input(msg)
    }
}

#[derive(Parser)]
#[command(
    name = "satpoly",
    version,
    about = "3-CNF to sparse-polynomial reduction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a reduction instance from a DIMACS CNF file.
    Reduce(ReduceArgs),
    /// Produce the canonical witness for a satisfying assignment.
    Witness(WitnessArgs),
    /// Measure a witness exactly and compare it to the instance budget.
    Verify(VerifyArgs),
    /// Decode the assignment a passing witness encodes.
    Extract(ExtractArgs),
    /// Exhaustively evaluate a candidate family and report the minimum.
    Search(SearchArgs),
    /// Run the built-in deterministic check suite.
    Selftest(SelftestArgs),
    /// Aggregate verdicts and search results into a CSV report.
    Report(ReportArgs),
}

#[derive(Args)]
struct ReduceArgs {
    /// DIMACS CNF input file.
    input: PathBuf,
    /// Reduction family: etsparse | etsparse-hom | setsparse | etsupport.
    #[arg(long)]
    problem: String,
    /// Coefficient field: q | f2 | f3 | fp:<p>.
    #[arg(long)]
    field: String,
    /// Support target (etsupport only).
    #[arg(long)]
    sigma: Option<u64>,
    /// Gap parameters as <eps-num>/<eps-den>.
    #[arg(long)]
    gap: Option<String>,
    /// Base-degree override for gap instances.
    #[arg(long)]
    base_degree: Option<String>,
    /// Use the translation-hardened schedule (etsparse only).
    #[arg(long)]
    translations: bool,
    /// Normalize the input (expand short clauses, drop tautologies and
    /// duplicates) instead of refusing it.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct WitnessArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated 0/1 bits for the instance's source formula.
    #[arg(long)]
    assignment: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    witness: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    witness: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Candidate family: structured | all-shifts.
    #[arg(long)]
    family: String,
    /// Comma-separated integer mixing coefficients (structured family).
    #[arg(long, default_value = "-2,-1,0,1,2", allow_hyphen_values = true)]
    coeff_pool: String,
    /// Maximum family size to enumerate.
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Verdict / search JSON files to aggregate.
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error kind={} code={} msg={:?}", f.kind, f.code, f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Reduce(a) => cmd_reduce(a),
        Command::Witness(a) => cmd_witness(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Search(a) => cmd_search(a),
        Command::Selftest(a) => selftest::run(a.seed, &a.out),
        Command::Report(a) => report::run(&a.inputs, &a.out),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

pub fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn read_json(path: &Path) -> Result<serde_json::Value, Failure> {
    serde_json::from_str(&read_file(path)?)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Writes canonical JSON (sorted keys, no floats) with a trailing newline.
pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::input(format!("serializing {name}: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Run manifest: inputs by content hash, flags, tool version, seed, outputs.
/// Everything that influences the output bytes and nothing that does not.
pub struct Manifest {
    command: &'static str,
    flags: serde_json::Map<String, serde_json::Value>,
    inputs: serde_json::Map<String, serde_json::Value>,
    seed: Option<u64>,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Manifest {
        Manifest {
            command,
            flags: serde_json::Map::new(),
            inputs: serde_json::Map::new(),
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl Into<serde_json::Value>) {
        self.flags.insert(name.to_string(), value.into());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input_file(&mut self, path: &Path) -> Result<(), Failure> {
        let bytes =
            fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        self.inputs.insert(
            path.display().to_string(),
            serde_json::Value::String(format!("sha256:{hex}")),
        );
        Ok(())
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(self, dir: &Path) -> Result<(), Failure> {
        let value = serde_json::json!({
            "tool": {"name": "satpoly", "version": env!("CARGO_PKG_VERSION")},
            "command": self.command,
            "flags": self.flags,
            "inputs": self.inputs,
            "seed": self.seed,
            "outputs": self.outputs,
        });
        write_json(dir, "manifest.json", &value)?;
        Ok(())
    }
}

fn parse_field_flag(s: &str) -> Result<FieldSpec, Failure> {
    let canonical = match s {
        "f2" => "fp:2",
        "f3" => "fp:3",
        other => other,
    };
    field_from_str(canonical).map_err(|e| Failure::input(e.to_string()))
}

fn parse_variant(
    problem: &str,
    sigma: Option<u64>,
    gap: Option<&str>,
    base_degree: Option<&str>,
    translations: bool,
) -> Result<Variant, Failure> {
    let mut variant = match problem {
        "etsparse" => Variant::etsparse(),
        "etsparse-hom" => Variant::etsparse_hom(),
        "setsparse" => Variant::setsparse(),
        "etsupport" => Variant::etsupport(sigma.ok_or_else(|| {
            Failure::input("etsupport requires --sigma")
        })?),
        other => {
            return Err(Failure::input(format!(
                "unknown problem {other:?}; expected etsparse, etsparse-hom, setsparse or etsupport"
            )))
        }
    };
    if problem != "etsupport" && sigma.is_some() {
        return Err(Failure::input("--sigma only applies to etsupport"));
    }
    if let Some(gap) = gap {
        let (num, den) = gap
            .split_once('/')
            .ok_or_else(|| Failure::input(format!("--gap expects <num>/<den>, got {gap:?}")))?;
        let num: u64 = num
            .parse()
            .map_err(|_| Failure::input(format!("bad gap numerator {num:?}")))?;
        let den: u64 = den
            .parse()
            .map_err(|_| Failure::input(format!("bad gap denominator {den:?}")))?;
        let override_base_degree = base_degree
            .map(|d| {
                d.parse::<BigUint>()
                    .map_err(|_| Failure::input(format!("bad base degree {d:?}")))
            })
            .transpose()?;
        variant = variant.with_gap(GapSpec {
            epsilon: (num, den),
            override_base_degree,
        });
    } else if base_degree.is_some() {
        return Err(Failure::input("--base-degree requires --gap"));
    }
    if translations {
        variant = variant.with_translations();
    }
    variant.validate().map_err(reduction_failure)?;
    Ok(variant)
}

/// Rebuilds an instance from its stored inputs and cross-checks the stored
/// statistics, so a tampered or stale file cannot vouch for itself.
pub fn load_instance(path: &Path) -> Result<(ReductionInstance, serde_json::Value), Failure> {
    let v = read_json(path)?;
    let fail = |msg: String| Failure::input(format!("{}: {msg}", path.display()));
    if v["format"] != "satpoly-instance/1" {
        return Err(fail("not a satpoly instance file".into()));
    }
    let problem = v["problem"]
        .as_str()
        .ok_or_else(|| fail("missing problem".into()))?;
    let sigma = v["sigma"].as_u64();
    let (gap, base_degree) = match v["gap"].as_object() {
        None => (None, None),
        Some(g) => (
            Some(
                g.get("epsilon")
                    .and_then(serde_json::Value::as_str)
                    .ok_or_else(|| fail("gap block missing epsilon".into()))?,
            ),
            g.get("override_base_degree")
                .and_then(serde_json::Value::as_str),
        ),
    };
    let translations = v["translations_hardened"].as_bool().unwrap_or(false);
    let variant = parse_variant(problem, sigma, gap, base_degree, translations)?;
    let field = v["field"]
        .as_str()
        .ok_or_else(|| fail("missing field".into()))
        .and_then(parse_field_flag)?;
    let dimacs = v["dimacs"]
        .as_str()
        .ok_or_else(|| fail("missing dimacs".into()))?;
    let formula = formula_from_dimacs(dimacs)?;
    let instance = build_instance(&formula, &variant, &field).map_err(reduction_failure)?;
    let fresh = instance_to_json(&instance);
    for check in ["stats", "budget", "params", "closed_form"] {
        if fresh[check] != v[check] {
            return Err(fail(format!(
                "stored {check} does not match the rebuilt instance"
            )));
        }
    }
    Ok((instance, v))
}

/// Strict DIMACS -> formula: every clause must already have three distinct
/// variables (`reduce --normalize` is the lenient path).
fn formula_from_dimacs(text: &str) -> Result<CnfFormula, Failure> {
    let raw = parse_dimacs(text).map_err(|e| Failure::input(e.to_string()))?;
    let mut clauses = Vec::with_capacity(raw.clauses.len());
    for (i, lits) in raw.clauses.iter().enumerate() {
        let [a, b, c] = lits.as_slice() else {
            return Err(Failure::input(format!(
                "clause {} has {} literals; expected exactly 3 (use reduce --normalize)",
                i + 1,
                lits.len()
            )));
        };
        clauses.push(
            Clause::new([*a, *b, *c])
                .map_err(|e| Failure::input(format!("clause {}: {e}", i + 1)))?,
        );
    }
    CnfFormula::new(raw.n, clauses).map_err(|e| Failure::input(e.to_string()))
}

/// Identity block embedded in verdict/search outputs so `report` can
/// aggregate them without re-reading instances.
fn instance_summary(raw: &serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "problem": raw["problem"],
        "translations_hardened": raw["translations_hardened"],
        "gap": raw["gap"],
        "sigma": raw["sigma"],
        "field": raw["field"],
        "n": raw["n"],
        "m": raw["m"],
        "budget": raw["budget"],
        "params": raw["params"],
    })
}

fn parse_assignment(s: &str, expected: usize) -> Result<Vec<bool>, Failure> {
    let bits: Result<Vec<bool>, Failure> = s
        .split(',')
        .map(|t| match t.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Failure::input(format!(
                "assignment entries must be 0 or 1, got {other:?}"
            ))),
        })
        .collect();
    let bits = bits?;
    if bits.len() != expected {
        return Err(Failure::input(format!(
            "assignment has {} bits but the formula has {expected} variables",
            bits.len()
        )));
    }
    Ok(bits)
}

fn assignment_string(u: &[bool]) -> String {
    u.iter()
        .map(|b| if *b { "1" } else { "0" })
        .collect::<Vec<_>>()
        .join(",")
}

/// Source-formula assignment -> encoded-formula assignment.
fn to_work_assignment(instance: &ReductionInstance, u_src: &[bool]) -> Vec<bool> {
    match &instance.flip {
        Some(flip) => flip.apply(u_src),
        None => u_src.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_reduce(args: ReduceArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new("reduce");
    manifest.input_file(&args.input)?;
    manifest.flag("problem", args.problem.clone());
    manifest.flag("field", args.field.clone());
    manifest.flag("sigma", args.sigma);
    manifest.flag("gap", args.gap.clone());
    manifest.flag("base_degree", args.base_degree.clone());
    manifest.flag("translations", args.translations);
    manifest.flag("normalize", args.normalize);

    let variant = parse_variant(
        &args.problem,
        args.sigma,
        args.gap.as_deref(),
        args.base_degree.as_deref(),
        args.translations,
    )?;
    let field = parse_field_flag(&args.field)?;
    let text = read_file(&args.input)?;
    let raw = parse_dimacs(&text).map_err(|e| Failure::input(e.to_string()))?;
    let (formula, record) = normalize_distinct(&raw);
    let changed = record.original_n != record.normalized_n
        || record.actions.iter().any(|a| {
            !matches!(a, satpoly_core::cnf::NormalizeAction::Kept { .. })
        });
    if changed && !args.normalize {
        return Err(Failure::input(
            "input is not a normalized 3-CNF (distinct variables per clause, no duplicates, \
             no tautologies); rerun with --normalize to apply the strict normalization",
        ));
    }
    let instance = build_instance(&formula, &variant, &field).map_err(reduction_failure)?;
    let value = instance_to_json(&instance);
    write_json(&args.out, "instance.json", &value)?;
    manifest.output("instance.json");
    if changed {
        write_json(&args.out, "normalize.json", &record.to_json())?;
        manifest.output("normalize.json");
    }
    manifest.write(&args.out)?;
    println!(
        "reduce: wrote instance.json problem={} field={} n={} m={} sparsity={} budget={}",
        instance.variant.problem,
        instance.field,
        instance.n,
        instance.m,
        instance.stats.sparsity,
        instance.budget(),
    );
    Ok(())
}

fn cmd_witness(args: WitnessArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new("witness");
    manifest.input_file(&args.instance)?;
    manifest.flag("assignment", args.assignment.clone());

    let (instance, _) = load_instance(&args.instance)?;
    let u_src = parse_assignment(&args.assignment, instance.n as usize)?;
    if !instance.source_formula.evaluate(&u_src) {
        return Err(Failure::input(
            "the assignment does not satisfy the input formula",
        ));
    }
    let u_work = to_work_assignment(&instance, &u_src);
    let witness = forward_witness(&instance, &u_work).map_err(witness_failure)?;
    let witness = Witness {
        claimed_assignment: Some(u_src),
        ..witness
    };
    let report = verify_witness(&instance, &witness).map_err(witness_failure)?;
    write_json(&args.out, "witness.json", &witness_to_json(&instance, &witness))?;
    manifest.output("witness.json");
    manifest.write(&args.out)?;
    println!(
        "witness: wrote witness.json {}={} budget={}",
        report.statistic, report.measured, report.budget
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new("verify");
    manifest.input_file(&args.instance)?;
    manifest.input_file(&args.witness)?;

    let (instance, raw) = load_instance(&args.instance)?;
    let witness =
        witness_from_json(&instance, &read_json(&args.witness)?).map_err(witness_failure)?;
    let report = verify_witness(&instance, &witness).map_err(witness_failure)?;
    let mut value = report_to_json(&report);
    value["instance"] = instance_summary(&raw);
    write_json(&args.out, "verdict.json", &value)?;
    manifest.output("verdict.json");
    manifest.write(&args.out)?;
    println!(
        "verify: statistic={} measured={} budget={} pass={}",
        report.statistic, report.measured, report.budget, report.pass
    );
    if !report.pass {
        return Err(Failure::verification(format!(
            "measured {} exceeds budget {}",
            report.measured, report.budget
        )));
    }
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new("extract");
    manifest.input_file(&args.instance)?;
    manifest.input_file(&args.witness)?;

    let (instance, _) = load_instance(&args.instance)?;
    let witness =
        witness_from_json(&instance, &read_json(&args.witness)?).map_err(witness_failure)?;
    let u = extract_assignment(&instance, &witness).map_err(witness_failure)?;
    let value = serde_json::json!({
        "assignment": u.iter().map(|b| *b as u64).collect::<Vec<_>>(),
        "satisfies_source_formula": true,
    });
    write_json(&args.out, "assignment.json", &value)?;
    manifest.output("assignment.json");
    manifest.write(&args.out)?;
    println!("extract: assignment={}", assignment_string(&u));
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new("search");
    manifest.input_file(&args.instance)?;
    manifest.flag("family", args.family.clone());
    manifest.flag("coeff_pool", args.coeff_pool.clone());
    manifest.flag("cap", args.cap);

    let (instance, raw) = load_instance(&args.instance)?;
    let mut family = match args.family.as_str() {
        "all-shifts" => SearchFamily::all_shifts(),
        "structured" => {
            let pool: Result<Vec<_>, Failure> = args
                .coeff_pool
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<i64>()
                        .map(|c| instance.field.from_i64(c))
                        .map_err(|_| {
                            Failure::input(format!("bad coefficient {t:?} in --coeff-pool"))
                        })
                })
                .collect();
            if instance.variant.problem == satpoly_core::reductions::Problem::EtSupport {
                SearchFamily::support_transforms(pool?)
            } else {
                SearchFamily::structured(pool?)
            }
        }
        other => {
            return Err(Failure::input(format!(
                "unknown family {other:?}; expected structured or all-shifts"
            )))
        }
    };
    family.cap = args.cap.unwrap_or(DEFAULT_SEARCH_CAP);
    let outcome = brute_force_search(&instance, &family).map_err(witness_failure)?;
    let sat = outcome.min <= *instance.budget();
    let extracted = if sat {
        extract_assignment(&instance, &outcome.argmin)
            .ok()
            .map(|u| u.iter().map(|b| *b as u64).collect::<Vec<_>>())
    } else {
        None
    };
    let value = serde_json::json!({
        "family": args.family,
        "family_size": outcome.family_size.to_string(),
        "evaluated": outcome.evaluated,
        "min": outcome.min.to_string(),
        "budget": instance.budget().to_string(),
        "within_budget": sat,
        "argmin": witness_to_json(&instance, &outcome.argmin),
        "extracted_assignment": extracted,
        "instance": instance_summary(&raw),
    });
    write_json(&args.out, "search.json", &value)?;
    manifest.output("search.json");
    manifest.write(&args.out)?;
    println!(
        "search: family={} size={} evaluated={} min={} budget={} within_budget={}",
        args.family,
        outcome.family_size,
        outcome.evaluated,
        outcome.min,
        instance.budget(),
        sat
    );
    Ok(())
}
