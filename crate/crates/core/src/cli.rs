//! Command-line front end: `run`, `verify`, `resources` and `replay`.
//!
//! Exit codes: 0 success, 1 bad input, 2 a checked property failed, 3 an
//! engine fault. [`run`] takes explicit output streams so tests can drive it
//! in-process.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::documents::{
    load_query, load_trace, read_text, store_trace, to_json, write_atomic, LedgerDocument, OutputDocument,
};
use crate::error::{QramError, Result};
use crate::golden::{cases, check_golden, GoldenReport};
use crate::memory::{load_bank, MemoryBank};
use crate::oracle::{
    compare_backup_levels, compare_modes, compare_switch_copy, oracle_banks, oracle_modes, verify_unitarity,
    EquivalenceCheck, UnitarityReport, MAX_ORACLE_M, MAX_ORACLE_N,
};
use crate::protocol::{
    run_query, verify_recollection, CopyMode, Encoding, Granularity, ProtocolConfig, RecollectionReport,
};
use crate::resources::{
    hardware_footprint, measure, scaling_fit, GrowthClass, ResourceLedger, ScalingReport, REFERENCE_NOTE,
    REFERENCE_SCALINGS,
};
use crate::walker::{Bits, QueryTerm, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_PROPERTY: i32 = 2;

/// Largest `n` for which `resources` also simulates the uniform superposition.
pub const SUPERPOSITION_MAX_N: u8 = 12;

#[derive(Parser, Debug)]
#[command(name = "walker-qram", version, about = "Single-tree quantum-walker qRAM simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one query against a bank and write the decoded output.
    Run(RunArgs),
    /// Run a verification suite and print one line per property.
    Verify(VerifyArgs),
    /// Sweep resource counts over a range of address widths.
    Resources(ResourcesArgs),
    /// Re-apply the gates recorded in a trace and compare every snapshot.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Standard,
    Backup,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::Backup => Variant::Backup,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CopyModeArg {
    Global,
    Switch,
    BackupControlled,
}

impl From<CopyModeArg> for CopyMode {
    fn from(c: CopyModeArg) -> Self {
        match c {
            CopyModeArg::Global => CopyMode::Global,
            CopyModeArg::Switch => CopyMode::Switch,
            CopyModeArg::BackupControlled => CopyMode::BackupControlled,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EncodingArg {
    Base,
    Qudit,
    DualRail,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Base => Encoding::Base,
            EncodingArg::Qudit => Encoding::Qudit,
            EncodingArg::DualRail => Encoding::DualRail,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GranularityArg {
    Gate,
    Level,
    Stage,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Gate => Granularity::Gate,
            GranularityArg::Level => Granularity::Level,
            GranularityArg::Stage => Granularity::Stage,
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Bank document.
    #[arg(long, value_name = "PATH")]
    db: PathBuf,
    /// Classical address, MSB first (shorthand for a one-term query).
    #[arg(long, conflicts_with = "query", required_unless_present = "query")]
    address: Option<String>,
    /// Query document.
    #[arg(long, value_name = "PATH")]
    query: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "standard")]
    variant: VariantArg,
    /// Defaults to `global` for the standard variant and `backup-controlled`
    /// for the backup variant.
    #[arg(long, value_enum)]
    copy_mode: Option<CopyModeArg>,
    #[arg(long, value_enum, default_value = "base")]
    encoding: EncodingArg,
    #[arg(long, value_enum, default_value = "gate")]
    snapshots: GranularityArg,
    /// Write the output document here instead of stdout.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    ledger: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Scope {
    Unitarity,
    Equivalence,
    Recollection,
    Golden,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    scope: Scope,
    #[arg(long, default_value_t = 2)]
    n: u8,
    #[arg(long, default_value_t = 1)]
    m: u8,
    /// Random banks (or queries, for recollection) beyond the exhaustive set.
    #[arg(long, default_value_t = 8)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Keep the full structured report here.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct ResourcesArgs {
    /// Address widths, `a..b` inclusive or a single value.
    #[arg(long, default_value = "2..8")]
    n: String,
    #[arg(long, default_value_t = 1)]
    m: u8,
    #[arg(long, value_enum, default_value = "standard")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    trace: PathBuf,
    /// Also write the resource ledger of the replayed trace.
    #[arg(long, value_name = "PATH")]
    ledger: Option<PathBuf>,
}

/// Outcome of a command that completed: what to print and the exit code.
struct Report {
    text: String,
    code: i32,
}

/// Parse `args` (including the program name) and execute the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INPUT
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Resources(a) => cmd_resources(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(report) => {
            if out.write_all(report.text.as_bytes()).is_err() {
                return EXIT_INPUT;
            }
            report.code
        }
        Err(e) => {
            let _ = writeln!(err, "walker-qram: {e}");
            e.exit_code()
        }
    }
}

fn context<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        QramError::Configuration(s) => QramError::Configuration(format!("{what}: {s}")),
        QramError::Validation(s) => QramError::Validation(format!("{what}: {s}")),
        QramError::Usage(s) => QramError::Usage(format!("{what}: {s}")),
        QramError::ProtocolOrder(s) => QramError::ProtocolOrder(format!("{what}: {s}")),
        QramError::IncompleteProtocol(s) => QramError::IncompleteProtocol(format!("{what}: {s}")),
        QramError::CoherenceFault(s) => QramError::CoherenceFault(format!("{what}: {s}")),
        QramError::Encoding(s) => QramError::Encoding(format!("{what}: {s}")),
        QramError::Bank(s) => QramError::Bank(format!("{what}: {s}")),
        QramError::SizeCap(s) => QramError::SizeCap(format!("{what}: {s}")),
        QramError::NotPermutation(s) => QramError::NotPermutation(format!("{what}: {s}")),
        QramError::Io(s) => QramError::Io(format!("{what}: {s}")),
        other => other,
    })
}

fn emit(path: Option<&Path>, text: String) -> Result<String> {
    match path {
        Some(p) => write_atomic(p, &text).map(|_| String::new()),
        None => Ok(text),
    }
}

fn cmd_run(a: RunArgs) -> Result<Report> {
    let variant = Variant::from(a.variant);
    let copy_mode = a.copy_mode.map(CopyMode::from).unwrap_or(match variant {
        Variant::Standard => CopyMode::Global,
        Variant::Backup => CopyMode::BackupControlled,
    });
    let bank = context("loading bank", read_text(&a.db).and_then(|t| load_bank(&t)))?;
    // Checked before any simulation, bank shape included.
    let config = ProtocolConfig {
        n: bank.n(),
        m: bank.m(),
        variant,
        copy_mode,
        encoding: a.encoding.into(),
        snapshots: a.snapshots.into(),
    };
    context("configuration", config.validate())?;
    let query = match (&a.address, &a.query) {
        (Some(address), _) => vec![QueryTerm::classical(context("address", address.parse::<Bits>())?)],
        (None, Some(path)) => context("loading query", read_text(path).and_then(|t| load_query(&t)))?,
        (None, None) => return Err(QramError::Usage("either --address or --query is required".into())),
    };
    if let Some(bad) = query.iter().find(|t| t.address.len() != bank.n()) {
        return Err(QramError::Validation(format!(
            "query address {} has {} bits but the bank has n = {}",
            bad.address,
            bad.address.len(),
            bank.n()
        )));
    }
    let outcome = context("running query", run_query(&config, &bank, &query))?;
    if let Some(path) = &a.trace {
        write_atomic(path, &store_trace(&outcome.trace)?)?;
    }
    if let Some(path) = &a.ledger {
        let ledger = context("measuring resources", measure(&outcome.trace))?;
        write_atomic(path, &to_json(&LedgerDocument { config, ledger }))?;
    }
    let text = emit(a.output.as_deref(), to_json(&OutputDocument::new(&outcome)))?;
    Ok(Report { text, code: EXIT_OK })
}

#[derive(Serialize)]
struct PropertyLine {
    property: String,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
#[serde(untagged)]
enum VerifyDetail {
    Unitarity(Vec<(String, UnitarityReport)>),
    Equivalence(Vec<EquivalenceCheck>),
    Recollection(Vec<(String, RecollectionReport)>),
    Golden(Vec<GoldenReport>),
}

#[derive(Serialize)]
struct VerifyReport {
    scope: Scope,
    n: u8,
    m: u8,
    seed: u64,
    properties: Vec<PropertyLine>,
    detail: VerifyDetail,
}

fn mode_name(c: &ProtocolConfig) -> String {
    let variant = match c.variant {
        Variant::Standard => "standard",
        Variant::Backup => "backup",
    };
    let copy = match c.copy_mode {
        CopyMode::Global => "global",
        CopyMode::Switch => "switch",
        CopyMode::BackupControlled => "backup-controlled",
    };
    format!("{variant}/{copy}")
}

fn oracle_bounds(n: u8, m: u8) -> Result<()> {
    if n == 0 || m == 0 || n > MAX_ORACLE_N || m > MAX_ORACLE_M {
        return Err(QramError::Usage(format!(
            "oracle scopes need 1 ≤ n ≤ {MAX_ORACLE_N} and 1 ≤ m ≤ {MAX_ORACLE_M}, got n={n}, m={m}"
        )));
    }
    Ok(())
}

fn equivalence_line(c: &EquivalenceCheck) -> PropertyLine {
    let mut detail = format!("{} comparisons", c.checked);
    if let Some(first) = c.mismatches.first() {
        let _ = write!(detail, ", {} mismatches, first: {first}", c.mismatches.len());
    }
    PropertyLine { property: c.property.clone(), passed: c.passed(), detail }
}

fn cmd_verify(a: VerifyArgs) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut properties = Vec::new();
    let detail = match a.scope {
        Scope::Unitarity => {
            oracle_bounds(a.n, a.m)?;
            let banks = oracle_banks(a.n, a.m, a.samples, &mut rng)?;
            let mut reports = Vec::new();
            for config in oracle_modes(a.n, a.m)? {
                let name = mode_name(&config);
                let r = verify_unitarity(&config, &banks)?;
                let bad_gates: Vec<&str> = r.gates.iter().filter(|g| !g.passed()).map(|g| g.gate.as_str()).collect();
                properties.push(PropertyLine {
                    property: format!("{name}: every gate is a permutation matching the engine"),
                    passed: bad_gates.is_empty(),
                    detail: format!(
                        "{} gate matrices over {} configurations, failing: {bad_gates:?}",
                        r.gates.len(),
                        r.space_size
                    ),
                });
                let bad_queries = r.queries.iter().filter(|q| !q.passed()).count();
                properties.push(PropertyLine {
                    property: format!("{name}: composed query is unitary and retrieves the bank"),
                    passed: bad_queries == 0,
                    detail: format!("{} banks, {bad_queries} failing", r.queries.len()),
                });
                reports.push((name, r));
            }
            VerifyDetail::Unitarity(reports)
        }
        Scope::Equivalence => {
            oracle_bounds(a.n, a.m)?;
            let banks = oracle_banks(a.n, a.m, a.samples, &mut rng)?;
            let checks = vec![
                compare_modes(a.n, a.m, &banks)?,
                compare_backup_levels(a.n, a.m)?,
                compare_switch_copy(a.n, a.m, &banks)?,
            ];
            properties.extend(checks.iter().map(equivalence_line));
            VerifyDetail::Equivalence(checks)
        }
        Scope::Recollection => {
            let mut reports = Vec::new();
            for variant in [Variant::Standard, Variant::Backup] {
                let config = match variant {
                    Variant::Standard => ProtocolConfig::standard(a.n, a.m)?,
                    Variant::Backup => ProtocolConfig::backup(a.n, a.m)?,
                };
                let mut total = RecollectionReport::default();
                for _ in 0..a.samples.max(1) {
                    let bank = MemoryBank::random(a.n, a.m, &mut rng)?;
                    let query = QueryTerm::random(a.n, 1 << a.n.min(6), &mut rng)?;
                    let trace = run_query(&config, &bank, &query)?.trace;
                    let r = verify_recollection(&trace)?;
                    total.checks += r.checks;
                    total.violations.extend(r.violations);
                    total.intervals.extend(r.intervals);
                }
                let name = mode_name(&config);
                properties.push(PropertyLine {
                    property: format!("{name}: address walkers rejoin the train at their level"),
                    passed: total.is_clean(),
                    detail: format!(
                        "{} queries, {} checks, {} violations",
                        a.samples.max(1),
                        total.checks,
                        total.violations.len()
                    ),
                });
                reports.push((name, total));
            }
            VerifyDetail::Recollection(reports)
        }
        Scope::Golden => {
            let mut reports = Vec::new();
            for case in cases()? {
                let r = check_golden(&case)?;
                let bad: Vec<&str> = r.steps.iter().filter(|s| !s.matches()).map(|s| s.label).collect();
                properties.push(PropertyLine {
                    property: format!("{} walkthrough matches every snapshot and the output", r.case),
                    passed: r.passed(),
                    detail: format!(
                        "{} snapshots, differing: {bad:?}, output deviation {:.1e}",
                        r.steps.len(),
                        r.output_deviation
                    ),
                });
                reports.push(r);
            }
            VerifyDetail::Golden(reports)
        }
    };
    let passed = properties.iter().all(|p| p.passed);
    let mut text = String::new();
    for p in &properties {
        let _ = writeln!(text, "{} {}: {}", if p.passed { "PASS" } else { "FAIL" }, p.property, p.detail);
    }
    let report = VerifyReport { scope: a.scope, n: a.n, m: a.m, seed: a.seed, properties, detail };
    if let Some(path) = &a.report {
        write_atomic(path, &to_json(&report))?;
    }
    Ok(Report { text, code: if passed { EXIT_OK } else { EXIT_PROPERTY } })
}

fn parse_range(text: &str) -> Result<Vec<u8>> {
    let bad = || QramError::Usage(format!("'{text}' is not a range like 2..8"));
    let (lo, hi) = match text.split_once("..") {
        Some((lo, hi)) => (lo.trim().parse::<u8>().map_err(|_| bad())?, hi.trim().parse::<u8>().map_err(|_| bad())?),
        None => {
            let v = text.trim().parse::<u8>().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo == 0 || lo > hi {
        return Err(QramError::Usage(format!("range '{text}' is empty")));
    }
    Ok((lo..=hi).collect())
}

#[derive(Serialize)]
struct ResourceRow {
    n: u8,
    walker_count: u64,
    classical: ResourceLedger,
    footprint_nodes: u64,
    footprint_two_body_gates: u64,
    /// Node activations of the uniform superposition, up to
    /// `SUPERPOSITION_MAX_N`.
    superposition_node_ops: Option<u64>,
}

#[derive(Serialize)]
struct Verdict {
    metric: &'static str,
    report: ScalingReport,
}

#[derive(Serialize)]
struct ResourcesReport {
    m: u8,
    variant: Variant,
    rows: Vec<ResourceRow>,
    verdicts: Vec<Verdict>,
    /// Backup registers must hold exactly `2(n+m) - 1` walkers.
    walker_count_exact: Option<bool>,
    reference: &'static [crate::resources::ReferenceScaling],
    reference_note: &'static str,
}

fn cmd_resources(a: ResourcesArgs) -> Result<Report> {
    let ns = parse_range(&a.n)?;
    let variant = Variant::from(a.variant);
    let mode = |n: u8| match variant {
        Variant::Standard => ProtocolConfig::standard(n, a.m),
        Variant::Backup => ProtocolConfig::backup(n, a.m),
    };
    let mut rows = Vec::new();
    for &n in &ns {
        let config = mode(n)?.with_snapshots(Granularity::Stage);
        let bank = MemoryBank::zeros(n, a.m)?;
        let address = Bits::ones(n);
        let classical = measure(&run_query(&config, &bank, &[QueryTerm::classical(address)])?.trace)?;
        let superposition_node_ops = if n <= SUPERPOSITION_MAX_N {
            Some(measure(&run_query(&config, &bank, &QueryTerm::uniform(n)?)?.trace)?.node_ops)
        } else {
            None
        };
        let footprint = hardware_footprint(n, a.m, variant)?;
        rows.push(ResourceRow {
            n,
            walker_count: classical.walker_count,
            footprint_nodes: footprint.nodes,
            footprint_two_body_gates: footprint.two_body_gates,
            classical,
            superposition_node_ops,
        });
    }
    let mut verdicts = Vec::new();
    if rows.len() >= 4 {
        let series = |f: &dyn Fn(&ResourceRow) -> Option<u64>| -> Vec<(f64, f64)> {
            rows.iter().filter_map(|r| f(r).map(|y| (r.n as f64, y as f64))).collect()
        };
        let metrics: [(&'static str, Vec<(f64, f64)>); 4] = [
            ("classical depth", series(&|r| Some(r.classical.depth))),
            ("classical two-body ops", series(&|r| Some(r.classical.two_body_ops))),
            ("superposition footprint", series(&|r| Some(r.footprint_two_body_gates))),
            ("superposition node ops", series(&|r| r.superposition_node_ops)),
        ];
        for (metric, points) in metrics {
            if points.len() >= 4 {
                verdicts.push(Verdict { metric, report: scaling_fit(&points)? });
            }
        }
    }
    let walker_count_exact =
        (variant == Variant::Backup).then(|| rows.iter().all(|r| r.walker_count == 2 * (r.n as u64 + a.m as u64) - 1));
    let report = ResourcesReport {
        m: a.m,
        variant,
        rows,
        verdicts,
        walker_count_exact,
        reference: &REFERENCE_SCALINGS,
        reference_note: REFERENCE_NOTE,
    };
    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => resources_csv(&report),
        Format::Table => resources_table(&report),
    };
    Ok(Report { text: emit(a.output.as_deref(), text)?, code: EXIT_OK })
}

fn class_name(c: GrowthClass) -> &'static str {
    match c {
        GrowthClass::Constant => "constant",
        GrowthClass::Linear => "linear",
        GrowthClass::Quadratic => "quadratic",
        GrowthClass::Doubling => "doubling",
        GrowthClass::Other => "other",
    }
}

fn opt(v: Option<u64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Three CSV sections separated by blank lines: measurements, verdicts,
/// reference rows.
fn resources_csv(r: &ResourcesReport) -> String {
    let mut s = String::from(
        "n,m,walker_count,classical_two_body_ops,classical_depth,classical_node_ops,footprint_nodes,footprint_two_body_gates,superposition_node_ops\n",
    );
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            row.n,
            r.m,
            row.walker_count,
            row.classical.two_body_ops,
            row.classical.depth,
            row.classical.node_ops,
            row.footprint_nodes,
            row.footprint_two_body_gates,
            opt(row.superposition_node_ops)
        );
    }
    s.push_str("\nmetric,class,relative_residual,c0,c1,c2,mean_log2_ratio,last_log2_ratio\n");
    for v in &r.verdicts {
        let [c0, c1, c2] = v.report.coefficients;
        let _ = writeln!(
            s,
            "{},{},{:.6e},{:.6},{:.6},{:.6},{:.6},{:.6}",
            v.metric,
            class_name(v.report.class),
            v.report.relative_residual,
            c0,
            c1,
            c2,
            v.report.mean_log2_ratio(),
            v.report.last_log2_ratio()
        );
    }
    s.push_str("\nmodel,particles,circuit_depth,binary_trees,two_qubit_gates_classical,two_qubit_gates_superposition,node_ops_classical,node_ops_superposition\n");
    for row in r.reference {
        let fields = [
            row.model,
            row.particles,
            row.circuit_depth,
            row.binary_trees,
            row.two_qubit_gates_classical,
            row.two_qubit_gates_superposition,
            row.node_ops_classical,
            row.node_ops_superposition,
        ];
        let _ = writeln!(s, "{}", fields.map(csv_field).join(","));
    }
    s
}

fn resources_table(r: &ResourcesReport) -> String {
    let variant = match r.variant {
        Variant::Standard => "standard",
        Variant::Backup => "backup",
    };
    let mut s = format!("variant {variant}, m = {}\n\n", r.m);
    let _ = writeln!(
        s,
        "{:>3} {:>8} {:>10} {:>8} {:>10} {:>12} {:>14} {:>14}",
        "n", "walkers", "2-body ops", "depth", "node ops", "tree nodes", "footprint", "superpos. node"
    );
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{:>3} {:>8} {:>10} {:>8} {:>10} {:>12} {:>14} {:>14}",
            row.n,
            row.walker_count,
            row.classical.two_body_ops,
            row.classical.depth,
            row.classical.node_ops,
            row.footprint_nodes,
            row.footprint_two_body_gates,
            opt(row.superposition_node_ops)
        );
    }
    s.push('\n');
    if r.verdicts.is_empty() {
        s.push_str("fewer than 4 points: no scaling verdicts\n");
    }
    for v in &r.verdicts {
        let _ = writeln!(
            s,
            "{:<24} {:<10} residual {:.2e}, log2 ratio mean {:.3} last {:.3}",
            v.metric,
            class_name(v.report.class),
            v.report.relative_residual,
            v.report.mean_log2_ratio(),
            v.report.last_log2_ratio()
        );
    }
    if let Some(exact) = r.walker_count_exact {
        let _ = writeln!(s, "{:<24} {}", "walker count 2(n+m)-1", if exact { "exact" } else { "MISMATCH" });
    }
    s.push_str("\nreference scalings\n");
    for row in r.reference {
        let _ = writeln!(
            s,
            "  {:<32} depth {:<10} trees {:<7} 2-qubit {} / {}, node ops {} / {}",
            row.model,
            row.circuit_depth,
            row.binary_trees,
            row.two_qubit_gates_classical,
            row.two_qubit_gates_superposition,
            row.node_ops_classical,
            row.node_ops_superposition
        );
    }
    let _ = writeln!(s, "  note: {}", r.reference_note);
    s
}

fn cmd_replay(a: ReplayArgs) -> Result<Report> {
    let trace = context("loading trace", read_text(&a.trace).and_then(|t| load_trace(&t)))?;
    let mismatched = context("replaying", trace.replay())?;
    if let Some(path) = &a.ledger {
        let ledger = context("measuring resources", measure(&trace))?;
        write_atomic(path, &to_json(&LedgerDocument { config: trace.config, ledger }))?;
    }
    let gates = trace.gates().count();
    let mut text = String::new();
    if mismatched.is_empty() {
        let _ = writeln!(text, "PASS replay: {gates} gates reproduce all {} snapshots", trace.steps.len());
    } else {
        let _ = writeln!(
            text,
            "FAIL replay: {} of {} snapshots differ, first at step {}",
            mismatched.len(),
            trace.steps.len(),
            mismatched[0]
        );
    }
    Ok(Report { text, code: if mismatched.is_empty() { EXIT_OK } else { EXIT_PROPERTY } })
}
