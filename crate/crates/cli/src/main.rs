//! `keytrap`: forge colliding keys, generate attack zones, validate them
//! under mitigation policies and simulate resolver load.
//!
//! Exit codes: 0 success or Secure, 1 runtime error, 2 usage error,
//! 3 Bogus, 4 PolicyServfail, 5 ChainBroken.

mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use keytrap_core::costmodel::{builtin_profile, builtin_profiles, estimate_stall, ResolverProfile};
use keytrap_core::keyforge::{forge_colliding_set, ForgeMode, KSK_FLAGS, ZSK_FLAGS};
use keytrap_core::simharness::{
    bundled_scenario, run_scenario, ScenarioConfig, SimulationReport, BUNDLED_SCENARIOS,
};
use keytrap_core::validator::{
    resolve_and_validate, CostCounters, CryptoMode, KeySelection, MitigationPolicy, Reason,
    ResolutionOptions, Stage, Status,
};
use keytrap_core::wire::{max_validations, pack_max, Cipher, DnsName, RecordKind};
use keytrap_core::zonegen::{
    build, check_fit, dnskey_presentation, emit_zonefile, AttackVectorSpec, FitReport, Vector,
    ZoneGraph, ZonegenError,
};

use manifest::{mismatches, sha256_hex, Run, RunManifest};

const NOTICE: &str = "keytrap: for isolated lab analysis only. It opens no sockets; \
keep generated zones and keys off publicly reachable servers.";

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::runtime(format!("{}: {e}", path.display()))
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "keytrap", version, about = "DNSSEC key-tag collision lab", long_about = NOTICE)]
struct Cli {
    /// Suppress the lab-use notice on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forge DNSKEYs sharing one key tag.
    Forge(ForgeArgs),
    /// Generate an attack zone graph, its zonefiles and a fit report.
    Genzone(GenzoneArgs),
    /// Validate a zone graph and report status and cost counters.
    Validate(ValidateArgs),
    /// Run a resolver simulation scenario.
    Simulate(SimulateArgs),
    /// Re-run a command from its manifest and compare outputs.
    Replay {
        manifest: PathBuf,
    },
    /// Theoretical per-message maxima for every supported cipher.
    Ciphers {
        #[arg(long)]
        json: bool,
    },
    /// Built-in resolver profiles as JSON.
    Profiles,
    /// Names of the bundled scenario files.
    Scenarios,
    /// JSON schema of an input or output format.
    Schema {
        #[arg(value_enum)]
        which: SchemaKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaKind {
    Spec,
    Scenario,
    Report,
    Outcome,
    Profile,
    Policy,
    Manifest,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    Patch,
    Bruteforce,
    OnCurve,
}

impl From<ModeArg> for ForgeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Patch => ForgeMode::Patch,
            ModeArg::Bruteforce => ForgeMode::Bruteforce,
            ModeArg::OnCurve => ForgeMode::OnCurve,
        }
    }
}

#[derive(Args, Serialize, Deserialize)]
struct ForgeArgs {
    /// Algorithm number or name, e.g. 14 or ECDSAP384SHA384.
    #[arg(long)]
    alg: Cipher,
    #[arg(long)]
    tag: u16,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=65535))]
    count: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "attack.er.")]
    owner: DnsName,
    /// Forge key-signing keys (flags 257) instead of zone keys (256).
    #[arg(long)]
    ksk: bool,
    #[arg(long, value_enum, default_value = "patch")]
    mode: ModeArg,
    /// Write keys.txt and manifest.json here instead of printing.
    #[arg(long)]
    #[serde(skip)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenzoneArgs {
    /// sigjam, lockcram, keysigtrap, hashtrap, anytype or benign.
    vector: Option<Vector>,
    /// Full attack spec as JSON; flags given alongside override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, short = 'k')]
    k: Option<usize>,
    #[arg(long, short = 's')]
    s: Option<usize>,
    #[arg(long, short = 'd')]
    d: Option<usize>,
    /// Rrsets at the query name for the ANY-type vector.
    #[arg(long)]
    rrsets: Option<usize>,
    #[arg(long)]
    subzones: Option<usize>,
    #[arg(long)]
    alg: Option<Cipher>,
    #[arg(long)]
    chain_alg: Option<Cipher>,
    #[arg(long)]
    tag: Option<u16>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    apex: Option<DnsName>,
    #[arg(long)]
    parent: Option<DnsName>,
    /// Write zonefiles, graph.json, fit.json and manifest.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum CryptoArg {
    Real,
    Null,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KeySelectionArg {
    Efficient,
    Rescan,
}

#[derive(Args)]
struct ValidateArgs {
    /// graph.json written by genzone.
    graph: PathBuf,
    /// e.g. failures=16,collisions=4,total=8; none; combined.
    #[arg(long, default_value = "none")]
    policy: MitigationPolicy,
    /// Take key selection, re-queries and key cap from a built-in profile
    /// and report its stall estimate.
    #[arg(long)]
    profile: Option<String>,
    /// `null` consults generation-time ground truth; fast for large zones.
    #[arg(long, value_enum, default_value = "real")]
    crypto: CryptoArg,
    #[arg(long, value_enum)]
    key_selection: Option<KeySelectionArg>,
    #[arg(long)]
    requery: Option<u32>,
    #[arg(long)]
    max_keys: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    scenario: Option<PathBuf>,
    /// Name of a bundled scenario instead of a file.
    #[arg(long, conflicts_with = "scenario")]
    bundled: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write report.json, timeline.csv and manifest.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ValidateConfig {
    graph: PathBuf,
    graph_sha256: String,
    policy: MitigationPolicy,
    options: ResolutionOptions,
    profile: Option<String>,
}

#[derive(Debug, Serialize, schemars::JsonSchema)]
struct ValidateOutput {
    status: Status,
    reason: Reason,
    counters: CostCounters,
    answer_counters: CostCounters,
    stages: Vec<Stage>,
    profile: Option<String>,
    stall_seconds: Option<f64>,
}

fn parse_json<T: DeserializeOwned>(label: &str, text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::runtime(format!("{label}: at `{path}`: {}", e.into_inner()))
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn forge(args: &ForgeArgs) -> Result<Run> {
    let flags = if args.ksk { KSK_FLAGS } else { ZSK_FLAGS };
    let keys = forge_colliding_set(
        args.alg,
        args.tag,
        args.count as usize,
        &args.owner,
        flags,
        args.seed,
        args.mode.into(),
    )
    .map_err(|e| CliError::runtime(e.to_string()))?;
    let mut text = String::new();
    for k in &keys {
        text.push_str(&dnskey_presentation(k));
        text.push('\n');
    }
    Ok(Run {
        command: "forge",
        config: serde_json::to_value(args).expect("serializable"),
        seed: args.seed,
        outputs: vec![("keys.txt".to_owned(), text.into_bytes())],
        primary: 0,
    })
}

fn genzone_spec(args: &GenzoneArgs) -> Result<AttackVectorSpec> {
    let mut spec = match (&args.spec, args.vector) {
        (Some(p), _) => parse_json::<AttackVectorSpec>(&p.display().to_string(), &read(p)?)?,
        (None, Some(v)) => AttackVectorSpec::new(v),
        (None, None) => return Err(CliError::usage("genzone needs a VECTOR or --spec FILE")),
    };
    if let (Some(_), Some(v)) = (&args.spec, args.vector) {
        spec.vector = v;
    }
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut spec.key_count, args.k);
    set(&mut spec.sig_count, args.s);
    set(&mut spec.ds_count, args.d);
    set(&mut spec.rrset_count, args.rrsets);
    set(&mut spec.subzone_count, args.subzones);
    if let Some(a) = args.alg {
        spec.algorithm = a;
    }
    if args.chain_alg.is_some() {
        spec.chain_algorithm = args.chain_alg;
    }
    if let Some(t) = args.tag {
        spec.colliding_tag = t;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(a) = &args.apex {
        spec.apex = a.clone();
    }
    if let Some(p) = &args.parent {
        spec.parent_apex = p.clone();
    }
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(spec)
}

fn zonefile_name(apex: &DnsName) -> String {
    let s = apex.to_string();
    let s = s.trim_end_matches('.');
    format!("{}.zone", if s.is_empty() { "root" } else { s })
}

fn genzone(spec: &AttackVectorSpec) -> Result<(Run, FitReport)> {
    let graph = build(spec).map_err(|e| match e {
        ZonegenError::Fit(f) => CliError::runtime(format!("fit check failed: {f}")),
        other => CliError::runtime(other.to_string()),
    })?;
    let fit = check_fit(&graph).map_err(|e| CliError::runtime(e.to_string()))?;
    let mut outputs: Vec<(String, Vec<u8>)> = graph
        .zones
        .values()
        .map(|z| (zonefile_name(&z.apex), emit_zonefile(z).into_bytes()))
        .collect();
    outputs.push(("graph.json".to_owned(), to_json(&graph)));
    outputs.push(("fit.json".to_owned(), to_json(&fit)));
    let primary = outputs.len() - 2;
    Ok((
        Run {
            command: "genzone",
            config: serde_json::to_value(spec).expect("serializable"),
            seed: spec.seed,
            outputs,
            primary,
        },
        fit,
    ))
}

fn validate_config(args: &ValidateArgs, graph_sha256: String) -> Result<ValidateConfig> {
    let mut options = match &args.profile {
        Some(name) => builtin_profile(name)
            .map_err(|e| CliError::usage(e.to_string()))?
            .resolution_options(CryptoMode::Real),
        None => ResolutionOptions::default(),
    };
    options.crypto = match args.crypto {
        CryptoArg::Real => CryptoMode::Real,
        CryptoArg::Null => CryptoMode::Null,
    };
    if let Some(k) = args.key_selection {
        options.key_selection = match k {
            KeySelectionArg::Efficient => KeySelection::Efficient,
            KeySelectionArg::Rescan => KeySelection::Rescan,
        };
    }
    if let Some(r) = args.requery {
        options.requery_count = r;
    }
    if args.max_keys.is_some() {
        options.max_keys_per_response = args.max_keys;
    }
    Ok(ValidateConfig {
        graph: args.graph.clone(),
        graph_sha256,
        policy: args.policy,
        options,
        profile: args.profile.clone(),
    })
}

fn validate(cfg: &ValidateConfig, text: &str) -> Result<(Run, Status)> {
    let graph: ZoneGraph = parse_json(&cfg.graph.display().to_string(), text)?;
    let out = resolve_and_validate(&graph, &cfg.policy, &cfg.options);
    let (profile, stall_seconds) = match &cfg.profile {
        Some(name) => {
            let p: ResolverProfile = builtin_profile(name).map_err(|e| CliError::usage(e.to_string()))?;
            let alg = graph
                .spec
                .as_ref()
                .map(|s| s.algorithm.algorithm())
                .ok_or_else(|| CliError::runtime("graph records no attack spec to cost against"))?;
            let stall = estimate_stall(&out.counters, &p, alg).map_err(|e| CliError::runtime(e.to_string()))?;
            (Some(p.name), Some(stall))
        }
        None => (None, None),
    };
    let output = ValidateOutput {
        status: out.status,
        reason: out.reason,
        counters: out.counters,
        answer_counters: out.answer_counters(),
        stages: out.stages.clone(),
        profile,
        stall_seconds,
    };
    Ok((
        Run {
            command: "validate",
            config: serde_json::to_value(cfg).expect("serializable"),
            seed: graph.spec.as_ref().map_or(0, |s| s.seed),
            outputs: vec![("outcome.json".to_owned(), to_json(&output))],
            primary: 0,
        },
        out.status,
    ))
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Secure => 0,
        Status::Bogus => 3,
        Status::PolicyServfail => 4,
        Status::ChainBroken => 5,
    }
}

fn simulate(cfg: &ScenarioConfig) -> Result<(Run, SimulationReport)> {
    let report = run_scenario(cfg).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok((
        Run {
            command: "simulate",
            config: serde_json::to_value(cfg).expect("serializable"),
            seed: cfg.seed,
            outputs: vec![
                ("report.json".to_owned(), to_json(&report)),
                ("timeline.csv".to_owned(), report.timeline_csv().into_bytes()),
            ],
            primary: 0,
        },
        report,
    ))
}

fn summary(r: &SimulationReport) -> serde_json::Value {
    serde_json::json!({
        "profile": r.profile,
        "threads": r.threads,
        "benign_sent": r.benign_sent,
        "benign_answered": r.benign_answered,
        "benign_lost": r.benign_lost,
        "loss_fraction": r.loss_fraction,
        "attack_sent": r.attack_sent,
        "buffer_drops": r.buffer_drops,
        "attack_stall_seconds": r.attack_cost.as_ref().map(|c| c.stall_seconds),
        "longest_stall_seconds": r.longest_stall().map(|i| i.len()),
        "total_stall_seconds": r.total_stall_seconds(),
    })
}

fn stdout(bytes: &[u8]) -> Result<()> {
    std::io::stdout()
        .write_all(bytes)
        .map_err(|e| CliError::runtime(e.to_string()))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn replay(path: &Path) -> Result<u8> {
    let recorded: RunManifest = parse_json(&path.display().to_string(), &read(path)?)?;
    let label = format!("{} config", path.display());
    let run = match recorded.command.as_str() {
        "forge" => forge(&parse_json(&label, &recorded.config.to_string())?)?,
        "genzone" => genzone(&parse_json(&label, &recorded.config.to_string())?)?.0,
        "validate" => {
            let cfg: ValidateConfig = parse_json(&label, &recorded.config.to_string())?;
            let text = read(&cfg.graph)?;
            if sha256_hex(text.as_bytes()) != cfg.graph_sha256 {
                return Err(CliError::runtime(format!("{} changed since the recorded run", cfg.graph.display())));
            }
            validate(&cfg, &text)?.0
        }
        "simulate" => simulate(&parse_json(&label, &recorded.config.to_string())?)?.0,
        other => return Err(CliError::runtime(format!("unknown command {other:?} in manifest"))),
    };
    let bad = mismatches(&recorded, &run.manifest());
    if bad.is_empty() {
        println!("reproduced {} outputs of {}", recorded.outputs.len(), recorded.command);
        Ok(0)
    } else {
        eprintln!("outputs differ: {}", bad.join(", "));
        Ok(1)
    }
}

fn cipher_rows() -> Vec<serde_json::Value> {
    Cipher::ALL
        .into_iter()
        .map(|c| {
            serde_json::json!({
                "cipher": c.name(),
                "algorithm": c.algorithm(),
                "public_key_bytes": c.public_key_len(),
                "signature_bytes": c.signature_len(),
                "max_dnskeys": pack_max(c, RecordKind::Dnskey),
                "max_rrsigs": pack_max(c, RecordKind::Rrsig),
                "max_validations": max_validations(c),
                "signing_support": c.has_signing_support(),
            })
        })
        .collect()
}

fn ciphers_markdown() -> String {
    let mut out = String::from(
        "| Cipher | Alg | Key bytes | Sig bytes | Max DNSKEYs | Max RRSIGs | Validations |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for c in Cipher::ALL {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            c.name(),
            c.algorithm(),
            c.public_key_len(),
            c.signature_len(),
            pack_max(c, RecordKind::Dnskey),
            pack_max(c, RecordKind::Rrsig),
            max_validations(c)
        ));
    }
    out
}

fn schema(which: SchemaKind) -> serde_json::Value {
    let s = match which {
        SchemaKind::Spec => schemars::schema_for!(AttackVectorSpec),
        SchemaKind::Scenario => schemars::schema_for!(ScenarioConfig),
        SchemaKind::Report => schemars::schema_for!(SimulationReport),
        SchemaKind::Outcome => schemars::schema_for!(ValidateOutput),
        SchemaKind::Profile => schemars::schema_for!(ResolverProfile),
        SchemaKind::Policy => schemars::schema_for!(MitigationPolicy),
        SchemaKind::Manifest => schemars::schema_for!(RunManifest),
    };
    serde_json::to_value(s).expect("schema serializes")
}

fn run(cli: Cli) -> Result<u8> {
    let notice = || {
        if !cli.quiet {
            eprintln!("{NOTICE}");
        }
    };
    match &cli.command {
        Command::Forge(args) => {
            notice();
            let run = forge(args)?;
            match &args.out_dir {
                Some(dir) => report_written(&run.write(dir)?),
                None => stdout(&run.outputs[0].1)?,
            }
            Ok(0)
        }
        Command::Genzone(args) => {
            notice();
            let spec = genzone_spec(args)?;
            let (run, fit) = genzone(&spec)?;
            match &args.out_dir {
                Some(dir) => report_written(&run.write(dir)?),
                None => {
                    for (name, data) in &run.outputs {
                        if name.ends_with(".zone") {
                            stdout(data)?;
                        }
                    }
                }
            }
            for r in &fit.responses {
                eprintln!(
                    "fit ok: {} ({} {}): {} of {} bytes",
                    r.label, r.payload_count, r.payload, r.size, r.limit
                );
            }
            Ok(0)
        }
        Command::Validate(args) => {
            let text = read(&args.graph)?;
            let cfg = validate_config(args, sha256_hex(text.as_bytes()))?;
            let (run, status) = validate(&cfg, &text)?;
            stdout(&run.outputs[0].1)?;
            if let Some(dir) = &args.out_dir {
                report_written(&run.write(dir)?);
            }
            Ok(status_code(status))
        }
        Command::Simulate(args) => {
            notice();
            let (label, text) = match (&args.scenario, &args.bundled) {
                (Some(p), _) => (p.display().to_string(), read(p)?),
                (None, Some(name)) => (
                    name.clone(),
                    bundled_scenario(name)
                        .ok_or_else(|| CliError::usage(format!("no bundled scenario {name:?}; see `keytrap scenarios`")))?
                        .to_owned(),
                ),
                (None, None) => return Err(CliError::usage("simulate needs a SCENARIO file or --bundled NAME")),
            };
            let mut cfg: ScenarioConfig = parse_json(&label, &text)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            cfg.validate().map_err(|e| CliError::runtime(format!("{label}: {e}")))?;
            let (run, report) = simulate(&cfg)?;
            stdout(&to_json(&summary(&report)))?;
            if let Some(dir) = &args.out_dir {
                report_written(&run.write(dir)?);
            }
            Ok(0)
        }
        Command::Replay { manifest } => replay(manifest),
        Command::Ciphers { json } => {
            if *json {
                stdout(&to_json(&cipher_rows()))?;
            } else {
                stdout(ciphers_markdown().as_bytes())?;
            }
            Ok(0)
        }
        Command::Profiles => {
            stdout(&to_json(&builtin_profiles()))?;
            Ok(0)
        }
        Command::Scenarios => {
            for (name, _) in BUNDLED_SCENARIOS {
                println!("{name}");
            }
            Ok(0)
        }
        Command::Schema { which } => {
            stdout(&to_json(&schema(*which)))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("keytrap: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::MANIFEST_FILE;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [Status::Secure, Status::Bogus, Status::PolicyServfail, Status::ChainBroken].map(status_code);
        assert_eq!(codes, [0, 3, 4, 5]);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn output_file_names() {
        assert_eq!(MANIFEST_FILE, "manifest.json");
        assert_eq!(zonefile_name(&"attack.er.".parse().unwrap()), "attack.er.zone");
        assert_eq!(zonefile_name(&DnsName::root()), "root.zone");
    }
}
