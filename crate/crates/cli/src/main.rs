//! `didtrust`: scripted access to identities, credentials, logs, agreements,
//! audits, attestations, and the built-in simulator scenarios.
//!
//! Exit status is 0 on success, 1 when a verification or scenario assertion
//! fails, and 2 on usage or input errors.

mod flows;
mod home;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use didtrust_core::canonical::{canonical_string, read_canonical_file, write_canonical_file};
use didtrust_core::clock::Timestamp;
use didtrust_core::credentials::{is_revoked, issue, revoke, ClaimSet, ClaimValue, IssueOptions, Predicate};
use didtrust_core::digest::{Digest, Nonce};
use didtrust_core::governance::{attest_artifact, verify_artifact, ArtifactAttestation, ArtifactKind, ARTIFACT_SCHEMA};
use didtrust_core::identity::{generate_did, resolve, rotate_key, Did, KeyPair};
use didtrust_core::sim::{run_scenario, SimError, SCENARIOS};
use didtrust_core::verification::{verify_presentation, TrustAnchorSet};
use didtrust_core::vlog::{
    leaf_hash, verify_consistency, verify_inclusion_root, InclusionProof, OperatedLog, PersistentLog, SignedRoot,
};
use didtrust_core::wallet::{ClaimRequirement, Presentation, PresentationRequest, RequestItem, Wallet};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use home::{CredentialFile, Home, KeyFile};

#[derive(Parser)]
#[command(name = "didtrust", version, about = "Decentralized identity, credentials, logs, and agreements")]
struct Cli {
    /// Directory holding the DID registry and revocation lists.
    #[arg(long, global = true, default_value = ".didtrust")]
    home: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Evaluation date (YYYY-MM-DD). Defaults to today.
    #[arg(long, global = true)]
    date: Option<NaiveDate>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a signing key.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        /// Derive the key from this seed instead of the OS random source.
        #[arg(long)]
        seed: Option<u64>,
    },
    #[command(subcommand)]
    Did(DidCommand),
    #[command(subcommand)]
    Vc(VcCommand),
    /// Build a presentation answering a request.
    Present(PresentArgs),
    #[command(subcommand)]
    Log(LogCommand),
    #[command(subcommand)]
    Agree(AgreeCommand),
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Attest an artifact, or check an attestation with --check.
    Attest(AttestArgs),
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Subcommand)]
enum DidCommand {
    /// Register a DID for a key file and record it there.
    Create {
        #[arg(long)]
        key: PathBuf,
    },
    Resolve { did: Did },
    /// Rotate the DID in --key to the key in --new-key.
    Rotate {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        new_key: PathBuf,
    },
}

#[derive(Subcommand)]
enum VcCommand {
    Issue {
        /// Issuer key file.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        subject: Did,
        #[arg(long)]
        schema: String,
        /// name=value; repeatable.
        #[arg(long = "claim", required = true)]
        claims: Vec<String>,
        /// Add an age_over_N predicate claim; repeatable.
        #[arg(long)]
        age_over: Vec<u32>,
        /// Add a claim_equals_value predicate from claim=value; repeatable.
        #[arg(long)]
        equals: Vec<String>,
        #[arg(long)]
        expires: Option<NaiveDate>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a credential file, or a presentation when --challenge is given.
    Verify {
        file: PathBuf,
        /// Expected challenge (64 hex) for presentations.
        #[arg(long)]
        challenge: Option<Nonce>,
        /// schema=did trust anchors for presentations; repeatable.
        #[arg(long)]
        trust: Vec<String>,
    },
    Revoke {
        #[arg(long)]
        key: PathBuf,
        credential_id: String,
    },
}

#[derive(Args)]
struct PresentArgs {
    /// Holder key file.
    #[arg(long)]
    key: PathBuf,
    /// Credential files; repeatable.
    #[arg(long = "credential", required = true)]
    credentials: Vec<PathBuf>,
    #[arg(long)]
    challenge: Nonce,
    /// schema:claim[=value],claim...; repeatable.
    #[arg(long = "item", required = true)]
    items: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum LogCommand {
    Append {
        log: PathBuf,
        data: String,
        /// Treat DATA as hex.
        #[arg(long)]
        hex: bool,
    },
    /// Print an inclusion proof for a leaf.
    Prove {
        log: PathBuf,
        index: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an inclusion proof against a root, without the log.
    Verify {
        #[arg(long)]
        leaf: String,
        #[arg(long)]
        hex: bool,
        #[arg(long)]
        proof: PathBuf,
        #[arg(long)]
        root: Digest,
    },
    /// Prove and check that the first OLD leaves are a prefix of the first NEW.
    Consistency {
        log: PathBuf,
        old: u64,
        new: Option<u64>,
    },
}

#[derive(Subcommand)]
enum AgreeCommand {
    /// Negotiate and sign an agreement between generated parties.
    Run {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "two-clause")]
        template: String,
        #[arg(long, default_value = "none")]
        sharing: String,
        #[arg(long)]
        ads: bool,
        #[arg(long)]
        require_compliance: bool,
        #[arg(long)]
        audited: bool,
    },
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Audit a generated provider and log the verdict.
    Run {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = didtrust_core::governance::CONSENT_REGULATION)]
        regulation: String,
        /// record.field=value; repeatable.
        #[arg(long = "evidence", required = true)]
        evidence: Vec<String>,
    },
}

#[derive(Args)]
struct AttestArgs {
    /// Publisher key file.
    #[arg(long, required_unless_present = "check")]
    key: Option<PathBuf>,
    #[arg(long)]
    artifact: PathBuf,
    #[arg(long, default_value = "model")]
    kind: ArtifactKind,
    /// key=value; repeatable.
    #[arg(long = "prop")]
    props: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "check")]
    out: Option<PathBuf>,
    /// Attestation bundle to check against the artifact.
    #[arg(long)]
    check: Option<PathBuf>,
    /// Publisher DID to trust when checking.
    #[arg(long, requires = "check")]
    trust: Option<Did>,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    List,
    Run {
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

/// What a command reports.
struct Report {
    ok: bool,
    json: Value,
    text: String,
}

impl Report {
    fn ok(json: Value, text: impl Into<String>) -> Report {
        Report { ok: true, json, text: text.into() }
    }
}

/// An error that means "bad input", as opposed to "checked and failed".
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// An attestation together with what a consumer needs to check it.
#[derive(Serialize, Deserialize)]
struct AttestationBundle {
    attestation: ArtifactAttestation,
    root: SignedRoot,
    inclusion: InclusionProof,
}

fn today() -> NaiveDate {
    let days = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() / 86_400)
        .unwrap_or(0);
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Days::new(days)
}

fn timestamp(date: NaiveDate) -> Result<Timestamp> {
    Timestamp::from_date(date).ok_or_else(|| anyhow!(Usage(format!("{date} precedes 2020-01-01"))))
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn pair(item: &str, sep: char) -> Result<(&str, &str)> {
    item.split_once(sep).ok_or_else(|| anyhow!(Usage(format!("{item:?} is not of the form a{sep}b"))))
}

fn leaf_bytes(data: &str, is_hex: bool) -> Result<Vec<u8>> {
    if is_hex {
        hex::decode(data).map_err(|e| anyhow!(Usage(format!("leaf is not hex: {e}"))))
    } else {
        Ok(data.as_bytes().to_vec())
    }
}

fn parse_item(spec: &str) -> Result<RequestItem> {
    let (schema, claims) = pair(spec, ':')?;
    let claims = claims
        .split(',')
        .filter(|c| !c.is_empty())
        .map(|c| match c.split_once('=') {
            Some((name, value)) => ClaimRequirement::equals(name, ClaimValue::infer(value)),
            None => ClaimRequirement::any(c),
        })
        .collect();
    Ok(RequestItem::new(schema, claims))
}

fn anchors(context: &str, trust: &[String]) -> Result<TrustAnchorSet> {
    let mut set = TrustAnchorSet::new(context);
    for t in trust {
        let (schema, did) = pair(t, '=')?;
        set.add(schema, did.parse::<Did>().map_err(|e| anyhow!(Usage(e.to_string())))?);
    }
    Ok(set)
}

fn run(cli: &Cli) -> Result<Report> {
    let now = timestamp(cli.date.unwrap_or_else(today))?;
    match &cli.command {
        Command::Keygen { out, seed } => {
            let keys = KeyPair::generate(&mut rng(*seed));
            let file = KeyFile::new(&keys);
            file.save(out)?;
            Ok(Report::ok(json!({ "public_key": file.public_key }), format!("public key {}", file.public_key)))
        }
        Command::Did(cmd) => did(cli, cmd),
        Command::Vc(cmd) => vc(cli, cmd, now),
        Command::Present(args) => present(cli, args, now),
        Command::Log(cmd) => log(cmd),
        Command::Agree(AgreeCommand::Run { seed, template, sharing, ads, require_compliance, audited }) => {
            let opts = flows::AgreeOptions {
                seed: *seed,
                template: template.clone(),
                sharing: sharing.clone(),
                ads: *ads,
                require_compliance: *require_compliance,
                audited: *audited,
                now,
            };
            Ok(match flows::agree(&opts).map_err(|e| anyhow!(Usage(e.to_string())))? {
                flows::AgreeOutcome::Signed { agreement, leaf_index, obligations } => {
                    let mut text = format!("signed agreement {}\nlogged at leaf {leaf_index}\n", agreement.hash);
                    for (event, o) in &obligations {
                        let _ = writeln!(text, "{event}: {}", o.join(", "));
                    }
                    text.push('\n');
                    text.push_str(&agreement.text);
                    Report::ok(
                        json!({ "phase": "signed", "agreement": agreement, "leaf_index": leaf_index, "obligations": obligations }),
                        text,
                    )
                }
                flows::AgreeOutcome::Aborted { stage, reason } => Report {
                    ok: false,
                    json: json!({ "phase": "aborted", "stage": stage, "reason": reason }),
                    text: format!("aborted during {stage:?}: {reason}"),
                },
            })
        }
        Command::Audit(AuditCommand::Run { seed, regulation, evidence }) => {
            let evidence = flows::parse_evidence(evidence).map_err(|e| anyhow!(Usage(e.to_string())))?;
            let run = flows::audit(*seed, regulation, &evidence, now).map_err(|e| anyhow!(Usage(e.to_string())))?;
            let record = &run.outcome.record;
            let passed = record.verdict == didtrust_core::governance::AuditVerdict::Pass;
            Ok(Report {
                ok: passed && run.logged,
                json: json!({
                    "record": record,
                    "credential": run.outcome.credential.as_ref().map(|(c, _)| c),
                    "root": run.root,
                    "logged": run.logged,
                }),
                text: format!(
                    "{} audit of {}: {:?}\nlogged at leaf {} of {} ({})",
                    record.regulation_id,
                    record.provider,
                    record.verdict,
                    record.leaf_index,
                    record.log_id,
                    if run.logged { "inclusion verified" } else { "inclusion NOT verified" }
                ),
            })
        }
        Command::Attest(args) => attest(cli, args, now),
        Command::Scenario(ScenarioCommand::List) => {
            Ok(Report::ok(json!(SCENARIOS), SCENARIOS.join("\n")))
        }
        Command::Scenario(ScenarioCommand::Run { name, seed, transcript }) => scenario(name, *seed, transcript.as_deref()),
    }
}

fn did(cli: &Cli, cmd: &DidCommand) -> Result<Report> {
    let home = Home::open(&cli.home)?;
    match cmd {
        DidCommand::Create { key } => {
            let mut file = KeyFile::load(key)?;
            let keys = file.keys()?;
            let (did, _, doc) = generate_did(&keys.secret_bytes())?;
            home.registry.register(doc)?;
            file.did = Some(did);
            file.save(key)?;
            Ok(Report::ok(json!({ "did": did }), did.to_string()))
        }
        DidCommand::Resolve { did } => {
            let doc = resolve(did, &home.registry)?;
            let text = format!(
                "{}\nversion {}\ncontroller {}\nactive key {}\npassive {}",
                doc.did,
                doc.version,
                doc.controller,
                doc.active_key.map_or("none".into(), |k| k.to_string()),
                doc.passive
            );
            Ok(Report::ok(serde_json::to_value(&doc)?, text))
        }
        DidCommand::Rotate { key, new_key } => {
            let current = KeyFile::load(key)?;
            let did = current.did()?;
            let mut next = KeyFile::load(new_key)?;
            let doc = rotate_key(&did, &current.keys()?, next.keys()?.public_key(), &home.registry)?;
            next.did = Some(did);
            next.save(new_key)?;
            Ok(Report::ok(json!({ "did": did, "version": doc.version }), format!("{did} now at version {}", doc.version)))
        }
    }
}

fn vc(cli: &Cli, cmd: &VcCommand, now: Timestamp) -> Result<Report> {
    let home = Home::open(&cli.home)?;
    match cmd {
        VcCommand::Issue { key, subject, schema, claims, age_over, equals, expires, seed, out } => {
            let file = KeyFile::load(key)?;
            let (issuer, keys) = (file.did()?, file.keys()?);
            let pairs: Vec<(String, ClaimValue)> = claims
                .iter()
                .map(|c| pair(c, '=').map(|(k, v)| (k.to_owned(), ClaimValue::infer(v))))
                .collect::<Result<_>>()?;
            let claim_set = ClaimSet::from_pairs(pairs).map_err(|e| anyhow!(Usage(e.to_string())))?;
            let mut predicates: Vec<Predicate> = age_over.iter().map(|&n| Predicate::age_over(n)).collect();
            for e in equals {
                let (claim, value) = pair(e, '=')?;
                predicates.push(Predicate::value_equals(claim, ClaimValue::infer(value)));
            }
            let options = IssueOptions { expires_at: expires.map(timestamp).transpose()?, predicates };
            home.ensure_revocation_list(&issuer, &keys)?;
            let (credential, bundle) =
                issue(&keys, &issuer, subject, schema, &claim_set, &options, &home.registry, now, &mut rng(*seed))?;
            let id = credential.id.clone();
            write_canonical_file(out, &CredentialFile { credential, bundle })?;
            Ok(Report::ok(json!({ "credential_id": id }), id))
        }
        VcCommand::Revoke { key, credential_id } => {
            let file = KeyFile::load(key)?;
            let (issuer, keys) = (file.did()?, file.keys()?);
            let list = home.ensure_revocation_list(&issuer, &keys)?;
            let next = revoke(&keys, credential_id, &list, &home.registry)?;
            home.save_revocation_list(&next)?;
            Ok(Report::ok(
                json!({ "revoked": credential_id, "counter": next.counter }),
                format!("revoked {credential_id} (list counter {})", next.counter),
            ))
        }
        VcCommand::Verify { file, challenge: Some(challenge), trust } => {
            let presentation: Presentation = read_canonical_file(file).with_context(|| format!("reading {}", file.display()))?;
            let anchors = anchors("cli", trust)?;
            let snapshots = home.snapshots(now)?;
            let report = verify_presentation(&presentation, challenge, &anchors, &home.registry, &snapshots, now)?;
            let mut text = String::new();
            for c in &report.checks {
                let _ = writeln!(text, "{} {} {}", if c.passed { "ok  " } else { "FAIL" }, c.check, c.detail);
            }
            for d in &report.disclosed {
                let _ = writeln!(text, "disclosed {} = {}", d.name, d.value.render());
            }
            let _ = write!(text, "{}", if report.accepted() { "accepted" } else { "rejected" });
            Ok(Report { ok: report.accepted(), json: serde_json::to_value(&report)?, text })
        }
        VcCommand::Verify { file, challenge: None, .. } => {
            let CredentialFile { credential, bundle } =
                read_canonical_file(file).with_context(|| format!("reading {}", file.display()))?;
            let revoked = home.revocation_list(&credential.issuer)?.map(|l| is_revoked(&credential.id, &l));
            let checks = BTreeMap::from([
                ("issuer_signature", credential.verify_signature(&home.registry)),
                ("bundle_matches", credential.matches_bundle(&bundle)),
                ("not_expired", !credential.is_expired(now)),
                ("not_revoked", revoked == Some(false)),
            ]);
            let ok = checks.values().all(|&v| v);
            let mut text = String::new();
            for (name, passed) in &checks {
                let _ = writeln!(text, "{} {name}", if *passed { "ok  " } else { "FAIL" });
            }
            let _ = write!(text, "{} {}", credential.id, if ok { "valid" } else { "invalid" });
            Ok(Report { ok, json: json!({ "credential_id": credential.id, "checks": checks, "valid": ok }), text })
        }
    }
}

fn present(cli: &Cli, args: &PresentArgs, now: Timestamp) -> Result<Report> {
    let home = Home::open(&cli.home)?;
    let file = KeyFile::load(&args.key)?;
    let mut wallet = Wallet::new(file.did()?, file.keys()?);
    for path in &args.credentials {
        let CredentialFile { credential, bundle } =
            read_canonical_file(path).with_context(|| format!("reading {}", path.display()))?;
        wallet.store(credential, bundle, &home.registry)?;
    }
    let items = args.items.iter().map(|i| parse_item(i)).collect::<Result<_>>()?;
    let request = PresentationRequest::new(args.challenge, items);
    let presentation = wallet.build_presentation(&request, now, &home.registry)?;
    write_canonical_file(&args.out, &presentation)?;
    let disclosed: Vec<String> = presentation
        .credentials
        .iter()
        .flat_map(|c| c.disclosed.iter().map(move |d| format!("{}.{}", c.credential.schema, d.name)))
        .collect();
    Ok(Report::ok(json!({ "disclosed": disclosed }), format!("disclosed {}", disclosed.join(", "))))
}

fn log(cmd: &LogCommand) -> Result<Report> {
    match cmd {
        LogCommand::Append { log, data, hex } => {
            let mut file = PersistentLog::open(log)?;
            let index = file.append(leaf_bytes(data, *hex)?)?;
            let head = file.log().tree_head();
            Ok(Report::ok(
                json!({ "index": index, "tree_size": head.tree_size, "root": head.root }),
                format!("leaf {index}; size {} root {}", head.tree_size, head.root),
            ))
        }
        LogCommand::Prove { log, index, out } => {
            let file = PersistentLog::open(log)?;
            let proof = file.log().prove_inclusion(*index).map_err(|e| anyhow!(Usage(e.to_string())))?;
            if let Some(out) = out {
                write_canonical_file(out, &proof)?;
            }
            let root = file.log().root();
            let mut text = format!("leaf {} of {}; root {}\n", proof.leaf_index, proof.tree_size, root);
            for d in &proof.path {
                let _ = writeln!(text, "  {d}");
            }
            Ok(Report::ok(json!({ "proof": proof, "root": root }), text.trim_end()))
        }
        LogCommand::Verify { leaf, hex, proof, root } => {
            let proof: InclusionProof = read_canonical_file(proof).with_context(|| format!("reading {}", proof.display()))?;
            let ok = verify_inclusion_root(&leaf_hash(&leaf_bytes(leaf, *hex)?), &proof, root);
            Ok(Report {
                ok,
                json: json!({ "valid": ok }),
                text: if ok { "inclusion verified".into() } else { "inclusion proof does NOT verify".into() },
            })
        }
        LogCommand::Consistency { log, old, new } => {
            let file = PersistentLog::open(log)?;
            let log = file.log();
            let new = new.unwrap_or(log.size());
            let proof = log.prove_consistency(*old, new).map_err(|e| anyhow!(Usage(e.to_string())))?;
            let (old_root, new_root) = (log.root_at(*old)?, log.root_at(new)?);
            let ok = verify_consistency(&old_root, &new_root, &proof);
            let mut text = format!("{old} -> {new}: {old_root} -> {new_root}\n");
            for d in &proof.path {
                let _ = writeln!(text, "  {d}");
            }
            text.push_str(if ok { "consistent" } else { "NOT consistent" });
            Ok(Report {
                ok,
                json: json!({ "proof": proof, "old_root": old_root, "new_root": new_root, "valid": ok }),
                text,
            })
        }
    }
}

fn attest(cli: &Cli, args: &AttestArgs, now: Timestamp) -> Result<Report> {
    let home = Home::open(&cli.home)?;
    let artifact = std::fs::read(&args.artifact).with_context(|| format!("reading {}", args.artifact.display()))?;
    if let Some(check) = &args.check {
        let bundle: AttestationBundle = read_canonical_file(check).with_context(|| format!("reading {}", check.display()))?;
        let publisher = args.trust.ok_or_else(|| anyhow!(Usage("--check needs --trust <publisher DID>".into())))?;
        let anchors = TrustAnchorSet::new("artifacts").with(ARTIFACT_SCHEMA, publisher);
        let ok = verify_artifact(&artifact, &bundle.attestation, &anchors, &bundle.root, &bundle.inclusion, &home.registry);
        return Ok(Report {
            ok,
            json: json!({ "valid": ok, "publisher": publisher }),
            text: if ok { format!("attested by {publisher}") } else { "attestation does NOT match".into() },
        });
    }
    let key = args.key.as_ref().expect("clap requires --key without --check");
    let file = KeyFile::load(key)?;
    let (publisher, keys) = (file.did()?, file.keys()?);
    let props: BTreeMap<String, String> =
        args.props.iter().map(|p| pair(p, '=').map(|(k, v)| (k.to_owned(), v.to_owned()))).collect::<Result<_>>()?;
    let mut log = OperatedLog::new(publisher);
    let attestation =
        attest_artifact(&publisher, &keys, &artifact, args.kind, &props, &home.registry, &mut log, now, &mut rng(args.seed))?;
    let bundle = AttestationBundle {
        inclusion: log.prove_inclusion(attestation.leaf_index)?,
        root: log.signed_root(&keys),
        attestation,
    };
    if let Some(out) = &args.out {
        write_canonical_file(out, &bundle)?;
    }
    let subject = bundle.attestation.credential.subject;
    Ok(Report::ok(
        json!({ "artifact_did": subject, "digest": bundle.attestation.artifact_digest() }),
        format!("artifact {subject}"),
    ))
}

fn scenario(name: &str, seed: u64, transcript_path: Option<&Path>) -> Result<Report> {
    let transcript = match run_scenario(name, seed) {
        Ok(t) => t,
        Err(e @ SimError::UnknownScenario(_)) => bail!(Usage(format!("{e}; try `scenario list`"))),
        Err(e) => {
            return Ok(Report { ok: false, json: json!({ "scenario": name, "seed": seed, "error": e.to_string() }), text: e.to_string() })
        }
    };
    if let Some(path) = transcript_path {
        std::fs::write(path, transcript.to_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut text = String::new();
    for e in &transcript.entries {
        let _ = writeln!(text, "{:>4} {} -> {} {} {}", e.step, e.from, e.to, e.kind, e.payload_digest);
    }
    for e in &transcript.dead_letters {
        let _ = writeln!(text, "{:>4} {} -> {} {} (dead letter)", e.step, e.from, e.to, e.kind);
    }
    for a in &transcript.assertions {
        let _ = writeln!(text, "ok {a}");
    }
    Ok(Report::ok(serde_json::to_value(&transcript)?, text.trim_end()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Json => println!("{}", canonical_string(&report.json)),
                Format::Text => println!("{}", report.text),
            }
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
