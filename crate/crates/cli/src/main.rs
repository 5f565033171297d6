use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use piidb_core::algebra::{self, EvalOutput};
use piidb_core::classification::{anonymize, classify, reduce, Classification};
use piidb_core::infon::{Identifier, Infon, InfonKey};
use piidb_core::policy::{AlertConfig, FileSink, PolicyContext, ProtectionMark, Rule, Scope, Selector};
use piidb_core::store::{Boundary, IngestReport, QueryRecord, Store, StoreError};
use piidb_core::ProprietorKey;

#[derive(Parser)]
#[command(name = "piidb", version, about = "Classify, reduce and store personal information")]
struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "PIIDB_STORE")]
    store: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Records)]
    format: Format,
    /// Record input; defaults to standard input.
    #[arg(long = "in", global = true)]
    input: Option<PathBuf>,
    /// Append access alerts to this file.
    #[arg(long, global = true, env = "PIIDB_ALERTS")]
    alerts: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    DiscloseDeny,
    DiscloseRequireGrant,
    ExistenceHide,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Scope {
        match s {
            ScopeArg::DiscloseDeny => Scope::DiscloseDeny,
            ScopeArg::DiscloseRequireGrant => Scope::DiscloseRequireGrant,
            ScopeArg::ExistenceHide => Scope::ExistenceHide,
        }
    }
}

#[derive(Args)]
struct Access {
    /// Principal on whose behalf records are read.
    #[arg(long, default_value = "cli")]
    principal: String,
    #[arg(long, default_value = "")]
    purpose: String,
    /// Sphere the principal holds a grant for; repeatable.
    #[arg(long = "grant")]
    grants: Vec<ProprietorKey>,
}

impl Access {
    fn context(&self) -> Result<PolicyContext, Failure> {
        let mut ctx = PolicyContext::new(self.principal.clone())?.granting(self.grants.iter().copied());
        ctx.purpose = self.purpose.clone();
        Ok(ctx)
    }
}

#[derive(Subcommand)]
enum Verb {
    /// Create an empty store.
    Init,
    /// Register proprietors from identifier records.
    Register,
    /// Store infon records.
    Ingest,
    /// Print the classification of each infon.
    Classify,
    /// Reduce each compound to per-proprietor atoms and a link.
    Reduce,
    /// Remove every identifier from each infon.
    Anonymize,
    /// Attach a pooled ninfon to a sphere as related NII.
    AttachNii {
        #[arg(long)]
        sphere: ProprietorKey,
        #[arg(long)]
        key: String,
        #[arg(long)]
        justification: String,
        /// Hop limit of the relatedness boundary.
        #[arg(long)]
        boundary: Option<usize>,
    },
    /// Record a PNI ownership claim on a pooled ninfon.
    ClaimPni {
        #[arg(long)]
        sphere: ProprietorKey,
        #[arg(long)]
        key: String,
    },
    /// Add a protection rule for one infon or a whole sphere.
    Protect {
        #[arg(long)]
        rule_id: String,
        #[arg(long, value_enum)]
        scope: ScopeArg,
        #[arg(long, conflicts_with = "sphere", required_unless_present = "sphere")]
        key: Option<String>,
        #[arg(long)]
        sphere: Option<ProprietorKey>,
    },
    /// Read a sphere under the disclosure policy.
    Query {
        #[arg(long)]
        sphere: ProprietorKey,
        #[command(flatten)]
        access: Access,
    },
    /// Write a sphere's atoms, anonymized unless `--identified`.
    Export {
        #[arg(long)]
        sphere: ProprietorKey,
        #[arg(long)]
        identified: bool,
        #[command(flatten)]
        access: Access,
    },
    /// List the proprietor table, or scan one sphere's atoms.
    Spheres {
        #[arg(long)]
        sphere: Option<ProprietorKey>,
    },
    /// Run the full-scan integrity check.
    Check,
    /// Infon algebra on record input.
    Algebra {
        #[command(subcommand)]
        action: AlgebraVerb,
    },
}

#[derive(Subcommand)]
enum AlgebraVerb {
    /// Fold the input records left to right with a binary operation.
    Eval {
        /// combine, quotient, union, intersect, join, extend, negate-min or sub-infon.
        #[arg(long)]
        op: String,
    },
}

/// A domain error: its name goes to stderr and the exit code is 1.
#[derive(Debug)]
struct Failure {
    name: &'static str,
    message: String,
}

impl Failure {
    fn new(name: &'static str, message: impl Into<String>) -> Self {
        Failure { name, message: message.into() }
    }
}

macro_rules! failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new(e.name(), e.to_string())
            }
        }
    )*};
}

failure_from!(
    StoreError,
    piidb_core::InfonError,
    piidb_core::ClassifyError,
    piidb_core::AlgebraError,
    piidb_core::policy::PolicyError
);

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new("io-error", e.to_string())
    }
}

fn read_lines(input: Option<&Path>) -> Result<Vec<String>, Failure> {
    let text = match input {
        Some(p) => fs::read_to_string(p)?,
        None => io::read_to_string(io::stdin().lock())?,
    };
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

fn read_infons(input: Option<&Path>) -> Result<Vec<Infon>, Failure> {
    read_lines(input)?.iter().map(|l| Infon::from_record(l).map_err(Failure::from)).collect()
}

/// The serialized name of a unit enum variant.
fn label(value: &impl serde::Serialize) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

struct Out<'a> {
    format: Format,
    sink: io::StdoutLock<'a>,
}

impl Out<'_> {
    fn line(&mut self, text: impl AsRef<str>) -> Result<(), Failure> {
        writeln!(self.sink, "{}", text.as_ref())?;
        Ok(())
    }

    fn infon(&mut self, infon: &Infon) -> Result<(), Failure> {
        match self.format {
            Format::Records => self.line(infon.to_record()),
            Format::Text => self.line(infon.render_text()),
        }
    }

    fn json(&mut self, value: &impl serde::Serialize) -> Result<(), Failure> {
        self.line(serde_json::to_string(value).expect("records serialize"))
    }

    fn verdict(&mut self, c: &Classification) -> Result<(), Failure> {
        match self.format {
            Format::Records => self.line(c.to_record()),
            Format::Text => {
                let mut words = vec![label(&c.family)];
                words.extend(c.arity.map(|a| label(&a)));
                words.extend(c.self_kind.map(|k| label(&k)));
                words.push(format!("n={}", c.n));
                self.line(words.join(" "))
            }
        }
    }

    fn report(&mut self, r: &IngestReport) -> Result<(), Failure> {
        if self.format == Format::Records {
            return self.json(r);
        }
        for p in &r.placements {
            self.line(format!("placed {} in {} ({})", p.key, p.sphere, label(&p.kind)))?;
        }
        for k in &r.pool {
            self.line(format!("pooled {k}"))?;
        }
        for l in &r.links {
            self.line(format!("linked {l}"))?;
        }
        Ok(())
    }

    fn record(&mut self, r: &QueryRecord) -> Result<(), Failure> {
        match self.format {
            Format::Records => self.json(r),
            Format::Text => self.line(format!("{} {}: {}", label(&r.kind), r.key, r.infon.render_text())),
        }
    }
}

fn store_dir(cli: &Cli) -> Result<&Path, Failure> {
    cli.store.as_deref().ok_or_else(|| Failure::new("no-store", "pass --store or set PIIDB_STORE"))
}

fn open(cli: &Cli, write: bool) -> Result<Store, Failure> {
    let dir = store_dir(cli)?;
    let mut store = if write { Store::open(dir)? } else { Store::open_read_only(dir)? };
    if let Some(path) = &cli.alerts {
        store.set_alert_sink(Box::new(FileSink { path: path.clone() }), AlertConfig::default());
    }
    Ok(store)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let input = cli.input.as_deref();
    let mut out = Out { format: cli.format, sink: io::stdout().lock() };
    match &cli.verb {
        Verb::Init => {
            Store::create(store_dir(cli)?)?;
        }
        Verb::Register => {
            let mut store = open(cli, true)?;
            for line in read_lines(input)? {
                let id: Identifier =
                    serde_json::from_str(&line).map_err(|e| Failure::new("malformed-identifier", e.to_string()))?;
                out.line(store.register_proprietor(id)?.to_string())?;
            }
        }
        Verb::Ingest => {
            let mut store = open(cli, true)?;
            for sigma in read_infons(input)? {
                out.report(&store.ingest(&sigma)?)?;
            }
        }
        Verb::Classify => {
            for sigma in read_infons(input)? {
                out.verdict(&classify(&sigma))?;
            }
        }
        Verb::Reduce => {
            for sigma in read_infons(input)? {
                let r = reduce(&sigma)?;
                for atom in &r.atoms {
                    out.infon(atom)?;
                }
                match out.format {
                    Format::Records => out.json(&r.link)?,
                    Format::Text => out.line(format!("link {} joins {} atoms", r.link.link_id, r.link.atom_ids.len()))?,
                }
            }
        }
        Verb::Anonymize => {
            for sigma in read_infons(input)? {
                out.infon(&anonymize(&sigma)?.ninfon)?;
            }
        }
        Verb::AttachNii { sphere, key, justification, boundary } => {
            let mut store = open(cli, true)?;
            let mut limits = Boundary::default();
            if let Some(n) = boundary {
                limits.hop_limit = *n;
            }
            store.attach_related_nii(*sphere, &InfonKey(key.clone()), justification, &limits)?;
        }
        Verb::ClaimPni { sphere, key } => {
            open(cli, true)?.claim_pni(*sphere, &InfonKey(key.clone()))?;
        }
        Verb::Protect { rule_id, scope, key, sphere } => {
            let mut store = open(cli, true)?;
            match (key, sphere) {
                (Some(k), _) => store
                    .protect(&InfonKey(k.clone()), ProtectionMark { rule_id: rule_id.clone(), scope: (*scope).into() })?,
                (None, Some(p)) => store.add_rule(Rule {
                    rule_id: rule_id.clone(),
                    selector: Selector::Sphere(*p),
                    scope: (*scope).into(),
                    owner: None,
                })?,
                (None, None) => unreachable!("clap requires --key or --sphere"),
            }
        }
        Verb::Query { sphere, access } => {
            let mut store = open(cli, false)?;
            for r in store.query(*sphere, &|_| true, &access.context()?)? {
                out.record(&r)?;
            }
        }
        Verb::Export { sphere, identified, access } => {
            let mut store = open(cli, false)?;
            if *identified {
                for r in store.query(*sphere, &|_| true, &access.context()?)? {
                    if r.link.is_none() && r.infon.referent_count() == 1 {
                        out.infon(&r.infon)?;
                    }
                }
            } else {
                for nu in store.export_anonymized(*sphere, &access.context()?)? {
                    out.infon(&nu)?;
                }
            }
        }
        Verb::Spheres { sphere: Some(p) } => {
            let store = open(cli, false)?;
            let mut atoms: Vec<&InfonKey> = store.sphere(*p)?.atoms().collect();
            atoms.sort();
            for k in atoms {
                out.infon(store.infon(k).expect("sphere atoms are stored"))?;
            }
        }
        Verb::Spheres { sphere: None } => {
            let store = open(cli, false)?;
            for rec in store.proprietors() {
                match out.format {
                    Format::Records => out.json(rec)?,
                    Format::Text => {
                        let status = match store.sphere(rec.key) {
                            Ok(s) => format!(
                                "{} singletons, {} multitudes, {} related, {} links",
                                s.self_singletons.len(),
                                s.self_multitudes.len(),
                                s.related_nii.len(),
                                s.links.len()
                            ),
                            Err(_) => "retired".to_string(),
                        };
                        out.line(format!("{} {} => {}: {status}", rec.key, rec.identity.person_key, rec.sphere_ref))?
                    }
                }
            }
        }
        Verb::Check => {
            let store = open(cli, false)?;
            let problems = store.check_integrity();
            for p in &problems {
                out.line(p)?;
            }
            if !problems.is_empty() {
                return Err(Failure::new("integrity-violation", format!("{} problems", problems.len())));
            }
        }
        Verb::Algebra { action: AlgebraVerb::Eval { op } } => {
            let infons = read_infons(input)?;
            let Some((first, rest)) = infons.split_first() else {
                return Ok(());
            };
            if rest.is_empty() {
                return Err(Failure::new("arity", format!("{op} needs at least two records")));
            }
            let mut acc = first.clone();
            for next in rest {
                match algebra::eval_binary(op, &acc, next)? {
                    EvalOutput::Infon(i) => acc = i,
                    EvalOutput::Bool(b) => {
                        out.line(b.to_string())?;
                        return Ok(());
                    }
                }
            }
            out.infon(&acc)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}: {}", f.name, f.message);
            ExitCode::from(1)
        }
    }
}
