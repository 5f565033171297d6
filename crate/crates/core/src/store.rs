//! File-backed PII database: the proprietor table, one sphere file per
//! proprietor, the shared NII pool, compound links, policy, lineage and PNI
//! claims.
//!
//! Every file is append-only and line-delimited. A write batch is appended to
//! the data files first; the manifest, which records the committed byte length
//! of every file, is then replaced atomically. Bytes past a recorded length
//! belong to an interrupted batch and are ignored by readers and truncated by
//! the next writer.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{self, AlgebraError};
use crate::classification::{
    anonymize, classify, reduce, sapinfon_kind, to_self, Classification, ClassifyError, CompoundLink, Family,
    SapKind, SelfKind, SelfSchema,
};
use crate::infon::{Descriptor, Identifier, Infon, InfonError, InfonKey, ObjectId, PersonKey, Scalar};
use crate::policy::{
    alert_on_access, Access, AlertConfig, AlertSink, DerivationOp, Grant, MemorySink, PolicyContext, PolicyError,
    PolicyRecord, PolicySet, ProtectionMark, RecordIndex, Rule, Selector, Verdict,
};
use crate::sphere::{LinkId, PiiSphere, ProprietorKey};

pub const MANIFEST: &str = "manifest";
const MANIFEST_TMP: &str = "manifest.tmp";
const LOCK: &str = "lock";
pub const PROPRIETORS: &str = "proprietors.tbl";
pub const POOL: &str = "pool.nii";
pub const LINKS: &str = "links.tbl";
pub const POLICY: &str = "policy.tbl";
pub const LINEAGE: &str = "lineage.tbl";
pub const CLAIMS: &str = "claims.tbl";
const SPHERE_DIR: &str = "spheres";
const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error("no store at {0}")]
    NotAStore(PathBuf),
    #[error("a store already exists at {0}")]
    AlreadyExists(PathBuf),
    #[error("store is locked by another writer")]
    Locked,
    #[error("store was opened read-only")]
    ReadOnly,
    #[error("write interrupted before commit")]
    Interrupted,
    #[error("identity already registered as {0}")]
    DuplicateProprietor(ProprietorKey),
    #[error("person {0} is not a registered proprietor")]
    UnknownProprietor(PersonKey),
    #[error("no sphere {0}")]
    UnknownSphere(ProprietorKey),
    #[error("unknown infon {0}")]
    UnknownInfon(InfonKey),
    #[error("{0} is PII and cannot be attached as related NII")]
    PiiNotAttachable(InfonKey),
    #[error("{0} is PII; proprietorship is not claimable")]
    PiiNotClaimable(InfonKey),
    #[error("{key} is outside the relatedness boundary (distance {distance:?}, limit {limit})")]
    BoundaryExceeded { key: InfonKey, distance: Option<usize>, limit: usize },
    #[error("justification must be non-empty")]
    EmptyJustification,
    #[error("sphere {0} still holds records")]
    SphereNotEmpty(ProprietorKey),
    #[error("disclosure denied by rule `{rule_id}`")]
    PolicyDenied { rule_id: String },
    #[error("{op} needs {want} parent(s)")]
    BadDerivation { op: &'static str, want: &'static str },
    #[error(transparent)]
    Infon(#[from] InfonError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

impl StoreError {
    pub fn name(&self) -> &'static str {
        match self {
            StoreError::Io(_) => "io-error",
            StoreError::Corrupt(_) => "corrupt-store",
            StoreError::NotAStore(_) => "not-a-store",
            StoreError::AlreadyExists(_) => "store-exists",
            StoreError::Locked => "store-locked",
            StoreError::ReadOnly => "read-only",
            StoreError::Interrupted => "interrupted-write",
            StoreError::DuplicateProprietor(_) => "duplicate-proprietor",
            StoreError::UnknownProprietor(_) => "unknown-proprietor",
            StoreError::UnknownSphere(_) => "unknown-sphere",
            StoreError::UnknownInfon(_) => "unknown-infon",
            StoreError::PiiNotAttachable(_) => "pii-not-attachable",
            StoreError::PiiNotClaimable(_) => "pii-not-claimable",
            StoreError::BoundaryExceeded { .. } => "boundary-exceeded",
            StoreError::EmptyJustification => "empty-justification",
            StoreError::SphereNotEmpty(_) => "sphere-not-empty",
            StoreError::PolicyDenied { .. } => "policy-denied",
            StoreError::BadDerivation { .. } => "bad-derivation",
            StoreError::Infon(e) => e.name(),
            StoreError::Classify(e) => e.name(),
            StoreError::Algebra(e) => e.name(),
            StoreError::Policy(e) => e.name(),
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// Source of `created_at` and alert timestamps, in seconds.
pub trait Clock {
    fn now(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    }
}

pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now(&self) -> u64 {
        self.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format: u32,
    /// Number of committed batches.
    pub version: u64,
    pub proprietor_count: u64,
    pub infon_count: u64,
    pub link_count: u64,
    /// Highest proprietor number ever issued.
    pub last_proprietor: u64,
    /// Committed byte length of every data file.
    pub files: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProprietorRecord {
    pub key: ProprietorKey,
    pub identity: Identifier,
    pub sphere_ref: String,
    pub created_at: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub retired: bool,
    /// Further columns, kept as given.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// One line of a sphere file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereEntry {
    Atom(Infon),
    Related { key: InfonKey, justification: String },
    Link(LinkId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub child: InfonKey,
    pub op: DerivationOp,
    pub parents: Vec<InfonKey>,
    pub proprietors: Vec<ProprietorKey>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub key: InfonKey,
    pub owner: ProprietorKey,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub sphere: ProprietorKey,
    pub key: InfonKey,
    pub kind: SelfKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub verdict: Classification,
    pub placements: Vec<Placement>,
    pub pool: Vec<InfonKey>,
    pub links: Vec<LinkId>,
}

/// How far related NII may sit from a proprietor in the object graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Boundary {
    pub hop_limit: usize,
    /// Limit for ninfons carrying an allowlisted `sensitivity` tag.
    pub tag_limit: usize,
    pub sensitive_tags: BTreeSet<String>,
}

pub const SENSITIVITY_PROPERTY: &str = "sensitivity";

impl Default for Boundary {
    fn default() -> Self {
        Boundary { hop_limit: 1, tag_limit: 2, sensitive_tags: BTreeSet::from(["sensitive".to_string()]) }
    }
}

impl Boundary {
    fn limit_for(&self, nu: &Infon) -> usize {
        let tagged = nu.properties().iter().any(|p| {
            p.param == SENSITIVITY_PROPERTY && matches!(&p.value, Scalar::Text(t) if self.sensitive_tags.contains(t))
        });
        if tagged {
            self.hop_limit.max(self.tag_limit)
        } else {
            self.hop_limit
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    SelfSingleton,
    SelfMultitude,
    RelatedNii,
    Reconstruction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub kind: RecordKind,
    pub key: InfonKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkId>,
    pub infon: Infon,
}

/// Where the next commit fails, for crash testing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailPoint {
    /// Half of the batch reaches the data files.
    TornData,
    /// All data written, manifest not yet replaced.
    BeforeManifest,
}

#[derive(Clone, Debug, Default)]
struct State {
    manifest: StoreManifest,
    proprietors: BTreeMap<ProprietorKey, ProprietorRecord>,
    by_person: BTreeMap<PersonKey, ProprietorKey>,
    by_descriptors: BTreeMap<BTreeSet<Descriptor>, ProprietorKey>,
    infons: BTreeMap<InfonKey, Infon>,
    pool: BTreeSet<InfonKey>,
    spheres: BTreeMap<ProprietorKey, PiiSphere>,
    home: BTreeMap<InfonKey, ProprietorKey>,
    related_in: BTreeMap<InfonKey, BTreeSet<ProprietorKey>>,
    links: BTreeMap<LinkId, CompoundLink>,
    policy: PolicySet,
    lineage: BTreeMap<InfonKey, Vec<(DerivationOp, InfonKey)>>,
    claims: BTreeMap<InfonKey, ProprietorKey>,
}

fn corrupt(file: &str, line: usize, what: impl std::fmt::Display) -> StoreError {
    StoreError::Corrupt(format!("{file}:{line}: {what}"))
}

fn sphere_file(key: ProprietorKey) -> String {
    format!("{SPHERE_DIR}/{key}.sph")
}

impl State {
    fn apply(&mut self, file: &str, line: &str) -> std::result::Result<(), String> {
        let parse_err = |e: serde_json::Error| e.to_string();
        match file {
            PROPRIETORS => {
                let rec: ProprietorRecord = serde_json::from_str(line).map_err(parse_err)?;
                let key = rec.key;
                self.by_person.retain(|_, k| *k != key);
                self.by_descriptors.retain(|_, k| *k != key);
                if rec.retired {
                    self.spheres.remove(&key);
                } else {
                    self.by_person.insert(rec.identity.person_key.clone(), key);
                    self.by_descriptors.insert(rec.identity.descriptors.clone(), key);
                    self.spheres
                        .entry(key)
                        .or_insert_with(|| PiiSphere::new(key, rec.identity.person_key.clone()));
                }
                self.proprietors.insert(key, rec);
            }
            POOL => {
                let infon = Infon::from_record(line).map_err(|e| e.to_string())?;
                if infon.referent_count() != 0 {
                    return Err("PII in the NII pool".into());
                }
                let key = infon.key();
                self.pool.insert(key.clone());
                self.infons.insert(key, infon);
            }
            LINKS => {
                let link: CompoundLink = serde_json::from_str(line).map_err(parse_err)?;
                self.links.insert(link.link_id.clone(), link);
            }
            POLICY => {
                let rec: PolicyRecord = serde_json::from_str(line).map_err(parse_err)?;
                self.policy.apply(rec).map_err(|e| e.to_string())?;
            }
            LINEAGE => {
                let rec: LineageRecord = serde_json::from_str(line).map_err(parse_err)?;
                let edges = self.lineage.entry(rec.child).or_default();
                for p in rec.parents {
                    if !edges.contains(&(rec.op, p.clone())) {
                        edges.push((rec.op, p));
                    }
                }
            }
            CLAIMS => {
                let claim: Claim = serde_json::from_str(line).map_err(parse_err)?;
                self.claims.insert(claim.key, claim.owner);
            }
            other => {
                let key: ProprietorKey = other
                    .strip_prefix("spheres/")
                    .and_then(|s| s.strip_suffix(".sph"))
                    .ok_or("unexpected file")?
                    .parse()?;
                let entry: SphereEntry = serde_json::from_str(line).map_err(parse_err)?;
                self.apply_sphere(key, entry)?;
            }
        }
        Ok(())
    }

    fn apply_sphere(&mut self, key: ProprietorKey, entry: SphereEntry) -> std::result::Result<(), String> {
        let sphere = self.spheres.get_mut(&key).ok_or("record for an unregistered sphere")?;
        match entry {
            SphereEntry::Atom(atom) => {
                if atom.prop() != BTreeSet::from([sphere.person.clone()]) {
                    return Err(format!("atom does not belong to {key}"));
                }
                let k = atom.key();
                match sapinfon_kind(&atom).map_err(|e| e.to_string())? {
                    SapKind::Singleton => sphere.self_singletons.insert(k.clone()),
                    SapKind::Multitude => sphere.self_multitudes.insert(k.clone()),
                };
                self.home.insert(k.clone(), key);
                self.infons.insert(k, atom);
            }
            SphereEntry::Related { key: k, justification } => {
                if justification.is_empty() {
                    return Err("empty justification".into());
                }
                sphere.related_nii.insert(k.clone(), justification);
                self.related_in.entry(k).or_default().insert(key);
            }
            SphereEntry::Link(id) => {
                sphere.links.insert(id);
            }
        }
        Ok(())
    }

    fn counts(&self) -> (u64, u64, u64) {
        (self.spheres.len() as u64, self.infons.len() as u64, self.links.len() as u64)
    }

    fn live_proprietor(&self, person: &PersonKey) -> Result<ProprietorKey> {
        self.by_person.get(person).copied().ok_or_else(|| StoreError::UnknownProprietor(person.clone()))
    }

    fn sphere(&self, key: ProprietorKey) -> Result<&PiiSphere> {
        self.spheres.get(&key).ok_or(StoreError::UnknownSphere(key))
    }
}

impl RecordIndex for State {
    fn contains(&self, key: &InfonKey) -> bool {
        self.infons.contains_key(key)
    }

    fn family(&self, key: &InfonKey) -> Family {
        self.infons.get(key).map(|i| classify(i).family).unwrap_or(Family::Nii)
    }

    fn spheres(&self, key: &InfonKey) -> BTreeSet<ProprietorKey> {
        let mut out: BTreeSet<ProprietorKey> = self.related_in.get(key).cloned().unwrap_or_default();
        out.extend(self.home.get(key));
        out
    }

    fn parents(&self, key: &InfonKey) -> Vec<(DerivationOp, InfonKey)> {
        self.lineage.get(key).cloned().unwrap_or_default()
    }
}

/// A stored index plus one derived record that is never written.
struct Overlay<'a> {
    base: &'a State,
    key: InfonKey,
    family: Family,
    spheres: BTreeSet<ProprietorKey>,
    parents: Vec<(DerivationOp, InfonKey)>,
}

impl RecordIndex for Overlay<'_> {
    fn contains(&self, key: &InfonKey) -> bool {
        *key == self.key || self.base.contains(key)
    }

    fn family(&self, key: &InfonKey) -> Family {
        if *key == self.key {
            self.family
        } else {
            self.base.family(key)
        }
    }

    fn spheres(&self, key: &InfonKey) -> BTreeSet<ProprietorKey> {
        if *key == self.key {
            self.spheres.clone()
        } else {
            self.base.spheres(key)
        }
    }

    fn parents(&self, key: &InfonKey) -> Vec<(DerivationOp, InfonKey)> {
        if *key == self.key {
            self.parents.clone()
        } else {
            self.base.parents(key)
        }
    }
}

/// Lines to append, per file, keyed for byte-stable ordering.
#[derive(Default)]
struct Batch {
    lines: BTreeMap<String, BTreeMap<String, String>>,
}

impl Batch {
    fn push(&mut self, file: &str, sort_key: String, record: &impl Serialize) {
        let line = serde_json::to_string(record).expect("store records serialize");
        self.lines.entry(file.to_string()).or_default().insert(sort_key, line);
    }

    fn touch(&mut self, file: &str) {
        self.lines.entry(file.to_string()).or_default();
    }

    fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

pub struct Store {
    dir: PathBuf,
    state: State,
    lock: Option<File>,
    clock: Box<dyn Clock>,
    schema: SelfSchema,
    sink: Box<dyn AlertSink>,
    alert_config: AlertConfig,
    fail_point: Option<FailPoint>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).field("manifest", &self.state.manifest).finish_non_exhaustive()
    }
}

fn data_files() -> [&'static str; 6] {
    [PROPRIETORS, POOL, LINKS, POLICY, LINEAGE, CLAIMS]
}

impl Store {
    /// Creates an empty store in `dir`, which may exist but must not hold a
    /// store already.
    pub fn create(dir: impl AsRef<Path>) -> Result<Store> {
        let dir = dir.as_ref().to_path_buf();
        if dir.join(MANIFEST).exists() {
            return Err(StoreError::AlreadyExists(dir));
        }
        fs::create_dir_all(dir.join(SPHERE_DIR))?;
        let lock = Self::acquire(&dir)?;
        let mut manifest = StoreManifest { format: STORE_VERSION, ..Default::default() };
        for f in data_files() {
            File::create(dir.join(f))?;
            manifest.files.insert(f.to_string(), 0);
        }
        write_manifest(&dir, &manifest)?;
        Self::open_with(dir, Some(lock))
    }

    /// Opens a store for writing. Holds an advisory lock until dropped.
    pub fn open(dir: impl AsRef<Path>) -> Result<Store> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.join(MANIFEST).exists() {
            return Err(StoreError::NotAStore(dir));
        }
        let lock = Self::acquire(&dir)?;
        let store = Self::open_with(dir, Some(lock))?;
        store.truncate_to_manifest()?;
        let _ = fs::remove_file(store.dir.join(MANIFEST_TMP));
        Ok(store)
    }

    /// Opens the last committed state without taking the writer lock.
    pub fn open_read_only(dir: impl AsRef<Path>) -> Result<Store> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.join(MANIFEST).exists() {
            return Err(StoreError::NotAStore(dir));
        }
        Self::open_with(dir, None)
    }

    fn acquire(dir: &Path) -> Result<File> {
        let f = OpenOptions::new().create(true).truncate(false).write(true).open(dir.join(LOCK))?;
        match f.try_lock() {
            Ok(()) => Ok(f),
            Err(fs::TryLockError::WouldBlock) => Err(StoreError::Locked),
            Err(fs::TryLockError::Error(e)) => Err(e.into()),
        }
    }

    fn open_with(dir: PathBuf, lock: Option<File>) -> Result<Store> {
        let state = load(&dir)?;
        Ok(Store {
            dir,
            state,
            lock,
            clock: Box::new(SystemClock),
            schema: SelfSchema::default(),
            sink: Box::new(MemorySink::default()),
            alert_config: AlertConfig::default(),
            fail_point: None,
        })
    }

    pub fn set_clock(&mut self, clock: Box<dyn Clock>) {
        self.clock = clock;
    }

    pub fn set_schema(&mut self, schema: SelfSchema) {
        self.schema = schema;
    }

    pub fn set_alert_sink(&mut self, sink: Box<dyn AlertSink>, config: AlertConfig) {
        self.sink = sink;
        self.alert_config = config;
    }

    /// Makes the next commit fail at the given point.
    pub fn fail_next_commit(&mut self, point: FailPoint) {
        self.fail_point = Some(point);
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.state.manifest
    }

    pub fn proprietors(&self) -> impl Iterator<Item = &ProprietorRecord> {
        self.state.proprietors.values()
    }

    pub fn proprietor_of(&self, person: &PersonKey) -> Option<ProprietorKey> {
        self.state.by_person.get(person).copied()
    }

    pub fn sphere(&self, key: ProprietorKey) -> Result<&PiiSphere> {
        self.state.sphere(key)
    }

    pub fn spheres(&self) -> impl Iterator<Item = &PiiSphere> {
        self.state.spheres.values()
    }

    pub fn infon(&self, key: &InfonKey) -> Option<&Infon> {
        self.state.infons.get(key)
    }

    pub fn pool(&self) -> impl Iterator<Item = &Infon> {
        self.state.pool.iter().map(|k| &self.state.infons[k])
    }

    pub fn links(&self) -> impl Iterator<Item = &CompoundLink> {
        self.state.links.values()
    }

    pub fn policy(&self) -> &PolicySet {
        &self.state.policy
    }

    pub fn parents(&self, key: &InfonKey) -> Vec<(DerivationOp, InfonKey)> {
        self.state.parents(key)
    }

    /// Classification of a stored record, with the PNI flag from claims.
    pub fn classify_stored(&self, key: &InfonKey) -> Result<Classification> {
        let infon = self.infon(key).ok_or_else(|| StoreError::UnknownInfon(key.clone()))?;
        let mut c = classify(infon);
        c.pni = self.state.claims.contains_key(key);
        Ok(c)
    }

    fn truncate_to_manifest(&self) -> Result<()> {
        for (file, len) in &self.state.manifest.files {
            let f = OpenOptions::new().write(true).open(self.dir.join(file))?;
            if f.metadata()?.len() > *len {
                f.set_len(*len)?;
                f.sync_all()?;
            }
        }
        Ok(())
    }

    fn commit(&mut self, batch: Batch) -> Result<()> {
        if self.lock.is_none() {
            return Err(StoreError::ReadOnly);
        }
        if batch.is_empty() {
            return Ok(());
        }
        self.truncate_to_manifest()?;
        let mut next = self.state.clone();
        let mut payload: Vec<(String, Vec<u8>)> = Vec::new();
        for (file, lines) in &batch.lines {
            let mut bytes = Vec::new();
            for line in lines.values() {
                next.apply(file, line).map_err(|e| StoreError::Corrupt(format!("{file}: {e}")))?;
                bytes.extend_from_slice(line.as_bytes());
                bytes.push(b'\n');
            }
            let len = next.manifest.files.entry(file.clone()).or_insert(0);
            *len += bytes.len() as u64;
            payload.push((file.clone(), bytes));
        }
        let (p, i, l) = next.counts();
        next.manifest.version += 1;
        next.manifest.proprietor_count = p;
        next.manifest.infon_count = i;
        next.manifest.link_count = l;

        let fail = self.fail_point.take();
        let total: usize = payload.iter().map(|(_, b)| b.len()).sum();
        let mut budget = if fail == Some(FailPoint::TornData) { total / 2 } else { total };
        for (file, bytes) in &payload {
            let mut f = OpenOptions::new().create(true).append(true).open(self.dir.join(file))?;
            let n = bytes.len().min(budget);
            f.write_all(&bytes[..n])?;
            f.sync_data()?;
            budget -= n;
        }
        if fail.is_some() {
            return Err(StoreError::Interrupted);
        }
        write_manifest(&self.dir, &next.manifest)?;
        self.state = next;
        Ok(())
    }

    pub fn register_proprietor(&mut self, identity: Identifier) -> Result<ProprietorKey> {
        self.register_with(identity, BTreeMap::new())
    }

    /// Registers a proprietor with extra table columns.
    pub fn register_with(
        &mut self,
        identity: Identifier,
        extra: BTreeMap<String, serde_json::Value>,
    ) -> Result<ProprietorKey> {
        let s = &self.state;
        if let Some(k) = s.by_person.get(&identity.person_key).or_else(|| s.by_descriptors.get(&identity.descriptors)) {
            return Err(StoreError::DuplicateProprietor(*k));
        }
        let key = ProprietorKey(self.state.manifest.last_proprietor + 1);
        let record = ProprietorRecord {
            key,
            identity,
            sphere_ref: sphere_file(key),
            created_at: self.clock.now(),
            retired: false,
            extra,
        };
        let mut batch = Batch::default();
        batch.push(PROPRIETORS, key.to_string(), &record);
        batch.touch(&sphere_file(key));
        self.state.manifest.last_proprietor += 1;
        let out = self.commit(batch);
        if out.is_err() {
            self.state.manifest.last_proprietor -= 1;
        }
        out.map(|_| key)
    }

    /// Retires a proprietor whose sphere is empty. The key is never reissued.
    pub fn retire_proprietor(&mut self, key: ProprietorKey) -> Result<()> {
        if !self.state.sphere(key)?.is_empty() {
            return Err(StoreError::SphereNotEmpty(key));
        }
        let mut record = self.state.proprietors[&key].clone();
        record.retired = true;
        let mut batch = Batch::default();
        batch.push(PROPRIETORS, key.to_string(), &record);
        self.commit(batch)
    }

    fn plan_atom(&self, atom: &Infon, batch: &mut Batch, report: &mut IngestReport) -> Result<Vec<InfonKey>> {
        let factoring = to_self(atom, &self.schema)?;
        let mut keys = Vec::new();
        for part in factoring.self_parts {
            let person = part.prop().into_iter().next().expect("self part has its proprietor");
            let sphere = self.state.live_proprietor(&person)?;
            let key = part.key();
            let kind = match sapinfon_kind(&part)? {
                SapKind::Singleton => SelfKind::SelfSingleton,
                SapKind::Multitude => SelfKind::SelfMultitude,
            };
            if !self.state.home.contains_key(&key) {
                batch.push(&sphere_file(sphere), format!("0{key}"), &SphereEntry::Atom(part));
            }
            report.placements.push(Placement { sphere, key: key.clone(), kind });
            keys.push(key);
        }
        for nu in factoring.nii_parts {
            self.plan_pool(nu, batch, report);
        }
        Ok(keys)
    }

    fn plan_pool(&self, nu: Infon, batch: &mut Batch, report: &mut IngestReport) {
        let key = nu.key();
        if !self.state.pool.contains(&key) {
            batch.push(POOL, key.to_string(), &nu);
        }
        if !report.pool.contains(&key) {
            report.pool.push(key);
        }
    }

    fn plan_ingest(&self, sigma: &Infon) -> Result<(Batch, IngestReport)> {
        sigma.validate()?;
        let verdict = classify(sigma);
        for person in sigma.prop() {
            self.state.live_proprietor(&person)?;
        }
        let mut batch = Batch::default();
        let mut report = IngestReport { verdict, placements: Vec::new(), pool: Vec::new(), links: Vec::new() };
        match verdict.n {
            0 => self.plan_pool(sigma.clone(), &mut batch, &mut report),
            1 => {
                self.plan_atom(sigma, &mut batch, &mut report)?;
            }
            _ => {
                let reduction = reduce(sigma)?;
                let mut atom_ids = BTreeSet::new();
                for atom in &reduction.atoms {
                    atom_ids.extend(self.plan_atom(atom, &mut batch, &mut report)?);
                }
                let link = CompoundLink::new(sigma.key(), atom_ids);
                let touched: BTreeSet<ProprietorKey> = report.placements.iter().map(|p| p.sphere).collect();
                for sphere in touched {
                    let known = self.state.spheres[&sphere].links.contains(&link.link_id);
                    if !known {
                        batch.push(&sphere_file(sphere), format!("2{}", link.link_id), &SphereEntry::Link(link.link_id.clone()));
                    }
                }
                if !self.state.links.contains_key(&link.link_id) {
                    batch.push(LINKS, link.link_id.to_string(), &link);
                }
                report.links.push(link.link_id);
            }
        }
        report.placements.sort_by(|a, b| (a.sphere, &a.key).cmp(&(b.sphere, &b.key)));
        report.placements.dedup();
        report.pool.sort();
        Ok((batch, report))
    }

    /// Stores an infon: NII in the pool, atomic PII factored into its
    /// proprietor's sphere, compound PII reduced to atoms joined by a link.
    pub fn ingest(&mut self, sigma: &Infon) -> Result<IngestReport> {
        let (batch, report) = self.plan_ingest(sigma)?;
        self.commit(batch)?;
        Ok(report)
    }

    /// Derives a new infon from stored parents, stores it like [`Store::ingest`]
    /// and records the derivation for taint tracking.
    pub fn derive(&mut self, op: DerivationOp, parents: &[InfonKey]) -> Result<(Infon, IngestReport)> {
        let inputs: Vec<&Infon> = parents
            .iter()
            .map(|k| self.infon(k).ok_or_else(|| StoreError::UnknownInfon(k.clone())))
            .collect::<Result<_>>()?;
        let derived = match op {
            DerivationOp::Combine if !inputs.is_empty() => {
                inputs.iter().skip(1).fold(inputs[0].clone(), |acc, i| algebra::combine(&acc, i))
            }
            DerivationOp::Extend if !inputs.is_empty() => {
                let rest: Vec<Infon> = inputs[1..].iter().map(|i| (*i).clone()).collect();
                algebra::extend(inputs[0], &rest)
            }
            DerivationOp::Join if !inputs.is_empty() => {
                algebra::join(&inputs.iter().map(|i| (*i).clone()).collect::<Vec<_>>())?
            }
            DerivationOp::Anonymize if inputs.len() == 1 => anonymize(inputs[0])?.ninfon,
            DerivationOp::Anonymize => return Err(StoreError::BadDerivation { op: "anonymize", want: "exactly one" }),
            _ => return Err(StoreError::BadDerivation { op: "derivation", want: "at least one" }),
        };
        let (mut batch, report) = self.plan_ingest(&derived)?;
        let children: BTreeSet<&InfonKey> = report.placements.iter().map(|p| &p.key).chain(&report.pool).collect();
        let parent_list: Vec<InfonKey> = parents.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        for child in children {
            let ps: Vec<InfonKey> = parent_list.iter().filter(|p| *p != child).cloned().collect();
            if ps.is_empty() {
                continue;
            }
            let mut proprietors: BTreeSet<ProprietorKey> = ps.iter().flat_map(|p| self.state.spheres(p)).collect();
            proprietors.extend(report.placements.iter().filter(|p| &p.key == child).map(|p| p.sphere));
            let rec = LineageRecord { child: child.clone(), op, parents: ps, proprietors: proprietors.into_iter().collect() };
            batch.push(LINEAGE, format!("{child}{op:?}"), &rec);
        }
        self.commit(batch)?;
        Ok((derived, report))
    }

    /// Object-graph distance from the proprietor: objects sharing a sphere
    /// atom with the proprietor are at depth 1; pool ninfons connect the
    /// objects they mention.
    fn object_depths(&self, sphere: &PiiSphere) -> BTreeMap<ObjectId, usize> {
        let me = ObjectId(sphere.person.0.clone());
        let mut depth: BTreeMap<ObjectId, usize> = BTreeMap::from([(me.clone(), 0)]);
        let mut queue = VecDeque::new();
        for key in sphere.atoms() {
            for o in self.state.infons[key].objects() {
                if !depth.contains_key(&o.id) {
                    depth.insert(o.id.clone(), 1);
                    queue.push_back(o.id);
                }
            }
        }
        let mut adjacent: BTreeMap<ObjectId, BTreeSet<ObjectId>> = BTreeMap::new();
        for key in &self.state.pool {
            let ids: Vec<ObjectId> = self.state.infons[key].objects().into_iter().map(|o| o.id).collect();
            for a in &ids {
                adjacent.entry(a.clone()).or_default().extend(ids.iter().filter(|b| *b != a).cloned());
            }
        }
        while let Some(id) = queue.pop_front() {
            let d = depth[&id];
            for next in adjacent.get(&id).into_iter().flatten() {
                if !depth.contains_key(next) {
                    depth.insert(next.clone(), d + 1);
                    queue.push_back(next.clone());
                }
            }
        }
        depth
    }

    /// Distance of a ninfon from a sphere: the farthest of its objects.
    pub fn relatedness(&self, sphere: ProprietorKey, key: &InfonKey) -> Result<Option<usize>> {
        let s = self.state.sphere(sphere)?;
        let nu = self.infon(key).ok_or_else(|| StoreError::UnknownInfon(key.clone()))?;
        let depths = self.object_depths(s);
        let objects = nu.objects();
        if objects.is_empty() {
            return Ok(None);
        }
        Ok(objects.iter().map(|o| depths.get(&o.id).copied()).collect::<Option<Vec<_>>>().and_then(|d| d.into_iter().max()))
    }

    pub fn attach_related_nii(
        &mut self,
        sphere: ProprietorKey,
        key: &InfonKey,
        justification: &str,
        boundary: &Boundary,
    ) -> Result<()> {
        self.state.sphere(sphere)?;
        if justification.trim().is_empty() {
            return Err(StoreError::EmptyJustification);
        }
        let nu = self.infon(key).ok_or_else(|| StoreError::UnknownInfon(key.clone()))?;
        if nu.referent_count() > 0 {
            return Err(StoreError::PiiNotAttachable(key.clone()));
        }
        let limit = boundary.limit_for(nu);
        let distance = self.relatedness(sphere, key)?;
        if !distance.is_some_and(|d| d <= limit) {
            return Err(StoreError::BoundaryExceeded { key: key.clone(), distance, limit });
        }
        if self.state.spheres[&sphere].related_nii.get(key).map(String::as_str) == Some(justification) {
            return Ok(());
        }
        let mut batch = Batch::default();
        let entry = SphereEntry::Related { key: key.clone(), justification: justification.to_string() };
        batch.push(&sphere_file(sphere), format!("1{key}"), &entry);
        self.commit(batch)
    }

    /// Marks an owner's claim on a ninfon; disclosure then needs the owner's grant.
    pub fn claim_pni(&mut self, owner: ProprietorKey, key: &InfonKey) -> Result<()> {
        self.state.sphere(owner)?;
        let nu = self.infon(key).ok_or_else(|| StoreError::UnknownInfon(key.clone()))?;
        if nu.referent_count() > 0 {
            return Err(StoreError::PiiNotClaimable(key.clone()));
        }
        if self.state.claims.get(key) == Some(&owner) {
            return Ok(());
        }
        let rule = Rule {
            rule_id: format!("pni:{key}"),
            selector: Selector::Infon(key.clone()),
            scope: crate::policy::Scope::DiscloseRequireGrant,
            owner: Some(owner),
        };
        if self.state.policy.rules.contains_key(&rule.rule_id) {
            return Err(PolicyError::DuplicateRule(rule.rule_id).into());
        }
        let mut batch = Batch::default();
        batch.push(CLAIMS, key.to_string(), &Claim { key: key.clone(), owner });
        batch.push(POLICY, rule.rule_id.clone(), &PolicyRecord::Rule(rule));
        self.commit(batch)
    }

    pub fn protect(&mut self, key: &InfonKey, mark: ProtectionMark) -> Result<()> {
        if self.infon(key).is_none() {
            return Err(StoreError::UnknownInfon(key.clone()));
        }
        self.add_rule(Rule { rule_id: mark.rule_id, selector: Selector::Infon(key.clone()), scope: mark.scope, owner: None })
    }

    pub fn add_rule(&mut self, rule: Rule) -> Result<()> {
        match &rule.selector {
            Selector::Infon(k) if self.infon(k).is_none() => return Err(StoreError::UnknownInfon(k.clone())),
            Selector::Sphere(p) => {
                self.state.sphere(*p)?;
            }
            _ => {}
        }
        if self.state.policy.rules.contains_key(&rule.rule_id) {
            return Err(PolicyError::DuplicateRule(rule.rule_id).into());
        }
        let mut batch = Batch::default();
        batch.push(POLICY, rule.rule_id.clone(), &PolicyRecord::Rule(rule));
        self.commit(batch)
    }

    pub fn grant(&mut self, grant: Grant) -> Result<()> {
        self.state.sphere(grant.sphere)?;
        if self.state.policy.grants.contains(&grant) {
            return Ok(());
        }
        let mut batch = Batch::default();
        batch.push(POLICY, format!("~{}{}", grant.principal, grant.sphere), &PolicyRecord::Grant(grant));
        self.commit(batch)
    }

    fn verdict_and_alert(
        &mut self,
        index: &dyn RecordIndex,
        key: &InfonKey,
        family: Family,
        proprietors: &BTreeSet<ProprietorKey>,
        ctx: &PolicyContext,
    ) -> Result<Verdict> {
        let verdict = self.state.policy.check_disclosure(index, key, ctx)?;
        let access = Access { subject: key, family, proprietors, ctx, outcome: &verdict };
        alert_on_access(self.sink.as_mut(), self.alert_config, &access, self.clock.now());
        Ok(verdict)
    }

    /// The disclosure verdict for a stored record, reported to the alert sink.
    pub fn check_disclosure(&mut self, key: &InfonKey, ctx: &PolicyContext) -> Result<Verdict> {
        let state = self.state.clone();
        let family = state.family(key);
        let proprietors = state.spheres(key);
        self.verdict_and_alert(&state, key, family, &proprietors, ctx)
    }

    /// Self atoms, related NII and, when `ctx` grants every linked sphere,
    /// reconstructed compounds of a sphere. Records hidden by an
    /// existence-hide rule are left out; any other denial fails the query.
    pub fn query(
        &mut self,
        sphere: ProprietorKey,
        selector: &dyn Fn(&Infon) -> bool,
        ctx: &PolicyContext,
    ) -> Result<Vec<QueryRecord>> {
        let state = self.state.clone();
        let s = state.sphere(sphere)?;
        let mut candidates: Vec<(RecordKind, &InfonKey)> = Vec::new();
        candidates.extend(s.self_singletons.iter().map(|k| (RecordKind::SelfSingleton, k)));
        candidates.extend(s.self_multitudes.iter().map(|k| (RecordKind::SelfMultitude, k)));
        candidates.extend(s.related_nii.keys().map(|k| (RecordKind::RelatedNii, k)));
        let mut out = Vec::new();
        for (kind, key) in candidates {
            let infon = &state.infons[key];
            if !selector(infon) {
                continue;
            }
            let family = if kind == RecordKind::RelatedNii { Family::Nii } else { Family::Pii };
            let verdict = self.verdict_and_alert(&state, key, family, &state.spheres(key), ctx)?;
            if verdict.is_allow() {
                out.push(QueryRecord { kind, key: key.clone(), link: None, infon: infon.clone() });
            } else if !verdict.hides() {
                return Err(StoreError::PolicyDenied { rule_id: verdict.rule_id().unwrap_or_default().to_string() });
            }
        }
        for id in &s.links {
            let link = state.links.get(id).ok_or_else(|| StoreError::Corrupt(format!("dangling link {id}")))?;
            let linked: BTreeSet<ProprietorKey> = link.atom_ids.iter().filter_map(|k| state.home.get(k)).copied().collect();
            if !linked.is_subset(&ctx.granted_spheres) {
                continue;
            }
            let atoms: Vec<Infon> = link.atom_ids.iter().map(|k| state.infons[k].clone()).collect();
            let joined = algebra::join(&atoms)?;
            if !selector(&joined) {
                continue;
            }
            let overlay = Overlay {
                base: &state,
                key: joined.key(),
                family: Family::Pii,
                spheres: linked.clone(),
                parents: link.atom_ids.iter().map(|k| (DerivationOp::Join, k.clone())).collect(),
            };
            let verdict = self.verdict_and_alert(&overlay, &overlay.key, Family::Pii, &linked, ctx)?;
            if verdict.is_allow() {
                out.push(QueryRecord { kind: RecordKind::Reconstruction, key: joined.key(), link: Some(id.clone()), infon: joined });
            } else if !verdict.hides() {
                return Err(StoreError::PolicyDenied { rule_id: verdict.rule_id().unwrap_or_default().to_string() });
            }
        }
        Ok(out)
    }

    /// Every atom of a sphere with its identifiers removed, ordered by the
    /// key of the emitted ninfon.
    pub fn export_anonymized(&mut self, sphere: ProprietorKey, ctx: &PolicyContext) -> Result<Vec<Infon>> {
        let state = self.state.clone();
        let s = state.sphere(sphere)?;
        let mut out = Vec::new();
        for key in s.atoms() {
            let ninfon = anonymize(&state.infons[key])?.ninfon;
            let overlay = Overlay {
                base: &state,
                key: ninfon.key(),
                family: Family::Nii,
                spheres: BTreeSet::new(),
                parents: vec![(DerivationOp::Anonymize, key.clone())],
            };
            let verdict = self.verdict_and_alert(&overlay, &overlay.key, Family::Nii, &BTreeSet::from([sphere]), ctx)?;
            if verdict.is_allow() {
                out.push(ninfon);
            } else if !verdict.hides() {
                return Err(StoreError::PolicyDenied { rule_id: verdict.rule_id().unwrap_or_default().to_string() });
            }
        }
        out.sort_by_key(Infon::key);
        out.dedup();
        Ok(out)
    }

    /// Full scan of the committed files: reloads the store from disk and
    /// reports every violated invariant.
    pub fn check_integrity(&self) -> Vec<String> {
        let disk = match load(&self.dir) {
            Ok(s) => s,
            Err(e) => return vec![format!("reload failed: {e}")],
        };
        let mut problems = Vec::new();
        let m = &disk.manifest;
        let (p, i, l) = disk.counts();
        if (m.proprietor_count, m.infon_count, m.link_count) != (p, i, l) {
            problems.push(format!(
                "manifest counts {:?} differ from scan {:?}",
                (m.proprietor_count, m.infon_count, m.link_count),
                (p, i, l)
            ));
        }
        if m != &self.state.manifest {
            problems.push("in-memory manifest differs from the committed one".into());
        }
        for (key, infon) in &disk.infons {
            if infon.referent_count() > 1 {
                problems.push(format!("compound at rest: {key}"));
            }
        }
        for k in &disk.pool {
            if disk.infons[k].referent_count() != 0 {
                problems.push(format!("PII in pool: {k}"));
            }
        }
        for s in disk.spheres.values() {
            for k in s.atoms() {
                if disk.infons[k].prop() != BTreeSet::from([s.person.clone()]) {
                    problems.push(format!("impure atom {k} in {}", s.proprietor));
                }
            }
            for (k, why) in &s.related_nii {
                if !disk.pool.contains(k) || why.is_empty() {
                    problems.push(format!("bad related NII {k} in {}", s.proprietor));
                }
            }
            for id in &s.links {
                if !disk.links.contains_key(id) {
                    problems.push(format!("sphere {} lists missing link {id}", s.proprietor));
                }
            }
        }
        for (id, link) in &disk.links {
            let mut props = BTreeSet::new();
            let mut atoms = Vec::new();
            for a in &link.atom_ids {
                match (disk.home.get(a), disk.infons.get(a)) {
                    (Some(home), Some(infon)) => {
                        props.insert(*home);
                        atoms.push(infon.clone());
                        if !disk.spheres[home].links.contains(id) {
                            problems.push(format!("link {id} missing from sphere {home}"));
                        }
                    }
                    _ => problems.push(format!("link {id} names missing atom {a}")),
                }
            }
            if props.len() < 2 {
                problems.push(format!("link {id} spans fewer than two spheres"));
            }
            let want: BTreeSet<PersonKey> = props.iter().map(|p| disk.spheres[p].person.clone()).collect();
            if let Ok(joined) = algebra::join(&atoms) {
                if joined.prop() != want {
                    problems.push(format!("link {id} does not recompose its proprietors"));
                }
            }
        }
        problems
    }
}

fn write_manifest(dir: &Path, manifest: &StoreManifest) -> Result<()> {
    let tmp = dir.join(MANIFEST_TMP);
    let mut f = File::create(&tmp)?;
    writeln!(f, "{}", serde_json::to_string(manifest).expect("manifest serializes"))?;
    f.sync_all()?;
    fs::rename(&tmp, dir.join(MANIFEST))?;
    Ok(())
}

fn load(dir: &Path) -> Result<State> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: StoreManifest = serde_json::from_str(text.trim()).map_err(|e| corrupt(MANIFEST, 1, e))?;
    if manifest.format != STORE_VERSION {
        return Err(StoreError::Corrupt(format!("unsupported format {}", manifest.format)));
    }
    let mut state = State { manifest: manifest.clone(), ..Default::default() };
    // proprietors first: sphere records need their owners
    let mut order: Vec<&String> = manifest.files.keys().collect();
    order.sort_by_key(|f| (f.as_str() != PROPRIETORS, f.starts_with(SPHERE_DIR), f.as_str()));
    for file in order {
        let len = manifest.files[file] as usize;
        let bytes = fs::read(dir.join(file))?;
        if bytes.len() < len {
            return Err(StoreError::Corrupt(format!("{file} is shorter than its committed length")));
        }
        let text = std::str::from_utf8(&bytes[..len]).map_err(|e| corrupt(file, 0, e))?;
        for (n, line) in text.lines().enumerate() {
            state.apply(file, line).map_err(|e| corrupt(file, n + 1, e))?;
        }
    }
    Ok(state)
}
