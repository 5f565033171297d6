//! Disclosure rules: protection marks, taint propagation along derivation
//! ancestry, grants and intrusion alerts.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classification::Family;
use crate::infon::InfonKey;
use crate::sphere::ProprietorKey;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("unknown infon {0}")]
    UnknownInfon(InfonKey),
    #[error("rule `{0}` already exists")]
    DuplicateRule(String),
    #[error("principal must be non-empty")]
    EmptyPrincipal,
}

impl PolicyError {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyError::UnknownInfon(_) => "unknown-infon",
            PolicyError::DuplicateRule(_) => "duplicate-rule",
            PolicyError::EmptyPrincipal => "empty-principal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Never disclosed, whatever the grants.
    DiscloseDeny,
    DiscloseRequireGrant,
    /// Denied, and the record is dropped from results and counts.
    ExistenceHide,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectionMark {
    pub rule_id: String,
    pub scope: Scope,
}

/// Which records a rule targets.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Infon(InfonKey),
    Sphere(ProprietorKey),
    Family(Family),
    All,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub rule_id: String,
    pub selector: Selector,
    pub scope: Scope,
    /// Sphere whose grant satisfies the rule, for owner-claimed records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<ProprietorKey>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Grant {
    pub principal: String,
    pub sphere: ProprietorKey,
    pub scope: Scope,
}

/// One line of the policy file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyRecord {
    Rule(Rule),
    Grant(Grant),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyContext {
    pub principal: String,
    #[serde(default)]
    pub purpose: String,
    #[serde(default)]
    pub granted_spheres: BTreeSet<ProprietorKey>,
}

impl PolicyContext {
    pub fn new(principal: impl Into<String>) -> Result<Self, PolicyError> {
        let principal = principal.into();
        if principal.is_empty() {
            return Err(PolicyError::EmptyPrincipal);
        }
        Ok(PolicyContext { principal, purpose: String::new(), granted_spheres: BTreeSet::new() })
    }

    pub fn granting(mut self, spheres: impl IntoIterator<Item = ProprietorKey>) -> Self {
        self.granted_spheres.extend(spheres);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Allow,
    Deny { rule_id: String, scope: Scope },
}

impl Verdict {
    pub fn is_allow(&self) -> bool {
        matches!(self, Verdict::Allow)
    }

    pub fn hides(&self) -> bool {
        matches!(self, Verdict::Deny { scope: Scope::ExistenceHide, .. })
    }

    pub fn rule_id(&self) -> Option<&str> {
        match self {
            Verdict::Allow => None,
            Verdict::Deny { rule_id, .. } => Some(rule_id),
        }
    }
}

/// How a record was derived from its parents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivationOp {
    Combine,
    Extend,
    Join,
    Anonymize,
}

/// What the policy engine needs to know about stored records.
pub trait RecordIndex {
    fn contains(&self, key: &InfonKey) -> bool;
    fn family(&self, key: &InfonKey) -> Family;
    /// Spheres holding the record as an atom or as related NII.
    fn spheres(&self, key: &InfonKey) -> BTreeSet<ProprietorKey>;
    fn parents(&self, key: &InfonKey) -> Vec<(DerivationOp, InfonKey)>;
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PolicySet {
    pub rules: BTreeMap<String, Rule>,
    pub grants: BTreeSet<Grant>,
}

impl PolicySet {
    pub fn add_rule(&mut self, rule: Rule) -> Result<(), PolicyError> {
        if self.rules.contains_key(&rule.rule_id) {
            return Err(PolicyError::DuplicateRule(rule.rule_id));
        }
        self.rules.insert(rule.rule_id.clone(), rule);
        Ok(())
    }

    pub fn apply(&mut self, record: PolicyRecord) -> Result<(), PolicyError> {
        match record {
            PolicyRecord::Rule(r) => self.add_rule(r),
            PolicyRecord::Grant(g) => {
                self.grants.insert(g);
                Ok(())
            }
        }
    }

    fn selects(&self, rule: &Rule, index: &dyn RecordIndex, key: &InfonKey) -> bool {
        match &rule.selector {
            Selector::Infon(k) => k == key,
            Selector::Sphere(p) => index.spheres(key).contains(p),
            Selector::Family(f) => index.family(key) == *f,
            Selector::All => true,
        }
    }

    fn required_spheres(rule: &Rule, index: &dyn RecordIndex, marked: &InfonKey) -> BTreeSet<ProprietorKey> {
        if let Some(owner) = rule.owner {
            return BTreeSet::from([owner]);
        }
        match rule.selector {
            Selector::Sphere(p) => BTreeSet::from([p]),
            _ => index.spheres(marked),
        }
    }

    fn satisfied(&self, rule: &Rule, required: &BTreeSet<ProprietorKey>, ctx: &PolicyContext) -> bool {
        if rule.scope == Scope::DiscloseDeny || required.is_empty() {
            return false;
        }
        required.iter().all(|s| {
            let explicit = self.grants.contains(&Grant { principal: ctx.principal.clone(), sphere: *s, scope: rule.scope });
            explicit || (rule.scope == Scope::DiscloseRequireGrant && ctx.granted_spheres.contains(s))
        })
    }

    /// Records whose marks reach `key`, walking derivation ancestry. The
    /// flag is false when the path crosses an anonymization, which passes on
    /// existence-hide marks only.
    pub fn taint_closure(index: &dyn RecordIndex, key: &InfonKey) -> BTreeMap<InfonKey, bool> {
        let mut seen: BTreeMap<InfonKey, bool> = BTreeMap::new();
        let mut queue = VecDeque::from([(key.clone(), true)]);
        while let Some((k, full)) = queue.pop_front() {
            match seen.get(&k) {
                Some(prev) if *prev || !full => continue,
                _ => {}
            }
            seen.insert(k.clone(), full);
            for (op, parent) in index.parents(&k) {
                queue.push_back((parent, full && op != DerivationOp::Anonymize));
            }
        }
        seen
    }

    pub fn check_disclosure(
        &self,
        index: &dyn RecordIndex,
        key: &InfonKey,
        ctx: &PolicyContext,
    ) -> Result<Verdict, PolicyError> {
        if !index.contains(key) {
            return Err(PolicyError::UnknownInfon(key.clone()));
        }
        let closure = Self::taint_closure(index, key);
        for rule in self.rules.values() {
            for (marked, full) in &closure {
                if !full && rule.scope != Scope::ExistenceHide {
                    continue;
                }
                if !self.selects(rule, index, marked) {
                    continue;
                }
                let required = Self::required_spheres(rule, index, marked);
                if !self.satisfied(rule, &required, ctx) {
                    return Ok(Verdict::Deny { rule_id: rule.rule_id.clone(), scope: rule.scope });
                }
            }
        }
        Ok(Verdict::Allow)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub proprietors: Vec<ProprietorKey>,
    pub rule_id: Option<String>,
    pub principal: String,
    pub purpose: String,
    pub subject: InfonKey,
    pub timestamp: u64,
}

pub trait AlertSink {
    fn emit(&mut self, alert: &Alert) -> std::io::Result<()>;
}

/// Keeps alerts in memory. Clones share one buffer.
#[derive(Clone, Debug, Default)]
pub struct MemorySink {
    alerts: Arc<Mutex<Vec<Alert>>>,
}

impl MemorySink {
    pub fn alerts(&self) -> Vec<Alert> {
        self.alerts.lock().map(|a| a.clone()).unwrap_or_default()
    }
}

impl AlertSink for MemorySink {
    fn emit(&mut self, alert: &Alert) -> std::io::Result<()> {
        self.alerts.lock().map_err(|_| std::io::Error::other("poisoned alert buffer"))?.push(alert.clone());
        Ok(())
    }
}

/// Appends one JSON line per alert to a file.
#[derive(Clone, Debug)]
pub struct FileSink {
    pub path: PathBuf,
}

impl AlertSink for FileSink {
    fn emit(&mut self, alert: &Alert) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let line = serde_json::to_string(alert).map_err(std::io::Error::other)?;
        writeln!(f, "{line}")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AlertConfig {
    /// Also report allowed accesses.
    pub audit_all: bool,
}

/// One access decision, as seen by the alert hook.
pub struct Access<'a> {
    pub subject: &'a InfonKey,
    pub family: Family,
    pub proprietors: &'a BTreeSet<ProprietorKey>,
    pub ctx: &'a PolicyContext,
    pub outcome: &'a Verdict,
}

/// Reports denied access to PII. Sink failures are logged and swallowed.
pub fn alert_on_access(sink: &mut dyn AlertSink, config: AlertConfig, access: &Access, timestamp: u64) -> Option<Alert> {
    let fire = match access.outcome {
        Verdict::Deny { .. } => access.family == Family::Pii,
        Verdict::Allow => config.audit_all,
    };
    if !fire {
        return None;
    }
    let alert = Alert {
        proprietors: access.proprietors.iter().copied().collect(),
        rule_id: access.outcome.rule_id().map(str::to_string),
        principal: access.ctx.principal.clone(),
        purpose: access.ctx.purpose.clone(),
        subject: access.subject.clone(),
        timestamp,
    };
    if let Err(e) = sink.emit(&alert) {
        log::warn!("alert sink failed: {e}");
    }
    Some(alert)
}
