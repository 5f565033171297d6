//! PII / NII classification and the transformations between them:
//! anonymization, identification, reduction of compound PII to atoms,
//! factoring atoms into self information, and singleton / multitude kinds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra;
use crate::infon::{
    ArgSlot, Identifier, Infon, InfonError, InfonKey, ObjectId, ObjectRef, Parameter, PersonKey, Scalar,
};
use crate::sphere::LinkId;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("not-pii: input is non-identifiable")]
    NotPii,
    #[error("not-compound: input has {0} proprietor(s)")]
    NotCompound(usize),
    #[error("not-atomic: input has {0} proprietor(s)")]
    NotAtomic(usize),
    #[error("not-self: subject differs from proprietor")]
    NotSelf,
    #[error("bad-schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Infon(#[from] InfonError),
}

impl ClassifyError {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifyError::NotPii => "not-pii",
            ClassifyError::NotCompound(_) => "not-compound",
            ClassifyError::NotAtomic(_) => "not-atomic",
            ClassifyError::NotSelf => "not-self",
            ClassifyError::Schema(_) => "bad-schema",
            ClassifyError::Infon(e) => e.name(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "NII")]
    Nii,
    #[serde(rename = "PII")]
    Pii,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    Atomic,
    Compound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfKind {
    NotSelf,
    SelfSingleton,
    SelfMultitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SapKind {
    Singleton,
    Multitude,
}

/// The classification verdict. Serializes as `{family, arity, self_kind, n}`;
/// `pni` is only written when set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub family: Family,
    pub arity: Option<Arity>,
    pub self_kind: Option<SelfKind>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pni: bool,
}

impl Classification {
    pub fn is_pii(&self) -> bool {
        self.family == Family::Pii
    }

    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("classification serialization is infallible")
    }
}

pub fn classify(sigma: &Infon) -> Classification {
    let n = sigma.referent_count();
    let (family, arity) = match n {
        0 => (Family::Nii, None),
        1 => (Family::Pii, Some(Arity::Atomic)),
        _ => (Family::Pii, Some(Arity::Compound)),
    };
    let self_kind = (n == 1).then(|| match sapinfon_kind(sigma) {
        Ok(SapKind::Singleton) => SelfKind::SelfSingleton,
        Ok(SapKind::Multitude) => SelfKind::SelfMultitude,
        Err(_) => SelfKind::NotSelf,
    });
    Classification { family, arity, self_kind, n, pni: false }
}

/// Property parameter naming an object the infon is about.
pub const TOPIC_PROPERTY: &str = "topic";

/// ABOUT(σ): the persons in σ, the object in subject (first argument)
/// position of each predication, and objects of σ named by a `topic`
/// property.
pub fn about(sigma: &Infon) -> BTreeSet<ObjectRef> {
    let objects: BTreeMap<ObjectId, ObjectRef> = sigma.objects().into_iter().map(|o| (o.id.clone(), o)).collect();
    let mut ids = BTreeSet::new();
    collect_about(sigma, &objects, &mut ids);
    ids.into_iter().filter_map(|id| objects.get(&id).cloned()).collect()
}

fn collect_about(sigma: &Infon, objects: &BTreeMap<ObjectId, ObjectRef>, out: &mut BTreeSet<ObjectId>) {
    for slot in sigma.resolved_args() {
        if let ArgSlot::Object(o) = slot.as_ref() {
            if o.is_person() {
                out.insert(o.id.clone());
            }
        }
    }
    if let Some(first) = sigma.resolved_args().next() {
        if let ArgSlot::Object(o) = first.as_ref() {
            out.insert(o.id.clone());
        }
    }
    for p in sigma.properties() {
        if let (TOPIC_PROPERTY, Scalar::Text(id)) = (p.param.as_str(), &p.value) {
            let id = ObjectId(id.clone());
            if objects.contains_key(&id) {
                out.insert(id);
            }
        }
    }
    for m in sigma.members() {
        collect_about(m, objects, out);
    }
}

/// Self atomic PII: one proprietor, and ABOUT(σ) is exactly that proprietor.
pub fn is_sapinfon(sigma: &Infon) -> bool {
    let prop = sigma.prop();
    if prop.len() != 1 {
        return false;
    }
    let about = about(sigma);
    about.iter().all(ObjectRef::is_person)
        && about.iter().filter_map(ObjectRef::person_key).cloned().collect::<BTreeSet<_>>() == prop
}

pub fn sapinfon_kind(sigma: &Infon) -> Result<SapKind, ClassifyError> {
    if !is_sapinfon(sigma) {
        return Err(ClassifyError::NotSelf);
    }
    Ok(if sigma.objects().len() == 1 { SapKind::Singleton } else { SapKind::Multitude })
}

/// One stripped identity: the parameter now standing in its slots and the
/// identifier that was removed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub parameter: String,
    pub identifier: Identifier,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anonymized {
    pub ninfon: Infon,
    /// In first-occurrence order; folding [`identify`] over it restores the input.
    pub removed: Vec<Removal>,
}

/// Removes every identifier from a pinfon.
///
/// Each person becomes one unanchored person parameter used in all of its
/// slots. A parameter that was anchored to the person keeps its name when
/// every occurrence of that name resolves to the same person; otherwise fresh
/// names `someone1`, `someone2`, ... are issued in slot order.
pub fn anonymize(sigma: &Infon) -> Result<Anonymized, ClassifyError> {
    let persons = sigma.prop();
    if persons.is_empty() {
        return Err(ClassifyError::NotPii);
    }
    let (ninfon, removed) = strip_persons(sigma, &persons);
    Ok(Anonymized { ninfon, removed })
}

/// Anonymizes exactly the given persons, leaving other proprietors in place.
pub(crate) fn strip_persons(sigma: &Infon, persons: &BTreeSet<PersonKey>) -> (Infon, Vec<Removal>) {
    let mut resolutions: BTreeMap<String, BTreeSet<Option<ObjectId>>> = BTreeMap::new();
    collect_resolutions(sigma, &mut resolutions);
    let used: BTreeSet<String> = resolutions.keys().cloned().collect();

    let mut order: Vec<(ObjectRef, Option<String>)> = Vec::new();
    first_occurrences(sigma, persons, &mut order);

    let mut taken = used.clone();
    let mut counter = 0usize;
    let mut names: BTreeMap<ObjectId, String> = BTreeMap::new();
    let mut removed = Vec::new();
    for (person, via_param) in order {
        let reuse = via_param.filter(|p| {
            resolutions.get(p).is_some_and(|r| r.len() == 1 && r.contains(&Some(person.id.clone())))
        });
        let name = match reuse {
            Some(p) => p,
            None => loop {
                counter += 1;
                let candidate = format!("someone{counter}");
                if !taken.contains(&candidate) {
                    break candidate;
                }
            },
        };
        taken.insert(name.clone());
        names.insert(person.id.clone(), name.clone());
        removed.push(Removal {
            parameter: name,
            identifier: person.identifier().expect("person object").clone(),
        });
    }
    (replace_persons(sigma, &names), removed)
}

fn collect_resolutions(sigma: &Infon, out: &mut BTreeMap<String, BTreeSet<Option<ObjectId>>>) {
    for slot in sigma.args() {
        if let ArgSlot::Parameter(p) = slot {
            out.entry(p.name.clone()).or_default().insert(sigma.anchors().get(&p.name).map(|o| o.id.clone()));
        }
    }
    for m in sigma.members() {
        collect_resolutions(m, out);
    }
}

fn first_occurrences(sigma: &Infon, persons: &BTreeSet<PersonKey>, out: &mut Vec<(ObjectRef, Option<String>)>) {
    for (slot, resolved) in sigma.args().iter().zip(sigma.resolved_args()) {
        let Some(obj) = resolved.object() else { continue };
        let Some(key) = obj.person_key() else { continue };
        if !persons.contains(key) || out.iter().any(|(o, _)| o.id == obj.id) {
            continue;
        }
        out.push((obj.clone(), slot.param().map(|p| p.name.clone())));
    }
    for m in sigma.members() {
        first_occurrences(m, persons, out);
    }
}

fn replace_persons(sigma: &Infon, names: &BTreeMap<ObjectId, String>) -> Infon {
    if sigma.is_grouping() {
        return Infon::grouping(sigma.members().iter().map(|m| replace_persons(m, names)));
    }
    if sigma.is_empty() {
        return sigma.clone();
    }
    let mut args = Vec::with_capacity(sigma.args().len());
    let mut kept_anchors = Vec::new();
    for (slot, resolved) in sigma.args().iter().zip(sigma.resolved_args()) {
        match resolved.object().and_then(|o| names.get(&o.id)) {
            Some(name) => args.push(ArgSlot::Parameter(Parameter::person(name.clone()))),
            None => {
                if let ArgSlot::Parameter(p) = slot {
                    if let Some(obj) = sigma.anchors().get(&p.name) {
                        kept_anchors.push((p.name.clone(), obj.clone()));
                    }
                }
                args.push(slot.clone());
            }
        }
    }
    let mut out = Infon::new(sigma.relation(), args, sigma.polarity())
        .and_then(|i| i.with_properties(sigma.properties().iter().cloned()))
        .expect("anonymized predication stays well-formed");
    for (name, obj) in kept_anchors {
        out = out.anchor(&name, &obj).expect("unrelated anchor survives");
    }
    out
}

/// Binds the unanchored parameter `at` to the identified person.
pub fn identify(sigma: &Infon, id: &Identifier, at: &str) -> Result<Infon, ClassifyError> {
    if !sigma.unanchored_parameters().contains(at) {
        return Err(InfonError::UnknownParameter(at.to_string()).into());
    }
    Ok(sigma.anchor(at, &ObjectRef::person(id.clone()))?)
}

/// Folds [`identify`] over a removal list.
pub fn identify_all(sigma: &Infon, removed: &[Removal]) -> Result<Infon, ClassifyError> {
    removed.iter().try_fold(sigma.clone(), |acc, r| identify(&acc, &r.identifier, &r.parameter))
}

/// Connects the atoms a compound was reduced to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CompoundLink {
    pub link_id: LinkId,
    pub atom_ids: BTreeSet<InfonKey>,
    pub origin: InfonKey,
}

impl CompoundLink {
    pub fn new(origin: InfonKey, atom_ids: BTreeSet<InfonKey>) -> Self {
        let mut h = Sha256::new();
        h.update(origin.0.as_bytes());
        for a in &atom_ids {
            h.update(b"|");
            h.update(a.0.as_bytes());
        }
        let link_id = LinkId(format!("L{}", hex::encode(&h.finalize()[..6])));
        CompoundLink { link_id, atom_ids, origin }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionResult {
    /// One atom per proprietor, ordered by person key.
    pub atoms: Vec<Infon>,
    pub link: CompoundLink,
}

/// Reduces compound PII to one atom per proprietor: atom *i* is σ with every
/// other proprietor anonymized. Properties are copied into every atom.
pub fn reduce(sigma: &Infon) -> Result<ReductionResult, ClassifyError> {
    let prop = sigma.prop();
    if prop.len() < 2 {
        return Err(ClassifyError::NotCompound(prop.len()));
    }
    let atoms: Vec<Infon> = prop
        .iter()
        .map(|keep| {
            let others: BTreeSet<PersonKey> = prop.iter().filter(|p| *p != keep).cloned().collect();
            strip_persons(sigma, &others).0
        })
        .collect();
    let link = CompoundLink::new(sigma.key(), atoms.iter().map(Infon::key).collect());
    Ok(ReductionResult { atoms, link })
}

/// Relation-schema table driving [`to_self`]: which bridging relation links
/// a proprietor to an object their information is partly about.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfSchema {
    pub default_bridge: String,
    #[serde(default)]
    pub bridges: BTreeMap<String, String>,
}

const DEFAULT_SCHEMA: &str = include_str!("relation_schema.toml");

impl Default for SelfSchema {
    fn default() -> Self {
        SelfSchema::from_toml(DEFAULT_SCHEMA).expect("bundled relation schema parses")
    }
}

impl SelfSchema {
    pub fn from_toml(text: &str) -> Result<Self, ClassifyError> {
        let schema: SelfSchema = toml::from_str(text).map_err(|e| ClassifyError::Schema(e.to_string()))?;
        let all = std::iter::once(&schema.default_bridge).chain(schema.bridges.values());
        if all.into_iter().any(String::is_empty) {
            return Err(ClassifyError::Schema("bridge relation is empty".into()));
        }
        Ok(schema)
    }

    pub fn bridge_for(&self, relation: &str) -> &str {
        self.bridges.get(relation).unwrap_or(&self.default_bridge)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SelfFactoring {
    pub self_parts: Vec<Infon>,
    pub nii_parts: Vec<Infon>,
}

/// Factors an atom into self information and the non-identifiable remainder.
///
/// A sapinfon is returned unchanged. Otherwise, for each non-person object
/// the atom is about, a bridging predication `bridge(proprietor, object)` is
/// emitted as self information, and the atom minus the proprietor's slots is
/// emitted as NII ("John's car is fast" ⇒ "John has a car" + "The car is
/// fast").
pub fn to_self(sigma: &Infon, schema: &SelfSchema) -> Result<SelfFactoring, ClassifyError> {
    let prop = sigma.prop();
    if prop.len() != 1 {
        return Err(ClassifyError::NotAtomic(prop.len()));
    }
    let mut out = SelfFactoring::default();
    factor_into(sigma, schema, &mut out);
    out.self_parts.sort();
    out.self_parts.dedup();
    out.nii_parts.sort();
    out.nii_parts.dedup();
    Ok(out)
}

fn factor_into(sigma: &Infon, schema: &SelfSchema, out: &mut SelfFactoring) {
    if is_sapinfon(sigma) {
        out.self_parts.push(sigma.clone());
        return;
    }
    if sigma.referent_count() == 0 {
        if !sigma.is_empty() {
            out.nii_parts.push(sigma.clone());
        }
        return;
    }
    if sigma.is_grouping() {
        for m in sigma.members() {
            factor_into(m, schema, out);
        }
        return;
    }
    let proprietor = sigma.objects().into_iter().find(ObjectRef::is_person).expect("atom has its proprietor");
    let bridge = schema.bridge_for(sigma.relation());
    for obj in about(sigma).into_iter().filter(|o| !o.is_person()) {
        let part = Infon::new(bridge, vec![ArgSlot::Object(proprietor.clone()), ArgSlot::Object(obj)], Default::default())
            .expect("bridge relation is non-empty");
        out.self_parts.push(part);
    }
    let keep_all_but_proprietor = algebra::components(sigma)
        .into_iter()
        .filter(|c| *c != algebra::Component::Arg(ArgSlot::Object(proprietor.clone())))
        .collect();
    let rest = algebra::project(sigma, &keep_all_but_proprietor).expect("subset of own components");
    if !rest.is_empty() {
        out.nii_parts.push(rest);
    }
}
