//! The infon data model: objects, parameters, argument slots, property
//! triples and the [`Infon`] value itself, plus the primitive inspectors
//! (`referents`, `prop`, `objects`) that every other module builds on.
//!
//! An infon is either a *predication* (`⟨⟨R, a₁ … aₙ, polarity⟩⟩` with a
//! non-empty relation) or a *grouping* (empty relation and arguments, one or
//! more member infons). The value with no relation, no arguments and no
//! members is the empty infon `∅`.
//!
//! Parameters stay in their argument slot when anchored; the binding lives in
//! the `anchors` map. Structural equality, ordering, hashing and the content
//! key all look through anchors, so `anchor(Someone loves apples, someone,
//! John)` and a directly built `John loves apples` are the same infon.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use bigdecimal::BigDecimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InfonError {
    #[error("malformed-infon: {0}")]
    Malformed(String),
    #[error("unknown-parameter: {0}")]
    UnknownParameter(String),
    #[error("constraint-violation: parameter `{param}` cannot be anchored to `{object}`")]
    ConstraintViolation { param: String, object: String },
    #[error("malformed-record: {0}")]
    Codec(String),
}

impl InfonError {
    /// Stable error name, printed by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            InfonError::Malformed(_) => "malformed-infon",
            InfonError::UnknownParameter(_) => "unknown-parameter",
            InfonError::ConstraintViolation { .. } => "constraint-violation",
            InfonError::Codec(_) => "malformed-record",
        }
    }
}

/// Arbitrary-precision decimal kept in normalized form so that equal numbers
/// serialize identically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal(BigDecimal);

impl Decimal {
    pub fn new(value: BigDecimal) -> Self {
        Decimal(value.normalized())
    }

    pub fn as_bigdecimal(&self) -> &BigDecimal {
        &self.0
    }
}

impl FromStr for Decimal {
    type Err = InfonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BigDecimal::from_str(s)
            .map(Decimal::new)
            .map_err(|e| InfonError::Codec(format!("bad decimal `{s}`: {e}")))
    }
}

impl From<i64> for Decimal {
    fn from(v: i64) -> Self {
        Decimal::new(BigDecimal::from(v))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.to_plain_string())
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scalar {
    Text(String),
    Number(Decimal),
}

impl Scalar {
    pub fn text(s: impl Into<String>) -> Self {
        Scalar::Text(s.into())
    }

    pub fn number(v: i64) -> Self {
        Scalar::Number(Decimal::from(v))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Text(t) => f.write_str(t),
            Scalar::Number(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nature {
    Natural,
    Artificial,
}

/// A natural or artificial descriptor of a person (gender, date of birth,
/// ZIP code, fingerprint, ...).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Descriptor {
    pub key: String,
    pub value: Scalar,
    pub nature: Nature,
}

impl Descriptor {
    pub fn new(key: impl Into<String>, value: Scalar, nature: Nature) -> Result<Self, InfonError> {
        let key = key.into();
        if key.is_empty() {
            return Err(InfonError::Malformed("descriptor key is empty".into()));
        }
        Ok(Descriptor { key, value, nature })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonKey(pub String);

impl fmt::Display for PersonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A descriptor set that maps one-to-one onto a registered person.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Identifier {
    pub descriptors: BTreeSet<Descriptor>,
    pub person_key: PersonKey,
}

impl Identifier {
    pub fn new(
        person_key: impl Into<String>,
        descriptors: impl IntoIterator<Item = Descriptor>,
    ) -> Result<Self, InfonError> {
        let descriptors: BTreeSet<_> = descriptors.into_iter().collect();
        if descriptors.is_empty() {
            return Err(InfonError::Malformed("identifier has no descriptors".into()));
        }
        for d in &descriptors {
            if d.key.is_empty() {
                return Err(InfonError::Malformed("descriptor key is empty".into()));
            }
        }
        Ok(Identifier { descriptors, person_key: PersonKey(person_key.into()) })
    }
}

impl<'de> Deserialize<'de> for Identifier {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            descriptors: Vec<Descriptor>,
            person_key: String,
        }
        let raw = Raw::deserialize(deserializer)?;
        Identifier::new(raw.person_key, raw.descriptors).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Person(Identifier),
    Nonperson(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectRef {
    pub id: ObjectId,
    pub kind: ObjectKind,
}

impl ObjectRef {
    /// A person object; its id is the person key.
    pub fn person(identifier: Identifier) -> Self {
        ObjectRef { id: ObjectId(identifier.person_key.0.clone()), kind: ObjectKind::Person(identifier) }
    }

    pub fn nonperson(id: impl Into<String>, label: impl Into<String>) -> Self {
        ObjectRef { id: ObjectId(id.into()), kind: ObjectKind::Nonperson(label.into()) }
    }

    pub fn identifier(&self) -> Option<&Identifier> {
        match &self.kind {
            ObjectKind::Person(id) => Some(id),
            ObjectKind::Nonperson(_) => None,
        }
    }

    pub fn person_key(&self) -> Option<&PersonKey> {
        self.identifier().map(|id| &id.person_key)
    }

    pub fn is_person(&self) -> bool {
        matches!(self.kind, ObjectKind::Person(_))
    }

    pub fn label(&self) -> &str {
        match &self.kind {
            ObjectKind::Person(id) => &id.person_key.0,
            ObjectKind::Nonperson(label) => label,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamConstraint {
    Any,
    SinglyIdentifiablePerson,
    Nonperson,
}

impl ParamConstraint {
    pub fn admits(self, obj: &ObjectRef) -> bool {
        match self {
            ParamConstraint::Any => true,
            ParamConstraint::SinglyIdentifiablePerson => obj.is_person(),
            ParamConstraint::Nonperson => !obj.is_person(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub constraint: ParamConstraint,
}

impl Parameter {
    pub fn new(name: impl Into<String>, constraint: ParamConstraint) -> Self {
        Parameter { name: name.into(), constraint }
    }

    /// 𝔭: a parameter standing for a singly identifiable person.
    pub fn person(name: impl Into<String>) -> Self {
        Parameter::new(name, ParamConstraint::SinglyIdentifiablePerson)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgSlot {
    Object(ObjectRef),
    Parameter(Parameter),
    Literal(Scalar),
}

impl ArgSlot {
    pub fn param(&self) -> Option<&Parameter> {
        match self {
            ArgSlot::Parameter(p) => Some(p),
            _ => None,
        }
    }

    pub fn object(&self) -> Option<&ObjectRef> {
        match self {
            ArgSlot::Object(o) => Some(o),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Valid,
    Invalid,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PropertyTriple {
    pub param: String,
    pub value: Scalar,
    pub validity: Validity,
}

impl PropertyTriple {
    pub fn valid(param: impl Into<String>, value: Scalar) -> Self {
        PropertyTriple { param: param.into(), value, validity: Validity::Valid }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Polarity {
    #[default]
    Holds,
    DoesNotHold,
}

impl Serialize for Polarity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(match self {
            Polarity::Holds => 1,
            Polarity::DoesNotHold => 0,
        })
    }
}

impl<'de> Deserialize<'de> for Polarity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match u8::deserialize(deserializer)? {
            1 => Ok(Polarity::Holds),
            0 => Ok(Polarity::DoesNotHold),
            other => Err(serde::de::Error::custom(format!("polarity must be 0 or 1, got {other}"))),
        }
    }
}

/// Content-derived infon key: the first 16 hex digits of the SHA-256 of the
/// canonical record of the infon's resolved form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InfonKey(pub String);

impl fmt::Display for InfonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawInfon")]
pub struct Infon {
    relation: String,
    args: Vec<ArgSlot>,
    polarity: Polarity,
    properties: BTreeSet<PropertyTriple>,
    anchors: BTreeMap<String, ObjectRef>,
    members: Vec<Infon>,
}

#[derive(Deserialize)]
struct RawInfon {
    #[serde(default)]
    relation: String,
    #[serde(default)]
    args: Vec<ArgSlot>,
    #[serde(default)]
    polarity: Polarity,
    #[serde(default)]
    properties: BTreeSet<PropertyTriple>,
    #[serde(default)]
    anchors: BTreeMap<String, ObjectRef>,
    #[serde(default)]
    members: Vec<Infon>,
}

impl TryFrom<RawInfon> for Infon {
    type Error = InfonError;

    fn try_from(raw: RawInfon) -> Result<Self, Self::Error> {
        let mut infon = Infon {
            relation: raw.relation,
            args: raw.args,
            polarity: raw.polarity,
            properties: raw.properties,
            anchors: raw.anchors,
            members: raw.members,
        };
        infon.members.sort();
        infon.validate()?;
        Ok(infon)
    }
}

impl Infon {
    /// Builds a predication. The relation must be non-empty.
    pub fn new(relation: impl Into<String>, args: Vec<ArgSlot>, polarity: Polarity) -> Result<Self, InfonError> {
        let relation = relation.into();
        if relation.is_empty() {
            return Err(InfonError::Malformed("relation is empty".into()));
        }
        let infon = Infon {
            relation,
            args,
            polarity,
            properties: BTreeSet::new(),
            anchors: BTreeMap::new(),
            members: Vec::new(),
        };
        infon.validate()?;
        Ok(infon)
    }

    /// The empty information ∅.
    pub fn empty() -> Self {
        Infon {
            relation: String::new(),
            args: Vec::new(),
            polarity: Polarity::Holds,
            properties: BTreeSet::new(),
            anchors: BTreeMap::new(),
            members: Vec::new(),
        }
    }

    /// A grouping holding `members` as one value. Equal members are kept
    /// distinct; an empty member list yields ∅.
    pub fn grouping(members: impl IntoIterator<Item = Infon>) -> Self {
        let mut members: Vec<Infon> = members.into_iter().collect();
        members.sort();
        Infon { members, ..Infon::empty() }
    }

    /// The basic identifier pinfon ⟨⟨is, 𝔭, 1⟩⟩ with 𝔭 anchored to the person.
    pub fn identifier(identifier: &Identifier, param: &str) -> Self {
        let p = Parameter::person(param);
        let mut anchors = BTreeMap::new();
        anchors.insert(p.name.clone(), ObjectRef::person(identifier.clone()));
        Infon {
            relation: IDENTIFIER_RELATION.to_string(),
            args: vec![ArgSlot::Parameter(p)],
            anchors,
            ..Infon::empty()
        }
    }

    pub fn with_property(mut self, property: PropertyTriple) -> Result<Self, InfonError> {
        if self.is_grouping() {
            return Err(InfonError::Malformed("groupings carry no properties".into()));
        }
        self.properties.insert(property);
        Ok(self)
    }

    pub fn with_properties(self, props: impl IntoIterator<Item = PropertyTriple>) -> Result<Self, InfonError> {
        props.into_iter().try_fold(self, |acc, p| acc.with_property(p))
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn args(&self) -> &[ArgSlot] {
        &self.args
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn properties(&self) -> &BTreeSet<PropertyTriple> {
        &self.properties
    }

    pub fn anchors(&self) -> &BTreeMap<String, ObjectRef> {
        &self.anchors
    }

    pub fn members(&self) -> &[Infon] {
        &self.members
    }

    pub fn is_empty(&self) -> bool {
        self.relation.is_empty() && self.args.is_empty() && self.members.is_empty() && self.properties.is_empty()
    }

    pub fn is_grouping(&self) -> bool {
        self.relation.is_empty() && !self.members.is_empty()
    }

    pub fn is_predication(&self) -> bool {
        !self.relation.is_empty()
    }

    /// True for ⟨⟨is, 𝔭, 1⟩⟩ with 𝔭 anchored to a person.
    pub fn is_identifier(&self) -> bool {
        self.identifier_binding().is_some()
    }

    /// The (parameter, person) pair of an identifier infon.
    pub fn identifier_binding(&self) -> Option<(&Parameter, &ObjectRef)> {
        if self.relation != IDENTIFIER_RELATION
            || self.polarity != Polarity::Holds
            || self.args.len() != 1
            || !self.properties.is_empty()
        {
            return None;
        }
        let p = self.args[0].param()?;
        let obj = self.anchors.get(&p.name)?;
        obj.is_person().then_some((p, obj))
    }

    /// Checks every structural invariant, recursively.
    pub fn validate(&self) -> Result<(), InfonError> {
        if self.relation.is_empty() {
            if !self.args.is_empty() {
                return Err(InfonError::Malformed("arguments without a relation".into()));
            }
            if !self.properties.is_empty() && !self.members.is_empty() {
                return Err(InfonError::Malformed("groupings carry no properties".into()));
            }
            if !self.properties.is_empty() {
                return Err(InfonError::Malformed("properties without a relation".into()));
            }
        } else if !self.members.is_empty() {
            return Err(InfonError::Malformed("an infon is either a predication or a grouping".into()));
        }
        let objects = self.args.iter().filter_map(ArgSlot::object).chain(self.anchors.values());
        for obj in objects {
            if obj.person_key().is_some_and(|k| k.0 != obj.id.0) {
                return Err(InfonError::Malformed(format!("person object `{}` must use its person key as id", obj.id)));
            }
        }
        let mut declared: BTreeMap<&str, ParamConstraint> = BTreeMap::new();
        for slot in &self.args {
            if let ArgSlot::Parameter(p) = slot {
                if p.name.is_empty() {
                    return Err(InfonError::Malformed("parameter name is empty".into()));
                }
                if let Some(prev) = declared.insert(&p.name, p.constraint) {
                    if prev != p.constraint {
                        return Err(InfonError::Malformed(format!(
                            "parameter `{}` declared with two constraints",
                            p.name
                        )));
                    }
                }
            }
        }
        for (name, obj) in &self.anchors {
            let Some(constraint) = declared.get(name.as_str()) else {
                return Err(InfonError::Malformed(format!("anchored parameter `{name}` is not an argument")));
            };
            if !constraint.admits(obj) {
                return Err(InfonError::ConstraintViolation { param: name.clone(), object: obj.id.0.clone() });
            }
        }
        for m in &self.members {
            m.validate()?;
        }
        Ok(())
    }

    /// Argument slots with anchored parameters replaced by their objects.
    pub fn resolved_args(&self) -> impl Iterator<Item = Cow<'_, ArgSlot>> + '_ {
        self.args.iter().map(move |slot| match slot {
            ArgSlot::Parameter(p) => match self.anchors.get(&p.name) {
                Some(obj) => Cow::Owned(ArgSlot::Object(obj.clone())),
                None => Cow::Borrowed(slot),
            },
            other => Cow::Borrowed(other),
        })
    }

    /// The resolved form: anchors substituted into their slots and dropped.
    pub fn resolved(&self) -> Infon {
        let mut members: Vec<Infon> = self.members.iter().map(Infon::resolved).collect();
        members.sort();
        Infon {
            relation: self.relation.clone(),
            args: self.resolved_args().map(Cow::into_owned).collect(),
            polarity: self.polarity,
            properties: self.properties.clone(),
            anchors: BTreeMap::new(),
            members,
        }
    }

    /// Every person referenced through arguments, anchors and members.
    /// Repeated mentions of one proprietor count once.
    pub fn referents(&self) -> BTreeSet<PersonKey> {
        let mut out = BTreeSet::new();
        self.walk_objects(&mut |obj| {
            if let Some(k) = obj.person_key() {
                out.insert(k.clone());
            }
        });
        out
    }

    /// PROP(σ): the proprietors of the infon (same set as [`Infon::referents`]).
    pub fn prop(&self) -> BTreeSet<PersonKey> {
        self.referents()
    }

    /// n_σ
    pub fn referent_count(&self) -> usize {
        self.referents().len()
    }

    /// Every object (person or not) occurring in the infon, deduplicated by id.
    pub fn objects(&self) -> BTreeSet<ObjectRef> {
        let mut by_id: BTreeMap<ObjectId, ObjectRef> = BTreeMap::new();
        self.walk_objects(&mut |obj| {
            by_id.entry(obj.id.clone()).or_insert_with(|| obj.clone());
        });
        by_id.into_values().collect()
    }

    fn walk_objects(&self, f: &mut dyn FnMut(&ObjectRef)) {
        for slot in self.resolved_args() {
            if let ArgSlot::Object(obj) = slot.as_ref() {
                f(obj);
            }
        }
        for m in &self.members {
            m.walk_objects(f);
        }
    }

    /// Names of parameters that occur somewhere in the infon without an anchor.
    pub fn unanchored_parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out, false);
        out
    }

    /// Names of every parameter occurring anywhere in the infon.
    pub fn parameter_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_params(&mut out, true);
        out
    }

    fn collect_params(&self, out: &mut BTreeSet<String>, include_anchored: bool) {
        for slot in &self.args {
            if let ArgSlot::Parameter(p) = slot {
                if include_anchored || !self.anchors.contains_key(&p.name) {
                    out.insert(p.name.clone());
                }
            }
        }
        for m in &self.members {
            m.collect_params(out, include_anchored);
        }
    }

    /// Binds every occurrence of parameter `param` to `obj`.
    ///
    /// Anchoring a slot that is already bound to the same object is a no-op;
    /// a slot bound to a different object counts as absent.
    pub fn anchor(&self, param: &str, obj: &ObjectRef) -> Result<Infon, InfonError> {
        let mut out = self.clone();
        if !out.anchor_in_place(param, obj)? {
            return Err(InfonError::UnknownParameter(param.to_string()));
        }
        Ok(out)
    }

    fn anchor_in_place(&mut self, param: &str, obj: &ObjectRef) -> Result<bool, InfonError> {
        let mut found = false;
        if let Some(p) = self.args.iter().filter_map(ArgSlot::param).find(|p| p.name == param) {
            if !p.constraint.admits(obj) {
                return Err(InfonError::ConstraintViolation { param: param.to_string(), object: obj.id.0.clone() });
            }
            match self.anchors.get(param) {
                Some(bound) if bound != obj => {}
                _ => {
                    self.anchors.insert(param.to_string(), obj.clone());
                    found = true;
                }
            }
        }
        for m in &mut self.members {
            found |= m.anchor_in_place(param, obj)?;
        }
        if !self.members.is_empty() {
            self.members.sort();
        }
        Ok(found)
    }

    /// Content key over the resolved form.
    pub fn key(&self) -> InfonKey {
        let record = self.resolved().to_record();
        let digest = Sha256::digest(record.as_bytes());
        InfonKey(hex::encode(&digest[..8]))
    }

    /// The canonical single-line record (field order fixed).
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("infon serialization is infallible")
    }

    pub fn from_record(line: &str) -> Result<Infon, InfonError> {
        serde_json::from_str(line).map_err(|e| InfonError::Codec(e.to_string()))
    }

    /// Sentence-like rendering ("John loves apples") for human output.
    pub fn render_text(&self) -> String {
        if self.is_empty() {
            return "∅".to_string();
        }
        if self.relation.is_empty() {
            let parts: Vec<String> = self.members.iter().map(Infon::render_text).collect();
            return format!("{{{}}}", parts.join("; "));
        }
        let words: Vec<String> = self.resolved_args().map(|s| render_slot(&s)).collect();
        let relation = self.relation.replace(['-', '_'], " ");
        let relation = match self.polarity {
            Polarity::Holds => relation,
            Polarity::DoesNotHold => format!("not {relation}"),
        };
        let mut sentence = match words.split_first() {
            Some((subject, [])) => format!("{subject} {relation}"),
            Some((subject, rest)) => format!("{subject} {relation} {}", rest.join(", ")),
            None => relation,
        };
        if let Some(first) = sentence.get(0..1) {
            sentence = first.to_uppercase() + &sentence[1..];
        }
        sentence
    }
}

fn render_slot(slot: &ArgSlot) -> String {
    match slot {
        ArgSlot::Object(o) => o.label().to_string(),
        ArgSlot::Parameter(p) => p.name.clone(),
        ArgSlot::Literal(v) => v.to_string(),
    }
}

/// Relation name of identifier infons.
pub const IDENTIFIER_RELATION: &str = "is";

impl PartialEq for Infon {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Infon {}

impl PartialOrd for Infon {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Infon {
    fn cmp(&self, other: &Self) -> Ordering {
        self.relation
            .cmp(&other.relation)
            .then_with(|| self.resolved_args().cmp(other.resolved_args()))
            .then_with(|| self.polarity.cmp(&other.polarity))
            .then_with(|| self.properties.cmp(&other.properties))
            .then_with(|| self.members.cmp(&other.members))
    }
}

impl Hash for Infon {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.relation.hash(state);
        for slot in self.resolved_args() {
            slot.hash(state);
        }
        self.polarity.hash(state);
        self.properties.hash(state);
        self.members.hash(state);
    }
}

impl fmt::Display for Infon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_text())
    }
}
