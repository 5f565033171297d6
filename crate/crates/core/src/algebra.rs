//! The operation set and predicate set of the infon world, plus the five
//! extraction operations (projection, instantiation, determination,
//! extension, join).
//!
//! Everything here is a pure function over [`Infon`] values. Set-style
//! operations act on *components*: the resolved argument slots and property
//! triples of an infon, with groupings contributing the components of their
//! members.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infon::{ArgSlot, Infon, InfonError, InfonKey, ObjectRef, Parameter, Polarity, PropertyTriple};
use crate::sphere::PiiSphere;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("unknown-component: {0}")]
    UnknownComponent(String),
    #[error("rename-collision: {0}")]
    RenameCollision(String),
    #[error("empty-universe")]
    EmptyUniverse,
    #[error("empty-join")]
    EmptyJoin,
    #[error("contradiction: pair already stated the other way")]
    Contradiction,
    #[error("unknown-operation: {0}")]
    UnknownOperation(String),
    #[error(transparent)]
    Infon(#[from] InfonError),
}

impl AlgebraError {
    pub fn name(&self) -> &'static str {
        match self {
            AlgebraError::UnknownComponent(_) => "unknown-component",
            AlgebraError::RenameCollision(_) => "rename-collision",
            AlgebraError::EmptyUniverse => "empty-universe",
            AlgebraError::EmptyJoin => "empty-join",
            AlgebraError::Contradiction => "contradiction",
            AlgebraError::UnknownOperation(_) => "unknown-operation",
            AlgebraError::Infon(e) => e.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Arg(ArgSlot),
    Property(PropertyTriple),
}

/// The component set of an infon.
pub fn components(infon: &Infon) -> BTreeSet<Component> {
    let mut out = BTreeSet::new();
    collect_components(infon, &mut out);
    out
}

fn collect_components(infon: &Infon, out: &mut BTreeSet<Component>) {
    out.extend(infon.resolved_args().map(|s| Component::Arg(s.into_owned())));
    out.extend(infon.properties().iter().cloned().map(Component::Property));
    for m in infon.members() {
        collect_components(m, out);
    }
}

/// Keeps the components accepted by `keep`, preserving slot order and
/// anchors of the surviving parameters. Members left without components are
/// dropped; if filtering removed something and nothing is left, the result
/// is ∅.
fn retain(infon: &Infon, keep: &dyn Fn(&Component) -> bool) -> Infon {
    let (out, removed) = retain_inner(infon, keep);
    if removed && components(&out).is_empty() {
        Infon::empty()
    } else {
        out
    }
}

fn retain_inner(infon: &Infon, keep: &dyn Fn(&Component) -> bool) -> (Infon, bool) {
    if infon.is_grouping() {
        let mut removed = false;
        let mut members = Vec::new();
        for m in infon.members() {
            let (kept, r) = retain_inner(m, keep);
            removed |= r;
            if r && components(&kept).is_empty() {
                continue;
            }
            members.push(kept);
        }
        return (Infon::grouping(members), removed);
    }
    if infon.is_empty() {
        return (infon.clone(), false);
    }
    let mut args = Vec::new();
    let mut removed = false;
    for (slot, resolved) in infon.args().iter().zip(infon.resolved_args()) {
        if keep(&Component::Arg(resolved.into_owned())) {
            args.push(slot.clone());
        } else {
            removed = true;
        }
    }
    let props: Vec<PropertyTriple> =
        infon.properties().iter().filter(|p| keep(&Component::Property((*p).clone()))).cloned().collect();
    removed |= props.len() != infon.properties().len();
    let mut out = rebuild(infon.relation(), args, infon.polarity(), props);
    for (name, obj) in infon.anchors() {
        if out.parameter_names().contains(name) {
            out = out.anchor(name, obj).expect("anchor survives filtering");
        }
    }
    (out, removed)
}

fn rebuild(relation: &str, args: Vec<ArgSlot>, polarity: Polarity, props: impl IntoIterator<Item = PropertyTriple>) -> Infon {
    Infon::new(relation, args, polarity)
        .and_then(|i| i.with_properties(props))
        .expect("rebuilt from a well-formed predication")
}

/// Builds an infon holding exactly `comps`, reusing the template's relation
/// and polarity when it is a predication.
fn from_components(template: &Infon, comps: BTreeSet<Component>) -> Infon {
    if comps.is_empty() {
        return Infon::empty();
    }
    let relation = if template.is_predication() { template.relation() } else { COMPLEMENT_RELATION };
    let mut args = Vec::new();
    let mut props = Vec::new();
    for c in comps {
        match c {
            Component::Arg(a) => args.push(a),
            Component::Property(p) => props.push(p),
        }
    }
    rebuild(relation, args, template.polarity(), props)
}

/// Relation given to complements of groupings and of ∅.
pub const COMPLEMENT_RELATION: &str = "complement";

/// ⊕: an infon with all components of both, equal components merged.
///
/// Combining with ∅ is the identity. An identifier infon whose parameter
/// occurs unanchored in the other operand anchors it. Otherwise the operands
/// are flattened into predications; predications sharing relation and
/// polarity merge their components, the rest end up side by side in a
/// grouping.
pub fn combine(a: &Infon, b: &Infon) -> Infon {
    if a.is_empty() {
        return b.clone();
    }
    if b.is_empty() || a == b {
        return a.clone();
    }
    for (target, id) in [(a, b), (b, a)] {
        if let Some((param, person)) = id.identifier_binding() {
            if target.unanchored_parameters().contains(&param.name) {
                if let Ok(out) = target.anchor(&param.name, person) {
                    return out;
                }
            }
        }
    }
    let mut by_key: BTreeMap<(String, Polarity), BTreeSet<Infon>> = BTreeMap::new();
    for p in flatten(a).into_iter().chain(flatten(b)) {
        by_key.entry((p.relation().to_string(), p.polarity())).or_default().insert(p);
    }
    let merged: Vec<Infon> = by_key
        .into_iter()
        .map(|((relation, polarity), group)| {
            if group.len() == 1 {
                return group.into_iter().next().unwrap();
            }
            let mut args = BTreeSet::new();
            let mut props = BTreeSet::new();
            for p in &group {
                args.extend(p.resolved_args().map(|s| s.into_owned()));
                props.extend(p.properties().iter().cloned());
            }
            rebuild(&relation, args.into_iter().collect(), polarity, props)
        })
        .collect();
    if merged.len() == 1 {
        merged.into_iter().next().unwrap()
    } else {
        Infon::grouping(merged)
    }
}

fn flatten(infon: &Infon) -> Vec<Infon> {
    if infon.is_grouping() {
        infon.members().iter().flat_map(flatten).collect()
    } else if infon.is_empty() {
        Vec::new()
    } else {
        vec![infon.clone()]
    }
}

/// ⊗: keep only the listed components.
pub fn project(a: &Infon, keep: &BTreeSet<Component>) -> Result<Infon, AlgebraError> {
    let have = components(a);
    if let Some(missing) = keep.iter().find(|c| !have.contains(c)) {
        return Err(AlgebraError::UnknownComponent(format!("{missing:?}")));
    }
    Ok(retain(a, &|c| keep.contains(c)))
}

/// ÷: the components of `a` that do not appear in `b`.
///
/// Dividing by an identifier infon removes that person's identity: every
/// slot naming the person re-opens as an unanchored person parameter
/// (the identifier's own parameter name when it is free) instead of losing
/// its arity position.
pub fn quotient(a: &Infon, b: &Infon) -> Infon {
    if let Some((param, person)) = b.identifier_binding() {
        let used = a.parameter_names();
        let name = if used.contains(&param.name) {
            (1..).map(|k| format!("{}{k}", param.name)).find(|n| !used.contains(n)).unwrap()
        } else {
            param.name.clone()
        };
        return reopen_person(a, person, &name);
    }
    let remove = components(b);
    retain(a, &|c| !remove.contains(c))
}

fn reopen_person(infon: &Infon, person: &ObjectRef, fresh: &str) -> Infon {
    if infon.is_grouping() {
        return Infon::grouping(infon.members().iter().map(|m| reopen_person(m, person, fresh)));
    }
    if infon.is_empty() {
        return infon.clone();
    }
    let mut args = Vec::new();
    for (slot, resolved) in infon.args().iter().zip(infon.resolved_args()) {
        if resolved.object() == Some(person) {
            match slot {
                ArgSlot::Parameter(p) => args.push(ArgSlot::Parameter(p.clone())),
                _ => args.push(ArgSlot::Parameter(Parameter::person(fresh))),
            }
        } else {
            args.push(slot.clone());
        }
    }
    let mut out = rebuild(infon.relation(), args, infon.polarity(), infon.properties().iter().cloned());
    for (name, obj) in infon.anchors() {
        if obj != person {
            out = out.anchor(name, obj).expect("unrelated anchor survives");
        }
    }
    out
}

/// ρ: rewrite relation and parameter names. Objects are never touched.
pub fn rename(a: &Infon, mapping: &BTreeMap<String, String>) -> Result<Infon, AlgebraError> {
    let mut targets: BTreeMap<&str, &str> = BTreeMap::new();
    for (from, to) in mapping {
        if let Some(prev) = targets.insert(to, from) {
            return Err(AlgebraError::RenameCollision(format!("`{prev}` and `{from}` both map to `{to}`")));
        }
    }
    let mut symbols = BTreeSet::new();
    collect_symbols(a, &mut symbols);
    for (from, to) in mapping {
        if from != to && symbols.contains(from) && symbols.contains(to) && !mapping.contains_key(to) {
            return Err(AlgebraError::RenameCollision(format!("`{from}` would merge into existing `{to}`")));
        }
    }
    Ok(rename_inner(a, mapping))
}

fn collect_symbols(a: &Infon, out: &mut BTreeSet<String>) {
    if a.is_predication() {
        out.insert(a.relation().to_string());
    }
    out.extend(a.parameter_names());
    for m in a.members() {
        collect_symbols(m, out);
    }
}

fn rename_inner(a: &Infon, mapping: &BTreeMap<String, String>) -> Infon {
    let map = |s: &str| mapping.get(s).cloned().unwrap_or_else(|| s.to_string());
    if a.is_grouping() {
        return Infon::grouping(a.members().iter().map(|m| rename_inner(m, mapping)));
    }
    if a.is_empty() {
        return a.clone();
    }
    let args = a
        .args()
        .iter()
        .map(|slot| match slot {
            ArgSlot::Parameter(p) => ArgSlot::Parameter(Parameter::new(map(&p.name), p.constraint)),
            other => other.clone(),
        })
        .collect();
    let mut out = rebuild(&map(a.relation()), args, a.polarity(), a.properties().iter().cloned());
    for (name, obj) in a.anchors() {
        out = out.anchor(&map(name), obj).expect("renamed anchor has its parameter");
    }
    out
}

/// ∪: a grouping of exactly the two operands, common components not merged.
pub fn union(a: &Infon, b: &Infon) -> Infon {
    Infon::grouping([a.clone(), b.clone()])
}

/// ∩: the components present in both.
pub fn intersect(a: &Infon, b: &Infon) -> Infon {
    let shared = components(b);
    retain(a, &|c| shared.contains(c))
}

/// Full negation: every universe component the infon lacks.
pub fn negate_full(a: &Infon, world: &InfonWorld) -> Result<Infon, AlgebraError> {
    if world.universe.is_empty() {
        return Err(AlgebraError::EmptyUniverse);
    }
    Ok(negate_min(a, &world.universe))
}

/// Minimal negation: negation restricted to a context.
pub fn negate_min(a: &Infon, context: &BTreeSet<Component>) -> Infon {
    let have = components(a);
    from_components(a, context.iter().filter(|c| !have.contains(c)).cloned().collect())
}

/// Proper sub-infon: the component set of `a` is strictly contained in that
/// of `b`. Irreflexive and transitive.
pub fn sub_infon(a: &Infon, b: &Infon) -> bool {
    let (ca, cb) = (components(a), components(b));
    ca.len() < cb.len() && ca.is_subset(&cb)
}

/// Instantiation: anchors every listed parameter.
pub fn instantiate(a: &Infon, anchors: &BTreeMap<String, ObjectRef>) -> Result<Infon, AlgebraError> {
    anchors.iter().try_fold(a.clone(), |acc, (param, obj)| acc.anchor(param, obj).map_err(AlgebraError::from))
}

/// Determination: does the infon belong to the sphere?
pub fn determine(a: &Infon, sphere: &PiiSphere) -> bool {
    a.prop().contains(&sphere.person) || sphere.related_nii.contains_key(&a.key())
}

/// Extension: group the infon with the facets supplied by its context.
pub fn extend(a: &Infon, context: &[Infon]) -> Infon {
    if context.is_empty() {
        return a.clone();
    }
    Infon::grouping(std::iter::once(a.clone()).chain(context.iter().cloned()))
}

/// Join: one grouping of all parts.
pub fn join(parts: &[Infon]) -> Result<Infon, AlgebraError> {
    if parts.is_empty() {
        return Err(AlgebraError::EmptyJoin);
    }
    Ok(Infon::grouping(parts.iter().cloned()))
}

/// Evaluates a binary operation by name (`combine`, `quotient`, `union`,
/// `intersect`, `join`, `extend`, `sub-infon`, `negate-min`).
pub fn eval_binary(op: &str, a: &Infon, b: &Infon) -> Result<EvalOutput, AlgebraError> {
    Ok(match op {
        "combine" => EvalOutput::Infon(combine(a, b)),
        "quotient" => EvalOutput::Infon(quotient(a, b)),
        "union" => EvalOutput::Infon(union(a, b)),
        "intersect" => EvalOutput::Infon(intersect(a, b)),
        "join" => EvalOutput::Infon(join(&[a.clone(), b.clone()])?),
        "extend" => EvalOutput::Infon(extend(a, std::slice::from_ref(b))),
        "negate-min" => EvalOutput::Infon(negate_min(a, &components(b))),
        "sub-infon" => EvalOutput::Bool(sub_infon(a, b)),
        other => return Err(AlgebraError::UnknownOperation(other.to_string())),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalOutput {
    Infon(Infon),
    Bool(bool),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tri {
    Yes,
    No,
    Unstated,
}

/// The world of infons: atoms, the tri-state compatibility and association
/// predicates, and the finite component universe used by full negation.
#[derive(Clone, Debug, Default)]
pub struct InfonWorld {
    pub atoms: BTreeSet<Infon>,
    compat: BTreeMap<(InfonKey, InfonKey), bool>,
    assoc: BTreeMap<(InfonKey, InfonKey), bool>,
    pub universe: BTreeSet<Component>,
    /// When set, unstated pairs count as compatible / associated.
    pub complete: bool,
}

fn pair(a: &Infon, b: &Infon) -> (InfonKey, InfonKey) {
    let (x, y) = (a.key(), b.key());
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

fn state(map: &mut BTreeMap<(InfonKey, InfonKey), bool>, key: (InfonKey, InfonKey), value: bool) -> Result<(), AlgebraError> {
    match map.get(&key) {
        Some(prev) if *prev != value => Err(AlgebraError::Contradiction),
        _ => {
            map.insert(key, value);
            Ok(())
        }
    }
}

fn lookup(map: &BTreeMap<(InfonKey, InfonKey), bool>, key: &(InfonKey, InfonKey), complete: bool) -> Tri {
    match map.get(key) {
        Some(true) => Tri::Yes,
        Some(false) => Tri::No,
        None if complete => Tri::Yes,
        None => Tri::Unstated,
    }
}

impl InfonWorld {
    pub fn new(universe: BTreeSet<Component>) -> Self {
        InfonWorld { universe, ..Default::default() }
    }

    pub fn add_atom(&mut self, atom: Infon) {
        self.universe.extend(components(&atom));
        self.atoms.insert(atom);
    }

    pub fn state_compatible(&mut self, a: &Infon, b: &Infon, compatible: bool) -> Result<(), AlgebraError> {
        state(&mut self.compat, pair(a, b), compatible)
    }

    pub fn state_associated(&mut self, a: &Infon, b: &Infon, associated: bool) -> Result<(), AlgebraError> {
        state(&mut self.assoc, pair(a, b), associated)
    }

    pub fn compatible(&self, a: &Infon, b: &Infon) -> Tri {
        lookup(&self.compat, &pair(a, b), self.complete)
    }

    pub fn associated(&self, a: &Infon, b: &Infon) -> Tri {
        lookup(&self.assoc, &pair(a, b), self.complete)
    }
}
