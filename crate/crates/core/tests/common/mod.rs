//! Shared generators and independent oracles for the integration tests.
//!
//! The oracles work on the canonical JSON record of an infon, not on the
//! library's own inspectors, so they stay independent of the code they check.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use piidb_core::fixtures::{lit, oslot, person, pslot, someone};
use piidb_core::infon::{ArgSlot, Identifier, Infon, Polarity, PropertyTriple, Scalar};
use proptest::prelude::*;
use rand::Rng;
use serde_json::Value;

pub const PERSONS: [&str; 4] = ["Ann", "Bob", "Cid", "Dee"];
pub const THINGS: [&str; 2] = ["car", "house"];
pub const RELATIONS: [&str; 4] = ["r0", "r1", "r2", "r3"];
pub const PARAMS: [&str; 3] = ["x", "y", "z"];

pub fn ident(i: usize) -> Identifier {
    person(PERSONS[i], &format!("19{i}0-01-01"))
}

#[derive(Clone, Debug)]
pub enum SlotSpec {
    Person(usize),
    Thing(usize),
    Literal(usize),
    Param(usize),
}

#[derive(Clone, Debug)]
pub struct PredSpec {
    pub relation: usize,
    pub slots: Vec<SlotSpec>,
    pub negative: bool,
    pub anchors: Vec<(usize, usize)>,
    pub props: Vec<usize>,
}

pub fn build_pred(spec: &PredSpec) -> Infon {
    let args: Vec<ArgSlot> = spec
        .slots
        .iter()
        .map(|s| match s {
            SlotSpec::Person(i) => pslot(&ident(*i)),
            SlotSpec::Thing(i) => oslot(THINGS[*i]),
            SlotSpec::Literal(i) => lit(&format!("v{i}")),
            SlotSpec::Param(i) => someone(PARAMS[*i]),
        })
        .collect();
    let polarity = if spec.negative { Polarity::DoesNotHold } else { Polarity::Holds };
    let mut out = Infon::new(RELATIONS[spec.relation], args, polarity).unwrap();
    for &(param, who) in &spec.anchors {
        if out.unanchored_parameters().contains(PARAMS[param]) {
            out = out.anchor(PARAMS[param], &piidb_core::ObjectRef::person(ident(who))).unwrap();
        }
    }
    for &p in &spec.props {
        out = out.with_property(PropertyTriple::valid(format!("k{p}"), Scalar::number(p as i64))).unwrap();
    }
    out
}

fn slot_strategy() -> impl Strategy<Value = SlotSpec> {
    prop_oneof![
        3 => (0..PERSONS.len()).prop_map(SlotSpec::Person),
        2 => (0..THINGS.len()).prop_map(SlotSpec::Thing),
        2 => (0..3usize).prop_map(SlotSpec::Literal),
        2 => (0..PARAMS.len()).prop_map(SlotSpec::Param),
    ]
}

pub fn pred_strategy() -> impl Strategy<Value = PredSpec> {
    (
        0..RELATIONS.len(),
        prop::collection::vec(slot_strategy(), 0..4),
        prop::bool::weighted(0.15),
        prop::collection::vec((0..PARAMS.len(), 0..PERSONS.len()), 0..2),
        prop::collection::vec(0..3usize, 0..2),
    )
        .prop_map(|(relation, slots, negative, anchors, props)| PredSpec { relation, slots, negative, anchors, props })
}

/// Predications, groupings of up to four predications, and ∅.
pub fn infon_strategy() -> impl Strategy<Value = Infon> {
    prop_oneof![
        6 => pred_strategy().prop_map(|s| build_pred(&s)),
        3 => prop::collection::vec(pred_strategy(), 1..=4)
            .prop_map(|ss| Infon::grouping(ss.iter().map(build_pred))),
        1 => Just(Infon::empty()),
    ]
}

pub fn pii_strategy() -> impl Strategy<Value = Infon> {
    infon_strategy().prop_filter("needs a proprietor", |i| i.referent_count() > 0)
}

/// ∅, a predication, or a grouping of up to four predications, drawn from
/// six objects and four relations.
pub fn random_infon<R: Rng>(rng: &mut R) -> Infon {
    if rng.gen_bool(0.05) {
        return Infon::empty();
    }
    let preds = rng.gen_range(1..=4);
    let mut parts: Vec<Infon> = (0..preds).map(|_| build_pred(&random_pred(rng))).collect();
    if parts.len() == 1 && rng.gen_bool(0.6) {
        parts.pop().unwrap()
    } else {
        Infon::grouping(parts)
    }
}

pub fn random_pred<R: Rng>(rng: &mut R) -> PredSpec {
    let n = rng.gen_range(0..=4);
    let slots = (0..n)
        .map(|_| match rng.gen_range(0..9) {
            0..=2 => SlotSpec::Person(rng.gen_range(0..PERSONS.len())),
            3..=4 => SlotSpec::Thing(rng.gen_range(0..THINGS.len())),
            5..=6 => SlotSpec::Literal(rng.gen_range(0..3)),
            _ => SlotSpec::Param(rng.gen_range(0..PARAMS.len())),
        })
        .collect();
    let anchors = (0..rng.gen_range(0..=2))
        .map(|_| (rng.gen_range(0..PARAMS.len()), rng.gen_range(0..PERSONS.len())))
        .collect();
    let props = (0..rng.gen_range(0..=1)).map(|_| rng.gen_range(0..3)).collect();
    PredSpec { relation: rng.gen_range(0..RELATIONS.len()), slots, negative: rng.gen_bool(0.1), anchors, props }
}

/// A predication over exactly `k` distinct persons plus some background.
pub fn random_compound<R: Rng>(rng: &mut R, k: usize) -> Infon {
    let mut who: Vec<usize> = (0..PERSONS.len()).collect();
    for i in (1..who.len()).rev() {
        who.swap(i, rng.gen_range(0..=i));
    }
    let extra = (k as i64 - PERSONS.len() as i64).max(0) as usize;
    let mut slots: Vec<ArgSlot> = Vec::new();
    if rng.gen_bool(0.5) {
        slots.push(lit("no"));
    }
    for &i in who.iter().take(k.min(PERSONS.len())) {
        slots.push(pslot(&ident(i)));
    }
    for j in 0..extra {
        slots.push(pslot(&person(&format!("Extra{j}"), "2000-01-01")));
    }
    if rng.gen_bool(0.5) {
        slots.push(oslot(THINGS[rng.gen_range(0..THINGS.len())]));
    }
    let base = Infon::new(RELATIONS[rng.gen_range(0..RELATIONS.len())], slots, Polarity::Holds).unwrap();
    if rng.gen_bool(0.3) {
        let noise = Infon::new("noise", vec![lit("n")], Polarity::Holds).unwrap();
        Infon::grouping([base, noise])
    } else {
        base
    }
}

// ---- independent oracles over the JSON record ----

fn resolve_slot(slot: &Value, anchors: &serde_json::Map<String, Value>) -> Value {
    if let Some(p) = slot.get("parameter") {
        let name = p["name"].as_str().unwrap();
        if let Some(obj) = anchors.get(name) {
            return serde_json::json!({ "object": obj });
        }
    }
    slot.clone()
}

fn walk(v: &Value, f: &mut dyn FnMut(&Value, &serde_json::Map<String, Value>)) {
    let empty = serde_json::Map::new();
    let anchors = v.get("anchors").and_then(Value::as_object).unwrap_or(&empty);
    f(v, anchors);
    for m in v["members"].as_array().into_iter().flatten() {
        walk(m, f);
    }
}

/// Distinct person keys, counted by brute force over the record.
pub fn oracle_referents(infon: &Infon) -> BTreeSet<String> {
    let v: Value = serde_json::from_str(&infon.to_record()).unwrap();
    let mut out = BTreeSet::new();
    walk(&v, &mut |node, anchors| {
        for slot in node["args"].as_array().into_iter().flatten() {
            let r = resolve_slot(slot, anchors);
            if let Some(pk) = r.pointer("/object/kind/person/person_key").and_then(Value::as_str) {
                out.insert(pk.to_string());
            }
        }
    });
    out
}

/// Component set as canonical JSON strings.
pub fn oracle_components(infon: &Infon) -> BTreeSet<String> {
    let v: Value = serde_json::from_str(&infon.to_record()).unwrap();
    let mut out = BTreeSet::new();
    walk(&v, &mut |node, anchors| {
        for slot in node["args"].as_array().into_iter().flatten() {
            out.insert(format!("arg:{}", resolve_slot(slot, anchors)));
        }
        for p in node["properties"].as_array().into_iter().flatten() {
            out.insert(format!("prop:{p}"));
        }
    });
    out
}

/// Distinct relation names over all predications. Groupings carry an
/// empty relation and are skipped.
pub fn oracle_relations(infon: &Infon) -> BTreeSet<String> {
    let v: Value = serde_json::from_str(&infon.to_record()).unwrap();
    let mut out = BTreeSet::new();
    walk(&v, &mut |node, _| {
        if let Some(r) = node["relation"].as_str().filter(|r| !r.is_empty()) {
            out.insert(r.to_string());
        }
    });
    out
}

pub fn persons_of(infon: &Infon) -> BTreeMap<String, Identifier> {
    infon
        .objects()
        .into_iter()
        .filter_map(|o| o.identifier().cloned())
        .map(|id| (id.person_key.0.clone(), id))
        .collect()
}

// ---- executable classification laws, shared by the property tests and the acceptance suite ----

use piidb_core::algebra::{combine, join};
use piidb_core::classification::{anonymize, classify, identify_all, reduce, Arity, Family};

fn expect(ok: bool, what: &str, subject: &Infon) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(format!("{what}: {}", subject.to_record()))
    }
}

/// Inclusivity, exclusivity, the identifier/PII link and the atomic/compound
/// split on a single infon, checked against the independent referent count.
pub fn check_family_axioms(s: &Infon) -> Result<(), String> {
    let c = classify(s);
    let n = oracle_referents(s).len();
    expect(matches!(c.family, Family::Pii | Family::Nii), "inclusivity", s)?;
    expect((c.family == Family::Pii) != (c.family == Family::Nii), "exclusivity", s)?;
    expect((n > 0) == (c.family == Family::Pii), "identifier makes PII", s)?;
    expect((n == 0) == (c.family == Family::Nii), "no identifier makes NII", s)?;
    expect((n == 1) == (c.arity == Some(Arity::Atomic)), "atomicity", s)?;
    expect((n > 1) == (c.arity == Some(Arity::Compound)), "compoundness", s)?;
    expect(c.n == n, "referent count", s)
}

/// Closure and contagion: combining with PII yields PII.
pub fn check_combination_axioms(a: &Infon, b: &Infon) -> Result<(), String> {
    let (ca, cb) = (classify(a), classify(b));
    let c = combine(a, b);
    if ca.is_pii() || cb.is_pii() {
        expect(classify(&c).is_pii(), "closure/contagion", &c)?;
    }
    Ok(())
}

/// Anonymization yields NII, and identify undoes it.
pub fn check_anonymization(s: &Infon) -> Result<(), String> {
    if !classify(s).is_pii() {
        return Ok(());
    }
    let anon = anonymize(s).map_err(|e| e.to_string())?;
    expect(classify(&anon.ninfon).family == Family::Nii, "anonymize yields NII", &anon.ninfon)?;
    expect(oracle_referents(&anon.ninfon).is_empty(), "anonymize leaves no referent", &anon.ninfon)?;
    let back = identify_all(&anon.ninfon, &anon.removed).map_err(|e| e.to_string())?;
    expect(&back == s, "identify after anonymize restores the input", s)
}

/// Reduction to one atom per proprietor.
pub fn check_reduction(s: &Infon) -> Result<(), String> {
    let prop = oracle_referents(s);
    if prop.len() < 2 {
        return Ok(());
    }
    let r = reduce(s).map_err(|e| e.to_string())?;
    expect(r.atoms.len() == prop.len(), "one atom per proprietor", s)?;
    let mut seen = BTreeSet::new();
    for atom in &r.atoms {
        let p = oracle_referents(atom);
        expect(p.len() == 1, "atom is atomic", atom)?;
        expect(seen.insert(p.into_iter().next().unwrap()), "atom proprietors disjoint", atom)?;
    }
    expect(seen == prop, "atom proprietors partition PROP", s)?;
    let joined = join(&r.atoms).map_err(|e| e.to_string())?;
    expect(oracle_referents(&joined) == prop, "join recomposes PROP", s)?;
    expect(r.link.atom_ids.len() >= 2 && r.link.origin == s.key(), "link records atoms and origin", s)
}

// ---- derivation DAGs over a live store ----

use piidb_core::infon::InfonKey;
use piidb_core::policy::DerivationOp;
use piidb_core::store::{IngestReport, Store};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

pub const OPS: [DerivationOp; 4] = [DerivationOp::Combine, DerivationOp::Extend, DerivationOp::Join, DerivationOp::Anonymize];

/// Lineage kept by the test itself: child -> (op, parent).
pub type Edges = BTreeMap<InfonKey, BTreeSet<(DerivationOp, InfonKey)>>;

pub fn registered(dir: &std::path::Path, skip: Option<usize>) -> Store {
    let mut store = Store::create(dir).unwrap();
    for i in (0..PERSONS.len()).filter(|i| Some(*i) != skip) {
        store.register_proprietor(ident(i)).unwrap();
    }
    store
}

pub fn produced(report: &IngestReport) -> BTreeSet<InfonKey> {
    report.placements.iter().map(|p| p.key.clone()).chain(report.pool.iter().cloned()).collect()
}

/// Builds a random derivation DAG of bounded depth and returns every stored
/// key with its depth, plus the edges the store was asked to record.
pub fn random_dag(store: &mut Store, rng: &mut ChaCha8Rng, max_depth: usize) -> (BTreeMap<InfonKey, usize>, Edges) {
    let mut depth: BTreeMap<InfonKey, usize> = BTreeMap::new();
    let mut edges = Edges::new();
    for _ in 0..4 {
        let r = store.ingest(&random_infon(rng)).unwrap();
        for k in produced(&r) {
            depth.entry(k).or_insert(0);
        }
    }
    for _ in 0..12 {
        let keys: Vec<InfonKey> = depth.iter().filter(|(_, d)| **d < max_depth).map(|(k, _)| k.clone()).collect();
        if keys.is_empty() {
            break;
        }
        let op = OPS[rng.gen_range(0..OPS.len())];
        let parents: Vec<InfonKey> = if op == DerivationOp::Anonymize {
            let pii: Vec<&InfonKey> = keys.iter().filter(|k| store.infon(k).unwrap().referent_count() > 0).collect();
            if pii.is_empty() {
                continue;
            }
            vec![pii[rng.gen_range(0..pii.len())].clone()]
        } else {
            (0..rng.gen_range(1..=3)).map(|_| keys[rng.gen_range(0..keys.len())].clone()).collect()
        };
        let Ok((_, report)) = store.derive(op, &parents) else { continue };
        let d = parents.iter().map(|p| depth[p]).max().unwrap() + 1;
        for child in produced(&report) {
            for p in &parents {
                if *p != child {
                    edges.entry(child.clone()).or_default().insert((op, p.clone()));
                }
            }
            let e = depth.entry(child).or_insert(d);
            *e = (*e).min(d);
        }
    }
    (depth, edges)
}

/// Nodes reachable from `root` along lineage, with whether some path avoids
/// anonymization.
pub fn oracle_reach(edges: &Edges, root: &InfonKey) -> BTreeMap<InfonKey, bool> {
    let mut children: BTreeMap<&InfonKey, Vec<(DerivationOp, &InfonKey)>> = BTreeMap::new();
    for (child, ps) in edges {
        for (op, p) in ps {
            children.entry(p).or_default().push((*op, child));
        }
    }
    let mut seen: BTreeMap<InfonKey, bool> = BTreeMap::from([(root.clone(), true)]);
    let mut queue = VecDeque::from([(root.clone(), true)]);
    while let Some((node, full)) = queue.pop_front() {
        for (op, child) in children.get(&node).into_iter().flatten() {
            let f = full && *op != DerivationOp::Anonymize;
            match seen.get(*child) {
                Some(&old) if old || !f => {}
                _ => {
                    seen.insert((*child).clone(), f);
                    queue.push_back(((*child).clone(), f));
                }
            }
        }
    }
    seen
}

