mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use piidb_core::classification::{classify, Family};
use piidb_core::infon::{Infon, InfonKey};
use piidb_core::policy::{PolicyContext, ProtectionMark, Scope};
use piidb_core::store::{Boundary, FailPoint, Store};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn taint_matches_reachability(seed in any::<u64>(), max_depth in 1..=5usize, hide in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let mut store = registered(dir.path(), None);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (depth, edges) = random_dag(&mut store, &mut rng, max_depth);
        let keys: Vec<InfonKey> = depth.keys().cloned().collect();
        let marked = keys[rng.gen_range(0..keys.len())].clone();
        let ctx = PolicyContext::new("auditor").unwrap();
        let before: BTreeMap<InfonKey, bool> =
            keys.iter().map(|k| (k.clone(), store.check_disclosure(k, &ctx).unwrap().is_allow())).collect();
        let scope = if hide { Scope::ExistenceHide } else { Scope::DiscloseDeny };
        store.protect(&marked, ProtectionMark { rule_id: "m".into(), scope }).unwrap();
        let reach = oracle_reach(&edges, &marked);
        for k in &keys {
            let v = store.check_disclosure(k, &ctx).unwrap();
            let want_denied = match reach.get(k) {
                Some(full) => *full || hide,
                None => false,
            };
            prop_assert_eq!(!v.is_allow(), want_denied, "node {} depth {}", k, depth[k]);
            if !before[k] {
                prop_assert!(!v.is_allow(), "a new rule lifted a denial on {}", k);
            }
        }
        prop_assert!(store.check_integrity().is_empty());
    }

    #[test]
    fn random_sessions_keep_invariants(seed in any::<u64>(), steps in 5..40usize) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db");
        let mut store = registered(&path, Some(3));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for step in 0..steps {
            let committed = store.manifest().clone();
            match rng.gen_range(0..10) {
                0..=4 => {
                    let s = random_infon(&mut rng);
                    let persons = oracle_referents(&s);
                    match store.ingest(&s) {
                        Ok(r) => {
                            let spheres: BTreeSet<String> = r
                                .placements
                                .iter()
                                .map(|p| store.sphere(p.sphere).unwrap().person.0.clone())
                                .collect();
                            prop_assert_eq!(spheres, persons.clone());
                            prop_assert_eq!(r.links.len(), usize::from(persons.len() > 1));
                            for k in &r.pool {
                                prop_assert!(classify(store.infon(k).unwrap()).family == Family::Nii);
                            }
                        }
                        Err(e) => {
                            prop_assert_eq!(e.name(), "unknown-proprietor");
                            prop_assert!(persons.contains(PERSONS[3]));
                            prop_assert_eq!(store.manifest(), &committed);
                        }
                    }
                }
                5 => {
                    let fresh = Infon::grouping([
                        random_infon(&mut rng),
                        piidb_core::fixtures::pred("tick", vec![piidb_core::fixtures::lit(&format!("{step}"))]),
                    ]);
                    if oracle_referents(&fresh).contains(PERSONS[3]) {
                        continue;
                    }
                    store.fail_next_commit(if rng.gen_bool(0.5) { FailPoint::TornData } else { FailPoint::BeforeManifest });
                    prop_assert_eq!(store.ingest(&fresh).unwrap_err().name(), "interrupted-write");
                    prop_assert_eq!(store.manifest(), &committed);
                }
                6 => {
                    let spheres: Vec<_> = store.spheres().map(|s| s.proprietor).collect();
                    let pool: Vec<InfonKey> = store.pool().map(|i| i.key()).collect();
                    if !pool.is_empty() {
                        let k = &pool[rng.gen_range(0..pool.len())];
                        let p = spheres[rng.gen_range(0..spheres.len())];
                        if let Err(e) = store.attach_related_nii(p, k, "seen together", &Boundary::default()) {
                            prop_assert_eq!(e.name(), "boundary-exceeded");
                        }
                    }
                }
                7 => {
                    let spheres: Vec<_> = store.spheres().map(|s| s.proprietor).collect();
                    let pool: Vec<InfonKey> = store.pool().map(|i| i.key()).collect();
                    if !pool.is_empty() {
                        let k = &pool[rng.gen_range(0..pool.len())];
                        let _ = store.claim_pni(spheres[rng.gen_range(0..spheres.len())], k);
                    }
                }
                _ => {
                    let keys: Vec<InfonKey> = store
                        .spheres()
                        .flat_map(|s| s.atoms().cloned().collect::<Vec<_>>())
                        .chain(store.pool().map(|i| i.key()))
                        .collect();
                    if !keys.is_empty() {
                        let op = OPS[rng.gen_range(0..3)];
                        let parents: Vec<InfonKey> = (0..2).map(|_| keys[rng.gen_range(0..keys.len())].clone()).collect();
                        store.derive(op, &parents).unwrap();
                    }
                }
            }
            let problems = store.check_integrity();
            prop_assert!(problems.is_empty(), "{:?}", problems);
        }
        let manifest = store.manifest().clone();
        let sphere_dump: Vec<_> = store.spheres().cloned().collect();
        drop(store);
        let reopened = Store::open(&path).unwrap();
        prop_assert_eq!(reopened.manifest(), &manifest);
        prop_assert_eq!(reopened.spheres().cloned().collect::<Vec<_>>(), sphere_dump);
        prop_assert!(reopened.check_integrity().is_empty());
    }
}
