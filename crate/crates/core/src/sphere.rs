//! Per-proprietor partition types shared by the algebra, the store and the
//! policy engine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::infon::{InfonKey, PersonKey};

/// Internal `#proprietor` key. Rendered as `p<n>`; never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProprietorKey(pub u64);

impl fmt::Display for ProprietorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl FromStr for ProprietorKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('p')
            .and_then(|n| n.parse().ok())
            .map(ProprietorKey)
            .ok_or_else(|| format!("bad proprietor key `{s}`"))
    }
}

impl Serialize for ProprietorKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProprietorKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub String);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A proprietor's piiSphere: self atoms split by kind, related NII with the
/// justification for each attachment, and the compound links it takes part in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiiSphere {
    pub proprietor: ProprietorKey,
    pub person: PersonKey,
    pub self_singletons: BTreeSet<InfonKey>,
    pub self_multitudes: BTreeSet<InfonKey>,
    pub related_nii: BTreeMap<InfonKey, String>,
    pub links: BTreeSet<LinkId>,
}

impl PiiSphere {
    pub fn new(proprietor: ProprietorKey, person: PersonKey) -> Self {
        PiiSphere {
            proprietor,
            person,
            self_singletons: BTreeSet::new(),
            self_multitudes: BTreeSet::new(),
            related_nii: BTreeMap::new(),
            links: BTreeSet::new(),
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &InfonKey> {
        self.self_singletons.iter().chain(self.self_multitudes.iter())
    }

    pub fn holds_atom(&self, key: &InfonKey) -> bool {
        self.self_singletons.contains(key) || self.self_multitudes.contains(key)
    }

    pub fn is_empty(&self) -> bool {
        self.self_singletons.is_empty()
            && self.self_multitudes.is_empty()
            && self.related_nii.is_empty()
            && self.links.is_empty()
    }
}
