//! Personal-information engine: infons, PII/NII classification and the
//! transformations between them, a per-proprietor sphere store and a
//! taint-propagating disclosure policy.

pub mod algebra;
pub mod classification;
pub mod fixtures;
pub mod infon;
pub mod policy;
pub mod sphere;
pub mod store;

pub use algebra::{AlgebraError, Component, InfonWorld, Tri};
pub use classification::{Classification, ClassifyError, CompoundLink, Family};
pub use infon::{ArgSlot, Identifier, Infon, InfonError, InfonKey, ObjectRef, Parameter, PersonKey, Polarity};
pub use sphere::{LinkId, PiiSphere, ProprietorKey};
pub use store::{Store, StoreError};
