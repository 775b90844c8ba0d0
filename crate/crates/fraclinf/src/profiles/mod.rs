//! Strategy registries. Weight densities, exterior data profiles, and
//! supremand transforms are each a family of interchangeable variants behind
//! a common trait, registered by name and selected at run time from config.

pub mod exterior;
pub mod supremand;
pub mod weight;

use crate::error::{Error, Result};
use crate::grid::Grid;
use serde_json::Value;
use std::collections::BTreeMap;

/// Context handed to profile builders.
#[derive(Debug, Clone, Copy)]
pub struct BuildCtx {
    pub grid: Grid,
}

type BuilderFn<T> = fn(&Value, &BuildCtx) -> Result<Box<T>>;

/// Name -> builder table for one strategy family.
pub struct Registry<T: ?Sized> {
    family: &'static str,
    builders: BTreeMap<&'static str, BuilderFn<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(family: &'static str) -> Self {
        Registry {
            family,
            builders: BTreeMap::new(),
        }
    }

    /// Registers a builder. Panics on duplicate names: that is a programming
    /// error, not a runtime condition.
    pub fn register(&mut self, name: &'static str, builder: BuilderFn<T>) {
        let prev = self.builders.insert(name, builder);
        assert!(
            prev.is_none(),
            "duplicate {} profile name {name:?}",
            self.family
        );
    }

    pub fn build(&self, name: &str, params: &Value, ctx: &BuildCtx) -> Result<Box<T>> {
        match self.builders.get(name) {
            Some(b) => b(params, ctx),
            None => Err(Error::UnknownProfile {
                family: self.family,
                name: name.to_string(),
                available: self.names().join(", "),
            }),
        }
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }
}

pub(crate) fn bad_params(family: &str, name: &str, err: serde_json::Error) -> Error {
    Error::InvalidParam(format!("{family} profile {name:?}: bad params: {err}"))
}
