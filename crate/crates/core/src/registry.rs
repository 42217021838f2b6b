//! Name-keyed constructor tables for runtime-selectable strategies.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::{Error, Result};

/// A JSON-style description whose `form` selects the strategy.
pub trait StrategySpec {
    fn form(&self) -> &str;
}

pub type Builder<S, T> = fn(&S) -> Result<Arc<T>>;

pub struct Registry<S, T: ?Sized> {
    kind: &'static str,
    builders: BTreeMap<&'static str, Builder<S, T>>,
}

impl<S: StrategySpec, T: ?Sized> Registry<S, T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            builders: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, form: &'static str, builder: Builder<S, T>) -> &mut Self {
        self.builders.insert(form, builder);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn contains(&self, form: &str) -> bool {
        self.builders.contains_key(form)
    }

    pub fn build(&self, spec: &S) -> Result<Arc<T>> {
        let builder = self.builders.get(spec.form()).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: spec.form().to_string(),
            known: self.names().collect::<Vec<_>>().join(", "),
        })?;
        builder(spec)
    }
}
