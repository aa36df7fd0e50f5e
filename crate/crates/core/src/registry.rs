//! Name-keyed factories for runtime strategy selection.
//!
//! A spec string is `name` or `name:args`; the part after the first colon is
//! handed to the factory unparsed.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type Factory<T> = Box<dyn Fn(Option<&str>) -> Result<Box<T>> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self { kind, entries: BTreeMap::new() }
    }

    /// Register `factory` under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn(Option<&str>) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Box::new(factory));
        self
    }

    pub fn create(&self, spec: &str) -> Result<Box<T>> {
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        match self.entries.get(name) {
            Some(factory) => factory(args),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            }),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

/// Parse the argument of a `name:n` spec as a positive integer.
pub fn parse_order(kind: &str, args: Option<&str>) -> Result<usize> {
    let raw = args.ok_or_else(|| Error::Config(format!("{kind} needs an order, e.g. `{kind}:2`")))?;
    match raw.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(Error::Config(format!("bad {kind} order `{raw}`"))),
    }
}

/// Reject arguments for strategies that take none.
pub fn no_args(kind: &str, args: Option<&str>) -> Result<()> {
    match args {
        None | Some("") => Ok(()),
        Some(a) => Err(Error::Config(format!("{kind} takes no arguments, got `{a}`"))),
    }
}
