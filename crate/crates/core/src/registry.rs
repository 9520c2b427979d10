//! Name-keyed registry of interchangeable strategies.

use std::collections::BTreeMap;

use crate::error::{DweError, Result};

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Box<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, item: Box<T>) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(DweError::Config(format!(
                "{} {name:?} is already registered",
                self.kind
            )));
        }
        self.entries.insert(name, item);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&T> {
        self.entries
            .get(name)
            .map(|b| &**b)
            .ok_or_else(|| DweError::UnknownName {
                kind: self.kind,
                name: name.to_owned(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &T)> {
        self.entries.iter().map(|(&k, v)| (k, &**v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }
    struct Hi;
    impl Greeter for Hi {
        fn greet(&self) -> String {
            "hi".into()
        }
    }

    #[test]
    fn register_and_lookup() {
        let mut r: Registry<dyn Greeter> = Registry::new("greeter");
        r.register("hi", Box::new(Hi)).unwrap();
        assert!(r.register("hi", Box::new(Hi)).is_err());
        assert_eq!(r.get("hi").unwrap().greet(), "hi");
        let err = r.get("yo").err().unwrap().to_string();
        assert!(err.contains("available: hi"), "{err}");
        assert_eq!(r.names(), ["hi"]);
    }
}
