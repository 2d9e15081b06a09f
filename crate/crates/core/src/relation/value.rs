use std::collections::HashMap;

/// An interned domain value. Ordering is the interning order of the owning
/// [`Dictionary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(pub u32);

/// Interns the string rendering of domain values.
#[derive(Clone, Debug, Default)]
pub struct Dictionary {
    strings: Vec<String>,
    index: HashMap<String, u32>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, s: &str) -> Value {
        if let Some(&id) = self.index.get(s) {
            return Value(id);
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_owned());
        self.index.insert(s.to_owned(), id);
        Value(id)
    }

    pub fn lookup(&self, s: &str) -> Option<Value> {
        self.index.get(s).map(|&id| Value(id))
    }

    pub fn render(&self, v: Value) -> &str {
        &self.strings[v.0 as usize]
    }

    pub fn render_tuple(&self, t: &[Value]) -> Vec<&str> {
        t.iter().map(|&v| self.render(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}
