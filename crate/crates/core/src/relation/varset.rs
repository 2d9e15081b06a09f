use std::fmt;

/// Hard ceiling on the variable universe; set functions are dense arrays of
/// length `2^|V|`.
pub const MAX_VARS: usize = 20;

/// A subset of the variable universe, encoded as a bitmask where bit `i`
/// is the variable with index `i`.
///
/// The integer encoding doubles as the canonical tie-breaking order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VarSet(u32);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub const fn from_bits(bits: u32) -> Self {
        VarSet(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn singleton(var: usize) -> Self {
        debug_assert!(var < MAX_VARS);
        VarSet(1 << var)
    }

    /// The set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_VARS);
        VarSet(((1u64 << n) - 1) as u32)
    }

    pub fn from_vars(vars: impl IntoIterator<Item = usize>) -> Self {
        vars.into_iter()
            .fold(VarSet::EMPTY, |acc, v| acc.union(VarSet::singleton(v)))
    }

    pub fn contains(self, var: usize) -> bool {
        self.0 & (1 << var) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_strict_subset(self, other: VarSet) -> bool {
        self.is_subset(other) && self != other
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn intersection(self, other: VarSet) -> VarSet {
        VarSet(self.0 & other.0)
    }

    pub fn difference(self, other: VarSet) -> VarSet {
        VarSet(self.0 & !other.0)
    }

    /// Position of `var` within this set's ascending variable order, i.e. the
    /// column index of `var` in a tuple over this schema.
    pub fn position(self, var: usize) -> Option<usize> {
        if !self.contains(var) {
            return None;
        }
        Some((self.0 & ((1u32 << var) - 1)).count_ones() as usize)
    }

    /// Variable indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(v)
        })
    }

    /// All subsets of this set (including the empty set and itself), in
    /// ascending encoding order.
    pub fn subsets(self) -> impl Iterator<Item = VarSet> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(VarSet(cur))
        })
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerates_in_encoding_order() {
        let s = VarSet::from_bits(0b1010);
        let subs: Vec<u32> = s.subsets().map(|x| x.bits()).collect();
        assert_eq!(subs, vec![0b0000, 0b0010, 0b1000, 0b1010]);
        assert_eq!(VarSet::EMPTY.subsets().count(), 1);
        assert_eq!(VarSet::full(4).subsets().count(), 16);
    }

    #[test]
    fn position_counts_lower_members() {
        let s = VarSet::from_vars([1, 3, 4]);
        assert_eq!(s.position(1), Some(0));
        assert_eq!(s.position(3), Some(1));
        assert_eq!(s.position(4), Some(2));
        assert_eq!(s.position(2), None);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 3, 4]);
    }

    #[test]
    fn set_algebra() {
        let a = VarSet::from_vars([0, 1]);
        let b = VarSet::from_vars([1, 2]);
        assert_eq!(a.union(b), VarSet::from_vars([0, 1, 2]));
        assert_eq!(a.intersection(b), VarSet::singleton(1));
        assert_eq!(a.difference(b), VarSet::singleton(0));
        assert!(VarSet::singleton(1).is_strict_subset(a));
        assert!(!a.is_strict_subset(a));
        assert_eq!(VarSet::full(MAX_VARS).len(), MAX_VARS);
    }
}
