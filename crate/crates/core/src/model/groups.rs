use std::fmt;

/// Parameter groups, ordered from the input upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Embedding = 0,
    Lstm1 = 1,
    Lstm2 = 2,
    Heads = 3,
}

impl ParamGroup {
    /// Deepest (closest to the input) first.
    pub const ALL: [ParamGroup; 4] = [Self::Embedding, Self::Lstm1, Self::Lstm2, Self::Heads];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Embedding => "embedding",
            Self::Lstm1 => "lstm1",
            Self::Lstm2 => "lstm2",
            Self::Heads => "heads",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Set of parameter groups, used for "which groups are trainable".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GroupSet([bool; 4]);

impl GroupSet {
    pub fn all() -> Self {
        Self([true; 4])
    }

    pub fn none() -> Self {
        Self([false; 4])
    }

    /// The `k` groups nearest the output.
    pub fn top(k: usize) -> Self {
        let mut s = Self::none();
        for g in ParamGroup::ALL.iter().rev().take(k) {
            s.0[g.index()] = true;
        }
        s
    }

    pub fn contains(&self, g: ParamGroup) -> bool {
        self.0[g.index()]
    }

    pub fn insert(&mut self, g: ParamGroup) {
        self.0[g.index()] = true;
    }

    pub fn remove(&mut self, g: ParamGroup) {
        self.0[g.index()] = false;
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset(&self, other: &GroupSet) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }

    pub fn iter(&self) -> impl Iterator<Item = ParamGroup> + '_ {
        ParamGroup::ALL.into_iter().filter(|g| self.contains(*g))
    }
}

impl FromIterator<ParamGroup> for GroupSet {
    fn from_iter<I: IntoIterator<Item = ParamGroup>>(iter: I) -> Self {
        let mut s = Self::none();
        iter.into_iter().for_each(|g| s.insert(g));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_counts_from_the_output() {
        assert_eq!(GroupSet::top(0), GroupSet::none());
        assert_eq!(GroupSet::top(1).iter().collect::<Vec<_>>(), vec![ParamGroup::Heads]);
        assert_eq!(
            GroupSet::top(2).iter().collect::<Vec<_>>(),
            vec![ParamGroup::Lstm2, ParamGroup::Heads]
        );
        assert_eq!(GroupSet::top(4), GroupSet::all());
        assert_eq!(GroupSet::top(9), GroupSet::all());
        assert!(GroupSet::top(2).is_subset(&GroupSet::top(3)));
        assert!(!GroupSet::top(3).is_subset(&GroupSet::top(2)));
    }
}
