/// A multiset stored as `(element, multiplicity)` pairs with strictly
/// increasing elements and positive multiplicities.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multiset<T: Ord> {
    entries: Vec<(T, usize)>,
}

impl<T: Ord> Multiset<T> {
    pub fn entries(&self) -> &[(T, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.iter().map(|(_, m)| m).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn multiplicity(&self, item: &T) -> usize {
        self.entries
            .binary_search_by(|(e, _)| e.cmp(item))
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }
}

impl<T: Ord> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut items: Vec<T> = iter.into_iter().collect();
        items.sort();
        let mut entries: Vec<(T, usize)> = Vec::new();
        for item in items {
            match entries.last_mut() {
                Some((last, count)) if *last == item => *count += 1,
                _ => entries.push((item, 1)),
            }
        }
        Multiset { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_orders() {
        let m: Multiset<u32> = [3, 1, 3, 2, 3].into_iter().collect();
        assert_eq!(m.entries(), &[(1, 1), (2, 1), (3, 3)]);
        assert_eq!(m.len(), 5);
        assert_eq!(m.multiplicity(&3), 3);
        assert_eq!(m.multiplicity(&9), 0);
        let empty: Multiset<u32> = std::iter::empty().collect();
        assert!(empty.is_empty());
    }
}
