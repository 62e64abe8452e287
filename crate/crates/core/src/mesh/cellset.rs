/// Sorted, duplicate-free list of cell indices.
///
/// The position of a cell in the list is its *local* index. Since the list is
/// sorted, local numbering preserves the relative order of global indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CellSet(Vec<usize>);

impl CellSet {
    pub fn new(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self(cells)
    }

    pub fn all(n_cells: usize) -> Self {
        Self((0..n_cells).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Cells whose mask entry is set.
    pub fn from_mask(mask: &[bool]) -> Self {
        Self(
            mask.iter()
                .enumerate()
                .filter_map(|(c, &m)| m.then_some(c))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.0.binary_search(&cell).is_ok()
    }

    pub fn local_index(&self, cell: usize) -> Option<usize> {
        self.0.binary_search(&cell).ok()
    }

    pub fn mask(&self, n_cells: usize) -> Vec<bool> {
        let mut m = vec![false; n_cells];
        for &c in &self.0 {
            m[c] = true;
        }
        m
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.0.iter().all(|&c| other.contains(c))
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        CellSet(out)
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        CellSet::new(v)
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        CellSet(self.0.iter().copied().filter(|&c| !other.contains(c)).collect())
    }
}

impl FromIterator<usize> for CellSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        CellSet::new(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = CellSet::new(vec![5, 1, 3, 3]);
        let b: CellSet = [3, 4, 5].into_iter().collect();
        assert_eq!(a.as_slice(), &[1, 3, 5]);
        assert_eq!(a.intersection(&b).as_slice(), &[3, 5]);
        assert_eq!(a.union(&b).as_slice(), &[1, 3, 4, 5]);
        assert_eq!(a.difference(&b).as_slice(), &[1]);
        assert_eq!(a.local_index(5), Some(2));
        assert_eq!(a.local_index(4), None);
        assert!(CellSet::new(vec![3]).is_subset(&a));
        assert_eq!(CellSet::from_mask(&a.mask(6)), a);
    }
}
