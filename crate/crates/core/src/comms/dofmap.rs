use std::collections::BTreeMap;

use crate::dg::BrokenSpace;
use crate::mesh::{CellSet, SubdomainLayout};

/// Local-to-global dof map of a cell set: entry `l` is the global dof of
/// local dof `l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap(Vec<usize>);

impl DofMap {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn global(&self, local: usize) -> usize {
        self.0[local]
    }

    /// Local index of a global dof. The map is increasing, so this is a
    /// binary search.
    pub fn local(&self, global: usize) -> Option<usize> {
        self.0.binary_search(&global).ok()
    }

    pub fn is_injective(&self) -> bool {
        self.0.windows(2).all(|w| w[0] < w[1])
    }

    /// Pairs `(local in self, local in other)` of shared dofs.
    pub fn shared_with(&self, other: &DofMap) -> Vec<(usize, usize)> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(l, g)| other.local(*g).map(|m| (l, m)))
            .collect()
    }
}

/// Enumerates the dofs of `cells` block by block in local cell order.
pub fn build_dofmap(cells: &CellSet, space: &BrokenSpace) -> DofMap {
    DofMap(cells.iter().flat_map(|c| space.cell_dofs(c)).collect())
}

/// Which cells each context receives from which owner.
///
/// The context of subdomain `i` holds the cells of its overlapped domain
/// and of its prediction strip; every cell of that union owned by another
/// subdomain `j` is received from `j` after each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangePlan {
    recv: Vec<BTreeMap<usize, Vec<usize>>>,
}

impl ExchangePlan {
    pub fn n_nodes(&self) -> usize {
        self.recv.len()
    }

    /// Cells that `to` receives from `from`, ascending.
    pub fn cells(&self, to: usize, from: usize) -> &[usize] {
        self.recv[to].get(&from).map_or(&[], Vec::as_slice)
    }

    /// Owners that `to` receives from.
    pub fn sources(&self, to: usize) -> impl Iterator<Item = usize> + '_ {
        self.recv[to].keys().copied()
    }
}

pub fn build_exchange_plan(layout: &SubdomainLayout) -> ExchangePlan {
    let recv = (0..layout.n_subdomains)
        .map(|i| {
            let context = layout.overlapped[i].union(&layout.prediction[i]);
            let mut from: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for c in context.iter() {
                let o = layout.owner[c];
                if o != i {
                    from.entry(o).or_default().push(c);
                }
            }
            from
        })
        .collect();
    ExchangePlan { recv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_layout, build_structured_mesh, Rect};
    use std::sync::Arc;

    #[test]
    fn dofmaps() {
        let m = Arc::new(build_structured_mesh(2, 2, Rect::unit()).unwrap());
        let s = BrokenSpace::new(m, 1);
        let full = build_dofmap(&CellSet::all(8), &s);
        assert_eq!(full.as_slice(), (0..24).collect::<Vec<_>>().as_slice());
        let one = build_dofmap(&CellSet::new(vec![5]), &s);
        assert_eq!(one.as_slice(), &[15, 16, 17]);
        let a = build_dofmap(&CellSet::new(vec![1, 2, 5]), &s);
        let b = build_dofmap(&CellSet::new(vec![2, 5, 7]), &s);
        let shared = a.shared_with(&b);
        assert_eq!(shared.len(), 6);
        for (la, lb) in shared {
            assert_eq!(a.global(la), b.global(lb));
        }
        assert!(a.is_injective());
    }

    #[test]
    fn plan_for_halves() {
        let m = build_structured_mesh(8, 4, Rect::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        let owner: Vec<usize> = (0..m.n_cells()).map(|c| usize::from(m.centroid(c)[0] > 1.0)).collect();
        let l = build_layout(&m, &owner, 1).unwrap();
        let plan = build_exchange_plan(&l);
        for (i, j) in [(0, 1), (1, 0)] {
            let cells = plan.cells(i, j);
            assert!(!cells.is_empty());
            assert!(cells.iter().all(|&c| owner[c] == j));
            let context = l.overlapped[i].union(&l.prediction[i]);
            assert!(cells.iter().all(|&c| context.contains(c)));
        }
        assert_eq!(plan.sources(0).collect::<Vec<_>>(), vec![1]);
    }
}
