use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mesh, MeshError};

/// Splits the cells into `count` non-overlapping parts.
///
/// Seeds are spread by farthest-point sampling over the face-adjacency graph
/// (the first one drawn from `seed`), parts are grown breadth-first in
/// round-robin order up to `ceil(n / count)` cells each, and a final pass
/// moves boundary cells from large to small neighbouring parts until every
/// part is within 20% of the mean size, never disconnecting the donor.
///
/// Returns the owner (0-based part index) of every cell.
pub fn partition_cells(mesh: &Mesh, count: usize, seed: u64) -> Result<Vec<usize>, MeshError> {
    let n = mesh.n_cells();
    if count < 1 {
        return Err(MeshError::Partition("part count must be at least 1".into()));
    }
    if count > n {
        return Err(MeshError::Partition(format!(
            "cannot split {n} cells into {count} parts"
        )));
    }
    let adj = face_adjacency(mesh);
    if count == 1 {
        return Ok(vec![0; n]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds = vec![rng.random_range(0..n)];
    let mut dist = vec![usize::MAX; n];
    bfs_min_dist(&adj, seeds[0], &mut dist);
    while seeds.len() < count {
        // farthest cell from all seeds; unreachable cells come first
        let next = (0..n)
            .filter(|&c| dist[c] > 0)
            .max_by(|&a, &b| dist[a].cmp(&dist[b]).then(b.cmp(&a)))
            .expect("fewer seeds than cells");
        seeds.push(next);
        bfs_min_dist(&adj, next, &mut dist);
    }

    const FREE: usize = usize::MAX;
    let mut owner = vec![FREE; n];
    let mut size = vec![0usize; count];
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); count];
    for (p, &s) in seeds.iter().enumerate() {
        owner[s] = p;
        size[p] = 1;
        queues[p].extend(adj[s].iter().copied());
    }
    let target = n.div_ceil(count);
    loop {
        let mut progress = false;
        for p in 0..count {
            if size[p] >= target {
                continue;
            }
            while let Some(c) = queues[p].pop_front() {
                if owner[c] == FREE {
                    owner[c] = p;
                    size[p] += 1;
                    queues[p].extend(adj[c].iter().copied());
                    progress = true;
                    break;
                }
            }
        }
        if !progress {
            break;
        }
    }

    // cells cut off by full parts go to their smallest neighbouring part
    while owner.contains(&FREE) {
        let mut changed = false;
        for c in 0..n {
            if owner[c] != FREE {
                continue;
            }
            if let Some(p) = adj[c]
                .iter()
                .filter(|&&k| owner[k] != FREE)
                .map(|&k| owner[k])
                .min_by_key(|&p| (size[p], p))
            {
                owner[c] = p;
                size[p] += 1;
                changed = true;
            }
        }
        if !changed {
            // component without any seed
            let c = owner.iter().position(|&o| o == FREE).unwrap();
            let p = (0..count).min_by_key(|&p| (size[p], p)).unwrap();
            owner[c] = p;
            size[p] += 1;
        }
    }

    rebalance(&adj, &mut owner, &mut size);
    Ok(owner)
}

fn face_adjacency(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); mesh.n_cells()];
    for f in mesh.faces() {
        if let Some(nb) = f.neighbor {
            adj[f.owner].push(nb);
            adj[nb].push(f.owner);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

fn bfs_min_dist(adj: &[Vec<usize>], start: usize, dist: &mut [usize]) {
    let mut queue = VecDeque::from([start]);
    dist[start] = 0;
    while let Some(c) = queue.pop_front() {
        for &k in &adj[c] {
            if dist[k] > dist[c] + 1 {
                dist[k] = dist[c] + 1;
                queue.push_back(k);
            }
        }
    }
}

fn rebalance(adj: &[Vec<usize>], owner: &mut [usize], size: &mut [usize]) {
    let n = owner.len();
    let mean = n as f64 / size.len() as f64;
    let balanced = |size: &[usize]| {
        size.iter()
            .all(|&s| (s as f64) >= 0.8 * mean && (s as f64) <= 1.2 * mean)
    };
    for _ in 0..n {
        if balanced(size) {
            return;
        }
        let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
        for c in 0..n {
            let from = owner[c];
            for &k in &adj[c] {
                let to = owner[k];
                if to != from && size[from] > size[to] + 1 {
                    candidates.push((c, from, to));
                }
            }
        }
        candidates.sort_by(|a, b| {
            let ga = size[a.1] - size[a.2];
            let gb = size[b.1] - size[b.2];
            gb.cmp(&ga).then(a.0.cmp(&b.0)).then(a.2.cmp(&b.2))
        });
        candidates.dedup_by_key(|c| c.0);
        let Some(&(c, from, to)) = candidates
            .iter()
            .find(|&&(c, from, _)| stays_connected(adj, owner, from, c))
        else {
            return;
        };
        owner[c] = to;
        size[from] -= 1;
        size[to] += 1;
    }
}

fn stays_connected(adj: &[Vec<usize>], owner: &[usize], part: usize, removed: usize) -> bool {
    let members: Vec<usize> = (0..owner.len())
        .filter(|&c| owner[c] == part && c != removed)
        .collect();
    let Some(&start) = members.first() else {
        return false;
    };
    let mut seen = vec![false; owner.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(c) = queue.pop_front() {
        for &k in &adj[c] {
            if k != removed && owner[k] == part && !seen[k] {
                seen[k] = true;
                count += 1;
                queue.push_back(k);
            }
        }
    }
    count == members.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};

    fn connected_parts(mesh: &Mesh, owner: &[usize], count: usize) -> bool {
        let adj = face_adjacency(mesh);
        (0..count).all(|p| {
            let first = owner.iter().position(|&o| o == p).unwrap();
            let other = (0..owner.len()).find(|&c| owner[c] == p && c != first);
            match other {
                None => true,
                Some(_) => {
                    // removing a cell outside the part keeps the check a plain BFS
                    let outside = owner.iter().position(|&o| o != p).unwrap();
                    stays_connected(&adj, owner, p, outside)
                }
            }
        })
    }

    #[test]
    fn single_part() {
        let m = build_structured_mesh(3, 3, Rect::unit()).unwrap();
        assert_eq!(partition_cells(&m, 1, 7).unwrap(), vec![0; 18]);
        assert!(partition_cells(&m, 0, 7).is_err());
        assert!(partition_cells(&m, 19, 7).is_err());
    }

    #[test]
    fn singleton_parts() {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        let owner = partition_cells(&m, 8, 3).unwrap();
        let mut sorted = owner.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn two_by_two_golden() {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        let owner = partition_cells(&m, 2, 0).unwrap();
        assert_eq!(owner.iter().filter(|&&o| o == 0).count(), 4);
        assert_eq!(owner, vec![1, 0, 1, 1, 0, 0, 1, 0]);
    }

    #[test]
    fn balanced_and_connected() {
        let m = build_structured_mesh(24, 12, Rect::new(0.0, 0.0, 8.0, 4.0)).unwrap();
        for count in [2, 3, 4, 7, 8] {
            for seed in 0..3 {
                let owner = partition_cells(&m, count, seed).unwrap();
                assert_eq!(owner, partition_cells(&m, count, seed).unwrap());
                let mean = m.n_cells() as f64 / count as f64;
                for p in 0..count {
                    let s = owner.iter().filter(|&&o| o == p).count() as f64;
                    assert!(s >= 0.8 * mean && s <= 1.2 * mean, "part {p}: {s} vs {mean}");
                }
                assert!(connected_parts(&m, &owner, count));
            }
        }
    }
}
