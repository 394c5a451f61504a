//! Minimum-degree fill-reducing ordering on a quotient graph.
//!
//! Exact external degrees, element absorption, deterministic tie-breaking
//! by node index. No supervariable detection; grid KKT systems are sparse
//! enough that the simple variant orders them in negligible time.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Computes a fill-reducing elimination order for a symmetric pattern given
/// as strict lower-triangle edges. Returns `perm` with `perm[k]` = the node
/// eliminated at step `k` (new-to-old).
pub fn min_degree(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut adj_nodes: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c) in edges {
        debug_assert!(r < n && c < n);
        if r != c {
            adj_nodes[r].push(c);
            adj_nodes[c].push(r);
        }
    }
    for a in &mut adj_nodes {
        a.sort_unstable();
        a.dedup();
    }

    // elements created by eliminations; absorbed ones are emptied
    let mut elem_nodes: Vec<Vec<usize>> = Vec::new();
    let mut adj_elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut eliminated = vec![false; n];
    let mut degree: Vec<usize> = adj_nodes.iter().map(Vec::len).collect();
    let mut marker = vec![0usize; n];
    let mut stamp = 0usize;

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((degree[v], v))).collect();
    let mut perm = Vec::with_capacity(n);

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != degree[v] {
            continue; // stale heap entry
        }
        eliminated[v] = true;
        perm.push(v);

        // gather the set of uneliminated neighbors (the new element's nodes)
        stamp += 1;
        marker[v] = stamp;
        let mut front: Vec<usize> = Vec::new();
        for &u in &adj_nodes[v] {
            if !eliminated[u] && marker[u] != stamp {
                marker[u] = stamp;
                front.push(u);
            }
        }
        for &e in &adj_elems[v] {
            for &u in &elem_nodes[e] {
                if !eliminated[u] && marker[u] != stamp {
                    marker[u] = stamp;
                    front.push(u);
                }
            }
        }
        front.sort_unstable();

        // absorb v's elements, register the new one
        let absorbed: Vec<usize> = std::mem::take(&mut adj_elems[v]);
        for &e in &absorbed {
            elem_nodes[e].clear();
        }
        let new_elem = elem_nodes.len();
        elem_nodes.push(front.clone());

        let front_stamp = stamp;
        for &u in &front {
            // drop direct edges made redundant by the new element
            adj_nodes[u].retain(|&w| !eliminated[w] && marker[w] != front_stamp);
            adj_elems[u].retain(|&e| !elem_nodes[e].is_empty());
            adj_elems[u].push(new_elem);
        }
        // recompute exact external degrees after the graph update
        for &u in &front {
            stamp += 1;
            marker[u] = stamp;
            let mut count = 0;
            for &w in &adj_nodes[u] {
                if !eliminated[w] && marker[w] != stamp {
                    marker[w] = stamp;
                    count += 1;
                }
            }
            for &e in &adj_elems[u] {
                for &w in &elem_nodes[e] {
                    if !eliminated[w] && marker[w] != stamp {
                        marker[w] = stamp;
                        count += 1;
                    }
                }
            }
            degree[u] = count;
            heap.push(Reverse((count, u)));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_permutation(perm: &[usize], n: usize) -> bool {
        let mut seen = vec![false; n];
        perm.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true)) && perm.len() == n
    }

    #[test]
    fn identity_pattern() {
        let perm = min_degree(5, std::iter::empty());
        assert_eq!(perm, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn arrow_tip_eliminated_last() {
        // arrow: node n-1 coupled to everyone
        let n = 8;
        let perm = min_degree(n, (0..n - 1).map(|i| (n - 1, i)));
        assert!(is_permutation(&perm, n));
        assert_eq!(*perm.last().unwrap(), n - 1);
    }

    #[test]
    fn grid_pattern_is_permutation() {
        // 2-D 5-point grid, 6x6
        let (nx, ny) = (6usize, 6usize);
        let idx = |i: usize, j: usize| i * ny + j;
        let mut edges = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                if i + 1 < nx {
                    edges.push((idx(i + 1, j), idx(i, j)));
                }
                if j + 1 < ny {
                    edges.push((idx(i, j + 1), idx(i, j)));
                }
            }
        }
        let perm = min_degree(nx * ny, edges.iter().copied());
        assert!(is_permutation(&perm, nx * ny));
    }

    #[test]
    fn deterministic_on_ties() {
        let edges = [(1usize, 0usize), (2, 1), (3, 2), (4, 3)];
        let p1 = min_degree(5, edges.iter().copied());
        let p2 = min_degree(5, edges.iter().copied());
        assert_eq!(p1, p2);
    }
}
