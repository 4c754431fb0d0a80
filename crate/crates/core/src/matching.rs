//! Hopcroft-Karp maximum bipartite matching.

use std::collections::VecDeque;

const NIL: usize = usize::MAX;

/// Maximum matching of a bipartite graph with `adjacency[left] = [right...]`.
///
/// Returns `mate[left] = Some(right)` for matched left vertices.
pub fn hopcroft_karp(adjacency: &[Vec<usize>], right: usize) -> Vec<Option<usize>> {
    let left = adjacency.len();
    let mut mate_left = vec![NIL; left];
    let mut mate_right = vec![NIL; right];
    let mut dist = vec![0usize; left];

    loop {
        // layer the free left vertices
        let mut queue = VecDeque::new();
        for u in 0..left {
            if mate_left[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = NIL;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                let w = mate_right[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == NIL {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        for u in 0..left {
            if mate_left[u] == NIL {
                augment(u, adjacency, &mut mate_left, &mut mate_right, &mut dist);
            }
        }
    }
    mate_left.into_iter().map(|v| (v != NIL).then_some(v)).collect()
}

fn augment(
    u: usize,
    adjacency: &[Vec<usize>],
    mate_left: &mut [usize],
    mate_right: &mut [usize],
    dist: &mut [usize],
) -> bool {
    for &v in &adjacency[u] {
        let w = mate_right[v];
        if w == NIL || (dist[w] == dist[u] + 1 && augment(w, adjacency, mate_left, mate_right, dist)) {
            mate_left[u] = v;
            mate_right[v] = u;
            return true;
        }
    }
    dist[u] = NIL;
    false
}

/// Perfect matching as `mate[left] = right`, or `None` if the maximum matching is not perfect.
pub fn perfect_matching(adjacency: &[Vec<usize>], right: usize) -> Option<Vec<usize>> {
    if adjacency.len() != right {
        return None;
    }
    hopcroft_karp(adjacency, right).into_iter().collect()
}
