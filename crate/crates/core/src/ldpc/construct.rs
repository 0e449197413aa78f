//! Progressive-edge-growth construction with prescribed check degrees.

use super::{ParityCheckMatrix, SystematicEncoder};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use rand::Rng;

/// Builds a matrix with constant column weight and the given check-degree targets,
/// placing each edge at the check farthest from the variable in the current graph.
pub fn peg_construct<R: Rng + ?Sized>(
    n: usize,
    col_weight: usize,
    check_degrees: &[usize],
    rng: &mut R,
) -> Result<ParityCheckMatrix> {
    let m = check_degrees.len();
    if check_degrees.iter().sum::<usize>() != n * col_weight {
        return Err(Error::CodeConstruction("check degrees must sum to n * col_weight".into()));
    }
    if col_weight == 0 || col_weight > m {
        return Err(Error::CodeConstruction("column weight must lie in 1..=m".into()));
    }
    let mut var_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut chk_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut check_seen = vec![usize::MAX; m];
    let mut var_seen = vec![usize::MAX; n];
    let mut stamp = 0usize;
    for v in 0..n {
        for _ in 0..col_weight {
            stamp += 1;
            // Breadth-first expansion from v; `frontier_ok` holds the open checks not yet reached.
            let open = |c: usize, chk_adj: &Vec<Vec<usize>>| chk_adj[c].len() < check_degrees[c] && !var_adj[v].contains(&c);
            let mut candidates: Vec<usize> = (0..m).filter(|&c| open(c, &chk_adj)).collect();
            if candidates.is_empty() {
                return Err(Error::CodeConstruction("ran out of open checks".into()));
            }
            if !var_adj[v].is_empty() {
                let mut var_frontier = vec![v];
                var_seen[v] = stamp;
                loop {
                    let mut new_checks = Vec::new();
                    for &u in &var_frontier {
                        for &c in &var_adj[u] {
                            if check_seen[c] != stamp {
                                check_seen[c] = stamp;
                                new_checks.push(c);
                            }
                        }
                    }
                    let unreached: Vec<usize> = candidates.iter().copied().filter(|&c| check_seen[c] != stamp).collect();
                    if unreached.is_empty() || new_checks.is_empty() {
                        if !unreached.is_empty() {
                            candidates = unreached;
                        }
                        break;
                    }
                    candidates = unreached;
                    let mut next_vars = Vec::new();
                    for &c in &new_checks {
                        for &u in &chk_adj[c] {
                            if var_seen[u] != stamp {
                                var_seen[u] = stamp;
                                next_vars.push(u);
                            }
                        }
                    }
                    if next_vars.is_empty() {
                        break;
                    }
                    var_frontier = next_vars;
                }
            }
            let best = candidates
                .iter()
                .map(|&c| check_degrees[c] - chk_adj[c].len())
                .max()
                .expect("nonempty candidates");
            let pool: Vec<usize> = candidates.into_iter().filter(|&c| check_degrees[c] - chk_adj[c].len() == best).collect();
            let c = pool[rng.random_range(0..pool.len())];
            var_adj[v].push(c);
            chk_adj[c].push(v);
        }
    }
    ParityCheckMatrix::from_rows(n, chk_adj)
}

/// A rate-`k/n` code with column weight 3 and only odd check degrees, so the
/// all-ones word is never a codeword. Retries seeds until `H` has full rank.
pub fn design_code(n: usize, k: usize, seed: u64) -> Result<ParityCheckMatrix> {
    if k == 0 || k >= n {
        return Err(Error::CodeConstruction("need 0 < k < n".into()));
    }
    let m = n - k;
    let edges = 3 * n;
    let mut d = edges / m;
    if d.is_multiple_of(2) {
        d -= 1;
    }
    if d == 0 || !(edges - m * d).is_multiple_of(2) || (edges - m * d) / 2 > m {
        return Err(Error::CodeConstruction(format!("no odd check-degree profile for [{n},{k}] with column weight 3")));
    }
    let heavy = (edges - m * d) / 2;
    for attempt in 0..200u64 {
        let mut rng = RngStream::new(seed, attempt).rng();
        let mut degrees: Vec<usize> = (0..m).map(|i| if i < heavy { d + 2 } else { d }).collect();
        for i in (1..m).rev() {
            degrees.swap(i, rng.random_range(0..=i));
        }
        let Ok(h) = peg_construct(n, 3, &degrees, &mut rng) else { continue };
        if SystematicEncoder::new(&h).map(|e| e.k() == k).unwrap_or(false) {
            return Ok(h);
        }
    }
    Err(Error::CodeConstruction(format!("no full-rank [{n},{k}] matrix found")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn designed_code_properties() {
        let h = design_code(64, 32, 9).unwrap();
        assert_eq!((h.n(), h.m()), (64, 32));
        assert!(h.cols().iter().all(|c| c.len() == 3));
        assert!(h.rows().iter().all(|r| r.len() % 2 == 1));
        assert_eq!(SystematicEncoder::new(&h).unwrap().k(), 32);
        assert!(design_code(10, 10, 0).is_err());
    }

    #[test]
    fn peg_avoids_four_cycles_when_sparse() {
        let h = design_code(128, 64, 1).unwrap();
        let cols = h.cols();
        let mut four_cycles = 0;
        for a in 0..h.n() {
            for b in a + 1..h.n() {
                let shared = cols[a].iter().filter(|c| cols[b].contains(c)).count();
                four_cycles += (shared >= 2) as usize;
            }
        }
        assert_eq!(four_cycles, 0);
    }
}
