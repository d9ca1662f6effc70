//! Minimal-cost perfect matching on a square cost matrix (Hungarian method with
//! row/column potentials, O(n^3)).

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `row_to_col[i]` is the column matched to row `i`.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
    /// Another perfect matching exists whose cost is within `tie_tol` of the optimum.
    pub ambiguous: bool,
}

/// Solves the assignment problem for a square matrix of finite costs.
///
/// Ambiguity is detected from the final potentials: an alternative optimum
/// exists iff the tight edges (reduced cost `<= tie_tol`) contain an
/// alternating cycle.
pub fn solve_assignment(cost: &[Vec<f64>], tie_tol: f64) -> Assignment {
    let n = cost.len();
    assert!(
        cost.iter().all(|r| r.len() == n),
        "cost matrix must be square"
    );
    if n == 0 {
        return Assignment {
            row_to_col: Vec::new(),
            cost: 0.0,
            ambiguous: false,
        };
    }
    assert!(
        cost.iter().flatten().all(|c| c.is_finite()),
        "assignment costs must be finite"
    );

    // 1-based potentials; index 0 is the virtual start column
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }
    let total: f64 = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();

    // row i -> row k when i could take k's column along a tight edge
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if j == row_to_col[i] {
                continue;
            }
            let reduced = cost[i][j] - u[i + 1] - v[j + 1];
            if reduced <= tie_tol {
                adjacency[i].push(owner[j + 1] - 1);
            }
        }
    }
    Assignment {
        row_to_col,
        cost: total,
        ambiguous: has_cycle(&adjacency),
    }
}

fn has_cycle(adjacency: &[Vec<usize>]) -> bool {
    // 0 = unvisited, 1 = on stack, 2 = done
    let n = adjacency.len();
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < adjacency[node].len() {
                let to = adjacency[node][*next];
                *next += 1;
                match state[to] {
                    0 => {
                        state[to] = 1;
                        stack.push((to, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(cost: &[Vec<f64>]) -> (f64, usize) {
        // returns optimal cost and the number of permutations within 1e-9 of it
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, out: &mut Vec<f64>) {
            if row == cost.len() {
                out.push(acc);
                return;
            }
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost[row][j], out);
                    used[j] = false;
                }
            }
        }
        let mut all = Vec::new();
        rec(cost, 0, &mut vec![false; cost.len()], 0.0, &mut all);
        let best = all.iter().copied().fold(f64::INFINITY, f64::min);
        (best, all.iter().filter(|&&c| c - best < 1e-9).count())
    }

    #[test]
    fn picks_the_anti_diagonal() {
        let cost = vec![vec![5.0, 1.0], vec![1.0, 5.0]];
        let a = solve_assignment(&cost, 1e-12);
        assert_eq!(a.row_to_col, vec![1, 0]);
        assert_eq!(a.cost, 2.0);
        assert!(!a.ambiguous);
    }

    #[test]
    fn equal_costs_are_ambiguous() {
        let cost = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(solve_assignment(&cost, 1e-12).ambiguous);
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..6, seed in proptest::collection::vec(0.0f64..2.0, 36)) {
            let cost: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| seed[i * 6 + j]).collect()).collect();
            let a = solve_assignment(&cost, 1e-12);
            let (best, ties) = brute_force(&cost);
            prop_assert!((a.cost - best).abs() < 1e-12);
            let mut cols = a.row_to_col.clone();
            cols.sort_unstable();
            prop_assert_eq!(cols, (0..n).collect::<Vec<_>>());
            if ties == 1 {
                prop_assert!(!a.ambiguous);
            }
        }
    }
}
