//! Integer Smith normal form with the row transform kept, which is all the
//! abelian quotient code needs.

/// Result of reducing the column lattice of an `m x k` integer matrix.
///
/// `u * b * v = diag(invariants, 0...)` for some unimodular `v` that we do
/// not keep. `u_inv` is the exact inverse of `u`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Smith {
    pub u: Vec<Vec<i64>>,
    pub u_inv: Vec<Vec<i64>>,
    pub invariants: Vec<i64>,
}

fn identity(m: usize) -> Vec<Vec<i64>> {
    (0..m).map(|i| (0..m).map(|j| i64::from(i == j)).collect()).collect()
}

/// Smith form of the lattice spanned by `columns` inside `Z^m`.
pub fn smith(m: usize, columns: &[Vec<i64>]) -> Smith {
    let k = columns.len();
    // a[row][col]
    let mut a: Vec<Vec<i64>> = (0..m).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
    let mut u = identity(m);
    let mut u_inv = identity(m);
    let mut invariants = Vec::new();

    // row_i += q * row_j, mirrored on u and u_inv
    let add_row = |a: &mut Vec<Vec<i64>>, u: &mut Vec<Vec<i64>>, u_inv: &mut Vec<Vec<i64>>, i: usize, j: usize, q: i64| {
        if q == 0 {
            return;
        }
        for c in 0..a[0].len() {
            a[i][c] += q * a[j][c];
        }
        for c in 0..m {
            u[i][c] += q * u[j][c];
        }
        for row in u_inv.iter_mut() {
            row[j] -= q * row[i];
        }
    };
    let swap_rows = |a: &mut Vec<Vec<i64>>, u: &mut Vec<Vec<i64>>, u_inv: &mut Vec<Vec<i64>>, i: usize, j: usize| {
        if i == j {
            return;
        }
        a.swap(i, j);
        u.swap(i, j);
        for row in u_inv.iter_mut() {
            row.swap(i, j);
        }
    };
    let negate_row = |a: &mut Vec<Vec<i64>>, u: &mut Vec<Vec<i64>>, u_inv: &mut Vec<Vec<i64>>, i: usize| {
        for x in a[i].iter_mut() {
            *x = -*x;
        }
        for x in u[i].iter_mut() {
            *x = -*x;
        }
        for row in u_inv.iter_mut() {
            row[i] = -row[i];
        }
    };

    let mut t = 0;
    while t < m && t < k {
        // smallest nonzero entry in the remaining block
        let mut best: Option<(usize, usize)> = None;
        for r in t..m {
            for c in t..k {
                if a[r][c] != 0 && best.map_or(true, |(br, bc)| a[r][c].abs() < a[br][bc].abs()) {
                    best = Some((r, c));
                }
            }
        }
        let Some((pr, pc)) = best else { break };
        swap_rows(&mut a, &mut u, &mut u_inv, t, pr);
        for row in a.iter_mut() {
            row.swap(t, pc);
        }
        loop {
            let p = a[t][t];
            let mut dirty = false;
            for r in t + 1..m {
                let q = a[r][t] / p;
                add_row(&mut a, &mut u, &mut u_inv, r, t, -q);
                if a[r][t] != 0 {
                    dirty = true;
                }
            }
            for c in t + 1..k {
                let q = a[t][c] / p;
                if q != 0 {
                    for row in a.iter_mut() {
                        row[c] -= q * row[t];
                    }
                }
                if a[t][c] != 0 {
                    dirty = true;
                }
            }
            if !dirty {
                // divisibility of the rest of the block
                let mut fix = None;
                'scan: for r in t + 1..m {
                    for c in t + 1..k {
                        if a[r][c] % p != 0 {
                            fix = Some(r);
                            break 'scan;
                        }
                    }
                }
                match fix {
                    None => break,
                    Some(r) => {
                        add_row(&mut a, &mut u, &mut u_inv, t, r, 1);
                        continue;
                    }
                }
            }
            // re-pivot on the smallest entry of row t / column t
            let mut best = (t, t);
            for r in t..m {
                if a[r][t] != 0 && (a[best.0][best.1] == 0 || a[r][t].abs() < a[best.0][best.1].abs()) {
                    best = (r, t);
                }
            }
            for c in t..k {
                if a[t][c] != 0 && a[t][c].abs() < a[best.0][best.1].abs() {
                    best = (t, c);
                }
            }
            if best.1 != t {
                for row in a.iter_mut() {
                    row.swap(t, best.1);
                }
            } else {
                swap_rows(&mut a, &mut u, &mut u_inv, t, best.0);
            }
        }
        if a[t][t] < 0 {
            negate_row(&mut a, &mut u, &mut u_inv, t);
        }
        invariants.push(a[t][t]);
        t += 1;
    }
    Smith { u, u_inv, invariants }
}

pub fn mat_vec(m: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
        (0..a.len())
            .map(|i| (0..b[0].len()).map(|j| (0..b.len()).map(|l| a[i][l] * b[l][j]).sum()).collect())
            .collect()
    }

    #[test]
    fn slope_lattice() {
        let s = smith(2, &[vec![1, 5]]);
        assert_eq!(s.invariants, vec![1]);
        assert_eq!(mat_mul(&s.u, &s.u_inv), identity(2));
        // free coordinate is the second row of u
        assert_eq!(mat_vec(&s.u, &[1, 5])[1], 0);
    }

    #[test]
    fn torsion_divisibility() {
        let s = smith(2, &[vec![4, 0], vec![0, 6]]);
        assert_eq!(s.invariants, vec![2, 12]);
        assert_eq!(mat_mul(&s.u, &s.u_inv), identity(2));
    }

    #[test]
    fn empty_lattice_is_identity() {
        let s = smith(3, &[]);
        assert!(s.invariants.is_empty());
        assert_eq!(s.u, identity(3));
    }
}
