//! Perfect-matching enumeration and brute-force matrix functions.
//!
//! Everything here is exponential-time by construction and capped by
//! [`EnumerationLimits`]; the point is to be obviously correct so that the
//! fast kernel in [`crate::hafnian`] has a ground truth to match. Vertices
//! are 0-indexed internally; conversion to the 1-based labels used in
//! human-facing listings happens only at I/O boundaries.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{symmetry_error, CMat};

#[derive(Debug, Error)]
pub enum MatchGraphError {
    #[error("vertex count {n} exceeds enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("matrix is not symmetric: max |G[i][j] - G[j][i]| = {0:.3e}")]
    NotSymmetric(f64),
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matching count overflows u128 at n = {0}")]
    CountOverflow(usize),
}

/// Resource guards for the enumeration-based operations.
///
/// These are runtime configuration, not compile-time constants; the CLI can
/// override them within reason.
#[derive(Debug, Clone)]
pub struct EnumerationLimits {
    /// Cap for loopless perfect-matching enumeration ((n-1)!! growth).
    pub max_loopless: usize,
    /// Cap for loop-allowing enumeration (involution-number growth).
    pub max_with_loops: usize,
    /// Cap for the Ryser permanent (2^n growth).
    pub max_permanent_dim: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_loopless: 16,
            max_with_loops: 14,
            max_permanent_dim: 26,
        }
    }
}

impl EnumerationLimits {
    fn check(&self, n: usize, allow_loops: bool) -> Result<(), MatchGraphError> {
        let cap = if allow_loops {
            self.max_with_loops
        } else {
            self.max_loopless
        };
        if n > cap {
            Err(MatchGraphError::CapExceeded { n, cap })
        } else {
            Ok(())
        }
    }
}

/// Complex square symmetric matrix with diagonal allowed: the weighted
/// adjacency matrix of a graph with loops.
///
/// Symmetry is enforced on construction (inputs are validated to 1e-12 and
/// then symmetrized exactly), so downstream code can rely on `G[i][j] ==
/// G[j][i]` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    data: CMat,
}

impl SymmetricMatrix {
    /// Validates squareness and symmetry (entrywise deviation at most 1e-12),
    /// then symmetrizes exactly.
    pub fn new(data: CMat) -> Result<Self, MatchGraphError> {
        if data.nrows() != data.ncols() {
            return Err(MatchGraphError::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        let err = symmetry_error(&data);
        if err > 1e-12 {
            return Err(MatchGraphError::NotSymmetric(err));
        }
        Ok(Self::from_fn(data.nrows(), |i, j| data[(i, j)]))
    }

    /// Builds from the upper triangle of `f` (called with `i <= j`), mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = CMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let z = f(i, j);
                data[(i, j)] = z;
                data[(j, i)] = z;
            }
        }
        SymmetricMatrix { data }
    }

    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix {
            data: CMat::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.data[(i, i)]).collect()
    }

    pub fn with_zero_diagonal(&self) -> Self {
        let mut data = self.data.clone();
        for i in 0..self.dim() {
            data[(i, i)] = C64::new(0.0, 0.0);
        }
        SymmetricMatrix { data }
    }

    /// `P A Pᵀ` for the permutation sending row `i` to row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim());
        Self::from_fn(self.dim(), |i, j| self.data[(perm[i], perm[j])])
    }
}

/// A matching: vertex pairs `(i, j)` with `i <= j`; a pair `(i, i)` is a
/// loop. No vertex appears twice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_perfect(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &(i, j) in &self.pairs {
            if i == j {
                seen[i] = true;
            } else {
                seen[i] = true;
                seen[j] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Product of matched entries of `g`; loops pick up diagonal weights.
    pub fn weight(&self, g: &SymmetricMatrix) -> C64 {
        self.pairs
            .iter()
            .map(|&(i, j)| g.get(i, j))
            .product()
    }
}

/// Visits every perfect matching of the complete graph on `n` vertices
/// exactly once, by recursion on the lowest-indexed unmatched vertex.
fn for_each_perfect_matching(
    n: usize,
    allow_loops: bool,
    visit: &mut impl FnMut(&[(usize, usize)]),
) {
    let mut used = vec![false; n];
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(n);
    fn recurse(
        n: usize,
        allow_loops: bool,
        used: &mut [bool],
        stack: &mut Vec<(usize, usize)>,
        visit: &mut impl FnMut(&[(usize, usize)]),
    ) {
        let Some(first) = (0..n).find(|&v| !used[v]) else {
            visit(stack);
            return;
        };
        used[first] = true;
        if allow_loops {
            stack.push((first, first));
            recurse(n, allow_loops, used, stack, visit);
            stack.pop();
        }
        for partner in first + 1..n {
            if used[partner] {
                continue;
            }
            used[partner] = true;
            stack.push((first, partner));
            recurse(n, allow_loops, used, stack, visit);
            stack.pop();
            used[partner] = false;
        }
        used[first] = false;
    }
    recurse(n, allow_loops, &mut used, &mut stack, visit);
}

/// Every perfect matching of the complete graph on `n` vertices, loops
/// included iff `allow_loops`. For `n == 0` the single empty matching.
pub fn enumerate_perfect_matchings(
    n: usize,
    allow_loops: bool,
    limits: &EnumerationLimits,
) -> Result<Vec<Matching>, MatchGraphError> {
    limits.check(n, allow_loops)?;
    let mut out = Vec::new();
    for_each_perfect_matching(n, allow_loops, &mut |pairs| {
        out.push(Matching {
            pairs: pairs.to_vec(),
        });
    });
    Ok(out)
}

/// `(n-1)!! = 1 × 3 × … × (n-1)` for even `n`, `0` for odd `n`, `1` for
/// `n == 0`.
pub fn pmp_count(n: usize) -> Result<u128, MatchGraphError> {
    if n == 0 {
        return Ok(1);
    }
    if n % 2 == 1 {
        return Ok(0);
    }
    let mut acc: u128 = 1;
    let mut k: u128 = 1;
    while k <= (n as u128 - 1) {
        acc = acc
            .checked_mul(k)
            .ok_or(MatchGraphError::CountOverflow(n))?;
        k += 2;
    }
    Ok(acc)
}

/// Number of perfect matchings of the complete graph with loops, i.e. the
/// cardinality of `enumerate_perfect_matchings(n, loops)`. Computed by the
/// same lowest-vertex recursion (loop it, or pair it with one of the `n-1`
/// others) without materializing the matchings; no closed form is claimed.
pub fn spm_count(n: usize, limits: &EnumerationLimits) -> Result<u128, MatchGraphError> {
    limits.check(n, true)?;
    let mut prev: u128 = 1; // n = 0
    let mut cur: u128 = 1; // n = 1
    if n == 0 {
        return Ok(prev);
    }
    for k in 2..=n {
        let paired = (k as u128 - 1)
            .checked_mul(prev)
            .ok_or(MatchGraphError::CountOverflow(n))?;
        let next = cur
            .checked_add(paired)
            .ok_or(MatchGraphError::CountOverflow(n))?;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Hafnian by direct summation over loopless perfect matchings.
///
/// Returns 1 for the empty matrix and 0 for odd dimension.
pub fn haf_bruteforce(
    a: &SymmetricMatrix,
    limits: &EnumerationLimits,
) -> Result<C64, MatchGraphError> {
    let n = a.dim();
    limits.check(n, false)?;
    if n % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let mut sum = C64::new(0.0, 0.0);
    for_each_perfect_matching(n, false, &mut |pairs| {
        sum += pairs.iter().map(|&(i, j)| a.get(i, j)).product::<C64>();
    });
    if n == 0 {
        sum = C64::new(1.0, 0.0);
    }
    Ok(sum)
}

/// Loop hafnian by direct summation over loop-allowing perfect matchings;
/// the diagonal entry `A[i][i]` is the weight of the loop `(i, i)`.
pub fn lhaf_bruteforce(
    a: &SymmetricMatrix,
    limits: &EnumerationLimits,
) -> Result<C64, MatchGraphError> {
    let n = a.dim();
    limits.check(n, true)?;
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut sum = C64::new(0.0, 0.0);
    for_each_perfect_matching(n, true, &mut |pairs| {
        sum += pairs.iter().map(|&(i, j)| a.get(i, j)).product::<C64>();
    });
    Ok(sum)
}

/// Permanent by Ryser inclusion-exclusion with Gray-code subset iteration,
/// `O(n 2^n)`. The input need not be symmetric, only square.
pub fn permanent(w: &CMat, limits: &EnumerationLimits) -> Result<C64, MatchGraphError> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(MatchGraphError::NotSquare {
            rows: w.nrows(),
            cols: w.ncols(),
        });
    }
    if n > limits.max_permanent_dim {
        return Err(MatchGraphError::CapExceeded {
            n,
            cap: limits.max_permanent_dim,
        });
    }
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut row_sums = vec![C64::new(0.0, 0.0); n];
    let mut total = C64::new(0.0, 0.0);
    let mut prev_gray: u64 = 0;
    let mut popcount: u32 = 0;
    for k in 1u64..(1u64 << n) {
        let gray = k ^ (k >> 1);
        let flipped = gray ^ prev_gray;
        let j = flipped.trailing_zeros() as usize;
        if gray & flipped != 0 {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs += w[(i, j)];
            }
            popcount += 1;
        } else {
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs -= w[(i, j)];
            }
            popcount -= 1;
        }
        prev_gray = gray;
        let prod: C64 = row_sums.iter().product();
        if popcount % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    // total = Σ_{S≠∅} (-1)^{|S|} Π_i r_i(S); the overall (-1)^n flips it back.
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}

/// Adjacency matrix of the six-vertex example graph with loops at vertices
/// 1 and 5 (1-based labels): haf = 1, lhaf = 2.
#[cfg(test)]
pub(crate) fn example_graph_g1() -> SymmetricMatrix {
    let rows: [[f64; 6]; 6] = [
        [1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    ];
    SymmetricMatrix::from_fn(6, |i, j| C64::new(rows[i][j], 0.0))
}
