//! Delayed-phase Pascal triangles and the parity-vector density bound.
//!
//! A cutoff function `tau` delays the moment each column of Pascal's
//! triangle starts accumulating: entry `x[n][i]` obeys
//!
//! ```text
//! x[n][0] = 1                                   (unconditionally)
//! x[n][i] = x[n-1][i] + x[n-1][i-1]   if tau(i) <= n
//! x[n][i] = 0                         if tau(i) > n
//! ```
//!
//! `tau(i) = i` recovers Pascal's triangle.  `tau(i) = 2i` produces the
//! triangle that counts parity vectors whose ones-count never falls below
//! half the prefix length: column `i` of row `n` counts the admissible
//! vectors of length `n` with exactly `i` zeros, which can exist only once
//! `n >= 2i`.  Row sums of that triangle therefore bound how many residues
//! modulo `2^k` can avoid a weak drop, giving the density bound
//! `2^m / 2^k * prod_{n=0..m} (2n+1)/(n+1)` with `m = floor(k/2)`
//! (see [`density_bound`]).
//!
//! The equivalent "column sum" definition
//! `x[n][i] = sum_{m=tau(i)-1}^{n-1} x[m][i-1]` (zero until `n >= tau(i)`)
//! is implemented separately in [`build_triangle_by_column_sums`] so the two
//! routes can be checked against each other.

use num_bigint::BigUint;
use num_integer::{binomial, Integer};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// The cutoff for the ordinary Pascal triangle.
pub fn tau_pascal(i: usize) -> usize {
    i
}

/// The delayed cutoff `tau(i) = 2i` studied throughout this crate.
pub fn tau_double(i: usize) -> usize {
    2 * i
}

/// A triangle built from a cutoff function.  Rows store entries up to the
/// last structurally nonzero column; missing entries are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauTriangle {
    rows: Vec<Vec<BigUint>>,
}

/// Builds `n_rows` rows (indices `0..n_rows`) with the row-wise recurrence.
///
/// `tau` must be nondecreasing on the probed range; `tau(0)` never
/// participates because column 0 is pinned to 1.
///
/// # Panics
///
/// Panics if `tau` is found to decrease.
pub fn build_triangle(tau: impl Fn(usize) -> usize, n_rows: usize) -> TauTriangle {
    let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n_rows);
    let mut max_col = 0usize; // widest active column so far
    for n in 0..n_rows {
        // Columns activate in order because tau is nondecreasing.
        while max_col + 1 <= n && tau(max_col + 1) <= n {
            assert!(
                tau(max_col + 1) >= tau(max_col),
                "cutoff must be nondecreasing: tau({}) = {} < tau({}) = {}",
                max_col + 1,
                tau(max_col + 1),
                max_col,
                tau(max_col)
            );
            max_col += 1;
        }
        let mut row = Vec::with_capacity(max_col + 1);
        row.push(BigUint::one());
        for i in 1..=max_col {
            let prev = rows.last().expect("row 0 has no active columns beyond 0");
            let above = prev.get(i).cloned().unwrap_or_else(BigUint::zero);
            let diag = prev.get(i - 1).cloned().unwrap_or_else(BigUint::zero);
            row.push(above + diag);
        }
        rows.push(row);
    }
    TauTriangle { rows }
}

/// Builds the same triangle from the column-sum definition.  Quadratic in
/// the row count; intended as an independent cross-check of
/// [`build_triangle`].
pub fn build_triangle_by_column_sums(tau: impl Fn(usize) -> usize, n_rows: usize) -> TauTriangle {
    let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n_rows);
    for n in 0..n_rows {
        let mut row = vec![BigUint::one()];
        for i in 1.. {
            if tau(i) > n || i > n {
                break;
            }
            // x[n][i] = sum of x[m][i-1] for m in [tau(i)-1, n-1].
            let start = tau(i).saturating_sub(1);
            let mut acc = BigUint::zero();
            for m in start..n {
                if let Some(v) = rows[m].get(i - 1) {
                    acc += v;
                }
            }
            row.push(acc);
        }
        rows.push(row);
    }
    TauTriangle { rows }
}

impl TauTriangle {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Row `n`, trimmed to the structurally nonzero columns.
    pub fn row(&self, n: usize) -> &[BigUint] {
        &self.rows[n]
    }

    /// Sum of row `n`.
    pub fn row_sum(&self, n: usize) -> BigUint {
        self.rows[n].iter().sum()
    }

    /// Last nonzero entry of row `n`.
    pub fn last_nonzero(&self, n: usize) -> &BigUint {
        self.rows[n]
            .iter()
            .rev()
            .find(|v| !v.is_zero())
            .expect("column 0 is always 1")
    }

    /// The odd-row view `y[n] = row(2n + 1)`.  Requires `2n + 1 < n_rows`.
    pub fn odd_row(&self, n: usize) -> &[BigUint] {
        self.row(2 * n + 1)
    }

    /// CSV emission: one line `n,entry,entry,...` per row (`rows-v1`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# rows-v1\n");
        for (n, row) in self.rows.iter().enumerate() {
            let entries: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{}\n", n, entries.join(",")));
        }
        out
    }

    /// JSON emission of `[row index, row sum]` pairs.
    pub fn row_sums_json(&self) -> String {
        let pairs: Vec<(usize, String)> = (0..self.n_rows())
            .map(|n| (n, self.row_sum(n).to_string()))
            .collect();
        serde_json::to_string_pretty(&pairs).expect("serializable")
    }
}

/// Predicts the next odd row from the previous one:
/// `y[n][i] = y[n-1][i-2] + 2*y[n-1][i-1] + y[n-1][i]` with `y[n][0] = 1`.
///
/// This is the row-skipping recurrence the odd rows of the `tau(i) = 2i`
/// triangle satisfy; it provides a second route to the row-sum closed form.
pub fn convolved_odd_row(prev: &[BigUint]) -> Vec<BigUint> {
    let n = prev.len(); // previous row is y[n-1] with n entries; y[n] has n+1
    let mut row = Vec::with_capacity(n + 1);
    row.push(BigUint::one());
    let get = |i: isize| -> BigUint {
        if i < 0 {
            BigUint::zero()
        } else {
            prev.get(i as usize).cloned().unwrap_or_else(BigUint::zero)
        }
    };
    for i in 1..=n {
        let i = i as isize;
        row.push(get(i - 2) + get(i - 1) * 2u32 + get(i));
    }
    row
}

/// The `n`-th Catalan number `binomial(2n, n) / (n + 1)`, exactly.
pub fn catalan(n: u64) -> BigUint {
    let c = binomial(BigUint::from(2 * n), BigUint::from(n));
    let (q, r) = c.div_rem(&BigUint::from(n + 1));
    debug_assert!(r.is_zero());
    q
}

/// The parity-vector density bound
/// `2^m / 2^k * prod_{n=0..m} (2n+1)/(n+1)` with `m = floor(k/2)`,
/// as an exact rational.
pub fn density_bound(k: u64) -> BigRational {
    let m = k / 2;
    let mut num = BigUint::one() << m as usize;
    let mut den = BigUint::one() << k as usize;
    for n in 0..=m {
        num *= BigUint::from(2 * n + 1);
        den *= BigUint::from(n + 1);
    }
    BigRational::new(num.into(), den.into())
}

/// Natural log of [`density_bound`], evaluated stably for `k` up to `10^6`.
///
/// Writing each factor as `(2n+1)/(n+1) = 2 * (1 - 1/(2n+2))`, the powers of
/// two collapse to `2^(2m+1-k)`, which is `2` for even `k` and `1` for odd
/// `k`.  What remains is a sum of `ln_1p` terms of total magnitude about
/// `ln(m)/2`, accumulated with Kahan compensation; the absolute error stays
/// far below the `1e-9` tolerance the callers rely on.
pub fn density_bound_log(k: u64) -> f64 {
    let m = k / 2;
    let mut sum = if k % 2 == 0 { std::f64::consts::LN_2 } else { 0.0 };
    let mut comp = 0.0f64; // Kahan compensation
    for n in 0..=m {
        let term = (-1.0 / (2.0 * n as f64 + 2.0)).ln_1p();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// The integer failure budget `2^m * prod_{n=0..m} (2n+1)/(n+1)` with
/// `m = floor(k/2)`: the number of length-`k` parity vectors the density
/// bound permits to avoid a weak drop.  Always an integer (it equals the
/// sum of triangle row `2m + 1`).
pub fn failure_budget(k: u64) -> BigUint {
    let m = k / 2;
    let mut c = BigUint::one();
    for t in 1..=m {
        c *= BigUint::from(4 * t + 2);
        let (q, r) = c.div_rem(&BigUint::from(t + 1));
        assert!(r.is_zero(), "budget recurrence must stay integral");
        c = q;
    }
    c
}

/// CSV table of density bounds `k, bound_num, bound_den, bound_float`
/// for `k` in `[1, k_max]` (`bounds-v1`).
pub fn density_bounds_csv(k_max: u64) -> String {
    let mut out = String::from("# bounds-v1\nk,bound_num,bound_den,bound_float\n");
    for k in 1..=k_max {
        let b = density_bound(k);
        let float = b.to_f64().unwrap_or(f64::NAN);
        out.push_str(&format!("{},{},{},{}\n", k, b.numer(), b.denom(), float));
    }
    out
}
