//! Chinese-restaurant processes, regenerative compositions, and the stable
//! laws that describe their large-`n` behaviour.
//!
//! The seating rule with parameters `(a, theta)`: customer `n + 1` joins an
//! occupied table of size `n_t` with probability `(n_t - a) / (n + theta)`
//! and opens a new table with probability `(theta + k a) / (n + theta)`.
//! The ordered variant also places each new table: immediately left of an
//! existing table (weight `a` per slot) or at the right end (weight
//! `theta`), which makes the left-to-right table sizes a regenerative
//! composition whose first-part law is [`crate::laws::decrement`].

use crate::laws::decrement_row;
use crate::rng::RngStream;
use crate::{Error, Result};
use rand::distributions::Distribution;
use statrs::distribution::Beta;

fn check_crp_params(a: f64, theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) || theta < -a {
        return Err(Error::Params(format!(
            "seating rule needs 0 <= a <= 1 and theta >= -a, got a = {a}, theta = {theta}"
        )));
    }
    Ok(())
}

/// Unordered seating process; joins run in expected O(1) per customer via
/// rejection on a uniformly chosen existing customer.
pub struct CrpState {
    a: f64,
    theta: f64,
    /// Table index of each seated customer.
    customers: Vec<u32>,
    /// Table sizes.
    seats: Vec<u64>,
}

impl CrpState {
    pub fn new(a: f64, theta: f64) -> Result<CrpState> {
        check_crp_params(a, theta)?;
        Ok(CrpState { a, theta, customers: Vec::new(), seats: Vec::new() })
    }

    pub fn n(&self) -> u64 {
        self.customers.len() as u64
    }

    pub fn table_count(&self) -> usize {
        self.seats.len()
    }

    pub fn seats(&self) -> &[u64] {
        &self.seats
    }

    pub fn step(&mut self, rng: &mut RngStream) {
        let n = self.customers.len();
        if n == 0 {
            self.customers.push(0);
            self.seats.push(1);
            return;
        }
        let k = self.seats.len() as f64;
        let p_new = (self.theta + k * self.a) / (n as f64 + self.theta);
        if rng.uniform() < p_new {
            self.customers.push(self.seats.len() as u32);
            self.seats.push(1);
            return;
        }
        // join an existing table with probability proportional to n_t - a:
        // pick a uniform customer, accept their table w.p. (n_t - a) / n_t
        loop {
            let t = self.customers[rng.below(n)];
            let size = self.seats[t as usize] as f64;
            if rng.uniform() < (size - self.a) / size {
                self.customers.push(t);
                self.seats[t as usize] += 1;
                return;
            }
        }
    }

    pub fn run_to(&mut self, n: u64, rng: &mut RngStream) {
        while self.n() < n {
            self.step(rng);
        }
    }
}

/// Seat `n` customers and return the final state.
pub fn crp_run(a: f64, theta: f64, n: u64, rng: &mut RngStream) -> Result<CrpState> {
    let mut state = CrpState::new(a, theta)?;
    state.run_to(n, rng);
    Ok(state)
}

/// Ordered seating process: tables kept left to right. O(k) per step; meant
/// for moderate sizes and cross-checks.
pub struct OrderedCrp {
    a: f64,
    theta: f64,
    tables: Vec<u64>,
    n: u64,
}

impl OrderedCrp {
    pub fn new(a: f64, theta: f64) -> Result<OrderedCrp> {
        check_crp_params(a, theta)?;
        Ok(OrderedCrp { a, theta, tables: Vec::new(), n: 0 })
    }

    pub fn tables(&self) -> &[u64] {
        &self.tables
    }

    pub fn step(&mut self, rng: &mut RngStream) {
        self.n += 1;
        if self.tables.is_empty() {
            self.tables.push(1);
            return;
        }
        let n = (self.n - 1) as f64;
        let k = self.tables.len();
        // weights: each table n_t - a, each left-adjacent slot a, right end theta
        let mut weights = Vec::with_capacity(2 * k + 1);
        for &t in &self.tables {
            weights.push(t as f64 - self.a);
            weights.push(self.a);
        }
        weights.push(self.theta);
        debug_assert!((weights.iter().sum::<f64>() - (n + self.theta)).abs() < 1e-9);
        let idx = rng.pick_weighted(&weights);
        if idx == 2 * k {
            self.tables.push(1);
        } else if idx % 2 == 0 {
            self.tables[idx / 2] += 1;
        } else {
            self.tables.insert(idx / 2, 1);
        }
    }

    pub fn run_to(&mut self, n: u64, rng: &mut RngStream) {
        while self.n < n {
            self.step(rng);
        }
    }
}

/// Composition of `n` drawn by recursive first-part sampling from the
/// decrement law. Agrees with the left-to-right table sizes of
/// [`OrderedCrp`].
pub fn regenerative_composition(
    a: f64,
    theta: f64,
    n: u32,
    rng: &mut RngStream,
) -> Result<Vec<u32>> {
    check_crp_params(a, theta)?;
    let mut parts = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let row = decrement_row(&a, &theta, remaining)?;
        let m = rng.pick_weighted(&row) as u32 + 1;
        parts.push(m);
        remaining -= m;
    }
    Ok(parts)
}

/// Size-biased stick lengths of the `(a, theta)` frequency model: `k` sticks
/// `x_j = W_j prod_{i<j} (1 - W_i)` with `W_j ~ Beta(1 - a, theta + j a)`.
pub fn gem_sticks(a: f64, theta: f64, k: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    check_crp_params(a, theta)?;
    if a >= 1.0 {
        return Err(Error::Params("stick lengths need a < 1".into()));
    }
    let mut out = Vec::with_capacity(k);
    let mut remaining = 1.0;
    for j in 1..=k {
        let b = theta + j as f64 * a;
        if b <= 0.0 {
            return Err(Error::Params(format!("stick {j} needs theta + j a > 0")));
        }
        let beta = Beta::new(1.0 - a, b)
            .map_err(|e| Error::Params(format!("stick distribution: {e}")))?;
        let w = beta.sample(rng);
        out.push(w * remaining);
        remaining *= 1.0 - w;
    }
    Ok(out)
}

/// Positive stable variable with Laplace transform `exp(-lambda^a)`,
/// via the sine-ratio representation driven by one uniform and one
/// exponential variable.
pub fn stable_sample(a: f64, rng: &mut RngStream) -> Result<f64> {
    if !(0.0 < a && a < 1.0) {
        return Err(Error::Params(format!("stable index must be in (0,1), got {a}")));
    }
    let u = std::f64::consts::PI * rng.uniform_open();
    let w = rng.exponential();
    let s = (a * u).sin() / u.sin().powf(1.0 / a);
    Ok(s * ((((1.0 - a) * u).sin()) / w).powf((1.0 - a) / a))
}

/// Generalized Mittag-Leffler variable `S^{-a}` for `S` stable(`a`); its
/// moments are `E[M^p] = Gamma(p + 1) / Gamma(p a + 1)`.
pub fn mittag_leffler_sample(a: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(stable_sample(a, rng)?.powf(-a))
}
