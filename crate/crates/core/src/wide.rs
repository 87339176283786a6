//! Explicit wide interpolation targets: the 2k^4 comparison grid, the
//! admissible value set E0, and the width-2k^2 depth-3 network that
//! interpolates any E0 vector at every grid point.
//!
//! Grid points come in k^2 groups of 2k^2 consecutive points, spaced
//! 1/(4k^2) apart inside the interval (2j, 2j+1]. An E0 vector is positive
//! and more than doubles from each grid point to the next within a group;
//! that slack is exactly what keeps every second-difference value positive,
//! which in turn lets a sum of ReLU-activated piecewise-linear nodes
//! telescope back to the prescribed values.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::{Error as CrateError, Result};
use crate::net::{Activation, Layer, Network};

/// The 2k^4 comparison points, strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    k: usize,
    points: Vec<f64>,
}

impl GridSpec {
    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `x^(i + 2k^2 j) = 2j + 1 - (2k^2 - i) / (4k^2)` for `i = 1..=2k^2`,
/// `j = 0..k^2`.
pub fn grid_points(k: usize) -> Result<GridSpec> {
    if k < 2 {
        return Err(CrateError::Invalid(format!(
            "grid needs k >= 2, got k = {}",
            k
        )));
    }
    let group = 2 * k * k;
    let denom = (4 * k * k) as f64;
    let mut points = Vec::with_capacity(group * k * k);
    for j in 0..k * k {
        for i in 1..=group {
            points.push((2 * j + 1) as f64 - (group - i) as f64 / denom);
        }
    }
    Ok(GridSpec { k, points })
}

/// Why a vector is not an admissible E0 vector.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum E0Violation {
    #[error("expected 2k^4 = {expected} entries, found {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("entry {index} is {value}, but every entry must be > 0")]
    NonPositive { index: usize, value: f64 },
    #[error(
        "entries {index} and {next_index} are {value} and {next}: within a group each entry must be strictly less than half the next"
    )]
    ChainBroken {
        index: usize,
        next_index: usize,
        value: f64,
        next: f64,
    },
}

impl E0Violation {
    /// Index of the first offending entry.
    pub fn index(&self) -> usize {
        match self {
            E0Violation::LengthMismatch { .. } => 0,
            E0Violation::NonPositive { index, .. } => *index,
            E0Violation::ChainBroken { index, .. } => *index,
        }
    }
}

/// Checks positivity and the strict per-group doubling chain
/// `a^(m) < a^(m+1) / 2`.
pub fn check_e0(a: &[f64], k: usize) -> std::result::Result<(), E0Violation> {
    let group = 2 * k * k;
    let expected = group * k * k;
    if a.len() != expected {
        return Err(E0Violation::LengthMismatch {
            expected,
            actual: a.len(),
        });
    }
    for (index, &value) in a.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(E0Violation::NonPositive { index, value });
        }
    }
    for j in 0..k * k {
        for i in 0..group - 1 {
            let index = j * group + i;
            if a[index] >= 0.5 * a[index + 1] {
                return Err(E0Violation::ChainBroken {
                    index,
                    next_index: index + 1,
                    value: a[index],
                    next: a[index + 1],
                });
            }
        }
    }
    Ok(())
}

/// A validated E0 vector.
#[derive(Clone, Debug, PartialEq)]
pub struct E0Vector {
    k: usize,
    values: Vec<f64>,
}

impl E0Vector {
    pub fn new(k: usize, values: Vec<f64>) -> Result<Self> {
        check_e0(&values, k)?;
        Ok(E0Vector { k, values })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes one value per line.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for v in &self.values {
            text.push_str(&format!("{}\n", v));
        }
        fs::write(path, text).map_err(|e| CrateError::io(path, e))
    }

    /// Reads one value per line and validates the result.
    pub fn load_csv(path: impl AsRef<Path>, k: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CrateError::io(path, e))?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(line.parse::<f64>().map_err(|e| {
                CrateError::parse(path, format!("line {}: {}", lineno + 1, e))
            })?);
        }
        E0Vector::new(k, values)
    }
}

/// Shapes of a wide target and its narrow competitor for a given scale k:
/// wide means width 2k^2 at depth 3, narrow means width ceil(3 k^1.5) at
/// depth k+2, with parameters bounded in [-b, b].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WideVsNarrowSpec {
    pub k: usize,
    /// Input dimension (the wide construction reads only the first
    /// coordinate, so any n >= 1 works).
    pub n: usize,
    /// Bound b on the narrow network's parameters.
    pub param_bound: f64,
}

impl WideVsNarrowSpec {
    pub fn new(k: usize, n: usize, param_bound: f64) -> Result<Self> {
        if k < 2 {
            return Err(CrateError::Invalid(format!("need k >= 2, got {}", k)));
        }
        if n == 0 {
            return Err(CrateError::Invalid("input dimension must be >= 1".into()));
        }
        if !(param_bound.is_finite() && param_bound > 0.0) {
            return Err(CrateError::Invalid("param_bound must be > 0".into()));
        }
        Ok(WideVsNarrowSpec { k, n, param_bound })
    }

    pub fn wide_width(&self) -> usize {
        2 * self.k * self.k
    }

    pub fn wide_depth(&self) -> usize {
        3
    }

    pub fn narrow_width(&self) -> usize {
        (3.0 * (self.k as f64).powf(1.5)).ceil() as usize
    }

    pub fn narrow_depth(&self) -> usize {
        self.k + 2
    }

    /// The separation statement needs k >= n + 4.
    pub fn supports_separation_claim(&self) -> bool {
        self.k >= self.n + 4
    }
}

/// Largest per-step ratio used by [`sample_e0`]; 2.5^(2k^2 - 1) must stay
/// comfortably inside f64 range, which holds through k = 5 and beyond.
pub const SAMPLE_RATIO_MAX: f64 = 2.5;
const SAMPLE_RATIO_MIN: f64 = 2.05;

/// Draws a random E0 vector: each group starts uniformly in [0.5, 1] and
/// grows by per-step ratios uniform in (2.05, 2.5]. Deterministic in the
/// seed.
pub fn sample_e0(k: usize, seed: u64) -> Result<E0Vector> {
    if k < 2 {
        return Err(CrateError::Invalid(format!(
            "sampling needs k >= 2, got k = {}",
            k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group = 2 * k * k;
    let mut values = Vec::with_capacity(group * k * k);
    for _ in 0..k * k {
        let mut v = rng.random_range(0.5..=1.0);
        values.push(v);
        for _ in 1..group {
            v *= rng.random_range(SAMPLE_RATIO_MIN..=SAMPLE_RATIO_MAX);
            values.push(v);
        }
    }
    E0Vector::new(k, values)
}

/// Per-group second differences: `v_1 = a^(1)`, `v_2 = a^(2) - 2 a^(1)`,
/// `v_i = a^(i) - 2 a^(i-1) + a^(i-2)`. All outputs are strictly positive
/// for E0 vectors, and `sum_{i<=i'} v_i (i' - i + 1) = a^(i')` telescopes.
pub fn second_layer_values(a: &E0Vector) -> Vec<f64> {
    let k = a.k();
    let group = 2 * k * k;
    let values = a.values();
    let mut out = Vec::with_capacity(values.len());
    for j in 0..k * k {
        let g = &values[j * group..(j + 1) * group];
        for i in 0..group {
            let v = match i {
                0 => g[0],
                1 => g[1] - 2.0 * g[0],
                _ => g[i] - 2.0 * g[i - 1] + g[i - 2],
            };
            out.push(v);
        }
    }
    out
}

/// Converts a piecewise-linear function with breakpoints at the integers
/// `0..basis_size` (given by its values there) into coefficients over the
/// shifted ReLU basis `{(x - m)+ : m = 0..basis_size}` plus a bias.
///
/// The reconstruction `bias + sum_m w_m (x - m)+` matches the prescribed
/// values at every integer knot exactly; left of 0 it is constant (the
/// basis forces that), and beyond the last knot it continues with the final
/// slope.
pub fn pwl_to_affine(values_at_integers: &[f64], basis_size: usize) -> Result<(Vec<f64>, f64)> {
    if values_at_integers.len() != basis_size {
        return Err(CrateError::Shape(format!(
            "{} knot values supplied for a basis of size {}",
            values_at_integers.len(),
            basis_size
        )));
    }
    if basis_size == 0 {
        return Err(CrateError::Invalid("basis must be non-empty".into()));
    }
    let bias = values_at_integers[0];
    let mut weights = vec![0.0; basis_size];
    let mut prev_slope = 0.0;
    for m in 0..basis_size.saturating_sub(1) {
        let slope = values_at_integers[m + 1] - values_at_integers[m];
        weights[m] = slope - prev_slope;
        prev_slope = slope;
    }
    Ok((weights, bias))
}

/// Builds the width-2k^2, depth-3 interpolating network for an E0 vector.
///
/// Layer 1 is the integer-shifted ReLU basis on the first coordinate (all
/// other coordinates get zero weights, so the function ignores them). Layer
/// 2 realizes, per node i, the piecewise-linear function that rises from
/// zero to the node's second-difference value across each group's grid
/// points; layer 3 sums the ReLU-activated nodes. The forward pass at every
/// grid point (embedded as `(x, 0, ..., 0)`) reproduces the E0 vector.
pub fn build_wide_target(k: usize, a: &E0Vector, n: usize) -> Result<Network> {
    if a.k() != k {
        return Err(CrateError::Invalid(format!(
            "vector was sampled for k = {} but k = {} requested",
            a.k(),
            k
        )));
    }
    if n == 0 {
        return Err(CrateError::Invalid("input dimension must be >= 1".into()));
    }
    let width = 2 * k * k;
    let v = second_layer_values(a);

    // Layer 1: node m computes (x_1 - m)+.
    let mut rows = Vec::with_capacity(width);
    let mut biases = Vec::with_capacity(width);
    for m in 0..width {
        let mut row = vec![0.0; n];
        row[0] = 1.0;
        rows.push(row);
        biases.push(-(m as f64));
    }
    let layer1 = Layer::from_rows(rows, biases, Activation::Relu)?;

    // Layer 2: node i interpolates its prescribed knot values. On the
    // in-group interval [2j, 2j+1] the node follows the line through
    // (x^(i + 2k^2 j) - 1/(4k^2), 0) with slope 4k^2 v_{i,j}; evaluating
    // that line at the two integer endpoints gives knot values that are
    // exact integer multiples of v_{i,j}. Odd intervals interpolate
    // linearly between the groups.
    let mut rows = Vec::with_capacity(width);
    let mut biases = Vec::with_capacity(width);
    let group = width;
    for i in 1..=width {
        let mut knots = vec![0.0; width];
        for j in 0..k * k {
            let vij = v[j * group + (i - 1)];
            // Line value at 2j+1 is v * (2k^2 - i + 1); at 2j it is
            // v * (1 - i - 2k^2).
            let right = (group as f64 - i as f64 + 1.0) * vij;
            let left = (1.0 - i as f64 - group as f64) * vij;
            knots[2 * j] = left;
            if 2 * j + 1 < width {
                knots[2 * j + 1] = right;
            }
        }
        let (w, b) = pwl_to_affine(&knots, width)?;
        rows.push(w);
        biases.push(b);
    }
    let layer2 = Layer::from_rows(rows, biases, Activation::Relu)?;

    // Layer 3: sum of the activated nodes.
    let layer3 = Layer::from_rows(vec![vec![1.0; width]], vec![0.0], Activation::Identity)?;

    Network::new(n, vec![layer1, layer2, layer3])
}

/// Largest relative interpolation error of `net` over all grid points,
/// each embedded as `(x, 0, ..., 0)`.
pub fn max_grid_relative_error(net: &Network, a: &E0Vector) -> Result<f64> {
    let grid = grid_points(a.k())?;
    if a.len() != grid.len() {
        return Err(CrateError::Shape(format!(
            "vector has {} entries but the grid has {} points",
            a.len(),
            grid.len()
        )));
    }
    let n = net.input_dim();
    let mut x = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for (point, want) in grid.points().iter().zip(a.values()) {
        x[0] = *point;
        let got = net.forward_scalar(&x)?;
        worst = worst.max((got - want).abs() / want.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hand_values_k3() {
        let g = grid_points(3).unwrap();
        assert_eq!(g.len(), 162);
        assert!((g.points()[0] - 19.0 / 36.0).abs() < 1e-15);
        assert_eq!(g.points()[17], 1.0);
        assert!((g.points()[18] - (3.0 - 17.0 / 36.0)).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_small_k() {
        assert!(grid_points(1).is_err());
    }

    #[test]
    fn grid_is_strictly_increasing_with_in_group_gap() {
        for k in [2, 3, 4] {
            let g = grid_points(k).unwrap();
            let gap = 1.0 / (4 * k * k) as f64;
            let group = 2 * k * k;
            for m in 1..g.len() {
                assert!(g.points()[m] > g.points()[m - 1], "k={} m={}", k, m);
                if m % group != 0 {
                    assert!(
                        (g.points()[m] - g.points()[m - 1] - gap).abs() < 1e-12,
                        "k={} m={}",
                        k,
                        m
                    );
                }
            }
        }
    }

    #[test]
    fn check_e0_accepts_ratio_above_two() {
        let k: usize = 2;
        let len = 2 * k.pow(4);
        let group = 2 * k * k;
        let mut a = Vec::new();
        for _ in 0..len / group {
            let mut v = 1.0;
            for _ in 0..group {
                a.push(v);
                v *= 2.2;
            }
        }
        assert!(check_e0(&a, k).is_ok());
    }

    #[test]
    fn check_e0_rejects_zero_entry() {
        let k: usize = 2;
        let mut a = vec![1.0; 2 * k.pow(4)];
        for (i, v) in a.iter_mut().enumerate() {
            *v = 3.0f64.powi(i as i32 % 8);
        }
        a[5] = 0.0;
        assert_eq!(check_e0(&a, k).unwrap_err().index(), 5);
    }

    #[test]
    fn check_e0_rejects_exact_doubling() {
        // (1, 2) sits exactly on the boundary and must fail the strict check.
        let k = 2;
        let group = 2 * k * k;
        let mut a = Vec::new();
        for _ in 0..k * k {
            let mut v = 1.0;
            for step in 0..group {
                a.push(v);
                v *= if step == 0 { 2.0 } else { 2.2 };
            }
        }
        match check_e0(&a, k) {
            Err(E0Violation::ChainBroken { index, .. }) => assert_eq!(index % group, 0),
            other => panic!("expected chain violation, got {:?}", other),
        }
    }

    #[test]
    fn sample_e0_is_deterministic_and_admissible() {
        for seed in 0..20 {
            let a = sample_e0(3, seed).unwrap();
            assert!(check_e0(a.values(), 3).is_ok());
        }
        assert_eq!(
            sample_e0(4, 7).unwrap().values(),
            sample_e0(4, 7).unwrap().values()
        );
    }

    #[test]
    fn sample_e0_magnitude_stays_representable() {
        let a = sample_e0(5, 11).unwrap();
        let cap = SAMPLE_RATIO_MAX.powi(2 * 25 - 1);
        let max = a.values().iter().cloned().fold(0.0f64, f64::max);
        assert!(max < cap);
        assert!(max.is_finite());
    }

    #[test]
    fn second_differences_hand_case() {
        // Group values (1, 3, 8) -> (1, 1, 3); (1, 2.1) boundary-near -> 0.1.
        let g = second_differences_of(&[1.0, 3.0, 8.0]);
        assert_eq!(g, vec![1.0, 1.0, 3.0]);
        let g = second_differences_of(&[1.0, 2.1]);
        assert!((g[1] - 0.1).abs() < 1e-12);
    }

    fn second_differences_of(group: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..group.len() {
            out.push(match i {
                0 => group[0],
                1 => group[1] - 2.0 * group[0],
                _ => group[i] - 2.0 * group[i - 1] + group[i - 2],
            });
        }
        out
    }

    #[test]
    fn second_differences_positive_and_telescoping() {
        let a = sample_e0(3, 42).unwrap();
        let v = second_layer_values(&a);
        assert!(v.iter().all(|x| *x > 0.0));
        let group = 18;
        for j in 0..9 {
            for iprime in 0..group {
                let mut acc = 0.0;
                for i in 0..=iprime {
                    acc += v[j * group + i] * (iprime - i + 1) as f64;
                }
                let want = a.values()[j * group + iprime];
                assert!(
                    ((acc - want) / want).abs() < 1e-12,
                    "j={} i'={} acc={} want={}",
                    j,
                    iprime,
                    want,
                    acc
                );
            }
        }
    }

    #[test]
    fn pwl_hat_function() {
        let (w, b) = pwl_to_affine(&[0.0, 1.0, 0.0], 3).unwrap();
        assert_eq!(w, vec![1.0, -2.0, 0.0]);
        assert_eq!(b, 0.0);
        // Beyond the last knot the slope -1 continues.
        let eval = |x: f64| b + w.iter().enumerate().map(|(m, c)| c * (x - m as f64).max(0.0)).sum::<f64>();
        assert_eq!(eval(3.0), -1.0);
        assert_eq!(eval(4.0), -2.0);
    }

    #[test]
    fn pwl_constant_function() {
        let (w, b) = pwl_to_affine(&[2.5, 2.5, 2.5, 2.5], 4).unwrap();
        assert!(w.iter().all(|c| *c == 0.0));
        assert_eq!(b, 2.5);
    }

    #[test]
    fn wide_target_shape_k3() {
        let a = sample_e0(3, 1).unwrap();
        let net = build_wide_target(3, &a, 1).unwrap();
        assert_eq!(net.width(), 18);
        assert_eq!(net.depth(), 3);
        assert_eq!(net.input_dim(), 1);
    }

    #[test]
    fn wide_target_interpolates_k3() {
        let a = sample_e0(3, 5).unwrap();
        let net = build_wide_target(3, &a, 1).unwrap();
        let err = max_grid_relative_error(&net, &a).unwrap();
        assert!(err <= 1e-9, "max relative error {}", err);
    }

    #[test]
    fn wide_target_ignores_other_coordinates() {
        let a = sample_e0(3, 9).unwrap();
        let net = build_wide_target(3, &a, 2).unwrap();
        let grid = grid_points(3).unwrap();
        for &x in grid.points().iter().step_by(17) {
            let base = net.forward_scalar(&[x, 0.0]).unwrap();
            for t in [-1.0, 1.0] {
                assert_eq!(net.forward_scalar(&[x, t]).unwrap(), base);
            }
        }
    }

    #[test]
    fn wide_vs_narrow_shapes_match_reference_table() {
        for (k, narrow_w, narrow_d) in [(3usize, 16usize, 5usize), (4, 24, 6), (5, 34, 7)] {
            let spec = WideVsNarrowSpec::new(k, 1, 1.0).unwrap();
            assert_eq!(spec.wide_width(), 2 * k * k);
            assert_eq!(spec.wide_depth(), 3);
            assert_eq!(spec.narrow_width(), narrow_w);
            assert_eq!(spec.narrow_depth(), narrow_d);
        }
        assert!(WideVsNarrowSpec::new(5, 1, 1.0).unwrap().supports_separation_claim());
        assert!(!WideVsNarrowSpec::new(4, 1, 1.0).unwrap().supports_separation_claim());
        assert!(WideVsNarrowSpec::new(1, 1, 1.0).is_err());
        assert!(WideVsNarrowSpec::new(3, 1, 0.0).is_err());
    }

    #[test]
    fn e0_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let a = sample_e0(2, 3).unwrap();
        a.save_csv(&path).unwrap();
        let back = E0Vector::load_csv(&path, 2).unwrap();
        assert_eq!(a.values(), back.values());
    }
}
