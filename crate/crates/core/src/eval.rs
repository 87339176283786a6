//! Numerical error measurement on grids and Monte Carlo samples, plus CSV
//! emission for function-comparison plots.
//!
//! Estimates are plain Riemann means: `l1_distance` returns
//! `volume * mean(|f-g|)` over the supplied points, `mse` the mean squared
//! difference. A seeded Monte Carlo path with a standard-error estimate is
//! available for dimensions where lattices explode.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cap on the total number of lattice points [`uniform_grid`] will produce.
pub const DEFAULT_POINT_CAP: usize = 50_000_000;

/// An axis-aligned box `[lower_1, upper_1) x ... x [lower_n, upper_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Shape(format!(
                "domain bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..lower.len() {
            if !lower[i].is_finite() || !upper[i].is_finite() || lower[i] >= upper[i] {
                return Err(Error::Domain(format!(
                    "axis {}: need finite lower < upper, got [{}, {}]",
                    i, lower[i], upper[i]
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    /// The symmetric box `[-half, half)^n`.
    pub fn symmetric(n: usize, half: f64) -> Result<Self> {
        Domain::new(vec![-half; n], vec![half; n])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    #[inline]
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    #[inline]
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *v >= *a && *v < *b)
    }
}

/// Lower-inclusive, upper-exclusive lattice with `count_per_axis` points per
/// axis, equally spaced.
pub fn uniform_grid(domain: &Domain, count_per_axis: usize) -> Result<Vec<Vec<f64>>> {
    uniform_grid_capped(domain, count_per_axis, DEFAULT_POINT_CAP)
}

/// [`uniform_grid`] with an explicit cap on the total point count.
pub fn uniform_grid_capped(
    domain: &Domain,
    count_per_axis: usize,
    cap: usize,
) -> Result<Vec<Vec<f64>>> {
    if count_per_axis == 0 {
        return Err(Error::Invalid("count_per_axis must be >= 1".into()));
    }
    let n = domain.dim();
    let total = count_per_axis
        .checked_pow(n as u32)
        .filter(|t| *t <= cap)
        .ok_or_else(|| {
            Error::Resource(format!(
                "{}^{} lattice points exceed the cap of {}",
                count_per_axis, n, cap
            ))
        })?;
    let steps: Vec<f64> = (0..n)
        .map(|i| (domain.upper[i] - domain.lower[i]) / count_per_axis as f64)
        .collect();
    let mut points = Vec::with_capacity(total);
    let mut index = vec![0usize; n];
    loop {
        let point: Vec<f64> = (0..n)
            .map(|i| domain.lower[i] + index[i] as f64 * steps[i])
            .collect();
        points.push(point);
        // Odometer increment, last axis fastest.
        let mut axis = n;
        loop {
            if axis == 0 {
                return Ok(points);
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < count_per_axis {
                break;
            }
            index[axis] = 0;
        }
    }
}

/// Seeded uniform sample of `count` points from the domain.
pub fn sample_uniform(domain: &Domain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_uniform_rng(domain, count, &mut rng)
}

pub fn sample_uniform_rng(domain: &Domain, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            (0..domain.dim())
                .map(|i| rng.random_range(domain.lower[i]..domain.upper[i]))
                .collect()
        })
        .collect()
}

/// Quadrature estimate of the L1 distance between `f` and `g` on the domain:
/// `volume * mean(|f - g|)` over the supplied points.
pub fn l1_distance<F, G>(f: F, g: G, domain: &Domain, points: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    if points.is_empty() {
        return Err(Error::Invalid("empty point list".into()));
    }
    let sum: f64 = points.iter().map(|p| (f(p) - g(p)).abs()).sum();
    Ok(domain.volume() * sum / points.len() as f64)
}

/// Mean squared difference between `f` and `g` over the points.
pub fn mse<F, G>(f: F, g: G, points: &[Vec<f64>]) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    if points.is_empty() {
        return Err(Error::Invalid("empty point list".into()));
    }
    let sum: f64 = points
        .iter()
        .map(|p| {
            let d = f(p) - g(p);
            d * d
        })
        .sum();
    Ok(sum / points.len() as f64)
}

/// Mean squared difference between two aligned value slices.
pub fn mse_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Shape(format!(
            "value slices have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte Carlo L1 distance estimate with standard error, for dimensions where
/// a lattice is impractical.
pub fn l1_distance_mc<F, G>(
    f: F,
    g: G,
    domain: &Domain,
    count: usize,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    if count < 2 {
        return Err(Error::Invalid("need at least 2 Monte Carlo samples".into()));
    }
    let points = sample_uniform(domain, count, seed);
    let diffs: Vec<f64> = points.iter().map(|p| (f(p) - g(p)).abs()).collect();
    let mean = diffs.iter().sum::<f64>() / count as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (count as f64 - 1.0);
    let volume = domain.volume();
    Ok(McEstimate {
        value: volume * mean,
        std_error: volume * (var / count as f64).sqrt(),
    })
}

/// Writes a `x1,...,xn,target,approx` CSV of both functions over the points.
///
/// Floats are printed in shortest round-trip form, so parsing the file
/// recovers the exact values.
pub fn emit_comparison_csv<F, G>(
    f: F,
    g: G,
    points: &[Vec<f64>],
    path: impl AsRef<Path>,
) -> Result<()>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let path = path.as_ref();
    if points.is_empty() {
        return Err(Error::Invalid("empty point list".into()));
    }
    let n = points[0].len();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for i in 1..=n {
            write!(w, "x{},", i)?;
        }
        writeln!(w, "target,approx")?;
        for p in points {
            for v in p {
                write!(w, "{},", v)?;
            }
            writeln!(w, "{},{}", f(p), g(p))?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
