//! Constructive width-(n+4) universal approximator.
//!
//! The pipeline turns grid samples of a target function into a single ReLU
//! network of width n+4 over R^n:
//!
//! 1. [`decompose_grid`] covers the sampled box with weighted cubes (one per
//!    nonzero grid cell, weight = center sample).
//! 2. [`select_delta`] picks the chop parameter from the accuracy budget.
//! 3. [`build_block`] emits, per cube, a width-(n+4) sub-network whose last
//!    scratch node carves the cube's trapezoid bump (the continuous
//!    surrogate of the cube's indicator).
//! 4. [`build_universal`] chains the blocks, each followed by a recording
//!    layer that adds `weight * bump` onto one of two accumulator nodes, and
//!    reads out positive minus negative accumulator.
//!
//! Node layout inside the chained network (0-based, width n+4):
//! nodes `0..n` carry the shifted coordinates `(x_j + N)+`, node `n` is the
//! positive accumulator, node `n+1` the negative accumulator, and nodes
//! `n+2`, `n+3` are the scratch pair used by the chopping layers.
//!
//! Each dimension is chopped by a 4-layer sub-network; the running bump is
//! combined across dimensions as the conjunction `L_k = (L_{k-1} + T_k - 1)+`
//! of 1-D trapezoids `T_k`, which stays within the two scratch nodes and is
//! exactly the hyper-trapezoid [`trapezoid_oracle`] computes in closed form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Domain;
use crate::net::{Activation, Layer, Network};

/// Chopping layers per input dimension.
pub const LAYERS_PER_DIM: usize = 4;

/// Relative slack when checking that cube coordinates sit inside the
/// truncation box (cell edges are computed in floating point).
const BOX_TOLERANCE: f64 = 1e-9;

/// An axis-aligned box with a signed weight (the height of a cover cube).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub weight: f64,
}

impl Cube {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, weight: f64) -> Result<Self> {
        let cube = Cube {
            lower,
            upper,
            weight,
        };
        cube.validate()?;
        Ok(cube)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::Shape(format!(
                "cube bounds have lengths {} and {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for i in 0..self.lower.len() {
            if !self.lower[i].is_finite() || !self.upper[i].is_finite() {
                return Err(Error::Domain(format!("cube axis {} is not finite", i)));
            }
            if self.lower[i] >= self.upper[i] {
                return Err(Error::Domain(format!(
                    "cube axis {}: lower {} must be below upper {}",
                    i, self.lower[i], self.upper[i]
                )));
            }
        }
        if !self.weight.is_finite() {
            return Err(Error::Domain("cube weight is not finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    fn inside_box(&self, half_width: f64) -> bool {
        let slack = BOX_TOLERANCE * half_width.max(1.0);
        self.lower.iter().all(|a| *a >= -half_width - slack)
            && self.upper.iter().all(|b| *b <= half_width + slack)
    }
}

/// Everything needed to rebuild (and audit) one constructed approximator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximationPlan {
    /// Input dimension.
    pub n: usize,
    /// Truncation half-width; the construction works on `[-N, N]^n`.
    #[serde(rename = "N")]
    pub half_width: f64,
    /// Target L1 accuracy.
    pub epsilon: f64,
    /// Estimated total mass of the target function.
    #[serde(rename = "C")]
    pub total_mass: f64,
    /// Chop parameter, as produced by [`select_delta`].
    pub delta: f64,
    pub cubes: Vec<Cube>,
}

impl ApproximationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Invalid("plan dimension must be positive".into()));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::Invalid("truncation half-width must be > 0".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Invalid("epsilon must be > 0".into()));
        }
        if !(self.total_mass.is_finite() && self.total_mass >= 0.0) {
            return Err(Error::Invalid("total mass must be >= 0".into()));
        }
        check_delta(self.delta)?;
        for (j, cube) in self.cubes.iter().enumerate() {
            cube.validate()?;
            if cube.dim() != self.n {
                return Err(Error::Shape(format!(
                    "cube {} has dimension {} but plan has n = {}",
                    j,
                    cube.dim(),
                    self.n
                )));
            }
            if !cube.inside_box(self.half_width) {
                return Err(Error::Domain(format!(
                    "cube {} leaves the truncation box [-{}, {}]^{}",
                    j, self.half_width, self.half_width, self.n
                )));
            }
        }
        Ok(())
    }

    /// Sum of per-cube analytic error bounds: the guaranteed L1 gap between
    /// the weighted-indicator sum and the constructed network.
    pub fn total_error_bound(&self) -> f64 {
        self.cubes
            .iter()
            .map(|c| c.weight.abs() * l1_error_bound_unchecked(c, self.delta))
            .sum()
    }

    /// One report per cube: constructed depth and analytic L1 gap bound.
    pub fn block_reports(&self) -> Vec<BlockReport> {
        self.cubes
            .iter()
            .map(|cube| BlockReport {
                cube: cube.clone(),
                depth: LAYERS_PER_DIM * self.n + 1,
                l1_bound: l1_error_bound_unchecked(cube, self.delta),
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json =
            serde_json::to_string_pretty(self).map_err(|e| Error::parse(path, e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: ApproximationPlan =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Per-cube construction report.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub cube: Cube,
    /// Literal constructed depth: 4 chopping layers per dimension plus the
    /// recording layer.
    pub depth: usize,
    /// Analytic upper bound on the L1 gap between the cube's indicator and
    /// its trapezoid.
    pub l1_bound: f64,
}

/// Function samples at the cell centers of a regular grid over a box.
///
/// Values are stored row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSamples {
    domain: Domain,
    cells_per_axis: usize,
    values: Vec<f64>,
}

impl GridSamples {
    pub fn from_values(domain: Domain, cells_per_axis: usize, values: Vec<f64>) -> Result<Self> {
        if cells_per_axis == 0 {
            return Err(Error::Invalid("cells_per_axis must be >= 1".into()));
        }
        let expected = cells_per_axis
            .checked_pow(domain.dim() as u32)
            .ok_or_else(|| Error::Resource("cell count overflows".into()))?;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "{} values supplied but {}^{} cells expected",
                values.len(),
                cells_per_axis,
                domain.dim()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("sample {} is not finite", i)));
        }
        Ok(GridSamples {
            domain,
            cells_per_axis,
            values,
        })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(
        domain: Domain,
        cells_per_axis: usize,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        if cells_per_axis == 0 {
            return Err(Error::Invalid("cells_per_axis must be >= 1".into()));
        }
        let n = domain.dim();
        let total = cells_per_axis
            .checked_pow(n as u32)
            .ok_or_else(|| Error::Resource("cell count overflows".into()))?;
        let mut values = Vec::with_capacity(total);
        let mut center = vec![0.0; n];
        for flat in 0..total {
            cell_center(&domain, cells_per_axis, flat, &mut center);
            values.push(f(&center));
        }
        GridSamples::from_values(domain, cells_per_axis, values)
    }

    /// Reads `x1,...,xn,value` rows and maps each row to the grid cell that
    /// contains its coordinates. Every cell must be covered exactly once.
    pub fn from_csv(path: impl AsRef<Path>, domain: Domain, cells_per_axis: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let n = domain.dim();
        let total = cells_per_axis
            .checked_pow(n as u32)
            .ok_or_else(|| Error::Resource("cell count overflows".into()))?;
        let mut values: Vec<Option<f64>> = vec![None; total];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if lineno == 0 && fields[0].parse::<f64>().is_err() {
                continue; // header row
            }
            if fields.len() != n + 1 {
                return Err(Error::parse(
                    path,
                    format!("line {}: expected {} fields, found {}", lineno + 1, n + 1, fields.len()),
                ));
            }
            let mut point = Vec::with_capacity(n);
            for f in &fields[..n] {
                point.push(f.parse::<f64>().map_err(|e| {
                    Error::parse(path, format!("line {}: {}", lineno + 1, e))
                })?);
            }
            let value: f64 = fields[n]
                .parse()
                .map_err(|e| Error::parse(path, format!("line {}: {}", lineno + 1, e)))?;
            let flat = cell_of_point(&domain, cells_per_axis, &point).ok_or_else(|| {
                Error::parse(
                    path,
                    format!("line {}: point lies outside the sample domain", lineno + 1),
                )
            })?;
            if values[flat].is_some() {
                return Err(Error::parse(
                    path,
                    format!("line {}: cell {} sampled twice", lineno + 1, flat),
                ));
            }
            values[flat] = Some(value);
        }
        let values: Vec<f64> = values
            .into_iter()
            .enumerate()
            .map(|(flat, v)| {
                v.ok_or_else(|| Error::parse(path, format!("cell {} has no sample", flat)))
            })
            .collect::<Result<_>>()?;
        GridSamples::from_values(domain, cells_per_axis, values)
    }

    #[inline]
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    #[inline]
    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.domain.volume() / self.num_cells() as f64
    }

    /// Riemann estimate of the total mass: sum of |value| * cell volume.
    pub fn total_mass(&self) -> f64 {
        let cell_vol = self.cell_volume();
        self.values.iter().map(|v| v.abs() * cell_vol).sum()
    }

    /// Cell centers in storage order, paired with their values.
    pub fn centers_and_values(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.domain.dim();
        let mut centers = Vec::with_capacity(self.num_cells());
        let mut center = vec![0.0; n];
        for flat in 0..self.num_cells() {
            cell_center(&self.domain, self.cells_per_axis, flat, &mut center);
            centers.push(center.clone());
        }
        (centers, self.values.clone())
    }

    /// The weighted-indicator sum itself: the piecewise-constant function
    /// whose value at `x` is the sample of the containing cell (0 outside).
    pub fn piecewise_constant(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x: &[f64]| match cell_of_point(&self.domain, self.cells_per_axis, x) {
            Some(flat) => self.values[flat],
            None => 0.0,
        }
    }
}

fn cell_center(domain: &Domain, cells: usize, flat: usize, out: &mut [f64]) {
    let n = domain.dim();
    let mut rest = flat;
    for axis in (0..n).rev() {
        let idx = rest % cells;
        rest /= cells;
        let step = (domain.upper()[axis] - domain.lower()[axis]) / cells as f64;
        out[axis] = domain.lower()[axis] + (idx as f64 + 0.5) * step;
    }
}

fn cell_bounds(domain: &Domain, cells: usize, flat: usize) -> (Vec<f64>, Vec<f64>) {
    let n = domain.dim();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rest = flat;
    for axis in (0..n).rev() {
        let idx = rest % cells;
        rest /= cells;
        let step = (domain.upper()[axis] - domain.lower()[axis]) / cells as f64;
        lower[axis] = domain.lower()[axis] + idx as f64 * step;
        upper[axis] = if idx + 1 == cells {
            domain.upper()[axis]
        } else {
            domain.lower()[axis] + (idx + 1) as f64 * step
        };
    }
    (lower, upper)
}

fn cell_of_point(domain: &Domain, cells: usize, x: &[f64]) -> Option<usize> {
    if x.len() != domain.dim() {
        return None;
    }
    let mut flat = 0usize;
    for (axis, value) in x.iter().enumerate() {
        let step = (domain.upper()[axis] - domain.lower()[axis]) / cells as f64;
        let rel = (value - domain.lower()[axis]) / step;
        if rel < 0.0 {
            return None;
        }
        let idx = rel.floor() as usize;
        if idx >= cells {
            return None;
        }
        flat = flat * cells + idx;
    }
    Some(flat)
}

/// One cube per grid cell with a nonzero sampled value; the cell box becomes
/// the cube, the center sample its weight.
pub fn decompose_grid(samples: &GridSamples) -> Result<Vec<Cube>> {
    let mut cubes = Vec::new();
    for (flat, &value) in samples.values().iter().enumerate() {
        if value == 0.0 {
            continue;
        }
        let (lower, upper) = cell_bounds(samples.domain(), samples.cells_per_axis(), flat);
        cubes.push(Cube::new(lower, upper, value)?);
    }
    Ok(cubes)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0 && delta < 0.5) {
        return Err(Error::Invalid(format!(
            "chop parameter delta must lie in (0, 1/2), got {}",
            delta
        )));
    }
    Ok(())
}

/// Chop parameter from the accuracy budget:
/// `delta = (1 - (1 - eps / (4C + 3 eps))^(1/n)) / 2`.
pub fn select_delta(epsilon: f64, total_mass: f64, n: usize) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Invalid("epsilon must be > 0".into()));
    }
    if !(total_mass.is_finite() && total_mass >= 0.0) {
        return Err(Error::Invalid("total mass must be >= 0".into()));
    }
    if n == 0 {
        return Err(Error::Invalid("dimension must be positive".into()));
    }
    let ratio = epsilon / (4.0 * total_mass + 3.0 * epsilon);
    Ok((1.0 - (1.0 - ratio).powf(1.0 / n as f64)) / 2.0)
}

/// Analytic upper bound on the L1 gap between a cube's indicator and its
/// delta-trapezoid: `(1 - (1 - 2 delta)^n) * volume`.
pub fn l1_error_bound(cube: &Cube, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    cube.validate()?;
    Ok(l1_error_bound_unchecked(cube, delta))
}

fn l1_error_bound_unchecked(cube: &Cube, delta: f64) -> f64 {
    let n = cube.dim() as i32;
    (1.0 - (1.0 - 2.0 * delta).powi(n)) * cube.volume()
}

/// The hyper-trapezoid a block must realize on its cube:
/// `max(0, sum_k T_k(x_k) - (n - 1))` where `T_k` is the 1-D trapezoid that
/// is 0 outside `[a_k, b_k]`, 1 on the delta-shrunk interval, and ramps
/// linearly in between.
pub fn trapezoid_oracle(cube: &Cube, delta: f64, x: &[f64]) -> f64 {
    assert_eq!(x.len(), cube.dim(), "point dimension must match the cube");
    let mut sum = 0.0;
    for (k, value) in x.iter().enumerate() {
        let a = cube.lower[k];
        let b = cube.upper[k];
        let ramp = delta * (b - a);
        let t = ((value - a).min(b - value) / ramp).clamp(0.0, 1.0);
        sum += t;
    }
    (sum - (cube.dim() as f64 - 1.0)).max(0.0)
}

/// Index helpers for the width-(n+4) node layout.
#[inline]
fn acc_pos(n: usize) -> usize {
    n
}
#[inline]
fn acc_neg(n: usize) -> usize {
    n + 1
}
#[inline]
fn scratch_a(n: usize) -> usize {
    n + 2
}
#[inline]
fn scratch_b(n: usize) -> usize {
    n + 3
}

/// A width-(n+4) ReLU layer whose rows default to passing node `i` through.
fn passthrough_rows(width: usize) -> Vec<Vec<f64>> {
    (0..width)
        .map(|r| {
            let mut row = vec![0.0; width];
            row[r] = 1.0;
            row
        })
        .collect()
}

/// Entry stage: maps raw input `x` to `((x_1+N)+, ..., (x_n+N)+, 0, 0, 0, 0)`.
fn entry_layer(n: usize, half_width: f64) -> Result<Layer> {
    let width = n + 4;
    let mut rows = vec![vec![0.0; n]; width];
    let mut biases = vec![0.0; width];
    for j in 0..n {
        rows[j][j] = 1.0;
        biases[j] = half_width;
    }
    Layer::from_rows(rows, biases, Activation::Relu)
}

/// Recording stage appended after each block: adds `weight * bump` onto the
/// positive or negative accumulator and resets both scratch nodes to zero.
fn recording_layer(n: usize, weight: f64) -> Result<Layer> {
    let width = n + 4;
    let mut rows = passthrough_rows(width);
    let biases = vec![0.0; width];
    if weight > 0.0 {
        rows[acc_pos(n)][scratch_a(n)] = weight;
    } else {
        rows[acc_neg(n)][scratch_a(n)] = -weight;
    }
    rows[scratch_a(n)] = vec![0.0; width];
    rows[scratch_b(n)] = vec![0.0; width];
    Layer::from_rows(rows, biases, Activation::Relu)
}

/// Read-out: positive accumulator minus negative accumulator.
fn output_layer(n: usize) -> Result<Layer> {
    let width = n + 4;
    let mut row = vec![0.0; width];
    row[acc_pos(n)] = 1.0;
    row[acc_neg(n)] = -1.0;
    Layer::from_rows(vec![row], vec![0.0], Activation::Identity)
}

/// The 4 chopping layers for dimension `k` of a cube.
///
/// Scratch node A holds the running conjunction, scratch node B the ramp
/// terms. With `q = (x_k - b + ramp)+ / ramp` and `v = (1 - (x_k - a)+ /
/// ramp)+`, the four layers compute `L <- ((L - q)+ - v)+`, which equals the
/// conjunction of `L` with the 1-D trapezoid of dimension `k`.
fn chop_layers(
    n: usize,
    dim_index: usize,
    lower: f64,
    upper: f64,
    delta: f64,
    half_width: f64,
) -> Result<[Layer; LAYERS_PER_DIM]> {
    let width = n + 4;
    let ramp = delta * (upper - lower);
    let sa = scratch_a(n);
    let sb = scratch_b(n);

    // Layer 1: A carries the incoming conjunction (or starts it at 1 for the
    // first dimension), B <- (x_k - b + ramp)+ recovered from the carried
    // coordinate (x_k + N)+.
    let mut rows = passthrough_rows(width);
    let mut biases = vec![0.0; width];
    if dim_index == 0 {
        rows[sa] = vec![0.0; width];
        biases[sa] = 1.0;
    }
    rows[sb] = vec![0.0; width];
    rows[sb][dim_index] = 1.0;
    biases[sb] = -(half_width + upper - ramp);
    let l1 = Layer::from_rows(rows, biases, Activation::Relu)?;

    // Layer 2: A <- (A - B / ramp)+, B <- (x_k - a)+.
    let mut rows = passthrough_rows(width);
    let mut biases = vec![0.0; width];
    rows[sa][sb] = -1.0 / ramp;
    rows[sb] = vec![0.0; width];
    rows[sb][dim_index] = 1.0;
    biases[sb] = -(half_width + lower);
    let l2 = Layer::from_rows(rows, biases, Activation::Relu)?;

    // Layer 3: A carries, B <- (1 - B / ramp)+.
    let mut rows = passthrough_rows(width);
    let mut biases = vec![0.0; width];
    rows[sb] = vec![0.0; width];
    rows[sb][sb] = -1.0 / ramp;
    biases[sb] = 1.0;
    let l3 = Layer::from_rows(rows, biases, Activation::Relu)?;

    // Layer 4: A <- (A - B)+, B <- 0.
    let mut rows = passthrough_rows(width);
    let biases = vec![0.0; width];
    rows[sa][sb] = -1.0;
    rows[sb] = vec![0.0; width];
    let l4 = Layer::from_rows(rows, biases, Activation::Relu)?;

    Ok([l1, l2, l3, l4])
}

fn block_layers(cube: &Cube, delta: f64, half_width: f64) -> Result<Vec<Layer>> {
    cube.validate()?;
    check_delta(delta)?;
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::Invalid("truncation half-width must be > 0".into()));
    }
    if !cube.inside_box(half_width) {
        return Err(Error::Domain(format!(
            "cube leaves the truncation box [-{}, {}]^{}",
            half_width,
            half_width,
            cube.dim()
        )));
    }
    let n = cube.dim();
    let mut layers = Vec::with_capacity(LAYERS_PER_DIM * n);
    for k in 0..n {
        layers.extend(chop_layers(
            n,
            k,
            cube.lower[k],
            cube.upper[k],
            delta,
            half_width,
        )?);
    }
    Ok(layers)
}

/// One cube's block: a width-(n+4) network from carried coordinates to
/// carried coordinates whose node n+3 (1-based) ends at the cube's
/// trapezoid and node n+4 at zero. Accumulator nodes pass through untouched.
pub fn build_block(cube: &Cube, delta: f64, half_width: f64) -> Result<Network> {
    let n = cube.dim();
    Network::new(n + 4, block_layers(cube, delta, half_width)?)
}

/// Chains entry stage, one block plus recording layer per cube, and the
/// accumulator read-out into a single width-(n+4) scalar network.
pub fn build_universal(plan: &ApproximationPlan) -> Result<Network> {
    plan.validate()?;
    if plan.cubes.is_empty() {
        return Err(Error::Invalid(
            "plan has no cubes; nothing to construct".into(),
        ));
    }
    let n = plan.n;
    let mut layers = Vec::with_capacity(2 + plan.cubes.len() * (LAYERS_PER_DIM * n + 1));
    layers.push(entry_layer(n, plan.half_width)?);
    for cube in &plan.cubes {
        layers.extend(block_layers(cube, plan.delta, plan.half_width)?);
        layers.push(recording_layer(n, cube.weight)?);
    }
    layers.push(output_layer(n)?);
    Network::new(n, layers)
}

/// End-to-end pipeline: decompose the samples, pick delta, and build the
/// approximator. A target that samples to zero everywhere yields the valid
/// zero network (entry stage plus read-out, no blocks).
pub fn approximate_function(
    samples: &GridSamples,
    half_width: f64,
    epsilon: f64,
) -> Result<(Network, ApproximationPlan)> {
    let n = samples.domain().dim();
    let box_cube = Cube {
        lower: samples.domain().lower().to_vec(),
        upper: samples.domain().upper().to_vec(),
        weight: 0.0,
    };
    if !box_cube.inside_box(half_width) {
        return Err(Error::Domain(format!(
            "sample domain leaves the truncation box [-{}, {}]^{}",
            half_width, half_width, n
        )));
    }
    let total_mass = samples.total_mass();
    let delta = select_delta(epsilon, total_mass, n)?;
    let cubes = decompose_grid(samples)?;
    let plan = ApproximationPlan {
        n,
        half_width,
        epsilon,
        total_mass,
        delta,
        cubes,
    };
    let net = if plan.cubes.is_empty() {
        Network::new(n, vec![entry_layer(n, half_width)?, output_layer(n)?])?
    } else {
        build_universal(&plan)?
    };
    Ok((net, plan))
}
