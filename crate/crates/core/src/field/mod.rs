//! Precomputed distance maps around a single gate.
//!
//! Values are stored as `f32` on a regular node grid (x fastest), with the
//! `-1` sentinel at nodes inside the frame. Gradients are finite differences
//! of the stored values, computed once at build time.

mod io;

pub use io::{decode_field, encode_field, load_field, save_field, MAGIC, VERSION};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GateGeometry, Vec3, INSIDE_DISTANCE};

const SENTINEL: f32 = INSIDE_DISTANCE as f32;

/// Slack allowed when an inflation width is converted to whole cells.
pub const CELL_MULTIPLE_TOL: f64 = 1e-6;

const AXES: [&str; 3] = ["x", "y", "z"];

fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

/// Regular node grid in the gate-local frame.
///
/// Origin and resolution are held at `f32` precision so that the on-disk
/// header reproduces them exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
}

impl GridSpec {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        for (axis, n) in AXES.iter().zip(dims) {
            if n < 2 {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {axis} needs at least 2 nodes, got {n}"
                )));
            }
            if n > u32::MAX as usize {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {axis} too large"
                )));
            }
        }
        Ok(Self {
            origin: origin.map(quantize),
            resolution: quantize(resolution),
            dims,
        })
    }

    /// Grid spanning `[min, max]` per axis; `max` is rounded to the nearest node.
    pub fn from_extent(min: Vec3, max: Vec3, resolution: f64) -> Result<Self> {
        let mut dims = [0usize; 3];
        for k in 0..3 {
            let span = max[k] - min[k];
            if !(span.is_finite() && span > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "empty grid extent along {}",
                    AXES[k]
                )));
            }
            dims[k] = (span / resolution).round() as usize + 1;
        }
        Self::new(min, resolution, dims)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Far corner of the grid.
    pub fn max_corner(&self) -> Vec3 {
        Vec3::from_fn(|k, _| self.origin[k] + self.resolution * (self.dims[k] - 1) as f64)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.resolution
    }

    pub fn contains(&self, q: &Vec3) -> bool {
        let hi = self.max_corner();
        (0..3).all(|k| q[k] >= self.origin[k] - 1e-9 && q[k] <= hi[k] + 1e-9)
    }

    /// Error naming the first axis along which the grid fails to enclose the
    /// gate bounds grown by `margin`.
    pub fn check_coverage(&self, gate: &GateGeometry, margin: f64) -> Result<()> {
        let b = gate.bounds();
        let hi = self.max_corner();
        for k in 0..3 {
            let need_lo = b.min[k] - margin;
            let need_hi = b.max[k] + margin;
            if self.origin[k] > need_lo + 1e-9 || hi[k] < need_hi - 1e-9 {
                return Err(Error::Config(format!(
                    "grid axis {} spans [{:.3}, {:.3}] but must cover [{:.3}, {:.3}]",
                    AXES[k], self.origin[k], hi[k], need_lo, need_hi
                )));
            }
        }
        Ok(())
    }

    /// Whole cell counts for an inflation box, rejecting widths that are not
    /// (nearly) cell multiples.
    pub fn inflation_cells(&self, eps: &Vec3) -> Result<[usize; 3]> {
        let mut cells = [0usize; 3];
        for k in 0..3 {
            if !(eps[k].is_finite() && eps[k] >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "inflation half-width along {} must be >= 0, got {}",
                    AXES[k], eps[k]
                )));
            }
            let ratio = eps[k] / self.resolution;
            let n = ratio.round();
            if (ratio - n).abs() > CELL_MULTIPLE_TOL {
                return Err(Error::InvalidArgument(format!(
                    "inflation half-width {} along {} is not a whole multiple of the {} m resolution",
                    eps[k], AXES[k], self.resolution
                )));
            }
            cells[k] = n as usize;
        }
        Ok(cells)
    }

    /// Smallest whole-cell inflation box containing `eps`.
    pub fn round_up_inflation(&self, eps: &Vec3) -> Vec3 {
        eps.map(|e| {
            let n = (e / self.resolution - CELL_MULTIPLE_TOL).ceil().max(0.0);
            quantize(n * self.resolution)
        })
    }
}

/// Distance and gradient interpolated at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub d: f64,
    pub grad: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    spec: GridSpec,
    values: Vec<f32>,
    gradients: Vec<[f32; 3]>,
    inflated_by: Vec3,
}

impl DistanceField {
    pub(crate) fn from_parts(
        spec: GridSpec,
        values: Vec<f32>,
        gradients: Vec<[f32; 3]>,
        inflated_by: Vec3,
    ) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        debug_assert_eq!(gradients.len(), spec.len());
        Self {
            spec,
            values,
            gradients,
            inflated_by,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn gradients(&self) -> &[[f32; 3]] {
        &self.gradients
    }

    pub fn inflated_by(&self) -> Vec3 {
        self.inflated_by
    }

    pub fn is_nominal(&self) -> bool {
        self.inflated_by == Vec3::zeros()
    }

    pub fn node_value(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.spec.index(i, j, k)]
    }

    pub fn node_gradient(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let g = self.gradients[self.spec.index(i, j, k)];
        Vec3::new(g[0] as f64, g[1] as f64, g[2] as f64)
    }

    /// Trilinear interpolation of distance and gradient.
    pub fn sample(&self, q: &Vec3) -> Result<FieldSample> {
        if !q.iter().all(|v| v.is_finite()) || !self.spec.contains(q) {
            return Err(Error::OutOfBounds {
                x: q.x,
                y: q.y,
                z: q.z,
            });
        }
        let dims = self.spec.dims;
        let mut base = [0usize; 3];
        let mut t = [0.0f64; 3];
        for k in 0..3 {
            let s = (q[k] - self.spec.origin[k]) / self.spec.resolution;
            let i0 = (s.floor().max(0.0) as usize).min(dims[k] - 2);
            base[k] = i0;
            t[k] = (s - i0 as f64).clamp(0.0, 1.0);
        }
        let mut d = 0.0;
        let mut grad = Vec3::zeros();
        for corner in 0..8 {
            let (ci, cj, ck) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let idx = self.spec.index(base[0] + ci, base[1] + cj, base[2] + ck);
            let v = self.values[idx];
            if v == SENTINEL {
                return Err(Error::InObstacle {
                    x: q.x,
                    y: q.y,
                    z: q.z,
                });
            }
            let w = weight(t[0], ci) * weight(t[1], cj) * weight(t[2], ck);
            d += w * v as f64;
            let g = self.gradients[idx];
            grad += w * Vec3::new(g[0] as f64, g[1] as f64, g[2] as f64);
        }
        Ok(FieldSample { d, grad })
    }
}

#[inline]
fn weight(t: f64, hi: usize) -> f64 {
    if hi == 1 {
        t
    } else {
        1.0 - t
    }
}

/// Evaluate the exact gate distance at every node and difference it.
///
/// `margin` is the clearance (safety radius plus any planned inflation) the
/// grid must leave around the frame on every side.
pub fn build_field(gate: &GateGeometry, spec: &GridSpec, margin: f64) -> Result<DistanceField> {
    gate.validate()?;
    spec.check_coverage(gate, margin)?;
    let values: Vec<f32> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = spec.coords(idx);
            gate.distance_unchecked(&spec.node(i, j, k)) as f32
        })
        .collect();
    let gradients = compute_gradients(spec, &values);
    Ok(DistanceField::from_parts(
        *spec,
        values,
        gradients,
        Vec3::zeros(),
    ))
}

/// Central differences, falling back to one-sided stencils at grid borders
/// and next to sentinel nodes. Sentinel nodes get a zero gradient.
pub(crate) fn compute_gradients(spec: &GridSpec, values: &[f32]) -> Vec<[f32; 3]> {
    let dims = spec.dims;
    let h = spec.resolution;
    let strides = [1, dims[0], dims[0] * dims[1]];
    (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let c = values[idx];
            if c == SENTINEL {
                return [0.0; 3];
            }
            let coords = spec.coords(idx);
            let mut g = [0.0f32; 3];
            for k in 0..3 {
                let lo = (coords[k] > 0)
                    .then(|| values[idx - strides[k]])
                    .filter(|v| *v != SENTINEL);
                let hi = (coords[k] + 1 < dims[k])
                    .then(|| values[idx + strides[k]])
                    .filter(|v| *v != SENTINEL);
                let c = c as f64;
                g[k] = match (lo, hi) {
                    (Some(l), Some(r)) => (r as f64 - l as f64) / (2.0 * h),
                    (None, Some(r)) => (r as f64 - c) / h,
                    (Some(l), None) => (c - l as f64) / h,
                    (None, None) => 0.0,
                } as f32;
            }
            g
        })
        .collect()
}

/// Worst-case field over all gate translations in the box `[-eps, eps]`.
///
/// Realized as a separable min-filter with a `(2k+1)` window per axis,
/// truncated at the grid border. Sentinels spread through the window, which
/// yields the grown obstacle directly.
pub fn inflate_field(field: &DistanceField, eps: &Vec3) -> Result<DistanceField> {
    if !field.is_nominal() {
        return Err(Error::InvalidArgument(
            "inflation expects a nominal (uninflated) field".into(),
        ));
    }
    let spec = field.spec;
    let cells = spec.inflation_cells(eps)?;
    let mut values = field.values.clone();
    for (axis, &k) in cells.iter().enumerate() {
        if k > 0 {
            values = min_filter_axis(&spec, &values, axis, k);
        }
    }
    let gradients = if cells == [0, 0, 0] {
        field.gradients.clone()
    } else {
        compute_gradients(&spec, &values)
    };
    let inflated_by = Vec3::from_fn(|a, _| quantize(cells[a] as f64 * spec.resolution));
    Ok(DistanceField::from_parts(
        spec,
        values,
        gradients,
        inflated_by,
    ))
}

fn min_filter_axis(spec: &GridSpec, src: &[f32], axis: usize, radius: usize) -> Vec<f32> {
    let dims = spec.dims;
    let stride = [1, dims[0], dims[0] * dims[1]][axis];
    let n = dims[axis];
    (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let pos = spec.coords(idx)[axis];
            let lo = pos.saturating_sub(radius);
            let hi = (pos + radius).min(n - 1);
            let start = idx - (pos - lo) * stride;
            (0..=hi - lo)
                .map(|o| src[start + o * stride])
                .fold(f32::INFINITY, f32::min)
        })
        .collect()
}
