//! 1-periodic potentials represented exactly as piecewise-constant
//! segments plus Dirac delta terms.
//!
//! The representation is closed under everything the spectral pipeline
//! needs: the monodromy matrix is a finite product of closed-form 2x2
//! transfer matrices, and Fourier coefficients have exact closed-form
//! integrals.  Smooth potentials enter through [`PeriodicPotential::from_samples`],
//! which converges at rate O(1/M^2) for the coefficients of a smooth
//! function sampled at M midpoints.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SpectralError};

/// One constant piece of the potential: value `value` on
/// `[start, next_start)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub value: f64,
}

/// A Dirac term `weight * delta(t - position)`, `position` strictly
/// inside (0, 1).  The weight enters the transfer matrix as a jump of
/// the derivative: `y'(a+) = y'(a-) + weight * y(a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub position: f64,
    pub weight: f64,
}

/// A 1-periodic potential: ordered constant segments covering [0, 1)
/// plus delta terms at interior points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPotential {
    segments: Vec<Segment>,
    deltas: Vec<Delta>,
}

/// The Fourier data of a potential at a given frequency index `n`:
/// `q0 = ∫ q`, `qs = ∫ q(s) sin(2πns) ds`, `qc = ∫ q(s) cos(2πns) ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierCoeffs {
    pub q0: f64,
    pub qs: f64,
    pub qc: f64,
}

impl PeriodicPotential {
    /// Builds a potential from explicit segments and deltas, validating
    /// the representation invariants.
    pub fn new(segments: Vec<(f64, f64)>, deltas: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(SpectralError::invalid("potential needs at least one segment"));
        }
        if segments[0].0 != 0.0 {
            return Err(SpectralError::invalid(format!(
                "first segment breakpoint must be 0, got {}",
                segments[0].0
            )));
        }
        for w in segments.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(SpectralError::invalid(format!(
                    "segment breakpoints must be strictly increasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(t, _)) = segments.iter().find(|&&(t, v)| !(0.0..1.0).contains(&t) || !v.is_finite()) {
            return Err(SpectralError::invalid(format!(
                "segment breakpoint {t} outside [0, 1) or value not finite"
            )));
        }
        for w in deltas.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(SpectralError::invalid(format!(
                    "delta positions must be strictly increasing and distinct: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(a, w)) = deltas.iter().find(|&&(a, w)| !(a > 0.0 && a < 1.0) || !w.is_finite()) {
            return Err(SpectralError::invalid(format!(
                "delta position {a} must lie strictly inside (0, 1) and weight {w} must be finite"
            )));
        }
        Ok(PeriodicPotential {
            segments: segments
                .into_iter()
                .map(|(start, value)| Segment { start, value })
                .collect(),
            deltas: deltas
                .into_iter()
                .map(|(position, weight)| Delta { position, weight })
                .collect(),
        })
    }

    /// The zero potential.
    pub fn zero() -> Self {
        PeriodicPotential {
            segments: vec![Segment { start: 0.0, value: 0.0 }],
            deltas: Vec::new(),
        }
    }

    /// A constant potential.
    pub fn constant(value: f64) -> Self {
        PeriodicPotential {
            segments: vec![Segment { start: 0.0, value }],
            deltas: Vec::new(),
        }
    }

    /// Builds the piecewise-constant approximant from `M` midpoint
    /// samples of a continuous 1-periodic function: M equal-width
    /// segments, no deltas.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(SpectralError::invalid("from_samples: empty sample list"));
        }
        let m = samples.len();
        let segments = samples
            .iter()
            .enumerate()
            .map(|(j, &v)| Segment { start: j as f64 / m as f64, value: v })
            .collect();
        Ok(PeriodicPotential { segments, deltas: Vec::new() })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn deltas(&self) -> &[Delta] {
        &self.deltas
    }

    /// Exact Fourier coefficients at frequency index `n >= 1`.
    ///
    /// Segments integrate in closed form; a delta of weight w at a
    /// contributes `w`, `w sin(2πna)`, `w cos(2πna)` to q0, qs, qc.
    pub fn fourier_coeffs(&self, n: u32) -> Result<FourierCoeffs> {
        if n == 0 {
            return Err(SpectralError::invalid("fourier_coeffs: n must be >= 1"));
        }
        let w = 2.0 * PI * n as f64;
        let mut q0 = 0.0;
        let mut qs = 0.0;
        let mut qc = 0.0;
        let m = self.segments.len();
        for (i, seg) in self.segments.iter().enumerate() {
            let a = seg.start;
            let b = if i + 1 < m { self.segments[i + 1].start } else { 1.0 };
            q0 += seg.value * (b - a);
            // ∫ sin(w t) dt = (cos(w a) - cos(w b)) / w
            qs += seg.value * ((w * a).cos() - (w * b).cos()) / w;
            // ∫ cos(w t) dt = (sin(w b) - sin(w a)) / w
            qc += seg.value * ((w * b).sin() - (w * a).sin()) / w;
        }
        for d in &self.deltas {
            q0 += d.weight;
            qs += d.weight * (w * d.position).sin();
            qc += d.weight * (w * d.position).cos();
        }
        Ok(FourierCoeffs { q0, qs, qc })
    }

    /// Pointwise value of the segment part at t in [0, 1) (deltas are
    /// distributions and do not contribute pointwise).
    pub fn segment_value_at(&self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        // last segment whose start is <= t
        let idx = match self
            .segments
            .binary_search_by(|s| s.start.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.segments[idx].value
    }

    /// Tests mirror symmetry q(t) = q(1-t) within `tol` in both
    /// position and value.
    ///
    /// Segment values are compared at midpoints of the combined
    /// breakpoint partition of q and its mirror; slivers narrower than
    /// `tol` (breakpoints matching only up to `tol`) are skipped.
    /// Deltas must match a mirror partner within `tol` in position and
    /// weight.
    pub fn is_even(&self, tol: f64) -> bool {
        assert!(tol > 0.0, "is_even: tol must be positive");

        // deltas: mirror of (a, w) is (1-a, w)
        let mut mirrored: Vec<Delta> = self
            .deltas
            .iter()
            .map(|d| Delta { position: 1.0 - d.position, weight: d.weight })
            .collect();
        mirrored.sort_by(|a, b| a.position.partial_cmp(&b.position).unwrap());
        if mirrored.len() != self.deltas.len() {
            return false;
        }
        for (d, m) in self.deltas.iter().zip(mirrored.iter()) {
            if (d.position - m.position).abs() > tol || (d.weight - m.weight).abs() > tol {
                return false;
            }
        }

        // segments: compare q(t) with q(1-t) on the combined partition
        let mut cuts: Vec<f64> = Vec::with_capacity(2 * self.segments.len() + 2);
        for s in &self.segments {
            cuts.push(s.start);
            cuts.push((1.0 - s.start).rem_euclid(1.0));
        }
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        for w in cuts.windows(2) {
            if w[1] - w[0] < tol {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            if (self.segment_value_at(mid) - self.segment_value_at(1.0 - mid)).abs() > tol {
                return false;
            }
        }
        true
    }

    /// Smallest segment value; lower bound used when choosing scan
    /// starting points.
    pub fn min_segment_value(&self) -> f64 {
        self.segments.iter().map(|s| s.value).fold(f64::INFINITY, f64::min)
    }

    /// Sum of |weight| over negative delta terms (controls how deep
    /// bound states can sit).
    pub fn negative_delta_mass(&self) -> f64 {
        self.deltas.iter().map(|d| d.weight.min(0.0).abs()).sum()
    }
}
