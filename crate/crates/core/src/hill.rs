//! Hill-operator machinery for -y'' + q y = λ y with a 1-periodic
//! potential: the monodromy matrix, the discriminant F (the Lyapunov
//! function of the scalar problem), the anti-discriminant F_-, and the
//! auxiliary spectra built from them (Dirichlet eigenvalues μ_n, the
//! zeros η_n of F, and the periodic/antiperiodic band edges).
//!
//! The fundamental solutions θ, φ satisfy θ(0) = φ'(0) = 1 and
//! θ'(0) = φ(0) = 0; the monodromy matrix transports (y, y') across one
//! period, and
//!
//! ```text
//! F  = (φ₁' + θ₁) / 2,      F₋ = (φ₁' - θ₁) / 2.
//! ```
//!
//! For the piecewise-constant-plus-delta class the matrix is an exact
//! finite product: cos/sin blocks where λ exceeds the local value,
//! cosh/sinh below it, and a unit lower-triangular jump at each delta.

use num_complex::Complex64;

use crate::error::{Result, SpectralError};
use crate::potential::PeriodicPotential;
use crate::rootfind::{self, ScanSpec};
use crate::spectrum::{EigenKind, LabeledEigenvalue};

/// Monodromy data at a complex spectral parameter λ.
#[derive(Debug, Clone, Copy)]
pub struct Monodromy {
    pub lambda: Complex64,
    pub theta1: Complex64,
    pub theta1p: Complex64,
    pub phi1: Complex64,
    pub phi1p: Complex64,
    /// (φ₁' + θ₁)/2
    pub f: Complex64,
    /// (φ₁' - θ₁)/2
    pub f_minus: Complex64,
}

/// Monodromy data on the real λ axis (all entries real for a real
/// potential); this is the fast path used by scans and refinement.
#[derive(Debug, Clone, Copy)]
pub struct MonodromyReal {
    pub lambda: f64,
    pub theta1: f64,
    pub theta1p: f64,
    pub phi1: f64,
    pub phi1p: f64,
    pub f: f64,
    pub f_minus: f64,
}

/// cos(√x L) and sin(√x L)/√x as entire functions of x, valid for
/// either sign of x; the series branch keeps the crossover x ≈ 0 exact.
fn propagators_real(x: f64, len: f64) -> (f64, f64) {
    const EPS: f64 = 1e-8;
    if x > EPS {
        let w = x.sqrt();
        ((w * len).cos(), (w * len).sin() / w)
    } else if x < -EPS {
        let k = (-x).sqrt();
        ((k * len).cosh(), (k * len).sinh() / k)
    } else {
        let y = x * len * len;
        (
            1.0 - y / 2.0 + y * y / 24.0 - y * y * y / 720.0,
            len * (1.0 - y / 6.0 + y * y / 120.0 - y * y * y / 5040.0),
        )
    }
}

fn propagators_complex(x: Complex64, len: f64) -> (Complex64, Complex64) {
    if x.norm() > 1e-8 {
        let w = x.sqrt();
        let wl = w * len;
        (wl.cos(), wl.sin() / w)
    } else {
        let y = x * len * len;
        let one = Complex64::new(1.0, 0.0);
        (
            one - y / 2.0 + y * y / 24.0,
            (one - y / 6.0 + y * y / 120.0) * len,
        )
    }
}

/// Column-ordered pieces of [0, 1]: segment runs split at delta
/// positions, with the delta weight applied when crossing its position.
fn pieces(q: &PeriodicPotential) -> Vec<(f64, f64, Option<f64>)> {
    // (length, segment value, delta weight applied after the run)
    let segs = q.segments();
    let mut cuts: Vec<(f64, Option<f64>)> = Vec::new();
    for s in segs.iter().skip(1) {
        cuts.push((s.start, None));
    }
    for d in q.deltas() {
        cuts.push((d.position, Some(d.weight)));
    }
    cuts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut t = 0.0;
    let mut seg_idx = 0usize;
    for (pos, w) in cuts {
        if pos > t {
            out.push((pos - t, segs[seg_idx].value, None));
            t = pos;
        }
        match w {
            Some(weight) => {
                // attach the jump to a zero-length marker
                out.push((0.0, 0.0, Some(weight)));
            }
            None => {
                seg_idx += 1;
            }
        }
        // advance the segment index for breakpoints that coincide with
        // a delta position handled above
        while seg_idx + 1 < segs.len() && segs[seg_idx + 1].start <= t {
            seg_idx += 1;
        }
    }
    if t < 1.0 {
        out.push((1.0 - t, segs[seg_idx].value, None));
    }
    out
}

/// Exact monodromy matrix at real λ.
pub fn monodromy_real(q: &PeriodicPotential, lambda: f64) -> MonodromyReal {
    // m = [[theta1, phi1], [theta1p, phi1p]], accumulated left to right
    let (mut a, mut b, mut c, mut d) = (1.0f64, 0.0f64, 0.0f64, 1.0f64);
    for (len, v, jump) in pieces(q) {
        if let Some(w) = jump {
            // y' gains w*y across the delta
            c += w * a;
            d += w * b;
            continue;
        }
        let x = lambda - v;
        let (cs, sn) = propagators_real(x, len);
        let (na, nc) = (cs * a + sn * c, -x * sn * a + cs * c);
        let (nb, nd) = (cs * b + sn * d, -x * sn * b + cs * d);
        a = na;
        b = nb;
        c = nc;
        d = nd;
    }
    MonodromyReal {
        lambda,
        theta1: a,
        phi1: b,
        theta1p: c,
        phi1p: d,
        f: 0.5 * (d + a),
        f_minus: 0.5 * (d - a),
    }
}

/// Exact monodromy matrix at complex λ (entire in λ).
pub fn monodromy(q: &PeriodicPotential, lambda: Complex64) -> Monodromy {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let (mut a, mut b, mut c, mut d) = (one, zero, zero, one);
    for (len, v, jump) in pieces(q) {
        if let Some(w) = jump {
            c += w * a;
            d += w * b;
            continue;
        }
        let x = lambda - v;
        let (cs, sn) = propagators_complex(x, len);
        let (na, nc) = (cs * a + sn * c, -x * sn * a + cs * c);
        let (nb, nd) = (cs * b + sn * d, -x * sn * b + cs * d);
        a = na;
        b = nb;
        c = nc;
        d = nd;
    }
    Monodromy {
        lambda,
        theta1: a,
        phi1: b,
        theta1p: c,
        phi1p: d,
        f: 0.5 * (d + a),
        f_minus: 0.5 * (d - a),
    }
}

/// Hill band edges: the lowest periodic eigenvalue `lowest` (F = 1) and
/// the gap intervals `gaps[n-1] = (λ̃ₙ⁻, λ̃ₙ⁺)` with F(λ̃ₙ^±) = (-1)^n.
/// Degenerate gaps are reported with coinciding endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct HillEdges {
    pub lowest: f64,
    pub gaps: Vec<(f64, f64)>,
}

impl HillEdges {
    /// Band intervals [λ̃₀⁺, λ̃₁⁻], [λ̃₁⁺, λ̃₂⁻], ... clipped to `hi`.
    pub fn bands_up_to(&self, hi: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut lo = self.lowest;
        for &(gl, gh) in &self.gaps {
            if lo > hi {
                break;
            }
            if gl > lo {
                out.push((lo, gl.min(hi)));
            }
            lo = gh;
        }
        if lo <= hi {
            out.push((lo, hi));
        }
        out
    }
}

/// All Dirichlet eigenvalues μ_n (zeros of φ₁) up to `lambda_max`,
/// labeled with kind `Dirichlet` and 1-based index n.
pub fn dirichlet_spectrum(q: &PeriodicPotential, lambda_max: f64) -> Result<Vec<LabeledEigenvalue>> {
    let spec = ScanSpec::for_potential(q, lambda_max);
    let roots = rootfind::simple_sign_change_roots(|lam| monodromy_real(q, lam).phi1, &spec)?;
    Ok(roots
        .into_iter()
        .filter(|&r| r <= lambda_max)
        .enumerate()
        .map(|(i, value)| LabeledEigenvalue {
            value,
            kind: EigenKind::Dirichlet,
            nu: None,
            n: (i + 1) as u32,
            sign: None,
            k: None,
        })
        .collect())
}

/// All zeros η_n of the discriminant F up to `lambda_max` (these are
/// simple), labeled `LyapunovZero`.
pub fn lyapunov_zeros(q: &PeriodicPotential, lambda_max: f64) -> Result<Vec<LabeledEigenvalue>> {
    let spec = ScanSpec::for_potential(q, lambda_max);
    let roots = rootfind::simple_sign_change_roots(|lam| monodromy_real(q, lam).f, &spec)?;
    Ok(roots
        .into_iter()
        .filter(|&r| r <= lambda_max)
        .enumerate()
        .map(|(i, value)| LabeledEigenvalue {
            value,
            kind: EigenKind::LyapunovZero,
            nu: None,
            n: (i + 1) as u32,
            sign: None,
            k: None,
        })
        .collect())
}

/// Periodic/antiperiodic Hill eigenvalues, assembled from the zeros of
/// 9F² - 9 bracketed between consecutive anchors (η_n, μ_n); a
/// tangency |F| = 1 collapses a gap to a point.
pub fn hill_band_edges(q: &PeriodicPotential, lambda_max: f64) -> Result<HillEdges> {
    hill_band_edges_with(q, lambda_max, &crate::Tolerances::default())
}

/// As [`hill_band_edges`], with explicit tolerances.
pub fn hill_band_edges_with(
    q: &PeriodicPotential,
    lambda_max: f64,
    tol: &crate::Tolerances,
) -> Result<HillEdges> {
    let anchors = Anchors::compute(q, lambda_max, tol.root_z)?;
    let factor = |m: &MonodromyReal| 9.0 * m.f * m.f - 9.0;
    let roots = anchored_factor_roots(q, &anchors, factor, tol.root_z, tol.tang)?;
    // roots[j] = the single zero in anchor interval j, j = 0 at the
    // bottom interval; pairs (2n-1, 2n) bracket the n-th gap.
    if roots.is_empty() {
        return Err(SpectralError::numeric("hill_band_edges: no edges found"));
    }
    let lowest = roots[0];
    let mut gaps = Vec::new();
    let mut j = 1;
    while j + 1 < roots.len() {
        gaps.push((roots[j], roots[j + 1]));
        j += 2;
    }
    // sanity: F alternates sign (-1)^n at the n-th gap pair
    for (n, &(lo, hi)) in gaps.iter().enumerate() {
        let want = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
        for lam in [lo, hi] {
            let f = monodromy_real(q, lam).f;
            if (f - want).abs() > 1e-6 {
                return Err(SpectralError::numeric(format!(
                    "hill_band_edges: F({lam}) = {f}, expected {want} at gap {}",
                    n + 1
                )));
            }
        }
    }
    Ok(HillEdges { lowest, gaps })
}

/// The interlaced anchor lists η₁ < μ₁ < η₂ < μ₂ < ... together with a
/// scan start strictly below the lowest spectral object.  Every level
/// factor 9F² - L has exactly one zero per anchor interval, which makes
/// the bracketing miss-proof.
#[derive(Debug, Clone)]
pub struct Anchors {
    pub lambda_lo: f64,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Anchors {
    pub fn compute(q: &PeriodicPotential, lambda_max: f64, tol_z: f64) -> Result<Self> {
        let spec = ScanSpec::for_potential(q, lambda_max);
        let eta = rootfind::sign_change_roots_with_tol(|lam| monodromy_real(q, lam).f, &spec, tol_z)?;
        let mu =
            rootfind::sign_change_roots_with_tol(|lam| monodromy_real(q, lam).phi1, &spec, tol_z)?;
        if eta.is_empty() || mu.is_empty() {
            return Err(SpectralError::numeric(
                "anchor lists empty; scan window too small",
            ));
        }
        let n = eta.len().min(mu.len());
        let (eta, mu) = (eta[..n].to_vec(), mu[..n].to_vec());
        for i in 0..n {
            if !(eta[i] < mu[i]) || (i + 1 < n && !(mu[i] < eta[i + 1])) {
                return Err(SpectralError::numeric(format!(
                    "anchor interlacing violated near η_{} = {}, μ_{} = {}",
                    i + 1,
                    eta[i],
                    i + 1,
                    mu[i]
                )));
            }
        }
        Ok(Anchors { lambda_lo: spec.lambda_lo, eta, mu })
    }

    /// Anchor interval j: j = 0 is [lambda_lo, η₁]; j = 2n-1 is
    /// [η_n, μ_n]; j = 2n is [μ_n, η_{n+1}].
    pub fn interval(&self, j: usize) -> Option<(f64, f64)> {
        if j == 0 {
            return Some((self.lambda_lo, self.eta[0]));
        }
        let n = (j + 1) / 2; // 1-based
        if j % 2 == 1 {
            let (lo, hi) = (self.eta.get(n - 1)?, self.mu.get(n - 1)?);
            Some((*lo, *hi))
        } else {
            let (lo, hi) = (self.mu.get(n - 1)?, self.eta.get(n)?);
            Some((*lo, *hi))
        }
    }

    pub fn interval_count(&self) -> usize {
        // last full interval is [μ_{m-1}, η_m]
        2 * self.eta.len().min(self.mu.len() + 1) - 1
    }
}

/// Finds, for each anchor interval, the single zero of the scalar
/// `factor` of the monodromy; a zero may sit exactly at an anchor
/// (degenerate pair), detected by value.  Returns one λ per interval.
pub fn anchored_factor_roots(
    q: &PeriodicPotential,
    anchors: &Anchors,
    factor: impl Fn(&MonodromyReal) -> f64 + Copy,
    tol_z: f64,
    tol_at: f64,
) -> Result<Vec<f64>> {
    let g = |lam: f64| factor(&monodromy_real(q, lam));
    let mut out = Vec::with_capacity(anchors.interval_count());
    for j in 0..anchors.interval_count() {
        let (lo, hi) = anchors.interval(j).unwrap();
        let root = rootfind::single_root_in(g, lo, hi, tol_z, tol_at).map_err(|e| {
            SpectralError::numeric(format!("factor root in anchor interval {j}: {e}"))
        })?;
        out.push(root);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PeriodicPotential;
    use std::f64::consts::PI;

    #[test]
    fn free_monodromy_closed_form() {
        let q = PeriodicPotential::zero();
        let lam = (PI / 2.0) * (PI / 2.0);
        let m = monodromy_real(&q, lam);
        assert!((m.theta1 - 0.0).abs() < 1e-14);
        assert!((m.phi1 - 2.0 / PI).abs() < 1e-14);
        assert!((m.theta1p + PI / 2.0).abs() < 1e-14);
        assert!((m.phi1p - 0.0).abs() < 1e-14);
        assert!(m.f.abs() < 1e-14);
        assert!(m.f_minus.abs() < 1e-14);
    }

    #[test]
    fn delta_anti_discriminant_closed_form() {
        // single delta: F₋ = w sin(z(2a-1)) / (2z), independent oracle
        let (a, w) = (0.7, 1.0);
        let q = PeriodicPotential::new(vec![(0.0, 0.0)], vec![(a, w)]).unwrap();
        let lam: f64 = 4.0;
        let z = lam.sqrt();
        let oracle = w * (z * (2.0 * a - 1.0)).sin() / (2.0 * z);
        let m = monodromy_real(&q, lam);
        assert!((m.f_minus - oracle).abs() < 1e-13, "{} vs {}", m.f_minus, oracle);
        assert!((oracle - 0.1793390).abs() < 1e-6);
        // and F = cos z + w sin z / (2z) for a single delta
        let f_oracle = z.cos() + w * z.sin() / (2.0 * z);
        assert!((m.f - f_oracle).abs() < 1e-13);
    }

    #[test]
    fn wronskian_and_f_squared_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let q = PeriodicPotential::new(
            vec![(0.0, 1.3), (0.3, -2.0), (0.6, 0.7)],
            vec![(0.45, 1.5)],
        )
        .unwrap();
        for _ in 0..200 {
            let lam = rng.gen_range(-20.0..400.0);
            let m = monodromy_real(&q, lam);
            let det = m.theta1 * m.phi1p - m.theta1p * m.phi1;
            assert!((det - 1.0).abs() < 1e-10 * (1.0 + m.theta1.abs() * m.phi1p.abs()));
            let lhs = m.f * m.f - m.f_minus * m.f_minus;
            let rhs = m.theta1 * m.phi1p;
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }
        // complex path agrees with the real one on the real axis
        for _ in 0..50 {
            let lam = rng.gen_range(-10.0..200.0);
            let mr = monodromy_real(&q, lam);
            let mc = monodromy(&q, Complex64::new(lam, 0.0));
            assert!((mc.f.re - mr.f).abs() < 1e-11);
            assert!(mc.f.im.abs() < 1e-11);
            assert!((mc.f_minus.re - mr.f_minus).abs() < 1e-11);
            let det = mc.theta1 * mc.phi1p - mc.theta1p * mc.phi1;
            assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn dirichlet_free_and_shifted() {
        let q = PeriodicPotential::zero();
        let mu = dirichlet_spectrum(&q, 100.0).unwrap();
        let want = [PI * PI, 4.0 * PI * PI, 9.0 * PI * PI];
        assert_eq!(mu.len(), 3);
        for (m, w) in mu.iter().zip(want) {
            assert!((m.value - w).abs() < 1e-9, "{} vs {w}", m.value);
        }
        assert!((mu[0].value - 9.8696044).abs() < 1e-6);

        let qc = PeriodicPotential::constant(2.5);
        let muc = dirichlet_spectrum(&qc, 100.0).unwrap();
        for (m, w) in muc.iter().zip(want) {
            assert!((m.value - (w + 2.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn dirichlet_delta_against_bisection_oracle() {
        // w δ at a = 1/2: φ₁(λ) = sin z / z + w sin²(z/2) / z²
        let w = 2.0;
        let q = PeriodicPotential::new(vec![(0.0, 0.0)], vec![(0.5, w)]).unwrap();
        let phi = |z: f64| z.sin() / z + w * (z / 2.0).sin().powi(2) / (z * z);
        // oracle roots by plain bisection on a fine grid in z
        let mut oracle = Vec::new();
        let mut prev = (0.05, phi(0.05));
        let mut z = 0.05;
        while z < 50.0f64.sqrt() {
            z += 1e-3;
            let v = phi(z);
            if prev.1.signum() != v.signum() {
                let (mut lo, mut hi) = (prev.0, z);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if phi(mid).signum() == phi(lo).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                oracle.push((0.5 * (lo + hi)).powi(2));
            }
            prev = (z, v);
        }
        let mu = dirichlet_spectrum(&q, 50.0).unwrap();
        assert_eq!(mu.len(), oracle.len());
        for (m, o) in mu.iter().zip(oracle) {
            assert!((m.value - o).abs() < 1e-8, "{} vs {o}", m.value);
        }
    }

    #[test]
    fn lyapunov_zeros_free_and_shifted() {
        let q = PeriodicPotential::zero();
        let eta = lyapunov_zeros(&q, 100.0).unwrap();
        assert!((eta[0].value - (PI / 2.0).powi(2)).abs() < 1e-10);
        assert!((eta[0].value - 2.4674011).abs() < 1e-7);
        for (i, e) in eta.iter().enumerate() {
            let want = (PI * (i as f64 + 0.5)).powi(2);
            assert!((e.value - want).abs() < 1e-8);
        }
        let qc = PeriodicPotential::constant(-1.0);
        let etac = lyapunov_zeros(&qc, 100.0).unwrap();
        for (i, e) in etac.iter().enumerate() {
            let want = (PI * (i as f64 + 0.5)).powi(2) - 1.0;
            assert!((e.value - want).abs() < 1e-8);
        }
    }

    #[test]
    fn hill_edges_free_are_fully_degenerate() {
        let q = PeriodicPotential::zero();
        let edges = hill_band_edges(&q, 150.0).unwrap();
        assert!(edges.lowest.abs() < 1e-9);
        for (n, &(lo, hi)) in edges.gaps.iter().enumerate() {
            let want = (PI * (n as f64 + 1.0)).powi(2);
            assert!((hi - lo).abs() < 1e-9, "gap {n} not degenerate: {lo} {hi}");
            assert!((lo - want).abs() < 1e-7, "{lo} vs {want}");
        }
    }

    #[test]
    fn hill_edges_constant_shift() {
        let q = PeriodicPotential::constant(3.0);
        let edges = hill_band_edges(&q, 150.0).unwrap();
        assert!((edges.lowest - 3.0).abs() < 1e-9);
        for (n, &(lo, hi)) in edges.gaps.iter().enumerate() {
            let want = (PI * (n as f64 + 1.0)).powi(2) + 3.0;
            assert!((hi - lo).abs() < 1e-9);
            assert!((lo - want).abs() < 1e-7);
        }
    }

    #[test]
    fn first_gap_of_weak_cosine_matches_perturbation_theory() {
        // q = 2c cos(2πt), c = 0.25: |γ̃₁| ≈ 2|q_c1| = 0.5 within 25%
        let m = 512;
        let samples: Vec<f64> = (0..m)
            .map(|j| 0.5 * (2.0 * PI * (j as f64 + 0.5) / m as f64).cos())
            .collect();
        let q = PeriodicPotential::from_samples(&samples).unwrap();
        let edges = hill_band_edges(&q, 60.0).unwrap();
        let width = edges.gaps[0].1 - edges.gaps[0].0;
        assert!((width - 0.5).abs() < 0.125, "first gap width {width}");
    }

    #[test]
    fn dirichlet_eigenvalues_sit_inside_hill_gaps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let q = PeriodicPotential::new(
                vec![
                    (0.0, rng.gen_range(-3.0..3.0)),
                    (0.25, rng.gen_range(-3.0..3.0)),
                    (0.5, rng.gen_range(-3.0..3.0)),
                    (0.75, rng.gen_range(-3.0..3.0)),
                ],
                vec![],
            )
            .unwrap();
            let lam_max = 300.0;
            let mu = dirichlet_spectrum(&q, lam_max).unwrap();
            let edges = hill_band_edges(&q, lam_max).unwrap();
            for (n, m) in mu.iter().enumerate() {
                if n >= edges.gaps.len() {
                    break;
                }
                let (lo, hi) = edges.gaps[n];
                assert!(
                    m.value >= lo - 1e-8 && m.value <= hi + 1e-8,
                    "μ_{} = {} outside gap ({lo}, {hi})",
                    n + 1,
                    m.value
                );
            }
        }
    }

    #[test]
    fn discriminant_asymptotics_trend() {
        // |F(λ) - cos√λ - q₀ sin√λ/(2√λ)| · λ stays bounded along λ = (πm)²
        let m = 256;
        let samples: Vec<f64> = (0..m)
            .map(|j| {
                let t = (j as f64 + 0.5) / m as f64;
                (2.0 * PI * t).cos() + 0.4 * (4.0 * PI * t).sin()
            })
            .collect();
        let q = PeriodicPotential::from_samples(&samples).unwrap();
        let q0 = q.fourier_coeffs(1).unwrap().q0;
        let resid = |mm: u32| {
            let z = PI * mm as f64;
            let lam = z * z;
            let f = monodromy_real(&q, lam).f;
            (f - z.cos() - q0 * z.sin() / (2.0 * z)).abs() * lam
        };
        let early: f64 = (10..=20).map(resid).fold(0.0, f64::max);
        let late: f64 = (25..=40).map(resid).fold(0.0, f64::max);
        assert!(
            late <= 3.0 * early + 1e-6,
            "asymptotic residual grows: early {early}, late {late}"
        );
    }
}
