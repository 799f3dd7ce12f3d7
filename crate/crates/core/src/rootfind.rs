//! Root isolation for the entire functions of the spectral problem:
//! dense scans in z = √λ with bracketed refinement, tangency (double
//! root) detection, localization disks for the high-energy zeros of
//! D₀⁻, D_k⁺ and ρ_k, and argument-principle zero counting on disks.
//!
//! Scans run over the signed square root s (λ = s·|s|), so intervals
//! with λ < 0 need no special casing.  All refinement tolerances are
//! quoted in z-units because zero spacing is asymptotically π in z.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Result, SpectralError};
use crate::hill::monodromy_real;
use crate::lyapunov::TubeAngle;
use crate::potential::PeriodicPotential;

/// Signed square root: the scan parameter for λ of either sign.
#[inline]
pub fn s_of_lambda(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().sqrt()
}

#[inline]
pub fn lambda_of_s(s: f64) -> f64 {
    s * s.abs()
}

/// A real scan window in z-units with an optional expected root count.
#[derive(Debug, Clone, Copy)]
pub struct Bracket {
    pub z_lo: f64,
    pub z_hi: f64,
    pub expected: Option<usize>,
}

impl Bracket {
    pub fn new(z_lo: f64, z_hi: f64) -> Result<Self> {
        if !(z_lo < z_hi) || z_lo < 0.0 {
            return Err(SpectralError::invalid(format!(
                "bracket needs 0 <= z_lo < z_hi, got [{z_lo}, {z_hi}]"
            )));
        }
        Ok(Bracket { z_lo, z_hi, expected: None })
    }
}

/// A real root with multiplicity (1 for sign changes, 2 for
/// tangencies).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub lambda: f64,
    pub multiplicity: u8,
}

/// A counting disk in the z = √λ plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(SpectralError::invalid(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Disk { center, radius })
    }

    /// Real-axis shadow [Re c - r, Re c + r] in z.
    pub fn real_projection(&self) -> (f64, f64) {
        (self.center.re - self.radius, self.center.re + self.radius)
    }
}

/// Scan window for a potential: starts strictly below every spectral
/// object and extends a couple of oscillation periods past `lambda_max`
/// so no band is truncated mid-assembly.
#[derive(Debug, Clone, Copy)]
pub struct ScanSpec {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// step in s-units
    pub step: f64,
}

impl ScanSpec {
    pub fn for_potential(q: &PeriodicPotential, lambda_max: f64) -> Self {
        let z_hi = lambda_max.max(1.0).sqrt() + 2.5 * PI + 0.2;
        // push the start down until the discriminant dominates every
        // level function, which puts it below all zeros of interest
        let mut lo = q.min_segment_value().min(0.0) - 1.0 - (0.5 * q.negative_delta_mass()).powi(2);
        for _ in 0..80 {
            let m = monodromy_real(q, lo);
            let fm2 = m.f_minus * m.f_minus;
            let g_top = 5.0 + fm2 + 2.0 * (fm2 + 4.0).sqrt();
            if m.f > 1.0 + 1e-9 && m.phi1 > 0.0 && 9.0 * m.f * m.f > 1.5 * g_top + 1.0 {
                break;
            }
            lo = 2.0 * lo - 10.0;
        }
        ScanSpec { lambda_lo: lo, lambda_hi: z_hi * z_hi, step: 0.02 }
    }
}

fn sgn(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Bisection/secant hybrid on a sign-change bracket in s; converges to
/// |Δs| < tol.
fn refine_sign_change(
    f: &impl Fn(f64) -> f64,
    mut sa: f64,
    mut sb: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(lambda_of_s(sa));
    }
    if fb == 0.0 {
        return Ok(lambda_of_s(sb));
    }
    for it in 0..240 {
        if sb - sa <= tol {
            return Ok(lambda_of_s(0.5 * (sa + sb)));
        }
        // alternate secant with bisection so progress is guaranteed
        let mut sm = if it % 2 == 0 && fb != fa {
            sb - fb * (sb - sa) / (fb - fa)
        } else {
            0.5 * (sa + sb)
        };
        if !(sm > sa + 0.01 * tol && sm < sb - 0.01 * tol) {
            sm = 0.5 * (sa + sb);
        }
        let fm = f(lambda_of_s(sm));
        if fm == 0.0 {
            return Ok(lambda_of_s(sm));
        }
        if sgn(fm) == sgn(fa) {
            sa = sm;
            fa = fm;
        } else {
            sb = sm;
            fb = fm;
        }
    }
    Err(SpectralError::numeric(format!(
        "root refinement did not converge on bracket s in [{sa}, {sb}]"
    )))
}

/// Golden-section minimizer of |f| on [sa, sb]; returns (s*, |f(s*)|).
fn minimize_abs(f: &impl Fn(f64) -> f64, mut sa: f64, mut sb: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut sc = sb - INV_PHI * (sb - sa);
    let mut sd = sa + INV_PHI * (sb - sa);
    let mut fc = f(lambda_of_s(sc)).abs();
    let mut fd = f(lambda_of_s(sd)).abs();
    for _ in 0..160 {
        if sb - sa <= tol {
            break;
        }
        if fc < fd {
            sb = sd;
            sd = sc;
            fd = fc;
            sc = sb - INV_PHI * (sb - sa);
            fc = f(lambda_of_s(sc)).abs();
        } else {
            sa = sc;
            sc = sd;
            fc = fd;
            sd = sa + INV_PHI * (sb - sa);
            fd = f(lambda_of_s(sd)).abs();
        }
    }
    let sm = 0.5 * (sa + sb);
    (sm, f(lambda_of_s(sm)).abs())
}

/// All simple sign-change roots of `f(λ)` over the scan window, refined
/// to the default z tolerance.  Used for functions known to have only
/// simple real zeros (φ₁, F).
pub fn simple_sign_change_roots(f: impl Fn(f64) -> f64, spec: &ScanSpec) -> Result<Vec<f64>> {
    sign_change_roots_with_tol(f, spec, crate::TOL_ROOT_Z)
}

/// As [`simple_sign_change_roots`] with an explicit refinement
/// tolerance in z units.
pub fn sign_change_roots_with_tol(
    f: impl Fn(f64) -> f64,
    spec: &ScanSpec,
    tol_z: f64,
) -> Result<Vec<f64>> {
    let sa = s_of_lambda(spec.lambda_lo);
    let sb = s_of_lambda(spec.lambda_hi);
    let n = ((sb - sa) / spec.step).ceil() as usize + 1;
    let mut out = Vec::new();
    let mut prev_s = sa;
    let mut prev_f = f(spec.lambda_lo);
    for i in 1..=n {
        let s = sa + (sb - sa) * i as f64 / n as f64;
        let v = f(lambda_of_s(s));
        if sgn(prev_f) * sgn(v) < 0 {
            out.push(refine_sign_change(&f, prev_s, s, prev_f, v, tol_z)?);
        } else if v == 0.0 && i < n {
            out.push(lambda_of_s(s));
        }
        prev_s = s;
        prev_f = v;
    }
    Ok(out)
}

/// The single zero of `f` inside [lo, hi] (λ-units).  A zero may sit at
/// an endpoint (degenerate pair collapsing onto an anchor), detected by
/// |f(endpoint)| <= tol_at.  More than one interior sign change is a
/// structural violation and reports a numeric failure.
pub fn single_root_in(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol_z: f64,
    tol_at: f64,
) -> Result<f64> {
    let sa = s_of_lambda(lo);
    let sb = s_of_lambda(hi);
    let fa = f(lo);
    let fb = f(hi);
    let n = (((sb - sa) / 0.02).ceil() as usize).clamp(8, 4000);
    let mut marks: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
    marks.push((sa, fa));
    for i in 1..n {
        let s = sa + (sb - sa) * i as f64 / n as f64;
        marks.push((s, f(lambda_of_s(s))));
    }
    marks.push((sb, fb));

    let mut roots = Vec::new();
    for w in marks.windows(2) {
        let ((s0, f0), (s1, f1)) = (w[0], w[1]);
        if sgn(f0) * sgn(f1) < 0 {
            roots.push(refine_sign_change(&f, s0, s1, f0, f1, tol_z)?);
        } else if f1 == 0.0 && s1 < sb {
            roots.push(lambda_of_s(s1));
        }
    }
    match roots.len() {
        1 => Ok(roots[0]),
        0 => {
            if fa.abs() <= tol_at {
                return Ok(lo);
            }
            if fb.abs() <= tol_at {
                return Ok(hi);
            }
            // interior tangency: |f| dips to zero without crossing
            let (sm, fm) = minimize_abs(&f, sa, sb, tol_z);
            if fm <= tol_at {
                return Ok(lambda_of_s(sm));
            }
            Err(SpectralError::numeric(format!(
                "no root in [{lo}, {hi}]: endpoint values {fa}, {fb}, interior min |f| = {fm}"
            )))
        }
        _ => {
            // collapse rounding-level sign jitter around one root
            let smin = s_of_lambda(roots[0]);
            let smax = s_of_lambda(*roots.last().unwrap());
            if smax - smin < 100.0 * tol_z && roots.len() % 2 == 1 {
                return Ok(roots[roots.len() / 2]);
            }
            Err(SpectralError::numeric(format!(
                "expected one root in [{lo}, {hi}], found {}",
                roots.len()
            )))
        }
    }
}

/// All real roots of `f` in the interval (λ-units), with tangential
/// double roots detected via local minima of |f| below tol_tang.
/// Returns (λ, multiplicity) sorted by λ.
pub fn roots_with_tangencies(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    min_points: usize,
    tol_z: f64,
    tol_tang: f64,
) -> Result<Vec<(f64, u8)>> {
    let sa = s_of_lambda(lo);
    let sb = s_of_lambda(hi);
    if !(sb > sa) {
        return Ok(Vec::new());
    }
    let n = (((sb - sa) / 0.02).ceil() as usize).clamp(min_points, 20000);
    let mut vals: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let s = sa + (sb - sa) * i as f64 / n as f64;
        vals.push((s, f(lambda_of_s(s))));
    }
    let mut out: Vec<(f64, u8)> = Vec::new();
    for w in vals.windows(2) {
        let ((s0, f0), (s1, f1)) = (w[0], w[1]);
        if sgn(f0) * sgn(f1) < 0 {
            out.push((refine_sign_change(&f, s0, s1, f0, f1, tol_z)?, 1));
        } else if f1 == 0.0 && s1 < sb {
            out.push((lambda_of_s(s1), 1));
        }
    }
    // tangencies: grid-local extrema of |f| that dip below tol_tang
    // without a sign change
    for i in 1..vals.len() - 1 {
        let (sm1, v0) = vals[i - 1];
        let (s0, v1) = vals[i];
        let (sp1, v2) = vals[i + 1];
        let _ = s0;
        if v1.abs() <= v0.abs() && v1.abs() <= v2.abs() && sgn(v0) == sgn(v2) && sgn(v0) != 0 {
            let (sm, fm) = minimize_abs(&f, sm1, sp1, tol_z);
            if fm <= tol_tang {
                let lam = lambda_of_s(sm);
                let dup = out
                    .iter()
                    .any(|&(r, _)| (s_of_lambda(r) - sm).abs() < 50.0 * tol_z.max(1e-12));
                if !dup {
                    out.push((lam, 2));
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

/// Bracketed real-root search over a z window: sign-change roots
/// refined to |Δz| < tol plus tangential double roots.
pub fn real_roots(f: impl Fn(f64) -> f64, bracket: &Bracket, tol: f64) -> Result<Vec<RealRoot>> {
    let lo = bracket.z_lo * bracket.z_lo;
    let hi = bracket.z_hi * bracket.z_hi;
    let found = roots_with_tangencies(f, lo, hi, 16, tol, crate::TOL_TANG)?;
    let roots: Vec<RealRoot> = found
        .into_iter()
        .map(|(lambda, multiplicity)| RealRoot { lambda, multiplicity })
        .collect();
    if let Some(want) = bracket.expected {
        let total: usize = roots.iter().map(|r| r.multiplicity as usize).sum();
        if total != want {
            return Err(SpectralError::numeric(format!(
                "bracket [{}, {}] expected {want} roots, found {total}",
                bracket.z_lo, bracket.z_hi
            )));
        }
    }
    Ok(roots)
}

/// Which zero family a localization disk targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiskKind {
    /// zeros of D₀⁻ near z = πn + π/2 ± arcsin(1/3)
    Antiperiodic,
    /// zeros of D_k⁺ near z = πn + π/2 ± arcsin(√(5 ± 4c_k)/3)
    Periodic,
    /// real zeros of ρ_k near z = πn - π/2 ± arcsin(s_k/3)
    Resonance,
}

/// Localization disks for index n, paired with the zero count each disk
/// must contain for n beyond the validity threshold.  Coincident disks
/// at the degenerate angles c_k ∈ {0, 1} are merged with summed counts.
pub fn localization_disks(kind: DiskKind, a: &TubeAngle, n: u32) -> Result<Vec<(Disk, usize)>> {
    let nf = n as f64;
    let mk = |center: f64, radius: f64, count: usize| {
        (Disk { center: Complex64::new(center, 0.0), radius }, count)
    };
    match kind {
        DiskKind::Antiperiodic => {
            let base = PI * nf + PI / 2.0;
            let off = (1.0f64 / 3.0).asin();
            Ok(vec![mk(base - off, 1.0 / 3.0, 2), mk(base + off, 1.0 / 3.0, 2)])
        }
        DiskKind::Periodic => {
            let base = PI * nf + PI / 2.0;
            let c = a.c;
            if c == 1.0 {
                // k = 0: the 5+4c family degenerates onto integer
                // multiples of π, two zeros per merged disk
                let off = (1.0f64 / 3.0).asin();
                Ok(vec![
                    mk(PI * nf, 1.0 / 3.0, 2),
                    mk(base - off, 1.0 / 3.0, 1),
                    mk(base + off, 1.0 / 3.0, 1),
                ])
            } else if c == 0.0 {
                // k = N/2: both branch levels coincide
                let off = (5.0f64.sqrt() / 3.0).asin();
                Ok(vec![mk(base - off, 1.0 / 3.0, 2), mk(base + off, 1.0 / 3.0, 2)])
            } else {
                let off1 = ((5.0 - 4.0 * c).sqrt() / 3.0).asin();
                let off2 = ((5.0 + 4.0 * c).sqrt() / 3.0).asin();
                Ok(vec![
                    mk(base - off2, 1.0 / 3.0, 1),
                    mk(base - off1, 1.0 / 3.0, 1),
                    mk(base + off1, 1.0 / 3.0, 1),
                    mk(base + off2, 1.0 / 3.0, 1),
                ])
            }
        }
        DiskKind::Resonance => {
            if a.is_axial() || a.is_transverse() {
                return Err(SpectralError::invalid(
                    "resonance disks are defined only for k not in {0, N/2}".to_string(),
                ));
            }
            let base = PI * nf - PI / 2.0;
            let off = (a.s / 3.0).asin();
            Ok(vec![mk(base - off, a.s / 3.0, 1), mk(base + off, a.s / 3.0, 1)])
        }
    }
}

/// Zero count of an analytic function inside a disk via the argument
/// principle: winding number of f along the boundary circle (traversed
/// in z, evaluated in λ = z²), with adaptive sample doubling until the
/// raw winding is within 0.25 of a stable integer.
pub fn count_zeros(f: impl Fn(Complex64) -> Complex64, disk: &Disk) -> Result<usize> {
    match count_zeros_at_radius(&f, disk.center, disk.radius) {
        Ok(n) => Ok(n),
        Err(first) => {
            // a zero close to the boundary: nudge the radius
            for scale in [1.05, 0.95] {
                if let Ok(n) = count_zeros_at_radius(&f, disk.center, disk.radius * scale) {
                    return Ok(n);
                }
            }
            Err(first)
        }
    }
}

fn count_zeros_at_radius(
    f: &impl Fn(Complex64) -> Complex64,
    center: Complex64,
    radius: f64,
) -> Result<usize> {
    let mut m = 256usize;
    let mut prev_round: Option<i64> = None;
    while m <= 16384 {
        let mut vals = Vec::with_capacity(m);
        let mut min_abs = f64::INFINITY;
        let mut max_abs = 0.0f64;
        for j in 0..m {
            let th = 2.0 * PI * j as f64 / m as f64;
            let z = center + radius * Complex64::new(th.cos(), th.sin());
            let w = f(z * z);
            let a = w.norm();
            min_abs = min_abs.min(a);
            max_abs = max_abs.max(a);
            vals.push(w);
        }
        if !(min_abs > 1e-7 * max_abs) || max_abs == 0.0 {
            return Err(SpectralError::numeric(format!(
                "count_zeros: zero too close to boundary circle at center {center}, radius {radius}"
            )));
        }
        let mut total = 0.0;
        for j in 0..m {
            let ratio = vals[(j + 1) % m] / vals[j];
            total += ratio.arg();
        }
        let raw = total / (2.0 * PI);
        let rounded = raw.round();
        if (raw - rounded).abs() <= 0.25 {
            let r = rounded as i64;
            if prev_round == Some(r) {
                if r < 0 {
                    return Err(SpectralError::numeric(format!(
                        "count_zeros: negative winding {r} (function not analytic on disk?)"
                    )));
                }
                return Ok(r as usize);
            }
            prev_round = Some(r);
        } else {
            prev_round = None;
        }
        m *= 2;
    }
    Err(SpectralError::numeric(format!(
        "count_zeros: winding did not stabilize at center {center}, radius {radius}"
    )))
}

/// Smallest n* >= 2 such that for every n in [n*, n*+5] all
/// localization disks (antiperiodic, periodic, and resonance when the
/// angle admits one) contain exactly the asserted zero count.
pub fn find_n0(q: &PeriodicPotential, a: &TubeAngle) -> Result<u32> {
    let dminus = |lam: Complex64| crate::lyapunov::discriminants_complex(q, a, lam).1;
    let dplus = |lam: Complex64| crate::lyapunov::discriminants_complex(q, a, lam).0;
    let rho = |lam: Complex64| crate::lyapunov::xi_rho_complex(q, a, lam).1;

    let check_n = |n: u32| -> Result<bool> {
        for (disk, want) in localization_disks(DiskKind::Antiperiodic, a, n)? {
            if count_zeros(dminus, &disk)? != want {
                return Ok(false);
            }
        }
        for (disk, want) in localization_disks(DiskKind::Periodic, a, n)? {
            if count_zeros(dplus, &disk)? != want {
                return Ok(false);
            }
        }
        if !a.is_axial() && !a.is_transverse() {
            for (disk, want) in localization_disks(DiskKind::Resonance, a, n)? {
                if count_zeros(rho, &disk)? != want {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };

    let mut cache: Vec<Option<bool>> = vec![None; 72];
    for n_star in 2u32..=64 {
        let mut ok = true;
        for n in n_star..=n_star + 5 {
            let idx = n as usize;
            let good = match cache[idx] {
                Some(g) => g,
                None => {
                    let g = check_n(n)?;
                    cache[idx] = Some(g);
                    g
                }
            };
            if !good {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(n_star);
        }
    }
    Err(SpectralError::numeric(
        "find_n0: no stable localization threshold below n = 64 (potential too rough?)".to_string(),
    ))
}
