//! The quasi-momentum-resolved scalar functions of the fiber operators:
//! from the Hill data (F, F₋) and the tube angle (s_k, c_k) it builds
//!
//! ```text
//! ξ_k = (9F² - F₋² - 1)/2 - s_k²,      ρ_k = (9F² - s_k²) c_k² + s_k² F₋²,
//! F_{k,1/2} = ξ_k ± √ρ_k,
//! g_{k,ν} = 5 + F₋² + (-1)^ν 2√(F₋² + 4c_k²),   h_ν = (1 + (-1)^ν |F₋|)²,
//! u_k = |F₋| - s_k²,   v_k = |F₋| - c_k²,   f_k = s_k² (1 - F₋²/c_k²),
//! ```
//!
//! together with the factorized discriminants D_k^± and the
//! branch-free band-membership predicates.  All real-axis spectral
//! logic goes through the level comparisons (9F² against g, h), never
//! through √ρ_k, so the branch points of F_{k,ν} on the real line never
//! enter band assembly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SpectralError};
use crate::hill::{monodromy, Monodromy, MonodromyReal};
use crate::potential::PeriodicPotential;

/// Discrete circumferential angle of the tube: k of N, with
/// s_k = sin(πk/N) and c_k = cos(πk/N).
///
/// Only s_k² and c_k² enter the spectral functions, so k and N-k are
/// computed from the canonical representative min(k, N-k); this makes
/// the k ↔ N-k symmetry of all reports bit-exact.  The degenerate
/// angles carry exact values: s = 0, c = 1 at k = 0 and s = 1, c = 0 at
/// k = N/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeAngle {
    /// tube circumference index N >= 1
    pub big_n: u32,
    /// quasi-momentum index in 0..N-1 as requested
    pub k: u32,
    pub s: f64,
    pub c: f64,
}

impl TubeAngle {
    pub fn new(big_n: u32, k: u32) -> Result<Self> {
        if big_n == 0 {
            return Err(SpectralError::invalid("tube index N must be >= 1"));
        }
        if k >= big_n {
            return Err(SpectralError::invalid(format!(
                "quasi-momentum k = {k} out of range 0..{big_n}"
            )));
        }
        let kk = k.min(big_n - k);
        let (s, c) = if kk == 0 {
            (0.0, 1.0)
        } else if 2 * kk == big_n {
            (1.0, 0.0)
        } else {
            let ang = PI * kk as f64 / big_n as f64;
            (ang.sin(), ang.cos())
        };
        Ok(TubeAngle { big_n, k, s, c })
    }

    /// k ≡ 0 (mod N): ρ₀ = 9F², resonances are the zeros of F.
    pub fn is_axial(&self) -> bool {
        self.c == 1.0
    }

    /// k = N/2: c_k = 0, ρ = F₋², and band edges of the first branch
    /// are always antiperiodic eigenvalues.
    pub fn is_transverse(&self) -> bool {
        self.c == 0.0
    }
}

/// All scalar functions at one real λ.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovReal {
    pub lambda: f64,
    pub nine_f2: f64,
    pub abs_fm: f64,
    pub xi: f64,
    pub rho: f64,
    pub g1: f64,
    pub g2: f64,
    pub h1: f64,
    pub h2: f64,
    pub u: f64,
    pub v: f64,
    /// f_k = s²(1 - F₋²/c²); undefined at c_k = 0
    pub f: Option<f64>,
    pub s2: f64,
    pub c2: f64,
}

impl LyapunovReal {
    /// The two branches ξ ± √ρ where ρ >= 0; None inside resonance
    /// gaps (ρ < 0), where the branches are non-real.
    pub fn branches(&self) -> Option<(f64, f64)> {
        if self.rho >= 0.0 {
            let r = self.rho.sqrt();
            Some((self.xi + r, self.xi - r))
        } else {
            None
        }
    }
}

/// Lyapunov data at a complex λ: the branch pair with the principal
/// square root, plus the real level set when λ is real.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovData {
    pub lambda: Complex64,
    pub xi: Complex64,
    pub rho: Complex64,
    pub fk1: Complex64,
    pub fk2: Complex64,
    pub real: Option<LyapunovReal>,
}

/// Evaluates every scalar function from real monodromy data.
pub fn evaluate_real(m: &MonodromyReal, a: &TubeAngle) -> LyapunovReal {
    let (s2, c2) = (a.s * a.s, a.c * a.c);
    let nine_f2 = 9.0 * m.f * m.f;
    let fm2 = m.f_minus * m.f_minus;
    let abs_fm = m.f_minus.abs();
    let root = (fm2 + 4.0 * c2).sqrt();
    LyapunovReal {
        lambda: m.lambda,
        nine_f2,
        abs_fm,
        xi: 0.5 * (nine_f2 - fm2 - 1.0) - s2,
        rho: (nine_f2 - s2) * c2 + s2 * fm2,
        g1: 5.0 + fm2 - 2.0 * root,
        g2: 5.0 + fm2 + 2.0 * root,
        h1: (1.0 - abs_fm) * (1.0 - abs_fm),
        h2: (1.0 + abs_fm) * (1.0 + abs_fm),
        u: abs_fm - s2,
        v: abs_fm - c2,
        f: if c2 > 0.0 { Some(s2 * (1.0 - fm2 / c2)) } else { None },
        s2,
        c2,
    }
}

/// Evaluates the Lyapunov data at complex λ.  On the real axis with
/// ρ > 0 the positive square root is taken, so F_{k,1} > F_{k,2};
/// elsewhere the principal complex branch is used (only zero counting
/// consumes these values, which is branch-independent).
pub fn evaluate(m: &Monodromy, a: &TubeAngle) -> LyapunovData {
    let (s2, c2) = (a.s * a.s, a.c * a.c);
    let nine_f2 = 9.0 * m.f * m.f;
    let fm2 = m.f_minus * m.f_minus;
    let xi = 0.5 * (nine_f2 - fm2 - 1.0) - s2;
    let rho = (nine_f2 - s2) * c2 + s2 * fm2;
    let sqrt_rho = if m.lambda.im == 0.0 && rho.im.abs() < 1e-300 && rho.re >= 0.0 {
        Complex64::new(rho.re.sqrt(), 0.0)
    } else {
        rho.sqrt()
    };
    let real = if m.lambda.im == 0.0 {
        let mr = MonodromyReal {
            lambda: m.lambda.re,
            theta1: m.theta1.re,
            theta1p: m.theta1p.re,
            phi1: m.phi1.re,
            phi1p: m.phi1p.re,
            f: m.f.re,
            f_minus: m.f_minus.re,
        };
        Some(evaluate_real(&mr, a))
    } else {
        None
    };
    LyapunovData { lambda: m.lambda, xi, rho, fk1: xi + sqrt_rho, fk2: xi - sqrt_rho, real }
}

/// D_k^± = 4(F_{k,1} ∓ 1)(F_{k,2} ∓ 1) = 4((ξ ∓ 1)² - ρ); the product
/// form is branch-free and entire.
pub fn discriminants(d: &LyapunovData) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let dp = 4.0 * ((d.xi - one) * (d.xi - one) - d.rho);
    let dm = 4.0 * ((d.xi + one) * (d.xi + one) - d.rho);
    (dp, dm)
}

/// Factorized real-axis forms: D⁺ = (9F² - g₁)(9F² - g₂) and
/// D⁻ = (9F² - h₁)(9F² - h₂).
pub fn discriminants_real(r: &LyapunovReal) -> (f64, f64) {
    (
        (r.nine_f2 - r.g1) * (r.nine_f2 - r.g2),
        (r.nine_f2 - r.h1) * (r.nine_f2 - r.h2),
    )
}

/// (ξ_k, ρ_k) at complex λ, entire in λ.
pub fn xi_rho_complex(q: &PeriodicPotential, a: &TubeAngle, lambda: Complex64) -> (Complex64, Complex64) {
    let m = monodromy(q, lambda);
    let (s2, c2) = (a.s * a.s, a.c * a.c);
    let nine_f2 = 9.0 * m.f * m.f;
    let fm2 = m.f_minus * m.f_minus;
    (
        0.5 * (nine_f2 - fm2 - 1.0) - s2,
        (nine_f2 - s2) * c2 + s2 * fm2,
    )
}

/// (D_k⁺, D_k⁻) at complex λ, entire in λ.
pub fn discriminants_complex(
    q: &PeriodicPotential,
    a: &TubeAngle,
    lambda: Complex64,
) -> (Complex64, Complex64) {
    let (xi, rho) = xi_rho_complex(q, a, lambda);
    let one = Complex64::new(1.0, 0.0);
    (
        4.0 * ((xi - one) * (xi - one) - rho),
        4.0 * ((xi + one) * (xi + one) - rho),
    )
}

/// Branch-free membership test: is λ in σ_{k,ν} = {F_{k,ν} ∈ [-1, 1]}?
///
/// Decided entirely from 9F², g, h, |F₋| and c_k²:
/// F_{k,ν} <= 1 iff 9F² <= g_{k,ν};
/// F_{k,1} >= -1 iff 9F² >= h₁ or |F₋| <= c_k²;
/// F_{k,2} >= -1 iff 9F² >= h₂ or (9F² <= h₁ and |F₋| <= c_k²).
/// Points with ρ_k < -tol (non-real branches) are outside both sets;
/// boundary equalities within `tol` count as membership.
pub fn membership(r: &LyapunovReal, tol: f64) -> (bool, bool) {
    if r.rho < -tol {
        return (false, false);
    }
    let le = |a: f64, b: f64| a <= b + tol;
    let ge = |a: f64, b: f64| a >= b - tol;
    let below1_1 = le(r.nine_f2, r.g1);
    let below1_2 = le(r.nine_f2, r.g2);
    let above1 = ge(r.nine_f2, r.h1) || le(r.abs_fm, r.c2);
    let above2 = ge(r.nine_f2, r.h2) || (le(r.nine_f2, r.h1) && le(r.abs_fm, r.c2));
    (below1_1 && above1, below1_2 && above2)
}

/// Convenience wrapper evaluating everything at a real λ.
pub fn at_real(q: &PeriodicPotential, a: &TubeAngle, lambda: f64) -> LyapunovReal {
    evaluate_real(&crate::hill::monodromy_real(q, lambda), a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hill::monodromy_real;
    use rand::{Rng, SeedableRng};

    fn random_potential(rng: &mut impl Rng) -> PeriodicPotential {
        PeriodicPotential::new(
            vec![
                (0.0, rng.gen_range(-3.0..3.0)),
                (0.25, rng.gen_range(-3.0..3.0)),
                (0.5, rng.gen_range(-3.0..3.0)),
                (0.75, rng.gen_range(-3.0..3.0)),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn angle_canonicalization_and_invariants() {
        for big_n in 1..=8u32 {
            for k in 0..big_n {
                let a = TubeAngle::new(big_n, k).unwrap();
                assert!((a.s * a.s + a.c * a.c - 1.0).abs() < 1e-15);
                let b = TubeAngle::new(big_n, (big_n - k) % big_n).unwrap();
                assert_eq!(a.s.to_bits(), b.s.to_bits());
                assert_eq!(a.c.to_bits(), b.c.to_bits());
            }
        }
        assert!(TubeAngle::new(4, 4).is_err());
        assert!(TubeAngle::new(0, 0).is_err());
        assert!(TubeAngle::new(4, 0).unwrap().is_axial());
        assert!(TubeAngle::new(4, 2).unwrap().is_transverse());
        assert!(TubeAngle::new(3, 1).unwrap().c > 0.0);
    }

    #[test]
    fn free_evaluation_closed_form() {
        // q = 0, λ = (π/2)²: F = F₋ = 0, N = 4, k = 1 (s² = c² = 1/2)
        let q = PeriodicPotential::zero();
        let a = TubeAngle::new(4, 1).unwrap();
        let lam = (PI / 2.0) * (PI / 2.0);
        let r = at_real(&q, &a, lam);
        assert!((r.xi - (-1.0)).abs() < 1e-13);
        assert!((r.rho - (-0.25)).abs() < 1e-13);
        assert!((r.u - (-0.5)).abs() < 1e-13);
        assert!((r.v - (-0.5)).abs() < 1e-13);
        assert!((r.g1 - (5.0 - 2.0 * 2.0f64.sqrt())).abs() < 1e-13);
        assert!((r.g2 - (5.0 + 2.0 * 2.0f64.sqrt())).abs() < 1e-13);
        assert!((r.h1 - 1.0).abs() < 1e-13);
        assert!((r.h2 - 1.0).abs() < 1e-13);
        assert!(r.branches().is_none());
    }

    #[test]
    fn degenerate_angles() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let q = random_potential(&mut rng);
        let a0 = TubeAngle::new(4, 0).unwrap();
        let am = TubeAngle::new(4, 2).unwrap();
        for _ in 0..50 {
            let lam = rng.gen_range(-5.0..200.0);
            let r0 = at_real(&q, &a0, lam);
            assert!((r0.rho - r0.nine_f2).abs() < 1e-11 * (1.0 + r0.nine_f2.abs()));
            let rm = at_real(&q, &am, lam);
            let fm2 = rm.abs_fm * rm.abs_fm;
            assert!((rm.rho - fm2).abs() < 1e-11 * (1.0 + fm2));
            assert!(rm.f.is_none());
            assert!(r0.f.is_some());
        }
    }

    #[test]
    fn branch_sum_and_product_identities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let q = random_potential(&mut rng);
        let a = TubeAngle::new(5, 2).unwrap();
        for _ in 0..200 {
            let lam = Complex64::new(rng.gen_range(-10.0..150.0), rng.gen_range(-4.0..4.0));
            let d = evaluate(&monodromy(&q, lam), &a);
            let sum = d.fk1 + d.fk2 - 2.0 * d.xi;
            let prod = d.fk1 * d.fk2 - (d.xi * d.xi - d.rho);
            let scale = 1.0 + d.xi.norm() + d.rho.norm();
            assert!(sum.norm() < 1e-10 * scale);
            assert!(prod.norm() < 1e-10 * scale * scale);
        }
        // real λ with ρ > 0: branches real, ordered
        for _ in 0..400 {
            let lam = rng.gen_range(-5.0..300.0);
            let r = at_real(&q, &a, lam);
            if r.rho > 0.0 {
                let (f1, f2) = r.branches().unwrap();
                assert!(f1 > f2);
            }
        }
    }

    #[test]
    fn level_chain_and_monotonicity_in_k() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..6 {
            let q = random_potential(&mut rng);
            let big_n = 6u32;
            for _ in 0..120 {
                let lam = rng.gen_range(-5.0..300.0);
                let m = monodromy_real(&q, lam);
                let rs: Vec<LyapunovReal> = (0..=big_n / 2)
                    .map(|k| evaluate_real(&m, &TubeAngle::new(big_n, k).unwrap()))
                    .collect();
                for r in &rs {
                    assert!(r.h1 <= r.h2.min(r.g1) + 1e-12);
                    assert!(r.h2.max(r.g1) <= r.g2 + 1e-12);
                }
                for w in rs.windows(2) {
                    // g₂ grows and g₁ falls as k moves toward 0
                    assert!(w[1].g2 < w[0].g2 + 1e-12);
                    assert!(w[0].g1 < w[1].g1 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn factorized_discriminants_match_definition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let q = random_potential(&mut rng);
        for big_n in [4u32, 5] {
            for k in 0..big_n {
                let a = TubeAngle::new(big_n, k).unwrap();
                for _ in 0..80 {
                    let lam = rng.gen_range(-5.0..250.0);
                    let r = at_real(&q, &a, lam);
                    let d = evaluate(&monodromy(&q, Complex64::new(lam, 0.0)), &a);
                    let (dp_def, dm_def) = discriminants(&d);
                    let (dp_fac, dm_fac) = discriminants_real(&r);
                    let scale = 1.0 + dp_def.norm() + dm_def.norm();
                    assert!((dp_def.re - dp_fac).abs() < 1e-9 * scale, "D+ at λ={lam}");
                    assert!((dm_def.re - dm_fac).abs() < 1e-9 * scale, "D- at λ={lam}");
                }
            }
        }
    }

    #[test]
    fn rho_identity_through_f_level() {
        // ρ_k = c_k² (9F² - f_k) away from c_k = 0
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let q = random_potential(&mut rng);
        let a = TubeAngle::new(5, 1).unwrap();
        for _ in 0..100 {
            let lam = rng.gen_range(-5.0..200.0);
            let r = at_real(&q, &a, lam);
            let via_f = r.c2 * (r.nine_f2 - r.f.unwrap());
            assert!((r.rho - via_f).abs() < 1e-10 * (1.0 + r.rho.abs()));
        }
    }

    #[test]
    fn dminus_free_is_perfect_square() {
        let q = PeriodicPotential::zero();
        let a = TubeAngle::new(4, 1).unwrap();
        for i in 0..60 {
            let lam = 0.2 + i as f64;
            let r = at_real(&q, &a, lam);
            let (_, dm) = discriminants_real(&r);
            let root = r.nine_f2 - 1.0;
            assert!((dm - root * root).abs() < 1e-10 * (1.0 + dm.abs()));
        }
    }

    #[test]
    fn membership_examples_free_potential() {
        let q = PeriodicPotential::zero();
        let a = TubeAngle::new(4, 1).unwrap();
        // 9F² between h₁ and g₁: both branches inside (multiplicity 4)
        let r = at_real(&q, &a, 1.3);
        assert!(r.nine_f2 > r.h1 && r.nine_f2 < r.g1);
        assert_eq!(membership(&r, 1e-9), (true, true));
        // inside the resonance gap: ρ < 0, both out
        let r = at_real(&q, &a, 2.4);
        assert!(r.rho < 0.0);
        assert_eq!(membership(&r, 1e-9), (false, false));
        // k = 0 low energy: only the second branch
        let a0 = TubeAngle::new(4, 0).unwrap();
        let r = at_real(&q, &a0, 0.05);
        assert!(r.nine_f2 < r.g2 && r.nine_f2 > r.h2 && r.nine_f2 > r.g1);
        assert_eq!(membership(&r, 1e-9), (false, true));
    }

    #[test]
    fn membership_agrees_with_direct_branch_test() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        for _ in 0..4 {
            let q = random_potential(&mut rng);
            for big_n in [4u32, 5] {
                for k in 0..big_n {
                    let a = TubeAngle::new(big_n, k).unwrap();
                    let mut checked = 0;
                    for _ in 0..250 {
                        let lam = rng.gen_range(-5.0..250.0);
                        let r = at_real(&q, &a, lam);
                        if r.rho.abs() <= 1e-7 {
                            continue; // boundary layer around branch points
                        }
                        let near_edge = r.branches().map_or(false, |(f1, f2)| {
                            [f1, f2].iter().any(|f| (f.abs() - 1.0).abs() <= 1e-6)
                        });
                        if near_edge {
                            continue; // boundary layer around band edges
                        }
                        checked += 1;
                        let got = membership(&r, 1e-9);
                        let want = match r.branches() {
                            Some((f1, f2)) => {
                                let inside = |x: f64| (-1.0..=1.0).contains(&x);
                                (inside(f1), inside(f2))
                            }
                            None => (false, false),
                        };
                        assert_eq!(got, want, "λ = {lam}, k = {k}, N = {big_n}");
                    }
                    assert!(checked > 150);
                }
            }
        }
    }
}
