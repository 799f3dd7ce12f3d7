//! Assembly of the fiber spectra: labeled periodic/antiperiodic
//! eigenvalues and resonances, band edges with attribution, the
//! multiplicity map, classified gaps, the full-operator gaps
//! G_n = ∩_k G_{k,n}, and the high-energy edge asymptotics.
//!
//! The eigenvalue labeling rests on the anchor structure: between
//! consecutive members of the interlaced chain η₁ < μ₁ < η₂ < ... each
//! level factor 9F² - g_{k,ν} and 9F² - h_ν has exactly one zero, so
//! the (ν, n, ±) labels follow from the anchor interval index alone.
//! Resonances are confined to the antiperiodic intervals
//! κ_n = (λ_{1,2n-1}^{0,-}, λ_{1,2n-1}^{0,+}) and are searched only
//! there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SpectralError};
use crate::hill::{anchored_factor_roots, Anchors, HillEdges, MonodromyReal};
use crate::lyapunov::{self, TubeAngle};
use crate::potential::PeriodicPotential;
use crate::rootfind;
use crate::Tolerances;

// ---------------------------------------------------------------------------
// labeled spectral data
// ---------------------------------------------------------------------------

/// What kind of spectral point a labeled value is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenKind {
    Periodic,
    Antiperiodic,
    Resonance,
    Dirichlet,
    LyapunovZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

/// A real spectral point with its full label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledEigenvalue {
    pub value: f64,
    pub kind: EigenKind,
    /// branch index 1 or 2, when applicable
    pub nu: Option<u8>,
    /// index n within its family (1-based for μ, η; the eigenvalue
    /// index for periodic/antiperiodic points)
    pub n: u32,
    pub sign: Option<Sign>,
    /// quasi-momentum index, when the family is k-resolved
    pub k: Option<u32>,
}

/// Which zero family realizes a band edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Periodic,
    Antiperiodic,
    Resonance,
}

/// One realized band-edge value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub lambda: f64,
    pub kind: EdgeKind,
    pub nu: u8,
    pub n: u32,
    pub sign: Sign,
    /// set when the v_k test at this edge fell inside the tolerance
    /// band around zero and the antiperiodic branch was chosen
    pub v_boundary: bool,
}

/// Spectral band S_{ν,n}^k = [E_{ν,n-1}^{k,+}, E_{ν,n}^{k,-}].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub nu: u8,
    pub n: u32,
    pub k: u32,
    pub lo: f64,
    pub hi: f64,
    pub lo_edge: Edge,
    pub hi_edge: Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapClass {
    Periodic,
    Antiperiodic,
    Resonance,
    PMix,
    RMix,
    Empty,
}

/// A (possibly empty) spectral gap; `lo` may be -∞ for the gap below
/// the spectrum.  The gap is empty iff lo >= hi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// fiber index; None for a gap of the full operator
    pub k: Option<u32>,
    /// gap index n in G_{k,n}
    pub n: u32,
    pub lo: f64,
    pub hi: f64,
    pub class: GapClass,
}

impl Gap {
    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}

/// Piecewise multiplicity (2 or 4) of the absolutely continuous
/// spectrum of one fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityMap {
    pub pieces: Vec<MultiplicityPiece>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityPiece {
    pub lo: f64,
    pub hi: f64,
    pub multiplicity: u8,
}

/// Everything computed for one fiber H_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSpectrum {
    pub k: u32,
    pub big_n: u32,
    pub periodic: Vec<LabeledEigenvalue>,
    pub antiperiodic: Vec<LabeledEigenvalue>,
    pub resonances: Vec<LabeledEigenvalue>,
    /// κ_n = (λ_{1,2n-1}^{0,-}, λ_{1,2n-1}^{0,+}), 1-based by position
    pub kappa: Vec<(f64, f64)>,
    pub bands: Vec<Band>,
    pub multiplicity: MultiplicityMap,
    pub gaps: Vec<Gap>,
    /// smallest index from which every computed p-mix gap (k ≠ 0) or
    /// antiperiodic gap family (k = 0) is empty, within the computed
    /// range
    pub observed_gap_threshold: Option<u32>,
    pub warnings: Vec<String>,
}

/// The full-operator report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub schema: u32,
    pub big_n: u32,
    pub lambda_max: f64,
    /// σ_D: flat bands of infinite multiplicity (Dirichlet spectrum)
    pub flat_bands: Vec<f64>,
    /// zeros of the discriminant
    pub eta: Vec<f64>,
    pub hill_lowest: f64,
    pub hill_gaps: Vec<(f64, f64)>,
    /// fibers for the canonical range k = 0..⌊N/2⌋
    pub fibers: Vec<FiberSpectrum>,
    /// G_n = ∩_k G_{k,n}
    pub full_gaps: Vec<Gap>,
    /// odd N has no closed form for the odd-index full gaps; they are
    /// computed by plain intersection
    pub odd_n_intersection_only: bool,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// shared context
// ---------------------------------------------------------------------------

/// Anchor lists and the k-independent antiperiodic data, computed once
/// per (potential, λ range) and shared by every fiber.
pub struct SpectralContext<'q> {
    pub q: &'q PeriodicPotential,
    pub lambda_max: f64,
    pub tol: Tolerances,
    pub anchors: Anchors,
    /// anchored roots of 9F² - h_ν, ν = 1, 2
    h_roots: [Vec<f64>; 2],
}

impl<'q> SpectralContext<'q> {
    pub fn new(q: &'q PeriodicPotential, lambda_max: f64, tol: Tolerances) -> Result<Self> {
        let anchors = Anchors::compute(q, lambda_max, tol.root_z)?;
        let h1 = anchored_factor_roots(q, &anchors, |m| level_h(m, 1), tol.root_z, tol.tang)?;
        let h2 = anchored_factor_roots(q, &anchors, |m| level_h(m, 2), tol.root_z, tol.tang)?;
        Ok(SpectralContext { q, lambda_max, tol, anchors, h_roots: [h1, h2] })
    }

    /// κ_n for n = 1.. : the h₁ gap straddling η_n.
    fn kappa(&self, n: usize) -> Option<(f64, f64)> {
        let h1 = &self.h_roots[0];
        if 2 * n - 1 < h1.len() {
            Some((h1[2 * n - 2], h1[2 * n - 1]))
        } else {
            None
        }
    }

    fn kappa_count(&self) -> usize {
        self.h_roots[0].len() / 2
    }
}

fn level_h(m: &MonodromyReal, nu: u8) -> f64 {
    let afm = m.f_minus.abs();
    let h = if nu == 1 { (1.0 - afm) * (1.0 - afm) } else { (1.0 + afm) * (1.0 + afm) };
    9.0 * m.f * m.f - h
}

fn level_g(m: &MonodromyReal, a: &TubeAngle, nu: u8) -> f64 {
    let fm2 = m.f_minus * m.f_minus;
    let root = (fm2 + 4.0 * a.c * a.c).sqrt();
    let g = if nu == 1 { 5.0 + fm2 - 2.0 * root } else { 5.0 + fm2 + 2.0 * root };
    9.0 * m.f * m.f - g
}

fn rho_at(q: &PeriodicPotential, a: &TubeAngle, lambda: f64) -> f64 {
    lyapunov::at_real(q, a, lambda).rho
}

// ---------------------------------------------------------------------------
// eigenvalue labeling from anchor intervals
// ---------------------------------------------------------------------------

/// (n, sign) of the periodic eigenvalue found in anchor interval j.
fn periodic_label(j: usize) -> (u32, Sign) {
    if j == 0 {
        (0, Sign::Plus)
    } else if j % 2 == 1 {
        ((j + 1) as u32, Sign::Minus)
    } else {
        (j as u32, Sign::Plus)
    }
}

/// (n, sign) of the antiperiodic eigenvalue found in anchor interval j.
fn antiperiodic_label(j: usize) -> (u32, Sign) {
    if j == 0 {
        (1, Sign::Minus)
    } else if j % 2 == 1 {
        (j as u32, Sign::Plus)
    } else {
        ((j + 1) as u32, Sign::Minus)
    }
}

fn labeled(value: f64, kind: EigenKind, nu: u8, n: u32, sign: Sign, k: u32) -> LabeledEigenvalue {
    LabeledEigenvalue { value, kind, nu: Some(nu), n, sign: Some(sign), k: Some(k) }
}

// ---------------------------------------------------------------------------
// per-fiber assembly
// ---------------------------------------------------------------------------

/// Resonances of one κ̄_n: all real zeros of ρ_k inside, with
/// multiplicity, plus the extracted extremes (r⁻, r⁺).
#[derive(Debug, Clone)]
struct KappaResonances {
    /// flattened with multiplicity, sorted
    points: Vec<f64>,
}

impl KappaResonances {
    fn r_minus(&self) -> Option<f64> {
        self.points.first().copied()
    }
    fn r_plus(&self) -> Option<f64> {
        self.points.last().copied()
    }
}

struct FiberAssembler<'a, 'q> {
    ctx: &'a SpectralContext<'q>,
    a: TubeAngle,
    /// anchored roots of 9F² - g_{k,ν}
    g_roots: [Vec<f64>; 2],
    res: Vec<KappaResonances>,
    warnings: Vec<String>,
}

impl<'a, 'q> FiberAssembler<'a, 'q> {
    fn new(ctx: &'a SpectralContext<'q>, a: TubeAngle) -> Result<Self> {
        let (q, tol) = (ctx.q, &ctx.tol);
        let aa = a;
        let g1 = anchored_factor_roots(q, &ctx.anchors, |m| level_g(m, &aa, 1), tol.root_z, tol.tang)?;
        let g2 = anchored_factor_roots(q, &ctx.anchors, |m| level_g(m, &aa, 2), tol.root_z, tol.tang)?;
        let mut asm = FiberAssembler {
            ctx,
            a,
            g_roots: [g1, g2],
            res: Vec::new(),
            warnings: Vec::new(),
        };
        asm.locate_resonances()?;
        Ok(asm)
    }

    /// Real zeros of ρ_k in every κ̄_n.  For k = 0 these are the η_n
    /// (double); for k = N/2 they are the zeros of F₋ (double); in the
    /// generic case they are found by a fine scan of ρ_k.
    fn locate_resonances(&mut self) -> Result<()> {
        let (q, tol) = (self.ctx.q, &self.ctx.tol);
        let a = self.a;
        for n in 1..=self.ctx.kappa_count() {
            let (lo, hi) = self.ctx.kappa(n).unwrap();
            let eta_n = self.ctx.anchors.eta[n - 1];
            if self.a.is_axial() {
                // ρ₀ = 9F²: a double zero at each η_n
                self.res.push(KappaResonances { points: vec![eta_n, eta_n] });
                continue;
            }
            if hi - lo <= 4.0 * tol.edge {
                // degenerate κ: the pair collapses; a resonance sits
                // there only if ρ vanishes
                let mid = 0.5 * (lo + hi);
                let points = if rho_at(q, &a, mid).abs() <= tol.tang.max(1e-9) {
                    vec![mid, mid]
                } else {
                    Vec::new()
                };
                self.res.push(KappaResonances { points });
                continue;
            }
            if self.a.is_transverse() {
                // ρ = F₋²: zeros of F₋, each a double zero of ρ
                let m_scale: f64 = {
                    let grid = 32;
                    (0..=grid)
                        .map(|i| {
                            let lam = lo + (hi - lo) * i as f64 / grid as f64;
                            crate::hill::monodromy_real(q, lam).f_minus.abs()
                        })
                        .fold(0.0, f64::max)
                };
                if m_scale < 1e-11 {
                    // F₋ vanishes identically (even potential): no
                    // isolated resonances exist
                    self.res.push(KappaResonances { points: Vec::new() });
                    continue;
                }
                let zeros = rootfind::roots_with_tangencies(
                    |lam| crate::hill::monodromy_real(q, lam).f_minus,
                    lo,
                    hi,
                    128,
                    tol.root_z,
                    tol.tang,
                )?;
                let mut points = Vec::new();
                for (lam, _) in zeros {
                    points.push(lam);
                    points.push(lam);
                }
                self.res.push(KappaResonances { points });
                continue;
            }
            let zeros = rootfind::roots_with_tangencies(
                |lam| rho_at(q, &a, lam),
                lo,
                hi,
                128,
                tol.root_z,
                tol.tang,
            )?;
            let mut points = Vec::new();
            for (lam, mult) in zeros {
                for _ in 0..mult {
                    points.push(lam);
                }
            }
            if points.len() % 2 != 0 {
                return Err(SpectralError::numeric(format!(
                    "odd resonance count {} in κ_{n} for k = {}",
                    points.len(),
                    self.a.k
                )));
            }
            self.res.push(KappaResonances { points });
        }
        Ok(())
    }

    fn periodic_list(&self) -> Vec<LabeledEigenvalue> {
        let mut out = Vec::new();
        let count = self.ctx.anchors.interval_count();
        for j in 0..count {
            let (n, sign) = periodic_label(j);
            // on the descending side of 9F² the ν = 2 level is crossed
            // first, on the ascending side last
            let order: [u8; 2] = if j % 2 == 1 { [1, 2] } else { [2, 1] };
            for nu in order {
                let v = self.g_roots[(nu - 1) as usize][j];
                out.push(labeled(v, EigenKind::Periodic, nu, n, sign, self.a.k));
            }
        }
        out.sort_by(|x, y| x.value.partial_cmp(&y.value).unwrap());
        out
    }

    fn antiperiodic_list(&self) -> Vec<LabeledEigenvalue> {
        let mut out = Vec::new();
        let count = self.ctx.anchors.interval_count();
        for j in 0..count {
            let (n, sign) = antiperiodic_label(j);
            let order: [u8; 2] = if j % 2 == 1 { [1, 2] } else { [2, 1] };
            for nu in order {
                let v = self.ctx.h_roots[(nu - 1) as usize][j];
                out.push(labeled(v, EigenKind::Antiperiodic, nu, n, sign, self.a.k));
            }
        }
        out.sort_by(|x, y| x.value.partial_cmp(&y.value).unwrap());
        out
    }

    fn resonance_list(&self) -> Vec<LabeledEigenvalue> {
        let mut out = Vec::new();
        for (i, r) in self.res.iter().enumerate() {
            let n = (i + 1) as u32;
            let m = r.points.len();
            for (pos, &lam) in r.points.iter().enumerate() {
                let sign = if pos == 0 {
                    Some(Sign::Minus)
                } else if pos == m - 1 {
                    Some(Sign::Plus)
                } else {
                    None
                };
                out.push(LabeledEigenvalue {
                    value: lam,
                    kind: EigenKind::Resonance,
                    nu: None,
                    n,
                    sign,
                    k: Some(self.a.k),
                });
            }
        }
        out
    }

    /// E_{ν,m}^{k,σ} for even m: the periodic eigenvalue itself.
    fn edge_even(&self, nu: u8, m: usize, sign: Sign) -> Option<Edge> {
        let j = match (m, sign) {
            (0, Sign::Plus) => 0,
            (0, Sign::Minus) => return None,
            (_, Sign::Minus) => m - 1,
            (_, Sign::Plus) => m,
        };
        let roots = &self.g_roots[(nu - 1) as usize];
        if j >= roots.len() {
            return None;
        }
        Some(Edge {
            lambda: roots[j],
            kind: EdgeKind::Periodic,
            nu,
            n: m as u32,
            sign,
            v_boundary: false,
        })
    }

    /// λ_{ν,p}^{0,σ} for odd p: the antiperiodic eigenvalue.
    fn anti_edge(&self, nu: u8, p: usize, sign: Sign) -> Option<Edge> {
        let j = match sign {
            Sign::Minus => p - 1,
            Sign::Plus => p,
        };
        let roots = &self.ctx.h_roots[(nu - 1) as usize];
        if j >= roots.len() {
            return None;
        }
        Some(Edge {
            lambda: roots[j],
            kind: EdgeKind::Antiperiodic,
            nu,
            n: p as u32,
            sign,
            v_boundary: false,
        })
    }

    /// E_{1,p}^{k,σ} for odd p = 2n-1: the v_k test decides between the
    /// antiperiodic eigenvalue and the resonance extreme r_{k,n}^σ.
    fn edge_first_branch_odd(&mut self, p: usize, sign: Sign) -> Result<Option<Edge>> {
        let anti = match self.anti_edge(1, p, sign) {
            Some(e) => e,
            None => return Ok(None),
        };
        if self.a.is_transverse() {
            return Ok(Some(anti));
        }
        let n = (p + 1) / 2;
        let v = lyapunov::at_real(self.ctx.q, &self.a, anti.lambda).v;
        let tol = self.ctx.tol.edge;
        if v >= -tol {
            // the v_k = 0 boundary goes to the antiperiodic branch
            let mut e = anti;
            if v.abs() <= tol {
                e.v_boundary = true;
                self.warnings.push(format!(
                    "v_k at λ_(1,{p})^(0,{}) = {} is within tolerance of zero; antiperiodic branch chosen",
                    if sign == Sign::Plus { "+" } else { "-" },
                    anti.lambda
                ));
            }
            return Ok(Some(e));
        }
        let res = self.res.get(n - 1).ok_or_else(|| {
            SpectralError::numeric(format!("missing resonance data for κ_{n}, k = {}", self.a.k))
        })?;
        let r = match sign {
            Sign::Minus => res.r_minus(),
            Sign::Plus => res.r_plus(),
        };
        let r = r.ok_or_else(|| {
            SpectralError::numeric(format!(
                "v_k < 0 at λ_(1,{p})^(0,·) but no resonance found in κ_{n} for k = {}",
                self.a.k
            ))
        })?;
        Ok(Some(Edge {
            lambda: r,
            kind: EdgeKind::Resonance,
            nu: 1,
            n: n as u32,
            sign,
            v_boundary: false,
        }))
    }

    /// E_{ν,m}^{k,σ} with the branch dispatch of the band-edge theorem.
    fn edge(&mut self, nu: u8, m: usize, sign: Sign) -> Result<Option<Edge>> {
        if m % 2 == 0 {
            return Ok(self.edge_even(nu, m, sign));
        }
        if nu == 2 {
            return Ok(self.anti_edge(2, m, sign));
        }
        self.edge_first_branch_odd(m, sign)
    }

    fn assemble(mut self) -> Result<FiberSpectrum> {
        let k = self.a.k;
        let big_n = self.a.big_n;
        let lambda_max = self.ctx.lambda_max;

        let periodic = self.periodic_list();
        let antiperiodic = self.antiperiodic_list();
        let resonances = self.resonance_list();
        let kappa: Vec<(f64, f64)> =
            (1..=self.ctx.kappa_count()).map(|n| self.ctx.kappa(n).unwrap()).collect();

        // edge tables E_ν[m]^± as far as the anchor data reaches
        let m_max = self.ctx.anchors.interval_count().saturating_sub(1);
        let mut e_minus: [Vec<Option<Edge>>; 2] = [vec![None; m_max + 1], vec![None; m_max + 1]];
        let mut e_plus: [Vec<Option<Edge>>; 2] = [vec![None; m_max + 1], vec![None; m_max + 1]];
        for nu in [1u8, 2] {
            for m in 0..=m_max {
                e_minus[(nu - 1) as usize][m] = self.edge(nu, m, Sign::Minus)?;
                e_plus[(nu - 1) as usize][m] = self.edge(nu, m, Sign::Plus)?;
            }
        }

        // bands S_{ν,n} = [E_{ν,n-1}^+, E_{ν,n}^-]
        let mut bands = Vec::new();
        for nu in [1u8, 2] {
            let i = (nu - 1) as usize;
            for n in 1..=m_max {
                let (lo, hi) = match (e_plus[i][n - 1], e_minus[i][n]) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    _ => break,
                };
                if lo.lambda > lambda_max {
                    break;
                }
                if lo.lambda > hi.lambda + 1e-7 * (1.0 + hi.lambda.abs()) {
                    return Err(SpectralError::numeric(format!(
                        "band S_({nu},{n})^{k} inverted: [{}, {}]",
                        lo.lambda, hi.lambda
                    )));
                }
                bands.push(Band {
                    nu,
                    n: n as u32,
                    k,
                    lo: lo.lambda,
                    hi: hi.lambda,
                    lo_edge: lo,
                    hi_edge: hi,
                });
            }
        }
        bands.sort_by(|a, b| {
            a.lo.partial_cmp(&b.lo).unwrap().then(a.nu.cmp(&b.nu)).then(a.n.cmp(&b.n))
        });

        let gaps = self.gap_list(&e_minus, &e_plus)?;
        let multiplicity = self.multiplicity_map(&e_minus, &e_plus)?;
        let observed_gap_threshold = observed_gap_threshold(&self.a, &gaps);

        Ok(FiberSpectrum {
            k,
            big_n,
            periodic,
            antiperiodic,
            resonances,
            kappa,
            bands,
            multiplicity,
            gaps,
            observed_gap_threshold,
            warnings: self.warnings,
        })
    }

    fn gap_list(
        &self,
        e_minus: &[Vec<Option<Edge>>; 2],
        e_plus: &[Vec<Option<Edge>>; 2],
    ) -> Result<Vec<Gap>> {
        let k = self.a.k;
        let mut out = Vec::new();
        let first = match e_plus[1][0] {
            Some(e) => e,
            None => return Ok(out),
        };
        out.push(Gap {
            k: Some(k),
            n: 0,
            lo: f64::NEG_INFINITY,
            hi: first.lambda,
            class: GapClass::Periodic,
        });
        let classify = |lo: &Edge, hi: &Edge| -> GapClass {
            if lo.lambda >= hi.lambda {
                return GapClass::Empty;
            }
            match (lo.kind, hi.kind) {
                (EdgeKind::Periodic, EdgeKind::Periodic) => GapClass::Periodic,
                (EdgeKind::Antiperiodic, EdgeKind::Antiperiodic) => GapClass::Antiperiodic,
                (EdgeKind::Resonance, EdgeKind::Resonance) => GapClass::Resonance,
                (EdgeKind::Resonance, _) | (_, EdgeKind::Resonance) => GapClass::RMix,
                _ => GapClass::PMix,
            }
        };
        'outer: for g in 1usize.. {
            let (lo, hi) = match g % 4 {
                0 => {
                    let n = g / 4;
                    (e_minus[1].get(2 * n).copied().flatten(), e_plus[1].get(2 * n).copied().flatten())
                }
                2 => {
                    let n = (g + 2) / 4;
                    (
                        e_minus[0].get(2 * n - 1).copied().flatten(),
                        e_plus[0].get(2 * n - 1).copied().flatten(),
                    )
                }
                1 => {
                    let n = (g + 3) / 4;
                    (
                        e_minus[1].get(2 * n - 1).copied().flatten(),
                        e_plus[0].get(2 * n - 2).copied().flatten(),
                    )
                }
                _ => {
                    let n = (g + 1) / 4;
                    (
                        e_minus[0].get(2 * n).copied().flatten(),
                        e_plus[1].get(2 * n - 1).copied().flatten(),
                    )
                }
            };
            match (lo, hi) {
                (Some(lo), Some(hi)) => {
                    out.push(Gap {
                        k: Some(k),
                        n: g as u32,
                        lo: lo.lambda,
                        hi: hi.lambda,
                        class: classify(&lo, &hi),
                    });
                }
                _ => break 'outer,
            }
        }
        Ok(out)
    }

    fn multiplicity_map(
        &self,
        e_minus: &[Vec<Option<Edge>>; 2],
        e_plus: &[Vec<Option<Edge>>; 2],
    ) -> Result<MultiplicityMap> {
        let lambda_max = self.ctx.lambda_max;
        let q = self.ctx.q;
        let a = self.a;
        let tol = self.ctx.tol.edge;

        // multiplicity-4 regions: resonance pockets plus band overlaps
        let mut quad: Vec<(f64, f64)> = Vec::new();
        let kappa_n = self.ctx.kappa_count();
        for n in 1..=kappa_n {
            let p = 2 * n - 1;
            if p >= e_minus[0].len() {
                break;
            }
            let (kl, kh) = self.ctx.kappa(n).unwrap();
            if let Some(e) = e_minus[0][p] {
                if e.kind == EdgeKind::Resonance && e.lambda > kl {
                    quad.push((kl, e.lambda));
                }
            }
            if let Some(e) = e_plus[0][p] {
                if e.kind == EdgeKind::Resonance && kh > e.lambda {
                    quad.push((e.lambda, kh));
                }
            }
            // overlaps of the two branch bands around index p, with the
            // u_k sign test cross-checked against interval arithmetic
            let pairs = [
                (e_plus[0].get(p - 1).copied().flatten(), e_minus[1].get(p).copied().flatten()),
                (e_plus[1].get(p).copied().flatten(), e_minus[0].get(p + 1).copied().flatten()),
            ];
            for (lo, hi) in pairs {
                let (lo, hi) = match (lo, hi) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    _ => continue,
                };
                // the u_k test point is the ν = 2 edge of the pair
                let u_pt = if lo.nu == 2 { lo.lambda } else { hi.lambda };
                let u = lyapunov::at_real(q, &a, u_pt).u;
                let len = hi.lambda - lo.lambda;
                if u < -tol.max(1e-9) && len < -1e-9 * (1.0 + hi.lambda.abs()) {
                    return Err(SpectralError::numeric(format!(
                        "overlap test contradiction at k = {}, n = {n}: u = {u}, overlap length = {len}",
                        a.k
                    )));
                }
                if u > tol.max(1e-9) && len > 1e-9 * (1.0 + hi.lambda.abs()) {
                    return Err(SpectralError::numeric(format!(
                        "overlap test contradiction at k = {}, n = {n}: u = {u}, overlap length = {len}",
                        a.k
                    )));
                }
                if len > 0.0 {
                    quad.push((lo.lambda, hi.lambda));
                }
            }
        }
        let quad = merge_intervals(quad);

        // band union, clipped to λ_max
        let mut union: Vec<(f64, f64)> = Vec::new();
        for nu in [0usize, 1] {
            for n in 1..e_minus[nu].len() {
                if let (Some(lo), Some(hi)) = (e_plus[nu][n - 1], e_minus[nu][n]) {
                    union.push((lo.lambda, hi.lambda.max(lo.lambda)));
                }
            }
        }
        let union: Vec<(f64, f64)> = merge_intervals(union)
            .into_iter()
            .filter(|&(lo, _)| lo <= lambda_max)
            .map(|(lo, hi)| (lo, hi.min(lambda_max)))
            .collect();

        // subdivide the union by the multiplicity-4 set
        let mut pieces = Vec::new();
        for (lo, hi) in union {
            let mut cursor = lo;
            for &(ql, qh) in &quad {
                let il = ql.max(lo);
                let ih = qh.min(hi);
                if ih <= il {
                    continue;
                }
                if il > cursor {
                    pieces.push(MultiplicityPiece { lo: cursor, hi: il, multiplicity: 2 });
                }
                pieces.push(MultiplicityPiece { lo: il, hi: ih, multiplicity: 4 });
                cursor = ih;
            }
            if cursor < hi {
                pieces.push(MultiplicityPiece { lo: cursor, hi, multiplicity: 2 });
            }
        }
        Ok(MultiplicityMap { pieces })
    }
}

fn merge_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.retain(|&(lo, hi)| hi > lo);
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in v {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Smallest index from which the fiber's asymptotically-empty gap
/// family is indeed empty over the computed range.
fn observed_gap_threshold(a: &TubeAngle, gaps: &[Gap]) -> Option<u32> {
    let relevant: Vec<&Gap> = gaps
        .iter()
        .filter(|g| {
            if a.is_axial() {
                g.n >= 2 && g.n % 4 == 2
            } else {
                g.n % 2 == 1
            }
        })
        .collect();
    if relevant.is_empty() {
        return None;
    }
    // index n of the family member: G_{k,4n-2} or the p-mix pair
    let fam_index = |g: &Gap| -> u32 {
        match g.n % 4 {
            2 => (g.n + 2) / 4,
            1 => (g.n + 3) / 4,
            3 => (g.n + 1) / 4,
            _ => unreachable!(),
        }
    };
    let max_n = relevant.iter().map(|g| fam_index(g)).max()?;
    let mut threshold = None;
    for t in (1..=max_n).rev() {
        let all_empty = relevant
            .iter()
            .filter(|g| fam_index(g) >= t)
            .all(|g| g.width() <= 1e-9);
        if all_empty {
            threshold = Some(t);
        } else {
            break;
        }
    }
    threshold
}

// ---------------------------------------------------------------------------
// public per-fiber operations
// ---------------------------------------------------------------------------

/// Computes the complete spectral data of one fiber.
pub fn compute_fiber(
    q: &PeriodicPotential,
    a: &TubeAngle,
    lambda_max: f64,
    tol: &Tolerances,
) -> Result<FiberSpectrum> {
    let ctx = SpectralContext::new(q, lambda_max, *tol)?;
    FiberAssembler::new(&ctx, *a)?.assemble()
}

/// Sorted periodic eigenvalues λ_{ν,2n}^{k,±} up to λ_max.
pub fn periodic_eigenvalues(
    q: &PeriodicPotential,
    a: &TubeAngle,
    lambda_max: f64,
) -> Result<Vec<LabeledEigenvalue>> {
    let fiber = compute_fiber(q, a, lambda_max, &Tolerances::default())?;
    Ok(fiber.periodic.into_iter().filter(|e| e.value <= lambda_max).collect())
}

/// Sorted antiperiodic eigenvalues λ_{ν,2n-1}^{0,±} (k-independent) up
/// to λ_max, together with the intervals κ_n.
pub fn antiperiodic_eigenvalues(
    q: &PeriodicPotential,
    lambda_max: f64,
) -> Result<(Vec<LabeledEigenvalue>, Vec<(f64, f64)>)> {
    let a = TubeAngle::new(2, 0)?;
    let fiber = compute_fiber(q, &a, lambda_max, &Tolerances::default())?;
    Ok((
        fiber.antiperiodic.into_iter().filter(|e| e.value <= lambda_max).collect(),
        fiber.kappa,
    ))
}

/// Real resonances (zeros of ρ_k) up to λ_max, grouped by κ_n with the
/// extremes labeled ±.
pub fn resonances(
    q: &PeriodicPotential,
    a: &TubeAngle,
    lambda_max: f64,
) -> Result<Vec<LabeledEigenvalue>> {
    let fiber = compute_fiber(q, a, lambda_max, &Tolerances::default())?;
    Ok(fiber.resonances.into_iter().filter(|e| e.value <= lambda_max).collect())
}

/// Spectral bands with edge attribution.
pub fn band_edges(q: &PeriodicPotential, a: &TubeAngle, lambda_max: f64) -> Result<Vec<Band>> {
    Ok(compute_fiber(q, a, lambda_max, &Tolerances::default())?.bands)
}

/// Piecewise multiplicity of σ_ac(H_k).
pub fn multiplicity(
    q: &PeriodicPotential,
    a: &TubeAngle,
    lambda_max: f64,
) -> Result<MultiplicityMap> {
    Ok(compute_fiber(q, a, lambda_max, &Tolerances::default())?.multiplicity)
}

/// Classified gaps G_{k,n}.
pub fn gaps_for_k(q: &PeriodicPotential, a: &TubeAngle, lambda_max: f64) -> Result<Vec<Gap>> {
    Ok(compute_fiber(q, a, lambda_max, &Tolerances::default())?.gaps)
}

/// Leading-order predictions for the even band edges:
/// (πn)² + q₀ ∓ √((2/3) q_sn² + q_cn²).
pub fn asymptotic_edges(q: &PeriodicPotential, n: u32) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(SpectralError::invalid("asymptotic_edges: n must be >= 1"));
    }
    let c = q.fourier_coeffs(n)?;
    let base = (PI * n as f64) * (PI * n as f64) + c.q0;
    let half_gap = ((2.0 / 3.0) * c.qs * c.qs + c.qc * c.qc).sqrt();
    Ok((base - half_gap, base + half_gap))
}

// ---------------------------------------------------------------------------
// full operator
// ---------------------------------------------------------------------------

/// Computes every fiber k = 0..⌊N/2⌋ (the rest follow from the k ↔ N-k
/// symmetry), intersects the gaps, and attaches the flat-band spectrum
/// σ_D and the Hill data.
pub fn full_spectrum(
    q: &PeriodicPotential,
    big_n: u32,
    lambda_max: f64,
    tol: &Tolerances,
) -> Result<SpectrumReport> {
    if big_n == 0 {
        return Err(SpectralError::invalid("tube index N must be >= 1"));
    }
    let ctx = SpectralContext::new(q, lambda_max, *tol)?;
    let ks: Vec<u32> = (0..=big_n / 2).collect();
    let fibers: Vec<FiberSpectrum> = ks
        .par_iter()
        .map(|&k| {
            let a = TubeAngle::new(big_n, k)?;
            FiberAssembler::new(&ctx, a)?.assemble()
        })
        .collect::<Result<Vec<_>>>()?;

    let hill = crate::hill::hill_band_edges_with(q, lambda_max, tol)?;
    let mu = crate::hill::dirichlet_spectrum(q, lambda_max)?;
    let eta: Vec<f64> = ctx
        .anchors
        .eta
        .iter()
        .copied()
        .filter(|&e| e <= lambda_max)
        .collect();

    let (full_gaps, mut warnings) = intersect_gaps(big_n, &fibers, &hill, &eta, tol)?;
    let odd_n = big_n % 2 == 1 && big_n > 1;
    if odd_n {
        warnings.push(
            "odd N: odd-index full gaps computed by direct intersection (no closed form)"
                .to_string(),
        );
    }

    Ok(SpectrumReport {
        schema: 1,
        big_n,
        lambda_max,
        flat_bands: mu.iter().map(|m| m.value).collect(),
        eta,
        hill_lowest: hill.lowest,
        hill_gaps: hill.gaps.iter().copied().filter(|&(lo, _)| lo <= lambda_max).collect(),
        fibers,
        full_gaps,
        odd_n_intersection_only: odd_n,
        warnings,
    })
}

fn intersect_gaps(
    big_n: u32,
    fibers: &[FiberSpectrum],
    hill: &HillEdges,
    eta: &[f64],
    tol: &Tolerances,
) -> Result<(Vec<Gap>, Vec<String>)> {
    let mut warnings = Vec::new();
    let count = fibers.iter().map(|f| f.gaps.len()).min().unwrap_or(0);
    let cmp_tol = |x: f64| 1e-7 * (1.0 + x.abs()) + tol.edge;
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let mut lo_src = &fibers[0].gaps[n];
        let mut hi_src = &fibers[0].gaps[n];
        for f in fibers {
            let g = &f.gaps[n];
            if g.lo > lo {
                lo = g.lo;
                lo_src = g;
            }
            if g.hi < hi {
                hi = g.hi;
                hi_src = g;
            }
        }
        let class = if lo >= hi {
            GapClass::Empty
        } else if lo_src.is_empty() || hi_src.is_empty() {
            GapClass::Empty
        } else {
            // endpoint kinds from the binding fibers
            let combined = Gap { k: None, n: n as u32, lo, hi, class: lo_src.class };
            match (lo_src.class, hi_src.class) {
                (a, b) if a == b => a,
                _ => {
                    // mixed families across fibers keep the binding
                    // per-k classes visible through the fiber tables
                    if combined.is_empty() {
                        GapClass::Empty
                    } else {
                        GapClass::PMix
                    }
                }
            }
        };
        out.push(Gap { k: None, n: n as u32, lo, hi, class });
    }

    // cross-checks against the closed forms of the full-gap theorem
    let f0 = &fibers[0];
    for g in &out {
        let n = g.n as usize;
        if n % 4 == 0 {
            // G_{4n} must equal the axial gap G_{0,4n}
            let g0 = &f0.gaps[n];
            let same_empty = g.is_empty() && g0.is_empty();
            if !same_empty
                && ((g.lo - g0.lo).abs() > cmp_tol(g.lo) || (g.hi - g0.hi).abs() > cmp_tol(g.hi))
            {
                return Err(SpectralError::numeric(format!(
                    "full gap G_{n} differs from its axial closed form: ({}, {}) vs ({}, {})",
                    g.lo, g.hi, g0.lo, g0.hi
                )));
            }
        }
        if n % 2 == 1 && big_n % 2 == 0 && big_n >= 2 {
            let fm = fibers.last().unwrap();
            let gm = &fm.gaps[n];
            let same_empty = g.is_empty() && gm.is_empty();
            if !same_empty
                && ((g.lo - gm.lo).abs() > cmp_tol(g.lo) || (g.hi - gm.hi).abs() > cmp_tol(g.hi))
            {
                return Err(SpectralError::numeric(format!(
                    "full gap G_{n} differs from its transverse closed form: ({}, {}) vs ({}, {})",
                    g.lo, g.hi, gm.lo, gm.hi
                )));
            }
        }
    }

    // Hill gaps nest into the 4n-family; η_n sits in the closure of
    // G_{4n-2}
    for (j, &(gl, gh)) in std::iter::once(&(f64::NEG_INFINITY, hill.lowest))
        .chain(hill.gaps.iter())
        .enumerate()
    {
        let idx = 4 * j;
        if idx >= out.len() {
            break;
        }
        let g = &out[idx];
        if gh - gl > 1e-9 && (gl < g.lo - cmp_tol(gl) || gh > g.hi + cmp_tol(gh)) {
            return Err(SpectralError::numeric(format!(
                "Hill gap {j} = ({gl}, {gh}) not contained in full gap G_{idx} = ({}, {})",
                g.lo, g.hi
            )));
        }
    }
    for (i, &e) in eta.iter().enumerate() {
        let idx = 4 * (i + 1) - 2;
        if idx >= out.len() {
            break;
        }
        let g = &out[idx];
        if e < g.lo - cmp_tol(e) || e > g.hi + cmp_tol(e) {
            warnings.push(format!(
                "η_{} = {e} outside the closure of G_{idx} = ({}, {})",
                i + 1,
                g.lo,
                g.hi
            ));
        }
    }
    Ok((out, warnings))
}
