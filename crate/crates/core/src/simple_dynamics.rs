//! Exclusion sets for fully rational moduli and a brute-force scan for pairs
//! of return maps sharing orbits.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle_model::{CycleSpec, Moduli};
use crate::error::{Error, Result};
use crate::return_map::{df_parts, gamma_pow, quant_bound, quant_margin};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub s_max: i64,
    pub l_max: u32,
    pub n_max: u32,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            s_max: 200,
            l_max: 60,
            n_max: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    pub k_max: i64,
    pub m_max: i64,
    pub grid: usize,
    pub tol: f64,
    /// Include k = ∞ and m = ∞ (λ^∞ = γ^-∞ = 0); saddle-focus only.
    pub infinite: bool,
    /// Number of solutions kept in the report; all are classified.
    pub keep: usize,
    /// Coefficient ℓ of the double-focus μ term.
    pub df_ell: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            k_max: 40,
            m_max: 40,
            grid: 9,
            tol: 1e-6,
            infinite: true,
            keep: 1000,
            df_ell: 0.0,
        }
    }
}

/// Which reading of the bracketed difference an element uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementForm {
    /// (|R| − λ^ℓ) / (1 − γ^-n)
    Literal,
    /// |R − λ^ℓ| / |1 − γ^-n| with R signed
    Signed,
}

/// Index (s, ℓ, n) of an exclusion element; `None` stands for the limit
/// s → −∞, ℓ = ∞ or n = ∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementIndex {
    pub s: Option<i64>,
    pub ell: Option<u32>,
    pub n: Option<u32>,
    pub form: ElementForm,
}

/// Constants shared by all elements of one set.
#[derive(Clone, Copy, Debug)]
pub struct SetShape {
    pub ratio: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub q_prime: i64,
}

impl SetShape {
    fn bracket(&self, ell: Option<u32>, n: Option<u32>, form: ElementForm) -> f64 {
        let le = ell.map_or(0.0, |l| self.lambda.powi(l as i32));
        let gn = n.map_or(0.0, |n| gamma_pow(self.gamma, -(n as i64)));
        match form {
            ElementForm::Literal => (self.ratio.abs() - le) / (1.0 - gn),
            ElementForm::Signed => (self.ratio - le).abs() / (1.0 - gn).abs(),
        }
    }

    fn power(&self, s: Option<i64>) -> f64 {
        s.map_or(0.0, |s| (s as f64 / self.q_prime as f64 * self.gamma.abs().ln()).exp())
    }

    pub fn value(&self, idx: &ElementIndex) -> f64 {
        self.power(idx.s) * self.bracket(idx.ell, idx.n, idx.form)
    }
}

/// Every index of the truncated set, each exactly once.
pub fn element_indices(trunc: &Truncation) -> Vec<ElementIndex> {
    let ss = (-trunc.s_max..=trunc.s_max).map(Some).chain([None]);
    let ls: Vec<Option<u32>> = (1..=trunc.l_max).map(Some).chain([None]).collect();
    let ns: Vec<Option<u32>> = (1..=trunc.n_max).map(Some).chain([None]).collect();
    let mut out = Vec::new();
    for s in ss {
        for &ell in &ls {
            for &n in &ns {
                for form in [ElementForm::Literal, ElementForm::Signed] {
                    out.push(ElementIndex { s, ell, n, form });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nearest {
    pub distance: f64,
    pub element: f64,
    pub index: ElementIndex,
}

/// Distance from `value` to the truncated set, solving for s in closed form.
pub fn nearest_element(shape: &SetShape, value: f64, trunc: &Truncation) -> Nearest {
    let mut best = Nearest {
        distance: value.abs(),
        element: 0.0,
        index: ElementIndex { s: None, ell: None, n: None, form: ElementForm::Signed },
    };
    let lg = shape.gamma.abs().ln() / shape.q_prime as f64;
    let ls: Vec<Option<u32>> = (1..=trunc.l_max).map(Some).chain([None]).collect();
    let ns: Vec<Option<u32>> = (1..=trunc.n_max).map(Some).chain([None]).collect();
    for &ell in &ls {
        for &n in &ns {
            for form in [ElementForm::Literal, ElementForm::Signed] {
                let v = shape.bracket(ell, n, form);
                if v == 0.0 || !v.is_finite() {
                    continue;
                }
                let s_real = if value > 0.0 && v > 0.0 { (value / v).ln() / lg } else { -(trunc.s_max as f64) };
                let s0 = s_real.floor().clamp(-(trunc.s_max as f64), trunc.s_max as f64) as i64;
                for s in [s0, (s0 + 1).min(trunc.s_max)] {
                    let e = shape.power(Some(s)) * v;
                    let d = (value - e).abs();
                    if d < best.distance {
                        best = Nearest { distance: d, element: e, index: ElementIndex { s: Some(s), ell, n, form } };
                    }
                }
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioMembership {
    /// Residues of the first map: [r] or [r₁, r₂].
    pub first: Vec<i64>,
    pub second: Vec<i64>,
    pub value: f64,
    pub nearest: Nearest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbMembership {
    pub residue: Vec<i64>,
    pub value: f64,
    pub distance: f64,
    pub nearest_s: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub eta_ok: std::collections::BTreeMap<String, bool>,
    pub eta_margins: std::collections::BTreeMap<String, f64>,
    pub ratio_memberships: Vec<RatioMembership>,
    pub ab_memberships: Vec<AbMembership>,
    pub min_ratio_distance: f64,
    pub min_ab_distance: f64,
    pub tol: f64,
    pub truncation: Truncation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<BruteScanResult>,
}

/// Per-residue coefficients of the rational return maps.
#[derive(Clone, Debug)]
pub struct CoefficientPack {
    pub double_focus: bool,
    pub q1: i64,
    pub q2: i64,
    pub labels: Vec<Vec<i64>>,
    /// a_r (saddle-focus) or a_{r₁,r₂}
    pub a: Vec<f64>,
    /// a_r x⁺_r (saddle-focus) or b_{r₁,r₂}
    pub b: Vec<f64>,
    /// c_{r₂}; zero for saddle-focus
    pub c: Vec<f64>,
    /// ℓ_{r₂}; one for saddle-focus
    pub ell: Vec<f64>,
    pub theta: (i64, i64),
}

fn rational_of(class: Option<crate::cycle_model::ArithClass>, name: &str) -> Result<(i64, i64)> {
    class.and_then(|c| c.num_den()).ok_or_else(|| Error::NotRational {
        detail: format!("{name} must be declared rational"),
    })
}

fn angle(r: i64, p: i64, q: i64) -> f64 {
    2.0 * PI * ((r as i128 * p as i128).rem_euclid(q as i128)) as f64 / q as f64
}

pub fn coefficient_pack(spec: &CycleSpec, moduli: &Moduli, df_ell: f64) -> Result<CoefficientPack> {
    spec.validated()?;
    let theta = rational_of(moduli.theta_class, "theta")?;
    let (p1, q1) = rational_of(moduli.omega1_class, "omega1")?;
    if !spec.is_double_focus() {
        let mut pack = CoefficientPack {
            double_focus: false,
            q1,
            q2: 1,
            labels: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            ell: Vec::new(),
            theta,
        };
        for r in 0..q1 {
            let x = angle(r, p1, q1);
            pack.labels.push(vec![r]);
            pack.a.push(spec.cap_a * (x + spec.eta1).sin() / spec.b_coef);
            pack.b.push(spec.cap_b * (x + spec.eta2).sin() / spec.b_coef);
            pack.c.push(0.0);
            pack.ell.push(1.0);
        }
        return Ok(pack);
    }
    let (p2, q2) = rational_of(moduli.omega2_class, "omega2")?;
    let mut pack = CoefficientPack {
        double_focus: true,
        q1,
        q2,
        labels: Vec::new(),
        a: Vec::new(),
        b: Vec::new(),
        c: Vec::new(),
        ell: Vec::new(),
        theta,
    };
    for r1 in 0..q1 {
        let x1 = angle(r1, p1, q1);
        for r2 in 0..q2 {
            let parts = df_parts(spec, angle(r2, p2, q2));
            pack.labels.push(vec![r1, r2]);
            pack.a.push(parts.a * (x1 + spec.eta1).sin());
            pack.b.push(parts.b * (x1 + spec.eta2).sin());
            pack.c.push(parts.xi);
            pack.ell.push(2.0 / ((1.0 + df_ell * df_ell).sqrt() * parts.cos_x3));
        }
    }
    Ok(pack)
}

impl CoefficientPack {
    fn index(&self, k: i64, m: i64) -> usize {
        if self.double_focus {
            (k.rem_euclid(self.q1) * self.q2 + m.rem_euclid(self.q2)) as usize
        } else {
            k.rem_euclid(self.q1) as usize
        }
    }
}

pub fn exclusion_sets(spec: &CycleSpec, moduli: &Moduli, trunc: &Truncation, tol: f64) -> Result<ExclusionReport> {
    let pack = coefficient_pack(spec, moduli, 0.0)?;
    let mut eta_ok = std::collections::BTreeMap::new();
    let mut eta_margins = std::collections::BTreeMap::new();
    let (p1, q1) = rational_of(moduli.omega1_class, "omega1")?;
    for (name, eta) in [("eta1", spec.eta1), ("eta2", spec.eta2)] {
        let m = (0..q1).map(|r| (angle(r, p1, q1) + eta).sin().abs()).fold(f64::INFINITY, f64::min);
        eta_margins.insert(name.to_string(), m);
        eta_ok.insert(name.to_string(), m > tol);
    }
    if pack.double_focus {
        let (p2, q2) = rational_of(moduli.omega2_class, "omega2")?;
        let m = (0..q2)
            .map(|r| quant_margin(&df_parts(spec, angle(r, p2, q2))))
            .fold(f64::INFINITY, f64::min);
        eta_margins.insert("eta3".into(), m);
        eta_ok.insert("eta3".into(), m > quant_bound(spec.delta));
    }
    let n = pack.labels.len();
    let test = |i: usize| {
        if pack.double_focus {
            (pack.c[i] / pack.b[i]).abs()
        } else {
            (spec.u_scalar() / pack.b[i]).abs()
        }
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let ratio_memberships: Vec<RatioMembership> = pairs
        .par_iter()
        .filter(|&&(i, j)| pack.b[i] != 0.0 && pack.b[j] != 0.0)
        .map(|&(i, j)| {
            let shape = SetShape {
                ratio: pack.b[j] / pack.b[i],
                lambda: spec.lambda,
                gamma: spec.gamma,
                q_prime: pack.theta.1,
            };
            let value = test(i);
            RatioMembership {
                first: pack.labels[i].clone(),
                second: pack.labels[j].clone(),
                value,
                nearest: nearest_element(&shape, value, trunc),
            }
        })
        .collect();
    let lg = spec.gamma.abs().ln() / pack.theta.1 as f64;
    let ab_memberships: Vec<AbMembership> = (0..n)
        .map(|i| {
            let value = if pack.double_focus { pack.a[i].abs() } else { (pack.a[i] * spec.b_coef).abs() };
            let s0 = (value.ln() / lg).floor() as i64;
            let (distance, nearest_s) = [s0, s0 + 1]
                .iter()
                .map(|&s| ((value - (s as f64 * lg).exp()).abs(), s))
                .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc });
            AbMembership { residue: pack.labels[i].clone(), value, distance, nearest_s }
        })
        .collect();
    let min_ratio_distance = ratio_memberships.iter().map(|r| r.nearest.distance).fold(f64::INFINITY, f64::min);
    let min_ab_distance = ab_memberships.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
    Ok(ExclusionReport {
        eta_ok,
        eta_margins,
        ratio_memberships,
        ab_memberships,
        min_ratio_distance,
        min_ab_distance,
        tol,
        truncation: *trunc,
        scan: None,
    })
}

/// Return time; `None` is ∞.
pub type Time = Option<i64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSolution {
    pub first: (Time, Time),
    pub second: (Time, Time),
    pub residual: f64,
    /// (K₁, K₂, C₁, C₂) at the minimum
    pub kc: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    AllMEqual,
    AllKEqual,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ScanVerdict {
    NoExtraPairs,
    Constrained {
        mode: ConstraintMode,
        /// Largest λ^k/|γ^-m| (shared m) or |γ^-m|/λ^k (shared k).
        scale_ratio_max: f64,
    },
    Violation {
        count: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteScanResult {
    pub ranges: (i64, i64),
    pub grid: usize,
    pub tol: f64,
    pub pairs_scanned: usize,
    pub solution_count: usize,
    pub solutions: Vec<ScanSolution>,
    pub verdict: ScanVerdict,
}

impl BruteScanResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::domain(format!("csv: {e}"));
        let t = |x: Time| x.map_or("inf".to_string(), |v| v.to_string());
        w.write_record(["k1", "m1", "k2", "m2", "residual", "K1", "K2", "C1", "C2"]).map_err(io)?;
        for s in &self.solutions {
            w.write_record([
                t(s.first.0),
                t(s.first.1),
                t(s.second.0),
                t(s.second.1),
                format!("{:?}", s.residual),
                format!("{:?}", s.kc[0]),
                format!("{:?}", s.kc[1]),
                format!("{:?}", s.kc[2]),
                format!("{:?}", s.kc[3]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::domain(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Affine residual F = f0 + Σ coef_i·v_i in (K₁, K₂, C₁, C₂) with its
/// normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub f0: f64,
    pub coef: [f64; 4],
    pub norm: f64,
}

impl Residual {
    pub fn eval(&self, v: &[f64; 4]) -> f64 {
        let f = self.f0 + (0..4).map(|i| self.coef[i] * v[i]).sum::<f64>();
        f.abs() / self.norm
    }

    /// Lower bound of the normalized residual over the box [−1, 1]⁴.
    pub fn box_min(&self) -> f64 {
        let slack: f64 = self.coef.iter().map(|c| c.abs()).sum();
        (self.f0.abs() - slack).max(0.0) / self.norm
    }
}

fn lam_pow(lambda: f64, k: Time) -> f64 {
    k.map_or(0.0, |k| (k as f64 * lambda.ln()).exp())
}

fn gam_inv(gamma: f64, m: Time) -> f64 {
    m.map_or(0.0, |m| gamma_pow(gamma, -m))
}

/// Powers and residue index of one return time pair.
#[derive(Clone, Copy, Debug)]
struct Point {
    lk: f64,
    gm: f64,
    idx: usize,
}

fn point(spec: &CycleSpec, pack: &CoefficientPack, (k, m): (Time, Time)) -> Point {
    Point {
        lk: lam_pow(spec.lambda, k),
        gm: gam_inv(spec.gamma, m),
        idx: pack.index(k.unwrap_or(0), m.unwrap_or(0)),
    }
}

/// Residual of the two-map system with μ eliminated.
pub fn residual(spec: &CycleSpec, pack: &CoefficientPack, p1: (Time, Time), p2: (Time, Time)) -> Residual {
    residual_at(spec, pack, point(spec, pack, p1), point(spec, pack, p2))
}

fn residual_at(spec: &CycleSpec, pack: &CoefficientPack, p1: Point, p2: Point) -> Residual {
    let d = spec.delta;
    if !pack.double_focus {
        let u = spec.u_scalar();
        // λ^k a (x + Kδ) − γ^-m (u + Cδ/b)
        let term = |p: Point| {
            let ax = if p.lk == 0.0 { 0.0 } else { p.lk * pack.b[p.idx] };
            let ak = if p.lk == 0.0 { 0.0 } else { p.lk * pack.a[p.idx] * d };
            (ax - p.gm * u, ak, -p.gm * d / spec.b_coef, ax.abs().max((p.gm * u).abs()))
        };
        let (f1, k1, c1, n1) = term(p1);
        let (f2, k2, c2, n2) = term(p2);
        return Residual { f0: f1 - f2, coef: [k1, -k2, c1, -c2], norm: n1.max(n2) };
    }
    let lkk = p1.lk * p2.lk;
    let gmm = p1.gm * p2.gm;
    // term_i = (a_i K_i δ + b_i)/ℓ_i · λ^{k1+k2} γ^{-m_j} − (c_i + C_i δ)/ℓ_i · λ^{k_j} γ^{-m1-m2}
    let term = |i: usize, other: Point| {
        let p = lkk * other.gm / pack.ell[i];
        let q = other.lk * gmm / pack.ell[i];
        (pack.b[i] * p - pack.c[i] * q, pack.a[i] * d * p, -d * q, (pack.b[i] * p).abs().max((pack.c[i] * q).abs()))
    };
    let (f1, a1, c1, n1) = term(p1.idx, p2);
    let (f2, a2, c2, n2) = term(p2.idx, p1);
    Residual { f0: f1 - f2, coef: [a1, -a2, c1, -c2], norm: n1.max(n2) }
}

pub fn linspace(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Minimum of the residual over the grid⁴, with its argument.
pub fn grid_min(r: &Residual, grid: &[f64]) -> (f64, [f64; 4]) {
    let mut best = (f64::INFINITY, [0.0; 4]);
    for &v0 in grid {
        for &v1 in grid {
            for &v2 in grid {
                let partial = r.f0 + r.coef[0] * v0 + r.coef[1] * v1 + r.coef[2] * v2;
                let v3s: Vec<f64> = if r.coef[3] == 0.0 {
                    vec![grid[0]]
                } else {
                    let target = -partial / r.coef[3];
                    let pos = grid.partition_point(|&g| g < target);
                    [pos.saturating_sub(1), pos.min(grid.len() - 1)].iter().map(|&i| grid[i]).collect()
                };
                for v3 in v3s {
                    let v = [v0, v1, v2, v3];
                    let f = r.eval(&v);
                    if f < best.0 {
                        best = (f, v);
                    }
                }
            }
        }
    }
    best
}

pub fn brute_scan(spec: &CycleSpec, moduli: &Moduli, params: &ScanParams) -> Result<BruteScanResult> {
    let pack = coefficient_pack(spec, moduli, params.df_ell)?;
    let infinite = params.infinite && !pack.double_focus;
    let times = |max: i64| -> Vec<Time> {
        let mut v: Vec<Time> = (1..=max.max(0)).map(Some).collect();
        if infinite {
            v.push(None);
        }
        v
    };
    let ks = times(params.k_max);
    let ms = times(params.m_max);
    let pts: Vec<(Time, Time)> = ks.iter().flat_map(|&k| ms.iter().map(move |&m| (k, m))).collect();
    let grid = linspace(params.grid);
    let n = pts.len();
    let cache: Vec<Point> = pts.iter().map(|&p| point(spec, &pack, p)).collect();
    let found: Vec<Vec<ScanSolution>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in i + 1..n {
                let r = residual_at(spec, &pack, cache[i], cache[j]);
                if !(r.norm > 0.0) || r.box_min() > params.tol {
                    continue;
                }
                let (res, kc) = grid_min(&r, &grid);
                if res <= params.tol {
                    out.push(ScanSolution { first: pts[i], second: pts[j], residual: res, kc });
                }
            }
            out
        })
        .collect();
    let all: Vec<ScanSolution> = found.into_iter().flatten().collect();
    let verdict = classify(spec, &all);
    log::info!("brute scan: {} pairs, {} near-solutions", n * n.saturating_sub(1) / 2, all.len());
    Ok(BruteScanResult {
        ranges: (params.k_max, params.m_max),
        grid: params.grid,
        tol: params.tol,
        pairs_scanned: n * n.saturating_sub(1) / 2,
        solution_count: all.len(),
        solutions: all.into_iter().take(params.keep).collect(),
        verdict,
    })
}

fn classify(spec: &CycleSpec, sols: &[ScanSolution]) -> ScanVerdict {
    if sols.is_empty() {
        return ScanVerdict::NoExtraPairs;
    }
    let violations = sols
        .iter()
        .filter(|s| s.first.0 != s.second.0 && s.first.1 != s.second.1)
        .count();
    if violations > 0 {
        return ScanVerdict::Violation { count: violations };
    }
    let all_m = sols.iter().all(|s| s.first.1 == s.second.1);
    let all_k = sols.iter().all(|s| s.first.0 == s.second.0);
    let mut ratio = 0.0f64;
    for s in sols {
        if s.first.1 == s.second.1 {
            let g = gam_inv(spec.gamma, s.first.1).abs();
            for k in [s.first.0, s.second.0] {
                ratio = ratio.max(lam_pow(spec.lambda, k) / g);
            }
        } else {
            let l = lam_pow(spec.lambda, s.first.0);
            for m in [s.first.1, s.second.1] {
                ratio = ratio.max(gam_inv(spec.gamma, m).abs() / l);
            }
        }
    }
    let mode = match (all_m, all_k) {
        (true, _) => ConstraintMode::AllMEqual,
        (false, true) => ConstraintMode::AllKEqual,
        _ => ConstraintMode::Mixed,
    };
    ScanVerdict::Constrained { mode, scale_ratio_max: ratio }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimpleVerdict {
    SimpleHyperbolicExpected,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleVerdictReport {
    pub verdict: SimpleVerdict,
    pub diagnostics: Vec<String>,
}

pub fn simple_verdict(report: &ExclusionReport) -> SimpleVerdictReport {
    let mut diagnostics = Vec::new();
    for (name, ok) in &report.eta_ok {
        if !ok {
            diagnostics.push(format!("{name} lies in its exclusion set"));
        }
    }
    if !(report.min_ratio_distance > report.tol) {
        diagnostics.push(format!("ratio distance {:e} within tolerance", report.min_ratio_distance));
    }
    if !(report.min_ab_distance > report.tol) {
        diagnostics.push(format!("|a b| distance {:e} within tolerance", report.min_ab_distance));
    }
    match &report.scan {
        None => diagnostics.push("brute scan not run".into()),
        Some(s) => {
            if let ScanVerdict::Violation { count } = s.verdict {
                diagnostics.push(format!("brute scan found {count} pairs with distinct k and m"));
            }
        }
    }
    SimpleVerdictReport {
        verdict: if diagnostics.is_empty() {
            SimpleVerdict::SimpleHyperbolicExpected
        } else {
            SimpleVerdict::Inconclusive
        },
        diagnostics,
    }
}
