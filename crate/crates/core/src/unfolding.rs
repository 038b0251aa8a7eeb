//! μ-windows where iterated manifolds cross the activating cube, and μ
//! sequences along which both windows meet.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::blender_certifier::{simulate_disc, BlenderCertificate, BlenderKind};
use crate::cycle_model::{ArithClass, CaseTag, CycleSpec, Moduli};
use crate::error::{Error, Result};
use crate::return_map::gamma_pow;

const DEGENERATE_SIN: f64 = 1e-12;
/// Powers of λ and γ⁻¹ are kept above this to stay clear of underflow.
const POWER_FLOOR: f64 = 1e-280;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AngleConvention {
    /// sin(kω + η)
    #[default]
    KOmega,
    /// sin(2πr + η) with r = k mod q taken as an integer.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowOptions {
    pub convention: AngleConvention,
    /// Sign in front of the s-window center: −1 as written, +1 reflected.
    pub s_center_sign: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions {
            convention: AngleConvention::KOmega,
            s_center_sign: -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowKind {
    UManifold { m: i64 },
    SManifold { k: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuWindow {
    #[serde(flatten)]
    pub kind: WindowKind,
    pub center: f64,
    pub radius: f64,
    pub degenerate: bool,
}

impl MuWindow {
    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    pub fn contains(&self, mu: f64) -> bool {
        mu >= self.lo() && mu <= self.hi()
    }
}

fn need_sf(spec: &CycleSpec) -> Result<()> {
    if spec.is_double_focus() {
        return Err(Error::not_applicable("μ-windows are computed for saddle-focus cycles"));
    }
    Ok(())
}

pub fn window_u(spec: &CycleSpec, q: i64, m: i64) -> Result<MuWindow> {
    need_sf(spec)?;
    if m < 1 || q < 1 {
        return Err(Error::domain(format!("m and q must be positive, got m = {m}, q = {q}")));
    }
    let g = gamma_pow(spec.gamma, -m);
    let radius = (g / spec.b_coef).abs() * q as f64 * spec.delta / 2.0;
    if !(radius < spec.delta) {
        return Err(Error::domain(format!("m = {m} too small: window radius {radius:?} >= delta")));
    }
    Ok(MuWindow {
        kind: WindowKind::UManifold { m },
        center: g * spec.u_scalar(),
        radius,
        degenerate: false,
    })
}

fn s_angle(spec: &CycleSpec, q: i64, k: i64, conv: AngleConvention) -> f64 {
    match conv {
        AngleConvention::KOmega => k as f64 * spec.omega1,
        AngleConvention::Literal => 2.0 * PI * k.rem_euclid(q) as f64,
    }
}

pub fn window_s(spec: &CycleSpec, q: i64, k: i64, opts: &WindowOptions) -> Result<MuWindow> {
    need_sf(spec)?;
    if k < 1 || q < 1 {
        return Err(Error::domain(format!("k and q must be positive, got k = {k}, q = {q}")));
    }
    let lk = spec.lambda.powi(k.min(i32::MAX as i64) as i32);
    let angle = s_angle(spec, q, k, opts.convention);
    let s1 = (angle + spec.eta1).sin();
    let s2 = (angle + spec.eta2).sin();
    let radius = (lk * spec.cap_a * s1).abs() * q as f64 * spec.delta / 2.0;
    if !(radius < spec.delta) {
        return Err(Error::domain(format!("k = {k} too small: window radius {radius:?} >= delta")));
    }
    Ok(MuWindow {
        kind: WindowKind::SManifold { k },
        center: opts.s_center_sign * lk * spec.cap_b * s2 / spec.b_coef,
        radius,
        degenerate: s1.abs() < DEGENERATE_SIN,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEntry {
    pub k: i64,
    pub m: i64,
    pub mu: f64,
    pub window_u: MuWindow,
    pub window_s: MuWindow,
    /// |c^u − c^s| / radius_u from the window centers.
    pub gap_ratio: f64,
    /// The same quantity from λ^k γ^m directly.
    pub gap_identity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSequence {
    pub residue: i64,
    pub q: i64,
    pub options: WindowOptions,
    pub entries: Vec<MuEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSearch {
    pub window_count: usize,
    pub k_max: i64,
    pub residue: Option<i64>,
    pub options: WindowOptions,
}

impl Default for MuSearch {
    fn default() -> Self {
        MuSearch {
            window_count: 5,
            k_max: 100_000,
            residue: None,
            options: WindowOptions::default(),
        }
    }
}

/// Residues r mod q for which the s-window centers can meet the u-window
/// centers, most robust first.
pub fn unfolding_residues(spec: &CycleSpec, q: i64, p: i64, opts: &WindowOptions) -> Vec<i64> {
    let bu = spec.b_coef * spec.u_scalar();
    let mut rs: Vec<(f64, i64)> = (0..q)
        .filter_map(|r| {
            let angle = match opts.convention {
                AngleConvention::KOmega => 2.0 * PI * ((r as i128 * p as i128).rem_euclid(q as i128)) as f64 / q as f64,
                AngleConvention::Literal => 0.0,
            };
            let s1 = (angle + spec.eta1).sin();
            let s2 = (angle + spec.eta2).sin();
            let sign_ok = spec.gamma < 0.0 || opts.s_center_sign * bu * s2 > 0.0;
            (sign_ok && s1.abs() > DEGENERATE_SIN && s2.abs() > DEGENERATE_SIN).then_some((s2.abs().min(s1.abs()), r))
        })
        .collect();
    rs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    rs.into_iter().map(|(_, r)| r).collect()
}

/// Pairs (k_n, m_n) whose windows intersect, keeping each new record low of
/// the normalized center gap.
pub fn find_mu_sequence(spec: &CycleSpec, moduli: &Moduli, search: &MuSearch) -> Result<MuSequence> {
    need_sf(spec)?;
    spec.validated()?;
    if moduli.theta_class != Some(ArithClass::Irrational) {
        return Err(Error::not_applicable("μ sequences need θ declared irrational"));
    }
    let (p, q) = moduli
        .omega1_class
        .and_then(|c| c.num_den())
        .ok_or_else(|| Error::not_applicable("μ sequences need ω/2π declared rational"))?;
    let opts = search.options;
    if search.window_count == 0 {
        return Ok(MuSequence { residue: search.residue.unwrap_or(0), q, options: opts, entries: Vec::new() });
    }
    let residues = unfolding_residues(spec, q, p, &opts);
    let r = match search.residue {
        Some(r) if residues.contains(&r) => r,
        Some(r) => return Err(Error::domain(format!("residue {r} cannot produce intersecting windows"))),
        None => *residues
            .first()
            .ok_or_else(|| Error::domain("no residue produces intersecting windows"))?,
    };
    let ln_l = spec.lambda.ln();
    let ln_g = spec.gamma.abs().ln();
    let k_cap = search.k_max.min((POWER_FLOOR.ln() / ln_l).floor() as i64);
    let m_cap = (-(POWER_FLOOR.ln()) / ln_g).floor() as i64;
    let sigma = opts.s_center_sign;
    let u = spec.u_scalar();
    let inv_b = 1.0 / spec.b_coef;
    let mut entries: Vec<MuEntry> = Vec::new();
    let mut record = f64::INFINITY;
    let mut k = if r == 0 { q } else { r };
    while k <= k_cap {
        let ws = match window_s(spec, q, k, &opts) {
            Ok(w) => w,
            Err(_) => {
                k += q;
                continue;
            }
        };
        if ws.degenerate {
            log::info!("k = {k}: degenerate s-window skipped");
            k += q;
            continue;
        }
        let angle = s_angle(spec, q, k, opts.convention);
        let s2 = (angle + spec.eta2).sin();
        // γ^{-m} u⁻ = σ λ^k B s2 / b
        let target = (sigma * spec.cap_b * s2 * inv_b / u).abs();
        let m_real = (k as f64 * ln_l + target.ln()) / -ln_g;
        for m in [m_real.floor() as i64, m_real.ceil() as i64] {
            if m < 1 || m > m_cap {
                continue;
            }
            let Ok(wu) = window_u(spec, q, m) else { continue };
            let lo = wu.lo().max(ws.lo());
            let hi = wu.hi().min(ws.hi());
            if lo > hi {
                continue;
            }
            let gap_ratio = (wu.center - ws.center).abs() / wu.radius;
            if gap_ratio < record {
                record = gap_ratio;
                let lg = ((k as f64) * ln_l + (m as f64) * ln_g).exp() * gamma_pow(spec.gamma, m).signum();
                let rho = lg * inv_b * spec.cap_b * s2;
                let gap_identity = 2.0 * (rho - sigma * u).abs() / (inv_b.abs() * q as f64 * spec.delta);
                entries.push(MuEntry {
                    k,
                    m,
                    mu: 0.5 * (lo + hi),
                    window_u: wu,
                    window_s: ws,
                    gap_ratio,
                    gap_identity,
                });
            }
        }
        k += q;
    }
    log::info!("mu sequence: {} record windows up to k = {k_cap}", entries.len());
    if entries.len() < search.window_count {
        return Err(Error::WindowExhausted {
            found: entries.len(),
            wanted: search.window_count,
            best_distance: record,
        });
    }
    Ok(MuSequence { residue: r, q, options: opts, entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    L1,
    L2,
    #[serde(rename = "cs")]
    Cs,
    #[serde(rename = "cu")]
    Cu,
    #[serde(rename = "aux_set")]
    AuxSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Homoclinic,
    Activates,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: Node,
    pub to: Node,
    pub relation: Relation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub window: MuWindow,
    /// X-coordinate of the manifold disc in the activating cube.
    pub x: f64,
    pub certificate: BlenderKind,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub mu: f64,
    pub case: CaseTag,
    pub crossings: Vec<Crossing>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationOptions {
    pub q: i64,
    pub depth: usize,
    pub window: WindowOptions,
}

/// Edges of the case table for the blender kinds present.
pub fn case_edges(kinds: &[BlenderKind]) -> Vec<Edge> {
    use Node::*;
    use Relation::*;
    let has = |k| kinds.contains(&k);
    let e = |from, to, relation| Edge { from, to, relation };
    let mut out = Vec::new();
    if has(BlenderKind::Cs) {
        out.push(e(Cs, L1, Homoclinic));
    }
    if has(BlenderKind::Cu) {
        out.push(e(Cu, L2, Homoclinic));
    }
    match (has(BlenderKind::Cs), has(BlenderKind::Cu)) {
        (true, true) => {
            out.push(e(Cs, Cu, Activates));
            out.push(e(Cu, Cs, Activates));
        }
        (true, false) => {
            out.push(e(AuxSet, L2, Homoclinic));
            out.push(e(AuxSet, Cs, Activates));
        }
        (false, true) => {
            out.push(e(AuxSet, L1, Homoclinic));
            out.push(e(AuxSet, Cu, Activates));
        }
        (false, false) => {}
    }
    out.sort();
    out
}

/// Relations realized at μ: manifold crossings in the windows containing μ,
/// each checked by a disc simulation, and the resulting case-table edges.
pub fn homoclinic_report(
    spec: &CycleSpec,
    case: CaseTag,
    mu: f64,
    certs: &[BlenderCertificate],
    opts: &RelationOptions,
) -> Result<RelationReport> {
    need_sf(spec)?;
    spec.validated()?;
    let kinds: Vec<BlenderKind> = certs.iter().map(|c| c.blender_kind).collect();
    if mu == 0.0 {
        return Ok(RelationReport { mu, case, crossings: Vec::new(), edges: case_edges(&kinds) });
    }
    if certs.is_empty() {
        return Err(Error::domain("no certificates supplied"));
    }
    let pick = |prefer: BlenderKind| {
        certs
            .iter()
            .find(|c| c.blender_kind == prefer)
            .unwrap_or(&certs[0])
    };
    let m_cap = (-(POWER_FLOOR.ln()) / spec.gamma.abs().ln()).floor() as i64;
    let k_cap = (POWER_FLOOR.ln() / spec.lambda.ln()).floor() as i64;
    let mut windows = Vec::new();
    windows.extend((1..=m_cap).filter_map(|m| window_u(spec, opts.q, m).ok()).filter(|w| w.contains(mu)));
    windows.extend(
        (1..=k_cap)
            .filter_map(|k| window_s(spec, opts.q, k, &opts.window).ok())
            .filter(|w| !w.degenerate && w.contains(mu)),
    );
    if windows.is_empty() {
        return Err(Error::OutsideWindows { mu });
    }
    let crossings: Vec<Crossing> = windows
        .into_iter()
        .map(|w| {
            let cert = match w.kind {
                WindowKind::UManifold { .. } => pick(BlenderKind::Cs),
                WindowKind::SManifold { .. } => pick(BlenderKind::Cu),
            };
            let half = cert.c * cert.delta;
            let x = (mu - w.center) / w.radius * half;
            let disc = simulate_disc(cert, 0, x, crate::blender_certifier::disc_extent(cert), opts.depth);
            Crossing { window: w, x, certificate: cert.blender_kind, verified: disc.success }
        })
        .collect();
    let edges = if crossings.iter().any(|c| c.verified) { case_edges(&kinds) } else { Vec::new() };
    Ok(RelationReport { mu, case, crossings, edges })
}
