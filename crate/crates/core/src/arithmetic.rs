//! Residue conditions, torus targets and the case-by-case searches for pair
//! sequences (k_n, m_n).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blender_certifier::BlenderKind;
use crate::cycle_model::{ArithClass, CaseTag, Classification, CycleSpec, Moduli, Quantity};
use crate::error::{Error, Result};
use crate::return_map::{coeffs, df_parts, quant_bound, quant_margin};

const NONZERO_TOL: f64 = 1e-12;
const POLE_TOL: f64 = 1e-14;
pub const DEFAULT_MARGIN_MIN: f64 = 1e-6;

/// Fractional part of n·p/q computed in integers.
pub fn residue_turns(n: i64, p: i64, q: i64) -> f64 {
    let r = (n as i128 * p as i128).rem_euclid(q as i128);
    r as f64 / q as f64
}

/// n·x mod 1 for a modulus given by its class and value in turns.
pub fn turns(n: i64, class: Option<ArithClass>, value: f64) -> f64 {
    match class {
        Some(ArithClass::Rational { num, den }) => residue_turns(n, num, den),
        _ => {
            let v = n as f64 * value;
            v - v.floor()
        }
    }
}

fn check_coprime(q: i64, p: i64) -> Result<()> {
    if q < 2 {
        return Err(Error::domain(format!("denominator q = {q} must be at least 2")));
    }
    if num_integer::gcd(p, q) != 1 {
        return Err(Error::domain(format!("{p}/{q} is not in lowest terms")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidueWitness {
    pub r: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<i64>,
    pub alpha: f64,
    pub inequalities: BTreeMap<String, bool>,
    pub valid: bool,
}

/// Limit of A_km along pairs with B_km → 0 at the angle residue r:
/// b·u⁻·A·sin(rω+η₁) / (B·sin(rω+η₂)).
pub fn alpha_sf(spec: &CycleSpec, angle: f64) -> f64 {
    let bu = spec.b_coef * spec.u_scalar();
    bu * spec.cap_a * (angle + spec.eta1).sin() / (spec.cap_b * (angle + spec.eta2).sin())
}

fn sf_witness(spec: &CycleSpec, r: i64, angle: f64) -> ResidueWitness {
    let bu = spec.b_coef * spec.u_scalar();
    let s1 = (angle + spec.eta1).sin();
    let s2 = (angle + spec.eta2).sin();
    let alpha = alpha_sf(spec, angle);
    let mut ineq = BTreeMap::new();
    ineq.insert("sign".to_string(), bu * s2 > 0.0 && s2.abs() > NONZERO_TOL);
    ineq.insert("sin_eta1_nonzero".to_string(), s1.abs() > NONZERO_TOL);
    ineq.insert(
        "alpha_not_unit".to_string(),
        alpha.is_finite() && (alpha.abs() - 1.0).abs() > NONZERO_TOL,
    );
    let valid = ineq.values().all(|&b| b);
    ResidueWitness {
        r,
        r2: None,
        alpha,
        inequalities: ineq,
        valid,
    }
}

fn order_witnesses(mut w: Vec<ResidueWitness>) -> Vec<ResidueWitness> {
    w.sort_by(|a, b| {
        let ka = (a.alpha - 1.0).abs();
        let kb = (b.alpha - 1.0).abs();
        kb.total_cmp(&ka)
            .then(a.r.cmp(&b.r))
            .then(a.r2.cmp(&b.r2))
    });
    w
}

/// Residues r mod q satisfying condition A1, most robust first.
pub fn check_a1(spec: &CycleSpec, q: i64, p: i64) -> Result<Vec<ResidueWitness>> {
    if spec.is_double_focus() {
        return Err(Error::not_applicable("condition A1 is for saddle-focus cycles"));
    }
    check_coprime(q, p)?;
    let out = (0..q)
        .map(|r| sf_witness(spec, r, 2.0 * PI * residue_turns(r, p, q)))
        .filter(|w| w.valid)
        .collect();
    Ok(order_witnesses(out))
}

/// All residues with their inequality verdicts, valid or not.
pub fn a1_table(spec: &CycleSpec, q: i64, p: i64) -> Result<Vec<ResidueWitness>> {
    check_coprime(q, p)?;
    Ok((0..q)
        .map(|r| sf_witness(spec, r, 2.0 * PI * residue_turns(r, p, q)))
        .collect())
}

/// How an angle is enumerated in condition A2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleSampling {
    /// ω/2π = p/q, residues 0..q.
    Rational { q: i64, p: i64 },
    /// Irrational angle: integers 1..=n times the spec angle.
    Window { n: i64 },
}

impl AngleSampling {
    fn values(&self, omega: f64) -> Result<Vec<(i64, f64)>> {
        match *self {
            AngleSampling::Rational { q, p } => {
                check_coprime(q, p)?;
                Ok((0..q)
                    .map(|r| (r, 2.0 * PI * residue_turns(r, p, q)))
                    .collect())
            }
            AngleSampling::Window { n } => Ok((1..=n.max(0))
                .map(|k| (k, (k as f64 * omega).rem_euclid(2.0 * PI)))
                .collect()),
        }
    }
}

/// Limit of A_km for a double-focus pair along B_km → 0.
pub fn alpha_df(spec: &CycleSpec, x1: f64, x2: f64) -> f64 {
    let p = df_parts(spec, x2);
    spec.cap_a * p.xi_num / (spec.cap_b * p.denom) * (x1 + spec.eta1).sin() / (x1 + spec.eta2).sin()
}

/// Residue pairs (r₁, r₂) satisfying the trigonometric bounds and condition A2.
pub fn check_a2(
    spec: &CycleSpec,
    first: AngleSampling,
    second: AngleSampling,
) -> Result<Vec<ResidueWitness>> {
    if !spec.is_double_focus() {
        return Err(Error::not_applicable("condition A2 is for double-focus cycles"));
    }
    let xs1 = first.values(spec.omega1)?;
    let xs2 = second.values(spec.omega2_or_zero())?;
    let c = quant_bound(spec.delta);
    let mut out = Vec::new();
    for &(r2, x2) in &xs2 {
        let parts = df_parts(spec, x2);
        let quant = quant_margin(&parts) > c;
        if !quant {
            continue;
        }
        for &(r1, x1) in &xs1 {
            let s1 = (x1 + spec.eta1).sin();
            let s2 = (x1 + spec.eta2).sin();
            let alpha = alpha_df(spec, x1, x2);
            let mut ineq = BTreeMap::new();
            ineq.insert("quant".to_string(), quant);
            ineq.insert(
                "sign".to_string(),
                parts.xi_num * s2 > 0.0 && parts.xi_num.abs() > NONZERO_TOL && s2.abs() > NONZERO_TOL,
            );
            ineq.insert("sin_eta1_nonzero".to_string(), s1.abs() > NONZERO_TOL);
            ineq.insert(
                "alpha_not_unit".to_string(),
                alpha.is_finite() && (alpha.abs() - 1.0).abs() > NONZERO_TOL,
            );
            let valid = ineq.values().all(|&b| b);
            if valid {
                out.push(ResidueWitness {
                    r: r1,
                    r2: Some(r2),
                    alpha,
                    inequalities: ineq,
                    valid,
                });
            }
        }
    }
    Ok(order_witnesses(out))
}

/// g(t, s, w) and h(t, s, w) for a double-focus cycle.
pub fn eval_gh(spec: &CycleSpec, t: f64, s: f64, w: f64) -> Result<(f64, f64)> {
    if !spec.is_double_focus() {
        return Err(Error::not_applicable("g and h are defined for double-focus cycles"));
    }
    let p = df_parts(spec, 2.0 * PI * w);
    if p.denom.abs() < POLE_TOL {
        return Err(Error::Pole {
            detail: format!("cos(2πw+η₃) + b·sin(2πw+η₃) vanishes at w = {w:?}"),
        });
    }
    let gt = spec.gamma.powf(t);
    let x = 2.0 * PI * s;
    Ok((
        gt * p.a * (x + spec.eta1).sin(),
        gt * p.b * (x + spec.eta2).sin() - p.xi,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TorusTarget {
    /// {s = s*, w = w*}
    HorizontalLine { s_star: f64, w_star: f64 },
    /// {t = a1·s + b, w = a2·s} or {t = a1·s + b, w = w*}
    TiltedLine {
        a1: f64,
        b: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        a2: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        w_star: Option<f64>,
    },
    /// {w = a·t + b·s} or {w = w*}
    Plane {
        #[serde(skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        w_star: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetAdmissibility {
    pub admissible: bool,
    pub margin_min: f64,
    pub margins: BTreeMap<String, f64>,
}

fn abxi_margins(spec: &CycleSpec, w: f64, margins: &mut BTreeMap<String, f64>) -> Result<()> {
    let p = df_parts(spec, 2.0 * PI * w);
    if p.denom.abs() < POLE_TOL {
        return Err(Error::Pole {
            detail: format!("denominator vanishes at w* = {w:?}"),
        });
    }
    margins.insert("|A·B·xi|".into(), (p.a * p.b * p.xi).abs());
    margins.insert("|denominator|".into(), p.denom.abs());
    Ok(())
}

pub fn target_admissible(
    spec: &CycleSpec,
    target: &TorusTarget,
    margin_min: f64,
) -> Result<TargetAdmissibility> {
    if !spec.is_double_focus() {
        return Err(Error::not_applicable("torus targets are for double-focus cycles"));
    }
    let mut margins = BTreeMap::new();
    match *target {
        TorusTarget::HorizontalLine { s_star, w_star } => {
            let p = df_parts(spec, 2.0 * PI * w_star);
            if p.denom.abs() < POLE_TOL {
                return Err(Error::Pole {
                    detail: format!("denominator vanishes at w* = {w_star:?}"),
                });
            }
            let x = 2.0 * PI * s_star;
            let s1 = (x + spec.eta1).sin();
            let s2 = (x + spec.eta2).sin();
            let v = p.xi * p.b * s2;
            margins.insert("xi·B·sin(2πs*+η₂)".into(), if v.is_finite() { v } else { -1.0 });
            let alpha = p.xi * p.a * s1 / (p.b * s2);
            margins.insert("|alpha|".into(), alpha.abs());
            margins.insert("||alpha| - 1|".into(), (alpha.abs() - 1.0).abs());
            margins.insert("|sin(2πs*+η₂)|".into(), s2.abs());
        }
        TorusTarget::TiltedLine { a1, b, a2, w_star } => {
            margins.insert("a1²+b²".into(), a1 * a1 + b * b);
            match (a2, w_star) {
                (Some(a2), None) => {
                    margins.insert("|a2|".into(), a2.abs());
                }
                (None, Some(w)) => abxi_margins(spec, w, &mut margins)?,
                _ => return Err(Error::domain("tilted line needs exactly one of a2, w*")),
            }
        }
        TorusTarget::Plane { a, b, w_star } => match (a, b, w_star) {
            (Some(a), Some(b), None) => {
                margins.insert("a²+b²".into(), a * a + b * b);
            }
            (None, None, Some(w)) => abxi_margins(spec, w, &mut margins)?,
            _ => return Err(Error::domain("plane needs either (a, b) or w*")),
        },
    }
    let admissible = margins.values().all(|&m| m.is_finite() && m >= margin_min);
    Ok(TargetAdmissibility {
        admissible,
        margin_min,
        margins,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub eps: f64,
    pub k_max: i64,
    pub m_max: i64,
    /// Half-width of the t = m − kθ window scanned when no target t* exists.
    pub t_span: f64,
    pub residue: Option<i64>,
    pub residue2: Option<i64>,
    /// Distance of |A| from 0 and 1 required for pairs sorted into bands.
    pub band_margin: f64,
    pub a_cap: f64,
    pub min_pairs: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            eps: 1e-3,
            k_max: 100_000,
            m_max: 100_000,
            t_span: 8.0,
            residue: None,
            residue2: None,
            band_margin: 0.05,
            a_cap: 100.0,
            min_pairs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSequence {
    pub case: CaseTag,
    pub pairs: Vec<(i64, i64)>,
    /// (t, s, w) = (m − kθ, kω₁/2π mod 1, mω₂/2π mod 1)
    pub target_values: Vec<(f64, f64, f64)>,
    #[serde(rename = "A_values")]
    pub a_values: Vec<f64>,
    #[serde(rename = "B_values")]
    pub b_values: Vec<f64>,
    pub distances: Vec<f64>,
    pub expected_kinds: Vec<BlenderKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ResidueWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TorusTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    pub eps: f64,
    pub window: (i64, i64),
    pub candidates: usize,
    pub best_distance: f64,
}

impl PairSequence {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Indices of pairs whose |A| lies on the side of 1 of the given kind.
    pub fn indices_of(&self, kind: BlenderKind) -> Vec<usize> {
        (0..self.pairs.len())
            .filter(|&i| match kind {
                BlenderKind::Cs => self.a_values[i].abs() < 1.0,
                BlenderKind::Cu => self.a_values[i].abs() > 1.0,
            })
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> PairSequence {
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        PairSequence {
            pairs: idx.iter().map(|&i| self.pairs[i]).collect(),
            target_values: idx.iter().map(|&i| self.target_values[i]).collect(),
            a_values: pick(&self.a_values),
            b_values: pick(&self.b_values),
            distances: pick(&self.distances),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::domain(format!("csv: {e}"));
        w.write_record(["k", "m", "t", "s", "w", "A_km", "B_km"]).map_err(io)?;
        for i in 0..self.pairs.len() {
            let (k, m) = self.pairs[i];
            let (t, s, ww) = self.target_values[i];
            w.write_record([
                k.to_string(),
                m.to_string(),
                format!("{t:?}"),
                format!("{s:?}"),
                format!("{ww:?}"),
                format!("{:?}", self.a_values[i]),
                format!("{:?}", self.b_values[i]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::domain(format!("csv: {e}")))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Band {
    Cs,
    Cu,
    Both,
}

#[derive(Clone, Copy, Debug)]
enum Mode {
    /// Nearest lattice m to kθ + t*(k).
    Nearest,
    /// All lattice m with |m − kθ| ≤ t_span.
    Scan,
}

#[derive(Clone, Copy, Debug)]
enum Filter {
    /// |B_km| ≤ eps
    B,
    /// |t − t*| ≤ eps for a fixed t*
    T(f64),
}

/// k = k_step·k′ + k_off; m ≡ m_base + m_per_k·k′ (mod m_mod), a single
/// value when m_mod = 0.
#[derive(Clone, Copy, Debug)]
struct Lattice {
    k_step: i64,
    k_off: i64,
    m_mod: i64,
    m_base: i64,
    m_per_k: i64,
}

impl Lattice {
    fn free() -> Self {
        Lattice {
            k_step: 1,
            k_off: 0,
            m_mod: 1,
            m_base: 0,
            m_per_k: 0,
        }
    }

    /// (modulus, residue) for m given k′, intersected with the even integers
    /// when required.
    fn m_class(&self, kp: i64, even: bool) -> Option<(i64, i64)> {
        let c = self.m_base + self.m_per_k * kp;
        if self.m_mod == 0 {
            return (!even || c.rem_euclid(2) == 0).then_some((0, c));
        }
        let d = self.m_mod;
        let c = c.rem_euclid(d);
        if !even {
            return Some((d, c));
        }
        if d % 2 == 0 {
            (c % 2 == 0).then_some((d, c))
        } else {
            Some((2 * d, if c % 2 == 0 { c } else { c + d }))
        }
    }
}

struct Plan {
    lattice: Lattice,
    even_m: bool,
    mode: Mode,
    filter: Filter,
    band: Band,
    kinds: Vec<BlenderKind>,
    witness: Option<ResidueWitness>,
    target: Option<TorusTarget>,
    t_star: Option<f64>,
    /// Fixed w* for double-focus cases whose lattice pins m mod q.
    w_fixed: Option<f64>,
}

fn rat_parts(r: Rational64) -> (i64, i64) {
    (*r.numer(), *r.denom())
}

fn class_pq(class: Option<ArithClass>, name: &str) -> Result<(i64, i64)> {
    class
        .and_then(|c| c.num_den())
        .ok_or_else(|| Error::domain(format!("{name} must be declared rational for this case")))
}

fn kind_of_alpha(alpha: f64) -> BlenderKind {
    if alpha.abs() < 1.0 {
        BlenderKind::Cs
    } else {
        BlenderKind::Cu
    }
}

fn pick_witness(ws: Vec<ResidueWitness>, r: Option<i64>, r2: Option<i64>) -> Result<ResidueWitness> {
    let found = ws
        .into_iter()
        .find(|w| r.map_or(true, |r| w.r == r) && r2.map_or(true, |r2| w.r2 == Some(r2)));
    found.ok_or_else(|| Error::domain("no residue satisfies the residue condition (or the requested residue fails it)"))
}

/// Residue of m mod q for which the double-focus denominators are largest.
fn pick_r2(spec: &CycleSpec, p: i64, q: i64, forced: Option<i64>) -> Result<i64> {
    let c = quant_bound(spec.delta);
    let mut best: Option<(f64, i64)> = None;
    for r in 0..q {
        if forced.is_some_and(|f| f != r) {
            continue;
        }
        let parts = df_parts(spec, 2.0 * PI * residue_turns(r, p, q));
        let margin = quant_margin(&parts);
        if margin > c && parts.xi_num.abs() > NONZERO_TOL && best.map_or(true, |(b, _)| margin > b) {
            best = Some((margin, r));
        }
    }
    best.map(|(_, r)| r)
        .ok_or_else(|| Error::domain("no residue of m satisfies the trigonometric bounds"))
}

fn plan_for(spec: &CycleSpec, moduli: &Moduli, case: &Classification, params: &SearchParams) -> Result<Plan> {
    if case.mirrored {
        return Err(Error::not_applicable(
            "case read off the inverse map; supply the inverse cycle's coefficients",
        ));
    }
    let theta = moduli.theta;
    let mut plan = Plan {
        lattice: Lattice::free(),
        even_m: !spec.is_double_focus() && spec.gamma < 0.0,
        mode: Mode::Nearest,
        filter: Filter::B,
        band: Band::Both,
        kinds: vec![BlenderKind::Cs, BlenderKind::Cu],
        witness: None,
        target: None,
        t_star: None,
        w_fixed: None,
    };
    let relation = |name: &str| {
        case.theta_relation
            .clone()
            .ok_or_else(|| Error::invalid(format!("{name} needs the relation for theta")))
    };
    match case.tag {
        CaseTag::SfRationalAll | CaseTag::DfRationalAll => {
            return Err(Error::not_applicable(
                "all moduli rational: no pair sequence, use the exclusion checks",
            ))
        }
        CaseTag::Sf1 => {
            let (p, q) = class_pq(moduli.omega1_class, "omega1")?;
            let w = pick_witness(check_a1(spec, q, p)?, params.residue, None)?;
            plan.lattice = Lattice {
                k_step: q,
                k_off: w.r,
                ..Lattice::free()
            };
            let kind = kind_of_alpha(w.alpha);
            plan.band = if kind == BlenderKind::Cs { Band::Cs } else { Band::Cu };
            plan.kinds = vec![kind];
            let s2 = (2.0 * PI * residue_turns(w.r, p, q) + spec.eta2).sin();
            plan.t_star = Some((spec.b_coef * spec.u_scalar() / (spec.cap_b * s2)).ln() / spec.gamma.abs().ln());
            plan.witness = Some(w);
        }
        CaseTag::Sf2 => {
            let rel = relation("SF-2")?;
            let (p, q) = rat_parts(rel.coeff(Quantity::Omega1));
            let (pp, qq) = rat_parts(rel.coeff(Quantity::One));
            plan.lattice = Lattice {
                k_step: q * qq,
                k_off: 0,
                m_mod: (p * qq).abs(),
                m_base: 0,
                m_per_k: pp * q,
            };
            plan.band = Band::Cu;
            plan.kinds = vec![BlenderKind::Cu];
        }
        CaseTag::Sf3 => {}
        CaseTag::Df1 => {
            let (p1, q1) = class_pq(moduli.omega1_class, "omega1")?;
            let (p2, q2) = class_pq(moduli.omega2_class, "omega2")?;
            let w = pick_witness(
                check_a2(
                    spec,
                    AngleSampling::Rational { q: q1, p: p1 },
                    AngleSampling::Rational { q: q2, p: p2 },
                )?,
                params.residue,
                params.residue2,
            )?;
            let r2 = w.r2.expect("double-focus witness");
            plan.lattice = Lattice {
                k_step: q1,
                k_off: w.r,
                m_mod: q2,
                m_base: r2,
                m_per_k: 0,
            };
            let s_star = residue_turns(w.r, p1, q1);
            let w_star = residue_turns(r2, p2, q2);
            let parts = df_parts(spec, 2.0 * PI * w_star);
            let s2 = (2.0 * PI * s_star + spec.eta2).sin();
            let t_star = (parts.xi / (parts.b * s2)).ln() / spec.gamma.ln();
            plan.filter = Filter::T(t_star);
            plan.t_star = Some(t_star);
            plan.w_fixed = Some(w_star);
            plan.target = Some(TorusTarget::HorizontalLine { s_star, w_star });
            let kind = kind_of_alpha(w.alpha);
            plan.band = if kind == BlenderKind::Cs { Band::Cs } else { Band::Cu };
            plan.kinds = vec![kind];
            plan.witness = Some(w);
        }
        CaseTag::Df21 => {
            let (p2, q2) = class_pq(moduli.omega2_class, "omega2")?;
            let r2 = pick_r2(spec, p2, q2, params.residue2)?;
            plan.lattice = Lattice {
                m_mod: q2,
                m_base: r2,
                ..Lattice::free()
            };
            let w_star = residue_turns(r2, p2, q2);
            plan.w_fixed = Some(w_star);
            plan.target = Some(TorusTarget::Plane {
                a: None,
                b: None,
                w_star: Some(w_star),
            });
        }
        CaseTag::Df22 => {
            let rel = relation("DF-2.2")?;
            let (p1, q1) = rat_parts(rel.coeff(Quantity::Omega1));
            let (p2, q2) = rat_parts(rel.coeff(Quantity::One));
            let (p3, q3) = class_pq(moduli.omega2_class, "omega2")?;
            let r2 = pick_r2(spec, p3, q3, params.residue2)?;
            plan.lattice = Lattice {
                k_step: q2 * q3,
                k_off: 0,
                m_mod: (p1 * q3).abs(),
                m_base: r2,
                m_per_k: p2 * q3,
            };
            let w_star = residue_turns(r2, p3, q3);
            plan.w_fixed = Some(w_star);
            plan.target = Some(TorusTarget::TiltedLine {
                a1: -(p1 as f64) / q1 as f64,
                b: r2 as f64,
                a2: None,
                w_star: Some(w_star),
            });
            plan.band = Band::Cu;
            plan.kinds = vec![BlenderKind::Cu];
        }
        CaseTag::Df31 => {
            plan.mode = Mode::Scan;
        }
        CaseTag::Df32 => {
            let rel = case
                .theta_omega2_relation
                .clone()
                .ok_or_else(|| Error::invalid("DF-3.2 needs the relation for theta*omega2"))?;
            let (p1, q1) = rat_parts(rel.coeff(Quantity::Theta));
            let (p2, q2) = rat_parts(rel.coeff(Quantity::Omega1));
            let (_, q3) = rat_parts(rel.coeff(Quantity::One));
            plan.mode = Mode::Scan;
            plan.lattice = Lattice {
                k_step: q3,
                k_off: 0,
                m_mod: q1,
                m_base: 0,
                m_per_k: 0,
            };
            let x2 = spec.omega2_or_zero() / (2.0 * PI);
            plan.target = Some(TorusTarget::Plane {
                a: Some(p1 as f64 / q1 as f64 - x2),
                b: Some(p2 as f64 / q2 as f64),
                w_star: None,
            });
        }
        CaseTag::Df331 | CaseTag::Df332 => {
            let rel = relation("DF-3.3")?;
            let (p1, q1) = rat_parts(rel.coeff(Quantity::Omega1));
            let (p2, q2) = rat_parts(rel.coeff(Quantity::One));
            plan.mode = Mode::Scan;
            if case.tag == CaseTag::Df331 {
                let rel2 = case
                    .theta_omega2_relation
                    .clone()
                    .ok_or_else(|| Error::invalid("DF-3.3.1 needs the relation for theta*omega2"))?;
                let (p3, q3) = rat_parts(rel2.coeff(Quantity::Omega1));
                let (_, q4) = rat_parts(rel2.coeff(Quantity::One));
                plan.lattice = Lattice {
                    k_step: q2 * q4,
                    k_off: 0,
                    m_mod: (p1 * q3).abs(),
                    m_base: 0,
                    m_per_k: p2 * q4,
                };
                let x2 = spec.omega2_or_zero() / (2.0 * PI);
                plan.target = Some(TorusTarget::TiltedLine {
                    a1: -(p1 as f64) / q1 as f64,
                    b: 0.0,
                    a2: Some(p3 as f64 / q3 as f64 - x2 * p1 as f64 / q1 as f64),
                    w_star: None,
                });
            } else {
                plan.lattice = Lattice {
                    k_step: q2,
                    k_off: 0,
                    m_mod: p1.abs(),
                    m_base: 0,
                    m_per_k: p2,
                };
            }
            plan.band = Band::Cu;
            plan.kinds = vec![BlenderKind::Cu];
        }
    }
    let _ = theta;
    Ok(plan)
}

struct Candidate {
    k: i64,
    m: i64,
    a: f64,
    b: f64,
    dist: f64,
    accepted: bool,
}

fn band_ok(band: Band, a: f64, params: &SearchParams) -> bool {
    let a = a.abs();
    let cs = a >= params.band_margin && a <= 1.0 - params.band_margin;
    let cu = a >= 1.0 + params.band_margin && a <= params.a_cap;
    match band {
        Band::Cs => cs,
        Band::Cu => cu,
        Band::Both => cs || cu,
    }
}

fn nearest_in_class(y: f64, modulus: i64, residue: i64) -> Vec<i64> {
    if modulus == 0 {
        return vec![residue];
    }
    let d = modulus as f64;
    let base = residue + modulus * ((y - residue as f64) / d).floor() as i64;
    vec![base, base + modulus]
}

fn scan_in_class(lo: f64, hi: f64, modulus: i64, residue: i64) -> Vec<i64> {
    if modulus == 0 {
        return if (residue as f64) >= lo && (residue as f64) <= hi {
            vec![residue]
        } else {
            Vec::new()
        };
    }
    let mut m = residue + modulus * ((lo - residue as f64) / modulus as f64).ceil() as i64;
    let mut out = Vec::new();
    while (m as f64) <= hi {
        out.push(m);
        m += modulus;
    }
    out
}

/// Target t*(k) for cases where every factor except γ^t is fixed by k.
fn t_target(spec: &CycleSpec, moduli: &Moduli, plan: &Plan, k: i64) -> Option<f64> {
    let x1 = spec.omega1 / (2.0 * PI);
    let s = turns(k, moduli.omega1_class, x1);
    let sin2 = (2.0 * PI * s + spec.eta2).sin();
    let ratio = if spec.is_double_focus() {
        let parts = df_parts(spec, 2.0 * PI * plan.w_fixed?);
        parts.xi / (parts.b * sin2)
    } else {
        spec.b_coef * spec.u_scalar() / (spec.cap_b * sin2)
    };
    (ratio > 0.0 && ratio.is_finite()).then(|| ratio.ln() / spec.gamma.abs().ln())
}

fn candidates_for_k(
    spec: &CycleSpec,
    moduli: &Moduli,
    plan: &Plan,
    params: &SearchParams,
    kp: i64,
) -> Vec<Candidate> {
    let k = plan.lattice.k_step * kp + plan.lattice.k_off;
    if k < 1 || k > params.k_max {
        return Vec::new();
    }
    let Some((modulus, residue)) = plan.lattice.m_class(kp, plan.even_m) else {
        return Vec::new();
    };
    let kt = k as f64 * moduli.theta;
    let use_scan = matches!(plan.mode, Mode::Scan) || (spec.is_double_focus() && plan.w_fixed.is_none());
    let ms = if use_scan {
        scan_in_class(kt - params.t_span, kt + params.t_span, modulus, residue)
    } else {
        match t_target(spec, moduli, plan, k) {
            Some(ts) => nearest_in_class(kt + ts, modulus, residue),
            None => Vec::new(),
        }
    };
    let mut out = Vec::new();
    for m in ms {
        if m < 1 || m > params.m_max {
            continue;
        }
        let Ok(c) = coeffs(spec, k, m) else { continue };
        if !c.admissible || !c.a_km.is_finite() {
            continue;
        }
        let dist = match plan.filter {
            Filter::B => c.b_km.abs(),
            Filter::T(ts) => ((m as f64 - kt) - ts).abs(),
        };
        let accepted = dist <= params.eps && band_ok(plan.band, c.a_km, params);
        out.push(Candidate {
            k,
            m,
            a: c.a_km,
            b: c.b_km,
            dist,
            accepted,
        });
    }
    out
}

/// Search the window for pairs prescribed by the case construction.
pub fn search_pairs(
    spec: &CycleSpec,
    moduli: &Moduli,
    case: &Classification,
    params: &SearchParams,
) -> Result<PairSequence> {
    spec.validated()?;
    if !(params.eps > 0.0) {
        return Err(Error::domain("eps must be positive"));
    }
    let plan = plan_for(spec, moduli, case, params)?;
    let l = plan.lattice;
    let n_k = if params.k_max < l.k_off {
        0
    } else {
        (params.k_max - l.k_off) / l.k_step + 1
    };
    log::info!("search {}: {} values of k, eps {:e}", case.tag, n_k, params.eps);
    let per_k: Vec<Vec<Candidate>> = (0..n_k)
        .into_par_iter()
        .map(|kp| candidates_for_k(spec, moduli, &plan, params, kp))
        .collect();
    let mut best = f64::INFINITY;
    let mut scanned = 0usize;
    let mut accepted: Vec<Candidate> = Vec::new();
    for c in per_k.into_iter().flatten() {
        scanned += 1;
        best = best.min(c.dist);
        if c.accepted {
            accepted.push(c);
        }
    }
    accepted.sort_by_key(|c| (c.k, c.m));
    accepted.dedup_by_key(|c| (c.k, c.m));
    log::info!(
        "search {}: {} candidates, {} pairs, best distance {:e}",
        case.tag,
        scanned,
        accepted.len(),
        best
    );
    if accepted.len() < params.min_pairs.max(1) {
        return Err(Error::WindowExhausted {
            found: accepted.len(),
            wanted: params.min_pairs.max(1),
            best_distance: best,
        });
    }
    let x1 = spec.omega1 / (2.0 * PI);
    let x2 = spec.omega2_or_zero() / (2.0 * PI);
    let target_values = accepted
        .iter()
        .map(|c| {
            (
                c.m as f64 - c.k as f64 * moduli.theta,
                turns(c.k, moduli.omega1_class, x1),
                if spec.is_double_focus() {
                    turns(c.m, moduli.omega2_class, x2)
                } else {
                    0.0
                },
            )
        })
        .collect();
    Ok(PairSequence {
        case: case.tag,
        pairs: accepted.iter().map(|c| (c.k, c.m)).collect(),
        target_values,
        a_values: accepted.iter().map(|c| c.a).collect(),
        b_values: accepted.iter().map(|c| c.b).collect(),
        distances: accepted.iter().map(|c| c.dist).collect(),
        expected_kinds: plan.kinds,
        witness: plan.witness,
        target: plan.target,
        t_star: plan.t_star,
        eps: params.eps,
        window: (params.k_max, params.m_max),
        candidates: scanned,
        best_distance: best,
    })
}
