//! Cycle data, non-degeneracy checks, moduli and case classification.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_integer::Integer;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_C_FRAC: f64 = 0.5;
pub const DEFAULT_CONE_K: f64 = 0.1;
pub const DEFAULT_RELATION_BOUND: i64 = 1_000_000;

/// Tolerance used when a declared rational is compared with the float data.
pub const RATIONAL_MATCH_TOL: f64 = 1e-9;
const TAN_TOL: f64 = 1e-12;

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_c_frac() -> f64 {
    DEFAULT_C_FRAC
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleType {
    SaddleFocus,
    DoubleFocus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UMinus {
    Scalar(f64),
    Vector([f64; 2]),
}

impl UMinus {
    pub fn scalar(&self) -> Option<f64> {
        match *self {
            UMinus::Scalar(u) => Some(u),
            UMinus::Vector(_) => None,
        }
    }

    pub fn vector(&self) -> Option<[f64; 2]> {
        match *self {
            UMinus::Scalar(_) => None,
            UMinus::Vector(v) => Some(v),
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            UMinus::Scalar(u) => u == 0.0,
            UMinus::Vector([a, b]) => a == 0.0 && b == 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            UMinus::Scalar(u) => u.is_finite(),
            UMinus::Vector([a, b]) => a.is_finite() && b.is_finite(),
        }
    }
}

/// Multipliers, reduced transition coefficients and cube geometry of one cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSpec {
    pub cycle_type: CycleType,
    pub lambda: f64,
    pub gamma: f64,
    pub omega1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega2: Option<f64>,
    #[serde(rename = "A_coef")]
    pub cap_a: f64,
    #[serde(rename = "B_coef")]
    pub cap_b: f64,
    pub b_coef: f64,
    pub u_minus: UMinus,
    pub eta1: f64,
    pub eta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta3: Option<f64>,
    pub d: u32,
    pub d1: u32,
    pub d2: u32,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_c_frac")]
    pub c_frac: f64,
}

impl CycleSpec {
    pub fn is_double_focus(&self) -> bool {
        self.cycle_type == CycleType::DoubleFocus
    }

    pub fn omega2_or_zero(&self) -> f64 {
        self.omega2.unwrap_or(0.0)
    }

    pub fn eta3_or_zero(&self) -> f64 {
        self.eta3.unwrap_or(0.0)
    }

    /// Scalar u⁻ of a saddle-focus cycle (first component for double focus).
    pub fn u_scalar(&self) -> f64 {
        match self.u_minus {
            UMinus::Scalar(u) => u,
            UMinus::Vector([a, _]) => a,
        }
    }

    pub fn u_vector(&self) -> [f64; 2] {
        match self.u_minus {
            UMinus::Scalar(u) => [u, 0.0],
            UMinus::Vector(v) => v,
        }
    }

    /// Dimensions of the strong-unstable-like and strong-stable-like factors
    /// of the cube (Y then Z).
    pub fn cube_dims(&self) -> (usize, usize) {
        let d = self.d as usize;
        let d1 = self.d1 as usize;
        (d1, d.saturating_sub(d1 + 1))
    }

    /// Half-width of the activating interval, c·δ.
    pub fn interval_half_width(&self) -> f64 {
        self.c_frac * self.delta
    }

    pub fn validated(&self) -> Result<()> {
        let report = validate_nondegeneracy(self);
        if report.pass {
            Ok(())
        } else {
            let failed: Vec<_> = report
                .entries
                .iter()
                .filter(|e| !e.pass)
                .map(|e| format!("{} ({})", e.name, e.detail))
                .collect();
            Err(Error::invalid(failed.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub entries: Vec<ValidationEntry>,
}

pub fn validate_nondegeneracy(spec: &CycleSpec) -> ValidationReport {
    let mut entries = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        entries.push(ValidationEntry {
            name: name.to_string(),
            pass,
            detail,
        })
    };
    let df = spec.is_double_focus();

    let finite = [
        spec.lambda,
        spec.gamma,
        spec.omega1,
        spec.omega2_or_zero(),
        spec.cap_a,
        spec.cap_b,
        spec.b_coef,
        spec.eta1,
        spec.eta2,
        spec.eta3_or_zero(),
        spec.delta,
        spec.c_frac,
    ]
    .iter()
    .all(|v| v.is_finite())
        && spec.u_minus.is_finite();
    push("finite values", finite, "all real inputs finite".into());

    push(
        "0 < lambda < 1",
        spec.lambda > 0.0 && spec.lambda < 1.0,
        format!("lambda = {:?}", spec.lambda),
    );
    push(
        "|gamma| > 1",
        spec.gamma.abs() > 1.0,
        format!("gamma = {:?}", spec.gamma),
    );
    if df {
        push(
            "gamma > 0",
            spec.gamma > 0.0,
            format!("gamma = {:?}", spec.gamma),
        );
    }
    push(
        "0 < omega1 < pi",
        spec.omega1 > 0.0 && spec.omega1 < PI,
        format!("omega1 = {:?}", spec.omega1),
    );
    match (df, spec.omega2) {
        (true, Some(w)) => push(
            "0 < omega2 < pi",
            w > 0.0 && w < PI,
            format!("omega2 = {:?}", w),
        ),
        (true, None) => push("0 < omega2 < pi", false, "omega2 missing".into()),
        (false, Some(_)) => push(
            "omega2 only for double focus",
            false,
            "omega2 given".into(),
        ),
        (false, None) => {}
    }
    push("A > 0", spec.cap_a > 0.0, format!("A = {:?}", spec.cap_a));
    push("B > 0", spec.cap_b > 0.0, format!("B = {:?}", spec.cap_b));
    push(
        "b ≠ 0",
        spec.b_coef != 0.0,
        format!("b = {:?}", spec.b_coef),
    );
    push(
        "u- ≠ 0",
        !spec.u_minus.is_zero(),
        format!("u- = {:?}", spec.u_minus),
    );
    let shape_ok = match (df, spec.u_minus) {
        (false, UMinus::Scalar(_)) | (true, UMinus::Vector(_)) => true,
        _ => false,
    };
    push(
        "u- shape matches cycle type",
        shape_ok,
        if df {
            "double focus needs a 2-vector".into()
        } else {
            "saddle focus needs a scalar".into()
        },
    );
    let s = (spec.eta1 - spec.eta2).sin().abs();
    push(
        "tan eta1 ≠ tan eta2",
        s > TAN_TOL,
        format!("|sin(eta1 - eta2)| = {:?}", s),
    );
    match (df, spec.eta3) {
        (true, None) => push("eta3 present", false, "eta3 missing".into()),
        (false, Some(_)) => push("eta3 only for double focus", false, "eta3 given".into()),
        _ => {}
    }
    push(
        "d1 + 1 = d2",
        spec.d1 + 1 == spec.d2,
        format!("d1 = {}, d2 = {}", spec.d1, spec.d2),
    );
    push("d >= 3", spec.d >= 3, format!("d = {}", spec.d));
    push("d1 >= 1", spec.d1 >= 1, format!("d1 = {}", spec.d1));
    push(
        "d - d2 >= 1",
        spec.d >= spec.d2 + 1,
        format!("d = {}, d2 = {}", spec.d, spec.d2),
    );
    push(
        "delta > 0",
        spec.delta > 0.0,
        format!("delta = {:?}", spec.delta),
    );
    push(
        "0 < c_frac < 1",
        spec.c_frac > 0.0 && spec.c_frac < 1.0,
        format!("c_frac = {:?}", spec.c_frac),
    );

    let pass = entries.iter().all(|e| e.pass);
    ValidationReport { pass, entries }
}

pub fn compute_theta(spec: &CycleSpec) -> f64 {
    -spec.lambda.ln() / spec.gamma.abs().ln()
}

/// Partial quotients of the continued fraction of `x`.
pub fn continued_fraction(x: f64, max_terms: usize) -> Vec<i64> {
    let mut terms = Vec::new();
    let mut y = x;
    for _ in 0..max_terms {
        if !y.is_finite() || y.abs() > 1e15 {
            break;
        }
        let a = y.floor();
        terms.push(a as i64);
        let frac = y - a;
        if frac < 1e-12 {
            break;
        }
        y = 1.0 / frac;
    }
    terms
}

/// Convergents p/q of a continued fraction, stopping before overflow or once
/// the denominator exceeds `max_den`.
pub fn convergents(terms: &[i64], max_den: i64) -> Vec<(i64, i64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut out = Vec::new();
    for &a in terms {
        let p = match a.checked_mul(p1).and_then(|v| v.checked_add(p0)) {
            Some(v) => v,
            None => break,
        };
        let q = match a.checked_mul(q1).and_then(|v| v.checked_add(q0)) {
            Some(v) => v,
            None => break,
        };
        if q > max_den {
            break;
        }
        out.push((p, q));
        p0 = p1;
        q0 = q1;
        p1 = p;
        q1 = q;
    }
    out
}

/// Declared arithmetic class of a modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ClassRepr", into = "ClassRepr")]
pub enum ArithClass {
    Rational { num: i64, den: i64 },
    Irrational,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ClassRepr {
    Tag(String),
    Frac { num: i64, den: i64 },
}

impl TryFrom<ClassRepr> for ArithClass {
    type Error = String;

    fn try_from(r: ClassRepr) -> std::result::Result<Self, String> {
        match r {
            ClassRepr::Tag(t) if t == "irrational" => Ok(ArithClass::Irrational),
            ClassRepr::Tag(t) => Err(format!(
                "unknown class {t:?}, expected \"irrational\" or {{\"num\", \"den\"}}"
            )),
            ClassRepr::Frac { num, den } => Ok(ArithClass::Rational { num, den }),
        }
    }
}

impl From<ArithClass> for ClassRepr {
    fn from(c: ArithClass) -> Self {
        match c {
            ArithClass::Irrational => ClassRepr::Tag("irrational".into()),
            ArithClass::Rational { num, den } => ClassRepr::Frac { num, den },
        }
    }
}

impl ArithClass {
    pub fn rational(&self) -> Option<Rational64> {
        match *self {
            ArithClass::Rational { num, den } => Some(Rational64::new(num, den)),
            ArithClass::Irrational => None,
        }
    }

    pub fn num_den(&self) -> Option<(i64, i64)> {
        match *self {
            ArithClass::Rational { num, den } => Some((num, den)),
            ArithClass::Irrational => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, ArithClass::Rational { .. })
    }
}

/// Quantities that may enter an integer relation. Angles are measured in
/// turns (ω/2π).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Theta,
    ThetaInv,
    Omega1,
    Omega2,
    ThetaOmega2,
    One,
}

pub type Relation = BTreeMap<Quantity, i64>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuliDecl {
    #[serde(default)]
    pub theta: Option<ArithClass>,
    #[serde(default)]
    pub omega1: Option<ArithClass>,
    #[serde(default)]
    pub omega2: Option<ArithClass>,
    #[serde(default)]
    pub relations: Vec<Relation>,
    #[serde(default)]
    pub independent: Vec<Vec<Quantity>>,
    #[serde(default)]
    pub relation_bound: Option<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationSource {
    Declared,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Dependence {
    Dependent {
        relation: Relation,
        source: RelationSource,
    },
    Independent,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceFlag {
    pub subset: Vec<Quantity>,
    #[serde(flatten)]
    pub dependence: Dependence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moduli {
    pub theta: f64,
    pub theta_class: Option<ArithClass>,
    pub omega1_class: Option<ArithClass>,
    pub omega2_class: Option<ArithClass>,
    pub theta_convergents: Vec<(i64, i64)>,
    pub dependence_flags: Vec<DependenceFlag>,
}

impl Moduli {
    pub fn flag(&self, subset: &[Quantity]) -> Option<&Dependence> {
        self.dependence_flags
            .iter()
            .find(|f| f.subset == subset)
            .map(|f| &f.dependence)
    }
}

pub const SUBSET_T_W1: [Quantity; 3] = [Quantity::Theta, Quantity::Omega1, Quantity::One];
pub const SUBSET_T_W1_TW2: [Quantity; 4] = [
    Quantity::Theta,
    Quantity::Omega1,
    Quantity::ThetaOmega2,
    Quantity::One,
];
pub const SUBSET_W1_TW2: [Quantity; 3] = [Quantity::Omega1, Quantity::ThetaOmega2, Quantity::One];
pub const SUBSET_TINV_W2: [Quantity; 3] = [Quantity::ThetaInv, Quantity::Omega2, Quantity::One];

fn quantity_value(q: Quantity, spec: &CycleSpec, theta: f64) -> f64 {
    match q {
        Quantity::Theta => theta,
        Quantity::ThetaInv => 1.0 / theta,
        Quantity::Omega1 => spec.omega1 / (2.0 * PI),
        Quantity::Omega2 => spec.omega2_or_zero() / (2.0 * PI),
        Quantity::ThetaOmega2 => theta * spec.omega2_or_zero() / (2.0 * PI),
        Quantity::One => 1.0,
    }
}

struct Classes {
    theta: Option<ArithClass>,
    omega1: Option<ArithClass>,
    omega2: Option<ArithClass>,
}

impl Classes {
    /// Exact value when the quantity is rational, `None` when irrational or
    /// undeclared.
    fn exact(&self, q: Quantity) -> Option<Rational64> {
        let th = self.theta.and_then(|c| c.rational());
        match q {
            Quantity::Theta => th,
            Quantity::ThetaInv => th.map(|t| t.recip()),
            Quantity::Omega1 => self.omega1.and_then(|c| c.rational()),
            Quantity::Omega2 => self.omega2.and_then(|c| c.rational()),
            Quantity::ThetaOmega2 => {
                let w = self.omega2.and_then(|c| c.rational());
                th.zip(w).map(|(a, b)| a * b)
            }
            Quantity::One => Some(Rational64::from_integer(1)),
        }
    }

    fn is_irrational(&self, q: Quantity) -> bool {
        let irr = |c: Option<ArithClass>| c == Some(ArithClass::Irrational);
        match q {
            Quantity::Theta | Quantity::ThetaInv => irr(self.theta),
            Quantity::Omega1 => irr(self.omega1),
            Quantity::Omega2 => irr(self.omega2),
            Quantity::ThetaOmega2 => false,
            Quantity::One => false,
        }
    }
}

fn check_class(name: &str, class: Option<ArithClass>, value: f64) -> Result<()> {
    if let Some(ArithClass::Rational { num, den }) = class {
        if den <= 0 || num <= 0 {
            return Err(Error::invalid(format!(
                "{name}: rational class needs positive integers, got {num}/{den}"
            )));
        }
        if num.gcd(&den) != 1 {
            return Err(Error::invalid(format!(
                "{name}: {num}/{den} is not in lowest terms"
            )));
        }
        let r = num as f64 / den as f64;
        if (r - value).abs() > RATIONAL_MATCH_TOL * value.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "{name}: declared {num}/{den} but the data gives {value:?}"
            )));
        }
    }
    Ok(())
}

fn exact_relation(a: (Quantity, Rational64), b: (Quantity, Rational64)) -> Relation {
    let (qa, ra) = a;
    let (qb, rb) = b;
    let ca = rb.numer() * ra.denom();
    let cb = -(ra.numer() * rb.denom());
    let g = ca.gcd(&cb).max(1);
    let mut rel = Relation::new();
    rel.insert(qa, ca / g);
    rel.insert(qb, cb / g);
    rel
}

fn relevant_subsets(spec: &CycleSpec) -> Vec<Vec<Quantity>> {
    if spec.is_double_focus() {
        vec![
            SUBSET_T_W1.to_vec(),
            SUBSET_T_W1_TW2.to_vec(),
            SUBSET_W1_TW2.to_vec(),
            SUBSET_TINV_W2.to_vec(),
        ]
    } else {
        vec![SUBSET_T_W1.to_vec()]
    }
}

/// Assemble the moduli record from the spec and the user's declarations.
/// Declared rationals are checked against the float data and declared
/// relations are verified numerically; dependence among rational members is
/// decided in exact arithmetic.
pub fn build_moduli(spec: &CycleSpec, decl: &ModuliDecl) -> Result<Moduli> {
    spec.validated()?;
    let theta = compute_theta(spec);
    let df = spec.is_double_focus();
    if !df && decl.omega2.is_some() {
        return Err(Error::invalid("omega2 class declared for a saddle focus"));
    }
    check_class("theta", decl.theta, theta)?;
    check_class("omega1", decl.omega1, spec.omega1 / (2.0 * PI))?;
    if df {
        check_class("omega2", decl.omega2, spec.omega2_or_zero() / (2.0 * PI))?;
    }
    let bound = decl.relation_bound.unwrap_or(DEFAULT_RELATION_BOUND);
    let classes = Classes {
        theta: decl.theta,
        omega1: decl.omega1,
        omega2: if df { decl.omega2 } else { None },
    };

    for rel in &decl.relations {
        if rel.values().all(|&c| c == 0) {
            return Err(Error::invalid("declared relation has all coefficients zero"));
        }
        if !df
            && rel.iter().any(|(q, &c)| {
                c != 0 && matches!(q, Quantity::Omega2 | Quantity::ThetaOmega2)
            })
        {
            return Err(Error::invalid("relation uses omega2 on a saddle focus"));
        }
        let mut sum = 0.0;
        let mut scale = 1.0f64;
        for (&q, &c) in rel {
            let v = quantity_value(q, spec, theta);
            sum += c as f64 * v;
            scale += (c as f64 * v).abs();
        }
        if sum.abs() > RATIONAL_MATCH_TOL * scale {
            return Err(Error::invalid(format!(
                "declared relation {rel:?} does not hold (residual {sum:e})"
            )));
        }
    }

    let mut flags = Vec::new();
    for subset in relevant_subsets(spec) {
        let dependence = subset_dependence(&subset, decl, &classes, bound)?;
        flags.push(DependenceFlag { subset, dependence });
    }

    let theta_convergents = match decl.theta {
        Some(ArithClass::Irrational) => convergents(&continued_fraction(theta, 40), 1_000_000_000),
        _ => Vec::new(),
    };

    Ok(Moduli {
        theta,
        theta_class: decl.theta,
        omega1_class: decl.omega1,
        omega2_class: classes.omega2,
        theta_convergents,
        dependence_flags: flags,
    })
}

fn subset_dependence(
    subset: &[Quantity],
    decl: &ModuliDecl,
    classes: &Classes,
    bound: i64,
) -> Result<Dependence> {
    let within = |rel: &Relation| {
        rel.iter()
            .all(|(q, &c)| c == 0 || subset.contains(q))
    };
    let mut dependent = decl
        .relations
        .iter()
        .find(|r| within(r))
        .map(|r| Dependence::Dependent {
            relation: r.iter().filter(|(_, &c)| c != 0).map(|(&q, &c)| (q, c)).collect(),
            source: RelationSource::Declared,
        });
    let mut exceeded = false;
    if dependent.is_none() {
        let rationals: Vec<(Quantity, Rational64)> = subset
            .iter()
            .filter_map(|&q| classes.exact(q).map(|r| (q, r)))
            .collect();
        if rationals.len() >= 2 {
            let rel = exact_relation(rationals[0], rationals[1]);
            if rel.values().all(|c| c.abs() <= bound) {
                dependent = Some(Dependence::Dependent {
                    relation: rel,
                    source: RelationSource::Exact,
                });
            } else {
                exceeded = true;
            }
        }
    }

    let non_one: Vec<_> = subset.iter().filter(|&&q| q != Quantity::One).collect();
    let trivially_independent = non_one.len() == 1
        && subset.contains(&Quantity::One)
        && classes.is_irrational(*non_one[0]);
    let declared_independent = decl
        .independent
        .iter()
        .any(|set| subset.iter().all(|q| set.contains(q)));

    match dependent {
        Some(dep) if declared_independent => Err(Error::invalid(format!(
            "subset {subset:?} is declared independent but {dep:?}"
        ))),
        Some(dep) => Ok(dep),
        None if declared_independent || trivially_independent => Ok(Dependence::Independent),
        None => {
            if exceeded {
                log::warn!("relation search for {subset:?} exceeded coefficient bound {bound}");
            }
            Ok(Dependence::Unknown)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "SF-1")]
    Sf1,
    #[serde(rename = "SF-2")]
    Sf2,
    #[serde(rename = "SF-3")]
    Sf3,
    #[serde(rename = "SF-rational-all")]
    SfRationalAll,
    #[serde(rename = "DF-1")]
    Df1,
    #[serde(rename = "DF-2.1")]
    Df21,
    #[serde(rename = "DF-2.2")]
    Df22,
    #[serde(rename = "DF-3.1")]
    Df31,
    #[serde(rename = "DF-3.2")]
    Df32,
    #[serde(rename = "DF-3.3.1")]
    Df331,
    #[serde(rename = "DF-3.3.2")]
    Df332,
    #[serde(rename = "DF-rational-all")]
    DfRationalAll,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::Sf1 => "SF-1",
            CaseTag::Sf2 => "SF-2",
            CaseTag::Sf3 => "SF-3",
            CaseTag::SfRationalAll => "SF-rational-all",
            CaseTag::Df1 => "DF-1",
            CaseTag::Df21 => "DF-2.1",
            CaseTag::Df22 => "DF-2.2",
            CaseTag::Df31 => "DF-3.1",
            CaseTag::Df32 => "DF-3.2",
            CaseTag::Df331 => "DF-3.3.1",
            CaseTag::Df332 => "DF-3.3.2",
            CaseTag::DfRationalAll => "DF-rational-all",
        }
    }

    pub fn is_rational_all(&self) -> bool {
        matches!(self, CaseTag::SfRationalAll | CaseTag::DfRationalAll)
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Affine expression `target = Σ coeffs[q]·q` with rational coefficients,
/// solved out of a relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solved {
    pub target: Quantity,
    pub coeffs: BTreeMap<Quantity, Rational64>,
}

impl Solved {
    pub fn coeff(&self, q: Quantity) -> Rational64 {
        self.coeffs.get(&q).copied().unwrap_or_else(|| Rational64::from_integer(0))
    }
}

fn solve_for(rel: &Relation, target: Quantity) -> Option<Solved> {
    let ct = *rel.get(&target)?;
    if ct == 0 {
        return None;
    }
    let coeffs = rel
        .iter()
        .filter(|(&q, &c)| q != target && c != 0)
        .map(|(&q, &c)| (q, Rational64::new(-c, ct)))
        .collect();
    Some(Solved { target, coeffs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub tag: CaseTag,
    /// Set when ω₁ is rational and ω₂ irrational; the case is read off the
    /// inverse map, whose moduli are (1/θ, ω₂, ω₁).
    pub mirrored: bool,
    /// θ solved out of its relation with ω₁/2π and 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_relation: Option<Solved>,
    /// θ·ω₂/2π solved out of its relation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_omega2_relation: Option<Solved>,
}

fn need(class: Option<ArithClass>, name: &str) -> Result<ArithClass> {
    class.ok_or_else(|| Error::AmbiguousClassification {
        detail: format!("{name} class not declared"),
    })
}

fn flag_of<'a>(moduli: &'a Moduli, subset: &[Quantity]) -> Result<&'a Dependence> {
    match moduli.flag(subset) {
        Some(Dependence::Unknown) | None => Err(Error::AmbiguousClassification {
            detail: format!("dependence of {subset:?} not established; declare a relation or independence"),
        }),
        Some(d) => Ok(d),
    }
}

fn relation_of(d: &Dependence) -> Option<&Relation> {
    match d {
        Dependence::Dependent { relation, .. } => Some(relation),
        _ => None,
    }
}

pub fn classify_case(moduli: &Moduli, spec: &CycleSpec) -> Result<Classification> {
    let th = need(moduli.theta_class, "theta")?;
    let w1 = need(moduli.omega1_class, "omega1")?;
    let mut out = Classification {
        tag: CaseTag::SfRationalAll,
        mirrored: false,
        theta_relation: None,
        theta_omega2_relation: None,
    };
    if !spec.is_double_focus() {
        out.tag = match (th.is_rational(), w1.is_rational()) {
            (true, true) => CaseTag::SfRationalAll,
            (false, true) => CaseTag::Sf1,
            (_, false) => match flag_of(moduli, &SUBSET_T_W1)? {
                Dependence::Dependent { relation, .. } => {
                    out.theta_relation = Some(solve_for(relation, Quantity::Theta).ok_or_else(
                        || Error::invalid("relation among theta, omega/2pi, 1 does not involve theta"),
                    )?);
                    CaseTag::Sf2
                }
                _ => CaseTag::Sf3,
            },
        };
        return Ok(out);
    }

    let w2 = need(moduli.omega2_class, "omega2")?;
    out.tag = match (th.is_rational(), w1.is_rational(), w2.is_rational()) {
        (true, true, true) => CaseTag::DfRationalAll,
        (false, true, true) => CaseTag::Df1,
        (_, false, true) => match flag_of(moduli, &SUBSET_T_W1)? {
            Dependence::Dependent { relation, .. } => {
                out.theta_relation = Some(solve_for(relation, Quantity::Theta).ok_or_else(
                    || Error::invalid("relation among theta, omega1/2pi, 1 does not involve theta"),
                )?);
                CaseTag::Df22
            }
            _ => CaseTag::Df21,
        },
        (_, true, false) => {
            out.mirrored = true;
            match flag_of(moduli, &SUBSET_TINV_W2)? {
                Dependence::Dependent { relation, .. } => {
                    out.theta_relation = solve_for(relation, Quantity::ThetaInv);
                    CaseTag::Df22
                }
                _ => CaseTag::Df21,
            }
        }
        (_, false, false) => {
            let full = flag_of(moduli, &SUBSET_T_W1_TW2)?;
            if matches!(full, Dependence::Independent) {
                CaseTag::Df31
            } else {
                let small = flag_of(moduli, &SUBSET_T_W1)?;
                match relation_of(small) {
                    None => {
                        let rel = relation_of(full).expect("dependent");
                        out.theta_omega2_relation = Some(
                            solve_for(rel, Quantity::ThetaOmega2).ok_or_else(|| {
                                Error::invalid("relation for case 3.2 must involve theta*omega2")
                            })?,
                        );
                        CaseTag::Df32
                    }
                    Some(rel) => {
                        out.theta_relation = Some(solve_for(rel, Quantity::Theta).ok_or_else(
                            || Error::invalid("relation among theta, omega1/2pi, 1 does not involve theta"),
                        )?);
                        match flag_of(moduli, &SUBSET_W1_TW2)? {
                            Dependence::Dependent { relation, .. } => {
                                out.theta_omega2_relation =
                                    Some(solve_for(relation, Quantity::ThetaOmega2).ok_or_else(
                                        || Error::invalid("relation must involve theta*omega2"),
                                    )?);
                                CaseTag::Df331
                            }
                            _ => CaseTag::Df332,
                        }
                    }
                }
            }
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sf_spec() -> CycleSpec {
        CycleSpec {
            cycle_type: CycleType::SaddleFocus,
            lambda: 0.5,
            gamma: 2.0,
            omega1: PI / 2.0,
            omega2: None,
            cap_a: 1.0,
            cap_b: 1.0,
            b_coef: 1.0,
            u_minus: UMinus::Scalar(1.0),
            eta1: 0.0,
            eta2: PI / 4.0,
            eta3: None,
            d: 3,
            d1: 1,
            d2: 2,
            delta: 0.1,
            c_frac: 0.5,
        }
    }

    fn rat(num: i64, den: i64) -> Option<ArithClass> {
        Some(ArithClass::Rational { num, den })
    }

    #[test]
    fn theta_examples() {
        let mut s = sf_spec();
        assert_eq!(compute_theta(&s), 1.0);
        s.lambda = 0.25;
        assert_eq!(compute_theta(&s), 2.0);
        s.lambda = 2f64.powf(-std::f64::consts::SQRT_2);
        assert!((compute_theta(&s) - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn validation_entries() {
        let mut s = sf_spec();
        s.b_coef = 0.0;
        let r = validate_nondegeneracy(&s);
        assert!(!r.pass);
        assert!(r.entries.iter().any(|e| e.name == "b ≠ 0" && !e.pass));
        let mut s = sf_spec();
        s.eta1 = 0.0;
        s.eta2 = PI / 4.0;
        let r = validate_nondegeneracy(&s);
        assert!(r.entries.iter().any(|e| e.name == "tan eta1 ≠ tan eta2" && e.pass));
        assert!(r.pass);
        assert_eq!(r, validate_nondegeneracy(&s));
        s.eta2 = PI;
        assert!(!validate_nondegeneracy(&s).pass);
    }

    #[test]
    fn class_json_forms() {
        let d: ModuliDecl = serde_json::from_str(
            r#"{"theta":"irrational","omega1":{"num":1,"den":4},
                "relations":[{"theta":1,"one":-1}],"independent":[["theta","one"]]}"#,
        )
        .unwrap();
        assert_eq!(d.theta, Some(ArithClass::Irrational));
        assert_eq!(d.omega1, rat(1, 4));
        assert!(serde_json::from_str::<ModuliDecl>(r#"{"theta":"real"}"#).is_err());
        assert!(serde_json::from_str::<ModuliDecl>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn continued_fraction_of_sqrt2() {
        let t = continued_fraction(std::f64::consts::SQRT_2, 10);
        assert_eq!(t[..6], [1, 2, 2, 2, 2, 2]);
        let c = convergents(&t, 1000);
        assert_eq!(c[..4], [(1, 1), (3, 2), (7, 5), (17, 12)]);
    }

    #[test]
    fn classify_saddle_focus_cases() {
        let mut s = sf_spec();
        s.lambda = 2f64.powf(-std::f64::consts::SQRT_2);
        let decl = ModuliDecl {
            theta: Some(ArithClass::Irrational),
            omega1: rat(1, 4),
            ..Default::default()
        };
        let m = build_moduli(&s, &decl).unwrap();
        assert_eq!(classify_case(&m, &s).unwrap().tag, CaseTag::Sf1);

        s.omega1 = 2.0 * PI * (std::f64::consts::SQRT_2 - 1.0) / 2.0;
        let mut decl = ModuliDecl {
            theta: Some(ArithClass::Irrational),
            omega1: Some(ArithClass::Irrational),
            ..Default::default()
        };
        let m = build_moduli(&s, &decl).unwrap();
        assert!(matches!(
            classify_case(&m, &s),
            Err(Error::AmbiguousClassification { .. })
        ));
        decl.independent = vec![SUBSET_T_W1.to_vec()];
        let m = build_moduli(&s, &decl).unwrap();
        assert_eq!(classify_case(&m, &s).unwrap().tag, CaseTag::Sf3);

        // θ = 2·(ω/2π) + 1
        decl.independent.clear();
        decl.relations = vec![[(Quantity::Theta, 1), (Quantity::Omega1, -2), (Quantity::One, -1)]
            .into_iter()
            .collect()];
        let m = build_moduli(&s, &decl).unwrap();
        let c = classify_case(&m, &s).unwrap();
        assert_eq!(c.tag, CaseTag::Sf2);
        let sol = c.theta_relation.unwrap();
        assert_eq!(sol.coeff(Quantity::Omega1), Rational64::from_integer(2));
        assert_eq!(sol.coeff(Quantity::One), Rational64::from_integer(1));

        let mut s2 = sf_spec();
        s2.lambda = 0.25;
        let decl = ModuliDecl {
            theta: rat(2, 1),
            omega1: rat(1, 4),
            ..Default::default()
        };
        let m = build_moduli(&s2, &decl).unwrap();
        assert_eq!(classify_case(&m, &s2).unwrap().tag, CaseTag::SfRationalAll);
    }

    #[test]
    fn rational_theta_with_irrational_omega_is_dependent() {
        let mut s = sf_spec();
        s.omega1 = 1.0;
        let decl = ModuliDecl {
            theta: rat(1, 1),
            omega1: Some(ArithClass::Irrational),
            ..Default::default()
        };
        let m = build_moduli(&s, &decl).unwrap();
        let c = classify_case(&m, &s).unwrap();
        assert_eq!(c.tag, CaseTag::Sf2);
        assert_eq!(
            c.theta_relation.unwrap().coeff(Quantity::Omega1),
            Rational64::from_integer(0)
        );
    }

    #[test]
    fn bad_declarations_rejected() {
        let s = sf_spec();
        let decl = ModuliDecl {
            theta: rat(2, 2),
            ..Default::default()
        };
        assert!(build_moduli(&s, &decl).is_err());
        let decl = ModuliDecl {
            theta: rat(3, 2),
            ..Default::default()
        };
        assert!(build_moduli(&s, &decl).is_err());
        let decl = ModuliDecl {
            theta: rat(1, 1),
            relations: vec![[(Quantity::Theta, 1), (Quantity::One, -2)].into_iter().collect()],
            ..Default::default()
        };
        assert!(build_moduli(&s, &decl).is_err());
    }
}
