//! First-return coefficients, the cross-form model map and sampled cone
//! checks.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle_model::CycleSpec;
use crate::error::{Error, Result};
use crate::rng::{self, tags};

const FIXED_POINT_MAX_ITER: usize = 200;
const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_DAMPING: f64 = 0.9;
const CUBE_SLACK: f64 = 1e-12;
const CONE_TOL: f64 = 1e-12;
const SAMPLE_ATTEMPTS: usize = 20;

/// Bound on |B_km| for saddle-focus pairs to map into the cube.
pub fn cross_bound(delta: f64) -> f64 {
    0.5 * delta
}

/// Lower bound on the trigonometric denominators of double-focus pairs.
pub fn quant_bound(delta: f64) -> f64 {
    delta.sqrt()
}

/// λ^k γ^m evaluated through logarithms, sign from γ^m.
pub fn lambda_gamma(spec: &CycleSpec, k: i64, m: i64) -> f64 {
    let mag = (k as f64 * spec.lambda.ln() + m as f64 * spec.gamma.abs().ln()).exp();
    if spec.gamma < 0.0 && m.rem_euclid(2) == 1 {
        -mag
    } else {
        mag
    }
}

/// γ^m with sign, through logarithms.
pub fn gamma_pow(gamma: f64, m: i64) -> f64 {
    let mag = (m as f64 * gamma.abs().ln()).exp();
    if gamma < 0.0 && m.rem_euclid(2) == 1 {
        -mag
    } else {
        mag
    }
}

/// Double-focus quantities depending on the angle x = mω₂.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfParts {
    pub denom: f64,
    pub a: f64,
    pub b: f64,
    pub xi: f64,
    pub xi_num: f64,
    pub cos_x: f64,
    pub cos_x3: f64,
}

pub fn df_parts(spec: &CycleSpec, x: f64) -> DfParts {
    let x3 = x + spec.eta3_or_zero();
    let (s3, c3) = x3.sin_cos();
    let denom = c3 + spec.b_coef * s3;
    let [u1, u2] = spec.u_vector();
    let xi_num = c3 * u1 + s3 * u2;
    DfParts {
        denom,
        a: spec.cap_a / denom,
        b: spec.cap_b / denom,
        xi: xi_num / denom,
        xi_num,
        cos_x: x.cos(),
        cos_x3: c3,
    }
}

/// Smallest of the quantities that must stay above c(δ) for a double-focus
/// pair.
pub fn quant_margin(parts: &DfParts) -> f64 {
    parts
        .cos_x
        .abs()
        .min(parts.cos_x3.abs())
        .min(parts.denom.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnCoeffs {
    pub k: i64,
    pub m: i64,
    #[serde(rename = "A_km")]
    pub a_km: f64,
    #[serde(rename = "B_km")]
    pub b_km: f64,
    pub admissible: bool,
    /// λ^k γ^m
    pub scale: f64,
}

pub fn coeffs(spec: &CycleSpec, k: i64, m: i64) -> Result<ReturnCoeffs> {
    if k < 1 || m < 1 {
        return Err(Error::domain(format!("k and m must be >= 1, got ({k}, {m})")));
    }
    Ok(coeffs_with_scale(spec, k, m, lambda_gamma(spec, k, m)))
}

/// Coefficients with the factor λ^k γ^m supplied by the caller.
pub fn coeffs_with_scale(spec: &CycleSpec, k: i64, m: i64, scale: f64) -> ReturnCoeffs {
    let kw = k as f64 * spec.omega1;
    let s1 = (kw + spec.eta1).sin();
    let s2 = (kw + spec.eta2).sin();
    if spec.is_double_focus() {
        let parts = df_parts(spec, m as f64 * spec.omega2_or_zero());
        let a_km = scale * parts.a * s1;
        let b_km = scale * parts.b * s2 - parts.xi;
        let admissible = quant_margin(&parts) > quant_bound(spec.delta) && b_km.is_finite();
        ReturnCoeffs {
            k,
            m,
            a_km,
            b_km,
            admissible,
            scale,
        }
    } else {
        let a_km = scale * spec.cap_a * s1;
        let b_km = scale * spec.cap_b * s2 - spec.b_coef * spec.u_scalar();
        ReturnCoeffs {
            k,
            m,
            a_km,
            b_km,
            admissible: b_km.abs() < cross_bound(spec.delta),
            scale,
        }
    }
}

/// Point (or tangent vector) in the cube, split as (X, Y, Z).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointInCube {
    pub x: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl PointInCube {
    pub fn zeros(dy: usize, dz: usize) -> Self {
        PointInCube {
            x: 0.0,
            y: vec![0.0; dy],
            z: vec![0.0; dz],
        }
    }

    pub fn norm(&self) -> f64 {
        self.x.abs().max(max_abs(&self.y)).max(max_abs(&self.z))
    }

    fn inside(&self, delta: f64) -> bool {
        let lim = delta * (1.0 + CUBE_SLACK);
        self.norm() <= lim
    }

    fn axpy(&self, h: f64, v: &PointInCube) -> PointInCube {
        PointInCube {
            x: self.x + h * v.x,
            y: self.y.iter().zip(&v.y).map(|(a, b)| a + h * b).collect(),
            z: self.z.iter().zip(&v.z).map(|(a, b)| a + h * b).collect(),
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Tensor product of three damped cosines, amp·β₀(X/δ)β₁(Ȳ₁/δ)β₂(Z₁/δ) with
/// β(t) = exp(−t²/2)·cos(a·t + b).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amp: f64,
    pub freq: [f64; 3],
    pub phase: [f64; 3],
}

impl Bump {
    fn zero() -> Self {
        Bump {
            amp: 0.0,
            freq: [0.0; 3],
            phase: [0.0; 3],
        }
    }

    fn random(rng: &mut ChaCha8Rng, bound: f64, delta: f64) -> Self {
        let freq = [
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.5..3.0),
        ];
        let phase = [
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(0.0..2.0 * PI),
        ];
        let fmax = freq.iter().cloned().fold(0.0, f64::max);
        Bump {
            amp: bound * (delta / (1.0 + fmax)).min(1.0),
            freq,
            phase,
        }
    }

    fn factor(&self, i: usize, t: f64) -> (f64, f64) {
        let g = (-0.5 * t * t).exp();
        let arg = self.freq[i] * t + self.phase[i];
        let (s, c) = arg.sin_cos();
        (g * c, -t * g * c - self.freq[i] * g * s)
    }

    /// Value and gradient with respect to (X, Ȳ₁, Z₁).
    fn eval(&self, x: f64, y: f64, z: f64, delta: f64) -> (f64, [f64; 3]) {
        if self.amp == 0.0 {
            return (0.0, [0.0; 3]);
        }
        let (f0, d0) = self.factor(0, x / delta);
        let (f1, d1) = self.factor(1, y / delta);
        let (f2, d2) = self.factor(2, z / delta);
        let s = self.amp / delta;
        (
            self.amp * f0 * f1 * f2,
            [s * d0 * f1 * f2, s * f0 * d1 * f2, s * f0 * f1 * d2],
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    pub mu: f64,
    pub phi_bound: f64,
    pub phi_seed: u64,
    /// Free coefficient ℓ in the double-focus μ gain 2/(√(1+ℓ²)·cos(mω₂+η₃)).
    pub df_ell: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            mu: 0.0,
            phi_bound: 0.0,
            phi_seed: 0,
            df_ell: 0.0,
        }
    }
}

/// Cross-form model of T_{k,m} on Π:
///   X̄ = g·μ + A·X + B + φ₁(X, Ȳ₁, Z₁)
///   Y = ρ·(Ȳ + φ₃(X, Ȳ₁, Z₁)·e₁)
///   Z̄ = σ·(Z + φ₄(X, Ȳ₁, Z₁)·e₁)
/// with ρ = ½·min(1, 1/|A|) and σ = ½·min(1, |A|).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossMapModel {
    pub coeffs: ReturnCoeffs,
    pub delta: f64,
    pub dy: usize,
    pub dz: usize,
    pub mu: f64,
    pub mu_gain: f64,
    pub rho: f64,
    pub sigma: f64,
    pub phi_bound: f64,
    pub phi: [Bump; 3],
}

impl CrossMapModel {
    pub fn new(spec: &CycleSpec, coeffs: ReturnCoeffs, opts: &ModelOptions) -> Result<Self> {
        let a = coeffs.a_km.abs();
        if !(a > 0.0 && a.is_finite()) || !coeffs.b_km.is_finite() {
            return Err(Error::domain(format!(
                "degenerate coefficients A = {:?}, B = {:?}",
                coeffs.a_km, coeffs.b_km
            )));
        }
        if opts.phi_bound < 0.0 {
            return Err(Error::domain("phi_bound must be nonnegative"));
        }
        let (dy, dz) = spec.cube_dims();
        let mu_gain = if opts.mu == 0.0 {
            0.0
        } else if spec.is_double_focus() {
            let c3 = (coeffs.m as f64 * spec.omega2_or_zero() + spec.eta3_or_zero()).cos();
            2.0 * spec.lambda.powi(coeffs.k as i32)
                / ((1.0 + opts.df_ell * opts.df_ell).sqrt() * c3)
        } else {
            spec.b_coef * gamma_pow(spec.gamma, coeffs.m)
        };
        let phi = if opts.phi_bound > 0.0 {
            let mut r = rng::stream(opts.phi_seed, tags::PHI, 0);
            [
                Bump::random(&mut r, opts.phi_bound, spec.delta),
                Bump::random(&mut r, opts.phi_bound, spec.delta),
                Bump::random(&mut r, opts.phi_bound, spec.delta),
            ]
        } else {
            [Bump::zero(), Bump::zero(), Bump::zero()]
        };
        Ok(CrossMapModel {
            coeffs,
            delta: spec.delta,
            dy,
            dz,
            mu: opts.mu,
            mu_gain,
            rho: 0.5 * (1.0f64).min(1.0 / a),
            sigma: 0.5 * (1.0f64).min(a),
            phi_bound: opts.phi_bound,
            phi,
        })
    }

    /// Constant part of the X̄ equation, B + g·μ.
    pub fn offset(&self) -> f64 {
        if self.mu == 0.0 {
            self.coeffs.b_km
        } else {
            self.coeffs.b_km + self.mu_gain * self.mu
        }
    }

    fn first(v: &[f64]) -> f64 {
        v.first().copied().unwrap_or(0.0)
    }

    fn phis(&self, x: f64, yb: f64, z: f64) -> [(f64, [f64; 3]); 3] {
        [
            self.phi[0].eval(x, yb, z, self.delta),
            self.phi[1].eval(x, yb, z, self.delta),
            self.phi[2].eval(x, yb, z, self.delta),
        ]
    }

    /// Image of `(X, Ȳ, Z)` given in cross coordinates; returns the pair
    /// (preimage point (X, Y, Z), image point (X̄, Ȳ, Z̄)).
    pub fn from_cross(&self, x: f64, ybar: &[f64], z: &[f64]) -> (PointInCube, PointInCube) {
        let [p1, p3, p4] = self.phis(x, Self::first(ybar), Self::first(z));
        let mut y: Vec<f64> = ybar.iter().map(|v| self.rho * v).collect();
        if let Some(y0) = y.first_mut() {
            *y0 += self.rho * p3.0;
        }
        let xb = self.offset() + self.coeffs.a_km * x + p1.0;
        let mut zb: Vec<f64> = z.iter().map(|v| self.sigma * v).collect();
        if let Some(z0) = zb.first_mut() {
            *z0 += self.sigma * p4.0;
        }
        (
            PointInCube {
                x,
                y,
                z: z.to_vec(),
            },
            PointInCube {
                x: xb,
                y: ybar.to_vec(),
                z: zb,
            },
        )
    }

    fn check_dims(&self, p: &PointInCube) -> Result<()> {
        if p.y.len() != self.dy || p.z.len() != self.dz {
            return Err(Error::domain(format!(
                "point has dims ({}, {}), model expects ({}, {})",
                p.y.len(),
                p.z.len(),
                self.dy,
                self.dz
            )));
        }
        Ok(())
    }

    /// Jet of the model at cross coordinates (X, Ȳ₁, Z₁).
    pub fn jet(&self, x: f64, yb1: f64, z1: f64) -> Jet {
        let [p1, p3, p4] = self.phis(x, yb1, z1);
        Jet {
            a1: self.coeffs.a_km + p1.1[0],
            p_y: p1.1[1],
            p_z: p1.1[2],
            g: p3.1,
            s: p4.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub a1: f64,
    pub p_y: f64,
    pub p_z: f64,
    pub g: [f64; 3],
    pub s: [f64; 3],
}

pub fn apply_cross_forward(model: &CrossMapModel, point: &PointInCube) -> Result<PointInCube> {
    model.check_dims(point)?;
    if !point.inside(model.delta) {
        return Err(Error::domain("point lies outside the cube"));
    }
    let mut ybar: Vec<f64> = point.y.iter().map(|v| v / model.rho).collect();
    let z1 = CrossMapModel::first(&point.z);
    if model.dy > 0 && model.phi[1].amp != 0.0 {
        let target = point.y[0] / model.rho;
        let mut yb = target;
        let mut converged = false;
        for _ in 0..FIXED_POINT_MAX_ITER {
            let (p3, _) = model.phi[1].eval(point.x, yb, z1, model.delta);
            let next = (1.0 - FIXED_POINT_DAMPING) * yb + FIXED_POINT_DAMPING * (target - p3);
            let done = (next - yb).abs() <= FIXED_POINT_TOL * yb.abs().max(model.delta);
            yb = next;
            if done {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: FIXED_POINT_MAX_ITER,
            });
        }
        ybar[0] = yb;
    }
    let (_, image) = model.from_cross(point.x, &ybar, &point.z);
    if !image.inside(model.delta) {
        return Err(Error::NoImageInCube {
            detail: format!(
                "image norm {:e} exceeds delta {:e}",
                image.norm(),
                model.delta
            ),
        });
    }
    Ok(image)
}

pub fn apply_cross_backward(model: &CrossMapModel, image: &PointInCube) -> Result<PointInCube> {
    model.check_dims(image)?;
    if !image.inside(model.delta) {
        return Err(Error::domain("image lies outside the cube"));
    }
    let a = model.coeffs.a_km;
    let yb1 = CrossMapModel::first(&image.y);
    let zb1 = CrossMapModel::first(&image.z);
    let mut x = (image.x - model.offset()) / a;
    let mut z1 = zb1 / model.sigma;
    if model.phi_bound > 0.0 {
        let mut converged = false;
        for _ in 0..FIXED_POINT_MAX_ITER {
            let (p1, _) = model.phi[0].eval(x, yb1, z1, model.delta);
            let (p4, _) = model.phi[2].eval(x, yb1, z1, model.delta);
            let nx = (image.x - model.offset() - p1) / a;
            let nz = if model.dz > 0 { zb1 / model.sigma - p4 } else { 0.0 };
            let nx = (1.0 - FIXED_POINT_DAMPING) * x + FIXED_POINT_DAMPING * nx;
            let nz = (1.0 - FIXED_POINT_DAMPING) * z1 + FIXED_POINT_DAMPING * nz;
            let step = (nx - x).abs().max((nz - z1).abs());
            x = nx;
            z1 = nz;
            if step <= FIXED_POINT_TOL * model.delta {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: FIXED_POINT_MAX_ITER,
            });
        }
    }
    let mut z: Vec<f64> = image.z.iter().map(|v| v / model.sigma).collect();
    if let Some(z0) = z.first_mut() {
        *z0 = z1;
    }
    let (pre, _) = model.from_cross(x, &image.y, &z);
    if !pre.inside(model.delta) {
        return Err(Error::NoImageInCube {
            detail: format!("preimage norm {:e} exceeds delta {:e}", pre.norm(), model.delta),
        });
    }
    Ok(pre)
}

/// DT·v at a point given by its jet.
pub fn forward_tangent(model: &CrossMapModel, jet: &Jet, v: &PointInCube) -> PointInCube {
    let dz1 = CrossMapModel::first(&v.z);
    let mut dyb: Vec<f64> = v.y.iter().map(|d| d / model.rho).collect();
    let mut dyb1 = 0.0;
    if let Some(d0) = dyb.first_mut() {
        dyb1 = (v.y[0] / model.rho - jet.g[0] * v.x - jet.g[2] * dz1) / (1.0 + jet.g[1]);
        *d0 = dyb1;
    }
    let dxb = jet.a1 * v.x + jet.p_y * dyb1 + jet.p_z * dz1;
    let mut dzb: Vec<f64> = v.z.iter().map(|d| model.sigma * d).collect();
    if let Some(d0) = dzb.first_mut() {
        *d0 = model.sigma * (dz1 + jet.s[0] * v.x + jet.s[1] * dyb1 + jet.s[2] * dz1);
    }
    PointInCube {
        x: dxb,
        y: dyb,
        z: dzb,
    }
}

/// DT⁻¹·v̄ at a point given by its jet.
pub fn backward_tangent(model: &CrossMapModel, jet: &Jet, vb: &PointInCube) -> PointInCube {
    let dyb1 = CrossMapModel::first(&vb.y);
    let dzb1 = CrossMapModel::first(&vb.z);
    // a1·dX + p_z·dZ₁ = dX̄ − p_y·dȲ₁
    // s_x·dX + (1 + s_z)·dZ₁ = dZ̄₁/σ − s_y·dȲ₁
    let r1 = vb.x - jet.p_y * dyb1;
    let (dx, dz1) = if model.dz > 0 {
        let r2 = dzb1 / model.sigma - jet.s[1] * dyb1;
        let (a11, a12, a21, a22) = (jet.a1, jet.p_z, jet.s[0], 1.0 + jet.s[2]);
        let det = a11 * a22 - a12 * a21;
        ((r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det)
    } else {
        (r1 / jet.a1, 0.0)
    };
    let mut dz: Vec<f64> = vb.z.iter().map(|d| d / model.sigma).collect();
    if let Some(d0) = dz.first_mut() {
        *d0 = dz1;
    }
    let mut dy: Vec<f64> = vb.y.iter().map(|d| model.rho * d).collect();
    if let Some(d0) = dy.first_mut() {
        *d0 = model.rho * ((1.0 + jet.g[1]) * dyb1 + jet.g[0] * dx + jet.g[2] * dz1);
    }
    PointInCube { x: dx, y: dy, z: dz }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Cs,
    Ss,
    Cu,
    Uu,
}

/// Signed distance of `v` inside the cone (max norm), normalised by |v|.
pub fn cone_margin(kind: ConeKind, v: &PointInCube, k: f64) -> f64 {
    let (x, y, z) = (v.x.abs(), max_abs(&v.y), max_abs(&v.z));
    let n = v.norm();
    if n == 0.0 {
        return 0.0;
    }
    let m = match kind {
        ConeKind::Uu => k * y - x.max(z),
        ConeKind::Cu => k * (x + y) - z,
        ConeKind::Cs => k * (x + z) - y,
        ConeKind::Ss => k * z - x.max(y),
    };
    m / n
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.25) {
        if rng.gen_bool(0.5) {
            1.0
        } else {
            -1.0
        }
    } else {
        rng.gen_range(-1.0..=1.0)
    }
}

fn unit_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| unit(rng)).collect()
}

fn nonzero_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v = unit_vec(rng, n);
    let m = max_abs(&v);
    if m == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= m);
    }
    v
}

/// Random vector in the cone, boundary directions drawn with positive
/// probability.
pub fn sample_cone_vector(
    rng: &mut ChaCha8Rng,
    kind: ConeKind,
    k: f64,
    dy: usize,
    dz: usize,
) -> PointInCube {
    match kind {
        ConeKind::Uu => PointInCube {
            x: k * unit(rng),
            y: nonzero_vec(rng, dy),
            z: unit_vec(rng, dz).iter().map(|u| k * u).collect(),
        },
        ConeKind::Ss => PointInCube {
            x: k * unit(rng),
            y: unit_vec(rng, dy).iter().map(|u| k * u).collect(),
            z: nonzero_vec(rng, dz),
        },
        ConeKind::Cu => {
            let x = unit(rng);
            let y = unit_vec(rng, dy);
            let budget = k * (x.abs() + max_abs(&y));
            PointInCube {
                x,
                y,
                z: unit_vec(rng, dz).iter().map(|u| budget * u).collect(),
            }
        }
        ConeKind::Cs => {
            let x = unit(rng);
            let z = unit_vec(rng, dz);
            let budget = k * (x.abs() + max_abs(&z));
            PointInCube {
                x,
                y: unit_vec(rng, dy).iter().map(|u| budget * u).collect(),
                z,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeMargins {
    pub cu: f64,
    pub uu: f64,
    pub cs: f64,
    pub ss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    #[serde(rename = "K")]
    pub k: f64,
    pub samples: usize,
    pub forward_cu_ok: bool,
    pub forward_uu_ok: bool,
    pub backward_cs_ok: bool,
    pub backward_ss_ok: bool,
    pub min_expansion_uu: f64,
    pub max_contraction_ss: f64,
    /// Smallest |DT v|/|v| over center-unstable vectors, reported when |A| > 1.
    pub cu_expansion: Option<f64>,
    /// Largest |v̄|/|DT⁻¹ v̄| over center-stable vectors, reported when |A| < 1.
    pub cs_contraction: Option<f64>,
    pub center_ok: bool,
    pub min_margins: ConeMargins,
    /// Largest relative gap between the analytic and finite-difference
    /// Jacobian on the checked samples.
    pub fd_max_error: Option<f64>,
    pub passed: bool,
}

/// Admissible X range: preimage of [−δ, δ] under the X̄ equation, kept off
/// the boundary by the size of φ₁.
fn x_range(model: &CrossMapModel) -> Option<(f64, f64)> {
    let a = model.coeffs.a_km;
    let d = model.delta - model.phi[0].amp;
    let c = model.offset();
    let (mut lo, mut hi) = ((-d - c) / a, (d - c) / a);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let lim = model.delta - model.phi[0].amp.max(model.phi[1].amp).max(model.phi[2].amp);
    let (lo, hi) = (lo.max(-lim), hi.min(lim));
    (lo < hi).then_some((lo, hi))
}

/// Draw one admissible point in cross coordinates.
pub fn sample_point(
    model: &CrossMapModel,
    rng: &mut ChaCha8Rng,
) -> Option<(PointInCube, PointInCube)> {
    let (lo, hi) = x_range(model)?;
    let d = model.delta;
    for _ in 0..SAMPLE_ATTEMPTS {
        let x = rng.gen_range(lo..=hi);
        let ybar: Vec<f64> = (0..model.dy).map(|_| rng.gen_range(-d..=d)).collect();
        let z: Vec<f64> = (0..model.dz).map(|_| rng.gen_range(-d..=d)).collect();
        let (pre, img) = model.from_cross(x, &ybar, &z);
        if pre.inside(d) && img.inside(d) {
            return Some((pre, img));
        }
    }
    None
}

struct SampleOutcome {
    m_cu: f64,
    m_uu: f64,
    m_cs: f64,
    m_ss: f64,
    exp_uu: f64,
    con_ss: f64,
    exp_cu: f64,
    con_cs: f64,
    fd_err: Option<f64>,
}

fn finite_difference_error(model: &CrossMapModel, pre: &PointInCube, v: &PointInCube, jet: &Jet) -> Option<f64> {
    let h = 1e-6 * model.delta / v.norm().max(1e-300);
    let plus = apply_cross_forward(model, &pre.axpy(h, v)).ok()?;
    let minus = apply_cross_forward(model, &pre.axpy(-h, v)).ok()?;
    let fd = plus.axpy(-1.0, &minus);
    let fd = PointInCube {
        x: fd.x / (2.0 * h),
        y: fd.y.iter().map(|d| d / (2.0 * h)).collect(),
        z: fd.z.iter().map(|d| d / (2.0 * h)).collect(),
    };
    let an = forward_tangent(model, jet, v);
    Some(an.axpy(-1.0, &fd).norm() / an.norm().max(1e-300))
}

pub fn verify_cones(model: &CrossMapModel, k: f64, n_samples: usize, seed: u64) -> Result<ConeReport> {
    if !(k >= 0.0) {
        return Err(Error::domain("cone parameter K must be nonnegative"));
    }
    let (dy, dz) = (model.dy, model.dz);
    let outcomes: Vec<Option<SampleOutcome>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, tags::CONES, i as u64);
            let (pre, img) = sample_point(model, &mut rng)?;
            let jet = model.jet(pre.x, img.y.first().copied().unwrap_or(0.0), pre.z.first().copied().unwrap_or(0.0));

            let v_cu = sample_cone_vector(&mut rng, ConeKind::Cu, k, dy, dz);
            let v_uu = sample_cone_vector(&mut rng, ConeKind::Uu, k, dy, dz);
            let w_cs = sample_cone_vector(&mut rng, ConeKind::Cs, k, dy, dz);
            let w_ss = sample_cone_vector(&mut rng, ConeKind::Ss, k, dy, dz);

            let f_cu = forward_tangent(model, &jet, &v_cu);
            let f_uu = forward_tangent(model, &jet, &v_uu);
            let b_cs = backward_tangent(model, &jet, &w_cs);
            let b_ss = backward_tangent(model, &jet, &w_ss);

            let fd_err = if i < 8 {
                finite_difference_error(model, &pre, &v_cu, &jet)
            } else {
                None
            };
            Some(SampleOutcome {
                m_cu: cone_margin(ConeKind::Cu, &f_cu, k),
                m_uu: cone_margin(ConeKind::Uu, &f_uu, k),
                m_cs: cone_margin(ConeKind::Cs, &b_cs, k),
                m_ss: cone_margin(ConeKind::Ss, &b_ss, k),
                exp_uu: f_uu.norm() / v_uu.norm(),
                con_ss: w_ss.norm() / b_ss.norm(),
                exp_cu: f_cu.norm() / v_cu.norm(),
                con_cs: w_cs.norm() / b_cs.norm(),
                fd_err,
            })
        })
        .collect();
    let found = outcomes.iter().filter(|o| o.is_some()).count();
    if found < n_samples {
        return Err(Error::InsufficientSamples {
            found,
            wanted: n_samples,
        });
    }
    let outs: Vec<SampleOutcome> = outcomes.into_iter().flatten().collect();
    let fold_min = |f: &dyn Fn(&SampleOutcome) -> f64| outs.iter().map(f).fold(f64::INFINITY, f64::min);
    let fold_max = |f: &dyn Fn(&SampleOutcome) -> f64| outs.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let margins = ConeMargins {
        cu: fold_min(&|o| o.m_cu),
        uu: fold_min(&|o| o.m_uu),
        cs: fold_min(&|o| o.m_cs),
        ss: fold_min(&|o| o.m_ss),
    };
    let min_expansion_uu = fold_min(&|o| o.exp_uu);
    let max_contraction_ss = fold_max(&|o| o.con_ss);
    let a = model.coeffs.a_km.abs();
    let cu_expansion = (a > 1.0).then(|| fold_min(&|o| o.exp_cu));
    let cs_contraction = (a < 1.0).then(|| fold_max(&|o| o.con_cs));
    let center_ok = cu_expansion.map_or(true, |e| e > 1.0) && cs_contraction.map_or(true, |c| c < 1.0);
    let fd_max_error = outs
        .iter()
        .filter_map(|o| o.fd_err)
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
    let forward_cu_ok = margins.cu >= -CONE_TOL;
    let forward_uu_ok = margins.uu >= -CONE_TOL;
    let backward_cs_ok = margins.cs >= -CONE_TOL;
    let backward_ss_ok = margins.ss >= -CONE_TOL;
    let passed = forward_cu_ok
        && forward_uu_ok
        && backward_cs_ok
        && backward_ss_ok
        && min_expansion_uu > 1.0
        && max_contraction_ss < 1.0
        && center_ok;
    Ok(ConeReport {
        k,
        samples: outs.len(),
        forward_cu_ok,
        forward_uu_ok,
        backward_cs_ok,
        backward_ss_ok,
        min_expansion_uu,
        max_contraction_ss,
        cu_expansion,
        cs_contraction,
        center_ok,
        min_margins: margins,
        fd_max_error,
        passed,
    })
}

/// Sample (preimage, image) pairs for inspection.
pub fn sample_trajectories(model: &CrossMapModel, n: usize, seed: u64) -> Vec<(PointInCube, PointInCube)> {
    (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = rng::stream(seed, tags::CONES, i as u64);
            sample_point(model, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle_model::{CycleType, UMinus};

    fn sf() -> CycleSpec {
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
            eta2: PI / 2.0,
            eta3: None,
            d: 4,
            d1: 1,
            d2: 2,
            delta: 0.1,
            c_frac: 0.5,
        }
    }

    fn affine(a: f64, b: f64) -> CrossMapModel {
        let c = ReturnCoeffs {
            k: 1,
            m: 1,
            a_km: a,
            b_km: b,
            admissible: true,
            scale: 1.0,
        };
        CrossMapModel::new(&sf(), c, &ModelOptions::default()).unwrap()
    }

    #[test]
    fn saddle_focus_example() {
        let c = coeffs(&sf(), 1, 1).unwrap();
        assert!((c.a_km - 1.0).abs() < 1e-15);
        assert!((c.b_km + 1.0).abs() < 1e-15);
        assert!(!c.admissible);
        let s = sf();
        let c = coeffs(&s, 2, 1).unwrap();
        assert!(c.a_km.abs() < 1e-15);
        assert!(coeffs(&s, 0, 1).is_err());
    }

    #[test]
    fn double_focus_example() {
        let s = CycleSpec {
            cycle_type: CycleType::DoubleFocus,
            omega2: Some(PI),
            eta3: Some(0.0),
            u_minus: UMinus::Vector([1.0, 0.5]),
            ..sf()
        };
        let p = df_parts(&s, PI);
        assert!((p.a + 1.0).abs() < 1e-12);
        let c = coeffs(&s, 1, 1).unwrap();
        assert!((c.a_km + 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_examples() {
        let m = affine(0.5, 0.01);
        let p = PointInCube { x: 0.02, y: vec![0.0], z: vec![0.0, 0.0] };
        let img = apply_cross_forward(&m, &p).unwrap();
        assert!((img.x - 0.02).abs() < 1e-15);
        let m = affine(3.0, 0.0);
        let img = apply_cross_forward(&m, &PointInCube::zeros(1, 2)).unwrap();
        assert_eq!(img.x, 0.0);
        let p = PointInCube { x: 0.09, y: vec![0.0], z: vec![0.0, 0.0] };
        assert!(matches!(apply_cross_forward(&m, &p), Err(Error::NoImageInCube { .. })));
    }

    #[test]
    fn perturbed_forward_stays_close() {
        let c = ReturnCoeffs { k: 1, m: 1, a_km: 0.5, b_km: 0.01, admissible: true, scale: 1.0 };
        let opts = ModelOptions { phi_bound: 1e-3, phi_seed: 7, ..Default::default() };
        let m = CrossMapModel::new(&sf(), c, &opts).unwrap();
        for i in 0..50 {
            let t = i as f64 / 50.0 - 0.5;
            let p = PointInCube { x: 0.1 * t, y: vec![0.02 * t], z: vec![-0.05 * t, 0.01] };
            let img = apply_cross_forward(&m, &p).unwrap();
            assert!((img.x - (0.5 * p.x + 0.01)).abs() <= 1e-3);
            let back = apply_cross_backward(&m, &img).unwrap();
            assert!(back.axpy(-1.0, &p).norm() < 1e-10);
        }
    }

    #[test]
    fn tangent_maps_are_inverse() {
        let c = ReturnCoeffs { k: 1, m: 1, a_km: 1.7, b_km: 0.0, admissible: true, scale: 1.0 };
        let opts = ModelOptions { phi_bound: 1e-2, phi_seed: 3, ..Default::default() };
        let m = CrossMapModel::new(&sf(), c, &opts).unwrap();
        let jet = m.jet(0.01, -0.02, 0.03);
        let v = PointInCube { x: 0.3, y: vec![-1.0], z: vec![0.2, 0.7] };
        let w = backward_tangent(&m, &jet, &forward_tangent(&m, &jet, &v));
        assert!(w.axpy(-1.0, &v).norm() < 1e-12);
    }

    #[test]
    fn cone_lemma_examples() {
        let r = verify_cones(&affine(0.5, 0.0), 0.1, 200, 1).unwrap();
        assert!(r.passed);
        assert!(r.cs_contraction.unwrap() < 1.0);
        assert!(r.cu_expansion.is_none());
        let r = verify_cones(&affine(2.0, 0.0), 0.1, 200, 1).unwrap();
        assert!(r.passed);
        assert!(r.cu_expansion.unwrap() > 1.0);
        let r = verify_cones(&affine(0.8, 0.0), 0.0, 100, 2).unwrap();
        assert!(r.passed);
        assert!(r.fd_max_error.unwrap() < 1e-6);
    }

    #[test]
    fn no_admissible_points() {
        let m = affine(0.5, 0.2);
        assert!(matches!(
            verify_cones(&m, 0.1, 10, 0),
            Err(Error::InsufficientSamples { found: 0, .. })
        ));
    }
}
