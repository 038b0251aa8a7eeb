//! Covering-criterion certificates for cs- and cu-blenders, and their
//! validation by direct disc simulation.

use rand::Rng;
use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arithmetic::PairSequence;
use crate::cycle_model::CycleSpec;
use crate::error::{Error, Result};
use crate::return_map::coeffs;
use crate::rng::{stream, tags};

pub const DEFAULT_OVERLAP_FRAC: f64 = 0.1;
pub const DEFAULT_BAND_TOL: f64 = 1e-3;
const C_GRID: f64 = 0.01;
const CHAOS_BURN_IN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlenderKind {
    Cs,
    Cu,
}

/// Closed interval serialized with round-trip decimal strings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ExactInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        ExactInterval { lo, hi }
    }

    pub fn contains(&self, other: &ExactInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

impl Serialize for ExactInterval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [format!("{:?}", self.lo), format!("{:?}", self.hi)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactInterval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [lo, hi] = <[String; 2]>::deserialize(d)?;
        let p = |s: &str| s.parse::<f64>().map_err(D::Error::custom);
        Ok(ExactInterval { lo: p(&lo)?, hi: p(&hi)? })
    }
}

/// One affine map x ↦ rate·x + offset of the covering IFS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfsMap {
    pub rate: f64,
    pub offset: f64,
}

impl IfsMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.rate * x + self.offset
    }

    pub fn invert(&self, y: f64) -> f64 {
        (y - self.offset) / self.rate
    }

    pub fn image(&self, half_width: f64) -> ExactInterval {
        let r = self.rate.abs() * half_width;
        ExactInterval::new(self.offset - r, self.offset + r)
    }
}

/// Map used by the criterion: the forward map for cs, its inverse for cu.
pub fn ifs_map(kind: BlenderKind, a: f64, b: f64) -> IfsMap {
    match kind {
        BlenderKind::Cs => IfsMap { rate: a, offset: b },
        BlenderKind::Cu => IfsMap {
            rate: 1.0 / a,
            offset: -b / a,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    /// Position of the pair in the input sequence.
    pub n: usize,
    pub pair: (i64, i64),
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub map: IfsMap,
    pub image: ExactInterval,
    /// Overlap with the previous image; absent for the first.
    pub overlap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivatingCube {
    pub delta: f64,
    /// (dim X, dim Y, dim Z)
    pub dims: (usize, usize, usize),
    /// X-coordinate of the cube center in a frame shared by certificates.
    pub x_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlenderCertificate {
    pub blender_kind: BlenderKind,
    pub index: usize,
    pub pair_set: Vec<(i64, i64)>,
    pub c: f64,
    pub delta: f64,
    pub interval_i: ExactInterval,
    /// Neighborhood of I covered by the witness images.
    pub covered: ExactInterval,
    pub overlap_min: f64,
    pub witness: Vec<WitnessEntry>,
    /// Range of |A| over the pair set.
    #[serde(rename = "A_band")]
    pub a_band: (f64, f64),
    /// Range of the IFS contraction rates actually used.
    pub ifs_band: (f64, f64),
    pub cone_k: f64,
    pub activating_cube: ActivatingCube,
    /// Largest c on a 0.01 grid for which the same pairs still cover.
    pub c_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub overlap_min: Option<f64>,
    pub band_tol: f64,
    pub cone_k: f64,
    pub x_offset: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            overlap_min: None,
            band_tol: DEFAULT_BAND_TOL,
            cone_k: crate::cycle_model::DEFAULT_CONE_K,
            x_offset: 0.0,
        }
    }
}

pub fn default_overlap_min(spec: &CycleSpec) -> f64 {
    DEFAULT_OVERLAP_FRAC * spec.c_frac * spec.delta
}

/// Kind implied by the A-values, or BandViolation.
pub fn band_kind(a_values: &[f64], band_tol: f64) -> Result<BlenderKind> {
    if a_values.is_empty() {
        return Err(Error::domain("empty pair set"));
    }
    let mut kind = None;
    for &a in a_values {
        let m = a.abs();
        if !m.is_finite() || m <= band_tol || (m - 1.0).abs() <= band_tol {
            return Err(Error::BandViolation {
                detail: format!("|A| = {m:?} within {band_tol:?} of 0 or 1"),
            });
        }
        let k = if m < 1.0 { BlenderKind::Cs } else { BlenderKind::Cu };
        match kind {
            None => kind = Some(k),
            Some(prev) if prev != k => {
                return Err(Error::BandViolation {
                    detail: "A-values lie on both sides of 1".into(),
                })
            }
            _ => {}
        }
    }
    Ok(kind.expect("nonempty"))
}

/// Greedy chain of images covering `target` with consecutive overlaps at
/// least `overlap_min`: each step takes the extending image with the largest
/// overlap, then the largest right end. Returns (index, overlap) in chain
/// order.
pub fn greedy_cover(
    images: &[ExactInterval],
    target: ExactInterval,
    overlap_min: f64,
) -> std::result::Result<Vec<(usize, Option<f64>)>, ExactInterval> {
    let mut chain: Vec<(usize, Option<f64>)> = Vec::new();
    let mut reach: Option<f64> = None;
    loop {
        let limit = match reach {
            None => target.lo,
            Some(r) => r - overlap_min,
        };
        let current = reach.unwrap_or(target.lo);
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, im) in images.iter().enumerate() {
            if im.lo > limit || im.hi <= current {
                continue;
            }
            let overlap = current - im.lo;
            let better = match best {
                None => true,
                Some((_, bh, bo)) => overlap > bo || (overlap == bo && im.hi > bh),
            };
            if better {
                best = Some((i, im.hi, overlap));
            }
        }
        let Some((i, hi, overlap)) = best else {
            let next = images
                .iter()
                .map(|im| im.lo)
                .filter(|&lo| lo > limit)
                .fold(target.hi, f64::min);
            return Err(ExactInterval::new(current, next.max(current)));
        };
        chain.push((i, reach.map(|_| overlap)));
        reach = Some(hi);
        if hi >= target.hi {
            return Ok(chain);
        }
    }
}

fn target_for(half: f64, overlap_min: f64) -> ExactInterval {
    let t = half + 0.5 * overlap_min;
    ExactInterval::new(-t, t)
}

/// Covering certificate from raw (A, B) values.
pub fn certify_ifs(
    spec: &CycleSpec,
    pairs: &[(i64, i64)],
    a_values: &[f64],
    b_values: &[f64],
    opts: &CertifyOptions,
) -> Result<BlenderCertificate> {
    if pairs.is_empty() || pairs.len() != a_values.len() || pairs.len() != b_values.len() {
        return Err(Error::domain("pair set empty or lengths disagree"));
    }
    let kind = band_kind(a_values, opts.band_tol)?;
    let delta = spec.delta;
    let half = spec.c_frac * delta;
    let overlap_min = opts.overlap_min.unwrap_or_else(|| default_overlap_min(spec));
    if !(overlap_min > 0.0) {
        return Err(Error::domain("overlap_min must be positive"));
    }
    let maps: Vec<IfsMap> = a_values
        .iter()
        .zip(b_values)
        .map(|(&a, &b)| ifs_map(kind, a, b))
        .collect();
    let images: Vec<ExactInterval> = maps.iter().map(|m| m.image(half)).collect();
    let target = target_for(half, overlap_min);
    let chain = greedy_cover(&images, target, overlap_min)
        .map_err(|gap| Error::CoverageGap { lo: gap.lo, hi: gap.hi })?;
    let witness: Vec<WitnessEntry> = chain
        .iter()
        .map(|&(i, overlap)| WitnessEntry {
            n: i,
            pair: pairs[i],
            a: a_values[i],
            b: b_values[i],
            map: maps[i],
            image: images[i],
            overlap,
        })
        .collect();
    let band = |v: &mut dyn Iterator<Item = f64>| {
        v.fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let a_band = band(&mut a_values.iter().map(|a| a.abs()));
    let ifs_band = band(&mut witness.iter().map(|w| w.map.rate.abs()));
    let c_max = (1..100)
        .rev()
        .map(|i| i as f64 * C_GRID)
        .find(|&c| {
            let h = c * delta;
            let im: Vec<ExactInterval> = maps.iter().map(|m| m.image(h)).collect();
            greedy_cover(&im, target_for(h, overlap_min), overlap_min).is_ok()
        });
    let (dy, dz) = spec.cube_dims();
    let cone_cap = overlap_min / (2.0 * delta);
    Ok(BlenderCertificate {
        blender_kind: kind,
        index: match kind {
            BlenderKind::Cs => spec.d1 as usize,
            BlenderKind::Cu => spec.d2 as usize,
        },
        pair_set: witness.iter().map(|w| w.pair).collect(),
        c: spec.c_frac,
        delta,
        interval_i: ExactInterval::new(-half, half),
        covered: target,
        overlap_min,
        witness,
        a_band,
        ifs_band,
        cone_k: opts.cone_k.min(cone_cap),
        activating_cube: ActivatingCube {
            delta,
            dims: (1, dy, dz),
            x_offset: opts.x_offset,
        },
        c_max,
    })
}

/// Certificate from a searched pair sequence; coefficients are recomputed
/// from the spec and every pair must be admissible.
pub fn certify(spec: &CycleSpec, seq: &PairSequence, opts: &CertifyOptions) -> Result<BlenderCertificate> {
    spec.validated()?;
    let mut a = Vec::with_capacity(seq.pairs.len());
    let mut b = Vec::with_capacity(seq.pairs.len());
    for &(k, m) in &seq.pairs {
        let c = coeffs(spec, k, m)?;
        if !c.admissible {
            return Err(Error::domain(format!("pair ({k}, {m}) is not admissible")));
        }
        a.push(c.a_km);
        b.push(c.b_km);
    }
    certify_ifs(spec, &seq.pairs, &a, &b, opts)
}

/// Check a certificate's witness by recomputing images and overlaps.
pub fn verify_witness(cert: &BlenderCertificate) -> bool {
    let half = cert.c * cert.delta;
    let mut reach: Option<f64> = None;
    for w in &cert.witness {
        let map = ifs_map(cert.blender_kind, w.a, w.b);
        let im = map.image(half);
        if im != w.image || map.rate.abs() >= 1.0 {
            return false;
        }
        match reach {
            None if im.lo > cert.covered.lo => return false,
            Some(r) if r - im.lo < cert.overlap_min => return false,
            _ => {}
        }
        reach = Some(reach.map_or(im.hi, |r: f64| r.max(im.hi)));
    }
    reach.is_some_and(|r| r >= cert.covered.hi) && cert.covered.contains(&cert.interval_i)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscRecord {
    pub disc: usize,
    pub success: bool,
    pub steps: usize,
    pub start_center: f64,
    pub extent: f64,
    /// Nested cylinder of I cut out by the chosen maps.
    pub cylinder: (f64, f64),
    /// Geometric mean of the per-step X-range factors.
    pub shrink: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncovered: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringSimReport {
    pub kind: BlenderKind,
    pub n_discs: usize,
    pub depth: usize,
    pub extent: f64,
    pub survived: usize,
    pub all_survived: bool,
    pub mean_shrink: Option<f64>,
    pub discs: Vec<DiscRecord>,
}

/// Largest X half-extent of a disc crossing Π′ properly for the certificate.
pub fn disc_extent(cert: &BlenderCertificate) -> f64 {
    (cert.cone_k * cert.delta).min(0.5 * cert.overlap_min)
}

/// Follow one disc of X half-extent `extent` centered at `center` for `depth`
/// pull-backs.
pub fn simulate_disc(cert: &BlenderCertificate, disc: usize, center: f64, extent: f64, depth: usize) -> DiscRecord {
    let half = cert.c * cert.delta;
    // Cylinder as an affine map x ↦ scale·x + shift applied to I.
    let (mut scale, mut shift) = (1.0f64, 0.0f64);
    let mut x = center;
    let mut log_sum = 0.0;
    for step in 0..depth {
        let range = ExactInterval::new(x - extent, x + extent);
        let mut best: Option<(usize, f64)> = None;
        for (i, w) in cert.witness.iter().enumerate() {
            if w.image.contains(&range) {
                let slack = (range.lo - w.image.lo).min(w.image.hi - range.hi);
                if best.map_or(true, |(_, s)| slack > s) {
                    best = Some((i, slack));
                }
            }
        }
        let Some((i, _)) = best else {
            return DiscRecord {
                disc,
                success: false,
                steps: step,
                start_center: center,
                extent,
                cylinder: cylinder(scale, shift, half),
                shrink: (step > 0).then(|| (log_sum / step as f64).exp()),
                uncovered: Some((range.lo, range.hi)),
            };
        };
        let map = cert.witness[i].map;
        x = map.invert(x);
        shift += scale * map.offset;
        scale *= map.rate;
        log_sum += map.rate.abs().ln();
    }
    DiscRecord {
        disc,
        success: true,
        steps: depth,
        start_center: center,
        extent,
        cylinder: cylinder(scale, shift, half),
        shrink: (depth > 0).then(|| (log_sum / depth as f64).exp()),
        uncovered: None,
    }
}

fn cylinder(scale: f64, shift: f64, half: f64) -> (f64, f64) {
    let r = scale.abs() * half;
    (shift - r, shift + r)
}

/// Run the disc simulation and return the full report.
pub fn covering_report(
    cert: &BlenderCertificate,
    n_discs: usize,
    seed: u64,
    depth: usize,
    extent: Option<f64>,
) -> CoveringSimReport {
    let half = cert.c * cert.delta;
    let e_max = extent.unwrap_or_else(|| disc_extent(cert));
    let discs: Vec<DiscRecord> = (0..n_discs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, tags::DISCS, i as u64);
            let center = rng.gen_range(-half..=half);
            let e = if extent.is_some() { e_max } else { rng.gen_range(0.0..=e_max) };
            simulate_disc(cert, i, center, e, depth)
        })
        .collect();
    let survived = discs.iter().filter(|d| d.success).count();
    let shrinks: Vec<f64> = discs.iter().filter_map(|d| d.shrink).collect();
    let mean_shrink = (!shrinks.is_empty()).then(|| shrinks.iter().sum::<f64>() / shrinks.len() as f64);
    CoveringSimReport {
        kind: cert.blender_kind,
        n_discs,
        depth,
        extent: e_max,
        survived,
        all_survived: survived == n_discs,
        mean_shrink,
        discs,
    }
}

/// Disc simulation that fails on the first disc that loses the covering.
pub fn simulate_covering(
    spec: &CycleSpec,
    cert: &BlenderCertificate,
    n_discs: usize,
    seed: u64,
    depth: usize,
) -> Result<CoveringSimReport> {
    spec.validated()?;
    let report = covering_report(cert, n_discs, seed, depth, None);
    if let Some(d) = report.discs.iter().find(|d| !d.success) {
        let (lo, hi) = d.uncovered.unwrap_or_default();
        return Err(Error::SimulationFailure {
            disc: d.disc,
            depth: d.steps,
            detail: format!("X-range [{lo:?}, {hi:?}] lies in no witness image"),
        });
    }
    Ok(report)
}

/// Points of the invariant set in I by a chaos game restricted to maps
/// that keep the orbit in I (the closest map when none does).
pub fn attractor_points(cert: &BlenderCertificate, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, tags::CHAOS_GAME, 0);
    let half = cert.c * cert.delta;
    let mut x = 0.0;
    let mut out = Vec::with_capacity(n);
    let mut it = 0usize;
    let mut inside = Vec::with_capacity(cert.witness.len());
    while out.len() < n && it < CHAOS_BURN_IN + 64 * n.max(1) {
        inside.clear();
        inside.extend(cert.witness.iter().map(|w| w.map.apply(x)).filter(|y| y.abs() <= half));
        x = if inside.is_empty() {
            cert.witness
                .iter()
                .map(|w| w.map.apply(x))
                .fold(f64::INFINITY, |a, y| if y.abs() < a.abs() { y } else { a })
        } else {
            inside[rng.gen_range(0..inside.len())]
        };
        it += 1;
        if it > CHAOS_BURN_IN && x.abs() <= half {
            out.push(x);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationReport {
    /// Manifold discs through points of the first set cross the second cube
    /// properly and survive its covering.
    pub first_activates_second: bool,
    pub second_activates_first: bool,
    pub mutual: bool,
    pub samples: usize,
    pub diagnostics: Vec<String>,
}

fn activates(from: &BlenderCertificate, to: &BlenderCertificate, n: usize, seed: u64, depth: usize, diag: &mut Vec<String>) -> bool {
    let pts = attractor_points(from, n, seed);
    if pts.is_empty() {
        diag.push(format!("{:?} attractor sampling produced no points", from.blender_kind));
        return false;
    }
    let half_to = to.c * to.delta;
    let e = disc_extent(to);
    let mut ok = true;
    for (i, p) in pts.iter().enumerate() {
        let x = p + from.activating_cube.x_offset - to.activating_cube.x_offset;
        if x.abs() > half_to {
            diag.push(format!(
                "{:?} point {i} at X = {x:?} misses the {:?} cube X-range [{:?}, {:?}]",
                from.blender_kind, to.blender_kind, -half_to, half_to
            ));
            return false;
        }
        let rec = simulate_disc(to, i, x, e, depth);
        if !rec.success {
            diag.push(format!(
                "{:?} disc {i} lost the {:?} covering at step {}",
                from.blender_kind, to.blender_kind, rec.steps
            ));
            ok = false;
            break;
        }
    }
    ok
}

/// Mutual activation of a cs and a cu certificate.
pub fn check_activation(
    cert_a: &BlenderCertificate,
    cert_b: &BlenderCertificate,
    spec: &CycleSpec,
    n_samples: usize,
    seed: u64,
    depth: usize,
) -> Result<ActivationReport> {
    spec.validated()?;
    if cert_a.blender_kind == cert_b.blender_kind {
        return Err(Error::KindMismatch);
    }
    let mut diagnostics = Vec::new();
    let ab = activates(cert_a, cert_b, n_samples, seed, depth, &mut diagnostics);
    let ba = activates(cert_b, cert_a, n_samples, seed ^ 1, depth, &mut diagnostics);
    Ok(ActivationReport {
        first_activates_second: ab,
        second_activates_first: ba,
        mutual: ab && ba,
        samples: n_samples,
        diagnostics,
    })
}
