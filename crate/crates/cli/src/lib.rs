//! Command-line front end: reads a spec document, applies `--set`
//! overrides, dispatches to the core library and emits one JSON envelope.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use blender_forge_core::arithmetic::{
    check_a1, check_a2, search_pairs, AngleSampling, PairSequence, ResidueWitness, SearchParams,
};
use blender_forge_core::blender_certifier::{
    certify, check_activation, default_overlap_min, simulate_covering, ActivationReport,
    BlenderCertificate, BlenderKind, CertifyOptions, CoveringSimReport,
};
use blender_forge_core::cycle_model::{
    build_moduli, classify_case, validate_nondegeneracy, ArithClass, CaseTag, Classification,
    CycleSpec, Moduli, ModuliDecl,
};
use blender_forge_core::return_map::{coeffs, verify_cones, CrossMapModel, ModelOptions};
use blender_forge_core::simple_dynamics::{
    brute_scan, exclusion_sets, simple_verdict, ScanParams, Truncation,
};
use blender_forge_core::unfolding::{
    case_edges, find_mu_sequence, homoclinic_report, AngleConvention, Edge, MuSearch,
    RelationOptions, WindowOptions,
};
use blender_forge_core::{Error, Result};

pub const SCHEMA: &str = "blender-forge/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Moduli,
    CheckA1,
    CheckA2,
    SearchPairs,
    Certify,
    SimulateCover,
    Cones,
    Unfold,
    SimpleCheck,
    Pipeline,
}

impl Command {
    pub fn name(&self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub spec_path: PathBuf,
    pub overrides: Vec<(String, String)>,
    pub seed: u64,
    pub out_path: Option<PathBuf>,
}

/// Parse a `key=value` override.
pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    if k.is_empty() {
        return Err(format!("empty key in {s:?}"));
    }
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Options under the `params` key of the spec document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Size of the worker pool; None uses the rayon default.
    pub workers: Option<usize>,
    pub a1: A1Opts,
    pub a2: A2Opts,
    pub search: SearchOpts,
    pub certify: CertifyOptions,
    pub simulate: SimOpts,
    pub activation: SimOpts,
    pub cones: ConeOpts,
    pub unfold: UnfoldOpts,
    pub simple: SimpleOpts,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            workers: None,
            a1: A1Opts::default(),
            a2: A2Opts::default(),
            search: SearchOpts::default(),
            certify: CertifyOptions::default(),
            simulate: SimOpts { n_discs: 100, depth: 30 },
            activation: SimOpts { n_discs: 64, depth: 30 },
            cones: ConeOpts::default(),
            unfold: UnfoldOpts::default(),
            simple: SimpleOpts::default(),
        }
    }
}

/// Residue modulus for condition A1; read from ω/2π when unset.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A1Opts {
    pub q: Option<i64>,
    pub p: Option<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2Opts {
    pub first: Option<AngleSampling>,
    pub second: Option<AngleSampling>,
    /// Multiples scanned for an irrational angle.
    pub window: i64,
}

impl Default for A2Opts {
    fn default() -> Self {
        A2Opts { first: None, second: None, window: 64 }
    }
}

/// Search parameters. An unset eps is taken as the half-width of the
/// covered target, cδ + overlap_min/2, so the B-values can fill I.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOpts {
    pub eps: Option<f64>,
    pub k_max: i64,
    pub m_max: i64,
    pub t_span: f64,
    pub residue: Option<i64>,
    pub residue2: Option<i64>,
    pub band_margin: f64,
    pub a_cap: f64,
    pub min_pairs: usize,
}

impl Default for SearchOpts {
    fn default() -> Self {
        let d = SearchParams::default();
        SearchOpts {
            eps: None,
            k_max: d.k_max,
            m_max: d.m_max,
            t_span: d.t_span,
            residue: d.residue,
            residue2: d.residue2,
            band_margin: d.band_margin,
            a_cap: d.a_cap,
            min_pairs: d.min_pairs,
        }
    }
}

impl SearchOpts {
    fn resolve(&self, spec: &CycleSpec, cert: &CertifyOptions) -> SearchParams {
        let om = cert.overlap_min.unwrap_or_else(|| default_overlap_min(spec));
        SearchParams {
            eps: self.eps.unwrap_or(spec.c_frac * spec.delta + 0.5 * om),
            k_max: self.k_max,
            m_max: self.m_max,
            t_span: self.t_span,
            residue: self.residue,
            residue2: self.residue2,
            band_margin: self.band_margin,
            a_cap: self.a_cap,
            min_pairs: self.min_pairs,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOpts {
    pub n_discs: usize,
    pub depth: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeOpts {
    /// (k, m) of the return map; the first searched pair when unset.
    pub pair: Option<(i64, i64)>,
    #[serde(rename = "K")]
    pub k: f64,
    pub samples: usize,
    pub phi_bound: f64,
    pub mu: f64,
    pub df_ell: f64,
}

impl Default for ConeOpts {
    fn default() -> Self {
        ConeOpts {
            pair: None,
            k: 0.1,
            samples: 500,
            phi_bound: 0.0,
            mu: 0.0,
            df_ell: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnfoldOpts {
    /// Run the unfolding stage inside `pipeline`.
    pub enabled: bool,
    /// Parameter value checked for crossings; None lists windows only.
    pub mu: Option<f64>,
    pub window_count: usize,
    pub k_max: i64,
    pub residue: Option<i64>,
    pub convention: AngleConvention,
    pub s_center_sign: f64,
    pub depth: usize,
}

impl Default for UnfoldOpts {
    fn default() -> Self {
        let s = MuSearch::default();
        UnfoldOpts {
            enabled: false,
            mu: None,
            window_count: s.window_count,
            k_max: s.k_max,
            residue: None,
            convention: s.options.convention,
            s_center_sign: s.options.s_center_sign,
            depth: 30,
        }
    }
}

impl UnfoldOpts {
    fn window(&self) -> WindowOptions {
        WindowOptions {
            convention: self.convention,
            s_center_sign: self.s_center_sign,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimpleOpts {
    pub truncation: Truncation,
    /// Distance below which a value counts as a member of an exclusion set.
    pub tol: f64,
    pub scan: bool,
    pub scan_params: ScanParams,
}

impl Default for SimpleOpts {
    fn default() -> Self {
        SimpleOpts {
            truncation: Truncation::default(),
            tol: 1e-6,
            scan: true,
            scan_params: ScanParams::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    cycle: CycleSpec,
    #[serde(default)]
    moduli: ModuliDecl,
    #[serde(default)]
    params: Value,
}

/// Parsed and merged spec document.
#[derive(Clone, Debug)]
pub struct Doc {
    pub cycle: CycleSpec,
    pub moduli: ModuliDecl,
    pub params: Params,
}

fn invalid(e: impl std::fmt::Display) -> Error {
    Error::invalid(e.to_string())
}

/// Merge `user` into `base`, rejecting keys that `base` does not have.
fn merge_strict(base: &mut Value, user: Value, path: &str) -> Result<()> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge_strict(slot, v, &p)?,
                    None => return Err(Error::invalid(format!("unknown key {p:?}"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// Set a dotted path in a JSON document, creating objects along the way.
/// The value is read as JSON when it parses, else as a string.
fn set_path(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::invalid(format!("malformed key {key:?}")));
        }
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Map::new());
            } else {
                return Err(Error::invalid(format!("{key:?} descends into a non-object")));
            }
        }
        let obj = cur.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

impl Doc {
    pub fn from_value(mut raw: Value, overrides: &[(String, String)]) -> Result<Doc> {
        for (k, v) in overrides {
            set_path(&mut raw, k, v)?;
        }
        let raw: RawDoc = serde_json::from_value(raw).map_err(invalid)?;
        let mut params = serde_json::to_value(Params::default()).map_err(invalid)?;
        if !raw.params.is_null() {
            merge_strict(&mut params, raw.params, "params")?;
        }
        let params: Params = serde_json::from_value(params).map_err(invalid)?;
        raw.cycle.validated()?;
        Ok(Doc {
            cycle: raw.cycle,
            moduli: raw.moduli,
            params,
        })
    }
}

/// Serialized envelope and process exit status.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub json: String,
    pub exit_code: i32,
    /// CSV artifact, for commands that emit a table.
    pub csv: Option<String>,
}

fn envelope(command: Command, body: (&str, Value)) -> String {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command.name()));
    m.insert(body.0.into(), body.1);
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("serializable");
    s.push('\n');
    s
}

fn error_value(e: &Error) -> Value {
    let mut v = serde_json::to_value(e).unwrap_or_else(|_| json!({}));
    if let Value::Object(m) = &mut v {
        m.insert("message".into(), json!(e.to_string()));
        m.insert("exit_code".into(), json!(e.exit_code()));
    }
    v
}

/// Run a command on an in-memory spec document.
pub fn execute(command: Command, doc: Value, overrides: &[(String, String)], seed: u64) -> Outcome {
    let result = Doc::from_value(doc, overrides).and_then(|doc| {
        let run = || dispatch(command, &doc, seed);
        match doc.params.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::domain(e.to_string()))?
                .install(run),
            None => run(),
        }
    });
    match result {
        Ok((value, csv)) => Outcome {
            json: envelope(command, ("result", value)),
            exit_code: 0,
            csv,
        },
        Err(e) => Outcome {
            json: envelope(command, ("error", error_value(&e))),
            exit_code: e.exit_code(),
            csv: None,
        },
    }
}

/// Read the spec file, run and write the artifact. The envelope is
/// returned for printing.
pub fn run(config: &RunConfig) -> Outcome {
    let raw = std::fs::read_to_string(&config.spec_path)
        .map_err(|e| Error::invalid(format!("{}: {e}", config.spec_path.display())))
        .and_then(|s| serde_json::from_str::<Value>(&s).map_err(invalid));
    let mut out = match raw {
        Ok(doc) => execute(config.command, doc, &config.overrides, config.seed),
        Err(e) => Outcome {
            json: envelope(config.command, ("error", error_value(&e))),
            exit_code: e.exit_code(),
            csv: None,
        },
    };
    if let Some(path) = &config.out_path {
        let is_csv = path.extension().is_some_and(|e| e == "csv");
        let body = match (&out.csv, is_csv) {
            (Some(csv), true) => csv.as_str(),
            _ => out.json.as_str(),
        };
        if let Err(e) = std::fs::write(path, body) {
            let e = Error::domain(format!("{}: {e}", path.display()));
            out = Outcome {
                json: envelope(config.command, ("error", error_value(&e))),
                exit_code: e.exit_code(),
                csv: None,
            };
        }
    }
    out
}

type Dispatched = Result<(Value, Option<String>)>;

fn dispatch(command: Command, doc: &Doc, seed: u64) -> Dispatched {
    let spec = &doc.cycle;
    let p = &doc.params;
    let no_csv = |v: Value| Ok((v, None));
    match command {
        Command::Moduli => {
            let validation = validate_nondegeneracy(spec);
            let moduli = build_moduli(spec, &doc.moduli)?;
            let classification = classify_case(&moduli, spec)?;
            no_csv(json!({
                "validation": validation,
                "moduli": moduli,
                "classification": classification,
            }))
        }
        Command::CheckA1 => {
            let moduli = build_moduli(spec, &doc.moduli)?;
            let (q, p1) = a1_modulus(&moduli, p)?;
            let witnesses = check_a1(spec, q, p1)?;
            no_csv(json!({ "q": q, "p": p1, "count": witnesses.len(), "witnesses": witnesses }))
        }
        Command::CheckA2 => {
            let moduli = build_moduli(spec, &doc.moduli)?;
            let (first, second) = a2_sampling(&moduli, p);
            let witnesses = check_a2(spec, first, second)?;
            no_csv(json!({
                "first": first,
                "second": second,
                "count": witnesses.len(),
                "witnesses": witnesses,
            }))
        }
        Command::SearchPairs => {
            let (_, class, seq) = searched(doc)?;
            let csv = pairs_csv(&seq)?;
            Ok((json!({ "classification": class, "pairs": seq }), Some(csv)))
        }
        Command::Certify => {
            let (_, _, seq) = searched(doc)?;
            let certs = certify_kinds(spec, &seq, &p.certify)?;
            no_csv(json!({ "certificates": certs }))
        }
        Command::SimulateCover => {
            let (_, _, seq) = searched(doc)?;
            let certs = certify_kinds(spec, &seq, &p.certify)?;
            let reports = simulate_all(spec, &certs, p, seed)?;
            no_csv(json!({ "certificates": certs, "coverage": reports }))
        }
        Command::Cones => {
            let pair = match p.cones.pair {
                Some(pair) => pair,
                None => {
                    let (_, _, seq) = searched(doc)?;
                    seq.pairs[0]
                }
            };
            let c = coeffs(spec, pair.0, pair.1)?;
            let model = CrossMapModel::new(
                spec,
                c,
                &ModelOptions {
                    mu: p.cones.mu,
                    phi_bound: p.cones.phi_bound,
                    phi_seed: seed,
                    df_ell: p.cones.df_ell,
                },
            )?;
            let report = verify_cones(&model, p.cones.k, p.cones.samples, seed)?;
            no_csv(json!({ "pair": pair, "coeffs": c, "report": report }))
        }
        Command::Unfold => no_csv(unfold(doc, None)?),
        Command::SimpleCheck => {
            let moduli = build_moduli(spec, &doc.moduli)?;
            let (v, csv) = simple_check(doc, &moduli)?;
            Ok((v, csv))
        }
        Command::Pipeline => no_csv(pipeline(doc, seed)?),
    }
}

fn a1_modulus(moduli: &Moduli, p: &Params) -> Result<(i64, i64)> {
    match (p.a1.q, p.a1.p, moduli.omega1_class) {
        (Some(q), Some(p1), _) => Ok((q, p1)),
        (_, _, Some(ArithClass::Rational { num, den })) => Ok((den, num)),
        _ => Err(Error::not_applicable(
            "condition A1 needs a rational omega1 or params.a1.{q, p}",
        )),
    }
}

fn sampling_of(class: Option<ArithClass>, window: i64) -> AngleSampling {
    match class {
        Some(ArithClass::Rational { num, den }) => AngleSampling::Rational { q: den, p: num },
        _ => AngleSampling::Window { n: window },
    }
}

fn a2_sampling(moduli: &Moduli, p: &Params) -> (AngleSampling, AngleSampling) {
    (
        p.a2.first.unwrap_or_else(|| sampling_of(moduli.omega1_class, p.a2.window)),
        p.a2.second.unwrap_or_else(|| sampling_of(moduli.omega2_class, p.a2.window)),
    )
}

fn searched(doc: &Doc) -> Result<(Moduli, Classification, PairSequence)> {
    let moduli = build_moduli(&doc.cycle, &doc.moduli)?;
    let class = classify_case(&moduli, &doc.cycle)?;
    let params = doc.params.search.resolve(&doc.cycle, &doc.params.certify);
    let seq = search_pairs(&doc.cycle, &moduli, &class, &params)?;
    Ok((moduli, class, seq))
}

fn pairs_csv(seq: &PairSequence) -> Result<String> {
    let mut buf = Vec::new();
    seq.write_csv(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::domain(e.to_string()))
}

fn kinds_of(seq: &PairSequence) -> Vec<BlenderKind> {
    [BlenderKind::Cs, BlenderKind::Cu]
        .into_iter()
        .filter(|&k| !seq.indices_of(k).is_empty())
        .collect()
}

/// One certificate per blender kind present in the sequence.
fn certify_kinds(spec: &CycleSpec, seq: &PairSequence, opts: &CertifyOptions) -> Result<Vec<BlenderCertificate>> {
    kinds_of(seq)
        .into_iter()
        .map(|k| certify(spec, &seq.subset(&seq.indices_of(k)), opts))
        .collect()
}

fn simulate_all(spec: &CycleSpec, certs: &[BlenderCertificate], p: &Params, seed: u64) -> Result<Vec<CoveringSimReport>> {
    certs
        .iter()
        .map(|c| simulate_covering(spec, c, p.simulate.n_discs, seed, p.simulate.depth))
        .collect()
}

fn unfold(doc: &Doc, certs: Option<&[BlenderCertificate]>) -> Result<Value> {
    let spec = &doc.cycle;
    let u = &doc.params.unfold;
    let moduli = build_moduli(spec, &doc.moduli)?;
    let search = MuSearch {
        window_count: u.window_count,
        k_max: u.k_max,
        residue: u.residue,
        options: u.window(),
    };
    let sequence = find_mu_sequence(spec, &moduli, &search)?;
    let relations = match u.mu {
        None => None,
        Some(mu) => {
            let class = classify_case(&moduli, spec)?;
            let owned;
            let certs = match certs {
                Some(c) => c,
                None => {
                    let params = doc.params.search.resolve(spec, &doc.params.certify);
                    let seq = search_pairs(spec, &moduli, &class, &params)?;
                    owned = certify_kinds(spec, &seq, &doc.params.certify)?;
                    &owned
                }
            };
            let opts = RelationOptions {
                q: sequence.q,
                depth: u.depth,
                window: u.window(),
            };
            Some(homoclinic_report(spec, class.tag, mu, certs, &opts)?)
        }
    };
    Ok(json!({ "sequence": sequence, "relations": relations }))
}

fn simple_check(doc: &Doc, moduli: &Moduli) -> Result<(Value, Option<String>)> {
    let spec = &doc.cycle;
    let s = &doc.params.simple;
    let mut report = exclusion_sets(spec, moduli, &s.truncation, s.tol)?;
    let mut csv = None;
    if s.scan {
        let r = brute_scan(spec, moduli, &s.scan_params)?;
        let mut buf = Vec::new();
        r.write_csv(&mut buf)?;
        csv = String::from_utf8(buf).ok();
        report.scan = Some(r);
    }
    let verdict = simple_verdict(&report);
    Ok((json!({ "exclusion": report, "verdict": verdict }), csv))
}

/// Which item of the main existence theorem applies, from the angle classes.
fn existence_item(spec: &CycleSpec, moduli: &Moduli) -> Option<u8> {
    let mut angles = vec![moduli.omega1_class];
    if spec.is_double_focus() {
        angles.push(moduli.omega2_class);
    }
    let irr = angles.iter().filter(|c| **c == Some(ArithClass::Irrational)).count();
    match (irr, angles.len()) {
        (2, 2) => Some(1),
        (1, _) => Some(2),
        (0, _) if moduli.theta_class == Some(ArithClass::Irrational) => Some(3),
        _ => None,
    }
}

#[derive(Serialize)]
struct Verdicts {
    existence_item: Option<u8>,
    /// "both_blenders_cyclic" or "at_least_one_blender".
    claim: &'static str,
    certified: Vec<BlenderKind>,
    cs_index: Option<usize>,
    cu_index: Option<usize>,
    mutual_activation: Option<bool>,
    holds: bool,
}

fn pipeline(doc: &Doc, seed: u64) -> Result<Value> {
    let spec = &doc.cycle;
    let p = &doc.params;
    let validation = validate_nondegeneracy(spec);
    let moduli = build_moduli(spec, &doc.moduli)?;
    let class = classify_case(&moduli, spec)?;
    if class.tag.is_rational_all() {
        let (v, _) = simple_check(doc, &moduli)?;
        return Ok(json!({
            "case": class.tag,
            "classification": class,
            "validation": validation,
            "simple": v,
        }));
    }
    let condition: Option<Vec<ResidueWitness>> = match class.tag {
        CaseTag::Sf1 => {
            let (q, p1) = a1_modulus(&moduli, p)?;
            Some(check_a1(spec, q, p1)?)
        }
        CaseTag::Df1 => {
            let (a, b) = a2_sampling(&moduli, p);
            Some(check_a2(spec, a, b)?)
        }
        _ => None,
    };
    let params = p.search.resolve(spec, &p.certify);
    let seq = search_pairs(spec, &moduli, &class, &params)?;
    let certs = certify_kinds(spec, &seq, &p.certify)?;
    let coverage = simulate_all(spec, &certs, p, seed)?;
    let find = |k| certs.iter().find(|c| c.blender_kind == k);
    let activation: Option<ActivationReport> = match (find(BlenderKind::Cs), find(BlenderKind::Cu)) {
        (Some(cs), Some(cu)) => Some(check_activation(
            cs,
            cu,
            spec,
            p.activation.n_discs,
            seed,
            p.activation.depth,
        )?),
        _ => None,
    };
    let kinds: Vec<BlenderKind> = certs.iter().map(|c| c.blender_kind).collect();
    let edges: Vec<Edge> = case_edges(&kinds);
    let unfolding = if p.unfold.enabled && !spec.is_double_focus() {
        Some(unfold(doc, Some(&certs))?)
    } else {
        None
    };
    let item = existence_item(spec, &moduli);
    let mutual = activation.as_ref().map(|a| a.mutual);
    let both = item == Some(1);
    let verdicts = Verdicts {
        existence_item: item,
        claim: if both { "both_blenders_cyclic" } else { "at_least_one_blender" },
        cs_index: find(BlenderKind::Cs).map(|c| c.index),
        cu_index: find(BlenderKind::Cu).map(|c| c.index),
        holds: if both { kinds.len() == 2 && mutual == Some(true) } else { !kinds.is_empty() },
        certified: kinds,
        mutual_activation: mutual,
    };
    Ok(json!({
        "case": class.tag,
        "classification": class,
        "validation": validation,
        "condition": condition,
        "search": {
            "count": seq.len(),
            "eps": seq.eps,
            "window": seq.window,
            "best_distance": seq.best_distance,
            "expected_kinds": kinds_of(&seq),
        },
        "certificates": certs,
        "coverage": coverage.iter().map(summary).collect::<Vec<_>>(),
        "activation": activation,
        "edges": edges,
        "unfolding": unfolding,
        "verdicts": verdicts,
    }))
}

/// Coverage report without per-disc records.
fn summary(r: &CoveringSimReport) -> Value {
    json!({
        "kind": r.kind,
        "n_discs": r.n_discs,
        "depth": r.depth,
        "extent": r.extent,
        "survived": r.survived,
        "all_survived": r.all_survived,
        "mean_shrink": r.mean_shrink,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reject_unknown_params() {
        let mut base = serde_json::to_value(Params::default()).unwrap();
        let err = merge_strict(&mut base, json!({"search": {"epz": 1.0}}), "params").unwrap_err();
        assert!(err.to_string().contains("params.search.epz"));
    }

    #[test]
    fn set_path_parses_json_values() {
        let mut v = json!({"params": {}});
        set_path(&mut v, "params.search.eps", "1e-4").unwrap();
        set_path(&mut v, "params.unfold.convention", "literal").unwrap();
        assert_eq!(v["params"]["search"]["eps"], json!(1e-4));
        assert_eq!(v["params"]["unfold"]["convention"], json!("literal"));
        assert!(parse_override("noequals").is_err());
    }
}
