//! Experiment runner behind the CLI and the C API: model configuration,
//! bound-vs-actual pipelines, the identity-certification suite, and
//! deterministic JSON/CSV assembly.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bounds::{
    self, kappa_exact, poisson_total, BoundMode, NormalBoundReport, PoissonBoundReport,
};
use crate::coupling::ExactPairCoupling;
use crate::error::{Error, Result};
use crate::models::{self, ModelMetadata};
use crate::numerics::QuadratureSpec;
use crate::report::{csv_row, Json, CSV_HEADER};
use crate::stein_normal::{
    certify_grid, ef_zero_check, equal_marginals_identity_check, remainder_split_term,
    AntisymmetricForm, NormalSteinSolution, SmoothedHalfLineTest,
};
use crate::stein_poisson::{singleton_basis, solve_poisson_stein, DiscreteAntiderivative};

/// Which pipeline a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Normal,
    Poisson,
    Verify,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "normal" => Ok(Mode::Normal),
            "poisson" => Ok(Mode::Poisson),
            "verify" => Ok(Mode::Verify),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Normal => "normal",
            Mode::Poisson => "poisson",
            Mode::Verify => "verify",
        }
    }
}

/// Experiment configuration. The seed is recorded for report identity and
/// drives the randomized certification subsets; the exact pipelines have no
/// other randomness.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub z_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub c_grid: Option<Vec<f64>>,
    pub tail_tol: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            model: None,
            params: BTreeMap::new(),
            z_list: vec![-1.0, 0.0, 1.0],
            t_list: vec![0.25, 0.5, 1.0],
            c_grid: None,
            tail_tol: 1e-12,
            seed: 0,
        }
    }

    fn echo_json(&self) -> Json {
        let mut params = Json::obj();
        for (k, v) in &self.params {
            params.push(k, Json::num(*v));
        }
        let mut obj = Json::obj();
        obj.push("mode", Json::Str(self.mode.as_str().into()));
        obj.push(
            "model",
            self.model
                .as_ref()
                .map_or(Json::Null, |m| Json::Str(m.clone())),
        );
        obj.push("params", params);
        obj.push(
            "z_list",
            Json::Arr(self.z_list.iter().map(|&z| Json::num(z)).collect()),
        );
        obj.push(
            "t_list",
            Json::Arr(self.t_list.iter().map(|&t| Json::num(t)).collect()),
        );
        obj.push(
            "c_grid",
            self.c_grid.as_ref().map_or(Json::Null, |g| {
                Json::Arr(g.iter().map(|&c| Json::num(c)).collect())
            }),
        );
        obj.push("tail_tol", Json::num(self.tail_tol));
        obj.push("seed", Json::Int(self.seed as i64));
        obj
    }
}

/// The documented JSON configuration schema shared by `--config` files and
/// the C API. All fields are optional; unknown fields are rejected.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub model: Option<String>,
    pub params: Option<BTreeMap<String, f64>>,
    pub z_list: Option<Vec<f64>>,
    pub t_list: Option<Vec<f64>>,
    pub c_grid: Option<Vec<f64>>,
    pub tail_tol: Option<f64>,
    pub seed: Option<u64>,
    /// Output directory; consumed by the CLI, ignored by the library.
    pub out: Option<String>,
    /// Output format; consumed by the CLI, ignored by the library.
    pub format: Option<String>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl ExperimentConfig {
    /// Apply a parsed configuration document on top of the defaults.
    pub fn from_document(mode: Mode, doc: &ConfigDocument) -> Self {
        let mut config = ExperimentConfig::new(mode);
        if let Some(model) = &doc.model {
            config.model = Some(model.clone());
        }
        if let Some(params) = &doc.params {
            config.params = params.clone();
        }
        if let Some(z) = &doc.z_list {
            config.z_list = z.clone();
        }
        if let Some(t) = &doc.t_list {
            config.t_list = t.clone();
        }
        if let Some(g) = &doc.c_grid {
            config.c_grid = Some(g.clone());
        }
        if let Some(tol) = doc.tail_tol {
            config.tail_tol = tol;
        }
        if let Some(seed) = doc.seed {
            config.seed = seed;
        }
        config
    }
}

/// A finished run: the report document, flattened CSV rows, the model
/// coupling in its documented JSON form (single-model runs), and whether
/// every theorem assertion held.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Json,
    pub csv_rows: Vec<String>,
    pub coupling_json: Option<String>,
    pub all_pass: bool,
}

impl RunOutcome {
    pub fn report_string(&self) -> Result<String> {
        self.report.to_pretty_string()
    }

    pub fn csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.csv_rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }
}

struct ParamReader<'a> {
    params: &'a BTreeMap<String, f64>,
    used: Vec<&'static str>,
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a BTreeMap<String, f64>) -> Self {
        ParamReader {
            params,
            used: Vec::new(),
        }
    }

    fn required(&mut self, name: &'static str) -> Result<f64> {
        self.used.push(name);
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(name, "required model parameter is missing"))
    }

    fn optional(&mut self, name: &'static str) -> Option<f64> {
        self.used.push(name);
        self.params.get(name).copied()
    }

    fn integer(&mut self, name: &'static str) -> Result<usize> {
        let v = self.required(name)?;
        if v.fract() != 0.0 || !(0.0..=1e9).contains(&v) {
            return Err(Error::invalid(
                name,
                format!("must be a non-negative integer, got {v}"),
            ));
        }
        Ok(v as usize)
    }

    fn finish(self) -> Result<()> {
        for key in self.params.keys() {
            if !self.used.iter().any(|u| u == key) {
                return Err(Error::invalid(
                    "params",
                    format!("unknown parameter `{key}`"),
                ));
            }
        }
        Ok(())
    }
}

/// Parse a JSON object of numeric parameters, `{"n": 16, ...}`.
pub fn parse_params_json(text: &str) -> Result<BTreeMap<String, f64>> {
    Ok(serde_json::from_str(text)?)
}

/// Instantiate a model coupling from its CLI name and `key=value` params.
pub fn build_model(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<(ExactPairCoupling, ModelMetadata)> {
    let mut reader = ParamReader::new(params);
    let built = match name {
        "rademacher" => {
            let n = reader.integer("n")?;
            models::rademacher_sum(n)
        }
        "immigration_death" => {
            let lambda = reader.required("lambda")?;
            let n_cap = reader.integer("N")?;
            let c_norm = reader.optional("c_norm").unwrap_or(lambda + n_cap as f64);
            models::immigration_death(lambda, n_cap, c_norm)
        }
        "skewed_two_step" => {
            let eps = reader.required("eps")?;
            let lambda = reader.optional("lambda").unwrap_or(1.0);
            let n_cap = match reader.optional("N") {
                Some(v) if v.fract() == 0.0 && v >= 0.0 => v as usize,
                Some(v) => return Err(Error::invalid("N", format!("must be an integer, got {v}"))),
                None => 10,
            };
            models::skewed_two_step(lambda, n_cap, eps)
        }
        "fixed_points" => {
            let n = reader.integer("n")?;
            models::permutation_fixed_points(n)
        }
        "biased_cycle" => {
            let m = reader.integer("m")?;
            let drift = reader.required("drift")?;
            models::biased_cycle_normal(m, drift)
        }
        other => return Err(Error::UnknownModel(other.to_string())),
    }?;
    reader.finish()?;
    Ok(built)
}

fn model_json(meta: &ModelMetadata, coupling: &ExactPairCoupling) -> Json {
    let mut obj = Json::obj();
    obj.push("name", Json::Str(meta.name.clone()));
    obj.push("size", Json::Int(meta.size as i64));
    obj.push("states", Json::Int(coupling.len() as i64));
    obj.push(
        "structural_lambda",
        meta.structural_lambda.map_or(Json::Null, Json::num),
    );
    obj.push(
        "structural_c",
        meta.structural_c.map_or(Json::Null, Json::num),
    );
    obj.push(
        "poisson_mean",
        meta.poisson_mean.map_or(Json::Null, Json::num),
    );
    obj.push(
        "exchangeable_expected",
        Json::Bool(meta.exchangeable_expected),
    );
    obj.push("a_bound", meta.a_bound.map_or(Json::Null, Json::num));
    obj.push(
        "marginal_discrepancy",
        Json::num(coupling.marginal_discrepancy()),
    );
    obj.push(
        "exchangeability_defect",
        Json::num(coupling.exchangeability_defect()),
    );
    obj.push("notes", Json::Str(meta.notes.clone()));
    obj
}

fn normal_bound_json(report: &NormalBoundReport) -> Json {
    let mut obj = Json::obj();
    obj.push("lambda", Json::num(report.lambda));
    obj.push("er2", Json::num(report.er2));
    obj.push("var_ewv2", Json::num(report.var_ewv2));
    obj.push("e_abs_v3", Json::num(report.e_abs_v3));
    obj.push("a_jump", Json::num(report.a_jump));
    obj.push("max_abs_v", Json::num(report.max_abs_v));
    obj.push("class_a", Json::num(report.class_a));
    obj.push("bound_third_moment", Json::num(report.bound_third_moment));
    obj.push("bound_bounded_jump", Json::num(report.bound_bounded_jump));
    obj.push(
        "bound_bounded_jump_derivation",
        Json::num(report.bound_bounded_jump_derivation),
    );
    obj.push("derivation_coefficients", {
        let a = report.class_a;
        let mut c = Json::obj();
        c.push("a3_over_lambda", Json::num(7.0 * a));
        c.push("a2_over_sqrt_lambda", Json::num(3.0 * a));
        c.push("sqrt_delta", Json::num(4.2 * a.sqrt()));
        c
    });
    obj.push("delta_actual", Json::num(report.delta_actual));
    obj.push("slack_ratio", Json::num(report.slack_ratio));
    obj.push("dominance_ok", Json::Bool(report.dominance_ok));
    obj
}

/// Residual tolerance for the equal-marginals identity.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Tolerance for the telescoping / integral-form antisymmetric checks.
pub const TELESCOPE_TOL: f64 = 1e-8;

struct IdentitySweep {
    json: Vec<Json>,
    max_residual: f64,
    max_j_identity_residual: f64,
    j_bounds_all_ok: bool,
    max_ef_integral: f64,
    max_abs_ef_product: f64,
    min_abs_ef_product: f64,
    max_abs_split: f64,
}

/// Gaussian-smoothed test solutions for a (z, t) matrix, tables forced so
/// they can be shared across couplings.
fn build_solutions(z_list: &[f64], t_list: &[f64]) -> Result<Vec<NormalSteinSolution>> {
    let tests: Vec<SmoothedHalfLineTest> = z_list
        .iter()
        .flat_map(|&z| t_list.iter().map(move |&t| SmoothedHalfLineTest::new(z, t)))
        .collect::<Result<_>>()?;
    Ok(tests
        .into_par_iter()
        .map(|test| {
            let solution = NormalSteinSolution::new(test);
            solution.value_fast(0.0); // force the interpolation table
            solution
        })
        .collect())
}

/// Identity and antisymmetric-function checks across a solution matrix.
fn identity_sweep(
    coupling: &ExactPairCoupling,
    structural_lambda: Option<f64>,
    solutions: &[NormalSteinSolution],
) -> Result<IdentitySweep> {
    let decomp = coupling.regression_decompose(structural_lambda)?;
    let tau = QuadratureSpec::default_tau();
    let entries: Vec<(Json, f64, f64, bool, f64, f64, f64)> = solutions
        .par_iter()
        .map(|solution| -> Result<_> {
            let identity = equal_marginals_identity_check(coupling, &decomp, solution, &tau)?;
            let split = remainder_split_term(coupling, solution, &tau)?;
            let ef_product = ef_zero_check(coupling, solution, AntisymmetricForm::Product)?;
            let ef_integral = ef_zero_check(coupling, solution, AntisymmetricForm::Integral)?;
            let mut obj = Json::obj();
            obj.push("z", Json::num(solution.test().z));
            obj.push("t", Json::num(solution.test().t));
            obj.push("lhs", Json::num(identity.lhs));
            obj.push("term_v2", Json::num(identity.term_v2));
            obj.push("term_remainder", Json::num(identity.term_remainder));
            obj.push("term_r", Json::num(identity.term_r));
            obj.push("residual", Json::num(identity.residual));
            obj.push("j1", Json::num(identity.j1));
            obj.push("j2", Json::num(identity.j2));
            obj.push("j3", Json::num(identity.j3));
            obj.push("j1_bound", Json::num(identity.j1_bound));
            obj.push("j2_bound", Json::num(identity.j2_bound));
            obj.push("j3_bound", Json::num(identity.j3_bound));
            obj.push("j_bounds_ok", Json::Bool(identity.j_bounds_ok));
            obj.push(
                "j_identity_residual",
                Json::num(identity.j_identity_residual),
            );
            obj.push("remainder_split", Json::num(split));
            obj.push("ef_product", Json::num(ef_product));
            obj.push("ef_integral", Json::num(ef_integral));
            Ok((
                obj,
                identity.residual.abs(),
                identity.j_identity_residual.abs(),
                identity.j_bounds_ok,
                ef_integral.abs(),
                ef_product.abs(),
                split.abs(),
            ))
        })
        .collect::<Result<_>>()?;
    let mut sweep = IdentitySweep {
        json: Vec::with_capacity(entries.len()),
        max_residual: 0.0,
        max_j_identity_residual: 0.0,
        j_bounds_all_ok: true,
        max_ef_integral: 0.0,
        max_abs_ef_product: 0.0,
        min_abs_ef_product: f64::INFINITY,
        max_abs_split: 0.0,
    };
    for (obj, res, jres, jok, efi, efp, split) in entries {
        sweep.json.push(obj);
        sweep.max_residual = sweep.max_residual.max(res);
        sweep.max_j_identity_residual = sweep.max_j_identity_residual.max(jres);
        sweep.j_bounds_all_ok &= jok;
        sweep.max_ef_integral = sweep.max_ef_integral.max(efi);
        sweep.max_abs_ef_product = sweep.max_abs_ef_product.max(efp);
        sweep.min_abs_ef_product = sweep.min_abs_ef_product.min(efp);
        sweep.max_abs_split = sweep.max_abs_split.max(split);
    }
    Ok(sweep)
}

/// Full normal-approximation pipeline: model → standardize → decompose →
/// moments → bounds → exact δ → identity suite.
pub fn run_normal(config: &ExperimentConfig) -> Result<RunOutcome> {
    let name = config
        .model
        .as_deref()
        .ok_or_else(|| Error::Config("normal mode requires --model".into()))?;
    let (raw, meta) = build_model(name, &config.params)?;
    let sigma_raw = raw.var_w().sqrt();
    let coupling = raw.standardize()?;
    // structural jump bounds are stated in raw units; rescale
    let a_bound = meta.a_bound.map(|a| a / sigma_raw);
    let decomp = coupling.regression_decompose(meta.structural_lambda)?;
    let bound_report = NormalBoundReport::evaluate(&coupling, &decomp, a_bound)?;
    let solutions = build_solutions(&config.z_list, &config.t_list)?;
    let sweep = identity_sweep(&coupling, meta.structural_lambda, &solutions)?;

    let all_pass = bound_report.dominance_ok
        && sweep.max_residual <= IDENTITY_TOL
        && sweep.j_bounds_all_ok
        && sweep.max_ef_integral <= TELESCOPE_TOL;

    let mut report = Json::obj();
    report.push("kind", Json::Str("normal".into()));
    report.push("config", config.echo_json());
    report.push("model", model_json(&meta, &coupling));
    {
        let mut d = Json::obj();
        d.push("lambda", Json::num(decomp.lambda));
        d.push("alpha", Json::num(decomp.alpha));
        d.push("er2", Json::num(decomp.er2));
        d.push("ev2", Json::num(decomp.ev2));
        report.push("decomposition", d);
    }
    report.push("bound", normal_bound_json(&bound_report));
    report.push("identities", Json::Arr(sweep.json));
    report.push("max_identity_residual", Json::num(sweep.max_residual));
    report.push("max_ef_integral", Json::num(sweep.max_ef_integral));
    report.push("all_pass", Json::Bool(all_pass));

    let best = bound_report
        .bound_third_moment
        .min(bound_report.bound_bounded_jump);
    let row = csv_row(
        &meta.name,
        meta.size,
        decomp.lambda,
        None,
        None,
        None,
        None,
        None,
        None,
        best,
        bound_report.delta_actual,
    )?;
    Ok(RunOutcome {
        report,
        csv_rows: vec![row],
        coupling_json: Some(raw.to_json()),
        all_pass,
    })
}

fn poisson_bound_json(report: &PoissonBoundReport, total_bounded: f64) -> Json {
    let mut obj = Json::obj();
    obj.push("lambda", Json::num(report.lambda));
    obj.push("c", Json::num(report.c_scale));
    obj.push("kappa_exact", Json::num(report.kappa_exact));
    obj.push("kappa_simple", Json::num(report.kappa_simple));
    obj.push("rho_exact", Json::num(report.rho_exact));
    obj.push("rho_bound_joint", Json::num(report.rho_bound_joint));
    obj.push("rho_bound_marginal", Json::num(report.rho_bound_marginal));
    obj.push("total_bound_exact", Json::num(report.total_bound));
    obj.push("total_bound_bounded", Json::num(total_bounded));
    obj.push("dtv_lo", Json::num(report.dtv_actual.lo));
    obj.push("dtv_hi", Json::num(report.dtv_actual.hi));
    obj.push("dominance_ok", Json::Bool(report.dominance_ok));
    obj
}

/// Default log-spaced c grid when neither the model nor the caller pins c.
fn default_c_grid(lambda: f64, max_value: f64) -> Vec<f64> {
    let lo = (lambda / 20.0).max(1e-3);
    let hi = 20.0 * (lambda + max_value);
    let n = 50;
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Full Poisson pipeline: model → jump kernel → singleton basis → κ and ρ →
/// exact d_TV → total bound.
pub fn run_poisson(config: &ExperimentConfig) -> Result<RunOutcome> {
    let name = config
        .model
        .as_deref()
        .ok_or_else(|| Error::Config("poisson mode requires --model".into()))?;
    let (coupling, meta) = build_model(name, &config.params)?;
    let lambda = meta
        .poisson_mean
        .ok_or_else(|| Error::invalid("model", "not an integer-valued Poisson-path model"))?;
    let max_value = coupling.values().last().copied().unwrap_or(0.0);
    let basis = singleton_basis(lambda, max_value as u32, max_value as usize + 4)?;
    let c_scale = match config.params.get("c") {
        Some(&c) => c,
        None => match meta.structural_c {
            Some(c) => c,
            None => {
                let grid = config
                    .c_grid
                    .clone()
                    .unwrap_or_else(|| default_c_grid(lambda, max_value));
                bounds::choose_c(&coupling, lambda, &grid, &basis)?
            }
        },
    };
    let exact = poisson_total(
        &coupling,
        lambda,
        c_scale,
        BoundMode::Exact,
        config.tail_tol,
        &basis,
    )?;
    let bounded = poisson_total(
        &coupling,
        lambda,
        c_scale,
        BoundMode::Bounded,
        config.tail_tol,
        &basis,
    )?;

    // telescoping and jump-function certificates on a basis sample
    let mut max_telescope = 0.0f64;
    let mut max_ef_exchangeable = 0.0f64;
    let mut ef_witness = 0.0f64;
    for sol in basis.iter().step_by(basis.len().div_ceil(8).max(1)) {
        let ad = DiscreteAntiderivative::from_solution(sol);
        let tele = crate::stein_poisson::telescope_check(&coupling, &ad)?;
        max_telescope = max_telescope.max(tele.abs());
        let ef = crate::stein_poisson::ef_zero_poisson_check(&coupling, &ad)?;
        if meta.exchangeable_expected {
            max_ef_exchangeable = max_ef_exchangeable.max(ef.abs());
        } else {
            ef_witness = ef_witness.max(ef.abs());
        }
    }

    let ordering_ok = exact.kappa_exact <= exact.kappa_simple + 1e-10
        && exact.rho_exact <= exact.rho_bound_joint + 1e-10
        && exact.rho_bound_joint <= exact.rho_bound_marginal + 1e-10;
    let all_pass = exact.dominance_ok
        && bounded.dominance_ok
        && ordering_ok
        && max_telescope <= 1e-10
        && (!meta.exchangeable_expected || max_ef_exchangeable <= 1e-10);

    let mut report = Json::obj();
    report.push("kind", Json::Str("poisson".into()));
    report.push("config", config.echo_json());
    report.push("model", model_json(&meta, &coupling));
    report.push("bound", poisson_bound_json(&exact, bounded.total_bound));
    report.push("max_telescope_residual", Json::num(max_telescope));
    report.push(
        "ef_jump_function",
        if meta.exchangeable_expected {
            Json::num(max_ef_exchangeable)
        } else {
            Json::num(ef_witness)
        },
    );
    report.push("ordering_ok", Json::Bool(ordering_ok));
    report.push("all_pass", Json::Bool(all_pass));

    let row = csv_row(
        &meta.name,
        meta.size,
        lambda,
        Some(c_scale),
        Some(exact.kappa_exact),
        Some(exact.kappa_simple),
        Some(exact.rho_exact),
        Some(exact.rho_bound_joint),
        Some(exact.rho_bound_marginal),
        exact.total_bound,
        exact.dtv_actual.hi,
    )?;
    Ok(RunOutcome {
        report,
        csv_rows: vec![row],
        coupling_json: Some(coupling.to_json()),
        all_pass,
    })
}

/// Direction of a verification comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Pass when value <= threshold (residuals).
    AtMost,
    /// Pass when value >= threshold (witnesses and margins).
    AtLeast,
}

/// One row of the verification summary.
#[derive(Debug, Clone)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub kind: CheckKind,
    pub value: f64,
    pub threshold: f64,
    pub cases: usize,
    pub pass: bool,
}

impl VerifyCheck {
    fn at_most(name: &'static str, value: f64, threshold: f64, cases: usize) -> Self {
        VerifyCheck {
            name,
            kind: CheckKind::AtMost,
            value,
            threshold,
            cases,
            pass: value <= threshold,
        }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64, cases: usize) -> Self {
        VerifyCheck {
            name,
            kind: CheckKind::AtLeast,
            value,
            threshold,
            cases,
            pass: value >= threshold,
        }
    }

    fn json(&self) -> Json {
        let mut obj = Json::obj();
        obj.push("name", Json::Str(self.name.into()));
        obj.push(
            "kind",
            Json::Str(match self.kind {
                CheckKind::AtMost => "at_most".into(),
                CheckKind::AtLeast => "at_least".into(),
            }),
        );
        obj.push("value", Json::num(self.value));
        obj.push("threshold", Json::num(self.threshold));
        obj.push("cases", Json::Int(self.cases as i64));
        obj.push("pass", Json::Bool(self.pass));
        obj
    }
}

/// Deterministic PRNG for the randomized certification subsets.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// The model matrix the verification suite sweeps.
pub struct ModelZoo {
    pub entries: Vec<(ExactPairCoupling, ModelMetadata)>,
}

impl ModelZoo {
    pub fn standard() -> Result<Self> {
        let mut entries = Vec::new();
        for n in [4usize, 8, 16, 32] {
            entries.push(models::rademacher_sum(n)?);
        }
        for m in [8usize, 12, 24] {
            for drift in [0.1, 0.2] {
                entries.push(models::biased_cycle_normal(m, drift)?);
            }
        }
        for lambda in [0.5, 1.0, 2.0] {
            entries.push(models::immigration_death(lambda, 12, lambda + 12.0)?);
        }
        for eps in [0.005, 0.01] {
            entries.push(models::skewed_two_step(1.0, 10, eps)?);
        }
        for n in [4usize, 5, 6] {
            entries.push(models::permutation_fixed_points(n)?);
        }
        Ok(ModelZoo { entries })
    }

    fn integer_entries(&self) -> impl Iterator<Item = &(ExactPairCoupling, ModelMetadata)> {
        // Poisson-path models: non-negative integer support. (Rademacher
        // sums at square n have integer values but live on both signs.)
        self.entries
            .iter()
            .filter(|(c, _)| c.integer_valued() && c.values()[0] >= -0.5)
    }
}

/// Run every certification suite across the model/test matrix.
pub fn run_verify(config: &ExperimentConfig) -> Result<RunOutcome> {
    let zoo = ModelZoo::standard()?;
    let mut checks: Vec<VerifyCheck> = Vec::new();
    let mut csv_rows = Vec::new();

    // --- coupling invariants and metadata honesty -------------------------
    let mut worst_discrepancy = 0.0f64;
    let mut metadata_honest = true;
    let mut worst_exchangeable_defect = 0.0f64;
    for (coupling, meta) in &zoo.entries {
        worst_discrepancy = worst_discrepancy.max(coupling.marginal_discrepancy());
        let defect = coupling.exchangeability_defect();
        if meta.exchangeable_expected {
            worst_exchangeable_defect = worst_exchangeable_defect.max(defect);
            metadata_honest &= defect <= 1e-12;
        } else {
            metadata_honest &= defect > 1e-12;
        }
    }
    checks.push(VerifyCheck::at_most(
        "coupling_marginal_discrepancy",
        worst_discrepancy,
        1e-10,
        zoo.entries.len(),
    ));
    let mut honesty = VerifyCheck::at_most(
        "metadata_exchangeability_honest",
        worst_exchangeable_defect,
        1e-12,
        zoo.entries.len(),
    );
    honesty.pass &= metadata_honest;
    checks.push(honesty);

    // --- Stein solution certificates over the (z, t) grid -----------------
    let cert_jobs: Vec<(f64, f64)> = config
        .z_list
        .iter()
        .flat_map(|&z| [0.1, 0.5, 1.0].into_iter().map(move |t| (z, t)))
        .collect();
    let certs: Vec<_> = cert_jobs
        .iter()
        .map(|&(z, t)| -> Result<_> {
            let sol = NormalSteinSolution::new(SmoothedHalfLineTest::new(z, t)?);
            Ok(certify_grid(&sol, 0.01))
        })
        .collect::<Result<_>>()?;
    let cert_details: Vec<Json> = certs
        .iter()
        .map(|c| {
            let mut obj = Json::obj();
            obj.push("z", Json::num(c.z));
            obj.push("t", Json::num(c.t));
            obj.push("max_abs_f", Json::num(c.max_abs_f));
            obj.push("max_abs_f1", Json::num(c.max_abs_f1));
            obj.push("max_abs_f2", Json::num(c.max_abs_f2));
            obj.push("max_eq_residual", Json::num(c.max_eq_residual));
            obj.push("max_fd_residual", Json::num(c.max_fd_residual));
            obj.push("norms_ok", Json::Bool(c.norms_ok));
            obj
        })
        .collect();
    let max_eq = certs.iter().fold(0.0f64, |a, c| a.max(c.max_eq_residual));
    let max_fd = certs.iter().fold(0.0f64, |a, c| a.max(c.max_fd_residual));
    let worst_norm_excess = certs.iter().fold(f64::NEG_INFINITY, |a, c| {
        a.max(c.max_abs_f - 2.6)
            .max(c.max_abs_f1 - 4.0)
            .max(c.max_abs_f2 - 1.6 / c.t)
    });
    checks.push(VerifyCheck::at_most(
        "stein_equation_residual",
        max_eq,
        1e-8,
        certs.len(),
    ));
    checks.push(VerifyCheck::at_most(
        "stein_equation_residual_fd",
        max_fd,
        1e-8,
        certs.len(),
    ));
    checks.push(VerifyCheck::at_most(
        "stein_norm_bound_excess",
        worst_norm_excess,
        0.0,
        certs.len(),
    ));

    // --- identity suite across the zoo -------------------------------------
    let mut max_identity = 0.0f64;
    let mut j_all_ok = true;
    let mut max_split_exchangeable = 0.0f64;
    let mut min_split_witness = f64::INFINITY;
    let mut max_ef_integral = 0.0f64;
    let mut max_ef_product_exch = 0.0f64;
    let mut min_ef_product_witness = f64::INFINITY;
    let mut identity_cases = 0usize;
    let solutions = build_solutions(&config.z_list, &config.t_list)?;
    for (raw, meta) in &zoo.entries {
        let coupling = raw.standardize()?;
        let sweep = identity_sweep(&coupling, meta.structural_lambda, &solutions)?;
        identity_cases += sweep.json.len();
        max_identity = max_identity
            .max(sweep.max_residual)
            .max(sweep.max_j_identity_residual);
        j_all_ok &= sweep.j_bounds_all_ok;
        max_ef_integral = max_ef_integral.max(sweep.max_ef_integral);
        if meta.exchangeable_expected {
            max_split_exchangeable = max_split_exchangeable.max(sweep.max_abs_split);
            max_ef_product_exch = max_ef_product_exch.max(sweep.max_abs_ef_product);
        } else {
            min_ef_product_witness = min_ef_product_witness.min(sweep.max_abs_ef_product);
            if meta.name == "biased_cycle" && sweep.max_abs_split < min_split_witness {
                min_split_witness = sweep.max_abs_split;
            }
        }
        // flattened row for the normal path
        let decomp = coupling.regression_decompose(meta.structural_lambda)?;
        let a_bound = meta.a_bound.map(|a| a / raw.var_w().sqrt());
        let bound_report = NormalBoundReport::evaluate(&coupling, &decomp, a_bound)?;
        csv_rows.push(csv_row(
            &meta.name,
            meta.size,
            decomp.lambda,
            None,
            None,
            None,
            None,
            None,
            None,
            bound_report
                .bound_third_moment
                .min(bound_report.bound_bounded_jump),
            bound_report.delta_actual,
        )?);
    }
    checks.push(VerifyCheck::at_most(
        "equal_marginals_identity_residual",
        max_identity,
        IDENTITY_TOL,
        identity_cases,
    ));
    let mut j_check = VerifyCheck::at_most("j_decomposition_bounds", 0.0, 0.0, identity_cases);
    j_check.pass = j_all_ok;
    checks.push(j_check);
    checks.push(VerifyCheck::at_most(
        "remainder_split_exchangeable",
        max_split_exchangeable,
        1e-8,
        identity_cases,
    ));
    checks.push(VerifyCheck::at_least(
        "remainder_split_witness_biased_cycle",
        min_split_witness,
        1e-6,
        identity_cases,
    ));
    checks.push(VerifyCheck::at_most(
        "ef_integral_form",
        max_ef_integral,
        TELESCOPE_TOL,
        identity_cases,
    ));
    checks.push(VerifyCheck::at_most(
        "ef_product_form_exchangeable",
        max_ef_product_exch,
        1e-10,
        identity_cases,
    ));
    checks.push(VerifyCheck::at_least(
        "ef_product_form_witness",
        min_ef_product_witness,
        1e-10,
        identity_cases,
    ));

    // --- normal-theorem dominance ------------------------------------------
    let mut min_margin_third_moment = f64::INFINITY;
    let mut min_margin_bounded_jump = f64::INFINITY;
    for (raw, meta) in &zoo.entries {
        let coupling = raw.standardize()?;
        let decomp = coupling.regression_decompose(meta.structural_lambda)?;
        let a_bound = meta.a_bound.map(|a| a / raw.var_w().sqrt());
        let report = NormalBoundReport::evaluate(&coupling, &decomp, a_bound)?;
        min_margin_third_moment =
            min_margin_third_moment.min(report.bound_third_moment - report.delta_actual);
        min_margin_bounded_jump =
            min_margin_bounded_jump.min(report.bound_bounded_jump - report.delta_actual);
    }
    checks.push(VerifyCheck::at_least(
        "normal_dominance_margin_third_moment",
        min_margin_third_moment,
        -bounds::DOMINANCE_SLACK,
        zoo.entries.len(),
    ));
    checks.push(VerifyCheck::at_least(
        "normal_dominance_margin_bounded_jump",
        min_margin_bounded_jump,
        -bounds::DOMINANCE_SLACK,
        zoo.entries.len(),
    ));

    // --- Poisson certificates: residuals and norms on random subsets -------
    let mut rng = SplitMix64(config.seed ^ 0x5eed_cafe_f00d_u64);
    let mut max_p_residual = 0.0f64;
    let mut worst_norm = f64::NEG_INFINITY;
    let mut worst_delta1 = f64::NEG_INFINITY;
    let n_cap = 40u32;
    for lambda in [0.5, 1.0, 2.0] {
        for _ in 0..200 {
            let mut subset = Vec::new();
            for j in 0..=n_cap {
                if rng.next_f64() < 0.5 {
                    subset.push(j);
                }
            }
            let sol = solve_poisson_stein(lambda, &subset, n_cap, n_cap as usize + 4)?;
            max_p_residual = max_p_residual.max(sol.max_residual());
            worst_norm = worst_norm.max(sol.norm() - lambda.powf(-0.5));
            worst_delta1 = worst_delta1.max(sol.delta1_norm() - (1.0 - (-lambda).exp()) / lambda);
        }
    }
    checks.push(VerifyCheck::at_most(
        "poisson_recursion_residual",
        max_p_residual,
        1e-12,
        600,
    ));
    checks.push(VerifyCheck::at_most(
        "poisson_norm_excess",
        worst_norm,
        1e-12,
        600,
    ));
    checks.push(VerifyCheck::at_most(
        "poisson_delta1_norm_excess",
        worst_delta1,
        1e-12,
        600,
    ));

    // --- discrete antiderivative conventions -------------------------------
    let mut max_g_residual = 0.0f64;
    {
        let sol = solve_poisson_stein(1.0, &[0, 2, 5], 20, 25)?;
        let ad = DiscreteAntiderivative::from_solution(&sol);
        for w in 1..=24i64 {
            let res = (ad.g(w)? - ad.g(w - 1)? - ad.f(w)?).abs();
            max_g_residual = max_g_residual.max(res);
        }
        let f: Vec<f64> = (-6..=6).map(|w| (0.37 * w as f64).cos()).collect();
        let ad = DiscreteAntiderivative::new(-6, f)?;
        for w in -5..=6i64 {
            let res = (ad.g(w)? - ad.g(w - 1)? - ad.f(w)?).abs();
            max_g_residual = max_g_residual.max(res);
        }
    }
    checks.push(VerifyCheck::at_most(
        "discrete_antiderivative_residual",
        max_g_residual,
        1e-12,
        36,
    ));

    // --- telescoping and jump-function checks over integer models ----------
    let mut max_telescope = 0.0f64;
    let mut max_ef_poisson_exch = 0.0f64;
    let mut min_ef_poisson_witness = f64::INFINITY;
    let mut telescope_cases = 0usize;
    for (coupling, meta) in zoo.integer_entries() {
        let lambda = meta.poisson_mean.unwrap_or(1.0);
        let max_value = coupling.values().last().copied().unwrap_or(0.0) as u32;
        let basis = singleton_basis(lambda, max_value, max_value as usize + 4)?;
        let mut ef_extreme = 0.0f64;
        for sol in &basis {
            let ad = DiscreteAntiderivative::from_solution(sol);
            max_telescope = max_telescope.max(telescope_check_abs(coupling, &ad)?);
            let ef = crate::stein_poisson::ef_zero_poisson_check(coupling, &ad)?.abs();
            ef_extreme = ef_extreme.max(ef);
            telescope_cases += 1;
        }
        if meta.exchangeable_expected {
            max_ef_poisson_exch = max_ef_poisson_exch.max(ef_extreme);
        } else {
            min_ef_poisson_witness = min_ef_poisson_witness.min(ef_extreme);
        }
    }
    checks.push(VerifyCheck::at_most(
        "telescoping_identity",
        max_telescope,
        1e-10,
        telescope_cases,
    ));
    checks.push(VerifyCheck::at_most(
        "ef_poisson_exchangeable",
        max_ef_poisson_exch,
        1e-10,
        telescope_cases,
    ));
    checks.push(VerifyCheck::at_least(
        "ef_poisson_witness",
        min_ef_poisson_witness,
        1e-10,
        telescope_cases,
    ));

    // --- Poisson theorem dominance and ordering chains ---------------------
    let mut min_poisson_margin = f64::INFINITY;
    let mut worst_ordering = f64::NEG_INFINITY;
    let mut poisson_cases = 0usize;
    for (coupling, meta) in zoo.integer_entries() {
        let lambda = meta.poisson_mean.unwrap_or(1.0);
        let max_value = coupling.values().last().copied().unwrap_or(0.0);
        let basis = singleton_basis(lambda, max_value as u32, max_value as usize + 4)?;
        let c_scale = meta.structural_c.unwrap_or(lambda + max_value);
        let report = poisson_total(
            coupling,
            lambda,
            c_scale,
            BoundMode::Exact,
            config.tail_tol,
            &basis,
        )?;
        min_poisson_margin = min_poisson_margin.min(report.total_bound - report.dtv_actual.lo);
        worst_ordering = worst_ordering
            .max(report.kappa_exact - report.kappa_simple)
            .max(report.rho_exact - report.rho_bound_joint)
            .max(report.rho_bound_joint - report.rho_bound_marginal);
        poisson_cases += 1;
        csv_rows.push(csv_row(
            &meta.name,
            meta.size,
            lambda,
            Some(c_scale),
            Some(report.kappa_exact),
            Some(report.kappa_simple),
            Some(report.rho_exact),
            Some(report.rho_bound_joint),
            Some(report.rho_bound_marginal),
            report.total_bound,
            report.dtv_actual.hi,
        )?);
    }
    checks.push(VerifyCheck::at_least(
        "poisson_dominance_margin",
        min_poisson_margin,
        -bounds::DOMINANCE_SLACK,
        poisson_cases,
    ));
    checks.push(VerifyCheck::at_most(
        "kappa_rho_ordering_violation",
        worst_ordering,
        1e-10,
        poisson_cases,
    ));

    // --- exact-supremum oracle on small supports ----------------------------
    let mut max_oracle_gap = 0.0f64;
    for (coupling, lambda, n_cap) in [
        (models::immigration_death(1.0, 12, 13.0)?.0, 1.0, 12u32),
        (models::skewed_two_step(1.0, 10, 0.01)?.0, 1.0, 10u32),
    ] {
        let kernel = coupling.jump_probabilities()?;
        let basis = singleton_basis(lambda, n_cap, n_cap as usize + 4)?;
        let c_scale = lambda + n_cap as f64;
        let fast = kappa_exact(&coupling, &kernel, lambda, c_scale, &basis)?;
        let ints: Vec<i64> = coupling.values().iter().map(|v| v.round() as i64).collect();
        let row = coupling.w_marginal();
        let states = n_cap + 1;
        let brute = (0u64..(1 << states))
            .into_par_iter()
            .map(|mask| -> Result<f64> {
                let subset: Vec<u32> = (0..states).filter(|b| mask & (1 << b) != 0).collect();
                let sol = solve_poisson_stein(lambda, &subset, n_cap, n_cap as usize + 4)?;
                let mut s = 0.0;
                for (k, &pk) in row.iter().enumerate() {
                    let w = ints[k] as usize;
                    let up = c_scale * kernel.p(k, 1) - lambda;
                    let down = c_scale * kernel.p(k, -1) - w as f64;
                    s += pk * (up * sol.f(w + 1) - down * sol.f(w));
                }
                Ok(s.abs())
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        max_oracle_gap = max_oracle_gap.max((fast - brute).abs());
    }
    checks.push(VerifyCheck::at_most(
        "kappa_exhaustive_oracle_gap",
        max_oracle_gap,
        1e-10,
        2,
    ));

    // --- δ-inequality closure ------------------------------------------------
    let mut rng = SplitMix64(config.seed ^ 0xdead_beef_u64);
    let mut worst_closure = f64::NEG_INFINITY;
    for _ in 0..100 {
        let p = 10.0 * rng.next_f64();
        let q = 10.0 * rng.next_f64();
        let closed = bounds::solve_delta_inequality(p, q)?;
        let s = 0.5 * (q + (q * q + 4.0 * p).sqrt());
        worst_closure = worst_closure.max(s * s - closed);
    }
    checks.push(VerifyCheck::at_most(
        "delta_inequality_closure_gap",
        worst_closure,
        1e-9,
        100,
    ));

    let all_pass = checks.iter().all(|c| c.pass);
    let mut report = Json::obj();
    report.push("kind", Json::Str("verify".into()));
    report.push("config", config.echo_json());
    report.push("models", Json::Int(zoo.entries.len() as i64));
    report.push("stein_certificates", Json::Arr(cert_details));
    report.push(
        "checks",
        Json::Arr(checks.iter().map(|c| c.json()).collect()),
    );
    report.push("all_pass", Json::Bool(all_pass));
    Ok(RunOutcome {
        report,
        csv_rows,
        coupling_json: None,
        all_pass,
    })
}

fn telescope_check_abs(coupling: &ExactPairCoupling, ad: &DiscreteAntiderivative) -> Result<f64> {
    Ok(crate::stein_poisson::telescope_check(coupling, ad)?.abs())
}

/// Human-readable verification summary (one line per check).
pub fn verify_summary_table(outcome: &RunOutcome) -> String {
    let mut out = String::new();
    if let Json::Obj(entries) = &outcome.report {
        if let Some((_, Json::Arr(checks))) = entries.iter().find(|(k, _)| k == "checks") {
            for check in checks {
                if let Json::Obj(fields) = check {
                    let get = |name: &str| {
                        fields
                            .iter()
                            .find(|(k, _)| k == name)
                            .map(|(_, v)| v.clone())
                    };
                    let name = match get("name") {
                        Some(Json::Str(s)) => s,
                        _ => continue,
                    };
                    let pass = matches!(get("pass"), Some(Json::Bool(true)));
                    let value = match get("value") {
                        Some(Json::Num(v)) => v,
                        _ => f64::NAN,
                    };
                    let threshold = match get("threshold") {
                        Some(Json::Num(v)) => v,
                        _ => f64::NAN,
                    };
                    let kind = match get("kind") {
                        Some(Json::Str(s)) if s == "at_least" => ">=",
                        _ => "<=",
                    };
                    out.push_str(&format!(
                        "{:<40} {:>14.3e} {kind} {:>10.1e}  {}\n",
                        name,
                        value,
                        threshold,
                        if pass { "PASS" } else { "FAIL" }
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_model_validates_names_and_params() {
        let mut params = BTreeMap::new();
        params.insert("n".to_string(), 8.0);
        assert!(build_model("rademacher", &params).is_ok());
        assert!(build_model("unknown", &params).is_err());
        params.insert("bogus".to_string(), 1.0);
        assert!(build_model("rademacher", &params).is_err());
        let mut fractional = BTreeMap::new();
        fractional.insert("n".to_string(), 8.5);
        assert!(build_model("rademacher", &fractional).is_err());
    }

    #[test]
    fn run_normal_rademacher_16() {
        let mut config = ExperimentConfig::new(Mode::Normal);
        config.model = Some("rademacher".into());
        config.params.insert("n".into(), 16.0);
        let outcome = run_normal(&config).unwrap();
        assert!(outcome.all_pass);
        let text = outcome.report_string().unwrap();
        assert!(
            text.contains("\"bound_bounded_jump\": 7.0000000000000"),
            "{text}"
        );
        assert_eq!(outcome.csv_rows.len(), 1);
    }

    #[test]
    fn run_normal_rejects_undersized_model() {
        let mut config = ExperimentConfig::new(Mode::Normal);
        config.model = Some("rademacher".into());
        config.params.insert("n".into(), 1.0);
        assert!(run_normal(&config).is_err());
    }

    #[test]
    fn run_normal_biased_cycle_reports_positive_er2() {
        let mut config = ExperimentConfig::new(Mode::Normal);
        config.model = Some("biased_cycle".into());
        config.params.insert("m".into(), 12.0);
        config.params.insert("drift".into(), 0.2);
        let outcome = run_normal(&config).unwrap();
        assert!(outcome.all_pass);
        let text = outcome.report_string().unwrap();
        let er2_field = text.lines().find(|l| l.contains("\"er2\"")).unwrap().trim();
        assert!(!er2_field.contains("0.0000000000000000e0"), "{er2_field}");
    }

    #[test]
    fn run_poisson_immigration_death() {
        let mut config = ExperimentConfig::new(Mode::Poisson);
        config.model = Some("immigration_death".into());
        config.params.insert("lambda".into(), 1.0);
        config.params.insert("N".into(), 12.0);
        let outcome = run_poisson(&config).unwrap();
        assert!(outcome.all_pass);
        assert_eq!(outcome.csv_rows.len(), 1);
        assert!(outcome.csv_rows[0].starts_with("immigration_death,12,"));
    }

    #[test]
    fn run_poisson_fixed_points_has_vanishing_rho() {
        let mut config = ExperimentConfig::new(Mode::Poisson);
        config.model = Some("fixed_points".into());
        config.params.insert("n".into(), 6.0);
        let outcome = run_poisson(&config).unwrap();
        assert!(outcome.all_pass);
        let text = outcome.report_string().unwrap();
        let rho_line = text.lines().find(|l| l.contains("rho_exact")).unwrap();
        let value: f64 = rho_line
            .trim()
            .trim_start_matches("\"rho_exact\": ")
            .trim_end_matches(',')
            .parse()
            .unwrap();
        assert!(value.abs() < 1e-12, "{rho_line}");
    }

    #[test]
    fn run_poisson_rejects_normal_only_models() {
        let mut config = ExperimentConfig::new(Mode::Poisson);
        config.model = Some("biased_cycle".into());
        config.params.insert("m".into(), 12.0);
        config.params.insert("drift".into(), 0.1);
        assert!(run_poisson(&config).is_err());
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let mut config = ExperimentConfig::new(Mode::Normal);
        config.model = Some("rademacher".into());
        config.params.insert("n".into(), 8.0);
        let a = run_normal(&config).unwrap().report_string().unwrap();
        let b = run_normal(&config).unwrap().report_string().unwrap();
        assert_eq!(a, b);
    }
}
