//! Dispatcher behind the `nclp` binary: reads one JSON problem, runs the
//! owning routine, and produces a versioned JSON report plus a short text
//! summary.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use nclp::fock::{self, CircularSystem, ModularWord};
use nclp::hp::{self, BilinearForm, TensorElement};
use nclp::json::{exponent, exponent_opt, matrix, matrix_grid, matrix_list};
use nclp::linalg::{conj_exponent, ComplexMatrix};
use nclp::rng::Budget;
use nclp::schatten::{schatten_norm, LpParams};
use nclp::schur::{self, MultiplierMask};
use nclp::verify::{self, ChainConfig, Status, VerificationReport};
use nclp::vv::{self, LinearMapOnSubspace, VvElement};

pub const SCHEMA_VERSION: u32 = 1;

/// Relative primal/dual gap above which an h_p run counts as unfinished.
pub const HP_GAP_LIMIT: f64 = 0.02;

#[derive(Debug, Parser)]
#[command(name = "nclp", version, about = "Norms, certificates and inequality checks for matrix L_p spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Schatten p-norm of a matrix.
    Schatten,
    /// Norm of a block matrix in S_p^n[S_p].
    Vvnorm,
    /// Column and row norms of a finite sequence.
    Colrow,
    /// Norm of a sequence in S_p[C_q].
    Spcq,
    /// Primal and dual h_p norm of a tensor.
    Hp,
    /// Row and column Hilbert-space factorizations of a bilinear form.
    Gamma,
    /// Both sides of the Khintchine inequality for circular coefficients.
    Khintchine,
    /// Vacuum moments of words in the circular system.
    Moments,
    /// Grothendieck-type chain for a bilinear form.
    VerifyGro,
    /// Little-Grothendieck chain for a map into C_q.
    VerifyLg,
    /// Schur multiplier norm estimate with upper witnesses.
    Schur,
    /// Row/column splitting and rank-one domination of a symbol.
    Decompose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Schatten => "schatten",
            Command::Vvnorm => "vvnorm",
            Command::Colrow => "colrow",
            Command::Spcq => "spcq",
            Command::Hp => "hp",
            Command::Gamma => "gamma",
            Command::Khintchine => "khintchine",
            Command::Moments => "moments",
            Command::VerifyGro => "verify-gro",
            Command::VerifyLg => "verify-lg",
            Command::Schur => "schur",
            Command::Decompose => "decompose",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, global = true, default_value_t = 200)]
    pub iterations: usize,
    /// Highest matrix level for amplification estimates.
    #[arg(long, global = true, default_value_t = 2)]
    pub levels: usize,
    /// Fock truncation degree; overrides the system's `max_degree`.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    #[arg(long = "in", global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Resolved run parameters, embedded in every report. The input and output
/// paths are left out so that a report depends only on what was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerance: f64,
    pub restarts: usize,
    pub iterations: usize,
    pub levels: usize,
    pub max_degree: Option<usize>,
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> anyhow::Result<Self> {
        let cfg = Self {
            seed: a.seed,
            tolerance: a.tol,
            restarts: a.restarts,
            iterations: a.iterations,
            levels: a.levels,
            max_degree: a.degree,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            bail!("--tol must lie in (0, 1e-2], got {}", self.tolerance);
        }
        for (name, v) in [("restarts", self.restarts), ("iterations", self.iterations), ("levels", self.levels)] {
            if v == 0 {
                bail!("--{name} must be positive");
            }
        }
        if self.max_degree == Some(0) {
            bail!("--degree must be positive");
        }
        Ok(())
    }

    pub fn budget(&self) -> Budget {
        Budget::new(self.restarts, self.iterations, self.seed)
    }

    fn chain(&self) -> ChainConfig {
        ChainConfig { budget: self.budget(), tol: self.tolerance, levels: self.levels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// A computation finished (no inequality to decide).
    Complete,
    Pass,
    /// The search budget ran out before a non-rigorous check could be settled.
    Inconclusive,
    /// A rigorous inequality failed: a bug or a wrong input contract.
    Fail,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Complete | Outcome::Pass => 0,
            Outcome::Inconclusive => 2,
            Outcome::Fail => 3,
        }
    }
}

impl From<Status> for Outcome {
    fn from(s: Status) -> Self {
        match s {
            Status::Pass => Outcome::Pass,
            Status::Inconclusive => Outcome::Inconclusive,
            Status::Fail => Outcome::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: Command,
    pub config: RunConfig,
    pub outcome: Outcome,
    pub result: Value,
}

pub struct Run {
    pub report: Report,
    pub summary: Vec<String>,
}

/// Parses `text` as `T`, reporting the failing field path and position.
pub fn parse_input<T: DeserializeOwned>(text: &str) -> anyhow::Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path == "." || path == "?" { String::new() } else { format!(" at `{path}`") };
        anyhow!("malformed input{at}: {inner}")
    })?;
    de.end().map_err(|e| anyhow!("malformed input: {e}"))?;
    Ok(value)
}

fn ensure_finite(items: &[(&str, f64)]) -> anyhow::Result<()> {
    for (name, v) in items {
        if !v.is_finite() {
            bail!("numeric overflow: `{name}` is {v}");
        }
    }
    Ok(())
}

struct Output {
    outcome: Outcome,
    result: Value,
    summary: Vec<String>,
}

impl Output {
    fn complete(result: Value, summary: Vec<String>) -> Self {
        Self { outcome: Outcome::Complete, result, summary }
    }
}

fn to_value<T: Serialize>(v: &T) -> anyhow::Result<Value> {
    serde_json::to_value(v).context("cannot serialize result")
}

pub fn run(command: Command, input: &str, config: &RunConfig) -> anyhow::Result<Run> {
    config.validate()?;
    let out = match command {
        Command::Schatten => schatten_cmd(input)?,
        Command::Vvnorm => vvnorm_cmd(input)?,
        Command::Colrow => colrow_cmd(input)?,
        Command::Spcq => spcq_cmd(input, config)?,
        Command::Hp => hp_cmd(input, config)?,
        Command::Gamma => gamma_cmd(input, config)?,
        Command::Khintchine => khintchine_cmd(input, config)?,
        Command::Moments => moments_cmd(input, config)?,
        Command::VerifyGro => verify_gro_cmd(input, config)?,
        Command::VerifyLg => verify_lg_cmd(input, config)?,
        Command::Schur => schur_cmd(input, config)?,
        Command::Decompose => decompose_cmd(input, config)?,
    };
    let mut summary = vec![format!("{}: {:?}", command.name(), out.outcome).to_lowercase()];
    summary.extend(out.summary);
    Ok(Run {
        report: Report { schema_version: SCHEMA_VERSION, command, config: config.clone(), outcome: out.outcome, result: out.result },
        summary,
    })
}

pub fn render(report: &Report) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(report).context("cannot serialize report")?;
    s.push('\n');
    Ok(s)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchattenInput {
    #[serde(with = "matrix")]
    matrix: ComplexMatrix,
    #[serde(with = "exponent")]
    p: f64,
}

fn schatten_cmd(input: &str) -> anyhow::Result<Output> {
    let i: SchattenInput = parse_input(input)?;
    let value = schatten_norm(&i.matrix, i.p)?;
    ensure_finite(&[("value", value)])?;
    Ok(Output::complete(json!({ "value": value }), vec![format!("‖x‖_{} = {value}", i.p)]))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VvInput {
    #[serde(with = "matrix_grid")]
    blocks: Vec<Vec<ComplexMatrix>>,
    #[serde(with = "exponent")]
    p: f64,
}

fn vvnorm_cmd(input: &str) -> anyhow::Result<Output> {
    let i: VvInput = parse_input(input)?;
    let x = VvElement::new(i.blocks)?;
    let value = vv::vv_norm(&x, i.p)?;
    ensure_finite(&[("value", value)])?;
    Ok(Output::complete(
        json!({ "value": value, "level": x.level() }),
        vec![format!("‖x‖ in S_{}^{}[S_{}] = {value}", i.p, x.level(), i.p)],
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceInput {
    #[serde(with = "matrix_list")]
    xs: Vec<ComplexMatrix>,
    #[serde(with = "exponent")]
    p: f64,
    #[serde(default)]
    theta: Option<f64>,
}

fn colrow_cmd(input: &str) -> anyhow::Result<Output> {
    let i: SequenceInput = parse_input(input)?;
    let column = vv::column_norm(&i.xs, i.p)?;
    let row = vv::row_norm(&i.xs, i.p)?;
    ensure_finite(&[("column", column), ("row", row)])?;
    Ok(Output::complete(
        json!({ "column": column, "row": row }),
        vec![format!("‖(Σ x_k* x_k)^½‖_p = {column}"), format!("‖(Σ x_k x_k*)^½‖_p = {row}")],
    ))
}

fn spcq_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: SequenceInput = parse_input(input)?;
    let theta = i.theta.ok_or_else(|| anyhow!("field `theta` is required"))?;
    let params = LpParams::with_theta(i.p, theta)?;
    let res = vv::spcq_norm(&i.xs, params, cfg.budget())?;
    ensure_finite(&[("value", res.value)])?;
    let q = params.q().expect("θ given");
    let line = format!("‖Σ x_k ⊗ e_k‖ in S_{}[C_{q}] = {}", i.p, res.value);
    Ok(Output::complete(to_value(&res)?, vec![line]))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HpInput {
    tensor: TensorElement,
    #[serde(with = "exponent")]
    p: f64,
    #[serde(default, with = "exponent_opt")]
    q: Option<f64>,
}

fn hp_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: HpInput = parse_input(input)?;
    let q = i.q.unwrap_or(i.p);
    let (primal, factorization) = hp::hp_norm_primal(&i.tensor, i.p, q, cfg.budget())?;
    let (dual, f, g) = hp::hp_norm_dual(&i.tensor, i.p, q, cfg.budget())?;
    ensure_finite(&[("primal", primal), ("dual", dual)])?;
    let gap = if primal > 0.0 { (primal - dual) / primal } else { 0.0 };
    // Weak duality makes dual ≤ primal rigorous; a large gap only means the
    // searches stopped early.
    let outcome = if dual > primal * (1.0 + cfg.tolerance) + 1e-12 {
        Outcome::Fail
    } else if gap > HP_GAP_LIMIT {
        Outcome::Inconclusive
    } else {
        Outcome::Pass
    };
    let result = json!({
        "primal": primal,
        "dual": dual,
        "relative_gap": gap,
        "factorization": to_value(&factorization)?,
        "f": to_value(&f)?,
        "g": to_value(&g)?,
    });
    Ok(Output {
        outcome,
        result,
        summary: vec![format!("dual ≤ h_p ≤ primal: {dual} ≤ h_p ≤ {primal} (gap {gap:.2e})")],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FormInput {
    form: BilinearForm,
    #[serde(with = "exponent")]
    p: f64,
}

fn gamma_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: FormInput = parse_input(input)?;
    let row = hp::gamma_rp(&i.form, i.p, cfg.budget())?;
    let column = hp::gamma_cp(&i.form, i.p, cfg.budget())?;
    ensure_finite(&[("row.value", row.value), ("column.value", column.value)])?;
    let summary = vec![
        format!("γ through R_p: {} (residual {:.1e})", row.value, row.residual),
        format!("γ through C_p: {} (residual {:.1e})", column.value, column.residual),
    ];
    Ok(Output::complete(json!({ "row": to_value(&row)?, "column": to_value(&column)? }), summary))
}

fn system_for(mut sys: CircularSystem, cfg: &RunConfig) -> anyhow::Result<CircularSystem> {
    if let Some(n) = cfg.max_degree {
        sys = sys.with_degree(n)?;
    }
    Ok(sys)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KhintchineInput {
    #[serde(with = "fock::system_json")]
    system: CircularSystem,
    #[serde(with = "matrix_list")]
    xs: Vec<ComplexMatrix>,
    p: usize,
}

fn khintchine_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: KhintchineInput = parse_input(input)?;
    let sys = system_for(i.system, cfg)?;
    let s = fock::khintchine_sides(&i.xs, i.p, &sys)?;
    ensure_finite(&[("lhs", s.lhs), ("mid", s.mid), ("mid_operator_path", s.mid_operator_path)])?;
    let agree = (s.mid - s.mid_operator_path).abs() <= cfg.tolerance.max(1e-10) * (1.0 + s.mid);
    let lower = s.lhs <= s.mid * (1.0 + cfg.tolerance) + 1e-12;
    let outcome = if agree && lower { Outcome::Pass } else { Outcome::Fail };
    let summary = vec![
        format!("square-function bracket ≤ ‖Σ x_k ⊗ g_k‖_p: {} ≤ {} [{}]", s.lhs, s.mid, verdict(lower)),
        format!("word expansion = operator path: {} vs {} [{}]", s.mid, s.mid_operator_path, verdict(agree)),
    ];
    let mut result = to_value(&s)?;
    result["p"] = json!(i.p);
    result["system"] = json!({ "lambdas": sys.lambdas, "theta": sys.theta, "max_degree": sys.space.max_degree() });
    Ok(Output { outcome, result, summary })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentsInput {
    #[serde(with = "fock::system_json")]
    system: CircularSystem,
    #[serde(default)]
    word: Option<String>,
    #[serde(default)]
    words: Vec<String>,
}

fn moments_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: MomentsInput = parse_input(input)?;
    let sys = system_for(i.system, cfg)?;
    let words: Vec<String> = i.word.into_iter().chain(i.words).collect();
    if words.is_empty() {
        bail!("give a `word` or a list of `words`");
    }
    let mut rows = Vec::with_capacity(words.len());
    let mut summary = Vec::with_capacity(words.len());
    for text in &words {
        let w: ModularWord = text.parse()?;
        let m = fock::vacuum_moment(&w, &sys)?;
        ensure_finite(&[("re", m.re), ("im", m.im)])?;
        summary.push(format!("⟨Ω, {w} Ω⟩ = {} {:+}i", m.re, m.im));
        rows.push(json!({ "word": w.to_string(), "re": m.re, "im": m.im }));
    }
    let value = if rows.len() == 1 { rows[0].clone() } else { Value::Null };
    let mut result = json!({ "moments": rows });
    if !value.is_null() {
        result["value"] = value["re"].clone();
    }
    Ok(Output::complete(result, summary))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn chain_summary(rep: &VerificationReport) -> Vec<String> {
    let mut out: Vec<String> = rep
        .constants
        .iter()
        .map(|c| format!("{} = {} ({:?} estimate{})", c.name, c.value, c.bound, if c.note.is_empty() { String::new() } else { format!("; {}", c.note) }).to_string())
        .collect();
    for l in &rep.links {
        let tag = match (l.passed, l.rigorous) {
            (true, _) => "pass",
            (false, true) => "FAIL",
            (false, false) => "inconclusive",
        };
        out.push(format!("{}: {} ≤ {} [{tag}]", l.name, l.lhs, l.rhs));
    }
    out.push(format!("witness violation over {} samples: {:.2e}", rep.samples, rep.witness_violation));
    out
}

fn chain_output(rep: VerificationReport) -> anyhow::Result<Output> {
    let mut nums: Vec<(&str, f64)> = rep.constants.iter().map(|c| (c.name.as_str(), c.value)).collect();
    nums.push(("witness_violation", rep.witness_violation));
    ensure_finite(&nums)?;
    let summary = chain_summary(&rep);
    Ok(Output { outcome: rep.status.into(), result: to_value(&rep)?, summary })
}

fn verify_gro_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: FormInput = parse_input(input)?;
    chain_output(verify::verify_g_chain(&i.form, i.p, &cfg.chain())?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapInput {
    map: LinearMapOnSubspace,
    #[serde(with = "exponent")]
    p: f64,
    #[serde(default)]
    theta: Option<f64>,
}

fn verify_lg_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: MapInput = parse_input(input)?;
    let theta = match (i.theta, &i.map.codomain) {
        (Some(t), _) => t,
        (None, vv::Codomain::ColumnQ { theta, .. }) => *theta,
        (None, _) => bail!("field `theta` is required unless the codomain is `column_q`"),
    };
    let params = LpParams::with_theta(i.p, theta)?;
    chain_output(verify::verify_lg_chain(&i.map, params, &cfg.chain())?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SchurInput {
    mask: MultiplierMask,
    #[serde(with = "exponent")]
    p: f64,
    #[serde(with = "exponent")]
    q: f64,
}

fn schur_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: SchurInput = parse_input(input)?;
    let budget = cfg.budget();
    let est = schur::schur_norm(&i.mask, i.p, i.q, budget)?;
    let r = schur::multiplier_exponent(i.p, i.q);
    let dec = schur::ell_r_linf_decompose(&i.mask, r, budget)?;
    let levels = schur::schur_cb_lower(&i.mask, i.p, i.q, cfg.levels.min(3), budget)?;
    let extension = if i.mask.support().is_some() {
        Some(schur::extension_experiment(&i.mask, i.p, i.q, budget)?)
    } else {
        None
    };
    ensure_finite(&[("lower", est.value), ("upper", dec.objective)])?;
    // ‖φ1‖_{ℓ_r(ℓ_∞)} + ‖ᵗφ2‖_{ℓ_r(ℓ_∞)} bounds the norm with constant 1.
    let ok = est.value <= dec.objective * (1.0 + cfg.tolerance) + 1e-12;
    let mut summary = vec![
        format!("lower estimate ≤ splitting bound: {} ≤ {} [{}]", est.value, dec.objective, verdict(ok)),
        format!("amplified lower estimates: {levels:?}"),
    ];
    if let Some(e) = &extension {
        summary.push(format!("zero extension: objective {} / restricted lower {} = {}", e.extension_objective, e.restricted_lower, e.ratio));
    }
    let result = json!({
        "p": exp_value(i.p),
        "q": exp_value(i.q),
        "r": exp_value(r),
        "lower": to_value(&est)?,
        "decomposition": to_value(&dec)?,
        "cb_lower_levels": levels,
        "extension": to_value(&extension)?,
    });
    Ok(Output { outcome: if ok { Outcome::Pass } else { Outcome::Fail }, result, summary })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecomposeInput {
    mask: MultiplierMask,
    /// Exponent of the ℓ_r(ℓ_∞) splitting; defaults to pq/(p−q), with q = p'
    /// when only p is given.
    #[serde(default, with = "exponent_opt")]
    r: Option<f64>,
    #[serde(default, with = "exponent_opt")]
    p: Option<f64>,
    #[serde(default, with = "exponent_opt")]
    q: Option<f64>,
}

fn decompose_cmd(input: &str, cfg: &RunConfig) -> anyhow::Result<Output> {
    let i: DecomposeInput = parse_input(input)?;
    let r = match (i.r, i.p, i.q) {
        (Some(r), _, _) => r,
        (None, Some(p), Some(q)) => schur::multiplier_exponent(p, q),
        // With p alone the target is S_p → S_{p'}.
        (None, Some(p), None) => schur::multiplier_exponent(p, conj_exponent(p)),
        _ => bail!("give `r`, `p`, or both `p` and `q`"),
    };
    let budget = cfg.budget();
    let dec = schur::ell_r_linf_decompose(&i.mask, r, budget)?;
    // Rank-one domination uses the conjugate of p/2 when p is known.
    let r_dom = match i.p {
        Some(p) if p > 2.0 => conj_exponent(p / 2.0),
        _ => r,
    };
    let dom = schur::rank_one_dominate(&i.mask, r_dom, budget)?;
    ensure_finite(&[("decomposition.objective", dec.objective), ("domination.objective", dom.objective)])?;
    let summary = vec![
        format!("‖φ1‖_ℓ{r}(ℓ∞) + ‖ᵗφ2‖_ℓ{r}(ℓ∞) = {}", dec.objective),
        format!("‖α‖_{}·‖β‖_{} with |φ_ij| ≤ α_i β_j: {}", 2.0 * r_dom, 2.0 * r_dom, dom.objective),
    ];
    let result = json!({
        "r": exp_value(r),
        "decomposition": to_value(&dec)?,
        "domination_r": exp_value(r_dom),
        "domination": to_value(&dom)?,
    });
    Ok(Output::complete(result, summary))
}

fn exp_value(p: f64) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        json!(p)
    }
}
