//! Command-line orchestration: scene ingestion, checker runs, report files.

pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use varifold_lab_core::counterexample::{sine_growth, FanDiagnostic};
use varifold_lab_core::monotonicity::smallness;
use varifold_lab_core::{
    build_line_fan, build_scene, check_monotonicity, check_tangent_cone_decay, detect_planes,
    extract_graph, generate_sequence, generate_sequence_exact, holder_certificate, nested_partition,
    verify_properties, ConstantParams, ConstantsTable, Error, MonotoneFn, MonotonicityOptions,
    Outcome, Plane, QuadratureVarifold, Report, SceneSpec,
};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "varifold-lab", version, about = "Certified checks on quadrature varifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scene spec or varifold JSON.
    #[arg(long, global = true)]
    pub scene: Option<PathBuf>,
    #[arg(long, global = true, default_value = "varifold-lab-out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, global = true)]
    pub eps5: Option<f64>,
    #[arg(long, global = true)]
    pub eps6: Option<f64>,
    #[arg(long, global = true)]
    pub eps7: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, default_value_t = 3)]
    pub depth: usize,
    /// Integrability exponent.
    #[arg(long, global = true, default_value_t = 2.0)]
    pub q: f64,
    /// Number of sheets `Q`.
    #[arg(long = "big-q", global = true, default_value_t = 1)]
    pub big_q: u32,
    /// Overrides the resolution of every scene primitive.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Comma-separated center point; the origin by default.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub radius: f64,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Build a scene spec into a varifold.
    SceneBuild,
    /// Both monotonicity inequalities on a radius grid.
    CheckMonotonicity,
    /// Nested partition ladder at scales `λ^k r`.
    PartitionRun,
    /// Hölder certificate on top of a corollary ladder.
    HolderCertify {
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Q-valued graph over a base plane.
    GraphExtract {
        /// Base line angle for planar scenes; coordinate plane otherwise.
        #[arg(long, allow_hyphen_values = true)]
        angle: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        lip: f64,
        #[arg(long, default_value_t = 32)]
        cellcount: usize,
    },
    /// Affine planes with multiplicities of a null-curvature scene.
    DetectPlanes,
    /// First-variation decay and blow-ups at the center.
    TangentCone {
        #[arg(long, allow_hyphen_values = true)]
        angle: Option<f64>,
        #[arg(long = "cone-c", default_value_t = 10.0)]
        cone_c: f64,
    },
    /// The nested-set counterexample and its two scenes.
    Counterexample {
        #[arg(long, default_value = "id")]
        f: String,
        #[arg(long, default_value = "id")]
        g: String,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Also run the rational-arithmetic generator.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 0.5)]
        amplitude: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SceneBuild => "scene-build",
            Command::CheckMonotonicity => "check-monotonicity",
            Command::PartitionRun => "partition-run",
            Command::HolderCertify { .. } => "holder-certify",
            Command::GraphExtract { .. } => "graph-extract",
            Command::DetectPlanes => "detect-planes",
            Command::TangentCone { .. } => "tangent-cone",
            Command::Counterexample { .. } => "counterexample",
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub document: Value,
    pub files: Vec<PathBuf>,
}

impl RunOutput {
    pub fn outcome(&self) -> Outcome {
        self.report.outcome()
    }
}

/// Exit status for errors: premise-type failures raised as errors map to 2.
pub fn error_exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::NotNullCurvature(_)
            | Error::LevelPremise { .. }
            | Error::NonIntegerMultiplicity(_)
            | Error::EmptyGraph(_)
            | Error::SeparationViolated(_)
            | Error::ValueSetsTooClose { .. },
        ) => Outcome::PremiseViolated.exit_code(),
        Some(Error::PartitionLemmaViolated(_) | Error::NestingViolated(_)) => {
            Outcome::ConclusionViolated.exit_code()
        }
        _ => 1,
    }
}

/// Reads a scene spec (anything with `primitives`) or a serialized varifold.
pub fn load_varifold(path: &Path, resolution: Option<usize>) -> Result<QuadratureVarifold> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let probe: Value = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))?;
    if probe.get("primitives").is_some() {
        let mut spec = SceneSpec::from_json(&text).with_context(|| format!("scene {}", path.display()))?;
        if let Some(res) = resolution {
            spec.primitives.iter_mut().for_each(|p| p.resolution = res);
        }
        Ok(build_scene(&spec)?)
    } else {
        Ok(QuadratureVarifold::from_json(&text).with_context(|| format!("varifold {}", path.display()))?)
    }
}

fn table(common: &Common, v: &QuadratureVarifold) -> Result<ConstantsTable> {
    let mut params = ConstantParams::new(v.n, v.m, common.q, common.big_q, common.gamma);
    for (slot, value, name) in [
        (&mut params.eps5, common.eps5, "eps5"),
        (&mut params.eps6, common.eps6, "eps6"),
        (&mut params.eps7, common.eps7, "eps7"),
    ] {
        if let Some(x) = value {
            if !(x > 0.0) {
                bail!("--{name} must be positive, got {x}");
            }
            *slot = x;
        }
    }
    Ok(ConstantsTable::build(params)?)
}

fn center(common: &Common, n: usize) -> Result<Vec<f64>> {
    match &common.center {
        None => Ok(vec![0.0; n]),
        Some(c) if c.len() == n => Ok(c.clone()),
        Some(c) => bail!("--center has {} coordinates, scene is in R^{n}", c.len()),
    }
}

fn base_plane(v: &QuadratureVarifold, angle: Option<f64>) -> Result<Plane> {
    match angle {
        Some(t) if v.n == 2 && v.m == 1 => Ok(Plane::line_2d(t)),
        Some(_) => bail!("--angle applies to planar curve scenes only"),
        None => Ok(Plane::coordinate(v.n, v.m)?),
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path);
        Ok(())
    }
}

fn require_scene(common: &Common) -> Result<&Path> {
    common
        .scene
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("--scene is required for this command"))
}

fn with_field(v: QuadratureVarifold) -> QuadratureVarifold {
    if v.atoms.iter().all(|a| a.f.is_some() && a.df.is_some()) {
        v
    } else {
        v.with_tangent_field()
    }
}

/// Runs one subcommand and writes `report.json` plus its artifacts.
pub fn run(cli: &Cli) -> Result<RunOutput> {
    let common = &cli.common;
    let mut out = Writer::new(&common.out)?;
    let mut report = Report::new();
    let mut constants = Value::Null;
    let result: Value = match &cli.command {
        Command::SceneBuild => {
            let v = load_varifold(require_scene(common)?, common.resolution)?;
            report.conclusion(varifold_lab_core::CheckRecord::flag("scene has atoms", !v.is_empty()));
            out.put("varifold.json", &v.to_json()?)?;
            if v.n == 2 {
                out.put("scene.svg", &svg::render_scene_svg(&v)?)?;
            }
            json!({"atoms": v.len(), "mass": v.total_mass(), "cell": v.cell_size()})
        }
        Command::CheckMonotonicity => {
            let v = load_varifold(require_scene(common)?, common.resolution)?;
            let a = center(common, v.n)?;
            let delta = smallness(&v, &a, common.radius, common.q)?;
            let rep = check_monotonicity(&v, &a, common.radius, common.q, delta, &MonotonicityOptions::default())?;
            out.put("monotonicity.csv", &rep.to_csv())?;
            report = rep.report.clone();
            json!({
                "delta": delta,
                "residual": rep.residual,
                "equality_gap": rep.equality_gap,
                "radii": rep.radii.len(),
            })
        }
        Command::PartitionRun => {
            let v = with_field(load_varifold(require_scene(common)?, common.resolution)?);
            let t = table(common, &v)?;
            let a = center(common, v.n)?;
            let lambda = common.lambda.unwrap_or(0.9 * t.partition_lambda_bound());
            let ladder = nested_partition(&v, &a, common.radius, lambda, common.depth, &t)?;
            out.put("ladder.json", &ladder.to_json()?)?;
            let mut csv = String::from("k,radius,tau,components,pi_prime,max_diameter,theorem_bound\n");
            for l in &ladder.levels {
                let diam = l.components.iter().map(|c| c.value_support_diameter).fold(0.0, f64::max);
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    l.k,
                    l.radius,
                    l.tau,
                    l.components.len(),
                    l.pi_prime(),
                    diam,
                    l.theorem_bound
                ));
            }
            out.put("partition.csv", &csv)?;
            if v.n == 2 {
                out.put("partition.svg", &svg::render_ladder_svg(&v, &ladder)?)?;
            }
            report = ladder.report.clone();
            constants = serde_json::to_value(&t)?;
            json!({
                "lambda": lambda,
                "k0": ladder.k0,
                "components": ladder.levels.iter().map(|l| l.components.len()).collect::<Vec<_>>(),
                "pi_prime": ladder.levels.iter().map(|l| l.pi_prime()).collect::<Vec<_>>(),
            })
        }
        Command::HolderCertify { sigma } => {
            let v = with_field(load_varifold(require_scene(common)?, common.resolution)?);
            let t = table(common, &v)?;
            let a = center(common, v.n)?;
            let lambda = common.lambda.unwrap_or(0.9 * t.corollary_lambda_bound());
            let ladder = nested_partition(&v, &a, common.radius, lambda, common.depth, &t)?;
            let cert = holder_certificate(&v, &ladder, *sigma, &t)?;
            out.put("holder.csv", &cert.to_csv(&v))?;
            out.put("ladder.json", &ladder.to_json()?)?;
            report = cert.report.clone();
            constants = serde_json::to_value(&t)?;
            json!({
                "lambda": lambda,
                "sigma": cert.sigma,
                "c1": cert.c1,
                "k0": cert.k0,
                "atoms_checked": cert.atoms_checked,
                "violations": cert.violations,
                "worst_ratio": cert.worst_ratio,
            })
        }
        Command::GraphExtract { angle, lip, cellcount } => {
            let v = load_varifold(require_scene(common)?, common.resolution)?;
            let t = table(common, &v)?;
            let a = center(common, v.n)?;
            let p = base_plane(&v, *angle)?;
            let g = extract_graph(&v, &p, &a, common.radius, *lip, *cellcount, &t)?;
            out.put("graph.json", &g.graph.to_json()?)?;
            report = g.report.clone();
            constants = serde_json::to_value(&t)?;
            json!({
                "q": g.graph.q,
                "lip_estimate": g.graph.lip_estimate,
                "matching_exact": g.graph.matching_exact,
                "cylinder_mass": g.cylinder_mass,
                "graph_mass": g.graph_mass,
                "unrepresented_mass": g.unrepresented_mass,
            })
        }
        Command::DetectPlanes => {
            let v = load_varifold(require_scene(common)?, common.resolution)?;
            let a = center(common, v.n)?;
            let dec = detect_planes(&v, &a, common.radius)?;
            report.conclusion(varifold_lab_core::CheckRecord::eq(
                "residual mass",
                dec.residual_mass,
                0.0,
                0.0,
            ));
            out.put("planes.json", &serde_json::to_string_pretty(&dec)?)?;
            serde_json::to_value(&dec)?
        }
        Command::TangentCone { angle, cone_c } => {
            let v = load_varifold(require_scene(common)?, common.resolution)?;
            let a = center(common, v.n)?;
            let p = base_plane(&v, *angle)?;
            let rep = check_tangent_cone_decay(&v, &a, common.radius, &p, *cone_c, common.q)?;
            out.put("decay.csv", &rep.to_csv())?;
            report = rep.report.clone();
            json!({"c_prime": rep.c_prime, "limit_density": rep.limit_density, "radii": rep.radii.len()})
        }
        Command::Counterexample {
            f,
            g,
            eps,
            exact,
            amplitude,
        } => counterexample(common, &mut out, &mut report, f, g, *eps, *exact, *amplitude)?,
    };

    let document = json!({
        "version": REPORT_VERSION,
        "command": cli.command.name(),
        "constants": constants,
        "premises": report.premises,
        "conclusions": report.conclusions,
        "pass": report.passed(),
        "result": result,
    });
    out.put("report.json", &serde_json::to_string_pretty(&document)?)?;
    Ok(RunOutput {
        report,
        document,
        files: out.files,
    })
}

#[allow(clippy::too_many_arguments)]
fn counterexample(
    common: &Common,
    out: &mut Writer,
    report: &mut Report,
    f: &str,
    g: &str,
    eps: f64,
    exact: bool,
    amplitude: f64,
) -> Result<Value> {
    use varifold_lab_core::CheckRecord;
    let (f, g) = (MonotoneFn::parse(f)?, MonotoneFn::parse(g)?);
    let seq = generate_sequence(eps, f, g, common.depth)?;
    let props = verify_properties(&seq)?;
    report.absorb("", props.report.clone());
    out.put("sequence.json", &seq.to_json()?)?;

    let mut exact_triples = Value::Null;
    if exact {
        let e = num_rational::BigRational::from_float(eps)
            .ok_or_else(|| anyhow::anyhow!("eps {eps} is not finite"))?;
        let ex = generate_sequence_exact(&e, g, common.depth)?;
        let agree = ex.len() == seq.triples.len() && ex.iter().zip(&seq.triples).all(|(a, b)| a.to_f64() == *b);
        report.conclusion(CheckRecord::flag("exact and float sequences agree", agree));
        if f == MonotoneFn::Identity && g == MonotoneFn::Identity && eps >= 0.5 {
            let closed = ex.iter().enumerate().all(|(k, t)| {
                let i = k as i32 + 1;
                let pow = |e: i32| num_rational::BigRational::from_integer(2.into()).pow(-e);
                t.p == pow(2 * i - 1) && t.rho == pow(2 * i) && t.r == pow(2 * i - 2)
            });
            report.conclusion(CheckRecord::flag("closed forms P_i, rho_i, R_i", closed));
        }
        exact_triples = ex
            .iter()
            .map(|t| json!({"r": t.r.to_string(), "p": t.p.to_string(), "rho": t.rho.to_string()}))
            .collect();
    }

    let res = common.resolution.unwrap_or(4096);
    let (_, fan): (_, FanDiagnostic) = build_line_fan(&seq, seq.depth, res)?;
    report.conclusion(CheckRecord::eq(
        "line fan density = number of lines",
        fan.density,
        fan.lines as f64,
        1e-6,
    ));
    let mut depths: Vec<usize> = [5, 10, 20].into_iter().filter(|&d| d <= seq.depth).collect();
    if depths.is_empty() {
        depths.push(seq.depth);
    }
    let growth = sine_growth(&seq, &depths, common.q, amplitude, 64)?;
    report.conclusion(CheckRecord::flag(
        "sine curvature seminorm strictly increases with depth",
        growth.windows(2).all(|w| w[1].1 > w[0].1),
    ));
    Ok(json!({
        "depth": seq.depth,
        "truncated": seq.truncated,
        "triples": seq.triples,
        "exact_triples": exact_triples,
        "certified_size": props.certified_size,
        "failures": props.failures,
        "fan": fan,
        "sine_growth": growth,
    }))
}
