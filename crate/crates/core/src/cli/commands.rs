use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    emit, ConjugateArgs, CtransformArgs, DecomposeArgs, DivergenceArgs, Failure, Outcome,
    PolarArgs, Settings,
};
use crate::ctransform::{c_transform, cost_to_polarity_matrix, QuadraticCost};
use crate::divergences::{
    divergence_report, divergence_report_points, polar_fenchel_young,
    polar_total_fenchel_young_with, swap_check_with, Potential,
};
use crate::error::{check_dim, Error, Result};
use crate::io;
use crate::legendre::{
    auto_dual_grid, biconjugate, conjugate as conjugate_on, epigraph_body, linspace, ConjugatePair,
    Grid, SampledFunction,
};
use crate::plot::{Plot, Series};
use crate::polarity::{
    involution_check, polar_boundary_envelope, ConvexBody, CostMatrix, InvolutionReport,
};
use crate::projective::ProjectivePoint;
use crate::transforms::{
    decomposition_report, verify_thm_s, verify_thm_t, DecompositionReport, TheoremCheck,
};

const FENCHEL_YOUNG_TOL: f64 = 1e-9;
const ENVELOPE_TOL: f64 = 1e-9;
const DECOMPOSITION_TOL: f64 = 1e-10;
const THEOREM_TOL: f64 = 1e-8;
const SWAP_TOL: f64 = 1e-12;

/// `min:max:count` with the same range on every axis; `auto` gives `None`.
pub(crate) fn parse_grid_spec(spec: &str, dim: usize) -> Result<Option<Grid>> {
    if spec.trim() == "auto" {
        return Ok(None);
    }
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let bad = || Error::InvalidInput(format!("grid spec {spec:?} is not auto or min:max:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() || (count > 1 && lo >= hi) {
        return Err(bad());
    }
    Grid::uniform(dim, lo, hi, count).map(Some)
}

fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("{what}: cannot parse {t:?}")))
        })
        .collect()
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub(crate) fn load_body(path: &Path) -> Result<ConvexBody> {
    if is_csv(path) {
        epigraph_body(&io::read_sampled_function(path)?)
    } else {
        io::read_json(path)
    }
}

fn load_cost_matrix(path: Option<&Path>, n: usize) -> Result<CostMatrix> {
    let c = match path {
        Some(p) => io::read_json::<CostMatrix>(p)?,
        None => CostMatrix::legendre(n),
    };
    check_dim(n, c.n())?;
    Ok(c)
}

fn curve(f: &SampledFunction) -> Vec<(f64, f64)> {
    (0..f.len()).map(|i| (f.theta(i)[0], f.value(i))).collect()
}

pub(crate) fn write_svg(path: Option<&Path>, plot: &Plot) -> Result<()> {
    match path {
        Some(p) => io::write_atomic(p, plot.to_svg().as_bytes()),
        None => Ok(()),
    }
}

pub(crate) fn conjugate(args: &ConjugateArgs, s: &Settings) -> Outcome {
    let f = io::read_sampled_function(&args.input)?;
    let eta = match s.eta_grid.as_deref() {
        Some(spec) => parse_grid_spec(spec, f.dim())?,
        None => None,
    };
    let eta = match eta {
        Some(g) => g,
        None => auto_dual_grid(&f)?,
    };
    let star = conjugate_on(&f, &eta, s.fast)?;
    emit(args.output.as_deref(), &io::conjugate_csv(&star)?)?;
    if let Some(path) = &args.biconjugate {
        io::write_sampled_function(path, &biconjugate(&f)?)?;
    }
    if let Some(path) = &args.fy_gap {
        io::write_atomic(path, io::fenchel_young_gap_csv(&f, &star.dual)?.as_bytes())?;
    }
    if args.svg.is_some() {
        if f.dim() == 1 {
            let mut plot = Plot::new("F (blue) and its conjugate (red)");
            plot.add(Series::new(curve(&f)));
            plot.add(Series::new(curve(&star.dual)));
            write_svg(args.svg.as_deref(), &plot)?;
        } else {
            eprintln!("polarity: --svg is only drawn for one-dimensional input");
        }
    }
    let pair = ConjugatePair {
        primal: f,
        dual: star.dual,
    };
    let gap = pair.min_fenchel_young_gap();
    let tol = s.tol(FENCHEL_YOUNG_TOL);
    if gap < -tol {
        return Err(Failure::Assertion(format!(
            "Fenchel-Young gap {gap:e} below -{tol:e}"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct PolarReport {
    n: usize,
    points: usize,
    skipped: usize,
    ideal: usize,
    degenerate: usize,
    max_residual: f64,
    involution: Option<InvolutionReport>,
}

pub(crate) fn polar(args: &PolarArgs, s: &Settings) -> Outcome {
    let body = load_body(&args.input)?;
    let c = load_cost_matrix(args.cost_matrix.as_deref(), body.n())?;
    let env = polar_boundary_envelope(&c, &body)?;
    emit(args.output.as_deref(), &io::envelope_csv(&env, body.n())?)?;
    let residual = env.max_residual(&c, &body);
    if let Some(path) = &args.report {
        let report = PolarReport {
            n: body.n(),
            points: env.points.len(),
            skipped: env.skipped.len(),
            ideal: env.ideal_count(),
            degenerate: env.degenerate_count(),
            max_residual: residual,
            involution: involution_check(&c, &body).ok(),
        };
        io::write_json(path, &report)?;
    }
    if args.svg.is_some() && body.n() == 1 {
        let mut plot = Plot::new("boundary (blue) and polar boundary (red)");
        plot.add(Series::new(
            body.samples()
                .iter()
                .filter_map(|p| p.dehomogenize().ok())
                .map(|x| (x[0], x[1]))
                .collect(),
        ));
        plot.add(Series::new(
            env.points
                .iter()
                .map(|p| match p.dehomogenize() {
                    Some(x) => (x[0], x[1]),
                    None => (f64::NAN, f64::NAN),
                })
                .collect(),
        ));
        write_svg(args.svg.as_deref(), &plot)?;
    }
    let tol = s.tol(ENVELOPE_TOL);
    if residual > tol {
        return Err(Failure::Assertion(format!(
            "envelope residual {residual:e} above {tol:e}"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct DecomposeOutput {
    #[serde(flatten)]
    report: DecompositionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem_t: Option<TheoremCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem_s: Option<TheoremCheck>,
}

pub(crate) fn decompose(args: &DecomposeArgs, s: &Settings) -> Outcome {
    let c: CostMatrix = io::read_json(&args.cost_matrix)?;
    let report = decomposition_report(&c)?;
    let (theorem_t, theorem_s) = match &args.input {
        Some(path) => {
            let body = load_body(path)?;
            check_dim(c.n(), body.n())?;
            (
                Some(verify_thm_t(&c, &body)?),
                Some(verify_thm_s(&c, &body)?),
            )
        }
        None => (None, None),
    };
    let r = &report.residuals;
    let worst = r
        .t_factorization
        .max(r.s_factorization)
        .max(r.t_s.residual_t)
        .max(r.t_s.residual_s);
    let out = DecomposeOutput {
        report,
        theorem_t,
        theorem_s,
    };
    emit(args.output.as_deref(), &io::to_json_string(&out)?)?;
    let tol = s.tol(DECOMPOSITION_TOL);
    if worst > tol {
        return Err(Failure::Assertion(format!(
            "factorization residual {worst:e} above {tol:e}"
        )));
    }
    let thm_tol = s.tol(THEOREM_TOL);
    for check in out.theorem_t.iter().chain(&out.theorem_s) {
        if check.max_discrepancy > thm_tol {
            return Err(Failure::Assertion(format!(
                "pointwise factorization check {:e} above {thm_tol:e}",
                check.max_discrepancy
            )));
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointPair {
    a: Vec<f64>,
    b: Vec<f64>,
}

pub(crate) fn divergence(args: &DivergenceArgs, s: &Settings) -> Outcome {
    if let Some(path) = &args.points {
        let pair: PointPair = io::read_json(path)?;
        let a = ProjectivePoint::new(pair.a)?;
        let b = ProjectivePoint::new(pair.b)?;
        let report = divergence_report_points(&a, &b)?;
        emit(args.output.as_deref(), &io::to_json_string(&report)?)?;
        let swap = swap_check_with(&a, &b, s.variant)?;
        let tol = s.tol(SWAP_TOL);
        if !swap.holds(tol) {
            return Err(Failure::Assertion(format!(
                "swap identity off by {:e} (tolerance {tol:e})",
                swap.max_relative_error()
            )));
        }
        return Ok(());
    }
    let input = args.input.as_ref().ok_or_else(|| {
        Error::InvalidInput(
            "divergence needs --points, or --input with --theta1/--theta2 or --dual".into(),
        )
    })?;
    let f = io::read_sampled_function(input)?;
    if let Some(dual_path) = &args.dual {
        let g = io::read_conjugate_csv(std::fs::File::open(dual_path).map_err(Error::from)?)?;
        check_dim(f.dim(), g.dim())?;
        return Ok(emit(args.output.as_deref(), &pairwise_csv(&f, &g, s)?)?);
    }
    let (Some(t1), Some(t2)) = (&args.theta1, &args.theta2) else {
        return Err(Error::InvalidInput("--theta1 and --theta2 are both required".into()).into());
    };
    let theta1 = parse_vector(t1, "--theta1")?;
    let theta2 = parse_vector(t2, "--theta2")?;
    let report = divergence_report(Potential::Sampled(&f), &theta1, &theta2)?;
    emit(args.output.as_deref(), &io::to_json_string(&report)?)?;
    Ok(())
}

fn pairwise_csv(f: &SampledFunction, g: &SampledFunction, s: &Settings) -> Result<String> {
    let n = f.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=n).map(|k| format!("theta_{k}")).collect();
    header.extend((1..=n).map(|k| format!("eta_{k}")));
    header.push("polar_fy".into());
    header.push(format!("total_{}", s.variant));
    w.write_record(&header)?;
    for i in (0..f.len()).filter(|&i| !f.is_infinite(i)) {
        let a = ProjectivePoint::lift_graph(f.theta(i), f.value(i));
        for j in (0..g.len()).filter(|&j| !g.is_infinite(j)) {
            let b = ProjectivePoint::lift_graph(g.theta(j), g.value(j));
            let mut row: Vec<String> = f.theta(i).iter().map(|x| format!("{x}")).collect();
            row.extend(g.theta(j).iter().map(|x| format!("{x}")));
            row.push(format!("{}", polar_fenchel_young(&a, &b)?));
            row.push(format!(
                "{}",
                polar_total_fenchel_young_with(&a, &b, s.variant)?
            ));
            w.write_record(&row)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub(crate) fn ctransform(args: &CtransformArgs, s: &Settings) -> Outcome {
    let f = io::read_sampled_function(&args.input)?;
    let cost: QuadraticCost = io::read_json(&args.cost)?;
    let eta = match s
        .eta_grid
        .as_deref()
        .map(|spec| parse_grid_spec(spec, f.dim()))
    {
        Some(Ok(Some(g))) => g,
        Some(Err(e)) => return Err(e.into()),
        Some(Ok(None)) | None => bounding_grid(&f)?,
    };
    let ct = c_transform(&f, &cost, &eta)?;
    emit(args.output.as_deref(), &io::sampled_csv(&ct.values, "eta")?)?;
    if let Some(path) = &args.polarity_matrix {
        io::write_json(path, &cost_to_polarity_matrix(&cost)?)?;
    }
    Ok(())
}

/// The input's bounding box with as many nodes per axis as the input has.
fn bounding_grid(f: &SampledFunction) -> Result<Grid> {
    let (lo, hi) = f.grid().bounds();
    let counts = match f.grid().shape() {
        Some(shape) => shape,
        None => {
            vec![(f.len() as f64).powf(1.0 / f.dim() as f64).round().max(1.0) as usize; f.dim()]
        }
    };
    let axes = (0..f.dim())
        .map(|k| {
            if hi[k] > lo[k] {
                linspace(lo[k], hi[k], counts[k].max(2))
            } else {
                vec![lo[k]]
            }
        })
        .collect();
    Grid::from_axes(axes)
}
