use std::path::PathBuf;

use serde::Serialize;

use super::commands::write_svg;
use super::{emit, DemoArgs, DemoName, Failure, Outcome, Settings};
use crate::error::{Error, Result};
use crate::io;
use crate::legendre::{
    epigraph_body, verify_legendre_polarity, ConjugateReference, Grid, HalfSquaredNorm,
    Quadratic1d, SampledFunction, SmoothConvex,
};
use crate::plot::{Plot, Series};
use crate::polarity::{polar_boundary_envelope, CostMatrix, Envelope};

const DEMO_TOL: f64 = 1e-9;

#[derive(Debug, Serialize)]
struct DemoReport {
    demo: &'static str,
    samples: usize,
    /// What `max_error` measures.
    quantity: &'static str,
    max_error: f64,
    tolerance: f64,
    passed: bool,
}

impl DemoName {
    fn as_str(self) -> &'static str {
        match self {
            DemoName::SelfDualParabola => "self-dual-parabola",
            DemoName::ParabolaToCircle => "parabola-to-circle",
            DemoName::Fig2Envelope => "fig2-envelope",
        }
    }
}

fn sample_smooth(f: &dyn SmoothConvex, lo: f64, hi: f64, count: usize) -> Result<SampledFunction> {
    SampledFunction::sample_with_gradient(
        Grid::linspace(lo, hi, count)?,
        |t| f.value(t),
        |t| f.gradient(t),
    )
}

fn image_points(env: &Envelope) -> Vec<(f64, f64)> {
    env.points
        .iter()
        .map(|p| match p.dehomogenize() {
            Some(x) => (x[0], x[1]),
            None => (f64::NAN, f64::NAN),
        })
        .collect()
}

struct Files {
    dir: Option<PathBuf>,
    name: &'static str,
}

impl Files {
    fn path(&self, suffix: &str) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{}{suffix}", self.name)))
    }

    fn write(&self, suffix: &str, text: &str) -> Result<()> {
        match self.path(suffix) {
            Some(p) => io::write_atomic(&p, text.as_bytes()),
            None => Ok(()),
        }
    }
}

pub(crate) fn run(args: &DemoArgs, s: &Settings) -> Outcome {
    let name = args
        .name
        .or(args.demo_flag)
        .ok_or_else(|| Error::InvalidInput("no demo name given".into()))?;
    if let Some(dir) = &args.output {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    if args.samples.is_some_and(|m| m < 5) {
        return Err(Error::InvalidInput("a demo needs at least 5 samples".into()).into());
    }
    let files = Files {
        dir: args.output.clone(),
        name: name.as_str(),
    };
    let tol = s.tol(DEMO_TOL);
    let report = match name {
        DemoName::SelfDualParabola => self_dual_parabola(args, &files, tol)?,
        DemoName::ParabolaToCircle => parabola_to_circle(args, &files, tol)?,
        DemoName::Fig2Envelope => fig2_envelope(args, &files, tol)?,
    };
    let json = io::to_json_string(&report)?;
    files.write(".json", &json)?;
    emit(None, &json)?;
    if !report.passed {
        return Err(Failure::Assertion(format!(
            "{}: {} {:e} above {:e}",
            report.demo, report.quantity, report.max_error, report.tolerance
        )));
    }
    Ok(())
}

fn self_dual_parabola(args: &DemoArgs, files: &Files, tol: f64) -> Result<DemoReport> {
    let count = args.samples.unwrap_or(200);
    let q = HalfSquaredNorm::new(1);
    let f = sample_smooth(&q, -3.0, 3.0, count)?;
    let check = verify_legendre_polarity(&f, ConjugateReference::Smooth(&q))?;
    let env = polar_boundary_envelope(&CostMatrix::legendre(1), &epigraph_body(&f)?)?;
    files.write(".csv", &io::envelope_csv(&env, 1)?)?;
    let mut plot = Plot::new("Q and its Legendre polar image").y_range(-0.5, 5.0);
    plot.add(
        Series::new((0..f.len()).map(|i| (f.theta(i)[0], f.value(i))).collect())
            .width(4.0)
            .opacity(0.4),
    );
    plot.add(Series::new(image_points(&env)));
    write_svg(args.svg.as_deref(), &plot)?;
    Ok(DemoReport {
        demo: files.name,
        samples: count,
        quantity: "max |y - Q*(eta)|",
        max_error: check.max_discrepancy,
        tolerance: tol,
        passed: check.max_discrepancy <= tol,
    })
}

fn parabola_to_circle(args: &DemoArgs, files: &Files, tol: f64) -> Result<DemoReport> {
    let count = args.samples.unwrap_or(400);
    let f = sample_smooth(&HalfSquaredNorm::new(1), -10.0, 10.0, count)?;
    let env = polar_boundary_envelope(&CostMatrix::parabola_to_sphere(1), &epigraph_body(&f)?)?;
    if let Some(s) = env.skipped.first() {
        return Err(Error::InvalidInput(format!(
            "sample {}: {}",
            s.index, s.error
        )));
    }
    let worst = env
        .points
        .iter()
        .map(|p| {
            let b = p.point();
            let (x, y, l) = (b.coords()[0], b.coords()[1], b.coords()[2]);
            (x * x + y * y - l * l).abs()
        })
        .fold(0.0, f64::max);
    files.write(".csv", &io::envelope_csv(&env, 1)?)?;
    let mut plot = Plot::new("epigraph of Q mapped onto the unit circle")
        .x_range(-1.2, 1.2)
        .y_range(-1.2, 1.2);
    plot.width = 480.0;
    let circle = (0..=256)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 256.0;
            (t.cos(), t.sin())
        })
        .collect();
    plot.add(Series::new(circle).color("#bbbbbb").width(4.0));
    plot.add(Series::new(image_points(&env)));
    write_svg(args.svg.as_deref(), &plot)?;
    Ok(DemoReport {
        demo: files.name,
        samples: count,
        quantity: "max |x^2 + y^2 - lambda^2|",
        max_error: worst,
        tolerance: tol,
        passed: worst <= tol,
    })
}

fn fig2_envelope(args: &DemoArgs, files: &Files, tol: f64) -> Result<DemoReport> {
    let count = args.samples.unwrap_or(41);
    let func = Quadratic1d {
        a: 1.0,
        b: 1.0,
        c: 3.0,
    };
    let f = sample_smooth(&func, -3.0, 2.0, count)?;
    let env = polar_boundary_envelope(&CostMatrix::legendre(1), &epigraph_body(&f)?)?;
    let conj = |eta: f64| (eta * eta - 2.0 * eta - 11.0) / 4.0;
    let worst = env
        .finite_points()
        .map(|(_, x)| (x[1] - conj(x[0])).abs())
        .fold(0.0, f64::max);

    // the polar line of (theta, F(theta), 1) is y = theta * eta - F(theta)
    let mut lines = String::from("theta,slope,intercept\n");
    for i in 0..f.len() {
        let t = f.theta(i)[0];
        lines.push_str(&format!("{t},{t},{}\n", -f.value(i)));
    }
    files.write("-lines.csv", &lines)?;
    files.write(".csv", &io::envelope_csv(&env, 1)?)?;

    let (e0, e1) = (-5.0, 5.0);
    let mut plot = Plot::new("polar lines of the graph of F and their envelope")
        .x_range(e0, e1)
        .y_range(-4.0, 7.0);
    for i in 0..f.len() {
        let t = f.theta(i)[0];
        let v = f.value(i);
        plot.add(
            Series::new(vec![(e0, t * e0 - v), (e1, t * e1 - v)])
                .color("#888888")
                .width(0.75),
        );
    }
    plot.add(Series::new(image_points(&env)).color("#d62728").width(2.5));
    write_svg(args.svg.as_deref(), &plot)?;
    Ok(DemoReport {
        demo: files.name,
        samples: count,
        quantity: "max |y - F*(eta)|",
        max_error: worst,
        tolerance: tol,
        passed: worst <= tol,
    })
}
