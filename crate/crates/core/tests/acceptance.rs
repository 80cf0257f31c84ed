//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints a PASS/FAIL line; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polarity_core::ctransform::{c_transform, QuadraticCost};
use polarity_core::divergences::{polar_fenchel_young, swap_check_with, Variant};
use polarity_core::legendre::{
    conjugate_bruteforce, conjugate_fast_1d, conjugate_smooth, epigraph_body,
    verify_legendre_polarity, ConjugateReference, Grid, HalfSquaredNorm, Quadratic1d,
    SampledFunction, SmoothConvex,
};
use polarity_core::linalg::condition_number;
use polarity_core::polarity::{involution_check, polar_boundary_envelope, ConvexBody, CostMatrix};
use polarity_core::projective::ProjectivePoint;
use polarity_core::transforms::{
    decompose_s, decompose_t, decomposition_report, relate_t_s, verify_thm_s, verify_thm_t,
};

/// One measured quantity and the bound it must stay under.
struct Measure {
    what: String,
    value: f64,
    bound: f64,
}

impl Measure {
    fn new(what: impl Into<String>, value: f64, bound: f64) -> Self {
        Measure {
            what: what.into(),
            value,
            bound,
        }
    }

    fn info(what: impl Into<String>, value: f64) -> Self {
        Measure::new(what, value, f64::INFINITY)
    }

    fn ok(&self) -> bool {
        self.value <= self.bound
    }

    fn describe(&self) -> String {
        if self.bound.is_infinite() {
            format!("{} {:.3e} (not gated)", self.what, self.value)
        } else {
            format!("{} {:.3e} <= {:.0e}", self.what, self.value, self.bound)
        }
    }
}

type Outcome = Result<Vec<Measure>, String>;

type Criterion = (&'static str, fn() -> Outcome);

type Case<'a> = (&'a dyn SmoothConvex, &'a dyn Fn(f64) -> f64);

fn err<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> String + '_ {
    move |e| format!("{context}: {e}")
}

fn half_sq() -> HalfSquaredNorm {
    HalfSquaredNorm::new(1)
}

fn shifted_quadratic() -> Quadratic1d {
    Quadratic1d {
        a: 1.0,
        b: 1.0,
        c: 3.0,
    }
}

fn shifted_conjugate(eta: f64) -> f64 {
    (eta * eta - 2.0 * eta - 11.0) / 4.0
}

fn sample(f: &dyn SmoothConvex, lo: f64, hi: f64, count: usize) -> SampledFunction {
    SampledFunction::sample_with_gradient(
        Grid::linspace(lo, hi, count).unwrap(),
        |t| f.value(t),
        |t| f.gradient(t),
    )
    .unwrap()
}

fn parabola_body(n: usize, lo: f64, hi: f64, per_axis: usize) -> ConvexBody {
    let grid = Grid::uniform(n, lo, hi, per_axis).unwrap();
    let f = SampledFunction::sample_with_gradient(
        grid,
        |t| 0.5 * t.iter().map(|x| x * x).sum::<f64>(),
        |t| t.to_vec(),
    )
    .unwrap();
    epigraph_body(&f).unwrap()
}

fn criterion_1() -> Outcome {
    let q = half_sq();
    let f = sample(&q, -5.0, 5.0, 10_001);
    // dual nodes deliberately off the primal grid, away from the slope range ends
    let eta = Grid::linspace(-4.9, 4.9, 997).map_err(err("dual grid"))?;
    let brute = conjugate_bruteforce(&f, &eta).map_err(err("bruteforce"))?;
    let mut worst_brute = 0.0_f64;
    let mut worst_smooth = 0.0_f64;
    for j in 0..eta.len() {
        let e = eta.point(j);
        let exact = 0.5 * e[0] * e[0];
        worst_brute = worst_brute.max((brute.dual.value(j) - exact).abs());
        let s = conjugate_smooth(&q, e, &[0.0]).map_err(err("smooth"))?;
        worst_smooth = worst_smooth.max((s.value - exact).abs());
    }
    Ok(vec![
        Measure::new("bruteforce max |Q* - Q|", worst_brute, 1e-6),
        Measure::new("smooth max |Q* - Q|", worst_smooth, 1e-10),
    ])
}

fn criterion_2() -> Outcome {
    let f = shifted_quadratic();
    // the maximizers (eta - 1) / 2 are nodes of this grid
    let samples = sample(&f, -3.0, 2.0, 10_001);
    let etas: Vec<f64> = (-2..=3).map(f64::from).collect();
    let grid = Grid::line(etas.clone()).map_err(err("dual grid"))?;
    let brute = conjugate_bruteforce(&samples, &grid).map_err(err("bruteforce"))?;
    let mut vs_oracle = 0.0_f64;
    let mut vs_closed = 0.0_f64;
    for (j, &e) in etas.iter().enumerate() {
        let s = conjugate_smooth(&f, &[e], &[0.0]).map_err(err("smooth"))?;
        vs_oracle = vs_oracle.max((s.value - brute.dual.value(j)).abs());
        vs_closed = vs_closed.max((s.value - shifted_conjugate(e)).abs());
    }
    Ok(vec![
        Measure::new("smooth vs bruteforce", vs_oracle, 1e-8),
        Measure::new("smooth vs (eta^2 - 2 eta - 11)/4", vs_closed, 1e-8),
    ])
}

fn criterion_3() -> Outcome {
    let q = half_sq();
    let f = shifted_quadratic();
    let on_q =
        verify_legendre_polarity(&sample(&q, -3.0, 3.0, 200), ConjugateReference::Smooth(&q))
            .map_err(err("Q"))?;
    let on_f =
        verify_legendre_polarity(&sample(&f, -3.0, 2.0, 200), ConjugateReference::Smooth(&f))
            .map_err(err("F"))?;
    if on_q.compared != 200 || on_f.compared != 200 {
        return Err(format!(
            "compared {} and {} of 200 samples",
            on_q.compared, on_f.compared
        ));
    }
    Ok(vec![
        Measure::new("Q discrepancy", on_q.max_discrepancy, 1e-9),
        Measure::new("F discrepancy", on_f.max_discrepancy, 1e-9),
    ])
}

fn random_symmetric_cost(seed: u64) -> CostMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let c = &a + a.transpose();
        if condition_number(&c) <= 1e3 {
            return CostMatrix::from_matrix(c).expect("well conditioned");
        }
    }
}

fn criterion_4() -> Outcome {
    let epi_q = parabola_body(1, -2.0, 2.0, 200);
    let disk = ConvexBody::unit_disk(200);
    let mut costs = vec![("C_L".to_string(), CostMatrix::legendre(1))];
    costs.extend((1..=20).map(|s| (format!("seed {s}"), random_symmetric_cost(s))));
    let mut worst = (0.0_f64, String::new());
    for (name, c) in &costs {
        for (body_name, body) in [("epi Q", &epi_q), ("unit disk", &disk)] {
            let r = involution_check(c, body).map_err(err(&format!("{name}, {body_name}")))?;
            if r.compared == 0 {
                return Err(format!("{name}, {body_name}: nothing compared"));
            }
            if r.max_discrepancy > worst.0 || worst.1.is_empty() {
                worst = (r.max_discrepancy, format!("{name}, {body_name}"));
            }
        }
    }
    Ok(vec![Measure::new(
        format!("max round-trip discrepancy ({})", worst.1),
        worst.0,
        1e-5,
    )])
}

/// `U diag(s) V^T` with random orthogonal factors and singular values spread
/// geometrically from 1 down to `1 / kappa`.
fn with_condition(rng: &mut ChaCha8Rng, d: usize, kappa: f64) -> DMatrix<f64> {
    let mut orthogonal = || {
        DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))
            .qr()
            .q()
    };
    let (u, v) = (orthogonal(), orthogonal());
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| {
        kappa.powf(-(i as f64) / (d - 1) as f64)
    }));
    u * s * v.transpose()
}

/// Factorization residual for matrices built with condition number 1e6
/// exactly. Rounding `M_T` to doubles alone costs about `eps * cond`, so this
/// is reported without a bound.
fn stress_near_limit(rng: &mut ChaCha8Rng) -> Result<Measure, String> {
    let mut worst = 0.0_f64;
    for k in 0..20 {
        let c =
            CostMatrix::from_matrix(with_condition(rng, 3 + k % 2, 1e6)).map_err(err("cost"))?;
        let rep = decomposition_report(&c).map_err(err("decomposition"))?;
        worst = worst.max(rep.residuals.t_factorization);
    }
    Ok(Measure::info("factorization residual at cond 1e6", worst))
}

fn criterion_5() -> Outcome {
    let bodies = [
        parabola_body(1, -2.0, 2.0, 101),
        parabola_body(2, -1.0, 1.0, 11),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut decomp, mut relate, mut thm_t, mut thm_s) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut accepted = 0;
    let mut worst_kappa = 0.0_f64;
    while accepted < 100 {
        let n = 1 + accepted % 2;
        let m = DMatrix::from_fn(n + 2, n + 2, |_, _| rng.gen_range(-1.0..1.0));
        let kappa = condition_number(&m);
        if kappa > 1e6 {
            continue;
        }
        worst_kappa = worst_kappa.max(kappa);
        let c = CostMatrix::from_matrix(m).map_err(err("cost"))?;
        let rep = decomposition_report(&c).map_err(err("decomposition"))?;
        decomp = decomp
            .max(rep.residuals.t_factorization)
            .max(rep.residuals.s_factorization);
        let r = relate_t_s(
            &decompose_t(&c).map_err(err("M_T"))?,
            &decompose_s(&c).map_err(err("M_S"))?,
        )
        .map_err(err("relate"))?;
        relate = relate.max(r.residual_t).max(r.residual_s);
        let body = &bodies[n - 1];
        let t = verify_thm_t(&c, body).map_err(err(&format!("theorem T #{accepted}")))?;
        let s = verify_thm_s(&c, body).map_err(err(&format!("theorem S #{accepted}")))?;
        if t.compared == 0 || s.compared == 0 {
            return Err(format!("matrix #{accepted}: nothing compared"));
        }
        thm_t = thm_t.max(t.max_discrepancy);
        thm_s = thm_s.max(s.max_discrepancy);
        accepted += 1;
    }
    Ok(vec![
        Measure::new(
            format!("factorization residual (cond up to {worst_kappa:.1e})"),
            decomp,
            1e-12,
        ),
        Measure::new("M_T/M_S relation residual", relate, 1e-10),
        Measure::new("theorem T on epi Q", thm_t, 1e-8),
        Measure::new("theorem S on epi Q", thm_s, 1e-8),
        stress_near_limit(&mut rng)?,
    ])
}

fn criterion_6() -> Outcome {
    let f = sample(&half_sq(), -10.0, 10.0, 400);
    let env = polar_boundary_envelope(
        &CostMatrix::parabola_to_sphere(1),
        &epigraph_body(&f).unwrap(),
    )
    .map_err(err("envelope"))?;
    if env.points.len() != 400 {
        return Err(format!("{} of 400 samples mapped", env.points.len()));
    }
    let worst = env
        .points
        .iter()
        .map(|p| {
            let b = p.point();
            let x = b.coords();
            (x[0] * x[0] + x[1] * x[1] - x[2] * x[2]).abs()
        })
        .fold(0.0, f64::max);
    Ok(vec![Measure::new(
        "max |x^2 + y^2 - lambda^2|",
        worst,
        1e-9,
    )])
}

fn criterion_7() -> Outcome {
    let q = half_sq();
    let f = shifted_quadratic();
    let q_conjugate = |e: f64| 0.5 * e * e;
    let cases: [Case; 2] = [(&q, &q_conjugate), (&f, &shifted_conjugate)];
    let thetas = polarity_core::legendre::linspace(-3.0, 3.0, 100);
    let etas = polarity_core::legendre::linspace(-4.0, 4.0, 100);
    let (mut worst, mut lowest) = (0.0_f64, f64::INFINITY);
    for (func, conj) in cases {
        for &t in &thetas {
            let ft = func.value(&[t]);
            let a = ProjectivePoint::new(vec![t, ft, 1.0]).unwrap();
            for &e in &etas {
                let b = ProjectivePoint::new(vec![e, conj(e), 1.0]).unwrap();
                let d = polar_fenchel_young(&a, &b).map_err(err("polar FY"))?;
                let fy = ft + conj(e) - t * e;
                worst = worst.max((d - fy).abs());
                lowest = lowest.min(d);
            }
        }
    }
    Ok(vec![
        Measure::new("max |polar FY - FY|", worst, 1e-10),
        Measure::new("-min polar FY", -lowest, 1e-9),
    ])
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let mut point = || {
            let w = rng.gen_range(0.2..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let v: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0) * w).collect();
            ProjectivePoint::new(vec![v[0], v[1], w])
                .unwrap()
                .normalized()
        };
        let (a, b) = (point(), point());
        for variant in [Variant::Sqrt, Variant::Paper] {
            let r = swap_check_with(&a, &b, variant).map_err(err("swap"))?;
            worst = worst.max(r.max_relative_error());
        }
    }
    Ok(vec![Measure::new("max relative swap error", worst, 1e-12)])
}

/// A convex sample set: increasing slopes on a sorted, irregular grid.
fn random_convex(rng: &mut ChaCha8Rng, count: usize) -> SampledFunction {
    let mut theta: Vec<f64> = (0..count).map(|_| rng.gen_range(-4.0..4.0)).collect();
    theta.sort_by(f64::total_cmp);
    theta.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut slopes: Vec<f64> = (1..theta.len()).map(|_| rng.gen_range(-6.0..6.0)).collect();
    slopes.sort_by(f64::total_cmp);
    let mut values = vec![rng.gen_range(-2.0..2.0)];
    for (k, s) in slopes.iter().enumerate() {
        values.push(values[k] + s * (theta[k + 1] - theta[k]));
    }
    SampledFunction::from_1d(theta, values).unwrap()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut fast_gap = 0.0_f64;
    let mut c_gap = 0.0_f64;
    let cost = QuadraticCost::negative_inner(1);
    for _ in 0..200 {
        let count = rng.gen_range(2..400);
        let f = random_convex(&mut rng, count);
        let mut eta: Vec<f64> = (0..rng.gen_range(1..300))
            .map(|_| rng.gen_range(-8.0..8.0))
            .collect();
        eta.sort_by(f64::total_cmp);
        eta.dedup();
        let grid = Grid::line(eta).map_err(err("dual grid"))?;
        let brute = conjugate_bruteforce(&f, &grid).map_err(err("bruteforce"))?;
        let fast = conjugate_fast_1d(&f, &grid).map_err(err("fast"))?;
        let ct = c_transform(&f, &cost, &grid).map_err(err("c-transform"))?;
        for j in 0..grid.len() {
            let b = brute.dual.value(j);
            let scale = b.abs().max(1.0);
            fast_gap = fast_gap.max((fast.dual.value(j) - b).abs() / scale);
            c_gap = c_gap.max((ct.values.value(j) + b).abs() / scale);
        }
    }
    Ok(vec![
        Measure::new("fast vs bruteforce", fast_gap, 1e-12),
        Measure::new("c-transform vs -bruteforce", c_gap, 1e-12),
    ])
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let theta = polarity_core::legendre::linspace(-3.0, 3.0, 301);
    let eta = Grid::linspace(-10.0, 10.0, 401).map_err(err("dual grid"))?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        // F1 convex, F2 = F1 + a nonnegative convex bump
        let (a, b, c) = (
            rng.gen_range(0.0..2.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let k = rng.gen_range(0.1..1.0);
        let (p, s) = (rng.gen_range(0.0..1.5), rng.gen_range(-2.0..2.0));
        let lift = rng.gen_range(0.0..1.0);
        let f1 = |t: f64| a * t * t + b * t + c + k * (t - s).abs();
        let f2 = |t: f64| f1(t) + p * (t - s) * (t - s) + lift;
        let s1 = SampledFunction::from_1d(theta.clone(), theta.iter().map(|&t| f1(t)).collect())
            .unwrap();
        let s2 = SampledFunction::from_1d(theta.clone(), theta.iter().map(|&t| f2(t)).collect())
            .unwrap();
        let c1 = conjugate_bruteforce(&s1, &eta).map_err(err("F1"))?;
        let c2 = conjugate_bruteforce(&s2, &eta).map_err(err("F2"))?;
        for j in 0..eta.len() {
            worst = worst.max(c2.dual.value(j) - c1.dual.value(j));
        }
    }
    Ok(vec![Measure::new("max (L F2 - L F1)", worst, 1e-9)])
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("self-dual paraboloid", criterion_1),
        ("conjugate of theta^2 + theta + 3", criterion_2),
        ("Legendre polarity realizes conjugation", criterion_3),
        ("polarity involution", criterion_4),
        ("deformed Legendre factorizations", criterion_5),
        ("parabola to circle", criterion_6),
        ("polar Fenchel-Young consistency", criterion_7),
        ("swap identities", criterion_8),
        ("oracle equivalence", criterion_9),
        ("order reversal", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(measures) => {
                let pass = measures.iter().all(Measure::ok);
                let detail: Vec<String> = measures.iter().map(Measure::describe).collect();
                println!(
                    "criterion {:>2} {}: {} [{}] ({secs:.2}s)",
                    k + 1,
                    name,
                    if pass { "PASS" } else { "FAIL" },
                    detail.join("; ")
                );
                if !pass {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("criterion {:>2} {}: FAIL [{e}] ({secs:.2}s)", k + 1, name);
                failed += 1;
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
