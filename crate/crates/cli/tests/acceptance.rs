//! Acceptance run: one PASS/FAIL line per criterion, at the pinned tolerances.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use bundle_interp::algebra::{Algebra, AlgebraVector, FactorKind, GroupElement, LieConnection, MetricSpec};
use bundle_interp::geometry::{elastic_group_with, BasePoint, CurveJet};
use bundle_interp::interpolator::{
    hermite_initial_guess, reconstruct_group, solution_report, solve, solve_with_guess, InterpolationProblem,
    Trajectory,
};
use bundle_interp::swimmer::coefficient_report;
use bundle_interp::validation::{clamped_spline_oracle, first_variation_check, identity_suite};
use bundle_interp_cli::problem::{load, LoadedProblem, SolverSection};
use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn shipped(name: &str) -> PathBuf {
    root().join("problems").join(name)
}

fn problem(name: &str) -> Result<LoadedProblem, String> {
    load(&shipped(name), &SolverSection::default()).map_err(|e| e.to_string())
}

fn solved(name: &str) -> Result<(LoadedProblem, Trajectory), String> {
    let p = problem(name)?;
    let t = solve(&p.problem, &p.config).map_err(|e| format!("{name}: {e}"))?;
    Ok((p, t))
}

fn euclid(x: &BasePoint) -> DVector<f64> {
    match x {
        BasePoint::Euclidean(v) => v.clone(),
        BasePoint::Group(_) => panic!("expected a Euclidean base point"),
    }
}

fn spline_error(p: &InterpolationProblem, t: &Trajectory) -> Result<f64, String> {
    let times: Vec<f64> = p.waypoints().iter().map(|w| w.t).collect();
    let values: Vec<DVector<f64>> = p.waypoints().iter().map(|w| euclid(&w.x)).collect();
    let spline = clamped_spline_oracle(&times, &values, p.v0(), p.vn()).map_err(|e| e.to_string())?;
    Ok(t.times
        .iter()
        .zip(&t.x)
        .map(|(&s, x)| (euclid(x) - spline.eval(s, 0)).amax())
        .fold(0.0, f64::max))
}

fn criterion_1() -> Outcome {
    let p = problem("flat.json")?;
    let start = Instant::now();
    let from_spline = solve(&p.problem, &p.config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    // The default start is the spline itself; a C¹ Hermite start makes the
    // solver do the work.
    let start = Instant::now();
    let guess = hermite_initial_guess(&p.problem, &p.config).map_err(|e| e.to_string())?;
    let from_hermite = solve_with_guess(&p.problem, &p.config, &guess).map_err(|e| e.to_string())?;
    let elapsed = elapsed.max(start.elapsed().as_secs_f64());
    let err = spline_error(&p.problem, &from_spline)?.max(spline_error(&p.problem, &from_hermite)?);
    Ok((
        err <= 1e-6 && elapsed < 10.0,
        format!(
            "max |x - spline| = {err:.2e} (tol 1e-6, Hermite start took {} Newton steps), slowest solve {elapsed:.2}s (limit 10s)",
            from_hermite.iterations
        ),
    ))
}

fn random_jet(alg: Algebra, rng: &mut impl Rng) -> CurveJet<AlgebraVector> {
    let mut v = || {
        let c: Vec<f64> = (0..alg.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        AlgebraVector::from_slice(alg, &c).unwrap()
    };
    CurveJet::new(v(), v(), v(), v())
}

fn block3(v: &AlgebraVector, off: usize) -> Vector3<f64> {
    Vector3::new(v.coords()[off], v.coords()[off + 1], v.coords()[off + 2])
}

fn criterion_2() -> Outcome {
    let conn = LieConnection::compact(Algebra::so3()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut err: f64 = 0.0;
    for _ in 0..1000 {
        let jet = random_jet(Algebra::so3(), &mut rng);
        let e = elastic_group_with(&conn, &jet);
        let expected = block3(&jet.d3, 0) + block3(&jet.value, 0).cross(&block3(&jet.d2, 0));
        err = err.max((block3(&e, 0) - expected).amax());
    }
    Ok((err <= 1e-12, format!("1000 jets, max error {err:.2e} (tol 1e-12)")))
}

fn criterion_3() -> Outcome {
    let id = MetricSpec::identity(6);
    let general = LieConnection::invariant(Algebra::se3(), &id).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut err: f64 = 0.0;
    for _ in 0..1000 {
        let x = random_jet(Algebra::se3(), &mut rng).value;
        let y = random_jet(Algebra::se3(), &mut rng).value;
        let (wx, wy, vy) = (block3(&x, 0), block3(&y, 0), block3(&y, 3));
        // With the identity metric ad*_X Y + ad*_Y X = (0, v_Y × ω_X + v_X × ω_Y),
        // which leaves ∇_X Y = (½ ω_X × ω_Y, ω_X × v_Y).
        let block = AlgebraVector::se3(wx.cross(&wy) * 0.5, wx.cross(&vy));
        err = err.max((general.cov(&x, &y) - block).amax());
    }
    Ok((err <= 1e-12, format!("1000 pairs, max error {err:.2e} (tol 1e-12)")))
}

fn criterion_4() -> Outcome {
    let r = coefficient_report(1000, 19);
    if r.printed_agrees {
        return Ok((true, format!("printed coefficients agree, max error {:.2e} (tol 1e-10)", r.printed_max_error)));
    }
    let doc = root().join("docs/swimmer_group_elastic_coefficients.md");
    let text = std::fs::read_to_string(&doc).unwrap_or_default();
    let committed = !text.is_empty() && r.differing_terms.iter().all(|d| text.contains(d.term));
    Ok((
        r.corrected_agrees && committed,
        format!(
            "printed max error {:.2e}; discrepancy report {} lists all {} differing terms: {}; corrected coefficients max error {:.2e} (tol 1e-10)",
            r.printed_max_error,
            doc.strip_prefix(root()).unwrap_or(&doc).display(),
            r.differing_terms.len(),
            committed,
            r.corrected_max_error
        ),
    ))
}

fn perturbed(t: &Trajectory, by: f64) -> Trajectory {
    let mut bad = t.clone();
    let n = t.xdot[0].len();
    bad.unknowns[(t.nodes_per_segment() / 2) * n] += by;
    bad
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["flat.json", "so3_geodesic.json", "swimmer.json"] {
        let (p, t) = solved(name)?;
        let good = first_variation_check(&t, &p.problem, 100, 1e-4, 5).map_err(|e| e.to_string())?;
        let bad = first_variation_check(&perturbed(&t, 0.05), &p.problem, 100, 1e-4, 5).map_err(|e| e.to_string())?;
        let ratio = bad.max_abs / bad.tolerance;
        ok &= good.passed && ratio >= 10.0;
        parts.push(format!(
            "{name}: {:.2e} <= {:.2e}, perturbed {:.0}x tol",
            good.max_abs, good.tolerance, ratio
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for name in ["flat.json", "so3_geodesic.json", "swimmer.json"] {
        let (p, t) = solved(name)?;
        let d = solution_report(&t, &p.problem).map_err(|e| e.to_string())?.constraint_defect;
        worst = worst.max(d);
        parts.push(format!("{name} {d:.2e}"));
    }
    Ok((worst <= 1e-8, format!("max defect {} (tol 1e-8)", parts.join(", "))))
}

fn criterion_7() -> Outcome {
    let (p, t) = solved("so3_geodesic.json")?;
    let omega = p.problem.v0().clone();
    let err = t.xdot.iter().map(|w| (w - &omega).amax()).fold(0.0, f64::max);
    Ok((err <= 1e-6, format!("max |omega(t) - omega_bar| = {err:.2e} (tol 1e-6)")))
}

fn criterion_8() -> Outcome {
    let xi = |t: f64| {
        AlgebraVector::se3(
            Vector3::new(t.sin(), 0.5 * (2.0 * t).cos(), 0.3 * t),
            Vector3::new(1.0, -t * t, 0.2 * (3.0 * t).sin()),
        )
    };
    let run = |steps: usize| -> Result<GroupElement, String> {
        let dt = 2.0 / steps as f64;
        let s: Vec<_> = (0..=2 * steps).map(|i| xi(i as f64 * dt / 2.0)).collect();
        let out = reconstruct_group(&GroupElement::identity(Algebra::se3()), &s, dt, 50).map_err(|e| e.to_string())?;
        Ok(out.last().unwrap().clone())
    };
    let reference = run(4096)?;
    let err = |n| -> Result<f64, String> { Ok((run(n)?.matrix() - reference.matrix()).amax()) };
    let (e1, e2, e3) = (err(16)?, err(32)?, err(64)?);
    let (o1, o2) = ((e1 / e2).log2(), (e2 / e3).log2());
    Ok((
        (o1 - 4.0).abs() <= 0.3 && (o2 - 4.0).abs() <= 0.3,
        format!("observed orders {o1:.3}, {o2:.3} (16/32/64 steps, target 4.0 +- 0.3)"),
    ))
}

fn criterion_9() -> Outcome {
    let so3xso3 = Algebra::product(&[FactorKind::So3, FactorKind::So3]).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for g in [Algebra::so3(), Algebra::se3(), so3xso3] {
        let spec = bundle_interp::geometry::BundleSpec::with_identity_metrics(
            bundle_interp::geometry::BaseKind::Euclidean(2),
            g,
        )
        .map_err(|e| e.to_string())?;
        let r = identity_suite(&spec, 9);
        let worst = r
            .checks
            .iter()
            .filter(|c| c.tolerance <= 1e-10)
            .map(|c| c.max_error)
            .fold(0.0, f64::max);
        let splitting = r.check("product_splitting").map(|c| c.passed).unwrap_or(false);
        ok &= r.passed && splitting;
        parts.push(format!("{g}: {} checks, worst algebraic {worst:.1e}", r.checks.len()));
    }
    Ok((ok, format!("{} (tol 1e-10, seed 9)", parts.join("; "))))
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_bundle-interp");
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["flat", "so3_geodesic", "swimmer"] {
        let problem = shipped(&format!("{name}.json"));
        let a = dir.path().join(format!("{name}.a.csv"));
        let b = dir.path().join(format!("{name}.b.csv"));
        let exit = |cmd: &mut Command| cmd.output().map(|o| o.status.code().unwrap_or(-1)).map_err(|e| e.to_string());
        let s1 = exit(Command::new(bin).arg("solve").arg(&problem).arg(&a))?;
        let s2 = exit(Command::new(bin).arg("solve").arg(&problem).arg(&b))?;
        let v = exit(Command::new(bin).arg("verify").arg(&a).arg(&problem))?;
        let same = std::fs::read(&a).ok() == std::fs::read(&b).ok();
        ok &= s1 == 0 && s2 == 0 && v == 0 && same;
        parts.push(format!("{name}: solve {s1}/{s2}, verify {v}, identical {same}"));
    }
    Ok((ok, parts.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("flat-space reduction matches the clamped spline", criterion_1),
        ("so(3) group elastic term reduces to the cross form", criterion_2),
        ("se(3) connection matches the block form", criterion_3),
        ("swimmer group elastic term vs generic expansion", criterion_4),
        ("extremality audit on the problem suite", criterion_5),
        ("constraint enforcement", criterion_6),
        ("SO(3) geodesic fixed point", criterion_7),
        ("reconstruction convergence order", criterion_8),
        ("identity suites", criterion_9),
        ("CLI round trip and determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !passed {
            failed += 1;
        }
        println!("criterion {:>2} {} {title}: {detail}", i + 1, if passed { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
