//! Acceptance suite: every criterion of the laboratory runs here at its
//! stated tolerance and prints one pass/fail line.
//!
//! Run with `cargo test -p fixpoint-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fixpoint_cli::casestudy::{run_case_study, CaseOutcome};
use fixpoint_cli::config::ExperimentConfig;
use fixpoint_cli::experiment::sweep;
use fixpoint_core::geometry::{project, Affine, SetSpec};
use fixpoint_core::operators::{
    apply, cyclic_projections, km_relax, OperatorSpec, SelectionPolicy,
};
use fixpoint_core::point;
use fixpoint_core::point::Point;
use fixpoint_core::productspace::{difference_vectors, phi_zeta_residual, ProductPoint};
use fixpoint_core::regularity::{estimate_elemental_subregularity, SampleRegion};

fn study(name: &str, params: &[(&str, serde_json::Value)]) -> (CaseOutcome, tempfile::TempDir) {
    let dir = tempfile::tempdir().expect("tempdir");
    let params: BTreeMap<String, serde_json::Value> = params
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    let outcome = run_case_study(name, params, dir.path()).expect("case study runs");
    (outcome, dir)
}

fn assert_check(outcome: &CaseOutcome, name_prefix: &str) {
    let check = outcome
        .checks
        .iter()
        .find(|c| c.name.starts_with(name_prefix))
        .unwrap_or_else(|| panic!("missing check '{name_prefix}'"));
    assert!(
        check.pass,
        "check '{}' failed: {}",
        check.name, check.detail
    );
}

fn lex() -> SelectionPolicy {
    SelectionPolicy::LexicographicMin
}

fn pairs_in_ball(center: &Point, radius: f64, count: usize, seed: u64) -> Vec<(Point, Point)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| {
        Point::new(
            center
                .coords()
                .iter()
                .map(|c| c + rng.gen_range(-radius..radius))
                .collect(),
        )
    };
    (0..count)
        .map(|_| {
            let x = sample(&mut rng);
            let y = sample(&mut rng);
            (x, y)
        })
        .collect()
}

#[test]
fn criterion_1_triangle_reproduction() {
    let started = Instant::now();
    let (outcome, _dir) = study("triangle", &[]);
    let elapsed = started.elapsed();
    assert_check(&outcome, "20 seeded starts converge");
    assert_check(&outcome, "estimated kappa within 5%");
    assert_check(&outcome, "estimated sigma within 5%");
    assert_check(
        &outcome,
        "closed-form certificate c equals sqrt(37)/8 exactly",
    );
    assert_check(&outcome, "observed q-factors after step 1 at most 0.780");
    assert!(outcome.pass, "triangle study has failing checks");
    assert!(
        elapsed.as_secs_f64() < 2.0,
        "triangle study took {elapsed:?}, budget 2 s"
    );
    println!("criterion 1 (triangle reproduction): PASS in {elapsed:?}");
}

#[test]
fn criterion_2_two_circles() {
    let started = Instant::now();
    let (outcome, _dir) = study("circles", &[("r", serde_json::json!(1.0))]);
    let elapsed = started.elapsed();
    assert_check(&outcome, "estimated subtransversality within 5%");
    assert_check(&outcome, "observed local rate at most c-bound + 0.01");
    assert!(outcome.pass, "circles study has failing checks");
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "circles study took {elapsed:?}, budget 5 s"
    );
    println!("criterion 2 (two circles at r = 1): PASS in {elapsed:?}");
}

#[test]
fn criterion_3_tangent_sublinearity() {
    let (outcome, _dir) = study("tangent", &[]);
    assert_check(&outcome, "annuli 0..6 are populated");
    assert_check(&outcome, "per-annulus rates nondecreasing toward 1");
    assert_check(
        &outcome,
        "per-annulus rates within closed-form bound + 0.05",
    );
    assert_check(&outcome, "per-step distances obey the gauge bound");
    assert!(outcome.pass, "tangent study has failing checks");
    println!("criterion 3 (tangent line-circle sublinearity): PASS");
}

#[test]
fn criterion_4_averaging_calculus() {
    // (a) Firm nonexpansiveness of convex projectors:
    //     |Px - Py|^2 <= <Px - Py, x - y> + 1e-9 on 1000 seeded pairs.
    let convex: Vec<SetSpec> = vec![
        SetSpec::hyperplane(point![0.0, 1.0], 0.25),
        SetSpec::half_space(point![1.0, 1.0], 1.0),
        SetSpec::ball(point![0.5, -0.5], 1.5),
        SetSpec::box_set(vec![-1.0, 0.0], vec![1.0, 2.0]),
        SetSpec::affine(point![0.0, 0.0], vec![point![0.6, 0.8]]),
        SetSpec::product(vec![
            SetSpec::ball(point![0.0, 0.0], 1.0),
            SetSpec::box_set(vec![0.0], vec![1.0]),
        ]),
    ];
    for set in &convex {
        let center = Point::zeros(set.ambient_dim());
        for (x, y) in pairs_in_ball(&center, 3.0, 1000, 0xA1) {
            let px = &project(set, &x).unwrap().points[0];
            let py = &project(set, &y).unwrap().points[0];
            let lhs = px.dist(py).powi(2);
            let rhs = px.sub(py).dot(&x.sub(&y));
            assert!(lhs <= rhs + 1e-9, "firm nonexpansiveness failed on {set:?}");
        }
    }

    // (b) Composition violation never exceeds prod(1 + eps_j) - 1 + 0.01,
    //     with the stage violations measured along the same trajectories.
    let circle1 = SetSpec::sphere(point![0.0, 0.0], 1.0);
    let circle2 = SetSpec::sphere(point![0.0, -1.5], 3.0);
    let u_bar = point![0.0, 1.0];
    let y_mid = &project(&circle2, &u_bar).unwrap().points[0];
    let y_end = &project(&circle1, y_mid).unwrap().points[0];
    let (mut e1, mut e2, mut ec) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut used = 0;
    for (x, _) in pairs_in_ball(&u_bar, 0.2, 1000, 0xB2) {
        let base = x.dist(&u_bar).powi(2);
        if base < 1e-18 {
            continue;
        }
        used += 1;
        let a = &project(&circle2, &x).unwrap().points[0];
        let b = &project(&circle1, a).unwrap().points[0];
        let mid = a.dist(y_mid).powi(2);
        let end = b.dist(y_end).powi(2);
        e2 = e2.max(mid / base - 1.0);
        if mid > 1e-18 {
            e1 = e1.max(end / mid - 1.0);
        }
        ec = ec.max(end / base - 1.0);
    }
    assert!(used > 900);
    assert!(
        ec <= (1.0 + e1) * (1.0 + e2) - 1.0 + 0.01,
        "composition violation {ec} vs bound from stages ({e1}, {e2})"
    );
    assert!(e2 > 0.3, "outer circle projector should be expansive here");

    // (c) Krasnoselski-Mann relaxation scales the violation by lambda.
    let p2 = OperatorSpec::projector(circle2.clone());
    for lambda in [0.25, 0.5, 0.75] {
        let relaxed = km_relax(p2.clone(), lambda).unwrap();
        let alpha = 0.5;
        let (mut et, mut el) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, _) in pairs_in_ball(&u_bar, 0.2, 1000, 0xC3) {
            let base = x.dist(&u_bar).powi(2);
            if base < 1e-18 {
                continue;
            }
            let tx = &apply(&p2, &x, &lex()).unwrap().points[0];
            let ty = &apply(&p2, &u_bar, &lex()).unwrap().points[0];
            let rx = &apply(&relaxed, &x, &lex()).unwrap().points[0];
            let ry = &apply(&relaxed, &u_bar, &lex()).unwrap().points[0];
            let coeff = (1.0 - alpha) / alpha;
            let vt = (tx.dist(ty).powi(2) + coeff * x.sub(tx).sub(&u_bar.sub(ty)).norm().powi(2))
                / base
                - 1.0;
            let vl = (rx.dist(ry).powi(2) + coeff * x.sub(rx).sub(&u_bar.sub(ry)).norm().powi(2))
                / base
                - 1.0;
            et = et.max(vt);
            el = el.max(vl);
        }
        assert!(
            el <= lambda * et + 0.01,
            "KM violation {el} exceeds lambda * {et} at lambda = {lambda}"
        );
    }

    // (d) The averaged-operator inequality at the theoretical constant of
    //     cyclic projections over convex sets, violation zero.
    let s3 = 3.0f64.sqrt();
    let triangle = cyclic_projections(vec![
        SetSpec::hyperplane(point![0.0, 1.0], 0.0),
        SetSpec::hyperplane(point![-s3, 1.0], s3),
        SetSpec::hyperplane(point![s3, 1.0], s3),
    ])
    .unwrap();
    for (x, y) in pairs_in_ball(&point![-1.0 / 3.0, 0.0], 2.0, 1000, 0xD4) {
        if x.dist(&y) < 1e-12 {
            continue;
        }
        let alpha = 0.75;
        let tx = &apply(&triangle, &x, &lex()).unwrap().points[0];
        let ty = &apply(&triangle, &y, &lex()).unwrap().points[0];
        let lhs = tx.dist(ty).powi(2);
        let rhs =
            x.dist(&y).powi(2) - (1.0 - alpha) / alpha * x.sub(tx).sub(&y.sub(ty)).norm().powi(2);
        assert!(
            lhs <= rhs + 1e-9,
            "averaged inequality failed at {x:?}, {y:?}"
        );
    }
    // Two convex sets, pairs restricted to the first set.
    let line = SetSpec::hyperplane(point![0.0, 1.0], 0.5);
    let two = cyclic_projections(vec![line.clone(), SetSpec::ball(point![0.0, 0.0], 1.0)]).unwrap();
    for (x, y) in pairs_in_ball(&point![0.0, 0.5], 2.0, 1000, 0xE5) {
        let x = project(&line, &x).unwrap().points.remove(0);
        let y = project(&line, &y).unwrap().points.remove(0);
        if x.dist(&y) < 1e-12 {
            continue;
        }
        let alpha = 2.0 / 3.0;
        let tx = &apply(&two, &x, &lex()).unwrap().points[0];
        let ty = &apply(&two, &y, &lex()).unwrap().points[0];
        let lhs = tx.dist(ty).powi(2);
        let rhs =
            x.dist(&y).powi(2) - (1.0 - alpha) / alpha * x.sub(tx).sub(&y.sub(ty)).norm().powi(2);
        assert!(lhs <= rhs + 1e-9, "two-set averaged inequality failed");
    }
    println!("criterion 4 (averaging-calculus property suite): PASS");
}

#[test]
fn criterion_5_product_space_identities() {
    let s3 = 3.0f64.sqrt();
    let triangle = vec![
        SetSpec::hyperplane(point![0.0, 1.0], 0.0),
        SetSpec::hyperplane(point![-s3, 1.0], s3),
        SetSpec::hyperplane(point![s3, 1.0], s3),
    ];
    let circles = vec![
        SetSpec::sphere(point![0.0, 0.0], 1.0),
        SetSpec::sphere(point![0.0, -1.5], 3.0),
    ];
    // sqrt(m) identity on 100 points per case study.
    let cases: Vec<(&str, Vec<SetSpec>, Point)> = vec![
        ("triangle", triangle.clone(), point![-1.0 / 3.0, 0.0]),
        ("circles", circles.clone(), point![0.0, 1.0]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x55);
    for (name, sets, u) in &cases {
        let m = sets.len() as f64;
        let zeta = difference_vectors(sets, u, 16).unwrap().remove(0);
        assert!(
            zeta.sum_residual() <= 1e-10,
            "{name}: zeta does not sum to 0"
        );
        let sums = zeta.partial_sums();
        let p0 = cyclic_projections(sets.clone()).unwrap();
        for _ in 0..100 {
            let x1 = Point::new(
                u.coords()
                    .iter()
                    .map(|c| c + rng.gen_range(-0.3..0.3))
                    .collect(),
            );
            let x = ProductPoint::new(sums.iter().map(|s| x1.sub(s)).collect());
            let lhs = phi_zeta_residual(sets, &zeta, &x).unwrap();
            let images = apply(&p0, &x1, &SelectionPolicy::AllBranches { budget: 16 }).unwrap();
            let d = images
                .points
                .iter()
                .map(|p| p.dist(&x1))
                .fold(f64::INFINITY, f64::min);
            assert!(
                (lhs - m.sqrt() * d).abs() <= 1e-10,
                "{name}: sqrt(m) identity violated ({lhs} vs {})",
                m.sqrt() * d
            );
        }
    }
    // Every enumerated difference vector sums to zero.
    let two_point = vec![
        SetSpec::finite(vec![point![0.0], point![1.0]]),
        SetSpec::finite(vec![point![0.0], point![0.75]]),
    ];
    for u in [point![0.0], point![1.0]] {
        for dv in difference_vectors(&two_point, &u, 16).unwrap() {
            assert!(dv.sum_residual() <= 1e-10);
        }
    }
    // Convex-case uniqueness across 5 distinct fixed points.
    let parallel = vec![
        SetSpec::hyperplane(point![0.0, 1.0], 0.0),
        SetSpec::hyperplane(point![0.0, 1.0], 1.0),
    ];
    let mut reference: Option<ProductPoint> = None;
    for t in [-2.0, -1.0, 0.0, 0.5, 4.0] {
        let dvs = difference_vectors(&parallel, &point![t, 0.0], 16).unwrap();
        assert_eq!(dvs.len(), 1);
        assert!(dvs[0].sum_residual() <= 1e-10);
        let z = dvs[0].as_product_point();
        if let Some(prev) = &reference {
            assert!(
                prev.dist(&z) <= 1e-8,
                "difference vector differs across fixed points"
            );
        }
        reference = Some(z);
    }
    println!("criterion 5 (product-space identities): PASS");
}

#[test]
fn criterion_6_forward_backward() {
    let (outcome, dir) = study("fb_soft_threshold", &[]);
    assert_check(&outcome, "run converges");
    assert_check(&outcome, "linear convergence observed");
    assert_check(&outcome, "max q within certified c + 0.02");
    assert!(outcome.pass, "forward-backward study has failing checks");

    // Sweep over the step length: everything at or below 0.2 converges.
    let config = ExperimentConfig::from_path(&dir.path().join("config.json")).unwrap();
    let sweep_dir = tempfile::tempdir().unwrap();
    let values = [0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5];
    let rows = sweep(&config, "problem.params.t", &values, sweep_dir.path()).unwrap();
    for row in &rows {
        if row.value <= 0.2 + 1e-12 {
            assert_eq!(
                serde_json::to_value(row.outcome).unwrap(),
                serde_json::json!("converged"),
                "step {} did not converge",
                row.value
            );
        }
    }
    println!("criterion 6 (forward-backward with certified rate and step sweep): PASS");
}

#[test]
fn criterion_7_dr_vs_raar() {
    let (outcome, _dir) = study("dr_vs_raar", &[]);
    assert_check(
        &outcome,
        "Douglas-Rachford on parallel lines flagged diverged",
    );
    assert_check(&outcome, "RAAR on parallel lines reaches residual 1e-8");
    assert_check(
        &outcome,
        "RAAR on the inconsistent toy phase instance stays bounded",
    );
    assert_check(
        &outcome,
        "RAAR on the inconsistent toy phase instance reaches residual 1e-8",
    );
    assert!(outcome.pass, "dr_vs_raar study has failing checks");
    println!("criterion 7 (DR diverges, RAAR converges on inconsistent problems): PASS");
}

#[test]
fn criterion_8_elemental_subregularity_calibration() {
    // Cross at the origin: constant 0 for axis-aligned normal pairs.
    let cross = SetSpec::cross(2);
    let origin = point![0.0, 0.0];
    for (a, v, axis) in [
        (point![0.5, 0.0], point![0.0, 0.3], point![1.0, 0.0]),
        (point![-0.7, 0.0], point![0.0, -0.2], point![1.0, 0.0]),
        (point![0.0, 0.4], point![0.3, 0.0], point![0.0, 1.0]),
    ] {
        let region = SampleRegion::ball(origin.clone(), 1.0, 400, 0x81)
            .on(Affine::new(origin.clone(), vec![axis]));
        let report = estimate_elemental_subregularity(&cross, &origin, (&a, &v), &region).unwrap();
        assert!(
            report.constant <= 1e-9,
            "cross constant {}",
            report.constant
        );
    }

    // Unit circle at (0, 1), neighborhood radius 0.1: constant below 0.11.
    let circle = SetSpec::sphere(point![0.0, 0.0], 1.0);
    let top = point![0.0, 1.0];
    for v in [point![0.0, 0.5], point![0.0, -0.5]] {
        let region = SampleRegion::ball(top.clone(), 0.1, 400, 0x82);
        let report = estimate_elemental_subregularity(&circle, &top, (&top, &v), &region).unwrap();
        assert!(
            report.constant <= 0.11,
            "circle constant {}",
            report.constant
        );
    }

    // Every convex catalog kind: constant 0.
    let convex_pairs: Vec<(SetSpec, Point, Point)> = vec![
        (
            SetSpec::affine(point![0.0, 0.0], vec![point![1.0, 0.0]]),
            point![0.3, 0.0],
            point![0.0, 0.8],
        ),
        (
            SetSpec::hyperplane(point![0.0, 1.0], 0.0),
            point![0.2, 0.0],
            point![0.0, -0.5],
        ),
        (
            SetSpec::half_space(point![1.0, 0.0], 0.0),
            point![0.0, 0.4],
            point![0.7, 0.0],
        ),
        (
            SetSpec::ball(point![0.0, 0.0], 1.0),
            point![0.0, 1.0],
            point![0.0, 0.6],
        ),
        (
            SetSpec::box_set(vec![-1.0, -1.0], vec![1.0, 1.0]),
            point![1.0, 0.2],
            point![0.5, 0.0],
        ),
        (
            SetSpec::product(vec![
                SetSpec::ball(point![0.0, 0.0], 1.0),
                SetSpec::box_set(vec![0.0], vec![1.0]),
            ]),
            point![0.0, 1.0, 1.0],
            point![0.0, 0.4, 0.3],
        ),
    ];
    for (set, y, v) in &convex_pairs {
        let region = SampleRegion::ball(y.clone(), 0.5, 300, 0x83);
        let report = estimate_elemental_subregularity(set, y, (y, v), &region).unwrap();
        assert!(
            report.constant <= 1e-9,
            "convex set {set:?} gave constant {}",
            report.constant
        );
    }
    println!("criterion 8 (elemental-subregularity calibration): PASS");
}

#[test]
fn criterion_9_determinism() {
    for name in ["triangle", "circles", "dr_vs_raar", "phase_retrieval_toy"] {
        let (a, dir_a) = study(name, &[]);
        let (b, dir_b) = study(name, &[]);
        assert!(a.pass && b.pass);
        let mut files: Vec<_> = std::fs::read_dir(dir_a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        files.sort();
        assert!(!files.is_empty());
        for file in files {
            let left = std::fs::read(dir_a.path().join(&file)).unwrap();
            let right = std::fs::read(dir_b.path().join(&file)).unwrap();
            assert_eq!(
                left,
                right,
                "{name}: {} differs between identical runs",
                file.to_string_lossy()
            );
        }
    }
    println!("criterion 9 (bitwise determinism of case-study outputs): PASS");
}
