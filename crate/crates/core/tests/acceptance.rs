//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Run with `--nocapture` to see the lines directly:
//!
//! ```text
//! cargo test --test acceptance -- --nocapture
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use varifrac::admissibility::{check_class, check_noninterpenetration};
use varifrac::energy::{
    verify_coercivity, verify_delta_convexity, verify_exponents, DensityFamily, DensitySpec,
    EnergyParams,
};
use varifrac::meshgen;
use varifrac::minimizer::{crack_varifold, minimize_total, MinimizerConfig};
use varifrac::state::cut_mesh;
use varifrac::tensor::{cof3, det3, vec, Mat3};
use varifrac::varifold::{DiscreteVarifold, TestFunction};

/// Prints the verdict line and panics with the failure list.
fn verdict(number: usize, name: &str, failures: Vec<String>) {
    let ok = failures.is_empty();
    println!(
        "ACCEPTANCE {number} ({name}): {}",
        if ok { "pass" } else { "FAIL" }
    );
    assert!(ok, "criterion {number} failed:\n  {}", failures.join("\n  "));
}

fn check(failures: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        failures.push(msg);
    }
}

fn random_mat(rng: &mut impl Rng, lim: f64) -> Mat3 {
    let mut m = Mat3::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            m.0[i][j] = rng.gen_range(-lim..lim);
        }
    }
    m
}

#[test]
fn criterion_1_tensor_identities() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..10_000 {
        let g = random_mat(&mut rng, 3.0);
        let det = det3(&g);

        // adjugate identity G cof(G)^T = det(G) I
        let lhs = g.matmul(&cof3(&g).transpose());
        let mut defect = 0.0f64;
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { det } else { 0.0 };
                defect = defect.max((lhs.0[r][c] - expect).abs());
            }
        }
        check(
            &mut failures,
            defect <= 1e-12 * (1.0 + det.abs()),
            format!("adjugate identity defect {defect:.3e} at sample {i}"),
        );

        // Cauchy-Binet oracle: |M(G)|^2 = det(I + G^T G)
        let minors_sq = 1.0 + g.frobenius_sq() + cof3(&g).frobenius_sq() + det * det;
        let mut gram = g.transpose().matmul(&g);
        for d in 0..3 {
            gram.0[d][d] += 1.0;
        }
        let oracle = det3(&gram);
        check(
            &mut failures,
            (minors_sq - oracle).abs() <= 1e-10 * oracle.abs(),
            format!("graph Jacobian vs Cauchy-Binet: {minors_sq} vs {oracle} at sample {i}"),
        );
        if failures.len() > 5 {
            break;
        }
    }
    verdict(1, "tensor identities, 10^4 random matrices", failures);
}

#[test]
fn criterion_2_density_hypotheses() {
    let mut failures = Vec::new();
    let params = EnergyParams::default(); // c=1, p=3, q=2, r=2, s=1, p_bar=2
    let spec = DensitySpec::reference(&params);

    let exps = verify_exponents(&params);
    check(&mut failures, exps.pass(), format!("exponent checks: {:?}", exps.failures()));

    let coer = verify_coercivity(&spec, &params, 100_000, 7);
    check(
        &mut failures,
        coer.pass() && coer.checks[0].margin >= -1e-12,
        format!("coercivity residual {:.3e}", coer.checks[0].margin),
    );

    let conv = verify_delta_convexity(&spec, 100_000, 7);
    check(
        &mut failures,
        conv.pass() && conv.checks[0].margin >= -1e-10,
        format!("convexity defect {:.3e}", -conv.checks[0].margin),
    );

    // deliberately broken densities must fail with located witnesses
    let bad_exponents = EnergyParams {
        p: 2.0,
        ..EnergyParams::default()
    };
    let rep = verify_exponents(&bad_exponents);
    check(
        &mut failures,
        !rep.pass() && rep.failures().iter().any(|f| f.contains("p > 2")),
        "p = 2 not rejected by the exponent certifier".into(),
    );

    let concave = DensitySpec {
        family: DensityFamily::ConcaveTest,
        kappa: 5.0,
        ..DensitySpec::reference(&params)
    };
    let rep = verify_delta_convexity(&concave, 10_000, 7);
    check(
        &mut failures,
        !rep.pass() && rep.checks[0].detail.contains("sample"),
        format!("concave density not located: {}", rep.checks[0].detail),
    );
    verdict(2, "density hypothesis certificates", failures);
}

#[test]
fn criterion_3_gradient_consistency() {
    let mut failures = Vec::new();
    let params = EnergyParams::default();
    let spec = DensitySpec::reference(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(303);

    // (mesh, number of finite-difference components to probe)
    let meshes = [
        (meshgen::unit_cube().unwrap(), usize::MAX),
        (meshgen::structured_bar(4, 4, 5, 0.25, 1.0, false).unwrap(), 18),
    ];
    for (mesh, probe_limit) in &meshes {
        for trial in 0..20 {
            let mut state = cut_mesh(mesh, &[]).unwrap();
            for (n, y) in state.y.iter_mut().enumerate() {
                if !state.topo.dirichlet.contains_key(&n) {
                    for c in y.iter_mut() {
                        *c += rng.gen_range(-0.04..0.04);
                    }
                }
            }
            assert!(state.min_det() > 0.0, "perturbation inverted an element");
            let grad = state.bulk_gradient(&spec).unwrap();

            let free: Vec<usize> = (0..state.y.len())
                .filter(|n| !state.topo.dirichlet.contains_key(n))
                .collect();
            let mut components: Vec<(usize, usize)> = free
                .iter()
                .flat_map(|&n| (0..3).map(move |c| (n, c)))
                .collect();
            if components.len() > *probe_limit {
                for k in 0..*probe_limit {
                    let j = rng.gen_range(k..components.len());
                    components.swap(k, j);
                }
                components.truncate(*probe_limit);
            }

            let h = 1e-6;
            let mut num = 0.0;
            let mut den = 0.0;
            for &(n, c) in &components {
                let mut plus = state.clone();
                plus.y[n][c] += h;
                let mut minus = state.clone();
                minus.y[n][c] -= h;
                let fd = (plus.bulk_energy(&spec) - minus.bulk_energy(&spec)) / (2.0 * h);
                num += (grad[n][c] - fd) * (grad[n][c] - fd);
                den += fd * fd;
            }
            let rel = (num / den.max(1e-300)).sqrt();
            check(
                &mut failures,
                rel <= 1e-5,
                format!(
                    "gradient rel err {rel:.3e} on {}-tet mesh, trial {trial}",
                    mesh.tets.len()
                ),
            );
        }
    }
    verdict(3, "analytic vs finite-difference bulk gradient", failures);
}

#[test]
fn criterion_4_varifold_geometry() {
    let mut failures = Vec::new();
    let pi = std::f64::consts::PI;

    // sphere mass: 1% at >= 5k triangles, error halving per level
    let mut errs = Vec::new();
    let mut tris = 0;
    for subdiv in [3, 4] {
        let v = DiscreteVarifold::from_surface(&meshgen::icosphere(1.0, subdiv), 1).unwrap();
        tris = v.triangles.len();
        errs.push((v.mass() - 4.0 * pi).abs());
    }
    check(&mut failures, tris >= 5000, format!("only {tris} triangles"));
    check(
        &mut failures,
        errs[1] <= 0.01 * 4.0 * pi,
        format!("sphere mass error {:.3e}", errs[1]),
    );
    check(
        &mut failures,
        errs[1] <= 0.5 * errs[0],
        format!("sphere mass errors not halving: {errs:?}"),
    );

    // disc boundary measure: 1% of 2 pi R at >= 5k triangles
    let disc = DiscreteVarifold::from_surface(&meshgen::disc(1.0, 26, 100), 1).unwrap();
    check(
        &mut failures,
        disc.triangles.len() >= 5000,
        format!("only {} disc triangles", disc.triangles.len()),
    );
    let b = disc.boundary_mass();
    check(
        &mut failures,
        (b - 2.0 * pi).abs() <= 0.01 * 2.0 * pi,
        format!("disc boundary mass {b}"),
    );

    // flat configurations carry no curvature
    let flat = DiscreteVarifold::from_surface(&meshgen::flat_grid(8, 8, 0.25), 1).unwrap();
    let worst = flat
        .curvature()
        .unwrap()
        .iter()
        .map(varifrac::tensor::t3::frobenius)
        .fold(0.0f64, f64::max);
    check(
        &mut failures,
        worst <= 1e-10,
        format!("flat curvature {worst:.3e}"),
    );

    // first-variation residual decreases at order >= 1 on the sphere
    let fns = vec![
        TestFunction::projection_entry_bump([0.0, 0.0, 1.0], 1.2, 0, 0),
        TestFunction::coordinate_bump([0.0, 0.0, 1.0], 1.2, 2),
    ];
    let mut residuals = Vec::new();
    for subdiv in [2, 3, 4] {
        let v = DiscreteVarifold::from_surface(&meshgen::icosphere(1.0, subdiv), 1).unwrap();
        residuals.push(v.first_variation_residual(&fns).unwrap());
    }
    for w in residuals.windows(2) {
        let order = (w[0] / w[1]).log2();
        check(
            &mut failures,
            order >= 1.0,
            format!("first-variation order {order:.2}, residuals {residuals:?}"),
        );
    }
    verdict(4, "varifold mass, boundary, curvature, first variation", failures);
}

#[test]
fn criterion_5_griffith_threshold() {
    let mut failures = Vec::new();
    // bar: length 2, cross-section 0.5 x 0.5, mid-plane candidates
    let (nx, ny, nz, h) = (4usize, 1usize, 1usize, 0.5f64);
    let volume = (nx * ny * nz) as f64 * h * h * h;
    let area = (ny * nz) as f64 * h * h;
    let perimeter = 2.0 * (ny + nz) as f64 * h;
    let params = EnergyParams {
        a_bar: 80.0,
        a2: 10.0,
        // the sweep reaches twice the oracle stretch; keep the box
        // bound out of the way
        k_bound: 30.0,
        ..EnergyParams::default()
    };
    let crack_cost = params.a_bar * area + params.a2 * perimeter;

    // 1D oracle: homogeneous stretched bulk minus two rigid halves at
    // the identity equals the crack energy
    let w_diag = |l: f64| {
        let g2 = l * l + 2.0;
        let cof2 = 1.0 + 2.0 * l * l;
        params.c
            * (g2.powf(params.p / 2.0)
                + cof2.powf(params.q / 2.0)
                + (l * l).powf(params.r / 2.0)
                + l.powf(-params.s))
    };
    let gap = |l: f64| volume * (w_diag(l) - w_diag(1.0)) - crack_cost;
    let (mut lo, mut hi) = (1.0f64, 20.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);

    // discrete switch point: bisection sweep of 8 stretch values
    let spec = DensitySpec::reference(&params);
    let config = MinimizerConfig {
        max_inner_iterations: 3000,
        gradient_tolerance: 1e-5,
        voxel_resolution: 48,
        gms_samples: 2,
        ..MinimizerConfig::default()
    };
    let cracks_at = |l: f64| {
        let mesh = meshgen::structured_bar(nx, ny, nz, h, l, true).unwrap();
        let report = minimize_total(&mesh, &spec, &params, &config).unwrap();
        !report.selected_record().faces.is_empty()
    };
    let (mut lo, mut hi) = (1.0, 2.0 * oracle);
    assert!(!cracks_at(lo) && cracks_at(hi), "sweep bracket invalid");
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        if cracks_at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let discrete = 0.5 * (lo + hi);
    let rel = (discrete - oracle).abs() / oracle;
    check(
        &mut failures,
        rel <= 0.05,
        format!("threshold {discrete:.4} vs oracle {oracle:.4} (rel {rel:.3})"),
    );
    verdict(5, "Griffith selection threshold vs 1D oracle", failures);
}

#[test]
fn criterion_6_noninterpenetration() {
    let mut failures = Vec::new();
    let mesh = meshgen::structured_bar(2, 1, 1, 1.0, 1.0, true).unwrap();

    // identity passes
    let state = cut_mesh(&mesh, &[]).unwrap();
    let rec = check_noninterpenetration(&state, 128, 4, 11).unwrap();
    check(&mut failures, rec.pass, format!("identity rejected: {rec:?}"));

    // a rigid motion passes
    let mut rigid = cut_mesh(&mesh, &[]).unwrap();
    let (c, s) = (0.5f64.cos(), 0.5f64.sin());
    for (n, x) in rigid.topo.coords.clone().iter().enumerate() {
        rigid.y[n] = [
            c * x[0] - s * x[1] + 0.3,
            s * x[0] + c * x[1] - 0.2,
            x[2] + 0.1,
        ];
    }
    let rec = check_noninterpenetration(&rigid, 128, 4, 11).unwrap();
    check(&mut failures, rec.pass, format!("rigid motion rejected: {rec:?}"));

    // overlapping halves fail, with the volume deficit matching the
    // analytic overlap (right half translated onto the left: 1.0)
    let mut overlap = cut_mesh(&mesh, &[0, 1]).unwrap();
    for (n, x) in overlap.topo.coords.clone().iter().enumerate() {
        let left = overlap
            .topo
            .tets
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(&n))
            .all(|(t, _)| overlap.topo.centroids[t][0] < 1.0);
        overlap.y[n] = if left { *x } else { [x[0] - 1.0, x[1], x[2]] };
    }
    let rec = check_noninterpenetration(&overlap, 128, 4, 11).unwrap();
    check(&mut failures, !rec.pass, "overlapping halves accepted".into());
    let deficit = rec.det_integral - rec.image_volume;
    check(
        &mut failures,
        (deficit - 1.0).abs() <= 0.1,
        format!("volume deficit {deficit:.4}, analytic overlap 1.0"),
    );
    verdict(6, "Ciarlet-Necas volume and sampled injectivity", failures);
}

#[test]
fn criterion_7_admissibility_fidelity() {
    let mut failures = Vec::new();
    let params = EnergyParams::default();

    // crack-free pair (y, 0) with the identity deformation
    let mesh = meshgen::structured_bar(2, 1, 1, 1.0, 1.0, true).unwrap();
    let state = cut_mesh(&mesh, &[]).unwrap();
    let report = check_class(&state, &DiscreteVarifold::empty(), &params);
    check(
        &mut failures,
        report.pass(),
        format!("crack-free pair rejected: {:?}", report.failures()),
    );

    // cracked pair: left half identity, right half stretched; full
    // mid-plane varifold covers the jump
    let mesh = meshgen::structured_bar(2, 1, 1, 1.0, 1.25, true).unwrap();
    let mut state = cut_mesh(&mesh, &[0, 1]).unwrap();
    for (n, x) in state.topo.coords.clone().iter().enumerate() {
        let left = state
            .topo
            .tets
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(&n))
            .all(|(t, _)| state.topo.centroids[t][0] < 1.0);
        state.y[n] = if left { *x } else { [1.25 * x[0], x[1], x[2]] };
    }
    let full = crack_varifold(&mesh, &[0, 1], 1).unwrap();
    let with_cover = check_class(&state, &full, &params);
    check(
        &mut failures,
        with_cover.pass(),
        format!("covered cracked pair rejected: {:?}", with_cover.failures()),
    );

    // removing one covering triangle flips exactly the two coverage
    // records (deformation jumps and minor-field jumps)
    let partial = crack_varifold(&mesh, &[0], 1).unwrap();
    let without = check_class(&state, &partial, &params);
    let coverage = [
        "jump set covered by crack surface",
        "minor-field jumps covered by crack surface",
    ];
    for (a, b) in with_cover.records.iter().zip(&without.records) {
        assert_eq!(a.name, b.name);
        let expected_flip = coverage.contains(&a.name.as_str());
        check(
            &mut failures,
            (a.pass != b.pass) == expected_flip && a.pass,
            format!("record `{}`: {} -> {}", a.name, a.pass, b.pass),
        );
    }
    verdict(7, "admissibility membership fidelity", failures);
}

#[test]
fn criterion_8_deterministic_reports() {
    let mut failures = Vec::new();
    let fixture: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/bar.toml");
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_varifrac"))
            .args([
                "minimize",
                "--config",
                fixture.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "9",
            ])
            .status()
            .expect("binary runs");
        assert!(status.success());
        std::fs::read(out.join("report.json")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    check(
        &mut failures,
        a == b,
        "reports differ between identical runs".into(),
    );
    check(&mut failures, !a.is_empty(), "empty report".into());
    verdict(8, "byte-identical reports for identical config and seed", failures);
}

// keep the unused-import lint honest for both build profiles
#[allow(dead_code)]
fn _touch(v: &varifrac::tensor::Vec3) -> f64 {
    vec::norm(v)
}
