//! Acceptance checks. Each test prints one `criterion N PASS|FAIL` line to
//! stderr (uncaptured) and then asserts.
//!
//! The experiment criteria (4 to 7) train full-size models. Trained models
//! are cached under the cargo target tmpdir, so only the first run pays for
//! training; delete `acceptance-models` there to retrain from scratch.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_2_PI, PI};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ndarray::{Array1, Array2};
use rand::Rng;

use cvverify::embednet::layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, flatten, l2_backward, l2_normalize,
    maxpool_backward, maxpool_forward, relu_backward_inplace, relu_inplace, unflatten, ConvGeom,
};
use cvverify::embednet::{dropout_seeds, grad, NetworkLayout, NetworkParams, TripletBatch};
use cvverify::fock::{
    fidelity, kerr_evolve, make_cat, make_coherent, wigner, DensityMatrix, KerrEvolutionSpec, MasterEquation,
    C64, DEFAULT_DIM, DEFAULT_STEP,
};
use cvverify::harness::{
    run_affine_experiment, run_cat_experiment, run_complexity_experiment, run_dynamics_experiment,
    run_experiment, run_external_ingest, spearman, CurveResult, ExperimentSpec, ModelCache, Scenario,
    ScenarioKind,
};
use cvverify::measure::seeds::rng_from;
use cvverify::measure::{make_data_image, sample_wigner_value, select_pixels, DataImage, GridSpec};

const SEED: u64 = 2024;

// Experiments share cached models; one at a time avoids training a model
// twice when the harness runs tests in parallel.
static TRAINING: Mutex<()> = Mutex::new(());

fn report(n: usize, what: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n} {verdict}: {what} ({detail})");
}

fn tmp(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn cache() -> ModelCache {
    ModelCache::new(tmp("acceptance-models"))
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = tmp("acceptance-runs").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_physics_oracles() {
    let mut failures = Vec::new();
    let mut check = |name: &str, err: f64, tol: f64| {
        if !(err <= tol) {
            failures.push(format!("{name}: {err:.3e} > {tol:e}"));
        }
    };

    let vac = DensityMatrix::vacuum(DEFAULT_DIM);
    check("vacuum W(0)", (wigner(&vac, C64::new(0.0, 0.0)) - 2.0 / PI).abs(), 1e-8);

    let grid = GridSpec::new(32, 3.0).unwrap();
    for a0 in [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 1.0)] {
        let rho = make_coherent(a0, DEFAULT_DIM).unwrap().to_density();
        let worst = (0..grid.pixels())
            .map(|i| {
                let a = grid.alpha(i);
                let exact = 2.0 / PI * (-2.0 * (a - a0).norm_sqr()).exp();
                (wigner(&rho, a) - exact).abs()
            })
            .fold(0.0, f64::max);
        check(&format!("coherent Wigner at {a0}"), worst, 1e-6);
    }

    let pts = [C64::new(0.0, 0.0), C64::new(0.5, -0.3), C64::new(1.0, 1.0), C64::new(-1.2, 0.4)];
    let mut worst = 0.0f64;
    for a in pts {
        for b in pts {
            let ra = make_coherent(a, DEFAULT_DIM).unwrap().to_density();
            let rb = make_coherent(b, DEFAULT_DIM).unwrap().to_density();
            let exact = (-(a - b).norm_sqr()).exp();
            worst = worst.max((fidelity(&ra, &rb).unwrap() - exact).abs());
        }
    }
    check("coherent fidelity", worst, 1e-8);

    let cat = make_cat(C64::new(2.0, 0.0), 2, DEFAULT_DIM).unwrap().to_density();
    let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let states = MasterEquation::kerr(DEFAULT_DIM, 0.5)
        .evolve(&cat, &times, DEFAULT_STEP)
        .unwrap();
    let drift = states.iter().map(|s| (s.trace() - 1.0).norm()).fold(0.0, f64::max);
    check("trace drift at loss 0.5", drift, 1e-8);

    let coh = make_coherent(C64::new(2.0, 0.0), DEFAULT_DIM).unwrap().to_density();
    let spec = KerrEvolutionSpec {
        loss_rate: 0.0,
        snapshot_times: vec![0.0, 1.0],
        integrator_step: DEFAULT_STEP,
    };
    let revived = kerr_evolve(&coh, &spec).unwrap();
    let f = fidelity(&revived[1], &coh).unwrap();
    check("Kerr revival infidelity", 1.0 - f, 1e-3);

    let pass = failures.is_empty();
    let detail = if pass {
        format!("revival fidelity {f:.6}, trace drift {drift:.1e}")
    } else {
        failures.join("; ")
    };
    report(1, "physics oracles", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_sampling() {
    const N: u64 = 10_000;
    let mut failures = Vec::new();
    let estimates = |w: f64, shots: u32| -> Vec<f64> {
        (0..N)
            .map(|s| sample_wigner_value(w, shots, s * 7919 + shots as u64).unwrap())
            .collect()
    };
    let moments = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var)
    };

    let mut worst_z = 0.0f64;
    for w in [-0.6, -0.2, 0.0, 0.25, 0.55] {
        for shots in [50u32, 300] {
            let (m, _) = moments(&estimates(w, shots));
            // parity +1 with probability (1 + πW/2)/2; estimate = (2/π)(2k/n − 1)
            let p = 0.5 * (1.0 + PI / 2.0 * w);
            let se = FRAC_2_PI * 2.0 * (p * (1.0 - p) / shots as f64).sqrt() / (N as f64).sqrt();
            let z = (m - w).abs() / se;
            worst_z = worst_z.max(z);
            if z > 3.0 {
                failures.push(format!("bias at W={w}, {shots} shots: {z:.2} standard errors"));
            }
        }
    }

    let (_, v50) = moments(&estimates(0.3, 50));
    let (_, v300) = moments(&estimates(0.3, 300));
    let ratio = v50 / v300;
    if !(3.0..=9.0).contains(&ratio) {
        failures.push(format!("variance ratio {ratio:.3} outside 6 ± 50%"));
    }

    let vac = DensityMatrix::vacuum(8);
    for side in [8usize, 16, 32, 48, 81] {
        let grid = GridSpec::new(side, 3.0).unwrap();
        for fraction in [0.05, 0.5, 0.625, 0.75, 1.0] {
            let want = (fraction * (side * side) as f64).round() as usize;
            let picked = select_pixels(&grid, fraction, 3).unwrap().len();
            let img = make_data_image(&vac, &grid, fraction, 10, 3).unwrap();
            if picked != want || img.present_count() != want {
                failures.push(format!(
                    "side {side}, fraction {fraction}: {picked}/{} present, want {want}",
                    img.present_count()
                ));
            }
        }
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!("max bias {worst_z:.2} SE, variance ratio {ratio:.3}")
    } else {
        failures.join("; ")
    };
    report(2, "sampling", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------- criterion 3

/// Worst central-difference error of `analytic` against `f` at `x`;
/// relative unless both sides are below 1e-7. A coordinate that fails at
/// `steps[0]` is retried at the later (smaller) steps and keeps its best
/// error: piecewise-linear layers put kinks close to some points, and only
/// a wrong gradient fails at every step.
fn fd_error(x: &[f64], steps: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut p = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut best = f64::INFINITY;
        for &h in steps {
            p[i] = x[i] + h;
            let a = f(&p);
            p[i] = x[i] - h;
            let b = f(&p);
            p[i] = x[i];
            let num = (a - b) / (2.0 * h);
            let scale = num.abs().max(analytic[i].abs());
            let err = if scale < 1e-7 {
                (num - analytic[i]).abs()
            } else {
                (num - analytic[i]).abs() / scale
            };
            best = best.min(err);
            if best <= 1e-3 {
                break;
            }
        }
        worst = worst.max(best);
    }
    worst
}

fn random(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn mat(rows: usize, cols: usize, v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), v.to_vec()).unwrap()
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a * b).sum()
}

fn side8_images(n: usize) -> Vec<DataImage> {
    let grid = GridSpec::new(8, 3.0).unwrap();
    (0..n)
        .map(|i| {
            let rho = make_cat(C64::new(1.0 + 0.25 * i as f64, 0.0), 2, DEFAULT_DIM)
                .unwrap()
                .to_density();
            make_data_image(&rho, &grid, 0.75, 50, 100 + i as u64).unwrap()
        })
        .collect()
}

#[test]
fn criterion_3_gradients() {
    let mut rng = rng_from(33);
    let mut errors: BTreeMap<String, f64> = BTreeMap::new();
    let h = &[1e-5][..];

    // convolution, both strides, on a batch of two 8×8 two-channel maps
    for stride in [1usize, 2] {
        let (cin, cout, batch) = (2, 3, 2);
        let g = ConvGeom::new(cin, 8, 8, 3, stride);
        let x = random(&mut rng, cin * batch * 64);
        let w = random(&mut rng, cout * g.patch_len());
        let b = random(&mut rng, cout);
        let c = mat(cout, batch * g.ho * g.wo, &random(&mut rng, cout * batch * g.ho * g.wo));
        let loss = |x: &[f64], w: &[f64], b: &[f64]| {
            let xm = mat(cin, batch * 64, x);
            let wm = mat(cout, g.patch_len(), w);
            let (out, _) = conv_forward(&xm.view(), batch, &g, &wm.view(), &Array1::from(b.to_vec()).view());
            dot(&out, &c)
        };
        let xm = mat(cin, batch * 64, &x);
        let wm = mat(cout, g.patch_len(), &w);
        let (_, cols) = conv_forward(&xm.view(), batch, &g, &wm.view(), &Array1::from(b.clone()).view());
        let (dw, db, dx) = conv_backward(&c.view(), &cols.view(), batch, &g, &wm.view(), true);
        let dx = dx.unwrap();
        let e = fd_error(&x, h, dx.as_slice().unwrap(), |p| loss(p, &w, &b))
            .max(fd_error(&w, h, dw.as_slice().unwrap(), |p| loss(&x, p, &b)))
            .max(fd_error(&b, h, db.as_slice().unwrap(), |p| loss(&x, &w, p)));
        errors.insert(format!("conv stride {stride}"), e);
    }

    // ReLU, inputs kept away from the kink
    {
        let x: Vec<f64> = random(&mut rng, 4 * 20)
            .into_iter()
            .map(|v| if v.abs() < 0.05 { v + 0.1f64.copysign(v) } else { v })
            .collect();
        let c = mat(4, 20, &random(&mut rng, 80));
        let loss = |x: &[f64]| {
            let mut o = mat(4, 20, x);
            relu_inplace(&mut o);
            dot(&o, &c)
        };
        let mut out = mat(4, 20, &x);
        relu_inplace(&mut out);
        let mut d = c.clone();
        relu_backward_inplace(&mut d, &out.view());
        errors.insert("relu".into(), fd_error(&x, h, d.as_slice().unwrap(), loss));
    }

    // max pool on distinct, well-separated values
    {
        let (ch, batch) = (3, 2);
        let n = ch * batch * 64;
        let mut x: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        for i in (1..n).rev() {
            x.swap(i, rng.random_range(0..=i));
        }
        let c = mat(ch, batch * 16, &random(&mut rng, ch * batch * 16));
        let loss = |x: &[f64]| dot(&maxpool_forward(&mat(ch, batch * 64, x).view(), batch, 8, 8, 2).0, &c);
        let (_, arg) = maxpool_forward(&mat(ch, batch * 64, &x).view(), batch, 8, 8, 2);
        let d = maxpool_backward(&c.view(), &arg, batch * 64);
        errors.insert("maxpool".into(), fd_error(&x, h, d.as_slice().unwrap(), loss));
    }

    // flatten into feature columns
    {
        let (ch, batch, p) = (3, 2, 4);
        let x = random(&mut rng, ch * batch * p);
        let c = mat(ch * p, batch, &random(&mut rng, ch * p * batch));
        let loss = |x: &[f64]| dot(&flatten(&mat(ch, batch * p, x).view(), batch), &c);
        let d = unflatten(&c.view(), ch);
        errors.insert("flatten".into(), fd_error(&x, h, d.as_slice().unwrap(), loss));
    }

    // dense
    {
        let (fin, fout, batch) = (7, 5, 3);
        let x = random(&mut rng, fin * batch);
        let w = random(&mut rng, fout * fin);
        let b = random(&mut rng, fout);
        let c = mat(fout, batch, &random(&mut rng, fout * batch));
        let loss = |x: &[f64], w: &[f64], b: &[f64]| {
            dot(
                &dense_forward(
                    &mat(fin, batch, x).view(),
                    &mat(fout, fin, w).view(),
                    &Array1::from(b.to_vec()).view(),
                ),
                &c,
            )
        };
        let (dw, db, dx) = dense_backward(&c.view(), &mat(fin, batch, &x).view(), &mat(fout, fin, &w).view());
        let e = fd_error(&x, h, dx.as_slice().unwrap(), |p| loss(p, &w, &b))
            .max(fd_error(&w, h, dw.as_slice().unwrap(), |p| loss(&x, p, &b)))
            .max(fd_error(&b, h, db.as_slice().unwrap(), |p| loss(&x, &w, p)));
        errors.insert("dense".into(), e);
    }

    // normalization, plus orthogonality of its backward to the output
    let mut orthogonality = 0.0f64;
    {
        let (d, batch) = (6, 4);
        let z = random(&mut rng, d * batch);
        let c = mat(d, batch, &random(&mut rng, d * batch));
        let loss = |z: &[f64]| dot(&l2_normalize(&mat(d, batch, z).view()).0, &c);
        let (r, norms) = l2_normalize(&mat(d, batch, &z).view());
        let dz = l2_backward(&c.view(), &r.view(), &norms);
        errors.insert("l2 normalization".into(), fd_error(&z, h, dz.as_slice().unwrap(), loss));
        for j in 0..batch {
            orthogonality = orthogonality.max(r.column(j).dot(&dz.column(j)).abs());
        }
    }

    let imgs = side8_images(6);
    let groups = vec![vec![&imgs[0], &imgs[1], &imgs[2]], vec![&imgs[3], &imgs[4], &imgs[5]]];
    let batch = TripletBatch::sample(&groups, 5, 0).unwrap();

    // triplet loss with respect to the representations
    {
        let reps: Vec<Vec<f64>> = (0..6).map(|_| random(&mut rng, 4)).collect();
        let flat: Vec<f64> = reps.concat();
        let (_, g) = batch.loss_and_rep_grad(&reps);
        let loss = |v: &[f64]| batch.loss_and_rep_grad(&v.chunks(4).map(<[f64]>::to_vec).collect::<Vec<_>>()).0;
        errors.insert("triplet loss".into(), fd_error(&flat, h, &g.concat(), loss));
    }

    // the full default network on 8×8 inputs, dropout active
    {
        let layout = NetworkLayout::default_for(8);
        let params = NetworkParams::init(layout.clone(), 44).unwrap();
        let seeds = dropout_seeds(5, 0, 6);
        let (_, g) = grad(&params, &batch, Some(&seeds)).unwrap();
        let loss = |v: &[f64]| {
            let p = NetworkParams::from_values(layout.clone(), v.to_vec()).unwrap();
            grad(&p, &batch, Some(&seeds)).unwrap().0
        };
        errors.insert(
            format!("default network ({} parameters)", params.values().len()),
            fd_error(params.values(), &[1e-5, 1e-6, 1e-7], &g, loss),
        );
    }

    let failures: Vec<String> = errors
        .iter()
        .filter(|(_, e)| !(**e <= 1e-3))
        .map(|(k, e)| format!("{k} relative error {e:.2e}"))
        .collect();
    let pass = failures.is_empty() && orthogonality <= 1e-8;
    let worst = errors.values().fold(0.0f64, |a, b| a.max(*b));
    let detail = if pass {
        format!("{} checks, worst relative error {worst:.2e}, orthogonality {orthogonality:.1e}", errors.len())
    } else {
        format!("{}; orthogonality {orthogonality:.1e}", failures.join("; "))
    };
    report(3, "gradients", pass, &detail);
    assert!(pass, "{detail}");
}

// ------------------------------------------------------- criteria 4 through 7

/// Fidelity bins: [0.84, 0.90], (0.90, 0.95], (0.95, 0.99], and 1.
const BINS: [(f64, f64); 4] = [(0.84, 0.90), (0.90 + 1e-9, 0.95), (0.95 + 1e-9, 0.99), (0.995, 1.0)];

fn bin_means(c: &CurveResult) -> Vec<Option<f64>> {
    BINS.iter().map(|&(lo, hi)| c.mean_rate(lo, hi)).collect()
}

fn fmt_bins(b: &[Option<f64>]) -> String {
    b.iter()
        .map(|v| v.map_or("-".to_string(), |v| format!("{v:.3}")))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `a` is at least `b − slack` on the middle bins.
fn dominates(a: &CurveResult, b: &CurveResult, slack: f64) -> bool {
    let (ma, mb) = (bin_means(a), bin_means(b));
    (1..=2).all(|i| matches!((ma[i], mb[i]), (Some(x), Some(y)) if x >= y - slack))
}

#[test]
fn criterion_4_cat_verification() {
    let _guard = TRAINING.lock().unwrap_or_else(|e| e.into_inner());
    let spec = ExperimentSpec::default_for(ScenarioKind::CatVerification, SEED);
    let outcome = run_cat_experiment(&spec, &fresh_dir("cat"), Some(&cache())).unwrap();
    let curve = |name: &str| outcome.curve(name).unwrap_or_else(|| panic!("missing curve {name}"));
    let default = curve("fraction_0.750");

    let means = bin_means(default);
    let present: Vec<f64> = means.iter().flatten().copied().collect();
    let monotone = means.iter().all(Option::is_some) && present.windows(2).all(|w| w[0] >= w[1]);
    let bin_fid: Vec<f64> = BINS
        .iter()
        .map(|&(lo, hi)| {
            let f: Vec<f64> = default
                .outcomes
                .iter()
                .map(|o| o.fidelity)
                .filter(|f| *f >= lo && *f <= hi)
                .collect();
            f.iter().sum::<f64>() / f.len().max(1) as f64
        })
        .collect();
    let rho = spearman(&bin_fid, &means.iter().map(|m| m.unwrap_or(f64::NAN)).collect::<Vec<_>>());
    let a = monotone && rho <= -0.8;

    let low: Vec<f64> = default
        .points
        .iter()
        .filter(|p| p.fidelity <= 0.90 + 1e-9)
        .map(|p| p.rejection_rate)
        .collect();
    let b = !low.is_empty() && low.iter().all(|r| *r >= 0.9);
    let frr = means[3].unwrap_or(f64::NAN);
    let c = frr <= 0.2;
    let d_pixels = dominates(curve("fraction_0.750"), curve("fraction_0.500"), 0.05);
    let d_shots = dominates(curve("shots_300"), curve("shots_50"), 0.05);

    let pass = a && b && c && d_pixels && d_shots;
    let detail = format!(
        "bins {}; spearman {rho:.2}; (a) {a} (b) {b} min low-fidelity rate {:.3} (c) {c} (d) pixels {d_pixels} [{} vs {}] shots {d_shots} [{} vs {}]",
        fmt_bins(&means),
        low.iter().copied().fold(f64::INFINITY, f64::min),
        fmt_bins(&bin_means(curve("fraction_0.750"))),
        fmt_bins(&bin_means(curve("fraction_0.500"))),
        fmt_bins(&bin_means(curve("shots_300"))),
        fmt_bins(&bin_means(curve("shots_50"))),
    );
    report(4, "cat verification trend", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_complexity() {
    let _guard = TRAINING.lock().unwrap_or_else(|e| e.into_inner());
    let spec = ExperimentSpec::default_for(ScenarioKind::ComplexityComparison, SEED);
    let Scenario::ComplexityComparison(c) = &spec.scenario else {
        unreachable!()
    };
    let fractions = c.fractions.clone();
    let outcome = run_complexity_experiment(&spec, &fresh_dir("complexity"), Some(&cache())).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for f in fractions {
        let two = outcome.curve(&format!("cat2_fraction_{f:.3}")).unwrap();
        let four = outcome.curve(&format!("cat4_fraction_{f:.3}")).unwrap();
        let ok = dominates(two, four, 0.05);
        pass &= ok;
        parts.push(format!(
            "fraction {f}: cat2 [{}] cat4 [{}] {}",
            fmt_bins(&bin_means(two)),
            fmt_bins(&bin_means(four)),
            if ok { "ok" } else { "violated" }
        ));
    }
    let detail = parts.join("; ");
    report(5, "two- versus four-component cats", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_dynamics() {
    let _guard = TRAINING.lock().unwrap_or_else(|e| e.into_inner());
    let spec = ExperimentSpec::default_for(ScenarioKind::KerrDynamics, SEED);
    let outcome = run_dynamics_experiment(&spec, &fresh_dir("dynamics"), Some(&cache())).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for s in &outcome.scenarios {
        let start = s.rows.first().unwrap();
        let end = s.rows.iter().find(|r| (r.time - 1.0).abs() < 1e-9).unwrap();
        let times: Vec<f64> = s.rows.iter().map(|r| r.time).collect();
        let rates: Vec<f64> = s.rows.iter().map(|r| r.rejection_rate).collect();
        let rho = spearman(&times, &rates);
        let ok = (start.rejection_rate - s.threshold.frr).abs() <= 0.15 && end.rejection_rate >= 0.9 && rho >= 0.8;
        pass &= ok;
        parts.push(format!(
            "{} points: t=0 {:.3} vs frr {:.3}, t=1 {:.3}, spearman {rho:.2}",
            s.present, start.rejection_rate, s.threshold.frr, end.rejection_rate
        ));
    }
    let detail = parts.join("; ");
    report(6, "Kerr dynamics trend", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_affine_equivalence() {
    let _guard = TRAINING.lock().unwrap_or_else(|e| e.into_inner());
    let spec = ExperimentSpec::default_for(ScenarioKind::AffineEquivalence, SEED);
    let o = run_affine_experiment(&spec, &fresh_dir("affine"), Some(&cache())).unwrap();
    let pass = o.accept_same >= 0.8 && o.reject_different >= 0.8;
    let in_range = (0.2..=0.6).contains(&o.threshold.value);
    let detail = format!(
        "accept-same {:.3} over {} pairs, reject-different {:.3} over {} pairs, threshold {:.3}{}",
        o.accept_same,
        o.same_pairs,
        o.reject_different,
        o.different_pairs,
        o.threshold.value,
        if in_range { "" } else { " (outside [0.2, 0.6], soft)" }
    );
    report(7, "affine equivalence", pass, &detail);
    assert!(pass, "{detail}");
}

/// Surrogate for the lab-data check: subsamples of one simulated full grid
/// should verify as the same state.
#[test]
fn external_surrogate_acceptance() {
    let _guard = TRAINING.lock().unwrap_or_else(|e| e.into_inner());
    let spec = ExperimentSpec::default_for(ScenarioKind::ExternalIngest, SEED);
    let o = run_external_ingest(&spec, &fresh_dir("external"), Some(&cache())).unwrap();
    let pass = o.acceptance_rate >= 0.8;
    let _ = writeln!(
        std::io::stderr(),
        "external surrogate {}: acceptance {:.3} over {} trials, threshold {:.3}",
        if pass { "PASS" } else { "FAIL" },
        o.acceptance_rate,
        o.reports.len(),
        o.threshold.value
    );
    assert!(pass, "acceptance {}", o.acceptance_rate);
}

// ---------------------------------------------------------------- criterion 8

/// Shrinks a scenario to seconds of work while keeping every stage.
fn tiny_spec(kind: ScenarioKind) -> ExperimentSpec {
    let mut spec = ExperimentSpec::default_for(kind, 77);
    spec.training.max_epochs = 3;
    spec.verify.trials = 4;
    spec.verify.tsne_perplexity = 4.0;
    spec.verify.tsne_iterations = 40;
    let shrink_family = |f: &mut cvverify::harness::CatFamilySpec| {
        f.side = 16;
        f.extent = 3.0;
        f.k = 10;
        f.train_alphas = vec![1.0, 1.5, 2.0];
        f.test_alphas = vec![1.2];
        f.target_fidelities = vec![0.9, 1.0];
    };
    match &mut spec.scenario {
        Scenario::CatVerification(c) => {
            shrink_family(&mut c.family);
            c.fractions = vec![0.75];
            c.shot_counts = vec![50];
            c.tsne_alphas = vec![1.0, 1.5];
        }
        Scenario::ComplexityComparison(c) => {
            shrink_family(&mut c.family);
            c.fractions = vec![0.5];
        }
        Scenario::KerrDynamics(d) => {
            d.side = 16;
            d.k = 10;
            d.train_alphas = vec![1.0, 2.0];
            d.train_times = vec![0.0, 0.5];
            d.test_alphas = vec![1.5];
            d.test_times = vec![0.0, 0.5, 1.0];
            d.fractions = vec![1.0];
        }
        Scenario::AffineEquivalence(a) => {
            a.side = 16;
            a.k = 10;
            a.train_thetas = vec![PI / 2.0, PI];
            a.test_thetas = vec![5.0 * PI / 8.0, 7.0 * PI / 8.0];
            a.present_pixels = 128;
            a.test_images_per_state = 3;
        }
        Scenario::ExternalIngest(e) => {
            e.side = 16;
            e.k = 10;
            e.train_thetas = vec![PI / 2.0, PI, 1.5 * PI];
            e.train_fraction = 0.5;
            e.subsample_fraction = 0.5;
            e.trials = 5;
        }
    }
    spec.validate().unwrap();
    spec
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn first_difference(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Option<String> {
    if a.keys().ne(b.keys()) {
        return Some(format!("file sets differ: {:?} vs {:?}", a.keys(), b.keys()));
    }
    a.iter().find(|(k, v)| b[*k] != **v).map(|(k, _)| format!("{k} differs"))
}

#[test]
fn criterion_8_determinism() {
    let mut failures = Vec::new();
    let mut files = 0;
    for kind in ScenarioKind::ALL {
        let spec = tiny_spec(kind);
        let name = kind.name();
        let run = |tag: &str, cache: Option<&ModelCache>| {
            let dir = fresh_dir(&format!("determinism-{name}-{tag}"));
            run_experiment(&spec, &dir, cache).unwrap();
            read_tree(&dir)
        };
        let first = run("a", None);
        let second = run("b", None);
        files += first.len();
        if let Some(d) = first_difference(&first, &second) {
            failures.push(format!("{name} rerun: {d}"));
        }
        let cache_dir = tmp("acceptance-runs").join(format!("determinism-{name}-cache"));
        let _ = std::fs::remove_dir_all(&cache_dir);
        let cache = ModelCache::new(cache_dir);
        let cold = run("cold", Some(&cache));
        let warm = run("warm", Some(&cache));
        for (tag, tree) in [("cold cache", &cold), ("warm cache", &warm)] {
            if let Some(d) = first_difference(&first, tree) {
                failures.push(format!("{name} {tag}: {d}"));
            }
        }

        // every written checkpoint reloads to the same bits and reserializes identically
        let dir = tmp("acceptance-runs").join(format!("determinism-{name}-a"));
        for (file, _) in first.iter().filter(|(k, _)| k.starts_with("model_")) {
            let params = NetworkParams::load(&dir.join(file)).unwrap();
            let again = NetworkParams::from_json(&params.to_json(), file).unwrap();
            let same_bits = params.values().len() == again.values().len()
                && params
                    .values()
                    .iter()
                    .zip(again.values())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same_bits || again.layout() != params.layout() || again.to_json() != params.to_json() {
                failures.push(format!("{name}: {file} does not round-trip"));
            }
        }
    }

    // a freshly initialized checkpoint through a file
    let params = NetworkParams::init(NetworkLayout::default_for(32), 8).unwrap();
    let path = tmp("acceptance-runs").join("roundtrip.json");
    params.save(&path).unwrap();
    let loaded = NetworkParams::load(&path).unwrap();
    if params.values().iter().zip(loaded.values()).any(|(a, b)| a.to_bits() != b.to_bits()) {
        failures.push("initial checkpoint does not round-trip".into());
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!("5 scenarios, {files} output files identical across reruns and cache states")
    } else {
        failures.join("; ")
    };
    report(8, "determinism", pass, &detail);
    assert!(pass, "{detail}");
}
