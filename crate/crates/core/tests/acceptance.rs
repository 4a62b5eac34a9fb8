//! Acceptance suite: one `[PASS]` / `[FAIL]` line per criterion.
//!
//! Run with `cargo test -p fmeasure --test acceptance`.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use fmeasure::dyson::{dyson_series, dyson_sum_segmented};
use fmeasure::kernel::{check_chapman_kolmogorov, check_delta_limit_at, check_normalization};
use fmeasure::oracles::{constant_potential_column, crank_nicolson_with, CrankNicolsonOptions};
use fmeasure::propagate::{
    cylinder_integral_exp, cylinder_integral_general, fundamental_solution_v, trotter_propagate, SliceSchedule,
    SplittingScheme,
};
use fmeasure::volterra::{residual_check, volterra_solve};
use fmeasure::wiener_mc::{mc_functional, sample_paths, PathFunctional};
use fmeasure::{
    lagrangian_to_kernel, Field, Potential, SignConvention, SpatialGrid, SymbolTerm, TransitionKernel, Transport,
};
use num_complex::Complex64;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn grid() -> SpatialGrid {
    SpatialGrid::new(-12.0, 12.0, 1025).unwrap()
}

fn heat() -> TransitionKernel {
    TransitionKernel::heat(1.0).unwrap()
}

fn phi(r: f64, t: f64) -> f64 {
    (-r * r / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

fn normal(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn check(ok: bool, what: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what)
    }
}

/// Least-squares slope of `ln e` against `ln n`.
fn slope(ns: &[f64], es: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn kernel_identities() -> Outcome {
    let g = grid();
    let kernels = [
        ("heat", heat()),
        ("ou", TransitionKernel::ornstein_uhlenbeck(1.0, 1.0).unwrap()),
    ];
    let test_fn = Field::from_fn_real(g, |y| (-y * y).exp());
    let mut notes = Vec::new();
    for (name, k) in &kernels {
        let ck = check_chapman_kolmogorov(k, &g, 1.0, 0.5).map_err(|e| e.to_string())?;
        check(ck.max_error < 1e-8, format!("{name} CK residual {:e}", ck.max_error))?;
        let norm = check_normalization(k, &g, 1.0).map_err(|e| e.to_string())?;
        check(
            norm.max_error < 1e-10,
            format!("{name} normalization {:e}", norm.max_error),
        )?;
        let d = check_delta_limit_at(k, &test_fn, 0.0, &[0.1, 0.01, 0.001]).map_err(|e| e.to_string())?;
        check(d.windows(2).all(|w| w[1] < w[0]), format!("{name} delta errors {d:?}"))?;
        notes.push(format!(
            "{name}: ck {:.1e} norm {:.1e} delta {:.1e}>{:.1e}>{:.1e}",
            ck.max_error, norm.max_error, d[0], d[1], d[2]
        ));
    }
    Ok(notes.join("; "))
}

fn constant_potential() -> Outcome {
    let g = grid();
    let v = Potential::constant(0.7);
    let want = constant_potential_column(g, 1.0, 0.7, 0.0, 1.0).unwrap();
    let err = |e: fmeasure::Error| e.to_string();

    let s = SliceSchedule::new(1.0, 64, SplittingScheme::Strang).unwrap();
    let tr = fundamental_solution_v(&heat(), &v, &g, &s, 0.0).map_err(err)?;
    let tr_err = tr.rel_l2_diff(&want).map_err(err)?;
    check(tr_err < 1e-10, format!("trotter rel {tr_err:e}"))?;

    let cyl = cylinder_integral_exp(&heat(), &v, &g, 0.0, 0.0, 1.0, 64, SplittingScheme::Lie).map_err(err)?;
    let exact = (-0.7f64).exp() * phi(0.0, 1.0);
    let cyl_err = (cyl - exact).norm() / exact;
    check(cyl_err < 1e-10, format!("cylinder rel {cyl_err:e}"))?;

    let series = dyson_series(&heat(), &v, 0.0, 1.0, 8, &g, 1024).map_err(err)?;
    let dy = series.sum();
    let dy_rel = dy.rel_l2_diff(&want).map_err(err)?;
    let dy_l1 = dy.sub(&want).map_err(err)?.l1_norm();
    let bound = series.remainder_bound;
    check(dy_rel < 1e-6, format!("dyson rel {dy_rel:e}"))?;
    check(
        dy_l1 <= bound,
        format!("dyson L1 error {dy_l1:e} above bound {bound:e}"),
    )?;

    let vo = volterra_solve(&heat(), &v, 0.0, 1.0, &g, 256).map_err(err)?;
    let vo_err = vo.last().rel_l2_diff(&want).map_err(err)?;
    check(vo_err < 1e-4, format!("volterra rel {vo_err:e}"))?;
    Ok(format!(
        "trotter {tr_err:.1e}, cylinder {cyl_err:.1e}, dyson {dy_rel:.1e} (L1 {dy_l1:.1e} <= bound {bound:.2e}), volterra {vo_err:.1e}"
    ))
}

fn harmonic_benchmark() -> Outcome {
    let start = Instant::now();
    let g = grid();
    let v = Potential::harmonic(1.0);
    let err = |e: fmeasure::Error| e.to_string();
    let s = SliceSchedule::new(1.0, 512, SplittingScheme::Strang).unwrap();
    let tr = fundamental_solution_v(&heat(), &v, &g, &s, 0.0).map_err(err)?;
    let vo = volterra_solve(&heat(), &v, 0.0, 1.0, &g, 256).map_err(err)?;
    // tau sup|V| = 72 / 128 on the grid
    let (dy, _) = dyson_sum_segmented(&heat(), &v, 0.0, 1.0, 10, &g, 2, 128).map_err(err)?;
    let opts = CrankNicolsonOptions {
        rannacher_steps: 2,
        ..Default::default()
    };
    let cn = crank_nicolson_with(&Field::delta(g, 0.0).unwrap(), 1.0, &v, 1.0, 256, &opts).map_err(err)?;
    let names = ["trotter", "volterra", "dyson", "cn"];
    let fields = [&tr, vo.last(), &dy, cn.last()];
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            let d = fields[i].rel_l2_diff(fields[j]).map_err(err)?;
            check(d < 1e-3, format!("{}-{} rel L2 {d:e}", names[i], names[j]))?;
            worst = worst.max(d);
        }
    }
    let est = mc_functional(0.0, 0.0, 1.0, 1.0, &v, &PathFunctional::exp_neg(), 100_000, 256, 2024).map_err(err)?;
    let reference = vo.last().at(0.0).map_err(err)?.re;
    let z = (est.value - reference) / est.stderr;
    check(
        z.abs() <= 3.0,
        format!("mc {} vs volterra {reference}: {z:.2} stderr", est.value),
    )?;
    let secs = start.elapsed().as_secs_f64();
    Ok(format!(
        "max pairwise rel L2 {worst:.1e}; mc {:.6} +- {:.1e} vs volterra {reference:.6} ({z:+.2} stderr); {secs:.1} s",
        est.value, est.stderr
    ))
}

fn convergence_orders() -> Outcome {
    let g = grid();
    let v = Potential::harmonic(1.0);
    let err = |e: fmeasure::Error| e.to_string();
    let f0 = Field::from_fn_real(g, |x| normal(x, 1.0));
    let ns = [16usize, 32, 64, 128];
    let mut slopes = Vec::new();
    for (scheme, want, tol) in [(SplittingScheme::Lie, 1.0, 0.15), (SplittingScheme::Strang, 2.0, 0.2)] {
        let run = |n: usize| trotter_propagate(&f0, &heat(), &v, &SliceSchedule::new(1.0, n, scheme).unwrap());
        let mut es = Vec::new();
        for &n in &ns {
            es.push(
                run(n)
                    .map_err(err)?
                    .sub(&run(2 * n).map_err(err)?)
                    .map_err(err)?
                    .l2_norm(),
            );
        }
        let p = -slope(&ns.map(|n| n as f64), &es);
        check((p - want).abs() <= tol, format!("{scheme:?} slope {p:.3}"))?;
        slopes.push(p);
    }

    let small = SpatialGrid::new(-12.0, 12.0, 513).unwrap();
    let c = Potential::constant(0.7);
    let want = constant_potential_column(small, 1.0, 0.7, 0.0, 1.0).unwrap();
    let vo = |m| -> Result<f64, String> {
        let s = volterra_solve(&heat(), &c, 0.0, 1.0, &small, m).map_err(err)?;
        s.last().rel_l2_diff(&want).map_err(err)
    };
    let dy = |m| -> Result<f64, String> {
        let s = dyson_series(&heat(), &c, 0.0, 1.0, 12, &small, m).map_err(err)?;
        s.sum().rel_l2_diff(&want).map_err(err)
    };
    let vr = [vo(32)? / vo(64)?, vo(64)? / vo(128)?];
    let dr = [dy(16)? / dy(32)?, dy(32)? / dy(64)?];
    for r in vr.iter().chain(&dr) {
        check((3.5..=4.5).contains(r), format!("time refinement ratio {r:.3}"))?;
    }

    let mut ratios = Vec::new();
    for seed in [1u64, 2, 3] {
        let f = PathFunctional::exp_neg();
        let a = mc_functional(0.0, 0.0, 1.0, 1.0, &v, &f, 25_000, 64, seed).map_err(err)?;
        let b = mc_functional(0.0, 0.0, 1.0, 1.0, &v, &f, 100_000, 64, seed).map_err(err)?;
        let r = b.stderr / a.stderr;
        check((0.4..=0.6).contains(&r), format!("mc stderr ratio {r:.3}"))?;
        ratios.push(r);
    }
    Ok(format!(
        "lie {:.3}, strang {:.3}; volterra x{:.2} x{:.2}; dyson x{:.2} x{:.2}; mc stderr ratios {:.3} {:.3} {:.3}",
        slopes[0], slopes[1], vr[0], vr[1], dr[0], dr[1], ratios[0], ratios[1], ratios[2]
    ))
}

fn spectral_route() -> Outcome {
    let err = |e: fmeasure::Error| e.to_string();
    let wide = SpatialGrid::new(-20.0, 20.0, 1025).unwrap();
    let cubic = TransitionKernel::spectral(vec![SymbolTerm::new(3, 1.0)]).map_err(err)?;
    let t = Transport::auto(&cubic, wide).map_err(err)?;
    let mut f = Field::from_fn_real(wide, |x| normal(x, 1.0));
    let mut drift: f64 = 0.0;
    for _ in 0..50 {
        let next = t.apply(&f, 0.05).map_err(err)?;
        drift = drift.max((next.l2_norm() - f.l2_norm()).abs() / f.l2_norm());
        f = next;
    }
    check(drift < 1e-10, format!("cubic L2 drift per step {drift:e}"))?;

    let shipped = [
        heat(),
        cubic,
        TransitionKernel::spectral(vec![SymbolTerm::new(4, 1.0)]).map_err(err)?,
        TransitionKernel::spectral(vec![SymbolTerm::new(1, 0.3), SymbolTerm::new(2, -1.0)]).map_err(err)?,
        lagrangian_to_kernel(&[(2, 1.0)], SignConvention::Dissipative).map_err(err)?,
        lagrangian_to_kernel(&[(3, 1.0)], SignConvention::Dissipative).map_err(err)?,
        lagrangian_to_kernel(&[(4, 1.0)], SignConvention::Dissipative).map_err(err)?,
        lagrangian_to_kernel(&[(2, 1.0), (4, 0.1)], SignConvention::Dissipative).map_err(err)?,
    ];
    for k in &shipped {
        for t in [0.0, 0.1, 1.0, 7.5] {
            let m = k.multiplier(0.0, t).map_err(err)?;
            check(m == Complex64::new(1.0, 0.0), format!("m(0, {t}) = {m}"))?;
        }
    }

    let g = grid();
    let lag = lagrangian_to_kernel(&[(2, 1.0)], SignConvention::Dissipative).map_err(err)?;
    let v = Potential::harmonic(1.0);
    let s = SliceSchedule::new(1.0, 128, SplittingScheme::Strang).unwrap();
    let a = fundamental_solution_v(&lag, &v, &g, &s, 0.0).map_err(err)?;
    let b = fundamental_solution_v(&heat(), &v, &g, &s, 0.0).map_err(err)?;
    let diff = a.max_abs_diff(&b).map_err(err)?;
    check(diff < 1e-8, format!("n=2 spectral vs heat {diff:e}"))?;
    let literal = lagrangian_to_kernel(&[(2, 1.0)], SignConvention::Literal).is_err();
    check(literal, "literal sign accepted as stable".into())?;
    Ok(format!(
        "cubic drift {drift:.1e}/step; m(0)=1 for {} symbols; n=2 vs heat {diff:.1e}",
        shipped.len()
    ))
}

fn estimator_identities() -> Outcome {
    let err = |e: fmeasure::Error| e.to_string();
    let v = Potential::harmonic(1.0);
    let (x, y, t) = (-0.5, 1.0, 1.0);
    let one = mc_functional(x, y, t, 1.0, &v, &PathFunctional::one(), 10_000, 32, 5).map_err(err)?;
    let mass = heat().eval(x, y, t).map_err(err)?.re;
    check(
        (one.value - mass).abs() <= 1e-15 * mass && one.stderr == 0.0,
        format!("f = 1 gives {} +- {} vs {mass}", one.value, one.stderr),
    )?;

    let (n, steps, d) = (100_000usize, 8, 1.0);
    let paths = sample_paths(x, y, t, steps, d, n, 77).map_err(err)?;
    let mut worst: f64 = 0.0;
    for k in 1..steps {
        let s = paths[0].times[k];
        let xs: Vec<f64> = paths.iter().map(|p| p.positions[k]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (n - 1) as f64;
        let want_mean = x + (y - x) * s / t;
        let want_var = 2.0 * d * s * (t - s) / t;
        let zm = (mean - want_mean) / (want_var / n as f64).sqrt();
        let zv = (var - want_var) / (want_var * (2.0 / (n - 1) as f64).sqrt());
        check(
            zm.abs() <= 4.0 && zv.abs() <= 4.0,
            format!("s = {s}: mean z {zm:.2}, var z {zv:.2}"),
        )?;
        worst = worst.max(zm.abs()).max(zv.abs());
    }
    Ok(format!(
        "f = 1 exact with zero stderr; bridge moments within {worst:.2} stderr"
    ))
}

fn general_route() -> Outcome {
    let err = |e: fmeasure::Error| e.to_string();
    let g = grid();
    let v = Potential::from_fn(|x| 1.0 - (-x * x / 2.0).exp(), 0.0, 1.0);
    let (x, y, t, n) = (0.75, 0.0, 1.0, 64);
    let exp = cylinder_integral_exp(&heat(), &v, &g, x, y, t, n, SplittingScheme::Lie).map_err(err)?;
    let gen = cylinder_integral_general(&heat(), &v, |s| (-s).exp(), &g, x, y, t, n, 512).map_err(err)?;
    let d = (exp - gen).norm();
    check(d < 1e-4, format!("general vs exp {d:e}"))?;
    let mass = cylinder_integral_general(&heat(), &v, |_| 1.0, &g, x, y, t, n, 512).map_err(err)?;
    let m = (mass - phi(x - y, t)).norm();
    check(m < 1e-8, format!("f = 1 gives {mass} vs {}", phi(x - y, t)))?;
    Ok(format!("|general - exp| {d:.1e}; |f=1 - phi| {m:.1e}"))
}

fn negative_controls() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("perturbed.toml");
    std::fs::write(
        &cfg,
        "[kernel]\nkind = \"tabulated\"\ntimes = [0.5, 1.0]\n\
         perturb = [{ t = 1.0, x = 0.0, y = 0.0, amount = 1e-2 }]\n\
         [kernel.source]\nkind = \"heat\"\n\
         [grid]\na = -12.0\nb = 12.0\nn = 1025\n[problem]\nt = 1.0\n[method]\nname = \"verify-kernel\"\n",
    )
    .map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_fmeasure"))
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("--quiet")
        .output()
        .map_err(|e| e.to_string())?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    check(
        out.status.code() == Some(3),
        format!("verify-kernel exit {:?}", out.status.code()),
    )?;
    check(
        stderr.contains("chapman-kolmogorov"),
        format!("failure not named: {stderr}"),
    )?;

    let err = |e: fmeasure::Error| e.to_string();
    let v = Potential::harmonic(1.0);
    let mut state = volterra_solve(&heat(), &v, 0.0, 1.0, &grid(), 128).map_err(err)?;
    let clean = residual_check(&state, &heat(), &v).map_err(err)?;
    let j = grid().index_of(0.0).unwrap();
    let col = state.column_mut(64);
    let mut vals = col.values().to_vec();
    vals[j] += 1e-3;
    *col = Field::new(*col.grid(), vals, col.kind()).map_err(err)?;
    let dirty = residual_check(&state, &heat(), &v).map_err(err)?;
    check(
        clean < 1e-4 && dirty > 1e-4 && dirty > 10.0 * clean,
        format!("corruption residual {dirty:e} vs clean {clean:e}"),
    )?;
    Ok(format!(
        "perturbed table exits 3 naming chapman-kolmogorov; volterra residual {clean:.1e} -> {dirty:.1e}"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("kernel identities", kernel_identities),
        ("constant-potential exactness", constant_potential),
        ("cross-method harmonic benchmark", harmonic_benchmark),
        ("convergence orders", convergence_orders),
        ("complex/spectral route", spectral_route),
        ("estimator-level measure identities", estimator_identities),
        ("general-f deterministic route", general_route),
        ("negative controls", negative_controls),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {} {name}: {why} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
