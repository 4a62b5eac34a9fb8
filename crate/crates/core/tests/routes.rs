//! Cross-module agreement between the solver routes and the oracles.

use fmeasure::dyson::{dyson_next_term, dyson_series, dyson_sum_segmented, initial_family};
use fmeasure::oracles::{constant_potential_column, crank_nicolson_with, CrankNicolsonOptions};
use fmeasure::propagate::{fundamental_solution_v, SliceSchedule, SplittingScheme};
use fmeasure::volterra::volterra_solve;
use fmeasure::wiener_mc::{mc_functional, PathFunctional};
use fmeasure::{Field, Potential, SpatialGrid, TransitionKernel, Transport};
use num_complex::Complex64;

fn grid() -> SpatialGrid {
    SpatialGrid::new(-12.0, 12.0, 1025).unwrap()
}

fn heat() -> TransitionKernel {
    TransitionKernel::heat(1.0).unwrap()
}

fn phi(r: f64, t: f64) -> f64 {
    (-r * r / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
}

#[test]
fn harmonic_routes_agree() {
    let v = Potential::harmonic(1.0);
    let s = SliceSchedule::new(1.0, 512, SplittingScheme::Strang).unwrap();
    let tr = fundamental_solution_v(&heat(), &v, &grid(), &s, 0.0).unwrap();
    let vo = volterra_solve(&heat(), &v, 0.0, 1.0, &grid(), 256).unwrap();
    let (dy, _) = dyson_sum_segmented(&heat(), &v, 0.0, 1.0, 10, &grid(), 2, 128).unwrap();
    let opts = CrankNicolsonOptions {
        rannacher_steps: 2,
        ..Default::default()
    };
    let cn = crank_nicolson_with(&Field::delta(grid(), 0.0).unwrap(), 1.0, &v, 1.0, 256, &opts).unwrap();
    let fields = [&tr, vo.last(), &dy, cn.last()];
    for a in fields {
        for b in fields {
            assert!(a.rel_l2_diff(b).unwrap() < 1e-3);
        }
    }
}

#[test]
fn dyson_bound_dominates_error_at_every_order() {
    let g = SpatialGrid::new(-12.0, 12.0, 513).unwrap();
    let want = constant_potential_column(g, 1.0, 0.7, 0.0, 1.0).unwrap();
    let series = dyson_series(&heat(), &Potential::constant(0.7), 0.0, 1.0, 8, &g, 1024).unwrap();
    let mut sum = series.terms[0].clone();
    let mut fact = 1.0;
    for (n, k) in series.terms.iter().enumerate().skip(1) {
        fact *= n as f64;
        let c = if n % 2 == 0 { 1.0 } else { -1.0 } / fact;
        sum = sum.axpby(Complex64::new(1.0, 0.0), k, Complex64::new(c, 0.0)).unwrap();
        let bound = series.scale.powi(n as i32 + 1) / (fact * (n + 1) as f64) * series.growth * series.initial_mass;
        let err = sum.sub(&want).unwrap().l1_norm();
        assert!(err <= bound, "order {n}: {err} > {bound}");
    }
    assert_eq!(sum, series.sum());
}

// For V = x^2/2 the first term has a closed form through the bridge moments:
// K1(x, y; t) = phi(x - y, t) (t (x^2 + x y + y^2) / 6 + D t^2 / 6).
#[test]
fn first_term_matches_nested_quadrature() {
    let g = SpatialGrid::new(-12.0, 12.0, 481).unwrap();
    let v = Potential::harmonic(1.0);
    let (t, x) = (0.5, 0.5);
    let exact = phi(x, t) * (t * x * x / 6.0 + t * t / 6.0);
    let transport = Transport::auto(&heat(), g).unwrap();
    let delta = Field::delta(g, 0.0).unwrap();
    let err = |steps| {
        let k0 = initial_family(&transport, &delta, t, steps).unwrap();
        let k1 = dyson_next_term(&heat(), &v, &k0).unwrap();
        (k1.last().at(x).unwrap().re - exact).abs()
    };
    let (e1, e2, e3) = (err(16), err(32), err(64));
    assert!(e3 < 2e-4 * exact, "{e3}");
    for r in [e1 / e2, e2 / e3] {
        assert!((3.5..4.5).contains(&r), "ratio {r}");
    }
}

#[test]
fn volterra_time_error_is_second_order() {
    let g = SpatialGrid::new(-12.0, 12.0, 513).unwrap();
    let v = Potential::constant(0.7);
    let want = constant_potential_column(g, 1.0, 0.7, 0.0, 1.0).unwrap();
    let err = |m| {
        volterra_solve(&heat(), &v, 0.0, 1.0, &g, m)
            .unwrap()
            .last()
            .rel_l2_diff(&want)
            .unwrap()
    };
    let (a, b) = (err(32), err(64));
    assert!((3.5..4.5).contains(&(a / b)), "{a} {b}");
}

#[test]
fn monte_carlo_bias_shrinks_with_steps() {
    let v = Potential::harmonic(1.0);
    let reference = volterra_solve(&heat(), &v, 0.0, 1.0, &grid(), 256)
        .unwrap()
        .last()
        .at(0.0)
        .unwrap()
        .re;
    let f = PathFunctional::exp_neg();
    let est = |m| mc_functional(0.0, 0.0, 1.0, 1.0, &v, &f, 200_000, m, 11).unwrap();
    let coarse = est(1);
    let fine = est(16);
    assert!((coarse.value - reference).abs() > (fine.value - reference).abs());
    assert!((fine.value - reference).abs() < 4.0 * fine.stderr);
    assert!(phi(0.0, 1.0) > fine.value);
}
