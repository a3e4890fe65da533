use super::*;
use crate::estimators::blue_weights;
use crate::evaluation::{exact_sigma, Enumeration};
use crate::population::{generate_population_with, GenerationSettings, Population, RateTargets, Variant};

fn small(months: usize) -> (Population, RotationDesign) {
    let design = RotationDesign {
        households: 2000,
        months,
        ..RotationDesign::default()
    };
    let settings = GenerationSettings {
        households: 2000,
        ..GenerationSettings::default()
    };
    let t = RateTargets::packaged().truncated(months).unwrap();
    (
        generate_population_with(Variant::IndexWeighted, &t, 5, &settings).unwrap(),
        design,
    )
}

fn kernel_for(pop: &Population, design: &RotationDesign, scale: f64) -> AkVarianceKernel {
    let en = Enumeration::new(pop, design, None).unwrap();
    let mut sigma = exact_sigma(&en);
    for j in 0..sigma.ncols() {
        for i in 0..sigma.nrows() {
            sigma[(i, j)] *= scale;
        }
    }
    let (j1, _) = rate_jacobians(en.truth()).unwrap();
    AkVarianceKernel::new(design, sigma.as_ref(), &j1).unwrap()
}

#[test]
fn optimum_beats_production_and_grid() {
    let (pop, design) = small(12);
    let kernel = kernel_for(&pop, &design, 1.0);
    for kind in ObjectiveKind::ALL {
        let opt = optimal_ak(&kernel, kind, 2, 1, &NelderMeadOptions::default());
        assert_eq!(opt.runs.len(), 3);
        assert!(opt.best.value <= kernel.objective(cps_start(), kind));
        assert!((opt.best.value - kernel.objective(to4(&opt.best.params), kind)).abs() <= 1e-10 * opt.best.value);
        let grid = census_grid_ak(&kernel, kind);
        assert_eq!(grid.table.len(), 10_000);
        assert!(grid.value >= opt.best.value);
    }
    let p = [0.2, 0.5, -0.3, 0.9];
    let v = kernel.variances(p);
    assert_eq!(
        v.objective(ObjectiveKind::Compromise),
        v.objective(ObjectiveKind::Level) + v.objective(ObjectiveKind::Change)
    );
}

#[test]
fn argmin_ignores_sigma_scale() {
    let (pop, design) = small(10);
    let a = optimal_ak(&kernel_for(&pop, &design, 1.0), ObjectiveKind::Level, 0, 0, &NelderMeadOptions::default());
    let b = optimal_ak(&kernel_for(&pop, &design, 7.5), ObjectiveKind::Level, 0, 0, &NelderMeadOptions::default());
    for (x, y) in a.best.params.iter().zip(&b.best.params) {
        assert!((x - y).abs() < 1e-5, "{:?} {:?}", a.best.params, b.best.params);
    }
}

#[test]
fn separable_grid_picks_nearest_point() {
    let target = [0.33, 0.71, 0.06, 0.88];
    let f = |p: [f64; 4]| p.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let v = census_values();
    let g = grid_search(f, &product_grid([&v, &v, &v, &v]));
    let want = [0.3, 0.7, 0.1, 0.9];
    for (a, b) in g.params.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn alpha_search_is_deterministic() {
    let (pop, design) = small(6);
    let en = Enumeration::new(&pop, &design, None).unwrap();
    let grid = alpha_grid();
    assert_eq!(grid.len(), 21);
    let a = best_alpha(&en, ObjectiveKind::Level, &grid).unwrap();
    let b = best_alpha(&en, ObjectiveKind::Level, &grid).unwrap();
    assert_eq!(a.alpha, b.alpha);
    assert_eq!(a.value, b.value);
    assert!(a.table.iter().all(|&(_, v)| v >= a.value));
    assert_eq!(a.table.len() + a.excluded.len(), 21);
}

#[test]
fn plug_in_identity() {
    let (pop, design) = small(4);
    let en = Enumeration::new(&pop, &design, None).unwrap();
    let sigma = exact_sigma(&en);
    let e = empirical_best(EmpiricalVariant::Blue, &design, sigma.as_ref(), en.truth(), &NelderMeadOptions::default())
        .unwrap();
    let w = blue_weights(sigma.as_ref(), 4, 8).unwrap();
    match e {
        EmpiricalEstimator::Blue(x) => assert_eq!(x.as_mat(), w.as_mat()),
        EmpiricalEstimator::Ak(_) => panic!("wrong variant"),
    }
    let (j1, _) = rate_jacobians(en.truth()).unwrap();
    let kernel = AkVarianceKernel::new(&design, sigma.as_ref(), &j1).unwrap();
    let best = optimal_ak(&kernel, ObjectiveKind::Change, 0, 0, &NelderMeadOptions::default());
    match empirical_best(
        EmpiricalVariant::Ak(ObjectiveKind::Change),
        &design,
        sigma.as_ref(),
        en.truth(),
        &NelderMeadOptions::default(),
    )
    .unwrap()
    {
        EmpiricalEstimator::Ak(c) => assert_eq!(c, best.coefficients()),
        EmpiricalEstimator::Blue(_) => panic!("wrong variant"),
    }
}
