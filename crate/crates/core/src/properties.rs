use std::sync::OnceLock;

use proptest::prelude::*;

use crate::arrays::{flat_position, multi_index};
use crate::design::RotationDesign;
use crate::estimators::{
    ak_linear_weights, ak_recursive, base_weights, calibrate, direct_estimator, mis_estimator,
    AkCoefficients, ErrorModel, SampleData, Totals,
};
use crate::evaluation::{estimate_sigma, rate_jacobian, type1_quantile, Moment, RateVariances};
use crate::experiment::fmt_num;
use crate::population::{generate_population_with, GenerationSettings, Population, RateTargets, Variant};

const MONTHS: usize = 6;

fn small() -> &'static (RotationDesign, Population) {
    static CELL: OnceLock<(RotationDesign, Population)> = OnceLock::new();
    CELL.get_or_init(|| {
        let design = RotationDesign {
            households: 4000,
            months: MONTHS,
            ..Default::default()
        };
        let settings = GenerationSettings {
            households: 4000,
            ..Default::default()
        };
        let targets = RateTargets::packaged().truncated(MONTHS).unwrap();
        let pop = generate_population_with(Variant::IndexWeighted, &targets, 31, &settings).unwrap();
        (design, pop)
    })
}

fn coeff() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0f64..=1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flattening_round_trips(dims in prop::collection::vec(1usize..6, 1..5), seed in 0usize..10_000) {
        let total: usize = dims.iter().product();
        let pos = seed % total + 1;
        let idx = multi_index(&dims, pos);
        prop_assert_eq!(flat_position(&dims, &idx), pos);
    }

    #[test]
    fn direct_is_group_average(r in 1usize..=200) {
        let (design, pop) = small();
        let a = design.assignment(r).unwrap();
        let w = base_weights(design, &a);
        let s = SampleData::observe(pop, a, None).unwrap();
        let d = direct_estimator(&s, &w).unwrap();
        let avg = mis_estimator(&s, &w).unwrap().group_average();
        for m in 1..=MONTHS {
            for e in 1..=3 {
                prop_assert!((d.get(m, e) - avg.get(m, e)).abs() <= 1e-9 * d.get(m, e).abs().max(1.0));
            }
        }
    }

    #[test]
    fn ak_weights_sum_to_identity(p in coeff()) {
        let design = RotationDesign::with_months(MONTHS);
        let w = ak_linear_weights(&AkCoefficients::from_params(p), &design, MONTHS);
        let mat = w.matrix();
        for m in 1..=MONTHS {
            for e in 1..=3 {
                for f in 1..=3 {
                    let mut s = 0.0;
                    for mp in 1..=MONTHS {
                        for g in 1..=8 {
                            s += mat.get(&[m, e], &[mp, g, f]);
                        }
                    }
                    let want = if e == f { 1.0 } else { 0.0 };
                    prop_assert!((s - want).abs() < 1e-12, "m={} e={} f={} sum={}", m, e, f, s);
                }
            }
        }
    }

    #[test]
    fn ak_recursive_matches_weights(p in coeff(), r in 1usize..=200) {
        let (design, pop) = small();
        let c = AkCoefficients::from_params(p);
        let a = design.assignment(r).unwrap();
        let w = base_weights(design, &a);
        let s = SampleData::observe(pop, a, None).unwrap();
        let rec = ak_recursive(design, &s, &w, &c).unwrap();
        let lin = ak_linear_weights(&c, design, MONTHS).apply(&mis_estimator(&s, &w).unwrap()).unwrap();
        for m in 1..=MONTHS {
            for e in 1..=3 {
                let (x, y) = (rec.get(m, e), lin.get(m, e));
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mse_is_bias_squared_plus_variance(truth in -10.0f64..10.0, values in prop::collection::vec(-20.0f64..20.0, 1..40)) {
        let mo = Moment::from_values(truth, values.iter().copied());
        let gap = (mo.mse - (mo.bias * mo.bias + mo.variance)).abs();
        prop_assert!(gap <= 1e-9 * mo.mse.max(1.0));
        prop_assert!(mo.variance >= -1e-12);
    }

    #[test]
    fn sigma_hat_is_symmetric(r in 1usize..=200) {
        let (design, pop) = small();
        let a = design.assignment(r).unwrap();
        let s = SampleData::observe(pop, a, None).unwrap();
        let sh = estimate_sigma(design, &s).unwrap();
        for i in 0..sh.nrows() {
            for j in 0..i {
                prop_assert_eq!(sh[(i, j)], sh[(j, i)]);
            }
        }
    }

    #[test]
    fn measurement_error_touches_only_its_group(r in 1usize..=200, g in 1usize..=8, frac in 0.0f64..1.0) {
        let (design, pop) = small();
        let model = ErrorModel { group: g, ..ErrorModel::employed_to_unemployed(frac) };
        let clean = SampleData::observe(pop, design.assignment(r).unwrap(), None).unwrap();
        let noisy = SampleData::observe(pop, design.assignment(r).unwrap(), Some(&model)).unwrap();
        for m in 1..=MONTHS {
            for h in 1..=8 {
                let (c, n) = (clean.group_status(m, h), noisy.group_status(m, h));
                if h != g {
                    prop_assert_eq!(c, n);
                } else {
                    for (x, y) in c.iter().zip(n) {
                        prop_assert!(x == y || (*x == 0 && *y == 1));
                    }
                }
            }
        }
    }

    #[test]
    fn compromise_is_level_plus_change(level in prop::collection::vec(0.0f64..1.0, 2..10)) {
        let change: Vec<f64> = level.windows(2).map(|w| w[0] + w[1]).collect();
        let v = RateVariances { level: level.clone(), change: change.clone() };
        let total: f64 = level.iter().chain(&change).sum();
        prop_assert!((v.objective(crate::evaluation::ObjectiveKind::Compromise) - total).abs() < 1e-12);
    }

    #[test]
    fn calibration_hits_targets(base in prop::collection::vec(0.5f64..3.0, 6..20), shift in -0.2f64..0.2) {
        let n = base.len();
        let h: Vec<f64> = (0..n).flat_map(|k| [1.0, (k % 3) as f64, ((k * 7) % 5) as f64]).collect();
        let mut t = [0.0; 3];
        for k in 0..n {
            for j in 0..3 {
                t[j] += base[k] * h[3 * k + j];
            }
        }
        t[0] *= 1.0 + shift;
        let out = calibrate(&base, &h, &t, 1).unwrap();
        for j in 0..3 {
            let got: f64 = (0..n).map(|k| out.weights[k] * h[3 * k + j]).sum();
            prop_assert!((got - t[j]).abs() <= 1e-8 * t[j].abs().max(1.0));
        }
    }

    #[test]
    fn rate_gradient_matches_differences(e in 100.0f64..1e5, u in 1.0f64..1e4, n in 0.0f64..1e5) {
        let row = [e, u, n];
        let g = rate_jacobian(row, 1).unwrap();
        let rate = |r: [f64; 3]| r[1] / (r[0] + r[1]);
        for i in 0..3 {
            let h = 1e-4 * row[i].abs().max(1.0);
            let mut up = row;
            let mut dn = row;
            up[i] += h;
            dn[i] -= h;
            let fd = (rate(up) - rate(dn)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * g.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn quantiles_are_order_statistics(mut xs in prop::collection::vec(-5.0f64..5.0, 1..30), p in 0.0f64..=1.0) {
        xs.sort_by(f64::total_cmp);
        let q = type1_quantile(&xs, p);
        prop_assert!(xs.contains(&q));
        prop_assert!(type1_quantile(&xs, 0.0) <= q && q <= type1_quantile(&xs, 1.0));
    }

    #[test]
    fn formatting_keeps_twelve_digits(x in -1e9f64..1e9) {
        let back: f64 = fmt_num(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300));
    }
}

#[test]
fn totals_rates_need_a_labor_force() {
    let t = Totals::from_rows(vec![[0.0, 0.0, 5.0]]);
    assert!(t.rates().is_err());
}
