use orlicz_lab::empirical::{self, IndexClass, Method};
use orlicz_lab::measures::{MeasureSpec, SampleMatrix};
use proptest::prelude::*;

fn sample_of(rows: &[Vec<f64>]) -> SampleMatrix {
    SampleMatrix::from_rows(MeasureSpec::gaussian(rows[0].len()), rows).unwrap()
}

fn rows_strategy(n: usize, k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, n), k)
}

/// Planar oracle: `|⟨x, t⟩| ≥ u` holds on closed arcs of the circle, so the
/// supremum of the count is attained at an arc endpoint.
fn planar_tail_sup(rows: &[Vec<f64>], u: f64) -> usize {
    let mut angles = vec![0.0];
    for x in rows {
        let r = x[0].hypot(x[1]);
        if r >= u {
            let base = x[1].atan2(x[0]);
            let half = (u / r).min(1.0).acos();
            angles.extend([base - half, base + half, base]);
        }
    }
    angles
        .iter()
        .map(|a| {
            let (s, c) = a.sin_cos();
            rows.iter().filter(|x| (x[0] * c + x[1] * s).abs() >= u * (1.0 - 1e-9)).count()
        })
        .max()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn tail_counts_are_nonincreasing(rows in rows_strategy(3, 2..=8)) {
        let s = sample_of(&rows);
        let levels = [0.1, 0.3, 0.6, 1.0, 1.5, 2.5];
        let tc = empirical::tail_count_sup(&s, &IndexClass::sphere(3), &levels, 500).unwrap();
        prop_assert!(tc.counts.windows(2).all(|w| w[0] >= w[1]), "{:?}", tc.counts);
        for (&u, (&c, t)) in levels.iter().zip(tc.counts.iter().zip(&tc.directions)) {
            prop_assert_eq!(empirical::count_at(&s, t, u), c);
        }
    }

    #[test]
    fn planar_tail_counts_match_the_arc_oracle(rows in rows_strategy(2, 6..=6), u in 0.2f64..1.5) {
        let s = sample_of(&rows);
        let tc = empirical::tail_count_sup(&s, &IndexClass::sphere(2), &[u], 500).unwrap();
        prop_assert_eq!(tc.counts[0], planar_tail_sup(&rows, u));
    }

    #[test]
    fn top_ell_is_monotone_and_subadditive(rows in rows_strategy(3, 4..=9)) {
        let s = sample_of(&rows);
        let k = rows.len();
        let t: Vec<f64> = (1..=k).map(|l| empirical::top_ell_sum_sup(&s, l, Method::EnumerationExact).unwrap().value).collect();
        for l in 1..k {
            prop_assert!(t[l] >= t[l - 1] - 1e-12);
        }
        for a in 1..k {
            for b in 1..=(k - a) {
                prop_assert!(t[a + b - 1] <= t[a - 1] + t[b - 1] + 1e-9);
            }
        }
    }

    #[test]
    fn top_ell_scales_linearly(rows in rows_strategy(2, 3..=7), lambda in -5.0f64..5.0) {
        prop_assume!(lambda.abs() > 1e-3);
        let s = sample_of(&rows);
        let scaled = s.scaled(lambda);
        let ell = rows.len() / 2 + 1;
        let a = empirical::top_ell_sum_sup(&s, ell, Method::EnumerationExact).unwrap().value;
        let b = empirical::top_ell_sum_sup(&scaled, ell, Method::EnumerationExact).unwrap().value;
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-9 * b.max(1.0));
    }

    #[test]
    fn quadratic_deviation_ignores_row_signs(rows in rows_strategy(3, 3..=10), flips in prop::collection::vec(any::<bool>(), 10)) {
        let s = sample_of(&rows);
        let flipped: Vec<Vec<f64>> = rows
            .iter()
            .zip(&flips)
            .map(|(r, &f)| if f { r.iter().map(|x| -x).collect() } else { r.clone() })
            .collect();
        let cls = IndexClass::sphere(3);
        let a = empirical::deviation_sup(&s, &cls, 2.0, Method::EigenExact).unwrap().value;
        let b = empirical::deviation_sup(&sample_of(&flipped), &cls, 2.0, Method::EigenExact).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

#[test]
fn gradient_ascent_reaches_the_eigen_value() {
    for seed in 0..5u64 {
        let s = orlicz_lab::measures::sample(&MeasureSpec::gaussian(3), 40, seed).unwrap();
        let cls = IndexClass::sphere(3);
        let eig = empirical::deviation_sup(&s, &cls, 2.0, Method::EigenExact).unwrap().value;
        let grad = empirical::deviation_sup(&s, &cls, 2.0, Method::GradientHeuristic).unwrap().value;
        assert!((eig - grad).abs() <= 1e-6 * eig.max(1.0), "seed {seed}: eigen {eig} gradient {grad}");
    }
}
