use condreg::csv_io::{read_dataset, read_labeled, write_dataset, write_labeled};
use condreg::synthetic::reduce_to_dataset;
use condreg::{
    evaluate, Algorithm, ConditionalModel, Dataset, KDnf, LabeledExample, SparseLinearRule,
};
use proptest::prelude::*;

fn float() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..=8, 1usize..=4).prop_flat_map(|(n, d)| {
        proptest::collection::vec(
            (0u64..1 << n, proptest::collection::vec(float(), d), float()),
            0..30,
        )
        .prop_map(move |rows| {
            let mut data = Dataset::new(n, d).unwrap();
            for (x, y, z) in rows {
                data.push(x, &y, z).unwrap();
            }
            data
        })
    })
}

fn model(
    n: usize,
    d: usize,
    coeff: impl Strategy<Value = f64>,
) -> impl Strategy<Value = ConditionalModel> {
    let count = KDnf::trivial(n, 1).unwrap().len();
    (
        proptest::collection::vec(any::<bool>(), count),
        proptest::collection::vec(coeff, d),
        0.0f64..1.0,
        any::<bool>(),
    )
        .prop_map(move |(keep, coeffs, eps, l2)| {
            let all = KDnf::trivial(n, 1).unwrap();
            let terms = all
                .terms()
                .iter()
                .zip(keep)
                .filter(|(_, k)| *k)
                .map(|(t, _)| *t);
            let condition = KDnf::new(n, 1, terms).unwrap();
            let algorithm = if l2 {
                Algorithm::L2
            } else {
                Algorithm::SupNorm
            };
            ConditionalModel::new(
                d,
                condition,
                SparseLinearRule::dense(coeffs).unwrap(),
                eps,
                algorithm,
            )
            .unwrap()
        })
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(data in dataset()) {
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), data.len());
        for j in 0..data.len() {
            prop_assert_eq!(back.x_row(j), data.x_row(j));
            let (a, b) = (back.example(j), data.example(j));
            prop_assert_eq!(a.z.to_bits(), b.z.to_bits());
            for (u, v) in a.y.iter().zip(&b.y) {
                prop_assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn model_json_round_trip_is_bit_exact(m in model(5, 3, float())) {
        let back = ConditionalModel::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(back.condition(), m.condition());
        prop_assert_eq!(back.algorithm(), m.algorithm());
        prop_assert_eq!(back.epsilon().to_bits(), m.epsilon().to_bits());
        for (u, v) in back.rule().coeffs().iter().zip(m.rule().coeffs()) {
            prop_assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn evaluate_matches_naive_loop(
        m in model(4, 2, -3.0f64..3.0),
        rows in proptest::collection::vec((0u64..16, -1.0f64..1.0, -1.0f64..1.0, -2.0f64..2.0), 1..60),
        eps in 0.0f64..1.0,
    ) {
        let mut data = Dataset::new(4, 2).unwrap();
        for &(x, a, b, z) in &rows {
            data.push(x, &[a, b], z).unwrap();
        }
        let (mut count, mut hits, mut sq) = (0usize, 0usize, 0.0f64);
        for ex in data.examples() {
            if m.condition().eval(ex.x) {
                let r = m.rule().predict(&ex.y) - ex.z;
                count += 1;
                hits += (r.abs() <= eps) as usize;
                sq += r * r;
            }
        }
        match evaluate(&m, &data, eps) {
            Ok(report) => {
                prop_assert_eq!(report.n_conditioned, count);
                prop_assert_eq!(report.m, rows.len());
                prop_assert!((report.coverage * rows.len() as f64 - count as f64).abs() < 1e-9);
                prop_assert!((report.sup_hit_rate - hits as f64 / count as f64).abs() < 1e-12);
                prop_assert!((report.cond_mse - sq / count as f64).abs() <= 1e-12 * (1.0 + report.cond_mse));
            }
            Err(_) => prop_assert_eq!(count, 0),
        }
    }

    #[test]
    fn labeled_csv_round_trip(
        n in 1usize..=8,
        rows in proptest::collection::vec((any::<u64>(), any::<bool>()), 0..40),
    ) {
        let data: Vec<LabeledExample> =
            rows.iter().map(|&(x, b)| LabeledExample { x: x & ((1 << n) - 1), b }).collect();
        let mut buf = Vec::new();
        write_labeled(n, &data, &mut buf).unwrap();
        let (n_back, back) = read_labeled(buf.as_slice()).unwrap();
        prop_assert_eq!(n_back, n);
        prop_assert_eq!(back, data);
    }

    #[test]
    fn reduction_keeps_x_and_zeroes_positives(
        rows in proptest::collection::vec((0u64..32, any::<bool>()), 1..80),
        seed in any::<u64>(),
    ) {
        let labeled: Vec<LabeledExample> = rows.iter().map(|&(x, b)| LabeledExample { x, b }).collect();
        let data = reduce_to_dataset(&labeled, 5, seed).unwrap();
        prop_assert_eq!(data.d(), 1);
        prop_assert_eq!(data.len(), labeled.len());
        for (j, ex) in labeled.iter().enumerate() {
            let got = data.example(j);
            prop_assert_eq!(got.x, ex.x);
            prop_assert_eq!(got.y.clone(), vec![1.0]);
            prop_assert!(got.z == 0.0 || got.z == 1.0);
            if ex.b {
                prop_assert_eq!(got.z, 0.0);
            }
        }
        prop_assert_eq!(reduce_to_dataset(&labeled, 5, seed).unwrap(), data);
    }
}
