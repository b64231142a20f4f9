#![allow(dead_code)]

use qbd_decay::{
    build_limited_service, LimitedServiceParams, Matrix, Model, QbdModel, Region, Step,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DIRECTIONS: [(u32, u32); 5] = [(1, 0), (2, 1), (1, 1), (1, 2), (0, 1)];

pub fn symmetric(k: usize) -> Model {
    build_limited_service(&LimitedServiceParams::new(0.3, 0.3, 1.0, 1.0, k).unwrap()).unwrap()
}

pub fn asymmetric(k: usize) -> Model {
    build_limited_service(&LimitedServiceParams::new(0.24, 0.7, 1.2, 1.0, k).unwrap()).unwrap()
}

/// Two independent lazy walks on the half line, one per coordinate, each
/// moving up with `p` and down with `q` per slot (s0 = 1). The stationary law
/// is a product of geometric laws with ratios `p_i / q_i`.
pub fn product_walk(p1: f64, q1: f64, p2: f64, q2: f64) -> Model {
    let mut m = QbdModel::zeros(1);
    for region in Region::ALL {
        let (d1, d2) = (region.first_positive(), region.second_positive());
        let first: [(i8, f64); 3] = [
            (1, p1),
            (-1, if d1 { q1 } else { 0.0 }),
            (0, 1.0 - p1 - if d1 { q1 } else { 0.0 }),
        ];
        let second: [(i8, f64); 3] = [
            (1, p2),
            (-1, if d2 { q2 } else { 0.0 }),
            (0, 1.0 - p2 - if d2 { q2 } else { 0.0 }),
        ];
        for (i1, a) in first {
            for (i2, b) in second {
                if a * b > 0.0 {
                    m.set_block(
                        region,
                        Step::new(i1, i2),
                        Matrix::from_rows(&[vec![a * b]]).unwrap(),
                    )
                    .unwrap();
                }
            }
        }
    }
    m
}

/// Random dense model with every admissible block positive. Downward steps
/// get extra weight `bias`, which makes most draws positive recurrent.
pub fn random_model(rng: &mut impl Rng, s0: usize, bias: f64) -> Model {
    let mut m = QbdModel::zeros(s0);
    for region in Region::ALL {
        let steps: Vec<Step> = Step::ALL
            .into_iter()
            .filter(|&s| region.admits(s))
            .collect();
        let mut blocks: Vec<Matrix<f64>> = steps
            .iter()
            .map(|s| {
                let w = match (s.i1 < 0, s.i2 < 0) {
                    (true, true) => bias * bias,
                    (true, false) | (false, true) => bias,
                    _ => 1.0,
                };
                let rows: Vec<Vec<f64>> = (0..s0)
                    .map(|_| (0..s0).map(|_| w * (0.05 + rng.gen::<f64>())).collect())
                    .collect();
                Matrix::from_rows(&rows).unwrap()
            })
            .collect();
        for i in 0..s0 {
            let total: f64 = blocks.iter().map(|b| b.row(i).iter().sum::<f64>()).sum();
            for b in &mut blocks {
                for j in 0..s0 {
                    b[(i, j)] /= total;
                }
            }
        }
        for (s, b) in steps.into_iter().zip(blocks) {
            m.set_block(region, s, b).unwrap();
        }
    }
    m
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` positive recurrent random models with `s0` cycling through 1..=3.
pub fn random_stable_models(seed: u64, count: usize) -> Vec<Model> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let s0 = 1 + out.len() % 3;
        let bias = r.gen_range(1.2..2.5);
        let m = random_model(&mut r, s0, bias);
        let drifts = qbd_decay::analytic::mean_drifts(&m).unwrap();
        if qbd_decay::analytic::stability(&drifts) == qbd_decay::Stability::PositiveRecurrent {
            out.push(m);
        }
    }
    out
}

/// Tabulated rows: θ1^max, θ1*, θ2^max, θ2*, then ξ_c/‖c‖ for [`DIRECTIONS`].
/// Arrows in the printed tables are resolved to the value they point at.
pub const SYMMETRIC_TABLE: [(usize, [f64; 9]); 3] = [
    (
        1,
        [
            0.677, 0.677, 0.677, 0.677, 0.667, 0.714, 0.722, 0.714, 0.677,
        ],
    ),
    (
        5,
        [0.511, 0.511, 1.30, 1.30, 0.511, 0.734, 0.866, 0.986, 1.30],
    ),
    (
        10,
        [0.513, 0.511, 1.41, 1.41, 0.511, 0.757, 0.901, 1.03, 1.41],
    ),
];

pub const ASYMMETRIC_TABLE: [(usize, [f64; 9]); 3] = [
    (
        1,
        [1.29, 1.29, 0.223, 0.110, 1.29, 0.98, 0.740, 0.500, 0.110],
    ),
    (
        5,
        [
            0.091, 0.091, 0.331, 0.331, 0.091, 0.136, 0.164, 0.198, 0.331,
        ],
    ),
    (
        10,
        [
            0.094, 0.090, 0.520, 0.520, 0.090, 0.161, 0.208, 0.267, 0.520,
        ],
    ),
];

pub const TABLE_COLUMNS: [&str; 9] = [
    "theta1_max",
    "theta1*",
    "theta2_max",
    "theta2*",
    "xi(1,0)",
    "xi(2,1)/sqrt5",
    "xi(1,1)/sqrt2",
    "xi(1,2)/sqrt5",
    "xi(0,1)",
];
