//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness. The process fails when a criterion
//! fails on anything other than the items listed in [`KNOWN_FAILURES`].

mod common;

use std::time::{Duration, Instant};

use qbd_decay::analytic::{g_matrix, mean_drifts, solve_g, stability, Axis};
use qbd_decay::geometry::Kernel;
use qbd_decay::perron::perron_root;
use qbd_decay::*;
use rand::Rng;

/// Items that fail for a documented reason. The tabulated symmetric K=1
/// value of ξ_(1,0) is 0.667, but that model is symmetric under swapping
/// the queues, so ξ_(1,0) = ξ_(0,1) = 0.677 (also tabulated).
const KNOWN_FAILURES: &[(u8, &str)] = &[(1, "K=1 xi(1,0)")];

type Criterion<'a> = (u8, &'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, item: impl Into<String>) {
        if !ok {
            self.failures.push(item.into());
        }
    }
}

fn dir(c: (u32, u32)) -> Direction {
    Direction::new(c.0, c.1).unwrap()
}

fn analyses(p: (f64, f64, f64, f64)) -> (Vec<(usize, Analysis)>, Duration) {
    let start = Instant::now();
    let out = std::thread::scope(|s| {
        let handles: Vec<_> = [1usize, 5, 10]
            .map(|k| {
                s.spawn(move || {
                    let params = LimitedServiceParams::new(p.0, p.1, p.2, p.3, k).unwrap();
                    (
                        k,
                        Analysis::new(build_limited_service(&params).unwrap()).unwrap(),
                    )
                })
            })
            .into_iter()
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    (out, start.elapsed())
}

fn table_row(a: &Analysis) -> [f64; 9] {
    let g = &a.geometry.gamma;
    let p = &a.profile;
    let mut row = [
        g.theta1_max,
        p.theta1_star,
        g.theta2_max,
        p.theta2_star,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    for (i, c) in common::DIRECTIONS.into_iter().enumerate() {
        row[4 + i] = a.xi_c(dir(c)).unwrap().xi_c_normalized;
    }
    row
}

fn table_check(computed: &[(usize, Analysis)], table: &[(usize, [f64; 9]); 3], out: &mut Outcome) {
    for ((k, a), (tk, want)) in computed.iter().zip(table) {
        assert_eq!(k, tk);
        let got = table_row(a);
        for ((name, g), w) in common::TABLE_COLUMNS.iter().zip(got).zip(want) {
            out.check((g - w).abs() <= 0.01, format!("K={k} {name}"));
            if (g - w).abs() > 0.01 {
                out.notes
                    .push(format!("K={k} {name}: computed {g:.4}, tabulated {w}"));
            }
        }
    }
}

fn criterion_1(sym: &[(usize, Analysis)], elapsed: Duration) -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    table_check(sym, &common::SYMMETRIC_TABLE, &mut out);
    let elapsed = elapsed + start.elapsed();
    out.check(elapsed < Duration::from_secs(30), "runtime");
    out.notes
        .push(format!("runtime {:.1}s", elapsed.as_secs_f64()));
    out
}

fn criterion_2(asym: &[(usize, Analysis)], elapsed: Duration) -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    table_check(asym, &common::ASYMMETRIC_TABLE, &mut out);
    let elapsed = elapsed + start.elapsed();
    let (k1, k10) = (&asym[0].1, &asym[2].1);
    out.check(
        k10.geometry.gamma.theta1_max - k10.profile.theta1_star > 0.002,
        "K=10 theta1_max > theta1*",
    );
    out.check(
        k1.geometry.gamma.theta2_max - k1.profile.theta2_star > 0.05,
        "K=1 theta2_max > theta2*",
    );
    out.check(elapsed < Duration::from_secs(30), "runtime");
    out.notes
        .push(format!("runtime {:.1}s", elapsed.as_secs_f64()));
    out
}

fn criterion_3(sym: &[(usize, Analysis)], asym: &[(usize, Analysis)]) -> Outcome {
    let mut out = Outcome::new();
    let cases = [
        (
            "symmetric K=10 slope at Q1",
            &sym[2].1,
            sym[2].1.classification.slope_q1,
            -9.87,
            0.1,
        ),
        (
            "asymmetric K=1 slope at Q2",
            &asym[0].1,
            asym[0].1.classification.slope_q2,
            -1.73,
            0.05,
        ),
        (
            "asymmetric K=10 slope at Q1",
            &asym[2].1,
            asym[2].1.classification.slope_q1,
            -3.88,
            0.05,
        ),
    ];
    for (name, a, slope, want, tol) in cases {
        let ok = slope.is_some_and(|s| (s - want).abs() <= tol);
        out.check(ok, name);
        out.notes.push(format!(
            "{name} = {}",
            slope.map_or("vertical".into(), |s| format!("{s:.4}"))
        ));
        out.check(
            a.classification.type_class == TypeClass::Type1,
            format!("{name}: type"),
        );
    }
    out
}

fn route_gap(a: &Analysis, c: Direction) -> Result<f64> {
    let x = a.xi_c(c)?.xi_c;
    let g = a.xi_c_geometric(c)?.xi_c;
    Ok((x - g).abs() / c.norm())
}

fn criterion_4(sym: &[(usize, Analysis)], asym: &[(usize, Analysis)]) -> Outcome {
    let mut out = Outcome::new();
    let mut worst: f64 = 0.0;
    for (name, set) in [("symmetric", sym), ("asymmetric", asym)] {
        for (k, a) in set {
            for c in common::DIRECTIONS.map(dir) {
                let gap = route_gap(a, c).unwrap_or(f64::INFINITY);
                worst = worst.max(gap);
                out.check(gap <= 1e-6, format!("{name} K={k} c=({c})"));
            }
        }
    }
    let models = common::random_stable_models(2024, 50);
    let gaps: Vec<(usize, Direction, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = models
            .chunks(10)
            .enumerate()
            .map(|(chunk, ms)| {
                s.spawn(move || {
                    let mut v = Vec::new();
                    for (i, m) in ms.iter().enumerate() {
                        let id = chunk * 10 + i;
                        match Analysis::new(m.clone()) {
                            Ok(a) => {
                                for c in common::DIRECTIONS.map(dir) {
                                    v.push((id, c, route_gap(&a, c).unwrap_or(f64::INFINITY)));
                                }
                            }
                            Err(_) => v.push((id, dir((1, 1)), f64::INFINITY)),
                        }
                    }
                    v
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect()
    });
    for (id, c, gap) in gaps {
        worst = worst.max(gap);
        out.check(gap <= 1e-6, format!("random model {id} c=({c})"));
    }
    out.notes.push(format!("largest gap / |c| = {worst:.1e}"));
    out
}

fn criterion_5(sym: &[(usize, Analysis)], asym: &[(usize, Analysis)]) -> Outcome {
    let mut out = Outcome::new();
    let mut rng = common::rng(5);
    let mut worst: f64 = 0.0;
    let models: Vec<(&str, &Analysis)> = vec![
        ("symmetric K=1", &sym[0].1),
        ("symmetric K=5", &sym[1].1),
        ("asymmetric K=1", &asym[0].1),
        ("asymmetric K=5", &asym[1].1),
    ];
    for (name, a) in &models {
        let kernel = Kernel::new(&a.model);
        let g = &a.geometry.gamma;
        for b in [(1usize, 2usize), (2, 1), (2, 2), (2, 3)] {
            let block = a.model.block_process(BlockVector::new(b.0, b.1).unwrap());
            let bk = Kernel::new(&block);
            for _ in 0..20 {
                let t1 = rng.gen_range(g.theta1_min - 0.5..g.theta1_max + 0.5);
                let t2 = rng.gen_range(g.theta2_min - 0.5..g.theta2_max + 0.5);
                let want = kernel.spr(t1, t2).unwrap();
                let got = bk.spr(b.0 as f64 * t1, b.1 as f64 * t2).unwrap();
                let err = (got - want).abs() / want.max(1.0);
                worst = worst.max(err);
                out.check(err <= 1e-10, format!("{name} b={b:?} spr"));
            }
        }
    }
    out.notes.push(format!("largest spr deviation {worst:.1e}"));
    let mut worst_xi: f64 = 0.0;
    for (name, a) in &models {
        for c in [(2u32, 1u32), (1, 2)] {
            let block = a
                .model
                .block_process(BlockVector::new(c.0 as usize, c.1 as usize).unwrap());
            let want = a.xi_c(dir(c)).unwrap().xi_c;
            let got = Analysis::new(block)
                .and_then(|b| b.xi_c(dir((1, 1))))
                .map(|r| r.xi_c);
            let err = got.map_or(f64::INFINITY, |x| (x - want).abs());
            worst_xi = worst_xi.max(err);
            out.check(
                err <= 1e-6,
                format!("{name} xi({},{}) vs block xi(1,1)", c.0, c.1),
            );
        }
    }
    out.notes
        .push(format!("largest xi deviation {worst_xi:.1e}"));
    out
}

fn criterion_6(sym: &[(usize, Analysis)], asym: &[(usize, Analysis)]) -> Outcome {
    let mut out = Outcome::new();
    let mut rng = common::rng(6);
    let scalar = |x: f64| Matrix::from_rows(&[vec![x]]).unwrap();
    let mut worst_scalar: f64 = 0.0;
    let mut n = 0;
    while n < 200 {
        let (am, ap): (f64, f64) = (rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0));
        if am + ap > 1.0 || (am - ap).abs() < 0.05 * (am + ap) {
            continue;
        }
        n += 1;
        let a0 = rng.gen_range(0.0..1.0) * (1.0 - am - ap);
        let b = 1.0 - a0;
        let want = 2.0 * am / (b + (b * b - 4.0 * ap * am).max(0.0).sqrt());
        let got = solve_g(&scalar(am), &scalar(a0), &scalar(ap)).map(|s| s.g[(0, 0)]);
        let err = got.map_or(f64::INFINITY, |g| (g - want).abs());
        worst_scalar = worst_scalar.max(err);
        out.check(err <= 1e-12, format!("scalar case ({am}, {a0}, {ap})"));
    }
    let mut worst_res: f64 = 0.0;
    let mut worst_spr: f64 = 0.0;
    for (name, set) in [("symmetric", sym), ("asymmetric", asym)] {
        for (k, a) in set {
            let g = &a.geometry.gamma;
            for i in 1..32 {
                let t = g.theta1_min + (g.theta1_max - g.theta1_min) * i as f64 / 32.0;
                let Ok(sol) = g_matrix(&a.model, Axis::First, t) else {
                    out.check(false, format!("{name} K={k} G1 at {t}"));
                    continue;
                };
                worst_res = worst_res.max(sol.residual);
                out.check(
                    sol.residual <= 1e-13,
                    format!("{name} K={k} residual at {t}"),
                );
                let spr = perron_root(&sol.g).unwrap();
                let want = a.geometry.eta2(t).unwrap().0.exp();
                worst_spr = worst_spr.max((spr - want).abs());
                out.check(
                    (spr - want).abs() <= 1e-8,
                    format!("{name} K={k} spr(G1) at {t}"),
                );
            }
        }
    }
    out.notes.push(format!(
        "scalar {worst_scalar:.1e}, residual {worst_res:.1e}, spr(G1) vs exp(eta2) {worst_spr:.1e}"
    ));
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    for (name, model, n) in [
        ("symmetric", common::symmetric(1), 60),
        ("asymmetric", common::asymmetric(1), 80),
    ] {
        let a = Analysis::new(model.clone()).unwrap();
        let ts = match solve_truncated(&model, n) {
            Ok(ts) => ts,
            Err(e) => {
                out.check(false, format!("{name} solve: {e}"));
                continue;
            }
        };
        let mut worst: f64 = 0.0;
        for c in common::DIRECTIONS.map(dir) {
            let xi = a.xi_c(c).unwrap().xi_c;
            let Ok(fit) = fit_decay(&ts, c, None, None) else {
                out.check(false, format!("{name} c=({c}) fit"));
                continue;
            };
            let gap = (fit.decay_rate() - xi).abs() / xi;
            worst = worst.max(gap);
            out.check(gap <= 0.1, format!("{name} c=({c}) within 10%"));
            out.check(fit.phases_agree(), format!("{name} c=({c}) phases"));
        }
        out.notes
            .push(format!("{name} N={n} largest gap {:.1}%", 100.0 * worst));
    }
    let elapsed = start.elapsed();
    out.check(elapsed < Duration::from_secs(300), "runtime");
    out.notes
        .push(format!("runtime {:.1}s", elapsed.as_secs_f64()));
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    for (name, p) in [
        ("symmetric", (0.3, 0.3, 1.0, 1.0)),
        ("asymmetric", (0.24, 0.7, 1.2, 1.0)),
    ] {
        for k in [1, 5, 10] {
            let params = LimitedServiceParams::new(p.0, p.1, p.2, p.3, k).unwrap();
            let d = mean_drifts(&build_limited_service::<f64>(&params).unwrap()).unwrap();
            out.check(d.a1 < 0.0 && d.a2 < 0.0, format!("{name} K={k} drifts"));
            out.check(
                stability(&d) == Stability::PositiveRecurrent,
                format!("{name} K={k} verdict"),
            );
            let inv =
                mean_drifts(&build_limited_service::<f64>(&params.inverted()).unwrap()).unwrap();
            out.check(
                stability(&inv) == Stability::Transient,
                format!("{name} K={k} inverted verdict"),
            );
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = common::rng(9);
    for i in 0..60 {
        let s0 = 1 + i % 3;
        let bias = rng.gen_range(0.5..3.0);
        let m = common::random_model(&mut rng, s0, bias);
        out.check(m.validate().is_empty(), format!("random model {i} valid"));
        let mut broken = m.clone();
        broken.block_mut(Region::Interior, Step::new(1, 1))[(0, 0)] += 0.1;
        out.check(
            !broken.validate().is_empty(),
            format!("random model {i} perturbed"),
        );
        let spr = Kernel::new(&m).spr(0.0, 0.0).unwrap();
        out.check(
            (spr - 1.0).abs() <= 1e-12,
            format!("random model {i} spr(A(1,1))"),
        );
    }
    for i in 0..10 {
        let m = common::random_model(&mut rng, 1 + i % 3, 1.5);
        let geo = Geometry::with_samples(&m, 64).unwrap();
        let pts = &geo.gamma.boundary_samples;
        let ok = pts.iter().enumerate().all(|(j, p)| {
            let q = pts[(j * 5 + 7) % pts.len()];
            let mid = ((p.0 + q.0) / 2.0, (p.1 + q.1) / 2.0);
            let d = (q.0 - p.0, q.1 - p.1);
            let f = |s: f64| geo.kernel.log_spr(mid.0 + s * d.0, mid.1 + s * d.1);
            f(0.0) <= 1e-10 && f(0.05) + f(-0.05) - 2.0 * f(0.0) >= -1e-10
        });
        out.check(ok, format!("convexity on model {i}"));
    }
    for (id, m) in common::random_stable_models(99, 6).into_iter().enumerate() {
        let a = Analysis::with_samples(m, 16).unwrap();
        for c in common::DIRECTIONS {
            let base = a.xi_c(dir(c)).unwrap().xi_c;
            for k in [2, 3] {
                let scaled = a.xi_c(dir((k * c.0, k * c.1))).unwrap().xi_c;
                out.check(
                    (scaled - k as f64 * base).abs() <= 1e-8,
                    format!("scaling model {id} c={c:?} m={k}"),
                );
            }
        }
    }
    let args = [
        "qbd-decay",
        "analyze",
        "--builtin",
        "limited-service",
        "--l1",
        "0.24",
        "--l2",
        "0.7",
        "--m1",
        "1.2",
        "--K",
        "5",
    ];
    for format in ["text", "json"] {
        let run = || {
            let (mut o, mut e) = (Vec::new(), Vec::new());
            let code = cli::run(
                args.iter().copied().chain(["--format", format]),
                &mut o,
                &mut e,
            );
            (code, o)
        };
        let (a, b) = (run(), run());
        out.check(a.0 == 0 && a == b, format!("CLI determinism ({format})"));
    }
    out
}

fn main() {
    let sym_params = (0.3, 0.3, 1.0, 1.0);
    let asym_params = (0.24, 0.7, 1.2, 1.0);
    let (sym, t_sym) = analyses(sym_params);
    let (asym, t_asym) = analyses(asym_params);

    let criteria: Vec<Criterion> = vec![
        (
            1,
            "symmetric table reproduction",
            Box::new(|| criterion_1(&sym, t_sym)),
        ),
        (
            2,
            "asymmetric table reproduction",
            Box::new(|| criterion_2(&asym, t_asym)),
        ),
        (
            3,
            "boundary slopes at Q1/Q2",
            Box::new(|| criterion_3(&sym, &asym)),
        ),
        (
            4,
            "root-finding and geometric routes agree",
            Box::new(|| criterion_4(&sym, &asym)),
        ),
        (
            5,
            "block process identities",
            Box::new(|| criterion_5(&sym, &asym)),
        ),
        (
            6,
            "G-matrix correctness",
            Box::new(|| criterion_6(&sym, &asym)),
        ),
        (7, "truncated oracle agreement", Box::new(criterion_7)),
        (8, "stability gate", Box::new(criterion_8)),
        (9, "property suite", Box::new(criterion_9)),
    ];

    let mut unexpected = Vec::new();
    for (id, name, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        let verdict = if outcome.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "criterion {id} [{name}] {verdict} ({:.1}s)",
            start.elapsed().as_secs_f64()
        );
        for note in &outcome.notes {
            println!("    {note}");
        }
        for f in &outcome.failures {
            let known = KNOWN_FAILURES.iter().any(|(k, item)| k == id && item == f);
            println!("    failed: {f}{}", if known { " (known)" } else { "" });
            if !known {
                unexpected.push(format!("criterion {id}: {f}"));
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures:\n  {}", unexpected.join("\n  "));
        std::process::exit(1);
    }
}
