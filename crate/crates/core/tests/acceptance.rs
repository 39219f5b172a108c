//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

use std::panic;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use moran_carpet::carpet::{carpet_dimension, LevelTag, MoranSequence};
use moran_carpet::dimension::{
    box_dim_sequence, verify_matrix_counts, Method, SampleStatus, VerificationSuite,
};
use moran_carpet::multifractal::{
    all_symbol_words, chord_witness, norm_sum_fast, spectrum_upper_bound, CylinderMeasure,
    NormDistribution, PressureCurve, DEFAULT_WORD_BUDGET,
};
use moran_carpet::render::{render_svg, RenderOptions};
use moran_carpet::slicing::{count_oracle, greedy_expand, truncation_bound, Intercept, Slope};
use moran_carpet::transfer::{
    build_matrix_closed_form, build_matrix_semantic, matrix_counts, TransferSet,
};

const TEST_SLOPES: [&str; 5] = ["0/1", "1/1", "1/2", "2/3", "3/2"];
const TEST_SIGMAS: [&str; 4] = ["(0)", "(1)", "(01)", "11(0)"];

fn slope(s: &str) -> Slope {
    s.parse().unwrap()
}

fn seq(s: &str) -> MoranSequence {
    s.parse().unwrap()
}

fn q_grid(start: f64, step: f64, end: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let report = verify_matrix_counts(&VerificationSuite {
        slopes: TEST_SLOPES.iter().map(|s| slope(s)).collect(),
        sigmas: TEST_SIGMAS.iter().map(|s| seq(s)).collect(),
        intercepts: Vec::new(),
        samples: 25,
        seed: 20_241_016,
        depth_cap: 7,
    });
    let elapsed = start.elapsed();
    let passed = report.count(SampleStatus::Pass);
    let mismatched = report.count(SampleStatus::Mismatch);
    let skipped = report.count(SampleStatus::Skipped);
    let expected = TEST_SLOPES.len() * TEST_SIGMAS.len() * 25;
    verdict(
        mismatched == 0 && skipped == 0 && passed == expected && elapsed < Duration::from_secs(300),
        format!("{passed}/{expected} samples agree at depths 1..7, {mismatched} mismatches, {:.1?}", elapsed),
    )
}

fn builder_equality() -> Verdict {
    let start = Instant::now();
    let mut slopes = 0;
    let mut matrices = 0;
    let mut bad = Vec::new();
    for n in 1..=12u64 {
        for m in 0..=(12 - n) {
            let Ok(s) = Slope::new(m, n) else { continue };
            slopes += 1;
            for tag in [LevelTag::Zero, LevelTag::One] {
                for j in 0..tag.base() {
                    matrices += 1;
                    if build_matrix_semantic(tag, j, &s).unwrap() != build_matrix_closed_form(tag, j, &s).unwrap() {
                        bad.push(format!("{s} tag {} j {j}", tag.bit()));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        bad.is_empty() && elapsed < Duration::from_secs(10),
        format!("{matrices} matrices over {slopes} slopes, differences {bad:?}, {:.1?}", elapsed),
    )
}

fn known_slice_values() -> Verdict {
    let s = slope("1/1");
    let sigma = seq("(0)");
    let a = Intercept::parse("1/2", &s).unwrap();
    let m = matrix_counts(&a, &sigma, &TransferSet::semantic(&s), 2);
    let o1 = count_oracle(&a, &sigma, &s, 1);
    let o2 = count_oracle(&a, &sigma, &s, 2);
    let est = box_dim_sequence::<BigInt, f64>(&a, &sigma, &s, 12, Method::Matrix, 0).unwrap();
    let e12 = est.estimates[11];
    let counts_ok = m.counts[1] == BigUint::from(3u32)
        && m.counts[2] == BigUint::from(9u32)
        && o1 == BigUint::from(3u32)
        && o2 == BigUint::from(9u32);
    verdict(
        counts_ok && (e12 - 1.0).abs() <= 0.05,
        format!("N_1 = {} (oracle {o1}), N_2 = {} (oracle {o2}), estimate(12) = {e12:.6}", m.counts[1], m.counts[2]),
    )
}

fn horizontal_control() -> Verdict {
    let s = slope("0/1");
    let sigma = seq("(0)");
    let a = Intercept::parse("1/2", &s).unwrap();
    let est = box_dim_sequence::<BigInt, f64>(&a, &sigma, &s, 20, Method::Matrix, 0).unwrap();
    let powers = est
        .counts
        .iter()
        .enumerate()
        .all(|(i, c)| *c == BigUint::from(2u32).pow(i as u32 + 1));
    let oracle_ok = (1..=8).all(|k| count_oracle(&a, &sigma, &s, k) == BigUint::from(2u32).pow(k as u32));
    let target = 2f64.ln() / 3f64.ln();
    let e20 = est.estimates[19];
    verdict(
        powers && oracle_ok && (e20 - target).abs() <= 0.01,
        format!("N_k = 2^k for k <= 20 (oracle checked to 8): {}, estimate(20) = {e20:.6} vs {target:.6}", powers && oracle_ok),
    )
}

fn greedy_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10;
    let mut worst = Ratio::<BigInt>::zero();
    let mut failures = 0;
    for i in 0..200 {
        let s = slope(TEST_SLOPES[i % TEST_SLOPES.len()]);
        let sigma = seq(TEST_SIGMAS[(i / TEST_SLOPES.len()) % TEST_SIGMAS.len()]);
        let den: i64 = rng.gen_range(1..=10_000);
        let lo = -(s.rise() as i64) * den / s.run() as i64;
        let num: i64 = rng.gen_range(lo..=den);
        let a = Intercept::new(Ratio::new(BigInt::from(num), BigInt::from(den)), &s).unwrap();
        let e = greedy_expand(&a, &sigma, &s, n);
        let err = (a.value() - e.value(&sigma, &s).unwrap()).abs();
        let bound = truncation_bound::<BigInt>(&sigma, &s, n);
        if err > bound {
            failures += 1;
        }
        let rel = err / bound;
        if rel > worst {
            worst = rel;
        }
    }
    verdict(
        failures == 0,
        format!("200 intercepts at depth {n}, {failures} over the bound, worst error/bound = {worst}"),
    )
}

fn pressure_identities() -> Verdict {
    let s = slope("1/1");
    let sigma = seq("(0)");
    let set = TransferSet::semantic(&s);
    let zero_ok = (1..=12).all(|k| {
        PressureCurve::<f64>::compute(&[0.0], &sigma, &s, k, DEFAULT_WORD_BUDGET).unwrap().points[0].normalized == 1.0
    });
    let mut worst: f64 = 0.0;
    for k in [10usize, 20] {
        let p = PressureCurve::<f64>::compute(&[1.0], &sigma, &s, k, DEFAULT_WORD_BUDGET).unwrap().points[0];
        let want = (16f64.ln() + (k as f64 - 1.0) * 8f64.ln()) / (k as f64 * 3f64.ln());
        worst = worst.max((p.normalized - want).abs());
    }
    let sums_ok = (1..=10).all(|k| {
        NormDistribution::compute(&sigma, &set, k, DEFAULT_WORD_BUDGET).unwrap().norm_sum()
            == norm_sum_fast(&sigma, &set, k)
    });
    verdict(
        zero_ok && worst <= 1e-12 && sums_ok,
        format!("P(0,k) = 1 for k <= 12: {zero_ok}, |P(1,k) - closed form| max {worst:.2e}, exact sums agree k <= 10: {sums_ok}"),
    )
}

fn pressure_convexity() -> Verdict {
    let s = slope("1/1");
    let grid = q_grid(-2.0, 0.25, 2.0);
    let mut min_first = f64::INFINITY;
    let mut min_second = f64::INFINITY;
    for sg in ["(0)", "(01)"] {
        let curve = PressureCurve::<f64>::compute(&grid, &seq(sg), &s, 12, DEFAULT_WORD_BUDGET).unwrap();
        let p: Vec<f64> = curve.points.iter().map(|v| v.normalized).collect();
        for w in p.windows(2) {
            min_first = min_first.min(w[1] - w[0]);
        }
        for w in p.windows(3) {
            min_second = min_second.min(w[2] - 2.0 * w[1] + w[0]);
        }
    }
    verdict(
        min_first >= -1e-9 && min_second >= -1e-9,
        format!("k = 12, q in [-2, 2] step 0.25: min first difference {min_first:.3e}, min second difference {min_second:.3e}"),
    )
}

fn chord_witness_search() -> Verdict {
    let s = slope("1/1");
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for sg in ["(0)", "(01)"] {
        let search = chord_witness::<f64>(&seq(sg), &s, 12, &grid, DEFAULT_WORD_BUDGET).unwrap();
        let best = search
            .points
            .iter()
            .min_by(|x, y| x.margin.total_cmp(&y.margin))
            .copied()
            .unwrap();
        let found = best.margin < -1e-3;
        pass &= found;
        parts.push(format!("{sg}: smallest margin {:+.5} at q = {}", best.margin, best.q));
    }
    verdict(pass, format!("need a margin below -1e-3; {}", parts.join("; ")))
}

fn spectrum_bound_sanity() -> Verdict {
    let s = slope("1/1");
    let k = 12;
    let grids = [vec![0.0, 1.0], q_grid(-2.0, 0.25, 2.0), vec![-1.0, 0.0, 0.5, 2.0]];
    let mut worst = f64::NEG_INFINITY;
    for sg in TEST_SIGMAS {
        let sigma = seq(sg);
        for grid in &grids {
            let curve = PressureCurve::<f64>::compute(grid, &sigma, &s, 8, DEFAULT_WORD_BUDGET).unwrap();
            for i in 0..=30 {
                worst = worst.max(curve.upper_bound(i as f64 * 0.1).unwrap().0);
            }
        }
    }
    let sigma = seq("(0)");
    let dim: f64 = carpet_dimension(&sigma);
    let (at_s, q) = spectrum_upper_bound(dim, &sigma, &s, k, &q_grid(-2.0, 0.25, 2.0), DEFAULT_WORD_BUDGET).unwrap();
    let limit = 2f64.ln() / (k as f64 * 3f64.ln()) + 1e-9;
    verdict(
        worst <= 1.0 && at_s <= limit,
        format!("max bound over alpha in [0, 3] = {worst:.6}; bound at alpha = s is {at_s:.6} (q = {q}) vs {limit:.6}"),
    )
}

fn carpet_dimension_law() -> Verdict {
    let sigma = seq("(01)");
    let formula: f64 = carpet_dimension(&sigma);
    let reference = 96f64.ln() / 12f64.ln();
    let mut exact = true;
    let mut worst: f64 = 0.0;
    for depth in [2usize, 4, 6] {
        let m = (depth / 2) as u32;
        exact &= sigma.cell_count(depth) == BigUint::from(96u32).pow(m)
            && sigma.scale(depth) == BigUint::from(12u32).pow(m);
        let ratio = (sigma.cell_count(depth).to_string().parse::<f64>().unwrap()).ln()
            / (sigma.scale(depth).to_string().parse::<f64>().unwrap()).ln();
        worst = worst.max((ratio - formula).abs());
    }
    let rects = render_svg(&sigma, &RenderOptions::new(2)).unwrap().rects;
    verdict(
        exact && worst <= 1e-12 && (formula - reference).abs() <= 1e-12 && rects == 96,
        format!("dimension {formula:.6}; counts 96^m and sides 12^-m at depths 2, 4, 6: {exact}; float gap {worst:.1e}; rendered {rects} rectangles"),
    )
}

fn cylinder_measure_total() -> Verdict {
    let s = slope("1/1");
    let mut worst: f64 = 0.0;
    for sg in ["(0)", "(01)"] {
        let sigma = seq(sg);
        let words = all_symbol_words(&sigma, 6);
        for q in [-1.0, 0.0, 0.5, 1.0, 2.0] {
            let mu = CylinderMeasure::<f64>::new(q, &sigma, &s, 6, DEFAULT_WORD_BUDGET).unwrap();
            let total: f64 = words.iter().map(|w| mu.measure(w).unwrap()).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    verdict(worst <= 1e-12, format!("max |sum - 1| over q in {{-1, 0, 0.5, 1, 2}} = {worst:.2e}"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("matrix counts equal geometric counts", oracle_equivalence),
        ("semantic and closed-form builders agree", builder_equality),
        ("known slice values", known_slice_values),
        ("horizontal control", horizontal_control),
        ("greedy round trip", greedy_round_trip),
        ("pressure identities", pressure_identities),
        ("pressure convexity and monotonicity", pressure_convexity),
        ("chord witness", chord_witness_search),
        ("spectrum bound sanity", spectrum_bound_sanity),
        ("carpet dimension", carpet_dimension_law),
        ("cylinder measure normalization", cylinder_measure_total),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {}: {} ({}) [{:.2?}]",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
