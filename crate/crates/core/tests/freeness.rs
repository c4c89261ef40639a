//! Two independent GUE samples of size 1000 are close to free: every mixed
//! free cumulant of length at most 4 is small.

use std::collections::HashMap;

use freevar::cumulants::mixed_free_cumulant;
use freevar::rmt::{sample_gue, CMat};

const D: usize = 1000;
const TOL: f64 = 0.05;

/// `Re τ(XY)` without forming the product.
fn tau_of_product(x: &CMat, y: &CMat) -> f64 {
    let (d, mut acc) = (x.nrows(), 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += x.re[(i, j)] * y.re[(j, i)] - x.im[(i, j)] * y.im[(j, i)];
        }
    }
    acc / d as f64
}

#[test]
fn independent_gue_are_asymptotically_free() {
    let a = sample_gue(D, 101).unwrap().into_matrix();
    let b = sample_gue(D, 202).unwrap().into_matrix();
    let one = |l: u8| if l == 0 { &a } else { &b };
    let mut pairs = HashMap::new();
    for u in 0..2u8 {
        for v in 0..2u8 {
            pairs.insert((u, v), one(u).mul(one(v)));
        }
    }
    let joint = |w: &[u8]| -> Option<f64> {
        Some(match w {
            [u] => one(*u).trace().re / D as f64,
            [u, v] => tau_of_product(one(*u), one(*v)),
            [u, v, x] => tau_of_product(&pairs[&(*u, *v)], one(*x)),
            [u, v, x, y] => tau_of_product(&pairs[&(*u, *v)], &pairs[&(*x, *y)]),
            _ => return None,
        })
    };
    let mut worst: f64 = 0.0;
    for len in 2..=4usize {
        for bits in 0..(1u32 << len) {
            let word: Vec<u8> = (0..len).map(|i| (bits >> i & 1) as u8).collect();
            if word.iter().all(|&l| l == word[0]) {
                continue;
            }
            let r: f64 = mixed_free_cumulant(&word, joint).unwrap();
            worst = worst.max(r.abs());
            assert!(r.abs() <= TOL, "R{word:?} = {r}");
        }
    }
    // Same-letter cumulants stay those of the semicircle.
    let r2: f64 = mixed_free_cumulant(&[0u8, 0], joint).unwrap();
    let r4: f64 = mixed_free_cumulant(&[1u8, 1, 1, 1], joint).unwrap();
    assert!((r2 - 1.0).abs() < TOL && r4.abs() < TOL, "r2 = {r2}, r4 = {r4}, worst mixed = {worst}");
}
