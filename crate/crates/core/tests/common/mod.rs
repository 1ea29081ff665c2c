//! Naive reference implementations used as oracles. Nothing here calls the
//! crate's scoring code; models are read only through their parameters.
#![allow(dead_code)]

use protbeam_core::provider::CoupledProvider;
use protbeam_core::{ProteinSequence, Residue};

pub fn seq(s: &str) -> ProteinSequence {
    s.parse().unwrap()
}

pub fn res(c: char) -> Residue {
    Residue::from_code(c).unwrap()
}

pub fn random_sequence(rng: &mut impl rand::Rng, len: usize) -> ProteinSequence {
    const CODES: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";
    (0..len)
        .map(|_| CODES[rng.gen_range(0..20)] as char)
        .collect::<String>()
        .parse()
        .unwrap()
}

/// Logit for residue index `r` at position `i` of `s`, with `masked` hidden,
/// evaluated straight from the model's parameters.
pub fn coupled_logit(p: &CoupledProvider, s: &[Residue], masked: &[usize], i: usize, r: usize) -> f64 {
    let ri = Residue::from_index(r).unwrap();
    let mut v = p.field(i, ri);
    for j in 0..s.len() {
        if j == i || masked.contains(&j) {
            continue;
        }
        v += p.coupling(i, ri, j, s[j]);
    }
    if !masked.contains(&i) && s[i] == ri {
        v += p.visible_bias();
    }
    v
}

/// `log softmax(x / tau)[r]` via an explicit log-sum-exp.
pub fn log_softmax_at(x: &[f64], tau: f64, r: usize) -> f64 {
    let scaled: Vec<f64> = x.iter().map(|v| v / tau).collect();
    let m = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let lse = m + scaled.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    scaled[r] - lse
}

fn row(p: &CoupledProvider, s: &[Residue], masked: &[usize], i: usize) -> Vec<f64> {
    (0..20).map(|r| coupled_logit(p, s, masked, i, r)).collect()
}

/// Definition of the exact PLL: mask each position alone.
pub fn naive_exact_pll(p: &CoupledProvider, s: &ProteinSequence, tau: f64) -> f64 {
    let s = s.residues();
    (0..s.len())
        .map(|i| log_softmax_at(&row(p, s, &[i], i), tau, s[i].index()))
        .sum()
}

/// Double-mask PLL of `child` (one substitution at `k` from `template`):
/// term `k` from the single-mask row of the template, every other term `i`
/// from the template with `{i, k}` masked, read at the template residue.
pub fn naive_double_mask(p: &CoupledProvider, template: &ProteinSequence, k: usize, to: Residue, tau: f64) -> f64 {
    let t = template.residues();
    let mut total = log_softmax_at(&row(p, t, &[k], k), tau, to.index());
    for i in 0..t.len() {
        if i != k {
            total += log_softmax_at(&row(p, t, &[i, k], i), tau, t[i].index());
        }
    }
    total
}

/// Pairwise-model energy (higher = more probable) of a full assignment.
pub fn potts_energy(p: &CoupledProvider, s: &[Residue]) -> f64 {
    let mut e = 0.0;
    for i in 0..s.len() {
        e += p.field(i, s[i]);
        for j in i + 1..s.len() {
            e += p.coupling(i, s[i], j, s[j]);
        }
    }
    e
}

/// Pareto set by exhaustive pairwise comparison (minimization).
pub fn brute_pareto(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !(0..points.len()).any(|j| {
                let a = &points[j];
                let b = &points[i];
                a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
            })
        })
        .collect()
}

pub const PKA: [(char, f64, bool); 7] = [
    ('K', 10.0, true),
    ('R', 12.0, true),
    ('H', 5.98, true),
    ('D', 4.05, false),
    ('E', 4.45, false),
    ('C', 9.0, false),
    ('Y', 10.0, false),
];

pub fn grid_charge(s: &str, ph: f64) -> f64 {
    let mut q = 1.0 / (1.0 + 10f64.powf(ph - 7.5)) - 1.0 / (1.0 + 10f64.powf(3.55 - ph));
    for (code, pka, basic) in PKA {
        let n = s.chars().filter(|&c| c == code).count() as f64;
        q += if basic {
            n / (1.0 + 10f64.powf(ph - pka))
        } else {
            -n / (1.0 + 10f64.powf(pka - ph))
        };
    }
    q
}

fn closest_on_grid(s: &str, lo: f64, steps: u32, h: f64) -> f64 {
    let mut best = (f64::INFINITY, lo);
    for step in 0..=steps {
        let ph = lo + step as f64 * h;
        let q = grid_charge(s, ph).abs();
        if q < best.0 {
            best = (q, ph);
        }
    }
    best.1
}

/// pH on a 1e-5 grid whose net charge is closest to zero. Charge is monotone,
/// so a 1e-3 scan of [0, 14] locates the window the fine grid has to cover.
pub fn grid_pi(s: &str) -> f64 {
    let coarse = closest_on_grid(s, 0.0, 14_000, 1e-3);
    let lo = (coarse - 2e-3).max(0.0);
    closest_on_grid(s, lo, 400, 1e-5)
}
