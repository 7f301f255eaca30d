//! Slow, direct reference computations used to cross-check the simulator.
//!
//! Nothing here shares code with `satnet`: states are built by Taylor series
//! on the full four-mode basis, detectors are described by their per-photon
//! click probabilities, and squashing is done by enumerating outcomes.

/// Mode order `a_H, a_V, b_H, b_V`; mode 0 is the most significant digit.
pub fn index_of(occ: [usize; 4], dim: usize) -> usize {
    occ.iter().fold(0, |acc, &n| acc * dim + n)
}

pub fn occupations(mut index: usize, dim: usize) -> [usize; 4] {
    let mut occ = [0; 4];
    for slot in occ.iter_mut().rev() {
        *slot = index % dim;
        index /= dim;
    }
    occ
}

/// Applies `G = a_H†b_V† + a_H b_V + b_H†a_V† + b_H a_V` to a real-imaginary
/// split vector (the generator is real, so it acts on each part separately).
fn apply_generator(v: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (i, &amp) in v.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        let occ = occupations(i, dim);
        for (x, y) in [(0usize, 3usize), (2, 1)] {
            if occ[x] + 1 < dim && occ[y] + 1 < dim {
                let mut up = occ;
                up[x] += 1;
                up[y] += 1;
                let w = ((occ[x] + 1) as f64 * (occ[y] + 1) as f64).sqrt();
                out[index_of(up, dim)] += w * amp;
            }
            if occ[x] > 0 && occ[y] > 0 {
                let mut down = occ;
                down[x] -= 1;
                down[y] -= 1;
                let w = (occ[x] as f64 * occ[y] as f64).sqrt();
                out[index_of(down, dim)] += w * amp;
            }
        }
    }
    out
}

/// Photon-number probabilities `|⟨n|exp(iχG)|0⟩|²` of the four-mode SPDC
/// state, by Taylor series until the terms drop below 1e-18.
pub fn spdc_probabilities(chi: f64, dim: usize) -> Vec<f64> {
    let size = dim.pow(4);
    let mut re = vec![0.0; size];
    let mut im = vec![0.0; size];
    // term_k = (iχG)^k |0⟩ / k!, tracked as real and imaginary parts
    let mut t_re = vec![0.0; size];
    let mut t_im = vec![0.0; size];
    t_re[0] = 1.0;
    for k in 0..400 {
        for i in 0..size {
            re[i] += t_re[i];
            im[i] += t_im[i];
        }
        let g_re = apply_generator(&t_re, dim);
        let g_im = apply_generator(&t_im, dim);
        let s = chi / (k + 1) as f64;
        // i·(g_re + i g_im) = −g_im + i g_re
        t_re = g_im.iter().map(|x| -s * x).collect();
        t_im = g_re.iter().map(|x| s * x).collect();
        let size_sq: f64 = t_re.iter().chain(&t_im).map(|x| x * x).sum();
        if size_sq < 1e-36 {
            break;
        }
    }
    let probs: Vec<f64> = re.iter().zip(&im).map(|(r, i)| r * r + i * i).collect();
    let norm: f64 = probs.iter().sum();
    probs.into_iter().map(|p| p / norm).collect()
}

/// Dark-count distribution: Poisson with mean `nu`, kept for `k < dim` and
/// renormalized.
pub fn dark_counts(nu: f64, dim: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..dim)
        .map(|k| nu.powi(k as i32) * (-nu).exp() / (1..=k).map(|j| j as f64).product::<f64>())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Probability that a threshold detector stays silent on `m` photons: no
/// dark count and every photon missed.
pub fn bucket_silent(m: usize, eta: f64, nu: f64, dim: usize) -> f64 {
    dark_counts(nu, dim)[0] * (1.0 - eta).powi(m as i32)
}

/// Probability that a number-resolving detector reports `n` counts on `m`
/// photons: detected photons plus dark counts, convolved.
pub fn pnr_reports(n: usize, m: usize, eta: f64, nu: f64, dim: usize) -> f64 {
    let dark = dark_counts(nu, dim);
    let mut p = 0.0;
    for j in 0..=m.min(n) {
        let k = n - j;
        if k >= dim {
            continue;
        }
        let ways = (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64);
        p += dark[k] * ways * eta.powi(j as i32) * (1.0 - eta).powi((m - j) as i32);
    }
    p
}

/// Detector of one arm, as per-photon-number click probabilities.
#[derive(Debug, Clone, Copy)]
pub struct ArmDetector {
    pub eta: f64,
    pub nu: f64,
    /// Number-resolving: a "click" means exactly one count; zero counts means
    /// silent; anything else is neither.
    pub pnr: bool,
}

impl ArmDetector {
    /// `(P(click | m), P(silent | m))`.
    pub fn outcome(&self, m: usize, dim: usize) -> (f64, f64) {
        if self.pnr {
            (pnr_reports(1, m, self.eta, self.nu, dim), pnr_reports(0, m, self.eta, self.nu, dim))
        } else {
            let silent = bucket_silent(m, self.eta, self.nu, dim);
            (1.0 - silent, silent)
        }
    }
}

/// Configuration probabilities `[a_H][a_V][b_H][b_V]` with index 0 = click,
/// 1 = silent, by summing over every basis state.
pub fn config_tensor(chi: f64, dim: usize, arm_a: ArmDetector, arm_b: ArmDetector) -> [[[[f64; 2]; 2]; 2]; 2] {
    let probs = spdc_probabilities(chi, dim);
    let mut t = [[[[0.0; 2]; 2]; 2]; 2];
    for (i, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let occ = occupations(i, dim);
        let o: Vec<[f64; 2]> = occ
            .iter()
            .enumerate()
            .map(|(mode, &m)| {
                let (c, s) = if mode < 2 { arm_a.outcome(m, dim) } else { arm_b.outcome(m, dim) };
                [c, s]
            })
            .collect();
        for (w, x, y, z) in quad() {
            t[w][x][y][z] += p * o[0][w] * o[1][x] * o[2][y] * o[3][z];
        }
    }
    t
}

fn quad() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..16).map(|k| (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1))
}

/// Polarization reported by one side for its click pattern `(H, V)`, as
/// `[P(H), P(V)]`; `None` when the side is silent.
fn side_bit(h_click: bool, v_click: bool) -> Option<[f64; 2]> {
    match (h_click, v_click) {
        (true, false) => Some([1.0, 0.0]),
        (false, true) => Some([0.0, 1.0]),
        (true, true) => Some([0.5, 0.5]),
        (false, false) => None,
    }
}

/// Squashed coincidences `[HH, HV, VH, VV]`.
pub fn squash(t: &[[[[f64; 2]; 2]; 2]; 2]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (w, x, y, z) in quad() {
        let (Some(a), Some(b)) = (side_bit(w == 0, x == 0), side_bit(y == 0, z == 0)) else { continue };
        for pa in 0..2 {
            for pb in 0..2 {
                out[2 * pa + pb] += t[w][x][y][z] * a[pa] * b[pb];
            }
        }
    }
    out
}

/// Squashing by simulation: draws click patterns from `t`, resolves double
/// clicks with a fair coin and returns the outcome frequencies.
pub fn squash_monte_carlo(t: &[[[[f64; 2]; 2]; 2]; 2], samples: usize, seed: u64) -> [f64; 4] {
    use rand::distributions::{Distribution, WeightedIndex};
    use rand::{Rng, SeedableRng};

    let patterns: Vec<_> = quad().collect();
    let weights: Vec<f64> = patterns.iter().map(|&(w, x, y, z)| t[w][x][y][z]).collect();
    let dist = WeightedIndex::new(&weights).expect("nonnegative tensor with positive mass");
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut counts = [0usize; 4];
    let pick = |h: bool, v: bool, rng: &mut rand::rngs::StdRng| match (h, v) {
        (true, false) => Some(0),
        (false, true) => Some(1),
        (true, true) => Some(usize::from(rng.gen::<bool>())),
        (false, false) => None,
    };
    for _ in 0..samples {
        let (w, x, y, z) = patterns[dist.sample(&mut rng)];
        let a = pick(w == 0, x == 0, &mut rng);
        let b = pick(y == 0, z == 0, &mut rng);
        if let (Some(a), Some(b)) = (a, b) {
            counts[2 * a + b] += 1;
        }
    }
    counts.map(|c| c as f64 / samples as f64)
}

pub fn qber(c: &[f64; 4]) -> f64 {
    (c[0] + c[3]) / c.iter().sum::<f64>()
}

pub fn entropy(x: f64) -> f64 {
    [x, 1.0 - x].iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln() / std::f64::consts::LN_2).sum()
}

/// Bisection root of a continuous `f` with a sign change on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let f_lo = f(lo);
    assert!(f_lo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// QBER at which `1 − (1 + f_ec + q)·H₂(q)` vanishes.
pub fn qber_threshold(f_ec: f64) -> f64 {
    bisect(|q| 1.0 - (1.0 + f_ec + q) * entropy(q), 1e-6, 0.3, 1e-12)
}

/// `(argmax, max)` of `f` over `points` evenly spaced samples of `[lo, hi]`.
pub fn grid_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .map(|x| (x, f(x)))
        .fold((lo, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_at_zero_squeezing() {
        let p = spdc_probabilities(0.0, 3);
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn weak_squeezing_emits_single_pairs() {
        let chi = 0.01;
        let p = spdc_probabilities(chi, 4);
        let one_pair = p[index_of([1, 0, 0, 1], 4)] + p[index_of([0, 1, 1, 0], 4)];
        assert!((one_pair / (2.0 * chi * chi) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn silent_detector_stays_silent() {
        let off = ArmDetector { eta: 0.0, nu: 0.0, pnr: false };
        let t = config_tensor(0.2, 3, off, off);
        assert!((t[1][1][1][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pnr_outcomes_normalize() {
        for m in 0..4 {
            let total: f64 = (0..8).map(|n| pnr_reports(n, m, 0.6, 0.1, 4)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_value() {
        assert!((qber_threshold(1.17) - 0.092).abs() < 0.002);
    }
}
