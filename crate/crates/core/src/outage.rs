//! Conditional outage probability of a Nakagami-faded link with Nakagami
//! interferers, thermal noise and random interferer activity.
//!
//! For a desired link with integer parameter `m` and normalized power `Ω`,
//! let `b = β m / Ω`. The outage probability is
//!
//! ```text
//! ε = 1 − e^{−b z} Σ_{s<m} Σ_{t≤s} b^s z^{s−t} H_t / (s−t)!
//! ```
//!
//! where `H_t` is the degree-`t` coefficient of `Π_i Σ_ℓ G_ℓ(i) x^ℓ`. The
//! product is evaluated as a polynomial truncated at degree `m − 1`, so the
//! cost is linear in the number of interferers. Internally the coefficients
//! are carried pre-multiplied by `b^t`, which keeps every factor in `[0, 1]`
//! and makes `z = 0` (no noise) an ordinary input.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Result, SimError};
use crate::routing::Link;

/// Guard band outside `[0, 1]` tolerated as roundoff before clamping.
pub const CLAMP_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    pub omega: f64,
    pub m: u32,
    /// Probability that the interferer transmits during the desired slot.
    pub activity: f64,
}

impl Interferer {
    pub fn new(omega: f64, m: u32, activity: f64) -> Self {
        Interferer { omega, m, activity }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutageInput {
    pub desired_omega: f64,
    pub desired_m: u32,
    pub interferers: Vec<Interferer>,
    /// `z = Γ⁻¹`.
    pub inv_snr: f64,
    /// SINR threshold `β`, linear.
    pub threshold: f64,
}

impl LinkOutageInput {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidInput(msg));
        if !(self.desired_omega > 0.0 && self.desired_omega.is_finite()) {
            return bad(format!("desired Ω must be positive, got {}", self.desired_omega));
        }
        if self.desired_m == 0 {
            return bad("desired Nakagami parameter must be ≥ 1".into());
        }
        if !(self.inv_snr >= 0.0 && self.inv_snr.is_finite()) {
            return bad(format!("inverse SNR must be ≥ 0, got {}", self.inv_snr));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad(format!("SINR threshold must be > 0, got {}", self.threshold));
        }
        for (idx, i) in self.interferers.iter().enumerate() {
            if !(i.omega > 0.0 && i.omega.is_finite()) {
                return bad(format!("interferer {idx}: Ω must be positive, got {}", i.omega));
            }
            if i.m == 0 {
                return bad(format!("interferer {idx}: Nakagami parameter must be ≥ 1"));
            }
            if !(0.0..=1.0).contains(&i.activity) {
                return bad(format!(
                    "interferer {idx}: activity must lie in [0, 1], got {}",
                    i.activity
                ));
            }
        }
        Ok(())
    }

    /// `β_kj = β m / Ω`.
    pub fn scaled_threshold(&self) -> f64 {
        self.threshold * self.desired_m as f64 / self.desired_omega
    }
}

/// `Γ(ℓ+m) / (ℓ! Γ(m))` as a running product, i.e. `C(ℓ+m−1, ℓ)`.
fn gamma_ratio(l: u32, m: u32) -> f64 {
    let mut acc = 1.0;
    for q in 1..=l {
        acc *= (m - 1 + q) as f64 / q as f64;
    }
    acc
}

/// `Ψ = (β_kj Ω/m + 1)⁻¹`.
pub fn psi(interferer: &Interferer, beta_kj: f64) -> f64 {
    1.0 / (beta_kj * interferer.omega / interferer.m as f64 + 1.0)
}

/// `G_ℓ` for one interferer.
pub fn term_g(l: u32, interferer: &Interferer, beta_kj: f64) -> f64 {
    let m = interferer.m;
    let p = interferer.activity;
    let psi = psi(interferer, beta_kj);
    if l == 0 {
        1.0 - p * (1.0 - psi.powi(m as i32))
    } else {
        p * gamma_ratio(l, m)
            * (interferer.omega / m as f64).powi(l as i32)
            * psi.powi((m + l) as i32)
    }
}

/// `H_t`: the degree-`t` coefficient of the product over interferers of
/// `Σ_ℓ G_ℓ x^ℓ`.
pub fn coefficient_h(t: u32, interferers: &[Interferer], beta_kj: f64) -> f64 {
    let len = t as usize + 1;
    let mut poly = vec![0.0; len];
    poly[0] = 1.0;
    let mut factor = vec![0.0; len];
    for i in interferers {
        for (l, f) in factor.iter_mut().enumerate() {
            *f = term_g(l as u32, i, beta_kj);
        }
        multiply_truncated(&mut poly, &factor);
    }
    poly[t as usize]
}

/// In-place `poly ← poly · factor` truncated to `poly.len()` coefficients.
fn multiply_truncated(poly: &mut [f64], factor: &[f64]) {
    for t in (0..poly.len()).rev() {
        let mut acc = poly[t] * factor[0];
        for l in 1..=t {
            acc += poly[t - l] * factor[l];
        }
        poly[t] = acc;
    }
}

/// Closed-form conditional outage probability, clamped to `[0, 1]`.
pub fn outage_probability(input: &LinkOutageInput) -> Result<f64> {
    input.validate()?;
    let raw = outage_unclamped(input);
    clamp_outage(raw)
}

pub(crate) fn clamp_outage(raw: f64) -> Result<f64> {
    if !(-CLAMP_GUARD..=1.0 + CLAMP_GUARD).contains(&raw) {
        return Err(SimError::NumericalInstability { value: raw });
    }
    Ok(raw.clamp(0.0, 1.0))
}

fn outage_unclamped(input: &LinkOutageInput) -> f64 {
    let m = input.desired_m as usize;
    let beta_kj = input.scaled_threshold();

    // h[t] = β_kj^t H_t. h0_excess tracks h[0] − 1 separately so that it
    // survives when the outage probability is tiny.
    let mut h = vec![0.0; m];
    h[0] = 1.0;
    let mut h0_excess = 0.0;
    let mut factor = vec![0.0; m];
    for i in &input.interferers {
        if i.activity == 0.0 {
            continue;
        }
        let x = beta_kj * i.omega / i.m as f64;
        let psi = 1.0 / (x + 1.0);
        // 1 − Ψ^m = (1 − Ψ) Σ_{k<m} Ψ^k with 1 − Ψ = xΨ
        let mut psi_m = 1.0;
        let mut geometric = 0.0;
        for _ in 0..i.m {
            geometric += psi_m;
            psi_m *= psi;
        }
        let q = i.activity * x * psi * geometric;
        h0_excess -= q * (1.0 + h0_excess);
        factor[0] = 1.0 - q;
        if m == 1 {
            h[0] *= factor[0];
            continue;
        }
        // β^ℓ G_ℓ = p C(ℓ+m−1, ℓ) Ψ^m (xΨ)^ℓ
        let step = x * psi;
        let mut power = i.activity * psi_m;
        for (l, f) in factor.iter_mut().enumerate().skip(1) {
            power *= step * (i.m as f64 - 1.0 + l as f64) / l as f64;
            *f = power;
        }
        multiply_truncated(&mut h, &factor);
    }

    // partial[n] = Σ_{u ≤ n} (b z)^u / u!
    let a = beta_kj * input.inv_snr;
    let mut partial = Vec::with_capacity(m);
    let mut term = 1.0;
    let mut tail = 0.0;
    partial.push(1.0);
    for u in 1..m {
        term *= a / u as f64;
        tail += term;
        partial.push(1.0 + tail);
    }
    // ε = 1 − e^{−a} Σ_t h[t] partial[m−1−t], rearranged around h[0] = 1 and
    // partial[·] = 1 so that no two numbers near one are subtracted.
    let full = partial[m - 1];
    let rest: f64 = h
        .iter()
        .enumerate()
        .skip(1)
        .map(|(t, ht)| ht * partial[m - 1 - t])
        .sum();
    let excess = h0_excess * full + tail + rest;
    -(-a).exp_m1() - (-a).exp() * excess
}

/// Brute-force estimate of the same probability: samples unit-mean Gamma
/// fading gains and Bernoulli activity, and counts SINR ≤ β. Returns the
/// estimate and its binomial standard error.
pub fn monte_carlo_outage<R: Rng + ?Sized>(
    input: &LinkOutageInput,
    draws: u64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    input.validate()?;
    if draws == 0 {
        return Err(SimError::InvalidInput("need at least one draw".into()));
    }
    let unit_gamma = |m: u32| Gamma::new(m as f64, 1.0 / m as f64).expect("m ≥ 1");
    let desired = unit_gamma(input.desired_m);
    let interferers: Vec<(Gamma<f64>, &Interferer)> = input
        .interferers
        .iter()
        .map(|i| (unit_gamma(i.m), i))
        .collect();

    let mut outages = 0u64;
    for _ in 0..draws {
        let signal = desired.sample(rng) * input.desired_omega;
        let mut interference = 0.0;
        for (gain, i) in &interferers {
            if rng.random::<f64>() < i.activity {
                interference += gain.sample(rng) * i.omega;
            }
        }
        if signal <= input.threshold * (input.inv_snr + interference) {
            outages += 1;
        }
    }
    let p = outages as f64 / draws as f64;
    Ok((p, (p * (1.0 - p) / draws as f64).sqrt()))
}

/// Outage probabilities of the links evaluated for one service realization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutageTable {
    entries: Vec<(Link, f64)>,
}

impl OutageTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        OutageTable {
            entries: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, link: Link, eps: f64) {
        self.entries.push((link, eps));
    }

    pub fn get(&self, link: Link) -> Option<f64> {
        self.entries.iter().find(|(l, _)| *l == link).map(|(_, e)| *e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Link, f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn input(desired_m: u32, interferers: Vec<Interferer>, z: f64, beta: f64) -> LinkOutageInput {
        LinkOutageInput {
            desired_omega: 1.0,
            desired_m,
            interferers,
            inv_snr: z,
            threshold: beta,
        }
    }

    #[test]
    fn noise_only_rayleigh() {
        let eps = outage_probability(&input(1, vec![], 1.0, 2.0)).unwrap();
        assert!((eps - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert!((eps - 0.864665).abs() < 1e-6);
    }

    #[test]
    fn single_interferer_no_noise() {
        let eps = outage_probability(&input(1, vec![Interferer::new(1.0, 1, 1.0)], 0.0, 2.0)).unwrap();
        assert!((eps - 2.0 / 3.0).abs() < 1e-15);
        let (est, se) = monte_carlo_outage(
            &input(1, vec![Interferer::new(1.0, 1, 1.0)], 0.0, 2.0),
            200_000,
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert!((est - 2.0 / 3.0).abs() <= 3.0 * se, "{est} ± {se}");
    }

    #[test]
    fn no_noise_no_interference_never_fails() {
        let eps = outage_probability(&input(2, vec![], 0.0, 2.0)).unwrap();
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn g_terms() {
        let silent = Interferer::new(1.0, 1, 0.0);
        assert_eq!(term_g(0, &silent, 2.0), 1.0);
        let loud = Interferer::new(1.0, 1, 1.0);
        assert!((term_g(0, &loud, 2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((term_g(1, &loud, 2.0) - 1.0 / 9.0).abs() < 1e-15);
        // Γ(2+3)/(2! Γ(3)) = 6
        assert_eq!(gamma_ratio(2, 3), 6.0);
        assert_eq!(gamma_ratio(0, 3), 1.0);
    }

    #[test]
    fn h_coefficients_expand_the_multi_index_sum() {
        let a = Interferer::new(0.7, 2, 0.4);
        let b = Interferer::new(1.3, 3, 0.9);
        let beta = 1.7;
        let g = |l, i: &Interferer| term_g(l, i, beta);
        assert!((coefficient_h(0, &[a, b], beta) - g(0, &a) * g(0, &b)).abs() < 1e-15);
        assert!((coefficient_h(2, &[a], beta) - g(2, &a)).abs() < 1e-15);
        let t1 = g(1, &a) * g(0, &b) + g(0, &a) * g(1, &b);
        assert!((coefficient_h(1, &[a, b], beta) - t1).abs() < 1e-15);
    }

    /// Direct evaluation of the printed series with unscaled `H_t`, used to
    /// cross-check the rescaled implementation at `z > 0`.
    fn printed_series(inp: &LinkOutageInput) -> f64 {
        let b = inp.scaled_threshold();
        let z = inp.inv_snr;
        let mut sum = 0.0;
        for s in 0..inp.desired_m {
            let mut inner = 0.0;
            for t in 0..=s {
                let fact: f64 = (1..=(s - t)).map(|v| v as f64).product();
                inner += z.powi(-(t as i32)) * coefficient_h(t, &inp.interferers, b) / fact;
            }
            sum += (b * z).powi(s as i32) * inner;
        }
        1.0 - (-b * z).exp() * sum
    }

    #[test]
    fn rescaled_series_matches_printed_form() {
        let inp = LinkOutageInput {
            desired_omega: 2.5,
            desired_m: 3,
            interferers: vec![
                Interferer::new(0.4, 1, 0.4),
                Interferer::new(1.1, 2, 0.7),
                Interferer::new(0.2, 3, 1.0),
            ],
            inv_snr: 0.8,
            threshold: 2.0,
        };
        let a = outage_probability(&inp).unwrap();
        let b = printed_series(&inp);
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }

    #[test]
    fn m2_three_interferers_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let interferers = (0..3)
            .map(|k| Interferer::new(rand::Rng::random_range(&mut rng, 0.05..1.0), 1 + (k % 2), 0.4))
            .collect();
        let inp = LinkOutageInput {
            desired_omega: 1.0,
            desired_m: 2,
            interferers,
            inv_snr: 1.0,
            threshold: 2.0,
        };
        let eps = outage_probability(&inp).unwrap();
        let (est, se) = monte_carlo_outage(&inp, 1_000_000, &mut rng).unwrap();
        assert!((est - eps).abs() <= 3.0 * se, "closed {eps}, mc {est} ± {se}");
    }

    #[test]
    fn monte_carlo_noise_only() {
        let inp = input(1, vec![], 1.0, 2.0);
        let (est, se) = monte_carlo_outage(&inp, 1_000_000, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert!((est - 0.864665).abs() <= 3.0 * 0.00034, "{est}");
        assert!((se - 0.00034).abs() < 0.00001);
        let (zero, _) = monte_carlo_outage(&input(1, vec![], 1.0, 1e-300), 10_000, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn unit_mean_gamma_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for m in 1..=3u32 {
            let g = Gamma::new(m as f64, 1.0 / m as f64).unwrap();
            let n = 200_000;
            let samples: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)).collect();
            let mean = samples.iter().sum::<f64>() / n as f64;
            let se = (1.0 / m as f64 / n as f64).sqrt();
            assert!((mean - 1.0).abs() <= 3.0 * se, "m={m}: {mean}");
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(outage_probability(&input(0, vec![], 1.0, 2.0)).is_err());
        assert!(outage_probability(&input(1, vec![], -1.0, 2.0)).is_err());
        assert!(outage_probability(&input(1, vec![], 1.0, 0.0)).is_err());
        assert!(outage_probability(&input(1, vec![Interferer::new(1.0, 1, 1.5)], 1.0, 2.0)).is_err());
        assert!(outage_probability(&input(1, vec![Interferer::new(0.0, 1, 0.5)], 1.0, 2.0)).is_err());
        assert!(clamp_outage(1.0 + 1e-6).is_err());
        assert_eq!(clamp_outage(1.0 + 1e-12).unwrap(), 1.0);
    }

    fn arb_interferer() -> impl Strategy<Value = Interferer> {
        (1e-3f64..10.0, 1u32..=3, 0.0f64..=1.0).prop_map(|(o, m, p)| Interferer::new(o, m, p))
    }

    fn arb_input() -> impl Strategy<Value = LinkOutageInput> {
        (
            1e-2f64..100.0,
            1u32..=3,
            prop::collection::vec(arb_interferer(), 0..10),
            prop_oneof![Just(0.0), 0.0f64..3.0],
            0.1f64..8.0,
        )
            .prop_map(|(o, m, i, z, b)| LinkOutageInput {
                desired_omega: o,
                desired_m: m,
                interferers: i,
                inv_snr: z,
                threshold: b,
            })
    }

    proptest! {
        #[test]
        fn stays_in_unit_interval(inp in arb_input()) {
            let eps = outage_probability(&inp).unwrap();
            prop_assert!((0.0..=1.0).contains(&eps));
        }

        #[test]
        fn silent_interferer_is_same_as_absent(inp in arb_input(), extra in arb_interferer(), pos in 0usize..10) {
            let base = outage_probability(&inp).unwrap();
            let mut with = inp.clone();
            let at = pos.min(with.interferers.len());
            with.interferers.insert(at, Interferer { activity: 0.0, ..extra });
            prop_assert_eq!(outage_probability(&with).unwrap().to_bits(), base.to_bits());
        }

        #[test]
        fn monotone_in_threshold_and_noise(inp in arb_input(), f in 1.0f64..3.0) {
            let base = outage_probability(&inp).unwrap();
            let tol = 1e-12;
            let mut b = inp.clone();
            b.threshold *= f;
            prop_assert!(outage_probability(&b).unwrap() >= base - tol);
            let mut z = inp.clone();
            z.inv_snr = z.inv_snr * f + 0.1;
            prop_assert!(outage_probability(&z).unwrap() >= base - tol);
            let mut o = inp.clone();
            o.desired_omega *= f;
            prop_assert!(outage_probability(&o).unwrap() <= base + tol);
        }

        #[test]
        fn monotone_in_interferer(inp in arb_input(), f in 1.0f64..3.0, dp in 0.0f64..1.0) {
            prop_assume!(!inp.interferers.is_empty());
            let base = outage_probability(&inp).unwrap();
            let tol = 1e-12;
            let mut louder = inp.clone();
            louder.interferers[0].omega *= f;
            prop_assert!(outage_probability(&louder).unwrap() >= base - tol);
            let mut busier = inp.clone();
            let p = busier.interferers[0].activity;
            busier.interferers[0].activity = p + (1.0 - p) * dp;
            prop_assert!(outage_probability(&busier).unwrap() >= base - tol);
        }
    }
}
