//! Dense statevector order finding: Hadamard superposition, modular
//! exponentiation, (approximate) QFT on the argument register, then
//! continued-fraction period extraction and the reduction to factoring.
//!
//! Amplitude index layout: `a * 2^n + f` with `a` the argument register
//! (t qubits) and `f` the function register (n qubits).

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub const DEFAULT_AMPLITUDE_BUDGET: usize = 1 << 24;
/// Largest multiple of a convergent denominator tried by [`extract_period`].
pub const CANDIDATE_MULTIPLES: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShorError {
    #[error("invalid modulus {0}: {1}")]
    InvalidModulus(u64, &'static str),
    #[error("base {x} must satisfy 1 < x < {n}")]
    InvalidBase { x: u64, n: u64 },
    #[error("gcd({x}, {n}) = {gcd}, base is not coprime to the modulus")]
    NotCoprime { x: u64, n: u64, gcd: u64 },
    #[error("argument register needs 1 to 30 qubits, got {0}")]
    InvalidRegister(u32),
    #[error("cutoff must lie in [1, {t}], got {cutoff}")]
    InvalidCutoff { cutoff: u32, t: u32 },
    #[error("{needed} amplitudes exceed the budget of {budget}")]
    ResourceExceeded { needed: u128, budget: usize },
    #[error("no factor found in {0} attempts")]
    AttemptsExhausted(usize),
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Square-and-multiply `base^exp mod m`.
pub fn mod_pow(base: u64, mut exp: u64, m: u64) -> u64 {
    let m128 = m as u128;
    let mut result = 1 % m128;
    let mut b = base as u128 % m128;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    result as u64
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn is_prime_power(n: u64) -> bool {
    (2..).take_while(|p| p * p <= n).find(|p| n % p == 0).map_or(is_prime(n), |p| {
        let mut m = n;
        while m % p == 0 {
            m /= p;
        }
        m == 1
    })
}

/// Rejects moduli order finding cannot factor: even, prime or prime power.
pub fn validate_modulus(n: u64) -> Result<(), ShorError> {
    if n < 15 {
        return Err(ShorError::InvalidModulus(n, "must be at least 15"));
    }
    if n % 2 == 0 {
        return Err(ShorError::InvalidModulus(n, "must be odd"));
    }
    if is_prime(n) {
        return Err(ShorError::InvalidModulus(n, "must be composite"));
    }
    if is_prime_power(n) {
        return Err(ShorError::InvalidModulus(n, "must not be a prime power"));
    }
    Ok(())
}

/// ⌈log2 n⌉ for n ≥ 2.
pub fn function_register_bits(n: u64) -> u32 {
    u64::BITS - (n - 1).leading_zeros()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderFindingConfig {
    pub modulus: u64,
    pub base: u64,
    pub t: u32,
    pub budget: usize,
}

impl OrderFindingConfig {
    pub fn new(modulus: u64, base: u64, t: u32) -> Result<Self, ShorError> {
        Self::with_budget(modulus, base, t, DEFAULT_AMPLITUDE_BUDGET)
    }

    pub fn with_budget(modulus: u64, base: u64, t: u32, budget: usize) -> Result<Self, ShorError> {
        validate_modulus(modulus)?;
        if !(1 < base && base < modulus) {
            return Err(ShorError::InvalidBase { x: base, n: modulus });
        }
        let g = gcd(base, modulus);
        if g != 1 {
            return Err(ShorError::NotCoprime {
                x: base,
                n: modulus,
                gcd: g,
            });
        }
        if !(1..=30).contains(&t) {
            return Err(ShorError::InvalidRegister(t));
        }
        let cfg = OrderFindingConfig {
            modulus,
            base,
            t,
            budget,
        };
        let needed = (cfg.big_t() as u128) << cfg.n();
        if needed > budget as u128 {
            return Err(ShorError::ResourceExceeded { needed, budget });
        }
        Ok(cfg)
    }

    /// T = 2^t.
    pub fn big_t(&self) -> usize {
        1 << self.t
    }

    /// Function register width.
    pub fn n(&self) -> u32 {
        function_register_bits(self.modulus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    /// Argument register qubits.
    pub t: u32,
    /// Function register qubits.
    pub n: u32,
}

impl StateVector {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn amplitude(&self, a: usize, f: usize) -> Complex64 {
        self.amplitudes[(a << self.n) | f]
    }
}

/// (1/√T) Σ_a |a⟩|x^a mod N⟩.
pub fn build_order_state(cfg: &OrderFindingConfig) -> StateVector {
    let n = cfg.n();
    let big_t = cfg.big_t();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); big_t << n];
    let weight = Complex64::new(1.0 / (big_t as f64).sqrt(), 0.0);
    let mut f = 1 % cfg.modulus;
    for a in 0..big_t {
        debug_assert_eq!(f, mod_pow(cfg.base, a as u64, cfg.modulus));
        amplitudes[(a << n) | f as usize] = weight;
        f = ((f as u128 * cfg.base as u128) % cfg.modulus as u128) as u64;
    }
    StateVector { amplitudes, t: cfg.t, n }
}

fn reverse_bits(v: usize, width: u32) -> usize {
    if width == 0 {
        0
    } else {
        v.reverse_bits() >> (usize::BITS - width)
    }
}

/// QFT gate recursion on the argument register. Controlled rotations by
/// π/2^j with j ≥ `cutoff_k` are omitted; `cutoff_k = t` is exact and equals
/// the DFT with kernel e^{+2πi·a·z/T}.
pub fn apply_qft_argument(state: &mut StateVector, cutoff_k: u32) -> Result<(), ShorError> {
    let (t, n) = (state.t, state.n);
    if !(1..=t).contains(&cutoff_k) {
        return Err(ShorError::InvalidCutoff { cutoff: cutoff_k, t });
    }
    let amps = &mut state.amplitudes;
    for target in (0..t).rev() {
        let tbit = 1usize << (target + n);
        for i in 0..amps.len() {
            if i & tbit == 0 {
                let (u, v) = (amps[i], amps[i | tbit]);
                amps[i] = (u + v) * FRAC_1_SQRT_2;
                amps[i | tbit] = (u - v) * FRAC_1_SQRT_2;
            }
        }
        for control in (0..target).rev() {
            let j = target - control;
            if j >= cutoff_k {
                break;
            }
            let phase = Complex64::from_polar(1.0, PI / (1u64 << j) as f64);
            let both = tbit | 1usize << (control + n);
            for (i, a) in amps.iter_mut().enumerate() {
                if i & both == both {
                    *a *= phase;
                }
            }
        }
    }
    // Qubit-order reversal of the argument register.
    let fmask = (1usize << n) - 1;
    for i in 0..amps.len() {
        let a = i >> n;
        let r = reverse_bits(a, t);
        if r > a {
            amps.swap(i, (r << n) | (i & fmask));
        }
    }
    Ok(())
}

/// Marginal P(z) over the argument register.
pub fn argument_distribution(state: &StateVector) -> Vec<f64> {
    state
        .amplitudes
        .chunks(1 << state.n)
        .map(|row| row.iter().map(|a| a.norm_sqr()).sum())
        .collect()
}

/// i.i.d. measurement outcomes, deterministic per seed.
pub fn sample_z(dist: &[f64], rng_seed: u64, count: usize) -> Vec<usize> {
    let index = WeightedIndex::new(dist).expect("distribution has positive mass");
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    (0..count).map(|_| index.sample(&mut rng)).collect()
}

/// Convergents p/q of z/T in order.
pub fn convergents(z: u64, big_t: u64) -> Vec<(u64, u64)> {
    let (mut num, mut den) = (z, big_t);
    let (mut p_prev, mut p) = (0u64, 1u64);
    let (mut q_prev, mut q) = (1u64, 0u64);
    let mut out = Vec::new();
    while den != 0 {
        let a = num / den;
        (num, den) = (den, num - a * den);
        (p_prev, p) = (p, a * p + p_prev);
        (q_prev, q) = (q, a * q + q_prev);
        out.push((p, q));
    }
    out
}

/// Smallest r' ≤ N that is a convergent denominator of z/T (or one of its
/// first [`CANDIDATE_MULTIPLES`] multiples) with x^{r'} ≡ 1 mod N.
pub fn extract_period(z: u64, big_t: u64, modulus: u64, base: u64) -> Option<u64> {
    convergents(z, big_t)
        .into_iter()
        .filter(|&(p, q)| p != 0 && q <= modulus)
        .flat_map(|(_, q)| (1..=CANDIDATE_MULTIPLES).map(move |m| m * q))
        .filter(|&r| r <= modulus && mod_pow(base, r, modulus) == 1)
        .min()
}

/// Brute-force smallest r ≥ 1 with x^r ≡ 1 mod N.
pub fn multiplicative_order_oracle(modulus: u64, base: u64) -> Result<u64, ShorError> {
    let g = gcd(base, modulus);
    if g != 1 {
        return Err(ShorError::NotCoprime {
            x: base,
            n: modulus,
            gcd: g,
        });
    }
    let mut v = base % modulus;
    let mut r = 1;
    while v != 1 % modulus {
        v = ((v as u128 * base as u128) % modulus as u128) as u64;
        r += 1;
    }
    Ok(r)
}

/// Post-QFT argument distribution for one configuration.
pub fn order_finding_distribution(cfg: &OrderFindingConfig, cutoff_k: u32) -> Result<Vec<f64>, ShorError> {
    let mut state = build_order_state(cfg);
    apply_qft_argument(&mut state, cutoff_k)?;
    Ok(argument_distribution(&state))
}

/// One trial: draw up to `samples` outcomes and return the first recovered
/// period.
pub fn recover_period(dist: &[f64], cfg: &OrderFindingConfig, rng_seed: u64, samples: usize) -> Option<u64> {
    sample_z(dist, rng_seed, samples)
        .into_iter()
        .find_map(|z| extract_period(z as u64, cfg.big_t() as u64, cfg.modulus, cfg.base))
}

/// Fraction of `trials` seeded trials that recover the true order.
pub fn recovery_rate(cfg: &OrderFindingConfig, cutoff_k: u32, trials: u64, samples: usize, seed: u64) -> Result<f64, ShorError> {
    let dist = order_finding_distribution(cfg, cutoff_k)?;
    let order = multiplicative_order_oracle(cfg.modulus, cfg.base)?;
    let hits = (0..trials)
        .filter(|i| recover_period(&dist, cfg, seed.wrapping_add(*i), samples) == Some(order))
        .count();
    Ok(hits as f64 / trials as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factorization {
    /// Ascending, product equals N.
    pub factors: (u64, u64),
    pub base: u64,
    /// Period found by order finding; `None` when gcd(x, N) already split N.
    pub period: Option<u64>,
    pub attempts: usize,
}

/// gcd(x^(r/2) ± 1, N) when r is even and x^(r/2) ≢ −1; ascending.
pub fn split_from_period(modulus: u64, base: u64, period: u64) -> Option<(u64, u64)> {
    if period % 2 != 0 {
        return None;
    }
    let half = mod_pow(base, period / 2, modulus);
    if half == modulus - 1 {
        return None;
    }
    let p = gcd(half + modulus - 1, modulus);
    let q = gcd(half + 1, modulus);
    (p > 1 && p < modulus && p * q == modulus).then(|| (p.min(q), p.max(q)))
}

/// Classical reduction around simulated order finding with t = 2n.
pub fn shor_factor(modulus: u64, rng_seed: u64, max_attempts: usize) -> Result<Factorization, ShorError> {
    validate_modulus(modulus)?;
    let t = 2 * function_register_bits(modulus);
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let done = |a: u64, b: u64, base, period, attempts| Factorization {
        factors: (a.min(b), a.max(b)),
        base,
        period,
        attempts,
    };
    for attempt in 1..=max_attempts {
        let x = rng.gen_range(2..modulus);
        let g = gcd(x, modulus);
        if g > 1 {
            return Ok(done(g, modulus / g, x, None, attempt));
        }
        let cfg = OrderFindingConfig::new(modulus, x, t)?;
        let dist = order_finding_distribution(&cfg, t)?;
        let Some(r) = recover_period(&dist, &cfg, rng.gen(), 1) else { continue };
        if let Some((p, q)) = split_from_period(modulus, x, r) {
            return Ok(done(p, q, x, Some(r), attempt));
        }
    }
    Err(ShorError::AttemptsExhausted(max_attempts))
}

/// `z,probability` rows for plotting.
pub fn histogram_csv(dist: &[f64]) -> String {
    let mut out = String::from("z,probability\n");
    for (z, p) in dist.iter().enumerate() {
        let _ = writeln!(out, "{z},{p:.12}");
    }
    out
}

/// Smallest base coprime to N, used as a default.
pub fn smallest_coprime_base(modulus: u64) -> Option<u64> {
    (2..modulus).find(|&x| gcd(x, modulus) == 1)
}
