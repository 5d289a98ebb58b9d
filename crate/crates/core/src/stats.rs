//! One-sided exact (Clopper-Pearson) upper bounds on per-kilometer event rates.
//!
//! Each kilometer (or each `1 / trials_per_km` of a kilometer) is one
//! Bernoulli trial. The upper bound `p_u` on the per-trial probability solves
//! `P(X <= k; n, p_u) = 1 - confidence`, which is found by bisection on the
//! binomial CDF evaluated in log space. Trial counts may be fractional.

use crate::scalar::Scalar;

/// `P(X <= k)` for `X ~ Binomial(n, p)` with real `n > k`.
pub fn binomial_cdf<T: Scalar>(k: u64, n: T, p: T) -> T {
    if p <= T::zero() {
        return T::one();
    }
    if p >= T::one() {
        return T::zero();
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let mut log_term = n * (-p).ln_1p();
    let mut terms = Vec::with_capacity(k as usize + 1);
    terms.push(log_term);
    for i in 0..k {
        let i = T::from_u64(i).expect("count fits scalar");
        log_term = log_term + ((n - i) / (i + T::one())).ln() + log_odds;
        terms.push(log_term);
    }
    let peak = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if peak == T::neg_infinity() {
        return T::zero();
    }
    let sum = terms
        .iter()
        .fold(T::zero(), |acc, &l| acc + (l - peak).exp());
    (peak + sum.ln()).exp().min(T::one())
}

/// Upper confidence bound on a per-trial probability after `events`
/// successes in `trials` trials.
pub fn proportion_upper_bound<T: Scalar>(events: u64, trials: T, confidence: T) -> T {
    assert!(
        confidence > T::zero() && confidence < T::one(),
        "confidence must lie in (0, 1)"
    );
    assert!(trials > T::zero(), "trial count must be positive");
    let alpha = T::one() - confidence;
    let k = T::from_u64(events).expect("count fits scalar");
    if k >= trials {
        return T::one();
    }
    if events == 0 {
        return -(alpha.ln() / trials).exp_m1();
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..2000 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi || hi - lo <= hi * T::epsilon() * T::lit(4.0) {
            break;
        }
        if binomial_cdf(events, trials, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Upper bound on the event rate per kilometer, one trial per kilometer.
pub fn rate_upper_bound<T: Scalar>(events: u64, km: T, confidence: T) -> T {
    rate_upper_bound_with_trials(events, km, confidence, T::one())
}

/// Upper bound on the event rate per kilometer with `trials_per_km`
/// Bernoulli trials per kilometer.
///
/// When there are at least as many events as trials the binomial model
/// saturates and the observed rate is returned.
pub fn rate_upper_bound_with_trials<T: Scalar>(
    events: u64,
    km: T,
    confidence: T,
    trials_per_km: T,
) -> T {
    assert!(km > T::zero(), "distance must be positive");
    assert!(trials_per_km > T::zero(), "trials per km must be positive");
    let trials = km * trials_per_km;
    let k = T::from_u64(events).expect("count fits scalar");
    if k >= trials {
        return (k / km).max(trials_per_km);
    }
    proportion_upper_bound(events, trials, confidence) * trials_per_km
}

/// Event-free distance needed before the zero-event bound drops to `target_rate`.
pub fn km_for_zero_event_bound<T: Scalar>(target_rate: T, confidence: T) -> T {
    assert!(target_rate > T::zero() && target_rate < T::one());
    (T::one() - confidence).ln() / (-target_rate).ln_1p()
}
