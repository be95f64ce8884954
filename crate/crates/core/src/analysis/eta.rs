//! The smoothing-rate function η(ν) = 2^{−ν}·C(ν, ⌊(ν+1)/2⌋).

/// η(ν). Exact product form up to ν = 1000, log form beyond.
pub fn eta(nu: usize) -> f64 {
    let k = nu.div_ceil(2);
    if nu <= 1000 {
        // C(ν,k)/2^ν accumulated as Π (ν−k+i)/(2i) · 2^{−(ν−k)} keeps every
        // partial product bounded.
        let mut v = 1.0;
        for i in 1..=k {
            v *= (nu - k + i) as f64 / (2 * i) as f64;
        }
        v * 0.5f64.powi((nu - k) as i32)
    } else {
        let ln_fact = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
        (ln_fact(nu) - ln_fact(k) - ln_fact(nu - k) - nu as f64 * std::f64::consts::LN_2).exp()
    }
}

/// The upper bound √(2/(πν)) for even ν and √(2/(π(ν+1))) for odd ν;
/// infinite at ν = 0.
pub fn eta_upper_bound(nu: usize) -> f64 {
    let m = if nu.is_multiple_of(2) { nu } else { nu + 1 };
    if m == 0 {
        return f64::INFINITY;
    }
    (2.0 / (std::f64::consts::PI * m as f64)).sqrt()
}
