//! First-order Bessel function of the first kind.
//!
//! Power series for small arguments, Hankel asymptotic expansion beyond
//! x = 12. Accuracy is a few 1e-14 over the range used by the hole Fourier
//! transform (x up to ~40).

/// J1(x) for real x.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let val = if ax < 12.0 {
        j1_series(ax)
    } else {
        j1_asymptotic(ax)
    };
    if x < 0.0 {
        -val
    } else {
        val
    }
}

fn j1_series(x: f64) -> f64 {
    // J1(x) = sum_k (-1)^k (x/2)^{2k+1} / (k! (k+1)!)
    let half = 0.5 * x;
    let q = half * half;
    let mut term = half;
    let mut sum = term;
    for k in 1..80 {
        term *= -q / (k as f64 * (k as f64 + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn j1_asymptotic(x: f64) -> f64 {
    // Hankel expansion with mu = 4 nu^2 = 4:
    //   J1(x) = sqrt(2/(pi x)) [P(x) cos(w) - Q(x) sin(w)],  w = x - 3 pi / 4
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0; // Hankel symbol a_m = prod_{j=1..m} (mu - (2j-1)^2) / (m! 8^m)
    let mu = 4.0;
    for m in 1..24 {
        let j = 2.0 * m as f64 - 1.0;
        a *= (mu - j * j) / (m as f64 * 8.0 * x);
        let term = a;
        if term.abs() < 1e-18 {
            break;
        }
        match m % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let w = x - 3.0 * std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}
