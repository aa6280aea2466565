//! Instance-count figures and reference formula sizes.

use c3dsm_core::Variant;
use num_bigint::BigUint;

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::from(1u32), |acc, k| acc * k)
}

/// Number of instances of size `n`: `(n!)^(3n)`.
pub fn instance_count(n: usize) -> BigUint {
    factorial(n).pow(3 * n as u32)
}

/// Instances left after fixing the relabeling freedom: `(n!)^(3(n-1)) / 3`.
pub fn reduced_instance_count(n: usize) -> BigUint {
    factorial(n).pow(3 * (n as u32).saturating_sub(1)) / 3u32
}

/// Three significant digits, e.g. `1.54e31`.
pub fn scientific(x: &BigUint) -> String {
    let digits = x.to_string();
    let mut exp = digits.len() - 1;
    let lead: f64 = format!("{}.{}", &digits[..1], &digits[1..digits.len().min(17)])
        .parse()
        .expect("decimal digits");
    let mut mantissa = format!("{lead:.2}");
    if mantissa == "10.00" {
        mantissa = "1.00".into();
        exp += 1;
    }
    format!("{mantissa}e{exp}")
}

/// Variable and clause counts published for the n = 5 formulas.
pub fn published_sizes(n: usize, variant: Variant) -> Option<(u128, u128)> {
    match (n, variant) {
        (5, Variant::F) => Some((864_150, 2_607_327)),
        (5, Variant::FPrime) => Some((892_948, 2_650_522)),
        (6, Variant::F) => Some((62_208_270, 187_144_601)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts_by_hand() {
        // n = 2: each of the 6 agents picks one of 2 orders
        assert_eq!(instance_count(2), BigUint::from(64u32));
        // n = 3: 6^9 and 6^6 / 3
        assert_eq!(instance_count(3), BigUint::from(10_077_696u64));
        assert_eq!(reduced_instance_count(3), BigUint::from(15_552u32));
    }

    #[test]
    fn scientific_rounding() {
        assert_eq!(scientific(&BigUint::from(7u32)), "7.00e0");
        assert_eq!(scientific(&BigUint::from(99_960u32)), "1.00e5");
        assert_eq!(scientific(&BigUint::from(123_456u32)), "1.23e5");
        assert_eq!(scientific(&instance_count(5)), "1.54e31");
        assert_eq!(scientific(&instance_count(6)), "2.70e51");
        assert_eq!(scientific(&reduced_instance_count(5)), "2.97e24");
    }
}
