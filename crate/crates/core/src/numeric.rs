//! Small numeric helpers shared across modules.

/// Error-free product: `a * b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Double-double accumulator, roughly twice the working precision.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Accumulator {
    hi: f64,
    lo: f64,
}

impl Accumulator {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo += e;
    }

    #[inline]
    pub(crate) fn add_product(&mut self, a: f64, b: f64) {
        let (p, pe) = two_prod(a, b);
        let (s, e) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += e + pe;
    }

    pub(crate) fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ss: f64 = v.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * ss.sqrt()
}

/// SplitMix64 finalizer; derives independent child seeds from `(base, index)`.
pub(crate) fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED69));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_recovers_cancelled_low_bits() {
        let mut acc = Accumulator::default();
        acc.add(1e16);
        acc.add(1.0);
        acc.add(-1e16);
        assert_eq!(acc.value(), 1.0);

        let mut acc = Accumulator::default();
        acc.add_product(1e8 + 1.0, 1e8 - 1.0);
        acc.add(-1e16);
        assert_eq!(acc.value(), -1.0);
    }

    #[test]
    fn norm2_handles_extremes() {
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(norm2(&[]), 0.0);
        assert!((norm2(&[3e200, 4e200]) - 5e200).abs() < 1e186);
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
