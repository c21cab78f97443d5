//! Small helpers for dense occupancy words.

/// Scatters the low bits of a counter into arbitrary positions of a 128-bit
/// word, eight source bits per table.
pub(crate) struct Scatter {
    tables: alloc::vec::Vec<[u128; 256]>,
}

impl Scatter {
    pub(crate) fn new(positions: &[usize]) -> Self {
        let mut tables = alloc::vec::Vec::new();
        for chunk in positions.chunks(8) {
            let mut table = [0u128; 256];
            for (byte, slot) in table.iter_mut().enumerate() {
                let mut word = 0u128;
                for (bit, &pos) in chunk.iter().enumerate() {
                    if byte >> bit & 1 == 1 {
                        word |= 1u128 << pos;
                    }
                }
                *slot = word;
            }
            tables.push(table);
        }
        Scatter { tables }
    }

    #[inline]
    pub(crate) fn apply(&self, mut value: u64) -> u128 {
        let mut out = 0u128;
        for table in &self.tables {
            out |= table[(value & 0xff) as usize];
            value >>= 8;
        }
        out
    }
}

/// Binomial coefficient as an exact integer. Panics on overflow, which cannot
/// happen for the window sizes used here (n ≤ 128).
pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        let den = (i + 1) as u128;
        let g = gcd(acc, den);
        acc = (acc / g) * ((n - i) as u128 / (den / g));
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `x^n` by repeated squaring (`powi` is not available without std).
pub(crate) fn powi(mut x: f64, mut n: u32) -> f64 {
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= x;
        }
        x *= x;
        n >>= 1;
    }
    acc
}

/// Iterates over the set bit positions of a 128-bit word.
pub(crate) fn ones(mut word: u128) -> impl Iterator<Item = usize> {
    core::iter::from_fn(move || {
        if word == 0 {
            None
        } else {
            let i = word.trailing_zeros() as usize;
            word &= word - 1;
            Some(i)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_rows() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
        assert_eq!(binomial(128, 64), 23_951_146_041_928_082_866_135_587_776_380_551_750);
    }

    #[test]
    fn powi_matches_repeated_products() {
        assert_eq!(powi(0.5, 0), 1.0);
        assert_eq!(powi(0.0, 0), 1.0);
        assert!((powi(0.9, 13) - 0.9f64.powi(13)).abs() < 1e-15);
    }

    #[test]
    fn scatter_places_bits() {
        let s = Scatter::new(&[3, 70, 5, 9, 100, 1, 2, 0, 127]);
        assert_eq!(s.apply(0b1), 1 << 3);
        assert_eq!(s.apply(0b10), 1 << 70);
        assert_eq!(s.apply(1 << 8), 1u128 << 127);
        assert_eq!(ones(s.apply(0x1ff)).count(), 9);
    }
}
