use num_complex::Complex64 as C64;

/// Compensated (Neumaier) accumulator. Keeps long sums of mixed-magnitude
/// terms accurate to a few ulps, which the closed-form cross-checks at
/// relative tolerance 1e-10 rely on for hundreds of sites.
#[derive(Clone, Copy, Debug, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Complex compensated accumulator, component-wise Neumaier.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedC64 {
    re: Compensated,
    im: Compensated,
}

impl CompensatedC64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// cos(x) - 1 evaluated as -2 sin^2(x/2), accurate near x = 0 where the
/// direct difference loses all leading digits.
pub fn cos_minus_one(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    -2.0 * s * s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_beats_naive_on_cancellation() {
        // 1 + eps-scale terms that a naive sum loses entirely.
        let mut acc = Compensated::new();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(1e-18);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-15).abs() < 1e-20);
    }

    #[test]
    fn cos_minus_one_is_exact_at_small_angles() {
        let x = 1e-9;
        // Direct evaluation returns 0 or a heavily rounded value here.
        assert!((cos_minus_one(x) + 0.5 * x * x).abs() < 1e-26);
        // At O(1) angles both forms agree.
        let x = 1.2345;
        assert!((cos_minus_one(x) - (x.cos() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn complex_accumulator_tracks_both_parts() {
        let mut acc = CompensatedC64::new();
        for k in 0..100 {
            let th = k as f64 * 0.1;
            acc.add(C64::new(th.cos(), th.sin()));
        }
        let direct: C64 = (0..100)
            .map(|k| {
                let th = k as f64 * 0.1;
                C64::new(th.cos(), th.sin())
            })
            .sum();
        assert!((acc.value() - direct).norm() < 1e-12);
    }
}
