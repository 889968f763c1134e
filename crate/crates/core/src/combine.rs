//! End-to-end error probability of the four cascaded links.

/// Probability that the delivered bit differs from the sent one, given the
/// error probabilities of four independent binary links.
///
/// Evaluated as the sum over single-flip and triple-flip patterns, which
/// are the only odd-parity patterns of four links.
pub fn combine(p: [f64; 4]) -> f64 {
    debug_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)), "{p:?}");
    let mut one_flip = 0.0;
    let mut three_flips = 0.0;
    for q in 0..4 {
        let mut only_q = p[q];
        let mut all_but_q = 1.0 - p[q];
        for (k, &pk) in p.iter().enumerate() {
            if k != q {
                only_q *= 1.0 - pk;
                all_but_q *= pk;
            }
        }
        one_flip += only_q;
        three_flips += all_but_q;
    }
    one_flip + three_flips
}

/// Per-link and end-to-end error probabilities at one slot split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerBreakdown {
    pub p_mol: f64,
    pub p_in2on: f64,
    pub p_on: f64,
    pub p_off: f64,
    pub p_e2e: f64,
    /// Molecular symbol duration (s).
    pub t_dmc: f64,
}

impl BerBreakdown {
    pub fn new(t_dmc: f64, p_mol: f64, p_in2on: f64, p_on: f64, p_off: f64) -> Self {
        BerBreakdown {
            p_mol,
            p_in2on,
            p_on,
            p_off,
            p_e2e: combine([p_mol, p_in2on, p_on, p_off]),
            t_dmc,
        }
    }

    pub fn links(&self) -> [f64; 4] {
        [self.p_mol, self.p_in2on, self.p_on, self.p_off]
    }

    /// Largest of the three EM link error probabilities.
    pub fn max_em(&self) -> f64 {
        self.p_in2on.max(self.p_on).max(self.p_off)
    }
}
