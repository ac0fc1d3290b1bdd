use serde::Serialize;

use crate::engine::{PeFeature, PeTerm};

/// Named coordinates of the constructed models.
///
/// All positional coordinates hold nonnegative values; signs live in the
/// weight matrices. `heads` is `M` for the full model and 1 for the
/// restricted one, which has no split stage and therefore no residue, start
/// or split coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoordinateLayout {
    pub heads: usize,
    pub one: usize,
    pub bit: usize,
    pub residue: Vec<usize>,
    pub start: Vec<usize>,
    pub ln: usize,
    pub pow10: usize,
    pub inv: usize,
    pub inv_sq: usize,
    pub tau: usize,
    pub tau_abs_a: usize,
    pub even: usize,
    pub odd: usize,
    pub split: Vec<usize>,
    pub gamma: Vec<usize>,
    pub big_gamma: Vec<usize>,
    pub z: Vec<usize>,
    /// Sign-pattern sum of the full model's last layer.
    pub g: Option<usize>,
    /// Number of named coordinates.
    pub coords: usize,
    /// Widest FFN hidden layer.
    pub hidden: usize,
    pub d: usize,
}

struct Alloc(usize);

impl Alloc {
    fn one(&mut self) -> usize {
        self.0 += 1;
        self.0 - 1
    }

    fn many(&mut self, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.one()).collect()
    }
}

impl CoordinateLayout {
    pub fn restricted() -> Self {
        Self::make(1, false)
    }

    pub fn full(m: usize) -> Self {
        Self::make(m, true)
    }

    fn make(m: usize, split: bool) -> Self {
        let mut a = Alloc(0);
        let one = a.one();
        let bit = a.one();
        let (residue, start) = if split {
            (a.many(m), a.many(m))
        } else {
            (vec![], vec![])
        };
        let ln = a.one();
        let pow10 = a.one();
        let inv = a.one();
        let inv_sq = a.one();
        let tau = a.one();
        let tau_abs_a = a.one();
        let even = a.one();
        let odd = a.one();
        let split_bits = if split { a.many(m) } else { vec![] };
        let gamma = a.many(m);
        let big_gamma = a.many(m);
        let z = a.many(m);
        let g = split.then(|| a.one());
        let coords = a.0;
        let pe_count = 2 + residue.len() + start.len() + 8;
        // split FFN: one unit per split string plus pass-through of the input
        // coordinates; last layer: one unit per even sign pattern plus `one`
        let hidden = if split {
            (m + pe_count).max((1usize << (m - 1)) + 1)
        } else {
            pe_count + 1
        };
        CoordinateLayout {
            heads: m,
            one,
            bit,
            residue,
            start,
            ln,
            pow10,
            inv,
            inv_sq,
            tau,
            tau_abs_a,
            even,
            odd,
            split: split_bits,
            gamma,
            big_gamma,
            z,
            g,
            coords,
            hidden,
            d: coords.max(hidden),
        }
    }

    pub fn is_full(&self) -> bool {
        self.g.is_some()
    }

    /// Coordinates written by the positional encoding or the token embedding.
    pub fn input_coords(&self) -> Vec<usize> {
        let mut v = vec![self.one, self.bit];
        v.extend(&self.residue);
        v.extend(&self.start);
        v.extend([
            self.ln,
            self.pow10,
            self.inv,
            self.inv_sq,
            self.tau,
            self.tau_abs_a,
            self.even,
            self.odd,
        ]);
        v
    }

    pub fn pe_terms(&self, alpha: f64) -> Vec<PeTerm> {
        let m = self.heads;
        let mut t = vec![
            PeTerm::new(self.one, PeFeature::One),
            PeTerm::new(self.ln, PeFeature::Ln),
            PeTerm::new(self.pow10, PeFeature::Pow { k: 10 }),
            PeTerm::new(self.inv, PeFeature::InvPow { k: 1 }),
            PeTerm::new(self.inv_sq, PeFeature::InvPow { k: 2 }),
            PeTerm::new(self.tau, PeFeature::Tau),
            PeTerm::new(self.tau_abs_a, PeFeature::TauAbsA { alpha }),
            PeTerm::new(self.even, PeFeature::Even),
            PeTerm::new(self.odd, PeFeature::Odd),
        ];
        for (r, &c) in self.residue.iter().enumerate() {
            t.push(PeTerm::new(c, PeFeature::Residue { modulus: m, r }));
        }
        for (r, &c) in self.start.iter().enumerate() {
            t.push(PeTerm::new(c, PeFeature::Start { pos: r + 1 }));
        }
        t
    }

    /// `(name, index)` rows in index order.
    pub fn table(&self) -> Vec<(String, usize)> {
        let mut rows: Vec<(String, usize)> = vec![
            ("one".into(), self.one),
            ("bit".into(), self.bit),
            ("ln i".into(), self.ln),
            ("i^10".into(), self.pow10),
            ("1/i".into(), self.inv),
            ("1/i^2".into(), self.inv_sq),
            ("tau_i".into(), self.tau),
            ("|tau_i A_i|".into(), self.tau_abs_a),
            ("i even".into(), self.even),
            ("i odd".into(), self.odd),
        ];
        let named = |rows: &mut Vec<(String, usize)>, name: &str, cs: &[usize]| {
            for (r, &c) in cs.iter().enumerate() {
                rows.push((format!("{name}[{r}]"), c));
            }
        };
        named(&mut rows, "residue", &self.residue);
        named(&mut rows, "start", &self.start);
        named(&mut rows, "x^r", &self.split);
        named(&mut rows, "gamma", &self.gamma);
        named(&mut rows, "Gamma", &self.big_gamma);
        named(&mut rows, "z", &self.z);
        if let Some(g) = self.g {
            rows.push(("g".into(), g));
        }
        rows.sort_by_key(|r| r.1);
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_disjoint_and_dense() {
        for layout in [CoordinateLayout::restricted(), CoordinateLayout::full(4), CoordinateLayout::full(6)] {
            let t = layout.table();
            assert_eq!(t.len(), layout.coords);
            for (k, (_, c)) in t.iter().enumerate() {
                assert_eq!(*c, k);
            }
        }
    }

    #[test]
    fn dimensions() {
        assert_eq!(CoordinateLayout::restricted().d, 13);
        let f6 = CoordinateLayout::full(6);
        assert_eq!(f6.coords, 47);
        assert_eq!(f6.d, 47);
        // 2^7 + 1 readout units dominate at M = 8
        assert_eq!(CoordinateLayout::full(8).d, 129);
    }
}
