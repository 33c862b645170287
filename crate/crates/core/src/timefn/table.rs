//! Tabulated time functions: sampled data with finite-difference derivatives
//! and C² quintic Hermite interpolation between samples.

use super::jet::Jet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    t: Vec<f64>,
    v: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

/// Finite-difference weights (Fornberg) for derivatives 0..=m at `z` on
/// arbitrary nodes `x`. Returns `w[k][j]`: weight of node j for derivative k.
pub(crate) fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn stencil(i: usize, n: usize, width: usize) -> std::ops::Range<usize> {
    let width = width.min(n);
    let start = (i as isize - (width / 2) as isize).clamp(0, (n - width) as isize) as usize;
    start..start + width
}

fn nodal_derivative(t: &[f64], v: &[f64], i: usize, order: usize) -> f64 {
    let n = t.len();
    let central = i >= 2 && i + 2 < n;
    let range = if central {
        i - 2..i + 3
    } else {
        // 2nd-order one-sided: 3 points for d/dt, 4 for d²/dt²
        stencil(i, n, order + 2)
    };
    let w = fornberg_weights(t[i], &t[range.clone()], order);
    w[order].iter().zip(&v[range]).map(|(w, v)| w * v).sum()
}

// Quintic Hermite basis in monomial coefficients (s^0..s^5):
// value y0, slope y0', curvature y0'', curvature y1'', slope y1', value y1.
const BASIS: [[f64; 6]; 6] = [
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
];

impl Table {
    pub fn from_samples(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples(samples.len()));
        }
        for (row, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::UnsortedSamples { row: row + 1 });
            }
        }
        if samples.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::Table("non-finite sample".into()));
        }
        let (t, v): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        let n = t.len();
        let d1 = (0..n).map(|i| nodal_derivative(&t, &v, i, 1)).collect();
        let d2 = (0..n).map(|i| nodal_derivative(&t, &v, i, 2)).collect();
        Ok(Self { t, v, d1, d2 })
    }

    /// Parse two-column CSV (`t,value`), header row optional.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut samples = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Table(e.to_string()))?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            if record.len() != 2 {
                return Err(Error::Table(format!("row {}: expected 2 columns, found {}", row + 1, record.len())));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(t), Ok(v)) => samples.push((t, v)),
                _ if row == 0 && samples.is_empty() => continue, // header
                _ => return Err(Error::Table(format!("row {}: non-numeric field", row + 1))),
            }
        }
        Self::from_samples(samples)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.v.iter().copied())
    }

    /// Nodal derivative estimates (d/dt, d²/dt²) at sample `i`.
    pub fn nodal_derivatives(&self, i: usize) -> (f64, f64) {
        (self.d1[i], self.d2[i])
    }

    /// Interpolated jet; outside the sample range the end interval's
    /// polynomial is extrapolated.
    pub fn jet(&self, t: f64) -> Jet {
        let n = self.t.len();
        let k = self.t[1..n - 1].partition_point(|&s| s <= t);
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let data = [
            self.v[k],
            h * self.d1[k],
            h * h * self.d2[k],
            h * h * self.d2[k + 1],
            h * self.d1[k + 1],
            self.v[k + 1],
        ];
        let mut coef = [0.0; 6];
        for (b, y) in BASIS.iter().zip(data) {
            for p in 0..6 {
                coef[p] += b[p] * y;
            }
        }
        let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
        for p in (0..6).rev() {
            p2 = p2 * s + 2.0 * p1;
            p1 = p1 * s + p0;
            p0 = p0 * s + coef[p];
        }
        Jet::new(p0, p1 / h, p2 / (h * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_central_stencil() {
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &x, 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_sampled_square() {
        let samples: Vec<_> = (0..=200).map(|i| {
            let t = i as f64 * 0.01;
            (t, t * t)
        }).collect();
        let table = Table::from_samples(samples).unwrap();
        let j = table.jet(1.0);
        assert!((j.d1 - 2.0).abs() <= 1e-3, "{}", j.d1);
        assert!((j.d2 - 2.0).abs() <= 1e-6, "{}", j.d2);
        // between samples, and near the ends
        let j = table.jet(1.005);
        assert!((j.value - 1.005f64.powi(2)).abs() < 1e-12);
        let j = table.jet(0.003);
        assert!((j.d1 - 0.006).abs() < 1e-9);
    }

    #[test]
    fn interpolant_is_c2_at_nodes() {
        let samples: Vec<_> = (0..40).map(|i| {
            let t = i as f64 * 0.1 + 0.013 * (i % 3) as f64;
            (t, t.sin())
        }).collect();
        let table = Table::from_samples(samples).unwrap();
        let tn = table.t[10];
        let (a, b) = (table.jet(tn - 1e-12), table.jet(tn + 1e-12));
        assert!((a.value - b.value).abs() < 1e-10);
        assert!((a.d1 - b.d1).abs() < 1e-9);
        assert!((a.d2 - b.d2).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_tables() {
        assert_eq!(Table::from_samples(vec![(0.0, 1.0)]), Err(Error::TooFewSamples(1)));
        assert!(matches!(
            Table::from_samples(vec![(0.0, 1.0), (0.0, 2.0)]),
            Err(Error::UnsortedSamples { row: 1 })
        ));
        assert!(Table::from_csv("t,value\n0,1\n").is_err());
        assert!(Table::from_csv("0,1\n1,x\n").is_err());
        assert!(Table::from_csv("0,1,2\n1,2,3\n").is_err());
    }

    #[test]
    fn csv_with_and_without_header() {
        let a = Table::from_csv("t,value\n0,1\n1,3\n2,5\n").unwrap();
        let b = Table::from_csv("0, 1\n1, 3\n2, 5\n").unwrap();
        assert_eq!(a, b);
        assert!((a.jet(0.5).value - 2.0).abs() < 1e-14);
        assert!((a.jet(1.7).d1 - 2.0).abs() < 1e-13);
    }
}
