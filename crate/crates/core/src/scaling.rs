//! Diffusive and superdiffusive rescaling of discrete trajectories into
//! piecewise-linear paths on `[0, 1]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PlanarVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledPath {
    n: usize,
    nodes: Vec<PlanarVector>,
    scale: f64,
}

impl ScaledPath {
    /// `nodes[j] = points[j] / scale` for `j = 0..=n`.
    pub fn new(points: &[PlanarVector], n: usize, scale: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if points.len() < n + 1 {
            return Err(Error::InsufficientData(format!("need {} points for N = {n}, got {}", n + 1, points.len())));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
        }
        let nodes = points[..=n].iter().map(|&p| p / scale).collect();
        Ok(ScaledPath { n, nodes, scale })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn nodes(&self) -> &[PlanarVector] {
        &self.nodes
    }

    /// Piecewise-linear interpolation; exact at `t = j/N`.
    pub fn evaluate(&self, t: f64) -> Result<PlanarVector> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
        }
        let x = t * self.n as f64;
        let r = x.round();
        if r / self.n as f64 == t {
            return Ok(self.nodes[r as usize]);
        }
        let j = (x.floor() as usize).min(self.n - 1);
        let frac = x - j as f64;
        if frac == 0.0 {
            return Ok(self.nodes[j]);
        }
        if frac == 1.0 {
            return Ok(self.nodes[j + 1]);
        }
        let a = self.nodes[j];
        let b = self.nodes[j + 1];
        Ok(a + (b - a) * frac)
    }

    /// CSV rows `t,x,y` at `samples + 1` equally spaced times.
    pub fn write_csv<W: Write>(&self, mut out: W, samples: usize) -> std::io::Result<()> {
        writeln!(out, "t,x,y")?;
        let samples = samples.max(1);
        for i in 0..=samples {
            let t = i as f64 / samples as f64;
            let p = self.evaluate(t).expect("t in range");
            writeln!(out, "{},{},{}", fmt12(t), fmt12(p.x), fmt12(p.y))?;
        }
        Ok(())
    }
}

/// Twelve significant digits.
pub fn fmt12(v: f64) -> String {
    format!("{v:.11e}")
}

/// `W_N(j/N) = q_j / √N`.
pub fn diffusive_scale(points: &[PlanarVector], n: usize) -> Result<ScaledPath> {
    ScaledPath::new(points, n, (n as f64).sqrt())
}

/// `q_j / √(N ln N)`, natural logarithm.
pub fn superdiffusive_scale(points: &[PlanarVector], n: usize) -> Result<ScaledPath> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("superdiffusive scaling needs N ≥ 2, got {n}")));
    }
    ScaledPath::new(points, n, superdiffusive_divisor(n as f64))
}

pub fn superdiffusive_divisor(n: f64) -> f64 {
    (n * n.ln()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<PlanarVector> {
        v.iter().map(|&(x, y)| PlanarVector::new(x, y)).collect()
    }

    #[test]
    fn diffusive_examples() {
        let q = pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]);
        let sp = diffusive_scale(&q, 4).unwrap();
        assert_eq!(sp.evaluate(0.5).unwrap(), PlanarVector::new(0.5, 0.5));
        let sp = diffusive_scale(&pts(&[(0.0, 0.0), (3.0, 4.0)]), 1).unwrap();
        assert_eq!(sp.evaluate(1.0).unwrap(), PlanarVector::new(3.0, 4.0));
        assert!(diffusive_scale(&q, 5).is_err());
    }

    #[test]
    fn superdiffusive_examples() {
        let s8 = superdiffusive_divisor(8.0);
        assert!((s8 * s8 - 8.0 * 8f64.ln()).abs() < 1e-12);
        assert!((s8 - 4.0789).abs() < 5e-4);
        let sp = superdiffusive_scale(&pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]), 2).unwrap();
        let end = sp.evaluate(1.0).unwrap();
        assert!((end.x - 2.0 / (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
        assert!((end.x - 1.6986).abs() < 1e-4);
        assert!(superdiffusive_scale(&pts(&[(0.0, 0.0), (1.0, 0.0)]), 1).is_err());
    }

    #[test]
    fn evaluate_range_and_midpoints() {
        let q = pts(&[(0.0, 0.0), (2.0, 0.0), (2.0, 6.0)]);
        let sp = diffusive_scale(&q, 2).unwrap();
        assert!(sp.evaluate(-0.1).is_err());
        assert!(sp.evaluate(1.1).is_err());
        let mid = sp.evaluate(0.75).unwrap();
        let expect = (sp.nodes()[1] + sp.nodes()[2]) / 2.0;
        assert!((mid - expect).norm() < 1e-15);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let sp = diffusive_scale(&pts(&[(0.0, 0.0), (1.0, 1.0)]), 1).unwrap();
        let mut buf = Vec::new();
        sp.write_csv(&mut buf, 4).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("t,x,y\n"));
    }

    fn path_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 3..40)
    }

    proptest! {
        #[test]
        fn homogeneity(raw in path_strategy(), lambda in 0.1..10.0f64) {
            let q = pts(&raw);
            let n = q.len() - 1;
            let a = diffusive_scale(&q, n).unwrap();
            let scaled: Vec<_> = q.iter().map(|&p| p * lambda).collect();
            let b = diffusive_scale(&scaled, n).unwrap();
            for (x, y) in a.nodes().iter().zip(b.nodes()) {
                prop_assert!((*x * lambda - *y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }

        #[test]
        fn super_over_diffusive_ratio(raw in path_strategy()) {
            let q = pts(&raw);
            let n = q.len() - 1;
            let d = diffusive_scale(&q, n).unwrap();
            let s = superdiffusive_scale(&q, n).unwrap();
            let r = (n as f64).ln().sqrt();
            for (x, y) in d.nodes().iter().zip(s.nodes()) {
                prop_assert!((*x / r - *y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
        }

        #[test]
        fn lipschitz(raw in path_strategy(), t1 in 0.0..=1.0f64, t2 in 0.0..=1.0f64) {
            let q = pts(&raw);
            let n = q.len() - 1;
            let sp = diffusive_scale(&q, n).unwrap();
            let max_step = q.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
            let lip = n as f64 * max_step / sp.scale();
            let gap = (sp.evaluate(t1).unwrap() - sp.evaluate(t2).unwrap()).norm();
            prop_assert!(gap <= lip * (t1 - t2).abs() + 1e-9);
        }

        #[test]
        fn exact_at_nodes(raw in path_strategy()) {
            let q = pts(&raw);
            let n = q.len() - 1;
            let sp = diffusive_scale(&q, n).unwrap();
            for j in 0..=n {
                prop_assert_eq!(sp.evaluate(j as f64 / n as f64).unwrap(), sp.nodes()[j]);
            }
        }
    }
}
