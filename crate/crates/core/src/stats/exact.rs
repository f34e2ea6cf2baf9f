use crate::error::{Error, Result};
use crate::walk::{FiniteLaw, Site};

/// Largest lattice extent `n·(support radius)` of a dense 2D convolution.
pub const MAX_LATTICE_EXTENT: i64 = 1 << 12;

/// Exact law of `S_n` on the box `|x|∞ ≤ radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    radius: i64,
    probs: Vec<f64>,
}

impl LatticeDistribution {
    fn point_mass(radius: i64) -> Self {
        let side = (2 * radius + 1) as usize;
        let mut probs = vec![0.0; side * side];
        probs[Self::index_in(radius, Site::ORIGIN)] = 1.0;
        LatticeDistribution { radius, probs }
    }

    fn index_in(radius: i64, s: Site) -> usize {
        let side = 2 * radius + 1;
        ((s.y + radius) * side + (s.x + radius)) as usize
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn probability(&self, s: Site) -> f64 {
        if s.sup_norm() > self.radius {
            0.0
        } else {
            self.probs[Self::index_in(self.radius, s)]
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

fn check_extent(law: &FiniteLaw, n: u64) -> Result<i64> {
    let r = law.support_radius();
    let extent = (n as i128) * (r as i128);
    if extent > MAX_LATTICE_EXTENT as i128 {
        return Err(Error::MemoryGuard(format!(
            "n·radius = {extent} exceeds the lattice extent {MAX_LATTICE_EXTENT}"
        )));
    }
    Ok(extent as i64)
}

/// Dense 2D convolution; `visit(k, dist)` sees the law of `S_k` for
/// `k = 0..=n`, with only the box `|x|∞ ≤ k·r` populated.
fn convolve_2d(law: &FiniteLaw, n: u64, mut visit: impl FnMut(u64, &LatticeDistribution)) -> Result<LatticeDistribution> {
    let big = check_extent(law, n)?;
    let r = law.support_radius();
    let side = 2 * big + 1;
    let jumps: Vec<(Site, f64)> = law.entries().collect();
    let mut cur = LatticeDistribution::point_mass(big);
    let mut next = vec![0.0; cur.probs.len()];
    visit(0, &cur);
    for k in 1..=n {
        let reach = ((k - 1) as i64 * r).min(big);
        next.iter_mut().for_each(|p| *p = 0.0);
        for y in -reach..=reach {
            let row = ((y + big) * side) as usize;
            for x in -reach..=reach {
                let p = cur.probs[row + (x + big) as usize];
                if p == 0.0 {
                    continue;
                }
                for &(j, q) in &jumps {
                    let idx = LatticeDistribution::index_in(big, Site::new(x + j.x, y + j.y));
                    next[idx] += p * q;
                }
            }
        }
        std::mem::swap(&mut cur.probs, &mut next);
        visit(k, &cur);
    }
    Ok(cur)
}

/// Exact law of `S_n` from the origin.
pub fn exact_distribution(law: &FiniteLaw, n: u64) -> Result<LatticeDistribution> {
    convolve_2d(law, n, |_, _| {})
}

type Marginal = Vec<(i64, f64)>;

/// Splits the law into independent coordinates `(u, v)`, either the axes or
/// the diagonals `u = x + y`, `v = x − y`, when it factorizes exactly.
fn separable_marginals(law: &FiniteLaw) -> Option<(Marginal, Marginal)> {
    let maps: [fn(Site) -> (i64, i64); 2] = [|s| (s.x, s.y), |s| (s.x + s.y, s.x - s.y)];
    'maps: for map in maps {
        let mut mu: Vec<(i64, f64)> = Vec::new();
        let mut mv: Vec<(i64, f64)> = Vec::new();
        let mut joint = Vec::new();
        for (s, p) in law.entries() {
            let (u, v) = map(s);
            joint.push(((u, v), p));
            match mu.iter_mut().find(|e| e.0 == u) {
                Some(e) => e.1 += p,
                None => mu.push((u, p)),
            }
            match mv.iter_mut().find(|e| e.0 == v) {
                Some(e) => e.1 += p,
                None => mv.push((v, p)),
            }
        }
        for &(u, pu) in &mu {
            for &(v, pv) in &mv {
                let pj = joint.iter().find(|e| e.0 == (u, v)).map_or(0.0, |e| e.1);
                if (pj - pu * pv).abs() > 1e-15 {
                    continue 'maps;
                }
            }
        }
        return Some((mu, mv));
    }
    None
}

/// `P(Z_k = 0)` for `k = 0..=n` of a 1D walk with the given step law.
fn return_law_1d(steps: &[(i64, f64)], n: u64) -> Vec<f64> {
    let r = steps.iter().map(|s| s.0.abs()).max().unwrap_or(0);
    let big = n as i64 * r;
    let width = (2 * big + 1) as usize;
    let mut cur = vec![0.0; width];
    let mut next = vec![0.0; width];
    cur[big as usize] = 1.0;
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(1.0);
    for k in 1..=n {
        let reach = (k - 1) as i64 * r;
        let lo = (big - reach) as usize;
        let hi = (big + reach) as usize;
        let nlo = (big - k as i64 * r) as usize;
        let nhi = (big + k as i64 * r) as usize;
        next[nlo..=nhi].iter_mut().for_each(|p| *p = 0.0);
        for &(j, q) in steps {
            let shift = j as isize;
            for i in lo..=hi {
                next[(i as isize + shift) as usize] += cur[i] * q;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        out.push(cur[big as usize]);
    }
    out
}

/// `P(S_k = 0)` for `k = 0..=n_max`.
///
/// Laws that factorize in axis or diagonal coordinates are handled by two
/// 1D convolutions and have no extent limit; the rest go through the dense
/// 2D array and are subject to [`MAX_LATTICE_EXTENT`].
pub fn exact_return_law(law: &FiniteLaw, n_max: u64) -> Result<Vec<f64>> {
    if let Some((mu, mv)) = separable_marginals(law) {
        let a = return_law_1d(&mu, n_max);
        let b = return_law_1d(&mv, n_max);
        return Ok(a.iter().zip(&b).map(|(x, y)| x * y).collect());
    }
    dense_return_law(law, n_max)
}

fn dense_return_law(law: &FiniteLaw, n_max: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_max as usize + 1);
    convolve_2d(law, n_max, |_, d| out.push(d.probability(Site::ORIGIN)))?;
    Ok(out)
}

/// Prefix sums `G_n = Σ_{k≤n} P(S_k = 0)`.
pub fn truncated_green(return_law: &[f64]) -> Vec<f64> {
    return_law
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}
