use rand::Rng;
use serde::{Deserialize, Serialize};

use super::law::Site;
use super::spec::WalkSpec;
use crate::streams;

/// Sites `S_0, …, S_n` of one walk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath {
    pub sites: Vec<Site>,
}

impl LatticePath {
    pub fn len_steps(&self) -> usize {
        self.sites.len().saturating_sub(1)
    }

    pub fn endpoint(&self) -> Site {
        *self.sites.last().expect("a path has at least its starting site")
    }
}

/// Step-by-step driver of a [`WalkSpec`] for a run of known length.
#[derive(Debug)]
pub struct Walker<'a, R> {
    spec: &'a WalkSpec,
    rng: R,
    position: Site,
    steps: u64,
    horizon: u64,
}

impl<'a, R: Rng> Walker<'a, R> {
    /// `horizon` is the planned run length; it only matters for
    /// fixed-horizon schedules.
    pub fn new(spec: &'a WalkSpec, rng: R, horizon: u64) -> Self {
        Walker { spec, rng, position: Site::ORIGIN, steps: 0, horizon }
    }

    pub fn starting_at(mut self, site: Site) -> Self {
        self.position = site;
        self
    }

    pub fn position(&self) -> Site {
        self.position
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    #[inline]
    pub fn step(&mut self) -> Site {
        self.steps += 1;
        let side = self.spec.cube_side(self.steps, self.horizon);
        let jump = match self.spec.law_at(self.position, side) {
            Some(law) => law.sample(&mut self.rng),
            None => self.spec.background.sample(&mut self.rng),
        };
        self.position = self.position + jump;
        self.position
    }
}

/// Path of `n` steps from the origin, driven by stream 0 of `seed`.
pub fn simulate_walk(spec: &WalkSpec, n: u64, seed: u64) -> LatticePath {
    simulate_walk_with(spec, n, streams::stream(seed, 0))
}

pub fn simulate_walk_with<R: Rng>(spec: &WalkSpec, n: u64, rng: R) -> LatticePath {
    let mut walker = Walker::new(spec, rng, n);
    let mut sites = Vec::with_capacity(n as usize + 1);
    sites.push(walker.position());
    for _ in 0..n {
        sites.push(walker.step());
    }
    LatticePath { sites }
}
