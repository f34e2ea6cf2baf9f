//! JSONL trajectory dumps and their re-analysis.

use std::io::{BufRead, Write};

use lorentz_core::lorentz::{sample_initial, LorentzFlow};
use lorentz_core::streams::stream;
use lorentz_core::walk::Walker;
use lorentz_core::PlanarVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Model, Observer, Plan, TrajectoryRecord, CHUNK};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkLine {
    pub traj: u64,
    pub k: u64,
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzLine {
    pub traj: u64,
    pub j: u64,
    pub q_x: f64,
    pub q_y: f64,
    pub v_x: f64,
    pub v_y: f64,
    /// Length of the flight ending at this collision; 0 at `j = 0`.
    pub flight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum Line {
    Walk(WalkLine),
    Lorentz(LorentzLine),
}

fn trajectory_text(model: &Model, steps: u64, seed: u64, index: u64) -> Result<String> {
    let mut s = String::new();
    let mut push = |v: &dyn erased_json::Line| v.append_to(&mut s);
    match model {
        Model::Walk(spec) => {
            let mut w = Walker::new(spec, stream(seed, index), steps);
            push(&WalkLine { traj: index, k: 0, x: 0, y: 0 });
            for k in 1..=steps {
                let p = w.step();
                push(&WalkLine { traj: index, k, x: p.x, y: p.y });
            }
        }
        Model::Lorentz { table, region, max_flight } => {
            let fail = |source| Error::Trajectory { index, source };
            let mut rng = stream(seed, index);
            let init = sample_initial(table, region, &mut rng).map_err(fail)?;
            let mut flow = LorentzFlow::new(table, init, *max_flight).map_err(fail)?;
            let line = |j, q: PlanarVector, v: PlanarVector, flight| LorentzLine {
                traj: index,
                j,
                q_x: q.x,
                q_y: q.y,
                v_x: v.x,
                v_y: v.y,
                flight,
            };
            push(&line(0, init.q, init.v, 0.0));
            for j in 1..=steps {
                match flow.advance().map_err(fail)? {
                    Some(ev) => push(&line(j, ev.q, ev.v, ev.flight)),
                    None => break,
                }
            }
        }
    }
    Ok(s)
}

mod erased_json {
    pub trait Line {
        fn append_to(&self, out: &mut String);
    }

    impl<T: serde::Serialize> Line for T {
        fn append_to(&self, out: &mut String) {
            out.push_str(&serde_json::to_string(self).expect("dump line serializes"));
            out.push('\n');
        }
    }
}

/// Writes trajectories `0..ensemble` as JSONL, in index order.
pub fn write_dump<W: Write>(mut out: W, model: &Model, steps: u64, seed: u64, ensemble: u64, workers: usize) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))?;
    let chunks = ensemble.div_ceil(CHUNK);
    for c in 0..chunks {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(ensemble);
        let texts: Vec<String> = pool.install(|| {
            (lo..hi).into_par_iter().map(|i| trajectory_text(model, steps, seed, i)).collect::<Result<Vec<_>>>()
        })?;
        for t in texts {
            out.write_all(t.as_bytes()).map_err(|e| Error::io("<dump>", e))?;
        }
    }
    out.flush().map_err(|e| Error::io("<dump>", e))
}

/// Rebuilds trajectory records from a dump. Trajectories must appear in
/// index order starting at 0, each with consecutive step indices from 0.
pub fn read_dump<R: BufRead>(input: R, plan: &Plan) -> Result<Vec<TrajectoryRecord>> {
    let mut records = Vec::new();
    let mut current: Option<(Observer<'_>, u64, PlanarVector, PlanarVector)> = None;
    for (lineno, line) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let bad = |message: String| Error::Dump { line: lineno, message };
        let line = line.map_err(|e| Error::io("<dump>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let (traj, step, q, v, magnitude) = match parsed {
            Line::Walk(w) => (w.traj, w.k, PlanarVector::new(w.x as f64, w.y as f64), None, None),
            Line::Lorentz(l) => {
                (l.traj, l.j, PlanarVector::new(l.q_x, l.q_y), Some(PlanarVector::new(l.v_x, l.v_y)), Some(l.flight))
            }
        };
        if step == 0 {
            if let Some((obs, ..)) = current.take() {
                records.push(obs.finish());
            }
            if traj != records.len() as u64 {
                return Err(bad(format!("expected trajectory {}, found {traj}", records.len())));
            }
            current = Some((Observer::new(plan, traj, q), 0, q, v.unwrap_or(PlanarVector::ZERO)));
            continue;
        }
        let Some((obs, last_step, last_q, last_v)) = current.as_mut() else {
            return Err(bad("trajectory does not start at step 0".into()));
        };
        if obs.index() != traj || step != *last_step + 1 {
            return Err(bad(format!("expected trajectory {} step {}", obs.index(), *last_step + 1)));
        }
        if step <= plan.steps {
            match magnitude {
                None => obs.observe(step, q, (q - *last_q).x.abs() + (q - *last_q).y.abs(), None),
                Some(flight) => obs.observe(step, q, flight, Some(*last_v)),
            }
        }
        *last_step = step;
        *last_q = q;
        if let Some(v) = v {
            *last_v = v;
        }
    }
    if let Some((obs, ..)) = current.take() {
        records.push(obs.finish());
    }
    Ok(records)
}
