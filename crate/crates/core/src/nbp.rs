//! The neutron branching process: a forest of scatter-walk trajectories
//! with Poisson fission offspring.
//!
//! Each alive particle moves as a sigma_s / pi_s walk. Fission times are
//! sampled from the inhomogeneous exponential with rate sigma_f along the
//! realized path; at a fission the path is trimmed there and a Poisson
//! number of children is born at the fission point with i.i.d. velocities
//! from the normalized yield kernel. Generations are processed through an
//! iterative breadth-first queue, and a hard population cap turns runaway
//! supercritical runs into an explicit resource error.

use std::collections::VecDeque;

use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::nrw::{simulate_walk_into, EndCause, NrwPath, PlainLaw, RateKind};
use crate::rng::SimRng;
use crate::xsection::CrossSectionField;

/// Default hard cap on the number of particles ever created in one forest.
pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;

/// One trajectory of the forest. The birth time is `path.start_time()`.
#[derive(Clone, Debug)]
pub struct NbpParticle {
    pub path: NrwPath,
    pub parent: Option<usize>,
    pub generation: u32,
}

impl NbpParticle {
    pub fn birth_time(&self) -> f64 {
        self.path.start_time()
    }
}

/// The branching tree: trajectories with birth times and parent links.
#[derive(Clone, Debug)]
pub struct NbpForest {
    pub particles: Vec<NbpParticle>,
    pub horizon: f64,
}

impl NbpForest {
    /// Particles present at time t, as (position, velocity) pairs.
    pub fn alive_at(&self, t: f64) -> Vec<(Vec2, Vec2)> {
        let mut out = Vec::new();
        for p in &self.particles {
            if p.path.alive_at(t) {
                if let Ok(state) = p.path.trajectory_at(t) {
                    out.push(state);
                }
            }
        }
        out
    }

    /// <g, X_t> = sum of g over the particles alive at t.
    pub fn measure(&self, t: f64, g: &impl Fn(Vec2, Vec2) -> f64) -> f64 {
        let mut total = 0.0;
        for p in &self.particles {
            if p.path.alive_at(t) {
                if let Ok((r, v)) = p.path.trajectory_at(t) {
                    total += g(r, v);
                }
            }
        }
        total
    }

    /// Total births (the initial particles count as born at time 0).
    pub fn particles_created(&self) -> u64 {
        self.particles.len() as u64
    }
}

/// Counters accumulated while driving one forest.
#[derive(Clone, Copy, Debug, Default)]
pub struct NbpStats {
    pub particles: u64,
    pub scatters: u64,
    pub fissions: u64,
}

/// Sample a fission event along a realized path: the fission time gamma
/// from the sigma_f hazard along the path, and the children velocities.
/// Returns None when the exponential clock outlives the path.
pub fn sample_fission_event(
    path: &NrwPath,
    field: &CrossSectionField,
    rng: &mut SimRng,
) -> Option<(f64, Vec<Vec2>)> {
    let gamma = sample_fission_time(path, field, rng)?;
    let (r, v) = path.state_unchecked(gamma);
    let m = field.material_at(r).ok()?.fission_mass;
    let count = sample_poisson(m, rng);
    let children = (0..count).map(|_| field.sample_fission_velocity(v, rng)).collect();
    Some((gamma, children))
}

fn sample_fission_time(path: &NrwPath, field: &CrossSectionField, rng: &mut SimRng) -> Option<f64> {
    let mut budget: f64 = Exp1.sample(rng);
    if field.domain.is_single_region() {
        let sigma_f = field.materials()[0].sigma_f;
        if sigma_f <= 0.0 {
            return None;
        }
        let gamma = path.start_time() + budget / sigma_f;
        return (gamma <= path.t_end).then_some(gamma);
    }
    let mut found = None;
    path.for_each_piece(&field.domain, path.t_end, |t0, t1, _r, _v, reg| {
        if found.is_some() {
            return;
        }
        let sigma_f = field.material(reg).sigma_f;
        if sigma_f > 0.0 {
            let hazard = sigma_f * (t1 - t0);
            if budget < hazard {
                found = Some(t0 + budget / sigma_f);
            } else {
                budget -= hazard;
            }
        }
    });
    found
}

fn sample_poisson(mean: f64, rng: &mut SimRng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("positive finite mean").sample(rng);
    draw as u64
}

fn trim_at(path: &mut NrwPath, gamma: f64) {
    let keep = path.events.partition_point(|e| e.t <= gamma);
    path.events.truncate(keep.max(1));
    path.t_end = gamma;
    path.end = EndCause::Fission;
}

/// Drive one forest, invoking `visit(index, parent, generation, path)` for
/// every completed (possibly fission-trimmed) trajectory in breadth-first
/// order. The path reference points into a reused scratch buffer.
pub fn drive_nbp(
    field: &CrossSectionField,
    initial: &[(Vec2, Vec2)],
    horizon: f64,
    population_cap: u64,
    rng: &mut SimRng,
    mut visit: impl FnMut(u64, Option<u64>, u32, &NrwPath),
) -> Result<NbpStats> {
    if initial.is_empty() {
        return Err(Error::config("branching process needs at least one initial particle"));
    }
    if !(horizon > 0.0) {
        return Err(Error::config("horizon must be positive"));
    }
    for (r, _) in initial {
        if !field.domain.contains(*r) {
            return Err(Error::OutsideDomain { x: r.x, y: r.y });
        }
    }
    let law = PlainLaw { field, kind: RateKind::ScatterOnly };
    let mut queue: VecDeque<(f64, Vec2, Vec2, Option<u64>, u32)> = initial
        .iter()
        .map(|&(r, v)| (0.0, r, v, None, 0u32))
        .collect();
    let mut stats = NbpStats { particles: initial.len() as u64, ..Default::default() };
    let mut scratch = NrwPath { events: Vec::new(), t_end: 0.0, end: EndCause::Horizon };
    let mut next_index = 0u64;

    while let Some((birth, r, v, parent, generation)) = queue.pop_front() {
        let index = next_index;
        next_index += 1;
        simulate_walk_into(&law, &field.domain, r, v, birth, horizon, rng, &mut scratch)?;
        if let Some(gamma) = sample_fission_time(&scratch, field, rng) {
            trim_at(&mut scratch, gamma);
            stats.fissions += 1;
            let (r_fission, v_fission) = scratch.state_at_end();
            let m = field.material_at(r_fission)?.fission_mass;
            let children = sample_poisson(m, rng);
            if gamma < horizon {
                for _ in 0..children {
                    stats.particles += 1;
                    if stats.particles > population_cap {
                        return Err(Error::PopulationCap { cap: population_cap, t: gamma });
                    }
                    let child_v = field.sample_fission_velocity(v_fission, rng);
                    queue.push_back((gamma, r_fission, child_v, Some(index), generation + 1));
                }
            }
        }
        stats.scatters += scratch.scatter_count() as u64;
        visit(index, parent, generation, &scratch);
    }
    Ok(stats)
}

/// Simulate a full forest (Algorithm-2 semantics), retaining every
/// trajectory. Prefer [`drive_nbp`] for large supercritical runs where the
/// forest would not fit in memory.
pub fn simulate_nbp(
    field: &CrossSectionField,
    initial: &[(Vec2, Vec2)],
    horizon: f64,
    population_cap: u64,
    rng: &mut SimRng,
) -> Result<NbpForest> {
    let mut particles = Vec::new();
    drive_nbp(field, initial, horizon, population_cap, rng, |_, parent, generation, path| {
        particles.push(NbpParticle {
            path: path.clone(),
            parent: parent.map(|p| p as usize),
            generation,
        });
    })?;
    Ok(NbpForest { particles, horizon })
}

/// Gamma sampled against the sigma_f hazard never exceeds the path lifetime
/// by construction; expose the raw sampler for diagnostics.
pub fn fission_time_along(path: &NrwPath, field: &CrossSectionField, rng: &mut SimRng) -> Option<f64> {
    sample_fission_time(path, field, rng)
}

/// Convenience used by tests: population <1, X_t> of one forest.
pub fn population_at(forest: &NbpForest, t: f64) -> usize {
    forest
        .particles
        .iter()
        .filter(|p| p.path.alive_at(t))
        .count()
}
