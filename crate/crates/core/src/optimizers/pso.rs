use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{distinct_points, finite, Best, Observation, OptimizerConfig};
use crate::error::Result;
use crate::space::{Point, SearchSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct PsoParams {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
        }
    }
}

/// Particle swarm over continuous index coordinates. Positions are rounded
/// to the nearest surviving index when proposed; one particle per batch
/// slot.
#[derive(Debug, Clone)]
pub struct Pso {
    space: SearchSpace,
    params: PsoParams,
    rng: ChaCha8Rng,
    pos: Vec<Vec<f64>>,
    vel: Vec<Vec<f64>>,
    personal: Vec<Option<(Point, f64)>>,
    global: Best,
    best: Best,
    last: Vec<Point>,
}

fn bounds(space: &SearchSpace, d: usize) -> (f64, f64) {
    let a = space.active(d);
    (a[0] as f64, a[a.len() - 1] as f64)
}

/// Half the extent of the surviving index range.
fn vmax(space: &SearchSpace, d: usize) -> f64 {
    let (lo, hi) = bounds(space, d);
    0.5 * (hi - lo)
}

impl Pso {
    pub(super) fn new(space: &SearchSpace, cfg: &OptimizerConfig) -> Result<Self> {
        let mut pso = Self {
            space: space.clone(),
            params: cfg.pso.clone(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            pos: Vec::new(),
            vel: Vec::new(),
            personal: vec![None; cfg.batch_size],
            global: Best::default(),
            best: Best::default(),
            last: Vec::new(),
        };
        pso.scatter(cfg.batch_size);
        Ok(pso)
    }

    fn scatter(&mut self, n: usize) {
        let points = distinct_points(&self.space, n, &mut self.rng);
        self.pos = points
            .iter()
            .map(|p| p.coords().iter().map(|&c| c as f64).collect())
            .collect();
        let dims = self.space.dims();
        self.vel = (0..n)
            .map(|_| {
                (0..dims)
                    .map(|d| {
                        let m = vmax(&self.space, d);
                        if m > 0.0 {
                            self.rng.gen_range(-m..=m)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn best(&self) -> Option<(&Point, f64)> {
        self.best.get()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.pos
    }

    fn round(&self, x: &[f64]) -> Point {
        Point::new(
            x.iter()
                .enumerate()
                .map(|(d, &v)| self.space.nearest_active(d, v))
                .collect(),
        )
    }

    pub fn propose_batch(&mut self) -> Vec<Point> {
        self.last = self.pos.iter().map(|x| self.round(x)).collect();
        self.last.clone()
    }

    pub fn observe(&mut self, results: &[Observation]) {
        let mut values: HashMap<&Point, f64> = HashMap::with_capacity(results.len());
        for (p, v) in results {
            if let Some(v) = finite(*v) {
                values.entry(p).or_insert(v);
                self.best.offer(p, v);
                self.global.offer(p, v);
            }
        }
        for (i, p) in self.last.iter().enumerate() {
            if let Some(&v) = values.get(p) {
                if self.personal[i].as_ref().is_none_or(|(_, b)| v > *b) {
                    self.personal[i] = Some((p.clone(), v));
                }
            }
        }
        let PsoParams {
            inertia,
            cognitive,
            social,
        } = self.params;
        for i in 0..self.pos.len() {
            for d in 0..self.space.dims() {
                let x = self.pos[i][d];
                let toward = |b: Option<&Point>| b.map_or(0.0, |p| p[d] as f64 - x);
                let pb = toward(self.personal[i].as_ref().map(|(p, _)| p));
                let gb = toward(self.global.get().map(|(p, _)| p));
                let (r1, r2): (f64, f64) = (self.rng.gen(), self.rng.gen());
                let m = vmax(&self.space, d);
                let v = (inertia * self.vel[i][d] + cognitive * r1 * pb + social * r2 * gb)
                    .clamp(-m, m);
                let (lo, hi) = bounds(&self.space, d);
                self.vel[i][d] = v;
                self.pos[i][d] = (x + v).clamp(lo, hi);
            }
        }
    }

    pub(super) fn apply_space_update(&mut self, space: SearchSpace) {
        self.space = space;
        for x in &mut self.pos {
            for (d, v) in x.iter_mut().enumerate() {
                let (lo, hi) = bounds(&self.space, d);
                let snapped = self.space.nearest_active(d, *v);
                // keep the fractional position while its rounding survives
                if (*v - 0.5).ceil() != snapped as f64 {
                    *v = snapped as f64;
                }
                *v = v.clamp(lo, hi);
            }
        }
    }

    pub(super) fn restart(&mut self) {
        let n = self.pos.len();
        self.scatter(n);
        self.personal = vec![None; n];
    }
}
