use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finite, random_point, Best, Observation, OptimizerConfig};
use crate::error::Result;
use crate::space::{DomainKind, Point, SearchSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct SaParams {
    /// Geometric cooling factor applied once per batch.
    pub cooling: f64,
    /// Tries at drawing a feasible neighbour before proposing the current
    /// point itself.
    pub neighbour_attempts: usize,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            cooling: 0.95,
            neighbour_attempts: 20,
        }
    }
}

/// Metropolis rule for maximization: improvements are always taken, a
/// loss of `-delta` with probability `exp(delta / temperature)`.
pub fn metropolis_accept(delta: f64, temperature: f64, rng: &mut impl Rng) -> bool {
    if delta >= 0.0 {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    rng.gen::<f64>() < (delta / temperature).exp()
}

/// Simulated annealing proposing a batch of neighbours of its current point.
#[derive(Debug, Clone)]
pub struct Sa {
    space: SearchSpace,
    params: SaParams,
    rng: ChaCha8Rng,
    batch_size: usize,
    current: Point,
    current_value: Option<f64>,
    temperature: Option<f64>,
    initial_temperature: Option<f64>,
    best: Best,
}

impl Sa {
    pub(super) fn new(space: &SearchSpace, cfg: &OptimizerConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let current = random_point(space, &mut rng);
        Ok(Self {
            space: space.clone(),
            params: cfg.sa.clone(),
            rng,
            batch_size: cfg.batch_size,
            current,
            current_value: None,
            temperature: None,
            initial_temperature: None,
            best: Best::default(),
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn best(&self) -> Option<(&Point, f64)> {
        self.best.get()
    }

    pub fn current(&self) -> &Point {
        &self.current
    }

    pub fn temperature(&self) -> Option<f64> {
        self.temperature
    }

    /// Changes one coordinate with at least two surviving values: ordinal
    /// coordinates step to an adjacent surviving index, categorical ones
    /// jump to another surviving value.
    pub fn neighbour(&mut self, p: &Point) -> Point {
        let movable: Vec<usize> = (0..self.space.dims())
            .filter(|&d| self.space.active(d).len() >= 2)
            .collect();
        if movable.is_empty() {
            return p.clone();
        }
        for _ in 0..self.params.neighbour_attempts.max(1) {
            let d = movable[self.rng.gen_range(0..movable.len())];
            let active = self.space.active(d);
            let here = active.partition_point(|&i| i < p[d]);
            let next = match self.space.domain(d).kind() {
                DomainKind::Ordinal => {
                    let up = self.rng.gen_bool(0.5);
                    let at = match (here, active.get(here) == Some(&p[d])) {
                        // p[d] lies between surviving values
                        (h, false) if up => h,
                        (h, false) => h.saturating_sub(1),
                        (0, true) => 1,
                        (h, true) if h + 1 == active.len() => h - 1,
                        (h, true) if up => h + 1,
                        (h, true) => h - 1,
                    };
                    active[at.min(active.len() - 1)]
                }
                DomainKind::Categorical => {
                    let others: Vec<usize> =
                        active.iter().copied().filter(|&i| i != p[d]).collect();
                    others[self.rng.gen_range(0..others.len())]
                }
            };
            let mut coords = p.coords().to_vec();
            coords[d] = next;
            if self.space.is_feasible(&coords) {
                return Point::new(coords);
            }
        }
        p.clone()
    }

    pub fn propose_batch(&mut self) -> Vec<Point> {
        let mut batch = Vec::with_capacity(self.batch_size);
        let centre = self.current.clone();
        if self.current_value.is_none() {
            batch.push(centre.clone());
        }
        while batch.len() < self.batch_size {
            let n = self.neighbour(&centre);
            batch.push(n);
        }
        batch
    }

    pub fn observe(&mut self, results: &[Observation]) {
        let values: Vec<(&Point, f64)> =
            results.iter().filter_map(|(p, v)| finite(*v).map(|v| (p, v))).collect();
        if self.temperature.is_none() && !values.is_empty() {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                    (lo.min(v), hi.max(v))
                });
            let t0 = if hi - lo > 0.0 { hi - lo } else { 1.0 };
            self.temperature = Some(t0);
            self.initial_temperature = Some(t0);
        }
        for &(p, v) in &values {
            self.best.offer(p, v);
            let accept = match self.current_value {
                None => true,
                Some(c) => {
                    let t = self.temperature.unwrap_or(1.0);
                    metropolis_accept(v - c, t, &mut self.rng)
                }
            };
            if accept {
                self.current = p.clone();
                self.current_value = Some(v);
            }
        }
        if let Some(t) = self.temperature.as_mut() {
            *t *= self.params.cooling;
        }
    }

    pub(super) fn apply_space_update(&mut self, space: SearchSpace) {
        self.space = space;
        if !self.space.contains(&self.current) {
            let coords = (0..self.space.dims())
                .map(|d| self.space.nearest_active(d, self.current[d] as f64))
                .collect();
            self.current = Point::new(coords);
            if !self.space.is_feasible(self.current.coords()) {
                self.current = random_point(&self.space, &mut self.rng);
            }
            self.current_value = None;
        }
    }

    pub(super) fn restart(&mut self) {
        self.current = random_point(&self.space, &mut self.rng);
        self.current_value = None;
        self.temperature = self.initial_temperature;
    }
}
