//! Synthetic landscape families: subjects sharing a search space whose
//! outputs mix a common base with subject-specific structure, calibrated
//! to a target heterogeneity.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matcher::best_correlations;
use crate::orchestrator::Evaluator;
use crate::space::{DomainKind, ExperimentRecord, Job, ParamDomain, Point, SearchSpace};

pub const RHO_TOLERANCE: f64 = 0.05;
const RHO_AIM: f64 = 0.01;
const CALIBRATION_STEPS: usize = 60;

/// Shape and texture of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyPreset {
    pub name: &'static str,
    pub shape: Vec<(DomainKind, usize)>,
    pub rho_target: f64,
    pub subjects: usize,
    pub bumps: usize,
    /// Range of bump widths in normalized index units.
    pub widths: (f64, f64),
    /// Noise standard deviation relative to the subject-specific part.
    pub noise: f64,
}

pub const FAMILY_NAMES: [&str; 3] = ["seismic-like", "agro-like", "sched-like"];

pub fn preset(name: &str) -> Option<FamilyPreset> {
    use DomainKind::{Categorical as C, Ordinal as O};
    let p = match name {
        // 3 * 3 * 13 * 47 = 5499 points
        "seismic-like" => FamilyPreset {
            name: "seismic-like",
            shape: vec![(C, 3), (C, 3), (O, 13), (O, 47)],
            rho_target: 0.82,
            subjects: 20,
            bumps: 14,
            widths: (0.06, 0.15),
            noise: 0.1,
        },
        // 4^5 = 1024 points
        "agro-like" => FamilyPreset {
            name: "agro-like",
            shape: vec![(O, 4); 5],
            rho_target: 0.89,
            subjects: 20,
            bumps: 3,
            widths: (0.2, 0.4),
            noise: 0.05,
        },
        // 3 * 3 * 5 * 11 = 495 points
        "sched-like" => FamilyPreset {
            name: "sched-like",
            shape: vec![(C, 3), (O, 3), (O, 5), (O, 11)],
            rho_target: 0.58,
            subjects: 20,
            bumps: 8,
            widths: (0.08, 0.18),
            noise: 0.15,
        },
        _ => return None,
    };
    Some(p)
}

pub fn shaped_space(shape: &[(DomainKind, usize)]) -> Result<SearchSpace> {
    let domains = shape
        .iter()
        .enumerate()
        .map(|(i, &(kind, n))| match kind {
            DomainKind::Ordinal => ParamDomain::ordinal_range(format!("x{i}"), n),
            DomainKind::Categorical => {
                ParamDomain::categorical(format!("c{i}"), (0..n).map(|j| format!("v{j}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SearchSpace::new(domains)
}

struct Bump {
    centre: Vec<f64>,
    width: f64,
    amplitude: f64,
    /// Per categorical dimension, a factor for each level.
    levels: Vec<Vec<f64>>,
}

fn bumps(preset: &FamilyPreset, rng: &mut ChaCha8Rng) -> Vec<Bump> {
    (0..preset.bumps)
        .map(|_| {
            let centre = preset.shape.iter().map(|_| rng.gen::<f64>()).collect();
            let width = rng.gen_range(preset.widths.0..=preset.widths.1);
            let amplitude = rng.gen_range(0.5..=1.0);
            let levels = preset
                .shape
                .iter()
                .map(|&(kind, n)| match kind {
                    DomainKind::Ordinal => Vec::new(),
                    DomainKind::Categorical => {
                        let favourite = rng.gen_range(0..n);
                        (0..n)
                            .map(|j| if j == favourite { 1.0 } else { rng.gen_range(0.2..0.9) })
                            .collect()
                    }
                })
                .collect();
            Bump {
                centre,
                width,
                amplitude,
                levels,
            }
        })
        .collect()
}

fn bump_field(preset: &FamilyPreset, points: &[Point], bumps: &[Bump]) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            bumps
                .iter()
                .map(|b| {
                    let mut sq = 0.0;
                    let mut factor = b.amplitude;
                    for (d, &(kind, n)) in preset.shape.iter().enumerate() {
                        match kind {
                            DomainKind::Ordinal => {
                                let u = if n > 1 { p[d] as f64 / (n - 1) as f64 } else { 0.0 };
                                sq += (u - b.centre[d]).powi(2);
                            }
                            DomainKind::Categorical => factor *= b.levels[d][p[d]],
                        }
                    }
                    factor * (-sq / (2.0 * b.width * b.width)).exp()
                })
                .sum()
        })
        .collect()
}

fn standardize(xs: &mut [f64]) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    xs.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

fn minmax(xs: &mut [f64]) {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    xs.iter_mut().for_each(|x| *x = (*x - lo) / span);
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x51ed_2701_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// A single subject: its normalized output table over the full space.
#[derive(Debug, Clone)]
pub struct Landscape {
    space: SearchSpace,
    /// Row-major over the original index product; outputs in `[0, 1]`.
    table: Arc<Vec<f64>>,
    optimum: f64,
}

impl Landscape {
    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn value(&self, p: &Point) -> f64 {
        self.table[self.space.linear_index(p)]
    }

    /// Exhaustive maximum.
    pub fn optimum(&self) -> f64 {
        self.optimum
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Every point evaluated, as a knowledge-base record.
    pub fn full_record(&self, id: impl Into<String>) -> Result<ExperimentRecord<f64>> {
        let jobs = self
            .space
            .enumerate()
            .map(|p| {
                let v = self.value(&p);
                Job::done(p, v)
            })
            .collect();
        ExperimentRecord::new(id, self.space.clone(), jobs, None)
    }
}

impl Evaluator for Landscape {
    fn evaluate(&self, _: &SearchSpace, point: &Point, _: usize) -> Result<f64, String> {
        Ok(self.value(point))
    }
}

#[derive(Debug, Clone)]
pub struct LandscapeFamily {
    pub preset: FamilyPreset,
    pub seed: u64,
    /// Weight of the shared base.
    pub mix: f64,
    /// Measured mean best pairwise correlation.
    pub rho: f64,
    space: SearchSpace,
    subjects: Vec<Landscape>,
}

impl LandscapeFamily {
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let p = preset(name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown family `{name}`")))?;
        Self::generate(p, seed)
    }

    pub fn generate(preset: FamilyPreset, seed: u64) -> Result<Self> {
        if preset.subjects < 2 {
            return Err(Error::InvalidConfig("a family needs at least two subjects".into()));
        }
        if !(0.0..=1.0).contains(&preset.rho_target) {
            return Err(Error::InvalidConfig(format!(
                "target correlation {} outside [0, 1]",
                preset.rho_target
            )));
        }
        let space = shaped_space(&preset.shape)?;
        let points: Vec<Point> = space.enumerate().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0]));
        let mut base = bump_field(&preset, &points, &bumps(&preset, &mut rng));
        standardize(&mut base);
        let own: Vec<Vec<f64>> = (0..preset.subjects)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, s as u64 + 1]));
                let mut f = bump_field(&preset, &points, &bumps(&preset, &mut rng));
                standardize(&mut f);
                for x in &mut f {
                    *x += preset.noise * rng.sample::<f64, _>(StandardNormal);
                }
                standardize(&mut f);
                f
            })
            .collect();

        let mix_tables = |w: f64| -> Vec<Vec<f64>> {
            own.iter()
                .map(|o| {
                    let mut t: Vec<f64> =
                        base.iter().zip(o).map(|(b, i)| w * b + (1.0 - w) * i).collect();
                    minmax(&mut t);
                    t
                })
                .collect()
        };
        let measure = |w: f64| -> Result<f64> { Ok(best_correlations(&mix_tables(w))?.mean) };

        let target = preset.rho_target;
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = (1.0, measure(1.0)?);
        if (best.1 - target).abs() > RHO_AIM {
            let at_zero = measure(0.0)?;
            if (at_zero - target).abs() < (best.1 - target).abs() {
                best = (0.0, at_zero);
            }
            for _ in 0..CALIBRATION_STEPS {
                let mid = 0.5 * (lo + hi);
                let r = measure(mid)?;
                if (r - target).abs() < (best.1 - target).abs() {
                    best = (mid, r);
                }
                if (r - target).abs() <= RHO_AIM {
                    break;
                }
                if r < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let (mix, rho) = best;
        if (rho - target).abs() > RHO_TOLERANCE {
            return Err(Error::Calibration {
                target,
                achieved: rho,
            });
        }
        // tables are laid out by linear index; enumeration is row-major
        let subjects = mix_tables(mix)
            .into_iter()
            .map(|t| {
                let optimum = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Landscape {
                    space: space.clone(),
                    table: Arc::new(t),
                    optimum,
                }
            })
            .collect();
        Ok(Self {
            preset,
            seed,
            mix,
            rho,
            space,
            subjects,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn subjects(&self) -> &[Landscape] {
        &self.subjects
    }

    pub fn subject(&self, i: usize) -> &Landscape {
        &self.subjects[i]
    }

    pub fn subject_id(&self, i: usize) -> String {
        format!("{}-{}-s{:02}", self.preset.name, self.seed, i)
    }
}
