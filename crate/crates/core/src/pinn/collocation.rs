//! Low-discrepancy collocation points and their minibatch partition.
//!
//! Points are stored in normalized coordinates (`t*`, `x*` in `[-1, 1]`),
//! so a change of the trainable period never moves them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BITS: u32 = 32;

/// Two-dimensional Sobol sequence with a random digital shift per dimension.
#[derive(Debug, Clone)]
pub struct Sobol2 {
    directions: [[u32; BITS as usize]; 2],
    shift: [u32; 2],
}

impl Sobol2 {
    pub fn new(seed: u64) -> Self {
        let mut directions = [[0u32; BITS as usize]; 2];
        // dimension 1: van der Corput; dimension 2: primitive polynomial x + 1
        let mut m = 1u32;
        for k in 0..BITS as usize {
            directions[0][k] = 1u32 << (BITS as usize - 1 - k);
            if k > 0 {
                m ^= m << 1;
            }
            directions[1][k] = m << (BITS as usize - 1 - k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = [rng.gen(), rng.gen()];
        Self { directions, shift }
    }

    /// Point `i` in `[0, 1)²`.
    pub fn point(&self, i: u32) -> [f64; 2] {
        let gray = i ^ (i >> 1);
        let mut out = [0.0; 2];
        for (d, o) in out.iter_mut().enumerate() {
            let mut x = self.shift[d];
            for k in 0..BITS {
                if gray >> k & 1 == 1 {
                    x ^= self.directions[d][k as usize];
                }
            }
            *o = x as f64 / 4_294_967_296.0;
        }
        out
    }

    pub fn points(&self, n: usize) -> Vec<[f64; 2]> {
        (0..n as u32).map(|i| self.point(i)).collect()
    }
}

/// Squared L2-star discrepancy of a point set in the unit square (Warnock's formula).
pub fn l2_star_discrepancy_sq(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let single: f64 = points
        .iter()
        .map(|p| (1.0 - p[0] * p[0]) * (1.0 - p[1] * p[1]))
        .sum();
    let mut pair = 0.0;
    for a in points {
        for b in points {
            pair += (1.0 - a[0].max(b[0])) * (1.0 - a[1].max(b[1]));
        }
    }
    1.0 / 9.0 - single / (2.0 * n) + pair / (n * n)
}

/// Collocation points in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    /// Fold-equation times `t*`.
    pub fold: Vec<f64>,
    /// Tract points `(x*, t*)`.
    pub tract: Vec<(f64, f64)>,
    /// Radiation times `t*`.
    pub radiation: Vec<f64>,
    pub minibatches: usize,
}

/// One minibatch of points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub fold: Vec<f64>,
    pub tract: Vec<(f64, f64)>,
    pub radiation: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.fold.len() + self.tract.len() + self.radiation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Splits into pieces of at most `size` points per set, in order.
    pub fn chunks(&self, size: usize) -> Vec<Batch> {
        let longest = self.fold.len().max(self.tract.len()).max(self.radiation.len());
        if size == 0 || longest <= size {
            return vec![self.clone()];
        }
        let pieces = longest.div_ceil(size);
        let slice = |n: usize, k: usize| {
            let lo = n * k / pieces;
            let hi = n * (k + 1) / pieces;
            lo..hi
        };
        (0..pieces)
            .map(|k| Batch {
                fold: self.fold[slice(self.fold.len(), k)].to_vec(),
                tract: self.tract[slice(self.tract.len(), k)].to_vec(),
                radiation: self.radiation[slice(self.radiation.len(), k)].to_vec(),
            })
            .collect()
    }
}

fn to_signed(u: f64) -> f64 {
    2.0 * u - 1.0
}

impl CollocationSet {
    /// Sobol points for every set; each set has its own shift derived from `seed`.
    pub fn sample(n_f: usize, n_t: usize, n_r: usize, minibatches: usize, seed: u64) -> Self {
        let fold = Sobol2::new(seed)
            .points(n_f)
            .into_iter()
            .map(|p| to_signed(p[0]))
            .collect();
        let tract = Sobol2::new(seed.wrapping_add(1))
            .points(n_t)
            .into_iter()
            .map(|p| (to_signed(p[0]), to_signed(p[1])))
            .collect();
        let radiation = Sobol2::new(seed.wrapping_add(2))
            .points(n_r)
            .into_iter()
            .map(|p| to_signed(p[0]))
            .collect();
        Self {
            fold,
            tract,
            radiation,
            minibatches: minibatches.max(1),
        }
    }

    /// Shuffled partition for one epoch; every point lands in exactly one batch.
    pub fn batches(&self, seed: u64, epoch: usize) -> Vec<Batch> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64 + 1);
        let nb = self.minibatches;
        let mut out = vec![Batch::default(); nb];
        let deal = |n: usize, rng: &mut ChaCha8Rng, put: &mut dyn FnMut(usize, usize)| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            for b in 0..nb {
                for &i in &idx[n * b / nb..n * (b + 1) / nb] {
                    put(b, i);
                }
            }
        };
        deal(self.fold.len(), &mut rng, &mut |b, i| out[b].fold.push(self.fold[i]));
        deal(self.tract.len(), &mut rng, &mut |b, i| out[b].tract.push(self.tract[i]));
        deal(self.radiation.len(), &mut rng, &mut |b, i| {
            out[b].radiation.push(self.radiation[i])
        });
        out
    }

    /// All points as a single batch.
    pub fn full(&self) -> Batch {
        Batch {
            fold: self.fold.clone(),
            tract: self.tract.clone(),
            radiation: self.radiation.clone(),
        }
    }
}
