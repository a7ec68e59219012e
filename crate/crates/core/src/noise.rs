//! Dyadically refinable Brownian increments shared by every step size of an experiment.
//!
//! Each path owns independent ChaCha streams keyed by `(seed, path_index, stream)`, so the
//! increments of path `i` do not depend on how paths are scheduled across workers. Coarse
//! increments are built by repeated pairwise summation of the fine ones, which makes
//! `level(n/2)[k] == level(n)[2k] + level(n)[2k+1]` hold bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Independent random streams attached to every path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseStream {
    /// Fine Brownian increments.
    Brownian = 0,
    /// Extra standard normals used by the hybrid Volterra scheme.
    Auxiliary = 1,
    /// The draw behind a random initial condition.
    InitialCondition = 2,
    /// An independent driver for the asset price.
    Asset = 3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianFabric {
    seed: u64,
    n_fine: usize,
    n_paths: usize,
    horizon: f64,
}

impl BrownianFabric {
    pub fn new(seed: u64, n_fine: usize, n_paths: usize, horizon: f64) -> Result<Self> {
        if !n_fine.is_power_of_two() {
            return Err(Error::invalid(format!("fine level must be a power of two, got {n_fine}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { seed, n_fine, n_paths, horizon })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn rng(&self, index: usize, stream: NoiseStream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(4 * index as u64 + stream as u64);
        rng
    }

    /// `count` standard normals from one stream of path `index`.
    pub fn normals(&self, index: usize, stream: NoiseStream, count: usize) -> Vec<f64> {
        let mut rng = self.rng(index, stream);
        (0..count).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    /// Fine increments of path `index`, without auxiliary normals.
    pub fn path(&self, index: usize) -> FabricPath {
        let scale = (self.horizon / self.n_fine as f64).sqrt();
        let mut dw = self.normals(index, NoiseStream::Brownian, self.n_fine);
        dw.iter_mut().for_each(|z| *z *= scale);
        FabricPath::build(self.horizon, dw, None)
    }

    /// Fine increments plus one auxiliary standard normal per fine cell.
    pub fn path_with_aux(&self, index: usize) -> FabricPath {
        let mut path = self.path(index);
        path.aux = Some(self.normals(index, NoiseStream::Auxiliary, self.n_fine));
        path
    }
}

/// The increments of one path at every dyadic level of its fabric.
#[derive(Debug, Clone, PartialEq)]
pub struct FabricPath {
    horizon: f64,
    levels: Vec<Vec<f64>>,
    aux: Option<Vec<f64>>,
}

impl FabricPath {
    fn build(horizon: f64, fine: Vec<f64>, aux: Option<Vec<f64>>) -> Self {
        let mut levels = vec![fine];
        while levels.last().is_some_and(|l| l.len().is_multiple_of(2) && l.len() > 1) {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = prev.chunks_exact(2).map(|p| p[0] + p[1]).collect();
            levels.push(next);
        }
        Self { horizon, levels, aux }
    }

    /// Wraps externally supplied increments; coarser levels exist while the length stays even.
    pub fn from_increments(horizon: f64, dw: Vec<f64>, aux: Option<Vec<f64>>) -> Result<Self> {
        if dw.is_empty() {
            return Err(Error::invalid("no increments supplied"));
        }
        if let Some(a) = &aux {
            crate::error::check_len("auxiliary normals", dw.len(), a.len())?;
        }
        Ok(Self::build(horizon, dw, aux))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_fine(&self) -> usize {
        self.levels[0].len()
    }

    pub fn fine(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn aux(&self) -> Option<&[f64]> {
        self.aux.as_deref()
    }

    /// Increments over the `n`-step grid.
    pub fn increments(&self, n: usize) -> Result<&[f64]> {
        self.levels
            .iter()
            .find(|l| l.len() == n)
            .map(|l| l.as_slice())
            .ok_or_else(|| {
                Error::invalid(format!(
                    "{n} steps is not a dyadic coarsening of {} fine steps",
                    self.n_fine()
                ))
            })
    }

    /// FNV-1a hash of the bit patterns of the fine increments.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.fine() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_dyadic_fine_level() {
        assert!(BrownianFabric::new(1, 1000, 4, 1.0).is_err());
        assert!(BrownianFabric::new(1, 1024, 4, 1.0).is_ok());
    }

    #[test]
    fn coarsening_is_exact_pairwise() {
        let fabric = BrownianFabric::new(9, 256, 2, 1.0).unwrap();
        let p = fabric.path(1);
        let mut n = 256;
        while n > 1 {
            let fine = p.increments(n).unwrap();
            let coarse = p.increments(n / 2).unwrap();
            for k in 0..n / 2 {
                assert_eq!(coarse[k].to_bits(), (fine[2 * k] + fine[2 * k + 1]).to_bits());
            }
            n /= 2;
        }
        assert!(p.increments(3).is_err());
    }

    #[test]
    fn deterministic_per_path() {
        let fabric = BrownianFabric::new(42, 64, 8, 2.0).unwrap();
        assert_eq!(fabric.path(5), fabric.path(5));
        assert_ne!(fabric.path(5).fine(), fabric.path(6).fine());
        let other = BrownianFabric::new(43, 64, 8, 2.0).unwrap();
        assert_ne!(fabric.path(5).fine(), other.path(5).fine());
        assert_eq!(fabric.path(3).checksum(), fabric.path_with_aux(3).checksum());
    }

    #[test]
    fn streams_are_independent_of_each_other() {
        let fabric = BrownianFabric::new(1, 16, 1, 1.0).unwrap();
        let p = fabric.path_with_aux(0);
        let aux = p.aux().unwrap();
        let scaled: Vec<f64> = aux.iter().map(|z| z * 0.25).collect();
        assert_ne!(scaled.as_slice(), p.fine());
    }

    #[test]
    fn fine_variance_matches_step() {
        // 10^5 draws; Var(s²) = 2h² for Gaussian increments
        let n = 1 << 17;
        let horizon = 3.0;
        let fabric = BrownianFabric::new(2024, n, 1, horizon).unwrap();
        let p = fabric.path(0);
        let h = horizon / n as f64;
        let draws = &p.fine()[..100_000];
        let m = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / m;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let se = (2.0 * h * h / (m - 1.0)).sqrt();
        assert!((var - h).abs() <= 3.0 * se, "var {var} vs h {h} (se {se})");
    }
}
