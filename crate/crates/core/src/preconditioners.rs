//! Diagonal preconditioner states producing the `(m_t, B_t)` pair.
//!
//! The Adam family keeps its moments in bias-corrected form,
//! `m^_t = m^_{t-1} + c_t (g_t - m^_{t-1})` with `c_t = (1-beta)/(1-beta^t)`,
//! which is algebraically the usual EMA divided by `1 - beta^t` and makes
//! the first update return `g` exactly.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::vector::hadamard;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondConfig {
    /// Added to every diagonal entry of the AdaGrad/Adam families. Zero is
    /// allowed and makes the scaling identities exact.
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// EMA weight of Hutchinson's estimate.
    pub hutchinson_beta: f64,
    /// Lower bound on Hutchinson's published diagonal.
    pub mu_floor: f64,
    /// Number of batches averaged into Hutchinson's initial estimate.
    pub k_init: usize,
}

impl Default for PrecondConfig {
    fn default() -> Self {
        PrecondConfig {
            eps: 1e-8,
            beta1: 0.9,
            beta2: 0.999,
            hutchinson_beta: 0.999,
            mu_floor: 1e-3,
            k_init: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrecondKind {
    Identity,
    FixedDiag(Vec<f64>),
    AdaGrad,
    Adam,
    AdaGradSqr,
    AdamSqr,
    Hutchinson,
}

impl PrecondKind {
    pub fn name(&self) -> &'static str {
        match self {
            PrecondKind::Identity => "identity",
            PrecondKind::FixedDiag(_) => "fixed-diag",
            PrecondKind::AdaGrad => "adagrad",
            PrecondKind::Adam => "adam",
            PrecondKind::AdaGradSqr => "adagrad-sqr",
            PrecondKind::AdamSqr => "adam-sqr",
            PrecondKind::Hutchinson => "hutchinson",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrecondError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("fixed diagonal must be positive (index {0})")]
    NonPositiveFixed(usize),
    #[error("Hutchinson's estimator needs Hessian-vector products; use hutchinson_update")]
    NeedsCurvature,
    #[error("Hutchinson's estimator was not initialized")]
    Uninitialized,
}

/// Search direction `m` and diagonal norm matrix `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioned {
    pub m: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PrecondState {
    kind: PrecondKind,
    cfg: PrecondConfig,
    /// squared-gradient sum, bias-corrected second moment, or Hutchinson EMA
    acc: Vec<f64>,
    /// bias-corrected first moment (Adam family)
    first: Vec<f64>,
    t: u64,
    initialized: bool,
}

/// `z * (H z)` entrywise: one Hutchinson probe of `diag(H)`.
pub fn hutchinson_sample(z: &[f64], hz: &[f64]) -> Vec<f64> {
    hadamard(z, hz)
}

pub fn rademacher<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn bias_weight(beta: f64, t: u64) -> f64 {
    (1.0 - beta) / (1.0 - libm::pow(beta, t as f64))
}

impl PrecondState {
    pub fn new(kind: PrecondKind, cfg: PrecondConfig, dim: usize) -> Result<Self, PrecondError> {
        let check = |name, value: f64, ok: bool| {
            if ok { Ok(()) } else { Err(PrecondError::InvalidHyperparameter { name, value }) }
        };
        check("eps", cfg.eps, cfg.eps >= 0.0 && cfg.eps.is_finite())?;
        match &kind {
            PrecondKind::Adam | PrecondKind::AdamSqr => {
                check("beta1", cfg.beta1, cfg.beta1 > 0.0 && cfg.beta1 < 1.0)?;
                check("beta2", cfg.beta2, cfg.beta2 > 0.0 && cfg.beta2 < 1.0)?;
            }
            PrecondKind::Hutchinson => {
                let b = cfg.hutchinson_beta;
                check("hutchinson_beta", b, b > 0.0 && b < 1.0)?;
                check("mu_floor", cfg.mu_floor, cfg.mu_floor > 0.0)?;
                check("k_init", cfg.k_init as f64, cfg.k_init >= 1)?;
            }
            PrecondKind::FixedDiag(v) => {
                if v.len() != dim {
                    return Err(PrecondError::DimensionMismatch { expected: dim, got: v.len() });
                }
                if let Some(j) = v.iter().position(|&x| !(x > 0.0)) {
                    return Err(PrecondError::NonPositiveFixed(j));
                }
            }
            _ => {}
        }
        Ok(PrecondState {
            kind,
            cfg,
            acc: vec![0.0; dim],
            first: vec![0.0; dim],
            t: 0,
            initialized: false,
        })
    }

    pub fn kind(&self) -> &PrecondKind {
        &self.kind
    }

    pub fn config(&self) -> &PrecondConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.acc.len()
    }

    /// Number of updates since construction or the last [`reset`](Self::reset).
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Clears accumulated statistics (Hutchinson's estimate included).
    pub fn reset(&mut self) {
        self.acc.iter_mut().for_each(|x| *x = 0.0);
        self.first.iter_mut().for_each(|x| *x = 0.0);
        self.t = 0;
        self.initialized = false;
    }

    fn check_dim(&self, g: &[f64]) -> Result<(), PrecondError> {
        if g.len() != self.dim() {
            return Err(PrecondError::DimensionMismatch { expected: self.dim(), got: g.len() });
        }
        Ok(())
    }

    /// Folds gradient `g` into the statistics and returns `(m_t, B_t)`.
    pub fn update(&mut self, g: &[f64]) -> Result<Preconditioned, PrecondError> {
        self.check_dim(g)?;
        let eps = self.cfg.eps;
        let out = match &self.kind {
            PrecondKind::Identity => Preconditioned { m: g.to_vec(), b: vec![1.0; g.len()] },
            PrecondKind::FixedDiag(v) => Preconditioned { m: g.to_vec(), b: v.clone() },
            PrecondKind::AdaGrad | PrecondKind::AdaGradSqr => {
                for (a, gi) in self.acc.iter_mut().zip(g) {
                    *a += gi * gi;
                }
                let sqrt = self.kind == PrecondKind::AdaGrad;
                let b = self
                    .acc
                    .iter()
                    .map(|&a| if sqrt { libm::sqrt(a) + eps } else { a + eps })
                    .collect();
                Preconditioned { m: g.to_vec(), b }
            }
            PrecondKind::Adam | PrecondKind::AdamSqr => {
                let t = self.t + 1;
                let c1 = bias_weight(self.cfg.beta1, t);
                let c2 = bias_weight(self.cfg.beta2, t);
                for ((m, v), gi) in self.first.iter_mut().zip(self.acc.iter_mut()).zip(g) {
                    *m += c1 * (gi - *m);
                    *v += c2 * (gi * gi - *v);
                }
                let sqrt = self.kind == PrecondKind::Adam;
                let b = self
                    .acc
                    .iter()
                    .map(|&v| if sqrt { libm::sqrt(v) + eps } else { v + eps })
                    .collect();
                Preconditioned { m: self.first.clone(), b }
            }
            PrecondKind::Hutchinson => return Err(PrecondError::NeedsCurvature),
        };
        self.t += 1;
        Ok(out)
    }

    /// Initial Hutchinson estimate: the mean of one Rademacher probe on each
    /// of `k_init` functions. `hvp(j, z)` returns `H_j z` for the `j`-th one.
    pub fn hutchinson_init<R, F>(&mut self, rng: &mut R, mut hvp: F) -> Result<Vec<f64>, PrecondError>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &[f64]) -> Vec<f64>,
    {
        if self.kind != PrecondKind::Hutchinson {
            return Err(PrecondError::NeedsCurvature);
        }
        let k = self.cfg.k_init;
        let d = self.dim();
        let mut sum = vec![0.0; d];
        for j in 0..k {
            let z = rademacher(d, rng);
            let hz = hvp(j, &z);
            self.check_dim(&hz)?;
            for ((s, zi), hi) in sum.iter_mut().zip(&z).zip(&hz) {
                *s += zi * hi;
            }
        }
        self.acc = sum.into_iter().map(|s| s / k as f64).collect();
        self.initialized = true;
        Ok(self.published_diag())
    }

    /// One EMA step `D = beta D + (1 - beta) z * (H z)`; returns `(g, B)` with
    /// `B_jj = max(mu_floor, |D_jj|)`.
    pub fn hutchinson_update<R, F>(
        &mut self,
        rng: &mut R,
        hvp: F,
        g: &[f64],
    ) -> Result<Preconditioned, PrecondError>
    where
        R: Rng + ?Sized,
        F: FnOnce(&[f64]) -> Vec<f64>,
    {
        if self.kind != PrecondKind::Hutchinson {
            return Err(PrecondError::NeedsCurvature);
        }
        if !self.initialized {
            return Err(PrecondError::Uninitialized);
        }
        self.check_dim(g)?;
        let z = rademacher(self.dim(), rng);
        let hz = hvp(&z);
        self.check_dim(&hz)?;
        let beta = self.cfg.hutchinson_beta;
        for ((a, zi), hi) in self.acc.iter_mut().zip(&z).zip(&hz) {
            *a = beta * *a + (1.0 - beta) * zi * hi;
        }
        self.t += 1;
        Ok(Preconditioned { m: g.to_vec(), b: self.published_diag() })
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    fn published_diag(&self) -> Vec<f64> {
        let floor = self.cfg.mu_floor;
        self.acc.iter().map(|a| a.abs().max(floor)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-8;

    fn state(kind: PrecondKind, dim: usize) -> PrecondState {
        PrecondState::new(kind, PrecondConfig::default(), dim).unwrap()
    }

    #[test]
    fn adagrad_examples() {
        let mut s = state(PrecondKind::AdaGrad, 2);
        let p = s.update(&[1.0, 2.0]).unwrap();
        assert_eq!(p.b, vec![1.0 + EPS, 2.0 + EPS]);
        assert_eq!(p.m, vec![1.0, 2.0]);
        let q = s.update(&[0.0, 0.0]).unwrap();
        assert_eq!(q.b, p.b);
        let mut s = state(PrecondKind::AdaGrad, 2);
        s.update(&[3.0, 0.0]).unwrap();
        let p = s.update(&[4.0, 0.0]).unwrap();
        assert_eq!(p.b[0], 5.0 + EPS);
        assert_eq!(p.b[1], EPS);
        assert_eq!(s.steps(), 2);
    }

    #[test]
    fn adagrad_sqr_examples() {
        let mut s = state(PrecondKind::AdaGradSqr, 2);
        let p = s.update(&[1.0, 2.0]).unwrap();
        assert_eq!(p.b, vec![1.0 + EPS, 4.0 + EPS]);
        assert_eq!(s.update(&[0.0, 0.0]).unwrap().b, p.b);
    }

    #[test]
    fn adam_first_step() {
        let g = [0.37, -1.3, 2.0, 0.0];
        for kind in [PrecondKind::Adam, PrecondKind::AdamSqr] {
            let sqr = kind == PrecondKind::AdamSqr;
            let mut s = state(kind, 4);
            let p = s.update(&g).unwrap();
            assert_eq!(p.m, g.to_vec());
            assert_eq!(p.b[2], if sqr { 4.0 + EPS } else { 2.0 + EPS });
            assert_eq!(p.b[3], EPS);
        }
    }

    #[test]
    fn adam_matches_textbook_recursion() {
        let grads = [[1.0, -2.0], [0.5, 0.1], [-3.0, 0.7], [0.2, 0.2], [1.5, -0.4]];
        let (b1, b2) = (0.9f64, 0.999f64);
        let (mut m, mut v) = ([0.0f64; 2], [0.0f64; 2]);
        let mut s = state(PrecondKind::Adam, 2);
        for (t, g) in grads.iter().enumerate() {
            let t = t as i32 + 1;
            let p = s.update(g).unwrap();
            for j in 0..2 {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let mhat = m[j] / (1.0 - b1.powi(t));
                let vhat = v[j] / (1.0 - b2.powi(t));
                assert!((p.m[j] - mhat).abs() < 1e-13 * mhat.abs().max(1.0));
                assert!((p.b[j] - (vhat.sqrt() + EPS)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn adam_constant_gradient_converges_monotonically() {
        let g = [0.8, -0.25];
        let mut s = state(PrecondKind::Adam, 2);
        let mut prev_gap = f64::INFINITY;
        for _ in 0..10 {
            let p = s.update(&g).unwrap();
            let gap: f64 = (0..2)
                .map(|j| (p.m[j] - g[j]).abs() + (p.b[j] - (g[j].abs() + EPS)).abs())
                .sum();
            assert!(gap <= prev_gap);
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-12);
    }

    #[test]
    fn sqr_is_square_of_classical_without_eps() {
        let cfg = PrecondConfig { eps: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (classic, sqr) in [
            (PrecondKind::AdaGrad, PrecondKind::AdaGradSqr),
            (PrecondKind::Adam, PrecondKind::AdamSqr),
        ] {
            let mut a = PrecondState::new(classic, cfg, 3).unwrap();
            let mut b = PrecondState::new(sqr, cfg, 3).unwrap();
            for _ in 0..20 {
                let g: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let (pa, pb) = (a.update(&g).unwrap(), b.update(&g).unwrap());
                for j in 0..3 {
                    assert!((pa.b[j] * pa.b[j] - pb.b[j]).abs() <= 1e-12 * pb.b[j]);
                }
                assert_eq!(pa.m, pb.m);
            }
        }
    }

    #[test]
    fn hutchinson_diagonal_hessian_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..8 {
            let z = rademacher(2, &mut rng);
            let hz = [2.0 * z[0], 3.0 * z[1]];
            assert_eq!(hutchinson_sample(&z, &hz), vec![2.0, 3.0]);
        }
    }

    #[test]
    fn hutchinson_floor_and_ema() {
        let cfg = PrecondConfig { mu_floor: 0.01, hutchinson_beta: 0.5, k_init: 1, ..Default::default() };
        let mut s = PrecondState::new(PrecondKind::Hutchinson, cfg, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(s.update(&[1.0, 1.0]), Err(PrecondError::NeedsCurvature));
        assert!(matches!(
            s.hutchinson_update(&mut rng, |z| z.to_vec(), &[0.0, 0.0]),
            Err(PrecondError::Uninitialized)
        ));
        // H = diag(-0.001, 4): entry 0 published at the floor
        let h = [-0.001, 4.0];
        let b0 = s
            .hutchinson_init(&mut rng, |_, z| z.iter().zip(&h).map(|(a, b)| a * b).collect())
            .unwrap();
        assert_eq!(b0, vec![0.01, 4.0]);
        let h2 = [-0.001, 2.0];
        let p = s
            .hutchinson_update(&mut rng, |z| z.iter().zip(&h2).map(|(a, b)| a * b).collect(), &[1.0, 2.0])
            .unwrap();
        assert_eq!(p.b, vec![0.01, 3.0]);
        assert_eq!(p.m, vec![1.0, 2.0]);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn published_diagonals_are_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in [PrecondKind::AdaGrad, PrecondKind::Adam, PrecondKind::AdaGradSqr, PrecondKind::AdamSqr] {
            let mut s = state(kind, 4);
            for _ in 0..30 {
                let g: Vec<f64> = (0..4).map(|j| if j == 0 { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
                let p = s.update(&g).unwrap();
                assert!(p.b.iter().all(|&b| b >= EPS));
            }
        }
    }

    #[test]
    fn invalid_hyperparameters() {
        let bad = PrecondConfig { beta1: 1.0, ..Default::default() };
        assert!(PrecondState::new(PrecondKind::Adam, bad, 2).is_err());
        let bad = PrecondConfig { mu_floor: 0.0, ..Default::default() };
        assert!(PrecondState::new(PrecondKind::Hutchinson, bad, 2).is_err());
        assert_eq!(
            PrecondState::new(PrecondKind::FixedDiag(vec![1.0, 0.0]), PrecondConfig::default(), 2).unwrap_err(),
            PrecondError::NonPositiveFixed(1)
        );
    }
}
