//! Stochastic reduced-order stand-in on the static fixture.
//!
//! NOT the stochastic subspace model of the original SROM work. It is an
//! invented perturbation that lets the whole pipeline run on a structural
//! problem: the ROM basis is randomized as `W = orth(V + β^{-1/2} G)`, the ROM
//! is re-solved on `W`, and the statistic is `s = ‖x_W - x_R‖`. The target is
//! `s0 = ‖x_E - x_R‖`.
//!
//! `G = Φ D H` with `H` i.i.d. standard normal on the interior modes and
//! `D = diag(i^{-p})`. With `p = 0` this is `G` i.i.d. standard normal on the
//! interior DoFs; the perturbation then sits almost entirely in stiff modes,
//! `x_W ≈ 0` and `s` is flat in β until β ~ 10⁷. The default `p = 1.25`
//! keeps the perturbation in the compliant modes, so `E[s|β]` follows a
//! power law across 10..10³ and crosses `s0` near β ≈ 10.
//!
//! Working in modal coordinates, where `K` is diagonal, keeps one evaluation
//! at `O(n · 8²)`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::fixture::{StaticFixture, ROM_DIM};
use super::{ObjectiveProblem, ProblemError};
use crate::rng::Stream;

#[derive(Debug, Clone)]
pub struct SromStandin {
    n_dof: usize,
    lambda: DVector<f64>,
    f_h_modal: DVector<f64>,
    x_r_modal: DVector<f64>,
    decay: DVector<f64>,
    s0: f64,
}

/// Default modal decay exponent `p`.
pub const STANDIN_DECAY: f64 = 1.25;

pub fn srom_standin(fixture: &StaticFixture) -> SromStandin {
    srom_standin_with_decay(fixture, STANDIN_DECAY)
}

/// Stand-in with modal amplitudes `i^{-p}`; `p = 0` gives i.i.d. nodal noise.
pub fn srom_standin_with_decay(fixture: &StaticFixture, p: f64) -> SromStandin {
    let n = fixture.n_dof;
    let x_r_modal = DVector::from_fn(n, |i, _| {
        if i < ROM_DIM {
            fixture.f_h_modal[i] / fixture.lambda[i]
        } else {
            0.0
        }
    });
    SromStandin {
        n_dof: n,
        lambda: fixture.lambda.clone(),
        f_h_modal: fixture.f_h_modal.clone(),
        x_r_modal,
        decay: DVector::from_fn(n, |i, _| ((i + 1) as f64).powf(-p)),
        s0: fixture.target_distance(),
    }
}

impl SromStandin {
    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    /// Modal perturbation `D H` (n × 8). The last two modal directions span
    /// the boundary DoFs and are left unperturbed.
    pub fn draw_perturbation(&self, rng: &mut Stream) -> DMatrix<f64> {
        let interior = self.n_dof - 2;
        DMatrix::from_fn(self.n_dof, ROM_DIM, |i, _| {
            if i < interior {
                let z: f64 = StandardNormal.sample(rng);
                z * self.decay[i]
            } else {
                0.0
            }
        })
    }

    /// Statistic for a given modal perturbation.
    pub fn statistic_from(&self, beta: f64, h: &DMatrix<f64>) -> Result<f64, ProblemError> {
        let sigma = beta.powf(-0.5);
        let mut a = h * sigma;
        for j in 0..ROM_DIM {
            a[(j, j)] += 1.0;
        }
        let w = a.qr().q();
        // Wᵀ Λ W
        let mut lw = w.clone();
        for (mut row, &l) in lw.row_iter_mut().zip(self.lambda.iter()) {
            row *= l;
        }
        let kr = w.transpose() * lw;
        let rhs = w.transpose() * &self.f_h_modal;
        let q = kr
            .cholesky()
            .ok_or_else(|| ProblemError::Simulator(format!("reduced stiffness not positive definite at beta={beta}")))?
            .solve(&rhs);
        let s = (&w * q - &self.x_r_modal).norm();
        if !s.is_finite() {
            return Err(ProblemError::Simulator(format!("non-finite statistic at beta={beta}")));
        }
        Ok(s)
    }
}

impl ObjectiveProblem for SromStandin {
    fn evaluate_statistic(&self, beta: f64, rng: &mut Stream) -> Result<f64, ProblemError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(ProblemError::OutOfDomain(beta));
        }
        let h = self.draw_perturbation(rng);
        self.statistic_from(beta, &h)
    }

    fn target(&self) -> f64 {
        self.s0
    }
}
