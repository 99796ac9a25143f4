//! One-dimensional fixed-fixed static structure with an eigen-designed
//! stiffness matrix, an "experimental" load, a model load that differs from it,
//! and an eight-mode reduced-order model.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// Degrees of freedom of the reference fixture.
pub const N_DOF: usize = 1000;

/// Reduced dimension of the deterministic ROM.
pub const ROM_DIM: usize = 8;

/// Smallest size for which every mode used by the loads exists on the interior.
pub const MIN_DOF: usize = 34;

/// Experimental load in modal coordinates: `(1-based mode, weight)`, then the
/// normalizing divisor.
const LOAD_E: (&[(usize, f64)], f64) =
    (&[(2, 0.1), (5, 0.4), (8, 0.6), (31, 2.5), (32, 2.5), (1, -0.015)], 0.261466);

/// Model (high-dimensional model) load.
const LOAD_H: (&[(usize, f64)], f64) = (&[(2, 0.1), (5, 0.4), (8, 0.6), (29, 2.5), (30, 2.5), (31, 2.5)], 0.27702);

#[derive(Debug, Clone)]
pub struct StaticFixture {
    pub n_dof: usize,
    /// `K = Φ Λ Φᵀ`.
    pub k: DMatrix<f64>,
    /// Orthonormal basis from the QR factorization of the sine matrix.
    pub phi: DMatrix<f64>,
    /// `λ_i = 4π² i²`.
    pub lambda: DVector<f64>,
    pub f_e: DVector<f64>,
    pub f_h: DVector<f64>,
    /// Modal coordinates of the loads (`Φᵀ f`).
    pub f_e_modal: DVector<f64>,
    pub f_h_modal: DVector<f64>,
    pub x_e: DVector<f64>,
    pub x_h: DVector<f64>,
    /// Leading eight eigenvectors.
    pub v: DMatrix<f64>,
    pub x_r: DVector<f64>,
}

/// `P_{jk} = sin(kπ (j-1)/(n-1))` with 1-based `j, k`.
pub fn sine_matrix(n: usize) -> DMatrix<f64> {
    let h = 1.0 / (n - 1) as f64;
    DMatrix::from_fn(n, n, |j, k| ((k + 1) as f64 * PI * j as f64 * h).sin())
}

/// Sign of the first entry whose magnitude is within `1e-9` (relative) of
/// the column maximum. Near-ties resolve to the lowest index.
pub(crate) fn leading_sign(col: &[f64]) -> f64 {
    let max = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    col.iter()
        .find(|x| x.abs() >= max * (1.0 - 1e-9))
        .map_or(1.0, |x| x.signum())
}

/// Flip column signs so each column's largest-magnitude entry is positive.
fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        if leading_sign(col.as_slice()) < 0.0 {
            col.neg_mut();
        }
    }
}

fn modal_load(n: usize, (terms, divisor): (&[(usize, f64)], f64)) -> DVector<f64> {
    let mut c = DVector::zeros(n);
    for &(mode, w) in terms {
        c[mode - 1] += w / divisor;
    }
    c
}

/// Solve `K x = f` with `x_1 = x_n = 0` by eliminating the two boundary DoFs.
fn solve_fixed_fixed(k: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let n = k.nrows();
    let m = n - 2;
    let k_ii = k.view((1, 1), (m, m)).into_owned();
    let f_i = f.rows(1, m).into_owned();
    let chol = k_ii.cholesky().expect("interior stiffness is positive definite");
    let x_i = chol.solve(&f_i);
    let mut x = DVector::zeros(n);
    x.rows_mut(1, m).copy_from(&x_i);
    x
}

impl StaticFixture {
    pub fn with_dofs(n: usize) -> Self {
        assert!(n >= MIN_DOF, "fixture needs at least {MIN_DOF} DoFs");
        let mut phi = sine_matrix(n).qr().q();
        fix_column_signs(&mut phi);
        let lambda = DVector::from_fn(n, |i, _| 4.0 * PI * PI * ((i + 1) as f64).powi(2));

        let mut phi_lambda = phi.clone();
        for (mut col, &l) in phi_lambda.column_iter_mut().zip(lambda.iter()) {
            col *= l;
        }
        let mut k = &phi_lambda * phi.transpose();
        k = 0.5 * (&k + k.transpose());

        let f_e_modal = modal_load(n, LOAD_E);
        let f_h_modal = modal_load(n, LOAD_H);
        let f_e = &phi * &f_e_modal;
        let f_h = &phi * &f_h_modal;
        let x_e = solve_fixed_fixed(&k, &f_e);
        let x_h = solve_fixed_fixed(&k, &f_h);

        let v = phi.columns(0, ROM_DIM).into_owned();
        let kr = v.transpose() * &k * &v;
        let q = kr.cholesky().expect("reduced stiffness is positive definite").solve(&(v.transpose() * &f_h));
        let x_r = &v * q;

        Self { n_dof: n, k, phi, lambda, f_e, f_h, f_e_modal, f_h_modal, x_e, x_h, v, x_r }
    }

    /// Experimental discrepancy `d_o(u_E) = ‖x_E - x_R‖` (plain Euclidean norm).
    pub fn target_distance(&self) -> f64 {
        (&self.x_e - &self.x_r).norm()
    }

    /// Same distance accumulated term by term, without library norms.
    pub fn target_distance_naive(&self) -> f64 {
        self.x_e.iter().zip(self.x_r.iter()).map(|(e, r)| (e - r) * (e - r)).sum::<f64>().sqrt()
    }

    /// Same distance from the modal solution `x = Σ (c_i / λ_i) φ_i`, with the
    /// ROM response limited to the first eight modes.
    pub fn target_distance_modal(&self) -> f64 {
        let n = self.n_dof;
        (0..n)
            .map(|i| {
                let xe = self.f_e_modal[i] / self.lambda[i];
                let xr = if i < ROM_DIM { self.f_h_modal[i] / self.lambda[i] } else { 0.0 };
                (xe - xr) * (xe - xr)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Stand-in SROM statistic computed in nodal coordinates for a perturbation
    /// given in modal coordinates (`G = Φ H`). Dense and slow; used to
    /// cross-check the modal evaluation path.
    pub fn standin_statistic_nodal(&self, beta: f64, h_modal: &DMatrix<f64>) -> f64 {
        let g = &self.phi * h_modal;
        let a = &self.v + g * beta.powf(-0.5);
        let w = a.qr().q();
        let kr = w.transpose() * &self.k * &w;
        let q = kr.cholesky().expect("reduced stiffness is positive definite").solve(&(w.transpose() * &self.f_h));
        (&w * q - &self.x_r).norm()
    }
}

/// The 1000-DoF reference fixture.
pub fn build_static_fixture() -> StaticFixture {
    StaticFixture::with_dofs(N_DOF)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> StaticFixture {
        StaticFixture::with_dofs(64)
    }

    #[test]
    fn phi_is_orthonormal_and_matches_normalized_sines() {
        let f = small();
        let n = f.n_dof;
        let gram = f.phi.transpose() * &f.phi;
        assert!((gram - DMatrix::<f64>::identity(n, n)).amax() < 1e-10);
        // interior sine columns are mutually orthogonal with squared norm (n-1)/2,
        // so QR only normalizes them (up to sign)
        let p = sine_matrix(n);
        let norm = ((n - 1) as f64 / 2.0).sqrt();
        for k in 0..n - 2 {
            let sine = p.column(k) / norm;
            let sign = f.phi.column(k).dot(&sine).signum();
            let diff = (f.phi.column(k) - sine * sign).amax();
            assert!(diff < 1e-10, "column {k}: {diff}");
        }
    }

    #[test]
    fn stiffness_reconstructs_and_has_eigen_pairs() {
        let f = small();
        for i in 0..10 {
            let r = &f.k * f.phi.column(i) - f.phi.column(i) * f.lambda[i];
            assert!(r.amax() < 1e-8 * f.lambda[i]);
        }
        let mut eig: Vec<f64> = f.k.clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, m) in [1.0, 4.0, 9.0].iter().enumerate() {
            let expect = 4.0 * PI * PI * m;
            assert!((eig[i] / expect - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn boundary_dofs_are_eliminated() {
        let f = small();
        let n = f.n_dof;
        assert_eq!(f.x_e[0], 0.0);
        assert_eq!(f.x_e[n - 1], 0.0);
        assert_eq!(f.x_h[0], 0.0);
        assert_eq!(f.x_h[n - 1], 0.0);
        // interior equations hold
        let r = &f.k * &f.x_e - &f.f_e;
        assert!(r.rows(1, n - 2).amax() < 1e-8 * f.f_e.amax());
    }

    #[test]
    fn model_error_is_nonzero() {
        let f = small();
        assert!((&f.x_e - &f.x_h).norm() > 0.0);
        assert!((&f.f_e - &f.f_h).norm() > 0.0);
    }

    #[test]
    fn target_distance_three_ways() {
        let f = small();
        let a = f.target_distance();
        let b = f.target_distance_naive();
        let c = f.target_distance_modal();
        assert!((a - b).abs() <= 1e-12 * a);
        assert!((a - c).abs() <= 1e-9 * a, "{a} vs modal {c}");
    }

    #[test]
    fn column_sign_convention() {
        let f = small();
        for col in f.phi.column_iter() {
            assert_eq!(leading_sign(col.as_slice()), 1.0);
        }
        // second mode is antisymmetric: both extremes tie in magnitude, the
        // first one wins
        let c = f.phi.column(1);
        let max = c.amax();
        let first = c.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)).unwrap();
        assert!(c[first] > 0.0 && first < f.n_dof / 2);
    }
}
