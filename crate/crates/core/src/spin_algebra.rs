//! Spin-1/2 operators on the bath and the operators built from them.
//!
//! Basis convention: product z-basis, site 0 is the most significant factor
//! of the Kronecker chain, and within a site index 0 is spin up (+1/2).

use std::fmt::Write as _;

use crate::env_model::EnvironmentModel;
use crate::numerics::{self, hermiticity_defect};
use crate::{CMatrix, Error, Result, C64};

/// A Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub const TOLERANCE: f64 = 1.0e-12;

    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "operator must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("operator has non-finite entries".into()));
        }
        let defect = hermiticity_defect(&m);
        if defect >= Self::TOLERANCE {
            return Err(Error::Contract(format!(
                "operator is not Hermitian: max|M - M†| = {defect:e}"
            )));
        }
        Ok(HermitianOperator(m))
    }

    /// Projects onto the Hermitian part, `(M + M†)/2`.
    pub fn symmetrized(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        HermitianOperator(h)
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator(CMatrix::zeros(dim, dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// A Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianOperator);

impl DensityMatrix {
    pub const TRACE_TOLERANCE: f64 = 1.0e-10;
    pub const MIN_EIGENVALUE: f64 = -1.0e-10;

    /// Validates every density-matrix invariant (one eigensolve).
    pub fn new(m: CMatrix) -> Result<Self> {
        let op = HermitianOperator::new(m)?;
        let trace = op.matrix().trace();
        if (trace - C64::new(1.0, 0.0)).norm() >= Self::TRACE_TOLERANCE {
            return Err(Error::Contract(format!("trace is {trace}, expected 1")));
        }
        let min = numerics::eigvalsh(&op)[0];
        if min < Self::MIN_EIGENVALUE {
            return Err(Error::Contract(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(DensityMatrix(op))
    }

    /// For matrices that are states by construction (unitary conjugates of
    /// a state). Hermiticity is restored exactly; nothing else is checked.
    pub(crate) fn from_conjugation(m: CMatrix) -> Self {
        DensityMatrix(HermitianOperator::symmetrized(m))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        let m = self.matrix();
        (m * m).trace().re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Single spin-1/2 operator (Pauli matrix over 2).
    pub fn single_site(self) -> CMatrix {
        let z = C64::new(0.0, 0.0);
        let h = 0.5;
        let entries = match self {
            Axis::X => [z, C64::new(h, 0.0), C64::new(h, 0.0), z],
            Axis::Y => [z, C64::new(0.0, -h), C64::new(0.0, h), z],
            Axis::Z => [C64::new(h, 0.0), z, z, C64::new(-h, 0.0)],
        };
        CMatrix::from_row_slice(2, 2, &entries)
    }
}

/// `1 ⊗ … ⊗ S ⊗ … ⊗ 1` with `single` (2x2) at slot `site` of `total_sites`.
fn embed(single: &CMatrix, site: usize, total_sites: usize) -> CMatrix {
    let left = 1usize << site;
    let right = 1usize << (total_sites - site - 1);
    let m = CMatrix::identity(left, left).kronecker(single);
    m.kronecker(&CMatrix::identity(right, right))
}

/// `I^{axis}_site` on a bath of `total_sites` spins-1/2 (dimension 2^K).
pub fn spin_operator(axis: Axis, site: usize, total_sites: usize) -> Result<HermitianOperator> {
    if site >= total_sites {
        return Err(Error::Index {
            index: site,
            len: total_sites,
        });
    }
    Ok(HermitianOperator(embed(
        &axis.single_site(),
        site,
        total_sites,
    )))
}

/// Nuclear Zeeman term `H_E = Σ_k ω_n I^z_k`, `ω_n = 2π γ_n B_z` (rad/µs).
pub fn build_bath_hamiltonian(env: &EnvironmentModel) -> HermitianOperator {
    let k = env.len();
    let omega = 2.0 * std::f64::consts::PI * env.constants.gamma_n * env.b_z;
    let dim = env.bath_dim();
    // Diagonal: each site contributes ±ω/2 depending on its bit.
    let diag = (0..dim).map(|index| {
        let up = (0..k).filter(|&site| index & (1 << (k - 1 - site)) == 0).count() as f64;
        let down = k as f64 - up;
        C64::new(0.5 * omega * (up - down), 0.0)
    });
    let d = nalgebra::DVector::from_iterator(dim, diag);
    HermitianOperator(CMatrix::from_diagonal(&d))
}

/// Hyperfine term `V = Σ_k Σ_j 2π A^{z,j}_k I^j_k` (rad/µs).
pub fn build_coupling_operator(env: &EnvironmentModel) -> HermitianOperator {
    let k = env.len();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut v = CMatrix::zeros(env.bath_dim(), env.bath_dim());
    for (site, nucleus) in env.nuclei.iter().enumerate() {
        let mut single = CMatrix::zeros(2, 2);
        for (axis, a) in Axis::ALL.iter().zip(nucleus.coupling) {
            single += axis.single_site() * C64::new(two_pi * a, 0.0);
        }
        v += embed(&single, site, k);
    }
    HermitianOperator(v)
}

/// `R(0) = ⊗_k diag((1 + p_k)/2, (1 − p_k)/2)`.
pub fn initial_bath_state(env: &EnvironmentModel) -> Result<DensityMatrix> {
    let mut state = CMatrix::identity(1, 1);
    for n in &env.nuclei {
        let p = n.polarization;
        if !(-1.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "polarization must lie in [-1, 1], got {p}"
            )));
        }
        let single = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.5 * (1.0 + p), 0.0),
            C64::new(0.5 * (1.0 - p), 0.0),
        ]));
        state = state.kronecker(&single);
    }
    Ok(DensityMatrix(HermitianOperator(state)))
}

/// Row-major CSV dump, each cell written as a `re,im` pair.
pub fn matrix_csv(m: &CMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let z = m[(i, j)];
            let _ = write!(
                out,
                "{},{}",
                crate::scenario::fmt_num(z.re),
                crate::scenario::fmt_num(z.im)
            );
        }
        out.push('\n');
    }
    out
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{set_uniform_polarization, PhysicalConstants, StandardDipolar};
    use crate::numerics::{commutator, max_abs};

    fn diag_of(m: &CMatrix) -> Vec<f64> {
        (0..m.nrows()).map(|i| m[(i, i)].re).collect()
    }

    fn env(positions: &[[f64; 3]], b_z: f64, p: f64) -> EnvironmentModel {
        let e = EnvironmentModel::from_positions(
            positions,
            b_z,
            PhysicalConstants::default(),
            &StandardDipolar,
        )
        .unwrap();
        set_uniform_polarization(&e, p).unwrap()
    }

    fn five_sites() -> Vec<[f64; 3]> {
        vec![
            [1.78, 0.89, -2.67],
            [-3.57, 1.78, 0.0],
            [0.89, -2.67, 2.67],
            [2.67, 2.67, 0.89],
            [-0.89, -4.46, -1.78],
        ]
    }

    #[test]
    fn spin_z_single_and_pair() {
        let z1 = spin_operator(Axis::Z, 0, 1).unwrap();
        assert_eq!(diag_of(z1.matrix()), vec![0.5, -0.5]);
        let z2 = spin_operator(Axis::Z, 0, 2).unwrap();
        assert_eq!(diag_of(z2.matrix()), vec![0.5, 0.5, -0.5, -0.5]);
        assert!(max_abs(&(z2.matrix() - CMatrix::from_diagonal(&z2.matrix().diagonal()))) == 0.0);
        assert!(matches!(
            spin_operator(Axis::X, 2, 2),
            Err(Error::Index { index: 2, len: 2 })
        ));
    }

    #[test]
    fn spin_commutation_relations() {
        for k in 0..3 {
            let x = spin_operator(Axis::X, k, 3).unwrap();
            let y = spin_operator(Axis::Y, k, 3).unwrap();
            let z = spin_operator(Axis::Z, k, 3).unwrap();
            let lhs = commutator(x.matrix(), y.matrix());
            let rhs = z.matrix() * C64::new(0.0, 1.0);
            assert!(max_abs(&(lhs - rhs)) < 1e-15);
        }
    }

    #[test]
    fn bath_hamiltonian_values() {
        let positions = five_sites();
        assert!(max_abs(build_bath_hamiltonian(&env(&positions, 0.0, 0.0)).matrix()) == 0.0);

        let h = build_bath_hamiltonian(&env(&positions[..1], 0.2, 0.0));
        let w = std::f64::consts::PI * 10.71 * 0.2;
        let d = diag_of(h.matrix());
        assert!((d[0] - w).abs() < 1e-13 && (d[1] + w).abs() < 1e-13);

        // Matches Σ ω I^z_k built from spin_operator.
        let e = env(&positions, 0.2, 0.0);
        let h = build_bath_hamiltonian(&e);
        let mut direct = CMatrix::zeros(32, 32);
        for k in 0..5 {
            direct += spin_operator(Axis::Z, k, 5).unwrap().matrix()
                * C64::new(2.0 * std::f64::consts::PI * 10.71 * 0.2, 0.0);
        }
        assert!(max_abs(&(direct - h.matrix())) < 1e-12);
    }

    #[test]
    fn coupling_operator_values() {
        let mut e = env(&five_sites()[..1], 0.0, 0.0);
        e.nuclei[0].coupling = [0.0, 0.0, 0.3];
        let v = build_coupling_operator(&e);
        let d = diag_of(v.matrix());
        let pa = std::f64::consts::PI * 0.3;
        assert!((d[0] - pa).abs() < 1e-15 && (d[1] + pa).abs() < 1e-15);

        e.nuclei[0].coupling = [0.0; 3];
        assert_eq!(max_abs(build_coupling_operator(&e).matrix()), 0.0);

        let v = build_coupling_operator(&env(&five_sites(), 0.0, 0.0));
        assert!(hermiticity_defect(v.matrix()) < 1e-12);
    }

    #[test]
    fn zeeman_and_hyperfine_commute_only_at_zero_field() {
        let e0 = env(&five_sites(), 0.0, 0.0);
        let c0 = commutator(
            build_bath_hamiltonian(&e0).matrix(),
            build_coupling_operator(&e0).matrix(),
        );
        assert_eq!(max_abs(&c0), 0.0);
        let e1 = e0.with_field(0.2);
        let c1 = commutator(
            build_bath_hamiltonian(&e1).matrix(),
            build_coupling_operator(&e1).matrix(),
        );
        assert!(max_abs(&c1) > 1e-3);
    }

    #[test]
    fn initial_states() {
        let mixed = initial_bath_state(&env(&five_sites(), 0.0, 0.0)).unwrap();
        assert!(max_abs(&(mixed.matrix() - CMatrix::identity(32, 32) / C64::new(32.0, 0.0))) < 1e-17);

        let pure = initial_bath_state(&env(&five_sites()[..2], 0.0, 1.0)).unwrap();
        assert_eq!(diag_of(pure.matrix()), vec![1.0, 0.0, 0.0, 0.0]);
        assert!((pure.purity() - 1.0).abs() < 1e-15);

        let one = initial_bath_state(&env(&five_sites()[..1], 0.0, 0.4)).unwrap();
        let d = diag_of(one.matrix());
        assert!((d[0] - 0.7).abs() < 1e-15 && (d[1] - 0.3).abs() < 1e-15);

        let mut bad = env(&five_sites()[..1], 0.0, 0.0);
        bad.nuclei[0].polarization = 1.5;
        assert!(matches!(initial_bath_state(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn initial_state_purity_product_rule() {
        for p in [0.0, 0.1, 0.4, 0.7, 1.0, -0.3] {
            let r = initial_bath_state(&env(&five_sites(), 0.0, p)).unwrap();
            let expected = ((1.0 + p * p) / 2.0f64).powi(5);
            assert!((r.purity() - expected).abs() < 1e-14);
            // validated constructor accepts it
            DensityMatrix::new(r.matrix().clone()).unwrap();
        }
    }

    #[test]
    fn density_matrix_rejects_bad_input() {
        let bad_trace = CMatrix::identity(2, 2);
        assert!(matches!(DensityMatrix::new(bad_trace), Err(Error::Contract(_))));
        let negative = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.5, 0.0),
            C64::new(-0.5, 0.0),
        ]));
        assert!(matches!(DensityMatrix::new(negative), Err(Error::Contract(_))));
        let mut skew = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        skew[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(HermitianOperator::new(skew), Err(Error::Contract(_))));
    }

    #[test]
    fn csv_layout() {
        let m = Axis::Y.single_site();
        let csv = matrix_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), 4);
    }
}
