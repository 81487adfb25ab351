//! Negativity of the joint state, fidelity of the conditional bath states,
//! and the time series that compares them.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    coherence, conditional_density, joint_state, ConditionalEvolution, ConditionalPropagators,
    JointState, Pointer, QubitAmplitudes, QubitChoice,
};
use crate::env_model::EnvironmentModel;
use crate::numerics::{
    central_difference, commutator, eigvalsh, max_abs, partial_transpose_qubit, sqrtm_psd,
    trace_sqrt_psd,
};
use crate::spin_algebra::{initial_bath_state, DensityMatrix, HermitianOperator};
use crate::{Error, Result};

/// Partial-transpose eigenvalues smaller than this in magnitude count as 0.
pub const NEGATIVITY_EIGEN_THRESHOLD: f64 = 1.0e-12;

/// Roundoff allowed outside [0, 1] before a fidelity is rejected.
pub const FIDELITY_ROUNDOFF: f64 = 1.0e-9;

/// Derivative magnitude (1/µs) below which a sign comparison is skipped.
pub const DERIVATIVE_SIGN_THRESHOLD: f64 = 1.0e-4;

/// Sum of the moduli of the negative eigenvalues of the qubit partial
/// transpose of `sigma`.
pub fn negativity(sigma: &JointState) -> Result<f64> {
    let pt = partial_transpose_qubit(sigma.matrix.matrix(), sigma.bath_dim)?;
    let spectrum = eigvalsh(&HermitianOperator::symmetrized(pt));
    Ok(spectrum
        .into_iter()
        .filter(|&l| l < -NEGATIVITY_EIGEN_THRESHOLD)
        .fold(0.0, |acc, l| acc - l))
}

/// Uhlmann fidelity `[Tr sqrt(sqrt(A) B sqrt(A))]²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "fidelity of {0}x{0} and {1}x{1} states",
            a.dim(),
            b.dim()
        )));
    }
    let root_a = sqrtm_psd(a.operator())?;
    let inner = root_a.matrix() * b.matrix() * root_a.matrix();
    let f = trace_sqrt_psd(&HermitianOperator::symmetrized(inner))?.powi(2);
    if !(-FIDELITY_ROUNDOFF..=1.0 + FIDELITY_ROUNDOFF).contains(&f) {
        return Err(Error::Contract(format!("fidelity {f} outside [0, 1]")));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// No qubit–bath entanglement at this instant iff the two conditional bath
/// states coincide; tested entrywise against `eps`.
pub fn separability_check(r_nn: &DensityMatrix, r_11: &DensityMatrix, eps: f64) -> bool {
    r_nn.dim() == r_11.dim() && max_abs(&(r_nn.matrix() - r_11.matrix())) < eps
}

/// `max |w_n w_1 − w_1 w_n|`.
pub fn commutator_witness(props: &ConditionalPropagators) -> f64 {
    max_abs(&commutator(props.w_n.matrix(), props.w_1.matrix()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricPoint {
    pub t: f64,
    pub negativity: f64,
    pub one_minus_fidelity: f64,
    pub coherence_mod: f64,
    pub commutator_norm: f64,
}

/// All metrics at one time, with the conditional states kept for checks.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub point: MetricPoint,
    pub props: ConditionalPropagators,
    pub joint: JointState,
    pub r_nn: DensityMatrix,
    pub r_11: DensityMatrix,
}

/// Evaluates one time point.
pub fn snapshot(
    evolution: &ConditionalEvolution,
    r0: &DensityMatrix,
    amps: &QubitAmplitudes,
    t: f64,
) -> Result<Snapshot> {
    let props = evolution.propagators(t)?;
    let r_nn = conditional_density(&props, r0, Pointer::N)?;
    let r_11 = conditional_density(&props, r0, Pointer::One)?;
    let joint = joint_state(&props, r0, amps)?;
    let point = MetricPoint {
        t,
        negativity: negativity(&joint)?,
        one_minus_fidelity: 1.0 - fidelity(&r_nn, &r_11)?,
        coherence_mod: coherence(&props, r0)?.norm(),
        commutator_norm: commutator_witness(&props),
    };
    Ok(Snapshot {
        point,
        props,
        joint,
        r_nn,
        r_11,
    })
}

/// Fraction of grid points where `dN/dt` and `d(1-F)/dt` share a sign,
/// counted only where both exceed the threshold in magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignAgreement {
    pub agreeing: usize,
    pub compared: usize,
    /// `None` when no point passes the threshold.
    pub fraction: Option<f64>,
}

/// Least-squares slope of N against 1−F through the origin, plus the
/// spread of the pointwise ratio where 1−F is not negligible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioFit {
    pub slope: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSeries {
    pub qubit: QubitChoice,
    pub points: Vec<MetricPoint>,
    pub d_negativity_dt: Vec<f64>,
    pub d_one_minus_fidelity_dt: Vec<f64>,
}

impl MetricSeries {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn max_negativity(&self) -> f64 {
        self.points.iter().map(|p| p.negativity).fold(0.0, f64::max)
    }

    pub fn max_one_minus_fidelity(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.one_minus_fidelity)
            .fold(0.0, f64::max)
    }

    pub fn min_coherence(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.coherence_mod)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sign_agreement(&self, threshold: f64) -> SignAgreement {
        let (mut agreeing, mut compared) = (0, 0);
        for (dn, df) in self.d_negativity_dt.iter().zip(&self.d_one_minus_fidelity_dt) {
            if dn.abs() > threshold && df.abs() > threshold {
                compared += 1;
                if dn.signum() == df.signum() {
                    agreeing += 1;
                }
            }
        }
        SignAgreement {
            agreeing,
            compared,
            fraction: (compared > 0).then(|| agreeing as f64 / compared as f64),
        }
    }

    pub fn ratio_fit(&self, min_one_minus_fidelity: f64) -> RatioFit {
        let (mut num, mut den) = (0.0, 0.0);
        let mut ratios = Vec::new();
        for p in &self.points {
            num += p.negativity * p.one_minus_fidelity;
            den += p.one_minus_fidelity * p.one_minus_fidelity;
            if p.one_minus_fidelity > min_one_minus_fidelity {
                ratios.push(p.negativity / p.one_minus_fidelity);
            }
        }
        let n = ratios.len();
        RatioFit {
            slope: (den > 0.0).then(|| num / den),
            mean_ratio: (n > 0).then(|| ratios.iter().sum::<f64>() / n as f64),
            min_ratio: ratios.iter().copied().reduce(f64::min),
            max_ratio: ratios.iter().copied().reduce(f64::max),
        }
    }
}

/// `n_points` uniform samples of `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n_points: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::config("t_max", format!("must be positive, got {t_max}")));
    }
    if n_points < 3 {
        return Err(Error::config(
            "n_steps",
            format!("at least 3 grid points are needed for central differences, got {n_points}"),
        ));
    }
    let last = (n_points - 1) as f64;
    Ok((0..n_points).map(|i| t_max * i as f64 / last).collect())
}

/// Returns the spacing of a strictly increasing uniform grid.
pub fn grid_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 3 {
        return Err(Error::config(
            "grid",
            format!("need at least 3 points, got {}", grid.len()),
        ));
    }
    if grid[0] < 0.0 {
        return Err(Error::config("grid", "times must be non-negative"));
    }
    let dt = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::config("grid", "times must be strictly increasing"));
    }
    for w in grid.windows(2) {
        let step = w[1] - w[0];
        if step.is_nan() || step <= 0.0 || (step - dt).abs() > 1e-9 * dt {
            return Err(Error::config(
                "grid",
                format!("grid must be uniform: step {step} differs from {dt}"),
            ));
        }
    }
    Ok(dt)
}

/// Evaluates every metric on `grid` and appends the time derivatives of the
/// negativity and of 1−F. Grid points run in parallel; the output keeps the
/// grid order.
pub fn metric_series(
    env: &EnvironmentModel,
    qubit: QubitChoice,
    amps: &QubitAmplitudes,
    grid: &[f64],
) -> Result<MetricSeries> {
    let dt = grid_step(grid)?;
    let r0 = initial_bath_state(env)?;
    let evolution = ConditionalEvolution::new(env, qubit);
    let points = grid
        .par_iter()
        .map(|&t| snapshot(&evolution, &r0, amps, t).map(|s| s.point))
        .collect::<Result<Vec<_>>>()?;
    let neg: Vec<f64> = points.iter().map(|p| p.negativity).collect();
    let omf: Vec<f64> = points.iter().map(|p| p.one_minus_fidelity).collect();
    Ok(MetricSeries {
        qubit,
        d_negativity_dt: central_difference(&neg, dt)?,
        d_one_minus_fidelity_dt: central_difference(&omf, dt)?,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{
        generate_bath, set_uniform_polarization, PhysicalConstants, StandardDipolar,
    };
    use crate::spin_algebra::test_support::{random_hermitian, random_state};
    use crate::{CMatrix, C64};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(seed: u64, b_z: f64, p: f64) -> EnvironmentModel {
        let c = PhysicalConstants::default();
        let pos = generate_bath(seed, 5, 2.5, 8.0, &c).unwrap();
        let e = EnvironmentModel::from_positions(&pos, b_z, c, &StandardDipolar).unwrap();
        set_uniform_polarization(&e, p).unwrap()
    }

    fn diag_state(values: &[f64]) -> DensityMatrix {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        DensityMatrix::new(CMatrix::from_diagonal(&DVector::from_vec(v))).unwrap()
    }

    fn joint(m: CMatrix, bath_dim: usize) -> JointState {
        JointState {
            matrix: DensityMatrix::new(m).unwrap(),
            bath_dim,
        }
    }

    #[test]
    fn negativity_of_product_state_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_state(&mut rng, 2);
        let r = random_state(&mut rng, 4);
        let s = q.matrix().kronecker(r.matrix());
        assert!(negativity(&joint(s, 4)).unwrap() < 1e-12);
    }

    #[test]
    fn negativity_of_bell_with_spectator() {
        let z = C64::new(0.0, 0.0);
        let h = C64::new(0.5, 0.0);
        let bell = CMatrix::from_row_slice(4, 4, &[h, z, z, h, z, z, z, z, z, z, z, z, h, z, z, h]);
        let spectator = diag_state(&[1.0, 0.0]);
        // bath = (Bell partner) ⊗ spectator; the qubit is the leading factor.
        let s = bell.kronecker(spectator.matrix());
        assert!((negativity(&joint(s, 4)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_state(&mut rng, 8);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);

        let up = diag_state(&[1.0, 0.0]);
        let down = diag_state(&[0.0, 1.0]);
        assert!(fidelity(&up, &down).unwrap().abs() < 1e-15);

        let f = fidelity(&diag_state(&[0.5, 0.5]), &diag_state(&[0.7, 0.3])).unwrap();
        let expected = (0.35f64.sqrt() + 0.15f64.sqrt()).powi(2);
        assert!((f - expected).abs() < 1e-12);
        assert!((f - 0.9583).abs() < 1e-4);

        assert!(matches!(fidelity(&up, &rho), Err(Error::Shape(_))));
    }

    #[test]
    fn fidelity_symmetry_and_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let a = random_state(&mut rng, 16);
            let b = random_state(&mut rng, 16);
            let fab = fidelity(&a, &b).unwrap();
            assert!((fab - fidelity(&b, &a).unwrap()).abs() < 1e-9);
            let u = crate::numerics::expm_unitary(&random_hermitian(&mut rng, 16), 1.0);
            let conj = |x: &DensityMatrix| {
                DensityMatrix::new(u.matrix() * x.matrix() * u.matrix().adjoint()).unwrap()
            };
            assert!((fidelity(&conj(&a), &conj(&b)).unwrap() - fab).abs() < 1e-9);
        }
    }

    #[test]
    fn fidelity_matches_product_eigenvalue_route() {
        // A·B is similar to sqrt(A)·B·sqrt(A), so sqrt-fidelity is also the
        // sum of square roots of the (real, non-negative) eigenvalues of A·B.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let a = random_state(&mut rng, 8);
        let b = random_state(&mut rng, 8);
        let prod = a.matrix() * b.matrix();
        let eig = prod.schur().eigenvalues().expect("complex schur");
        assert!(eig.iter().all(|z| z.im.abs() < 1e-10 && z.re > -1e-12));
        let route: f64 = eig.iter().map(|z| z.re.max(0.0).sqrt()).sum();
        let f = fidelity(&a, &b).unwrap();
        assert!((route.powi(2) - f).abs() < 1e-9, "{} vs {}", route.powi(2), f);
    }

    #[test]
    fn separability_examples() {
        let e = env(4, 0.2, 0.0);
        let r0 = initial_bath_state(&e).unwrap();
        let evo = ConditionalEvolution::new(&e, QubitChoice::ZeroOne);
        let amps = QubitAmplitudes::default();
        for t in [0.0, 3.0, 20.0] {
            let s = snapshot(&evo, &r0, &amps, t).unwrap();
            assert!(separability_check(&s.r_nn, &s.r_11, 1e-10));
            assert!(s.point.negativity < 1e-8);
        }
        let e = env(4, 0.2, 0.7);
        let r0 = initial_bath_state(&e).unwrap();
        let evo = ConditionalEvolution::new(&e, QubitChoice::ZeroOne);
        let s = snapshot(&evo, &r0, &amps, 0.0).unwrap();
        assert!(separability_check(&s.r_nn, &s.r_11, 1e-10));
        let s = snapshot(&evo, &r0, &amps, 5.0).unwrap();
        assert!(!separability_check(&s.r_nn, &s.r_11, 1e-10));
        assert!(s.point.negativity > 1e-8);
    }

    #[test]
    fn commutator_examples() {
        for q in QubitChoice::ALL {
            let evo = ConditionalEvolution::new(&env(5, 0.0, 0.5), q);
            assert_eq!(commutator_witness(&evo.propagators(0.0).unwrap()), 0.0);
            for t in [1.0, 7.0, 33.0] {
                assert!(commutator_witness(&evo.propagators(t).unwrap()) < 1e-10);
            }
            let evo = ConditionalEvolution::new(&env(5, 0.2, 0.5), q);
            let max = [1.0, 7.0, 33.0]
                .iter()
                .map(|&t| commutator_witness(&evo.propagators(t).unwrap()))
                .fold(0.0, f64::max);
            assert!(max > 1e-6);
        }
    }

    #[test]
    fn grid_validation() {
        let g = uniform_grid(50.0, 501).unwrap();
        assert_eq!(g.len(), 501);
        assert!((grid_step(&g).unwrap() - 0.1).abs() < 1e-15);
        assert!(grid_step(&[0.0, 1.0, 3.0]).is_err());
        assert!(grid_step(&[0.0, 1.0]).is_err());
        assert!(grid_step(&[0.0, 0.0, 0.0]).is_err());
        match uniform_grid(5.0, 2) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "n_steps"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn series_starts_unentangled() {
        let grid = uniform_grid(10.0, 41).unwrap();
        for q in QubitChoice::ALL {
            let s = metric_series(&env(6, 0.2, 0.4), q, &QubitAmplitudes::default(), &grid)
                .unwrap();
            assert!(s.points[0].negativity < 1e-12);
            assert!(s.points[0].one_minus_fidelity < 1e-12);
            assert_eq!(s.times(), grid);
            assert_eq!(s.d_negativity_dt.len(), grid.len());
            for p in &s.points {
                assert!((0.0..=0.5).contains(&p.negativity));
                assert!((0.0..=1.0).contains(&p.one_minus_fidelity));
            }
        }
    }

    #[test]
    fn pure_bath_schmidt_identity() {
        let grid = uniform_grid(20.0, 81).unwrap();
        for q in QubitChoice::ALL {
            for b in [0.0, 0.2] {
                let s = metric_series(&env(8, b, 1.0), q, &QubitAmplitudes::default(), &grid)
                    .unwrap();
                for p in &s.points {
                    let oracle = 0.5 * p.one_minus_fidelity.sqrt();
                    assert!((p.negativity - oracle).abs() < 1e-8, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn sign_agreement_counts() {
        let s = MetricSeries {
            qubit: QubitChoice::ZeroOne,
            points: vec![],
            d_negativity_dt: vec![1.0, -1.0, 1e-6, 2.0],
            d_one_minus_fidelity_dt: vec![0.5, 0.5, 1.0, 3.0],
        };
        let a = s.sign_agreement(1e-4);
        assert_eq!((a.agreeing, a.compared), (2, 3));
        assert!((a.fraction.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
