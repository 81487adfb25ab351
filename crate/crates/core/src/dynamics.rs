//! Conditional bath propagators and the joint qubit–bath state.
//!
//! Only the two qutrit levels forming the qubit are simulated. The bath
//! evolves under `H_E + s·V` with `s = +1` for pointer state `m = 1` and
//! `s = 0` or `-1` for the lower pointer state, depending on the qubit.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::env_model::EnvironmentModel;
use crate::numerics::{eigh, expm_from_eigen, EigenDecomposition, UnitaryOperator};
use crate::spin_algebra::{
    build_bath_hamiltonian, build_coupling_operator, DensityMatrix, HermitianOperator,
};
use crate::{CMatrix, Error, Result, C64};

/// Which pair of NV levels forms the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QubitChoice {
    /// `m = 0` and `m = 1`.
    ZeroOne,
    /// `m = -1` and `m = 1`.
    MinusOneOne,
}

impl QubitChoice {
    pub const ALL: [QubitChoice; 2] = [QubitChoice::ZeroOne, QubitChoice::MinusOneOne];

    /// Coefficient of `V` in the bath Hamiltonian of the lower pointer state.
    pub fn sign_n(self) -> i32 {
        match self {
            QubitChoice::ZeroOne => 0,
            QubitChoice::MinusOneOne => -1,
        }
    }

    /// Spin projection `m` of the lower pointer state.
    pub fn n_index(self) -> i32 {
        self.sign_n()
    }

    pub fn label(self) -> &'static str {
        match self {
            QubitChoice::ZeroOne => "01",
            QubitChoice::MinusOneOne => "-11",
        }
    }

    /// Filename-safe label.
    pub fn tag(self) -> &'static str {
        match self {
            QubitChoice::ZeroOne => "q01",
            QubitChoice::MinusOneOne => "qm11",
        }
    }
}

impl fmt::Display for QubitChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QubitChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "01" | "0,1" | "zero_one" | "ZeroOne" => Ok(QubitChoice::ZeroOne),
            "-11" | "-1,1" | "minus_one_one" | "MinusOneOne" => Ok(QubitChoice::MinusOneOne),
            other => Err(Error::config(
                "qubit",
                format!("unknown qubit `{other}`, expected `01` or `-11`"),
            )),
        }
    }
}

impl Serialize for QubitChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for QubitChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Initial qubit state `a|n⟩ + b|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitAmplitudes {
    a: C64,
    b: C64,
}

impl QubitAmplitudes {
    pub const NORM_TOLERANCE: f64 = 1.0e-12;

    pub fn new(a: C64, b: C64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if (norm - 1.0).abs() >= Self::NORM_TOLERANCE {
            return Err(Error::config(
                "amplitudes",
                format!("|a|^2 + |b|^2 must be 1, got {norm}"),
            ));
        }
        Ok(QubitAmplitudes { a, b })
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn b(&self) -> C64 {
        self.b
    }
}

impl Default for QubitAmplitudes {
    /// Equal superposition.
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        QubitAmplitudes {
            a: C64::new(h, 0.0),
            b: C64::new(h, 0.0),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmplitudesRepr {
    a: [f64; 2],
    b: [f64; 2],
}

impl Serialize for QubitAmplitudes {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AmplitudesRepr {
            a: [self.a.re, self.a.im],
            b: [self.b.re, self.b.im],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QubitAmplitudes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = AmplitudesRepr::deserialize(d)?;
        QubitAmplitudes::new(C64::new(r.a[0], r.a[1]), C64::new(r.b[0], r.b[1]))
            .map_err(serde::de::Error::custom)
    }
}

/// One of the two qubit pointer states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointer {
    /// The lower state, `m = 0` or `m = -1`.
    N,
    /// `m = 1`.
    One,
}

#[derive(Debug, Clone)]
pub struct ConditionalPropagators {
    pub w_n: UnitaryOperator,
    pub w_1: UnitaryOperator,
    pub t: f64,
}

impl ConditionalPropagators {
    pub fn get(&self, pointer: Pointer) -> &UnitaryOperator {
        match pointer {
            Pointer::N => &self.w_n,
            Pointer::One => &self.w_1,
        }
    }

    pub fn bath_dim(&self) -> usize {
        self.w_1.dim()
    }
}

/// Spectral decompositions of the two conditional bath Hamiltonians,
/// computed once per (environment, qubit) and reused for every time.
#[derive(Debug, Clone)]
pub struct ConditionalEvolution {
    qubit: QubitChoice,
    lower: EigenDecomposition,
    upper: EigenDecomposition,
}

impl ConditionalEvolution {
    pub fn new(env: &EnvironmentModel, qubit: QubitChoice) -> Self {
        let h_e = build_bath_hamiltonian(env);
        let v = build_coupling_operator(env);
        let s = C64::new(f64::from(qubit.sign_n()), 0.0);
        let lower = HermitianOperator::symmetrized(h_e.matrix() + v.matrix() * s);
        let upper = HermitianOperator::symmetrized(h_e.matrix() + v.matrix());
        ConditionalEvolution {
            qubit,
            lower: eigh(&lower),
            upper: eigh(&upper),
        }
    }

    pub fn qubit(&self) -> QubitChoice {
        self.qubit
    }

    pub fn bath_dim(&self) -> usize {
        self.upper.dim()
    }

    pub fn propagators(&self, t: f64) -> Result<ConditionalPropagators> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!(
                "evolution time must be finite and non-negative, got {t}"
            )));
        }
        Ok(ConditionalPropagators {
            w_n: expm_from_eigen(&self.lower, t),
            w_1: expm_from_eigen(&self.upper, t),
            t,
        })
    }
}

/// `(w_n(t), w_1(t))` for `qubit` in `env` at time `t` (µs).
pub fn conditional_propagators(
    env: &EnvironmentModel,
    qubit: QubitChoice,
    t: f64,
) -> Result<ConditionalPropagators> {
    ConditionalEvolution::new(env, qubit).propagators(t)
}

fn check_dims(props: &ConditionalPropagators, r0: &DensityMatrix) -> Result<()> {
    if r0.dim() != props.bath_dim() {
        return Err(Error::Shape(format!(
            "bath state is {0}x{0} but propagators act on dimension {1}",
            r0.dim(),
            props.bath_dim()
        )));
    }
    Ok(())
}

/// `R_ij(t) = w_i R(0) w_j†`.
pub fn conditional_state(
    props: &ConditionalPropagators,
    r0: &DensityMatrix,
    i: Pointer,
    j: Pointer,
) -> Result<CMatrix> {
    check_dims(props, r0)?;
    let wi = props.get(i).matrix();
    let wj = props.get(j).matrix();
    Ok(wi * r0.matrix() * wj.adjoint())
}

/// `R_ii(t)`, a state by construction.
pub fn conditional_density(
    props: &ConditionalPropagators,
    r0: &DensityMatrix,
    i: Pointer,
) -> Result<DensityMatrix> {
    conditional_state(props, r0, i, i).map(DensityMatrix::from_conjugation)
}

/// The joint qubit–bath density matrix, laid out as 2x2 blocks of the
/// bath dimension with the lower pointer state first.
#[derive(Debug, Clone)]
pub struct JointState {
    pub matrix: DensityMatrix,
    pub bath_dim: usize,
}

impl JointState {
    /// Block `(i, j)` with `0` the lower pointer state.
    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        let d = self.bath_dim;
        self.matrix.matrix().view((i * d, j * d), (d, d)).clone_owned()
    }

    /// Partial trace over the qubit.
    pub fn bath_state(&self) -> CMatrix {
        self.block(0, 0) + self.block(1, 1)
    }

    /// Partial trace over the bath.
    pub fn qubit_state(&self) -> [[C64; 2]; 2] {
        let mut q = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in q.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.block(i, j).trace();
            }
        }
        q
    }
}

/// Assembles
/// ```text
/// | |a|² R_nn    a b* R_n1 |
/// | a* b R_1n    |b|² R_11 |
/// ```
pub fn joint_state(
    props: &ConditionalPropagators,
    r0: &DensityMatrix,
    amps: &QubitAmplitudes,
) -> Result<JointState> {
    check_dims(props, r0)?;
    let d = props.bath_dim();
    let (a, b) = (amps.a(), amps.b());
    let r_nn = conditional_state(props, r0, Pointer::N, Pointer::N)?;
    let r_n1 = conditional_state(props, r0, Pointer::N, Pointer::One)?;
    let r_11 = conditional_state(props, r0, Pointer::One, Pointer::One)?;
    let mut sigma = CMatrix::zeros(2 * d, 2 * d);
    sigma
        .view_mut((0, 0), (d, d))
        .copy_from(&(r_nn * C64::new(a.norm_sqr(), 0.0)));
    let off = r_n1 * (a * b.conj());
    sigma.view_mut((d, 0), (d, d)).copy_from(&off.adjoint());
    sigma.view_mut((0, d), (d, d)).copy_from(&off);
    sigma
        .view_mut((d, d), (d, d))
        .copy_from(&(r_11 * C64::new(b.norm_sqr(), 0.0)));
    Ok(JointState {
        matrix: DensityMatrix::from_conjugation(sigma),
        bath_dim: d,
    })
}

/// Qubit coherence factor `Tr[w_n R(0) w_1†]`; the qubit's off-diagonal
/// element is `a b*` times this.
pub fn coherence(props: &ConditionalPropagators, r0: &DensityMatrix) -> Result<C64> {
    check_dims(props, r0)?;
    // Tr[w_n R w_1†] = Σ_ij (w_n R)_ij conj((w_1)_ij)
    let wr = props.w_n.matrix() * r0.matrix();
    Ok(wr
        .iter()
        .zip(props.w_1.matrix().iter())
        .map(|(x, y)| x * y.conj())
        .sum())
}
