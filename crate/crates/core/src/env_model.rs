//! Nuclear bath geometry on the diamond lattice and the secular dipolar
//! hyperfine couplings between the NV electron spin and each ¹³C nucleus.
//!
//! The qubit sits at the lattice origin. Positions are expressed in the cubic
//! crystal frame, whose z axis is also the quantization axis of the qubit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Planck constant in J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Largest supported bath; the joint space is then 2^11 = 2048 dimensional.
pub const MAX_NUCLEI: usize = 10;

/// Physical constants entering the couplings and Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Zero-field splitting in GHz. Carried for the record only: the free
    /// qutrit evolution drops out of every propagator.
    pub delta_zfs: f64,
    /// Electron gyromagnetic ratio in GHz/T.
    pub gamma_e: f64,
    /// ¹³C gyromagnetic ratio in MHz/T.
    pub gamma_n: f64,
    /// μ0/4π in T²·m³/J.
    pub mu0_over_4pi: f64,
    /// Cubic lattice constant of diamond in Å.
    pub lattice_constant: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            delta_zfs: 2.87,
            gamma_e: 28.08,
            gamma_n: 10.71,
            mu0_over_4pi: 1.0e-7,
            lattice_constant: 3.567,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta_zfs", self.delta_zfs),
            ("gamma_e", self.gamma_e),
            ("gamma_n", self.gamma_n),
            ("mu0_over_4pi", self.mu0_over_4pi),
            ("lattice_constant", self.lattice_constant),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(
                    format!("constants.{name}"),
                    format!("must be finite and strictly positive, got {value}"),
                ));
            }
        }
        Ok(())
    }

    /// Dipolar prefactor `(μ0/4π)·h·γe·γn` in MHz·Å³, i.e. the coupling
    /// strength `C/r³` in MHz once divided by `r³` in Å³.
    pub fn dipolar_prefactor(&self) -> f64 {
        let gamma_e_hz = self.gamma_e * 1.0e9;
        let gamma_n_hz = self.gamma_n * 1.0e6;
        // m³ -> Å³ is 1e30, Hz -> MHz is 1e-6.
        self.mu0_over_4pi * PLANCK * gamma_e_hz * gamma_n_hz * 1.0e30 * 1.0e-6
    }
}

/// Angular part of the `A^{z,j}` hyperfine tensor row.
///
/// Implementations return the dimensionless factor that multiplies `C/r³`
/// for `j = x, y, z`. New variants are added to a [`CouplingRegistry`] and
/// selected by name from configuration.
pub trait CouplingForm: Send + Sync {
    fn name(&self) -> &'static str;

    fn describe(&self) -> &'static str;

    /// `unit` is the normalized displacement `r / |r|`.
    fn angular_factors(&self, unit: [f64; 3]) -> [f64; 3];
}

/// Secular dipolar tensor: `δ_{zj} − 3 r̂_j r̂_z`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardDipolar;

impl CouplingForm for StandardDipolar {
    fn name(&self) -> &'static str {
        "standard"
    }

    fn describe(&self) -> &'static str {
        "secular dipolar tensor, delta_zj - 3 r_j r_z / r^2"
    }

    fn angular_factors(&self, unit: [f64; 3]) -> [f64; 3] {
        let z = unit[2];
        [-3.0 * unit[0] * z, -3.0 * unit[1] * z, 1.0 - 3.0 * z * z]
    }
}

/// The form with a unit constant in every component: `1 − 3 r̂_j r̂_z`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitOffsetDipolar;

impl CouplingForm for UnitOffsetDipolar {
    fn name(&self) -> &'static str {
        "paper"
    }

    fn describe(&self) -> &'static str {
        "literal form with unit offset on every component, 1 - 3 r_j r_z / r^2"
    }

    fn angular_factors(&self, unit: [f64; 3]) -> [f64; 3] {
        let z = unit[2];
        [
            1.0 - 3.0 * unit[0] * z,
            1.0 - 3.0 * unit[1] * z,
            1.0 - 3.0 * z * z,
        ]
    }
}

/// Name-keyed set of coupling tensor forms.
#[derive(Clone)]
pub struct CouplingRegistry {
    forms: BTreeMap<String, Arc<dyn CouplingForm>>,
}

impl Default for CouplingRegistry {
    /// Registry holding `standard` and `paper` (alias `paper_literal`).
    fn default() -> Self {
        let mut registry = CouplingRegistry::empty();
        registry.register(Arc::new(StandardDipolar));
        registry.register(Arc::new(UnitOffsetDipolar));
        registry.alias("paper_literal", "paper");
        registry
    }
}

impl CouplingRegistry {
    pub fn empty() -> Self {
        CouplingRegistry {
            forms: BTreeMap::new(),
        }
    }

    /// Registers `form` under its own name, replacing any previous entry.
    pub fn register(&mut self, form: Arc<dyn CouplingForm>) {
        self.forms.insert(form.name().to_string(), form);
    }

    fn alias(&mut self, alias: &str, target: &str) {
        if let Some(form) = self.forms.get(target).cloned() {
            self.forms.insert(alias.to_string(), form);
        }
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn CouplingForm>> {
        self.forms.get(name).cloned().ok_or_else(|| {
            Error::config(
                "coupling_form",
                format!(
                    "unknown coupling form `{name}` (available: {})",
                    self.names().join(", ")
                ),
            )
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.forms.keys().map(String::as_str).collect()
    }
}

/// Hyperfine coupling row `(A^{z,x}, A^{z,y}, A^{z,z})` in MHz for a nucleus
/// displaced by `position` (Å) from the qubit.
pub fn compute_coupling(
    position: [f64; 3],
    constants: &PhysicalConstants,
    form: &dyn CouplingForm,
) -> Result<[f64; 3]> {
    let r2: f64 = position.iter().map(|x| x * x).sum();
    let r = r2.sqrt();
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!(
            "coupling requires a nonzero finite displacement, got {position:?}"
        )));
    }
    let unit = position.map(|x| x / r);
    let strength = constants.dipolar_prefactor() / (r2 * r);
    Ok(form.angular_factors(unit).map(|f| strength * f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearSpin {
    /// Displacement from the qubit in Å.
    pub position: [f64; 3],
    /// `(A^{z,x}, A^{z,y}, A^{z,z})` in MHz.
    pub coupling: [f64; 3],
    /// Polarization along z, in [-1, 1].
    pub polarization: f64,
}

/// A bath of K nuclei in a field `b_z` along the qubit axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentModel {
    pub nuclei: Vec<NuclearSpin>,
    /// Field along z in T.
    pub b_z: f64,
    pub constants: PhysicalConstants,
    /// Registry name of the coupling form the couplings were built with.
    pub coupling_form: String,
}

impl EnvironmentModel {
    /// Builds an unpolarized bath from explicit positions, computing every
    /// coupling with `form`.
    pub fn from_positions(
        positions: &[[f64; 3]],
        b_z: f64,
        constants: PhysicalConstants,
        form: &dyn CouplingForm,
    ) -> Result<Self> {
        constants.validate()?;
        if positions.is_empty() || positions.len() > MAX_NUCLEI {
            return Err(Error::config(
                "nucleus_count",
                format!(
                    "must be between 1 and {MAX_NUCLEI}, got {}",
                    positions.len()
                ),
            ));
        }
        if !b_z.is_finite() {
            return Err(Error::config("b_z", "must be finite"));
        }
        for (i, a) in positions.iter().enumerate() {
            for b in &positions[..i] {
                if a == b {
                    return Err(Error::Domain(format!(
                        "duplicate nucleus position {a:?}"
                    )));
                }
            }
        }
        let nuclei = positions
            .iter()
            .map(|&position| {
                Ok(NuclearSpin {
                    position,
                    coupling: compute_coupling(position, &constants, form)?,
                    polarization: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EnvironmentModel {
            nuclei,
            b_z,
            constants,
            coupling_form: form.name().to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.nuclei.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nuclei.is_empty()
    }

    /// Bath Hilbert space dimension, 2^K.
    pub fn bath_dim(&self) -> usize {
        1 << self.nuclei.len()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.nuclei.iter().map(|n| n.position).collect()
    }

    pub fn with_field(&self, b_z: f64) -> Self {
        EnvironmentModel {
            b_z,
            ..self.clone()
        }
    }

    /// CSV with columns `index,x_A,y_A,z_A,Azx_MHz,Azy_MHz,Azz_MHz`.
    pub fn geometry_csv(&self) -> String {
        let mut out = String::from("index,x_A,y_A,z_A,Azx_MHz,Azy_MHz,Azz_MHz\n");
        for (i, n) in self.nuclei.iter().enumerate() {
            let _ = write!(out, "{i}");
            for v in n.position.iter().chain(n.coupling.iter()) {
                let _ = write!(out, ",{}", crate::scenario::fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Returns a copy of `env` in which every nucleus has polarization `p`.
pub fn set_uniform_polarization(env: &EnvironmentModel, p: f64) -> Result<EnvironmentModel> {
    if !(-1.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "polarization must lie in [-1, 1], got {p}"
        )));
    }
    let mut out = env.clone();
    for n in &mut out.nuclei {
        n.polarization = p;
    }
    Ok(out)
}

/// Diamond lattice sites in the shell `r_min <= |r| <= r_max`, in quarter
/// lattice-constant integer coordinates, sorted lexicographically.
///
/// Sites are the FCC points (even coordinates summing to 0 mod 4) plus the
/// second basis atom shifted by (1,1,1) (odd coordinates summing to 3 mod 4).
pub fn shell_sites(r_min: f64, r_max: f64, lattice_constant: f64) -> Vec<[i64; 3]> {
    let quarter = lattice_constant / 4.0;
    let bound = (r_max / quarter).ceil() as i64;
    let mut sites = Vec::new();
    for x in -bound..=bound {
        for y in -bound..=bound {
            for z in -bound..=bound {
                if !is_diamond_site([x, y, z]) {
                    continue;
                }
                let r = quarter * ((x * x + y * y + z * z) as f64).sqrt();
                if r >= r_min && r <= r_max {
                    sites.push([x, y, z]);
                }
            }
        }
    }
    sites
}

pub fn is_diamond_site(q: [i64; 3]) -> bool {
    let sum = (q[0] + q[1] + q[2]).rem_euclid(4);
    let parities = q.map(|c| c.rem_euclid(2));
    match parities {
        [0, 0, 0] => sum == 0,
        [1, 1, 1] => sum == 3,
        _ => false,
    }
}

/// Draws `count` distinct diamond lattice positions (Å) uniformly without
/// replacement from the shell `[r_min, r_max]` around the qubit.
///
/// The candidate sites are enumerated in lexicographic order and a partial
/// Fisher–Yates shuffle driven by ChaCha8 seeded with `seed` picks the
/// first `count`, so the draw is fixed by `seed` alone.
pub fn generate_bath(
    seed: u64,
    count: usize,
    r_min: f64,
    r_max: f64,
    constants: &PhysicalConstants,
) -> Result<Vec<[f64; 3]>> {
    constants.validate()?;
    if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
        return Err(Error::config(
            "shell",
            format!("require 0 < r_min < r_max, got r_min={r_min}, r_max={r_max}"),
        ));
    }
    if count == 0 {
        return Err(Error::config("nucleus_count", "must be at least 1"));
    }
    let mut sites = shell_sites(r_min, r_max, constants.lattice_constant);
    if sites.len() < count {
        return Err(Error::config(
            "shell",
            format!(
                "shell [{r_min}, {r_max}] Å holds only {} lattice sites, {count} requested",
                sites.len()
            ),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = sites.partial_shuffle(&mut rng, count);
    let quarter = constants.lattice_constant / 4.0;
    Ok(chosen
        .iter()
        .map(|q| q.map(|c| c as f64 * quarter))
        .collect())
}
