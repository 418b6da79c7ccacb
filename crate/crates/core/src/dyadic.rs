//! Littlewood–Paley system on the spectral axis.
//!
//! `χ = 1` on `(-∞, 1]`, `χ = 0` on `[2, ∞)` and `χ(λ) = 1 - B(λ - 1)` in between,
//! where `B` is the normalized primitive of a smooth bump on `[0, 1]`. Then
//! `φ_0(λ) = χ(λ) - χ(2λ)`, `φ_j(λ) = φ_0(2^{-j}λ)`, `ψ(μ) = χ(√max(μ, 0))` and
//! `Φ_j = φ_{j-1} + φ_j + φ_{j+1}`. Partial sums of `φ_j` telescope, so the
//! partition of unity holds up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::SpectralOperator;
use crate::quad;

/// Transition profile of `χ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Primitive of `exp(-1/(t(1-t)))`.
    Standard,
    /// Primitive of `exp(-k/(t(1-t)))`, the `k`-th power of the standard bump.
    BumpPower(u32),
    /// Square of the `BumpPower(k)` primitive. Not symmetric about `1/2`, so
    /// unlike the other profiles it moves `φ_0(3/2)` away from `1/2`.
    Squared(u32),
}

impl Profile {
    fn exponent(self) -> f64 {
        match self {
            Profile::Standard => 1.0,
            Profile::BumpPower(k) | Profile::Squared(k) => k as f64,
        }
    }
}

/// Normalized bump primitive `B(x) = ∫_0^x b / ∫_0^1 b`.
#[derive(Clone, Copy, Debug)]
struct Transition {
    k: f64,
    mass: f64,
    squared: bool,
}

impl Transition {
    fn new(profile: Profile) -> Self {
        let k = profile.exponent();
        let half = Self::partial(k, 0.5);
        Transition { k, mass: 2.0 * half, squared: matches!(profile, Profile::Squared(_)) }
    }

    fn partial(k: f64, x: f64) -> f64 {
        quad::integrate(|t| (-k / (t * (1.0 - t))).exp(), 0.0, x, 4)
    }

    fn eval(&self, x: f64) -> f64 {
        let b = self.symmetric(x);
        if self.squared {
            b * b
        } else {
            b
        }
    }

    fn symmetric(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else if x <= 0.5 {
            Self::partial(self.k, x) / self.mass
        } else {
            1.0 - Self::partial(self.k, 1.0 - x) / self.mass
        }
    }
}

/// Which function of the system to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Chi,
    Phi(i32),
    Psi,
    FatPhi(i32),
}

/// The functions `χ, φ_j, ψ, Φ_j` and the active index window of an operator.
#[derive(Clone, Debug)]
pub struct DyadicSystem {
    profile: Profile,
    transition: Transition,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda0: f64,
    pub j_min: i32,
    pub j_max: i32,
}

impl DyadicSystem {
    /// Builds the system for a spectrum in `[λ_min, λ_max]`. When `λ_min ≤ 0`
    /// the lowest positive eigenvalue is unknown, so the window starts at `j = 1`
    /// and smaller frequencies are left to `ψ`.
    pub fn build(lambda_min: f64, lambda_max: f64, lambda0: f64) -> Result<Self> {
        Self::build_with_floor(lambda_min, lambda_max, lambda0, None)
    }

    /// Like [`DyadicSystem::build`], with the lowest positive eigenvalue given
    /// explicitly so the window covers every positive eigenvalue.
    pub fn build_with_floor(
        lambda_min: f64,
        lambda_max: f64,
        lambda0: f64,
        lowest_positive: Option<f64>,
    ) -> Result<Self> {
        Self::build_profile(Profile::Standard, lambda_min, lambda_max, lambda0, lowest_positive)
    }

    pub fn build_profile(
        profile: Profile,
        lambda_min: f64,
        lambda_max: f64,
        lambda0: f64,
        lowest_positive: Option<f64>,
    ) -> Result<Self> {
        if !(lambda_min.is_finite() && lambda_max.is_finite() && lambda0.is_finite()) {
            return Err(Error::InvalidSpectrumBounds("non-finite bounds".into()));
        }
        if lambda_max < lambda_min {
            return Err(Error::InvalidSpectrumBounds(format!("λ_max = {lambda_max} < λ_min = {lambda_min}")));
        }
        let need = (-lambda_min).max(0.0);
        if lambda0 < 0.0 || lambda0 * lambda0 < need * (1.0 - 1e-12) {
            return Err(Error::InvalidSpectrumBounds(format!(
                "λ_0² = {} does not dominate -λ_min = {need}",
                lambda0 * lambda0
            )));
        }
        if let Profile::BumpPower(0) | Profile::Squared(0) = profile {
            return Err(Error::InvalidParameter("bump power must be at least 1".into()));
        }
        let floor = if lambda_min > 0.0 { Some(lambda_min) } else { lowest_positive.filter(|&v| v > 0.0) };
        let j_min = match floor {
            Some(a) => a.sqrt().log2().floor() as i32 - 1,
            None => 1,
        };
        let j_max = if lambda_max > 0.0 { (lambda_max.sqrt().log2().ceil() as i32 + 1).max(j_min) } else { j_min };
        Ok(DyadicSystem {
            profile,
            transition: Transition::new(profile),
            lambda_min,
            lambda_max,
            lambda0,
            j_min,
            j_max,
        })
    }

    /// System whose window covers every positive eigenvalue of `op`.
    pub fn for_operator(op: &SpectralOperator) -> Result<Self> {
        Self::for_operator_profile(op, Profile::Standard)
    }

    pub fn for_operator_profile(op: &SpectralOperator, profile: Profile) -> Result<Self> {
        let ev = op.eigenvalues()?;
        let lowest_positive = ev.iter().copied().find(|&v| v > 0.0);
        Self::build_profile(profile, ev[0], *ev.last().unwrap(), op.lambda0()?, lowest_positive)
    }

    /// An admissible system with a different transition profile (the squared
    /// primitive of the bump power `k = 1 + seed mod 3`) and the same window.
    pub fn second_system(&self, seed: u64) -> DyadicSystem {
        self.with_profile(Profile::Squared(1 + (seed % 3) as u32))
    }

    pub fn with_profile(&self, profile: Profile) -> DyadicSystem {
        DyadicSystem { profile, transition: Transition::new(profile), ..self.clone() }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn window(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    /// Whether the window covers every positive frequency, so that
    /// `Σ_{j∈window} φ_j = 1` on the positive spectrum.
    pub fn covers_low_end(&self) -> bool {
        self.lambda_min > 0.0
    }

    pub fn chi(&self, lambda: f64) -> f64 {
        1.0 - self.transition.eval(lambda - 1.0)
    }

    pub fn phi0(&self, lambda: f64) -> f64 {
        self.chi(lambda) - self.chi(2.0 * lambda)
    }

    /// `φ_j(λ) = φ_0(2^{-j}λ)`, zero for `λ ≤ 0`.
    pub fn phi(&self, j: i32, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        let x = lambda * (-j as f64).exp2();
        if x <= 0.5 || x >= 2.0 {
            return 0.0;
        }
        self.phi0(x)
    }

    /// `ψ(μ) = χ(√max(μ, 0))`.
    pub fn psi(&self, mu: f64) -> f64 {
        self.chi(mu.max(0.0).sqrt())
    }

    pub fn fat_phi(&self, j: i32, lambda: f64) -> f64 {
        self.phi(j - 1, lambda) + self.phi(j, lambda) + self.phi(j + 1, lambda)
    }

    pub fn evaluate(&self, which: Which, lambda: f64) -> f64 {
        match which {
            Which::Chi => self.chi(lambda),
            Which::Phi(j) => self.phi(j, lambda),
            Which::Psi => self.psi(lambda),
            Which::FatPhi(j) => self.fat_phi(j, lambda),
        }
    }

    /// Symbol of `φ_j(√A)` as a function of the eigenvalue.
    pub fn block_symbol(&self, j: i32, eigenvalue: f64) -> f64 {
        if eigenvalue <= 0.0 {
            0.0
        } else {
            self.phi(j, eigenvalue.sqrt())
        }
    }

    pub fn fat_block_symbol(&self, j: i32, eigenvalue: f64) -> f64 {
        if eigenvalue <= 0.0 {
            0.0
        } else {
            self.fat_phi(j, eigenvalue.sqrt())
        }
    }

    /// `ψ(λ²) + Σ_{j=1}^{j_max} φ_j(λ)`.
    pub fn inhomogeneous_sum(&self, lambda: f64) -> f64 {
        self.psi(lambda * lambda.max(0.0)) + (1..=self.j_max).map(|j| self.phi(j, lambda)).sum::<f64>()
    }

    /// Columns `lambda, chi, psi, phi_{j}…, sum` on the given frequencies, where
    /// `psi` is `ψ(λ²)` and `sum` is [`DyadicSystem::inhomogeneous_sum`].
    pub fn profile_table(&self, lambdas: &[f64]) -> (Vec<String>, Vec<Vec<f64>>) {
        let mut header = vec!["lambda".to_string(), "chi".into(), "psi".into()];
        header.extend(self.window().map(|j| format!("phi_{j}")));
        header.push("sum".into());
        let rows = lambdas
            .iter()
            .map(|&l| {
                let mut row = vec![l, self.chi(l), self.psi(l * l.max(0.0))];
                row.extend(self.window().map(|j| self.phi(j, l)));
                row.push(self.inhomogeneous_sum(l));
                row
            })
            .collect();
        (header, rows)
    }
}
