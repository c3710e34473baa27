/// Step sizes `β_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum StepSchedule {
    /// `β_k = β₀ / (k + k₀)`
    RobbinsMonro { beta0: f64, k0: f64 },
    Constant { beta0: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::RobbinsMonro { beta0: 0.1, k0: 10.0 }
    }
}

impl StepSchedule {
    /// Decreasing schedule `1 / (c (k + 10))` built from a strong-convexity
    /// constant `c`.
    pub fn from_convexity(c: f64) -> Self {
        StepSchedule::RobbinsMonro {
            beta0: 1.0 / c,
            k0: 10.0,
        }
    }

    pub fn beta(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::RobbinsMonro { beta0, k0 } => beta0 / (k as f64 + k0),
            StepSchedule::Constant { beta0 } => beta0,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            StepSchedule::RobbinsMonro { beta0, k0 } => beta0 > 0.0 && k0 > 0.0,
            StepSchedule::Constant { beta0 } => beta0 > 0.0,
        }
    }
}

/// Penalty parameters `λ_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum PenaltySchedule {
    Constant { lambda0: f64 },
    /// `λ_k = λ₀ + slope · k`
    Linear { lambda0: f64, slope: f64 },
    /// `λ_k = max(λ̄ − √(D β_k), λ₀)`, so that `|λ_k − λ̄|² = D β_k` once the
    /// clip is inactive.
    Adaptive { lambda0: f64, lambda_bar: f64, d: f64 },
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        PenaltySchedule::Linear {
            lambda0: 1.0,
            slope: 1e-3,
        }
    }
}

impl PenaltySchedule {
    pub fn lambda(&self, k: u64, beta_k: f64) -> f64 {
        match *self {
            PenaltySchedule::Constant { lambda0 } => lambda0,
            PenaltySchedule::Linear { lambda0, slope } => lambda0 + slope * k as f64,
            PenaltySchedule::Adaptive { lambda0, lambda_bar, d } => (lambda_bar - libm::sqrt(d * beta_k)).max(lambda0),
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            PenaltySchedule::Constant { lambda0 } => lambda0 >= 0.0,
            PenaltySchedule::Linear { lambda0, slope } => lambda0 >= 0.0 && slope >= 0.0,
            PenaltySchedule::Adaptive { lambda0, lambda_bar, d } => lambda0 >= 0.0 && lambda_bar >= lambda0 && d >= 0.0,
        }
    }
}
