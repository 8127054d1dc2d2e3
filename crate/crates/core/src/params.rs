//! Environment and behaviour parameters, precondition checks and the
//! constants derived from them.
//!
//! All logarithms are natural. The learning-rate analogue is
//! `delta = ln(beta / (1 - beta))`; it is always recomputed from `beta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the adoption-probability range for which `delta <= 1`.
pub fn beta_max() -> f64 {
    let e = std::f64::consts::E;
    e / (e + 1.0)
}

/// Constant under the square root of the coupling base deviation.
pub const DELTA_PP_CONSTANT: f64 = 60.0;
/// The alternative constant used further along in the large-T argument.
pub const DELTA_PP_CONSTANT_ALT: f64 = 240.0;

const REGIME_TOL: f64 = 1e-12;

/// Option qualities plus the sampling and adoption behaviour of individuals.
///
/// Option `0` is the best option: `eta` is sorted in non-increasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    eta: Vec<f64>,
    mu: f64,
    beta: f64,
    alpha: f64,
}

impl ModelParams {
    /// General constructor with independent good/bad-signal adoption
    /// probabilities. Rejects structurally invalid input only.
    pub fn new(eta: Vec<f64>, mu: f64, beta: f64, alpha: f64) -> Result<Self> {
        if eta.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 options, got {}",
                eta.len()
            )));
        }
        if let Some((j, q)) = eta
            .iter()
            .enumerate()
            .find(|(_, q)| !(0.0..=1.0).contains(*q))
        {
            return Err(Error::InvalidParams(format!(
                "eta[{j}] = {q} is outside [0, 1]"
            )));
        }
        if let Some(j) = eta.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidParams(format!(
                "eta must be sorted descending (eta[{j}] < eta[{}])",
                j + 1
            )));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::InvalidParams(format!("mu = {mu} is outside (0, 1]")));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParams(format!(
                "beta = {beta} is outside [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParams(format!(
                "alpha = {alpha} is outside [0, 1]"
            )));
        }
        if alpha > beta {
            return Err(Error::InvalidParams(format!(
                "alpha = {alpha} exceeds beta = {beta}"
            )));
        }
        Ok(Self {
            eta,
            mu,
            beta,
            alpha,
        })
    }

    /// Symmetric adoption rule, `alpha = 1 - beta`.
    pub fn symmetric(eta: Vec<f64>, mu: f64, beta: f64) -> Result<Self> {
        Self::new(eta, mu, beta, 1.0 - beta)
    }

    pub fn m(&self) -> usize {
        self.eta.len()
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `ln(beta / (1 - beta))`.
    pub fn delta(&self) -> f64 {
        (self.beta / (1.0 - self.beta)).ln()
    }

    /// `ln(beta / alpha)`, the deviation scale of the general adoption rule.
    /// Equals [`delta`](Self::delta) when `alpha = 1 - beta`; infinite when
    /// `alpha = 0`.
    pub fn adoption_log_ratio(&self) -> f64 {
        (self.beta / self.alpha).ln()
    }

    /// Adoption probability for a considered option given its signal.
    #[inline]
    pub fn adoption_prob(&self, good: bool) -> f64 {
        if good {
            self.beta
        } else {
            self.alpha
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (self.alpha - (1.0 - self.beta)).abs() <= REGIME_TOL
    }

    /// Gap between the best and second-best quality.
    pub fn quality_gap(&self) -> f64 {
        self.eta[0] - self.eta[1]
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let alpha = if self.is_symmetric() { 1.0 - beta } else { self.alpha };
        Self::new(self.eta.clone(), self.mu, beta, alpha)
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.eta.clone(), mu, self.beta, self.alpha)
    }
}

/// One precondition and whether it holds for the given run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

/// Result of [`validate`]. Violations are informational: simulation is
/// still allowed outside the proven regime.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, holds: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            holds,
            detail,
        });
    }
}

/// Evaluates every precondition of the regret bounds for a run of
/// `t_max` steps with `n` individuals.
pub fn validate(params: &ModelParams, n: u64, t_max: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    let delta = params.delta();
    let m = params.m() as f64;
    let (mu, beta) = (params.mu(), params.beta());

    report.push(
        "beta_range",
        beta > 0.5 && beta <= beta_max(),
        format!("1/2 < beta = {beta} <= e/(e+1) = {:.6}", beta_max()),
    );
    report.push(
        "symmetric_adoption",
        params.is_symmetric(),
        format!("alpha = {} vs 1 - beta = {}", params.alpha(), 1.0 - beta),
    );
    report.push(
        "strict_best_option",
        params.quality_gap() > 0.0,
        format!("eta_1 - eta_2 = {}", params.quality_gap()),
    );
    report.push(
        "exploration_small",
        6.0 * mu <= delta * delta,
        format!("6 mu = {} <= delta^2 = {}", 6.0 * mu, delta * delta),
    );
    let t_min = if delta > 0.0 {
        m.ln() / (delta * delta)
    } else {
        f64::INFINITY
    };
    report.push(
        "horizon_long_enough",
        (t_max as f64) >= t_min,
        format!("T = {t_max} >= ln m / delta^2 = {t_min}"),
    );

    let (n1, n2, t_window) = population_conditions(params, n, t_max);
    report.push("population_size_coupling", n1.holds, n1.detail);
    report.push("population_size_failure_budget", n2.holds, n2.detail);
    report.push("horizon_within_window", t_window.holds, t_window.detail);

    if delta == 0.0 {
        report
            .warnings
            .push("delta=0: all regret bounds vacuous".to_string());
    } else if delta < 0.0 {
        report
            .warnings
            .push(format!("delta = {delta} < 0: adoption favours bad signals"));
    }
    if params.alpha() <= 0.0 {
        report.warnings.push(
            "degenerate-adoption risk: alpha = 0, steps with no adopters are possible".to_string(),
        );
    }
    report
}

struct Cond {
    holds: bool,
    detail: String,
}

/// The two population-size lower bounds and the `T <= N^10 / (m delta)`
/// window, all compared in log space.
fn population_conditions(params: &ModelParams, n: u64, t_max: usize) -> (Cond, Cond, Cond) {
    let delta = params.delta();
    let m = params.m() as f64;
    let (mu, beta) = (params.mu(), params.beta());
    let nf = n as f64;
    let ln_n = nf.ln();
    if delta <= 0.0 || n < 2 || beta >= 1.0 {
        let vac = || Cond {
            holds: false,
            detail: "vacuous (delta <= 0 or beta = 1 or n < 2)".to_string(),
        };
        return (vac(), vac(), vac());
    }
    let dpp = delta_pp(params, n, DELTA_PP_CONSTANT);
    let c = 240.0 * m / ((1.0 - beta) * mu);
    let base = c * 4.0 * m / (mu * (1.0 - beta));
    // N / ln N >= base^(2 ln 5 / delta^2) / delta''^2
    let lhs1 = ln_n - ln_n.ln();
    let rhs1 = (2.0 * 5f64.ln() / (delta * delta)) * base.ln() - 2.0 * dpp.ln();
    // N^10 >= 24 m ln m / (mu (1 - beta) delta^3)
    let lhs2 = 10.0 * ln_n;
    let rhs2 = (24.0 * m * m.ln() / (mu * (1.0 - beta) * delta.powi(3))).ln();
    // N^10 / (m delta) >= T
    let lhs3 = 10.0 * ln_n - (m * delta).ln();
    let rhs3 = (t_max.max(1) as f64).ln();
    (
        Cond {
            holds: lhs1 >= rhs1,
            detail: format!("ln(N/ln N) = {lhs1:.4} vs required {rhs1:.4}"),
        },
        Cond {
            holds: lhs2 >= rhs2,
            detail: format!("ln N^10 = {lhs2:.4} vs required {rhs2:.4}"),
        },
        Cond {
            holds: lhs3 >= rhs3,
            detail: format!("ln(N^10/(m delta)) = {lhs3:.4} vs ln T = {rhs3:.4}"),
        },
    )
}

/// `sqrt(c m ln N / ((1 - beta) mu N))`.
pub fn delta_pp(params: &ModelParams, n: u64, constant: f64) -> f64 {
    let nf = n as f64;
    (constant * params.m() as f64 * nf.ln() / ((1.0 - params.beta()) * params.mu() * nf)).sqrt()
}

/// Constants derived from the parameters and the population size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedBounds {
    pub delta: f64,
    /// `ln(beta / alpha)`; differs from `delta` outside the symmetric rule.
    pub adoption_log_ratio: f64,
    pub delta_pp_constant: f64,
    /// Base deviation of the finite/infinite coupling.
    pub delta_pp: f64,
    /// Popularity floor `mu (1 - beta) / (4 m)`.
    pub zeta: f64,
    /// `ceil(ln(1/zeta) / delta^2)`; `None` when `delta = 0`.
    pub epoch_len: Option<usize>,
    /// `3 delta` (infinite population).
    pub regret_bound_inf: f64,
    /// `6 delta` (finite population).
    pub regret_bound_fin: f64,
    /// `1 - 3 delta / (eta_1 - eta_2)`; `None` when the gap is zero.
    pub share_lower_bound: Option<f64>,
}

impl DerivedBounds {
    pub fn new(params: &ModelParams, n: u64) -> Self {
        Self::with_constant(params, n, DELTA_PP_CONSTANT)
    }

    pub fn with_constant(params: &ModelParams, n: u64, constant: f64) -> Self {
        let delta = params.delta();
        let m = params.m() as f64;
        let zeta = params.mu() * (1.0 - params.beta()) / (4.0 * m);
        let epoch_len = if delta != 0.0 && zeta > 0.0 {
            Some(((1.0 / zeta).ln() / (delta * delta)).ceil().max(1.0) as usize)
        } else {
            None
        };
        let gap = params.quality_gap();
        Self {
            delta,
            adoption_log_ratio: params.adoption_log_ratio(),
            delta_pp_constant: constant,
            delta_pp: delta_pp(params, n.max(2), constant),
            zeta,
            epoch_len,
            regret_bound_inf: 3.0 * delta,
            regret_bound_fin: 6.0 * delta,
            share_lower_bound: (gap > 0.0).then(|| 1.0 - 3.0 * delta / gap),
        }
    }

    /// Coupling bound after `t` steps, `5^t delta''`.
    pub fn delta_t(&self, t: usize) -> f64 {
        5f64.powi(t as i32) * self.delta_pp
    }
}

/// Alias kept for call sites that read better as a function.
pub fn derived_bounds(params: &ModelParams, n: u64) -> DerivedBounds {
    DerivedBounds::new(params, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ten_options() -> ModelParams {
        let mut eta = vec![0.95];
        eta.extend(std::iter::repeat_n(0.05, 9));
        ModelParams::symmetric(eta, 0.0067, 0.55).unwrap()
    }

    #[test]
    fn exploration_condition_holds_at_reference_config() {
        let p = ten_options();
        assert_relative_eq!(p.delta(), (11.0f64 / 9.0).ln(), epsilon = 1e-15);
        assert_relative_eq!(p.delta(), 0.200670695, epsilon = 1e-9);
        let report = validate(&p, 1000, 58);
        let c = report.check("exploration_small").unwrap();
        assert!(c.holds, "{}", c.detail);
        assert!(6.0 * 0.0067 <= p.delta().powi(2));
        assert!(report.check("horizon_long_enough").unwrap().holds);
        assert!(report.check("beta_range").unwrap().holds);
    }

    #[test]
    fn half_beta_is_flagged_vacuous() {
        let p = ModelParams::symmetric(vec![0.9, 0.1], 0.1, 0.5).unwrap();
        assert_eq!(p.delta(), 0.0);
        let report = validate(&p, 100, 10);
        assert!(report
            .warnings
            .iter()
            .any(|w| w == "delta=0: all regret bounds vacuous"));
        let b = DerivedBounds::new(&p, 100);
        assert_eq!(b.epoch_len, None);
        assert_eq!(b.regret_bound_inf, 0.0);
    }

    #[test]
    fn zeta_and_epoch_length() {
        let p = ModelParams::symmetric(vec![0.9, 0.1], 0.01, 0.6).unwrap();
        let b = DerivedBounds::new(&p, 100_000);
        assert_relative_eq!(b.zeta, 5e-4, epsilon = 1e-15);
        // ln(2000) / ln(1.5)^2 = 7.6009 / 0.16440 = 46.23
        let raw = 2000f64.ln() / 1.5f64.ln().powi(2);
        assert!((46.0..47.0).contains(&raw));
        assert_eq!(b.epoch_len, Some(47));
    }

    #[test]
    fn coupling_base_deviation() {
        let p = ModelParams::symmetric(vec![0.9, 0.1], 0.01, 0.6).unwrap();
        let b = DerivedBounds::new(&p, 100_000);
        let expect = (60.0 * 2.0 * 1e5f64.ln() / (0.4 * 0.01 * 1e5)).sqrt();
        assert_relative_eq!(b.delta_pp, expect, epsilon = 1e-12);
        assert_relative_eq!(b.delta_pp, 1.858, epsilon = 1e-3);
        assert_eq!(b.delta_t(0), b.delta_pp);
        assert_relative_eq!(b.delta_t(3), 125.0 * b.delta_pp, epsilon = 1e-12);
        let alt = DerivedBounds::with_constant(&p, 100_000, DELTA_PP_CONSTANT_ALT);
        assert_relative_eq!(alt.delta_pp, 2.0 * b.delta_pp, epsilon = 1e-12);
    }

    #[test]
    fn infinite_regret_bound_at_reference_config() {
        let b = DerivedBounds::new(&ten_options(), 1000);
        assert_relative_eq!(b.regret_bound_inf, 0.6020, epsilon = 1e-4);
        assert_relative_eq!(b.regret_bound_fin, 2.0 * b.regret_bound_inf);
        assert_relative_eq!(b.share_lower_bound.unwrap(), 1.0 - 0.6020 / 0.9, epsilon = 1e-4);
    }

    #[test]
    fn structural_errors() {
        assert!(ModelParams::symmetric(vec![0.5], 0.1, 0.6).is_err());
        assert!(ModelParams::symmetric(vec![1.2, 0.1], 0.1, 0.6).is_err());
        assert!(ModelParams::symmetric(vec![0.2, 0.5], 0.1, 0.6).is_err());
        assert!(ModelParams::symmetric(vec![0.9, 0.1], 0.0, 0.6).is_err());
        assert!(ModelParams::symmetric(vec![0.9, 0.1], 1.5, 0.6).is_err());
        assert!(ModelParams::new(vec![0.9, 0.1], 0.1, 0.4, 0.6).is_err());
        // alpha = 0 is allowed but warned about
        let p = ModelParams::new(vec![0.9, 0.1], 0.1, 1.0, 0.0).unwrap();
        let r = validate(&p, 10, 10);
        assert!(r.warnings.iter().any(|w| w.contains("degenerate-adoption")));
    }

    #[test]
    fn population_conditions_unmet_at_desk_scale() {
        let r = validate(&ten_options(), 100_000, 58);
        assert!(!r.check("population_size_coupling").unwrap().holds);
        assert!(r.check("population_size_failure_budget").unwrap().holds);
        assert!(r.check("horizon_within_window").unwrap().holds);
    }

    #[test]
    fn general_alpha_exposes_separate_scale() {
        let p = ModelParams::new(vec![0.9, 0.1], 0.1, 0.6, 0.2).unwrap();
        assert_relative_eq!(p.adoption_log_ratio(), 3f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(p.delta(), 1.5f64.ln(), epsilon = 1e-15);
        assert!(!p.is_symmetric());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn delta_inverts_beta(beta in 0.5f64..0.999, mu in 1e-4f64..1.0) {
                let p = ModelParams::symmetric(vec![0.7, 0.3], mu, beta).unwrap();
                prop_assert!((p.delta().exp() * (1.0 - beta) - beta).abs() <= 1e-12);
            }

            #[test]
            fn derived_bounds_pure_and_floor_below_uniform(
                beta in 0.5f64..0.99, mu in 1e-4f64..=1.0, m in 2usize..12, n in 2u64..10_000_000
            ) {
                let eta: Vec<f64> = (0..m).map(|j| 1.0 - j as f64 / m as f64).collect();
                let p = ModelParams::symmetric(eta, mu, beta).unwrap();
                let a = DerivedBounds::new(&p, n);
                let b = DerivedBounds::new(&p, n);
                prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
                prop_assert!(a.zeta > 0.0 && a.zeta < 1.0 / m as f64);
                if let Some(len) = a.epoch_len { prop_assert!(len >= 1); }
            }
        }
    }
}
