//! Scenario parameters, unit conversions, path loss and seeded channel draws.
//!
//! All powers are carried in Watt. Conversions from dBm happen once, when a
//! configuration is loaded, and once more when results are formatted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power level in dBm to Watt.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in Watt to dBm. Fails on non-positive input.
pub fn watt_to_dbm(watt: f64) -> Result<f64, ParamError> {
    if watt > 0.0 && watt.is_finite() {
        Ok(10.0 * watt.log10() + 30.0)
    } else {
        Err(ParamError::NonPositivePower(watt))
    }
}

/// Converts a ratio in dB to linear scale; `-inf` maps to zero.
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Log-distance path loss with a breakpoint.
///
/// Up to `breakpoint_m` the loss grows with `exponent_near` starting from the
/// free-space loss at one metre; beyond it the slope becomes `exponent_far`.
/// With `exponent_near = 2` the first segment is exactly free space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub breakpoint_m: f64,
    pub exponent_near: f64,
    pub exponent_far: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            breakpoint_m: 5.0,
            exponent_near: 2.0,
            exponent_far: 3.5,
        }
    }
}

impl PathLossModel {
    /// Path loss in dB at `distance_m` for carrier `carrier_hz`.
    pub fn loss_db(&self, distance_m: f64, carrier_hz: f64) -> f64 {
        let fs_1m = 20.0 * (4.0 * std::f64::consts::PI * carrier_hz / SPEED_OF_LIGHT).log10();
        let near = distance_m.min(self.breakpoint_m);
        let mut loss = fs_1m + 10.0 * self.exponent_near * near.log10();
        if distance_m > self.breakpoint_m {
            loss += 10.0 * self.exponent_far * (distance_m / self.breakpoint_m).log10();
        }
        loss
    }
}

/// All scenario constants. Powers in Watt, frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    /// Antenna noise variance per subcarrier.
    pub sigma_za_w: f64,
    /// Signal-processing noise variance per subcarrier.
    pub sigma_zs_w: f64,
    /// Mean interference-to-signal-processing-noise ratio; `-inf` disables interference.
    pub inr_db: f64,
    /// Circuit power consumption.
    pub p_c_w: f64,
    /// Power amplifier inefficiency (>= 1).
    pub epsilon: f64,
    /// Energy harvesting efficiency in [0, 1].
    pub eta: f64,
    pub p_max_w: f64,
    pub p_pg_w: f64,
    pub p_min_req_w: f64,
    pub p_max_req_w: f64,
    pub r_min_bps: f64,
    pub carrier_hz: f64,
    pub distance_m: f64,
    /// Combined transmit plus receive antenna gain.
    pub antenna_gain_db: f64,
    pub shadowing_lin: f64,
    /// Rician factor; `+inf` gives a pure line-of-sight channel.
    pub rician_k_db: f64,
    /// Number of equally spaced intervals for the splitting-ratio search.
    pub rho_grid_m: usize,
    pub path_loss: PathLossModel,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::standard()
    }
}

impl SystemParams {
    /// The reference indoor scenario: 1 MHz over 128 subcarriers at 470 MHz,
    /// 10 m link, 20 dB antenna gain on each side.
    pub fn standard() -> Self {
        Self {
            bandwidth_hz: 1.0e6,
            n_subcarriers: 128,
            sigma_za_w: dbm_to_watt(-128.0),
            sigma_zs_w: dbm_to_watt(-125.0),
            inr_db: 10.0,
            p_c_w: dbm_to_watt(40.0),
            epsilon: 2.6316,
            eta: 0.8,
            p_max_w: dbm_to_watt(22.0),
            p_pg_w: dbm_to_watt(50.0),
            p_min_req_w: dbm_to_watt(0.0),
            p_max_req_w: dbm_to_watt(20.0),
            r_min_bps: 10.0e6,
            carrier_hz: 470.0e6,
            distance_m: 10.0,
            antenna_gain_db: 40.0,
            shadowing_lin: 1.0,
            rician_k_db: 6.0,
            rho_grid_m: 1000,
            path_loss: PathLossModel::default(),
        }
    }

    /// Subcarrier bandwidth `W = B / n_F`.
    pub fn subcarrier_bw_hz(&self) -> f64 {
        self.bandwidth_hz / self.n_subcarriers as f64
    }

    /// Mean interference variance per subcarrier (Watt).
    pub fn interference_mean_w(&self) -> f64 {
        db_to_lin(self.inr_db) * self.sigma_zs_w
    }

    /// Largest per-subcarrier (and total) transmit power admitted by C2 and C3.
    pub fn transmit_cap_w(&self) -> f64 {
        self.p_max_w
            .min((self.p_pg_w - self.p_c_w) / self.epsilon)
            .max(0.0)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("sigma_za_w", self.sigma_za_w),
            ("sigma_zs_w", self.sigma_zs_w),
            ("p_c_w", self.p_c_w),
            ("p_max_w", self.p_max_w),
            ("p_pg_w", self.p_pg_w),
            ("p_max_req_w", self.p_max_req_w),
            ("carrier_hz", self.carrier_hz),
            ("distance_m", self.distance_m),
            ("shadowing_lin", self.shadowing_lin),
            ("breakpoint_m", self.path_loss.breakpoint_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ParamError::Invalid {
                    field: name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if self.n_subcarriers == 0 {
            return Err(ParamError::invalid("n_subcarriers", "must be at least 1"));
        }
        if !(self.epsilon >= 1.0 && self.epsilon.is_finite()) {
            return Err(ParamError::invalid("epsilon", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(ParamError::invalid("eta", "must lie in [0, 1]"));
        }
        if !(self.p_min_req_w >= 0.0 && self.p_min_req_w.is_finite()) {
            return Err(ParamError::invalid("p_min_req_w", "must be >= 0"));
        }
        if self.p_max_req_w < self.p_min_req_w {
            return Err(ParamError::invalid(
                "p_max_req_w",
                "must not be below p_min_req_w",
            ));
        }
        if !(self.r_min_bps >= 0.0 && self.r_min_bps.is_finite()) {
            return Err(ParamError::invalid("r_min_bps", "must be >= 0"));
        }
        if self.inr_db.is_nan() || self.inr_db == f64::INFINITY {
            return Err(ParamError::invalid("inr_db", "must be finite or -inf"));
        }
        if self.rician_k_db.is_nan() {
            return Err(ParamError::invalid("rician_k_db", "must not be NaN"));
        }
        if !self.antenna_gain_db.is_finite() {
            return Err(ParamError::invalid("antenna_gain_db", "must be finite"));
        }
        if self.rho_grid_m == 0 {
            return Err(ParamError::invalid("rho_grid_m", "must be at least 1"));
        }
        let pl = &self.path_loss;
        if !(pl.exponent_near > 0.0 && pl.exponent_far > 0.0) {
            return Err(ParamError::invalid("path_loss", "exponents must be positive"));
        }
        Ok(())
    }
}

/// Linear large-scale gain `l` (path loss only, no antenna gain or shadowing).
pub fn path_loss_gain(params: &SystemParams) -> f64 {
    let loss_db = params
        .path_loss
        .loss_db(params.distance_m, params.carrier_hz);
    db_to_lin(-loss_db)
}

/// Composite large-scale gain: path loss, shadowing and antenna gains.
pub fn composite_path_gain(params: &SystemParams) -> f64 {
    path_loss_gain(params) * params.shadowing_lin * db_to_lin(params.antenna_gain_db)
}

/// One draw of the small-scale channel and interference for every subcarrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// Composite `l * g` including antenna gains.
    pub path_gain_lin: f64,
    /// Small-scale power gains `|H_i|^2`.
    pub h2: Vec<f64>,
    /// Interference variances per subcarrier (Watt).
    pub sigma_i_w: Vec<f64>,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn n_subcarriers(&self) -> usize {
        self.h2.len()
    }

    /// Large-scale times small-scale gain on subcarrier `i`.
    #[inline]
    pub fn gain(&self, i: usize) -> f64 {
        self.path_gain_lin * self.h2[i]
    }
}

/// Draws a channel realization from `seed`.
///
/// Small-scale gains are Rician with unit mean power; the line-of-sight phase
/// is fixed at zero. Interference powers are exponential (Rayleigh envelope)
/// with mean set by the INR. The gains for every subcarrier are drawn before
/// any interference sample, so two parameter sets that differ only in INR see
/// the same fading for a given seed.
pub fn generate_channel(params: &SystemParams, seed: u64) -> ChannelRealization {
    let n = params.n_subcarriers;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = db_to_lin(params.rician_k_db);
    let (los, scatter) = if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };
    let h2 = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let re = los + scatter * re * std::f64::consts::FRAC_1_SQRT_2;
            let im = scatter * im * std::f64::consts::FRAC_1_SQRT_2;
            re * re + im * im
        })
        .collect();
    let mean_i = params.interference_mean_w();
    let sigma_i_w = (0..n)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            mean_i * e
        })
        .collect();
    ChannelRealization {
        path_gain_lin: composite_path_gain(params),
        h2,
        sigma_i_w,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn dbm_conversions() {
        assert!(rel(dbm_to_watt(40.0), 10.0) < 1e-15);
        assert!(rel(dbm_to_watt(0.0), 1e-3) < 1e-15);
        assert!(rel(dbm_to_watt(-125.0), 10f64.powf(-15.5)) < 1e-14);
        assert!(watt_to_dbm(0.0).is_err());
        assert!(watt_to_dbm(-1.0).is_err());
        assert!((watt_to_dbm(1.0).unwrap() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn free_space_segment_at_one_metre() {
        let mut p = SystemParams::standard();
        p.distance_m = 1.0;
        let expected = 20.0 * (4.0 * std::f64::consts::PI * p.carrier_hz / SPEED_OF_LIGHT).log10();
        let got = -10.0 * path_loss_gain(&p).log10();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn far_segment_slope() {
        let mut p = SystemParams::standard();
        p.distance_m = 8.0;
        let l8 = -10.0 * path_loss_gain(&p).log10();
        p.distance_m = 16.0;
        let l16 = -10.0 * path_loss_gain(&p).log10();
        assert!((l16 - l8 - 35.0 * 2f64.log10()).abs() < 1e-9);
        assert!((l16 - l8 - 10.54).abs() < 0.01);
    }

    #[test]
    fn reference_link_gain_window() {
        let p = SystemParams::standard();
        let g_db = 10.0 * composite_path_gain(&p).log10();
        // 25.88 dB free space at 1 m, +13.98 dB to 5 m, +10.54 dB to 10 m, +40 dB antennas.
        assert!((g_db + 10.405).abs() < 0.01, "{g_db}");
        assert!((-15.0..=-5.0).contains(&g_db));
    }

    #[test]
    fn pure_los_limit() {
        let mut p = SystemParams::standard();
        p.rician_k_db = f64::INFINITY;
        let ch = generate_channel(&p, 3);
        assert!(ch.h2.iter().all(|&h| h == 1.0));
    }

    #[test]
    fn interference_disabled() {
        let mut p = SystemParams::standard();
        p.inr_db = f64::NEG_INFINITY;
        let ch = generate_channel(&p, 3);
        assert!(ch.sigma_i_w.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn same_seed_same_draw() {
        let p = SystemParams::standard();
        assert_eq!(generate_channel(&p, 11), generate_channel(&p, 11));
        assert_ne!(generate_channel(&p, 11).h2, generate_channel(&p, 12).h2);
    }

    #[test]
    fn fading_independent_of_inr() {
        let mut p = SystemParams::standard();
        let a = generate_channel(&p, 5);
        p.inr_db = 50.0;
        let b = generate_channel(&p, 5);
        assert_eq!(a.h2, b.h2);
        assert!(rel(b.sigma_i_w[0], a.sigma_i_w[0] * 1e4) < 1e-12);
    }

    #[test]
    fn unit_mean_fading_and_inr_mean() {
        let mut p = SystemParams::standard();
        p.n_subcarriers = 100_000;
        p.inr_db = 20.0;
        let ch = generate_channel(&p, 99);
        let n = ch.h2.len() as f64;
        let mean = ch.h2.iter().sum::<f64>() / n;
        let var = ch.h2.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1.0).abs() < 3.0 * (var / n).sqrt(), "mean {mean}");
        assert!((mean - 1.0).abs() < 0.02);

        let target = p.interference_mean_w();
        let mi = ch.sigma_i_w.iter().sum::<f64>() / n;
        let vi = ch.sigma_i_w.iter().map(|s| (s - mi).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mi - target).abs() < 3.0 * (vi / n).sqrt(), "{mi} vs {target}");
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut p = SystemParams::standard();
        assert!(p.validate().is_ok());
        p.epsilon = 0.5;
        assert!(p.validate().is_err());
        let mut p = SystemParams::standard();
        p.p_max_req_w = p.p_min_req_w / 2.0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::standard();
        p.rho_grid_m = 0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::standard();
        p.eta = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn subcarrier_bandwidth_partitions_band() {
        let p = SystemParams::standard();
        assert_eq!(p.subcarrier_bw_hz(), 7812.5);
        assert_eq!(p.subcarrier_bw_hz() * p.n_subcarriers as f64, p.bandwidth_hz);
    }
}
