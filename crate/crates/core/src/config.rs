//! System configuration.
//!
//! Every physical, impairment and algorithm parameter lives here, grouped as
//! layout and antennas, channel, hardware impairments and uncertainty, the
//! robust beamformer, and the deployment search. All fields have defaults, so an empty document is a
//! valid configuration.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub system: LayoutConfig,
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    pub impairments: ImpairmentConfig,
    pub dro: DroConfig,
    pub stage1: Stage1Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub slot_s: f64,
    pub bs_antennas: usize,
    pub ris_nx: usize,
    pub ris_ny: usize,
    pub users: usize,
    pub eavesdroppers: usize,
    /// Element spacing of both arrays, in wavelengths.
    pub element_spacing: f64,
    pub bs_position: [f64; 3],
    pub p_max_w: f64,
    pub per_antenna_w: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            bandwidth_hz: 100e6,
            slot_s: 0.01,
            bs_antennas: 32,
            ris_nx: 8,
            ris_ny: 8,
            users: 2,
            eavesdroppers: 1,
            element_spacing: 0.5,
            bs_position: [0.0, 0.0, 30.0],
            p_max_w: 2.0,
            per_antenna_w: 0.1,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 10.0,
        }
    }
}

impl LayoutConfig {
    pub fn ris_elements(&self) -> usize {
        self.ris_nx * self.ris_ny
    }

    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    /// Receiver noise power σ² in watts.
    pub fn noise_power_w(&self) -> f64 {
        10f64.powf((self.noise_power_dbm() - 30.0) / 10.0)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub uav_altitude_m: [f64; 2],
    pub area_x_m: [f64; 2],
    pub area_y_m: [f64; 2],
    /// Initial user azimuth sector, degrees from the positive x axis at the BS.
    pub user_sector_deg: [f64; 2],
    /// Initial horizontal user distance from the BS.
    pub user_distance_m: [f64; 2],
    pub eve_offset_m: [f64; 2],
    pub mean_speed_mps: f64,
    /// Gauss-Markov memory coefficient per slot.
    pub mobility_memory: f64,
    /// Per-axis standard deviation of the stationary velocity fluctuation.
    pub speed_noise_std_mps: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            uav_altitude_m: [60.0, 150.0],
            area_x_m: [-75.0, 75.0],
            area_y_m: [-75.0, 75.0],
            user_sector_deg: [35.0, 85.0],
            user_distance_m: [60.0, 100.0],
            eve_offset_m: [20.0, 40.0],
            mean_speed_mps: 1.0,
            mobility_memory: 0.8,
            speed_noise_std_mps: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub kappa_br_db: f64,
    pub kappa_ru_db: f64,
    pub kappa_re_db: f64,
    pub ple_br: f64,
    pub ple_ru: f64,
    pub ple_re: f64,
    /// Reference loss at 1 m for every link; `None` means free-space loss at the carrier.
    pub reference_loss_db: Option<f64>,
    /// Aggregate gain applied to the BS-RIS hop on top of the path loss.
    pub link_budget_gain_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            kappa_br_db: 10.0,
            kappa_ru_db: 3.0,
            kappa_re_db: 5.0,
            ple_br: 2.5,
            ple_ru: 3.5,
            ple_re: 3.2,
            reference_loss_db: None,
            link_budget_gain_db: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpairmentConfig {
    pub phase_bits: u32,
    pub jitter_kappa: f64,
    pub common_mode_jitter: bool,
    pub extra_phase_noise_std: f64,
    pub amplitude_error_std: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub pda_phase_offset: f64,
    pub pda_exponent: f64,
    pub csi_error_user: f64,
    pub csi_error_eve: f64,
    pub csi_error_br: f64,
    pub csi_correlation: f64,
    pub evm_bs: f64,
    pub evm_user: f64,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        Self {
            phase_bits: 2,
            jitter_kappa: 5.0,
            common_mode_jitter: false,
            extra_phase_noise_std: 0.3,
            amplitude_error_std: 0.15,
            beta_min: 0.4,
            beta_max: 0.8,
            pda_phase_offset: -std::f64::consts::FRAC_PI_2,
            pda_exponent: 1.6,
            csi_error_user: 0.10,
            csi_error_eve: 0.12,
            csi_error_br: 0.05,
            csi_correlation: 0.75,
            evm_bs: 0.08,
            evm_user: 0.10,
        }
    }
}

impl ImpairmentConfig {
    /// A configuration with every impairment switched off.
    pub fn ideal() -> Self {
        Self {
            jitter_kappa: f64::INFINITY,
            extra_phase_noise_std: 0.0,
            amplitude_error_std: 0.0,
            beta_min: 1.0,
            beta_max: 1.0,
            csi_error_user: 0.0,
            csi_error_eve: 0.0,
            csi_error_br: 0.0,
            evm_bs: 0.0,
            evm_user: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroConfig {
    pub samples: usize,
    pub wasserstein_radius: f64,
    pub risk_level: f64,
    pub adversary_steps: usize,
    pub ao_max_iters: usize,
    pub ao_tolerance: f64,
    pub zeta_grid: Vec<f64>,
    pub softplus_sharpness: f64,
    pub max_halvings: usize,
    /// Let the precoder block put all power on a single user.
    pub single_stream: bool,
}

impl Default for DroConfig {
    fn default() -> Self {
        Self {
            samples: 10,
            wasserstein_radius: 0.03,
            risk_level: 0.2,
            adversary_steps: 3,
            ao_max_iters: 15,
            ao_tolerance: 1e-4,
            zeta_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            softplus_sharpness: 50.0,
            max_halvings: 20,
            single_stream: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Random,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub candidates: usize,
    pub grid_mode: GridMode,
    pub top_k: usize,
    pub presamples: usize,
    pub fine_slots: usize,
    pub warm_start_slots: usize,
    pub omega: f64,
    pub probe_random: usize,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Self {
            candidates: 50,
            grid_mode: GridMode::Random,
            top_k: 12,
            presamples: 48,
            fine_slots: 200,
            warm_start_slots: 5,
            omega: 0.3,
            probe_random: 8,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::Validation(msg()))
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<(), ConfigError> {
    check(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1], || {
        format!(
            "{name} must be an ordered finite range, got [{}, {}]",
            r[0], r[1]
        )
    })
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.system;
        check(s.p_max_w > 0.0, || {
            "power must be positive (p_max_w)".into()
        })?;
        check(s.per_antenna_w > 0.0, || {
            "power must be positive (per_antenna_w)".into()
        })?;
        check(
            s.carrier_hz > 0.0 && s.bandwidth_hz > 0.0 && s.slot_s > 0.0,
            || "carrier, bandwidth and slot duration must be positive".into(),
        )?;
        check(s.bs_antennas >= 1 && s.ris_nx >= 1 && s.ris_ny >= 1, || {
            "array element counts must be at least 1".into()
        })?;
        check(s.users >= 1, || "at least one user is required".into())?;
        check(s.eavesdroppers == 1, || {
            "exactly one single-antenna eavesdropper is supported".into()
        })?;
        check(s.element_spacing > 0.0, || {
            "element spacing must be positive".into()
        })?;
        check(s.bs_position[2] >= 0.0, || {
            "BS height must be non-negative".into()
        })?;

        let g = &self.geometry;
        check_range("uav_altitude_m", g.uav_altitude_m)?;
        check_range("area_x_m", g.area_x_m)?;
        check_range("area_y_m", g.area_y_m)?;
        check_range("user_sector_deg", g.user_sector_deg)?;
        check_range("user_distance_m", g.user_distance_m)?;
        check_range("eve_offset_m", g.eve_offset_m)?;
        check(g.uav_altitude_m[0] >= 0.0, || {
            "UAV altitude must be non-negative".into()
        })?;
        check(
            g.area_x_m[0] < g.area_x_m[1] && g.area_y_m[0] < g.area_y_m[1],
            || "mobility area must have positive extent".into(),
        )?;
        check((0.0..=1.0).contains(&g.mobility_memory), || {
            format!(
                "mobility_memory must lie in [0, 1], got {}",
                g.mobility_memory
            )
        })?;
        check(
            g.mean_speed_mps >= 0.0 && g.speed_noise_std_mps >= 0.0,
            || "speeds must be non-negative".into(),
        )?;

        let c = &self.channel;
        for (name, ple) in [
            ("ple_br", c.ple_br),
            ("ple_ru", c.ple_ru),
            ("ple_re", c.ple_re),
        ] {
            check(ple > 0.0, || format!("{name} must be positive"))?;
        }
        for (name, k) in [
            ("kappa_br_db", c.kappa_br_db),
            ("kappa_ru_db", c.kappa_ru_db),
            ("kappa_re_db", c.kappa_re_db),
        ] {
            check(!k.is_nan(), || format!("{name} must be a number"))?;
        }

        let i = &self.impairments;
        check((1..=16).contains(&i.phase_bits), || {
            format!("phase_bits must lie in [1, 16], got {}", i.phase_bits)
        })?;
        check(i.jitter_kappa >= 0.0, || {
            "jitter_kappa must be non-negative".into()
        })?;
        check(
            i.extra_phase_noise_std >= 0.0 && i.amplitude_error_std >= 0.0,
            || "noise standard deviations must be non-negative".into(),
        )?;
        check(
            0.0 <= i.beta_min && i.beta_min <= i.beta_max && i.beta_max <= 1.0,
            || "amplitude range must satisfy 0 <= beta_min <= beta_max <= 1".into(),
        )?;
        check(i.pda_exponent > 0.0, || {
            "pda_exponent must be positive".into()
        })?;
        for (name, v) in [
            ("csi_error_user", i.csi_error_user),
            ("csi_error_eve", i.csi_error_eve),
            ("csi_error_br", i.csi_error_br),
        ] {
            check(v >= 0.0, || format!("{name} must be non-negative"))?;
        }
        check((0.0..=1.0).contains(&i.csi_correlation), || {
            "csi_correlation must lie in [0, 1]".into()
        })?;
        check(
            (0.0..1.0).contains(&i.evm_bs) && (0.0..1.0).contains(&i.evm_user),
            || "EVM must lie in [0, 1)".into(),
        )?;

        let d = &self.dro;
        check(d.samples >= 1, || "dro.samples must be at least 1".into())?;
        check(d.wasserstein_radius >= 0.0, || {
            "wasserstein_radius must be non-negative".into()
        })?;
        check(d.risk_level > 0.0 && d.risk_level < 1.0, || {
            format!("risk_level must lie in (0, 1), got {}", d.risk_level)
        })?;
        check(d.ao_max_iters >= 1, || {
            "ao_max_iters must be at least 1".into()
        })?;
        check(!d.zeta_grid.is_empty(), || {
            "zeta_grid must not be empty".into()
        })?;
        check(d.zeta_grid.iter().all(|z| (0.0..=1.0).contains(z)), || {
            "zeta_grid values must lie in [0, 1]".into()
        })?;
        check(d.softplus_sharpness > 0.0, || {
            "softplus_sharpness must be positive".into()
        })?;

        let st = &self.stage1;
        check(st.candidates >= 1, || {
            "stage1.candidates must be at least 1".into()
        })?;
        check(st.top_k >= 1, || "stage1.top_k must be at least 1".into())?;
        check(st.top_k <= st.candidates, || {
            format!(
                "stage1.top_k ({}) exceeds stage1.candidates ({})",
                st.top_k, st.candidates
            )
        })?;
        check(st.presamples >= 1, || {
            "stage1.presamples must be at least 1".into()
        })?;
        check(st.fine_slots > st.warm_start_slots, || {
            "stage1.fine_slots must exceed warm_start_slots".into()
        })?;
        check((0.0..=1.0).contains(&st.omega), || {
            "omega must lie in [0, 1]".into()
        })?;
        Ok(())
    }
}
