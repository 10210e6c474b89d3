//! Closed-form GN-model quality-of-transmission engine.
//!
//! ASE and NLI are accumulated incoherently element by element along a route,
//! and each channel's GSNR and margin are reported both at the route end and
//! cumulatively after every link.

use std::collections::BTreeMap;
use std::f64::consts::{LN_10, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{grid_channels, total_wdm_bandwidth, Amplifier, Element, FiberSpan, Link, Modulation, SpectrumGrid};
use crate::{db_to_lin, lin_to_db};

/// Planck constant, J·s.
pub const PLANCK_J_S: f64 = 6.62607015e-34;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QotError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("route has no links")]
    EmptyRoute,
    #[error("channel {0} is not on the grid")]
    UnknownChannel(usize),
    #[error("no GSNR threshold configured for {0}")]
    UnknownModulation(Modulation),
    #[error("invalid modulation thresholds: {0}")]
    InvalidThresholds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveLength {
    pub l_eff_km: f64,
    /// 1/α_p, the effective length of an infinitely long span.
    pub l_eff_asymptotic_km: f64,
}

/// Power attenuation coefficient α_p in 1/km.
pub fn power_attenuation_per_km(atten_db_per_km: f64) -> f64 {
    atten_db_per_km * LN_10 / 10.0
}

/// L_eff = (1 − e^(−α_p·L)) / α_p.
pub fn effective_length(atten_db_per_km: f64, length_km: f64) -> Result<EffectiveLength, QotError> {
    if !(atten_db_per_km > 0.0) || !(length_km > 0.0) {
        return Err(QotError::Domain(format!(
            "effective length needs positive attenuation and length, got {atten_db_per_km} dB/km, {length_km} km"
        )));
    }
    let alpha = power_attenuation_per_km(atten_db_per_km);
    Ok(EffectiveLength {
        l_eff_km: -(-alpha * length_km).exp_m1() / alpha,
        l_eff_asymptotic_km: 1.0 / alpha,
    })
}

/// ASE power h·ν·NF·(G − 1)·B_ref of one amplifier, in W.
pub fn ase_power(amp: &Amplifier, center_freq_hz: f64, b_ref_hz: f64) -> Result<f64, QotError> {
    if !(b_ref_hz > 0.0) {
        return Err(QotError::Domain(format!("reference bandwidth must be positive, got {b_ref_hz}")));
    }
    let gain = db_to_lin(amp.gain_db);
    if gain < 1.0 {
        return Err(QotError::Domain(format!(
            "amplifier {} has gain {} dB < 0 dB",
            amp.id, amp.gain_db
        )));
    }
    let nf = db_to_lin(amp.nf_db);
    Ok(PLANCK_J_S * center_freq_hz * nf * (gain - 1.0) * b_ref_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelLaunch {
    pub channel_index: usize,
    pub power_w: f64,
}

/// Incoherent closed-form GN NLI power generated in one span, in W:
///
/// `(8/27)·γ²·L_eff²·(P/B_ch)³·B_ch·asinh((π²/2)·|β₂|·L_eff,a·B_wdm²) / (π·|β₂|·L_eff,a)`
pub fn nli_power_span(
    span: &FiberSpan,
    launch: &ChannelLaunch,
    b_ch_hz: f64,
    b_wdm_hz: f64,
) -> Result<f64, QotError> {
    if !(b_ch_hz > 0.0) || !(b_wdm_hz >= b_ch_hz) {
        return Err(QotError::Domain(format!(
            "need 0 < B_ch <= B_wdm, got B_ch={b_ch_hz}, B_wdm={b_wdm_hz}"
        )));
    }
    if !(launch.power_w > 0.0) {
        return Err(QotError::Domain(format!("launch power must be positive, got {}", launch.power_w)));
    }
    if span.gamma_per_w_km == 0.0 {
        return Ok(0.0);
    }
    let beta2 = span.beta2_ps2_per_km.abs() * 1e-24;
    if beta2 == 0.0 {
        return Err(QotError::Domain(format!("span {} has zero dispersion", span.id)));
    }
    let le = effective_length(span.atten_db_per_km, span.length_km)?;
    let psd = launch.power_w / b_ch_hz;
    let asinh_arg = (PI * PI / 2.0) * beta2 * le.l_eff_asymptotic_km * b_wdm_hz * b_wdm_hz;
    Ok((8.0 / 27.0)
        * span.gamma_per_w_km.powi(2)
        * le.l_eff_km.powi(2)
        * psd.powi(3)
        * b_ch_hz
        * asinh_arg.asinh()
        / (PI * beta2 * le.l_eff_asymptotic_km))
}

/// Required GSNR per modulation format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModulationThresholds(pub BTreeMap<Modulation, f64>);

impl Default for ModulationThresholds {
    fn default() -> Self {
        ModulationThresholds(BTreeMap::from([
            (Modulation::Qpsk, 9.0),
            (Modulation::Qam8, 12.0),
            (Modulation::Qam16, 15.0),
            (Modulation::Qam64, 21.0),
        ]))
    }
}

impl ModulationThresholds {
    pub fn new(map: BTreeMap<Modulation, f64>) -> Result<Self, QotError> {
        let t = ModulationThresholds(map);
        t.validate()?;
        Ok(t)
    }

    /// Thresholds must strictly increase with modulation order.
    pub fn validate(&self) -> Result<(), QotError> {
        let vals: Vec<(&Modulation, &f64)> = self.0.iter().collect();
        for w in vals.windows(2) {
            if !(w[1].1 > w[0].1) {
                return Err(QotError::InvalidThresholds(format!(
                    "{} threshold {} is not above {} threshold {}",
                    w[1].0, w[1].1, w[0].0, w[0].1
                )));
            }
        }
        Ok(())
    }

    pub fn required(&self, m: Modulation) -> Result<f64, QotError> {
        self.0.get(&m).copied().ok_or(QotError::UnknownModulation(m))
    }
}

/// GSNR above the modulation's required level. Negative margins are valid.
pub fn margin(gsnr_db: f64, modulation: Modulation, thresholds: &ModulationThresholds) -> Result<f64, QotError> {
    Ok(gsnr_db - thresholds.required(modulation)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelQot {
    pub channel_index: usize,
    pub center_thz: f64,
    pub power_w: f64,
    pub ase_w: f64,
    pub nli_w: f64,
    pub gsnr_db: f64,
    pub margin_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkQot {
    pub link_id: String,
    /// Cumulative values at the output of this link.
    pub channels: Vec<ChannelQot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsnrReport {
    pub modulation: Modulation,
    pub required_gsnr_db: f64,
    pub channels: Vec<ChannelQot>,
    pub per_link: Vec<LinkQot>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// 10·log10(P / (ASE + NLI)); infinite when the channel is noiseless.
pub fn gsnr_db(power_w: f64, ase_w: f64, nli_w: f64) -> f64 {
    let noise = ase_w + nli_w;
    if noise > 0.0 {
        lin_to_db(power_w / noise)
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Copy)]
struct ChannelState {
    index: usize,
    freq_hz: f64,
    signal: f64,
    ase: f64,
    nli: f64,
}

/// Walks `route` element by element for every launched channel.
///
/// A span attenuates signal, ASE and accumulated NLI, and contributes its
/// closed-form NLI (evaluated at the span-input power) referred to its
/// output. An amplifier applies its gain to all three and adds its ASE.
/// On a transparent link the accumulated NLI therefore grows by exactly the
/// closed-form value of each span.
pub fn estimate_gsnr(
    route: &[&Link],
    launches: &[ChannelLaunch],
    grid: &SpectrumGrid,
    thresholds: &ModulationThresholds,
    modulation: Modulation,
) -> Result<GsnrReport, QotError> {
    if route.is_empty() {
        return Err(QotError::EmptyRoute);
    }
    let required = thresholds.required(modulation)?;
    let channels = grid_channels(grid);
    let b_ch = grid.symbol_rate_gbd * 1e9;
    let b_wdm = total_wdm_bandwidth(grid);
    let b_ref = grid.b_ref_ghz * 1e9;

    let mut states = Vec::with_capacity(launches.len());
    for l in launches {
        let ch = channels.get(l.channel_index).ok_or(QotError::UnknownChannel(l.channel_index))?;
        if !(l.power_w > 0.0) {
            return Err(QotError::Domain(format!("channel {} launch power must be positive", l.channel_index)));
        }
        states.push(ChannelState {
            index: l.channel_index,
            freq_hz: ch.center_thz * 1e12,
            signal: l.power_w,
            ase: 0.0,
            nli: 0.0,
        });
    }

    let snapshot = |states: &[ChannelState]| -> Vec<ChannelQot> {
        states
            .iter()
            .map(|s| {
                let g = gsnr_db(s.signal, s.ase, s.nli);
                ChannelQot {
                    channel_index: s.index,
                    center_thz: s.freq_hz * 1e-12,
                    power_w: s.signal,
                    ase_w: s.ase,
                    nli_w: s.nli,
                    gsnr_db: g,
                    margin_db: g - required,
                }
            })
            .collect()
    };

    let mut warnings = Vec::new();
    let mut per_link = Vec::with_capacity(route.len());
    for link in route {
        for element in &link.elements {
            match element {
                Element::Span(span) => {
                    let loss = db_to_lin(-span.loss_db());
                    for s in states.iter_mut() {
                        let launch = ChannelLaunch {
                            channel_index: s.index,
                            power_w: s.signal,
                        };
                        let nli = nli_power_span(span, &launch, b_ch, b_wdm)?;
                        s.signal *= loss;
                        s.ase *= loss;
                        s.nli = (s.nli + nli) * loss;
                    }
                }
                Element::Amplifier(amp) => {
                    let gain = db_to_lin(amp.gain_db);
                    let attenuating = gain < 1.0;
                    if attenuating && !states.is_empty() {
                        warnings.push(format!(
                            "amplifier {} on link {} has gain {} dB; its ASE is clamped to 0",
                            amp.id, link.id, amp.gain_db
                        ));
                    }
                    for s in states.iter_mut() {
                        let ase = if attenuating { 0.0 } else { ase_power(amp, s.freq_hz, b_ref)? };
                        s.signal *= gain;
                        s.ase = s.ase * gain + ase;
                        s.nli *= gain;
                    }
                }
            }
        }
        per_link.push(LinkQot {
            link_id: link.id.clone(),
            channels: snapshot(&states),
        });
    }

    Ok(GsnrReport {
        modulation,
        required_gsnr_db: required,
        channels: snapshot(&states),
        per_link,
        warnings,
    })
}
