//! Seeded experiments: channel simulation, Monte-Carlo checks of the
//! closed-form error, ε sweeps and the compactness summary table.
//!
//! Randomness is keyed by `(seed, trial, k)`: each trial owns a ChaCha8
//! stream (stream id = trial index) and component `k` always reads the
//! same word offsets inside it, so changing the trial count or `K_max`
//! never reshuffles earlier draws. Normals come from the inverse normal
//! CDF of one 53-bit uniform per draw.

use std::time::{SystemTime, UNIX_EPOCH};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::epsilon::Epsilon;
use crate::error::{Error, Result};
use crate::format;
use crate::metric_info::{
    entropy_lower_bound, entropy_upper_bound, growth_orders, log_grid, max_message_length_log2,
    pow2_grid, GrowthEstimate, LinearFit, Sided,
};
use crate::prob_info::{GaussianChannel, ScaleRule};
use crate::spectral_models::{forward_apply, CoefficientVector, SpectrumModel};
use crate::truncation::k0;

/// Words consumed per component: two normals of one `u64` each.
const WORDS_PER_COMPONENT: u128 = 4;

/// Random source for one trial.
pub struct TrialStream {
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Solution = 0,
    Noise = 1,
}

impl TrialStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        Self { rng }
    }

    fn standard_normal(&mut self, k: usize, slot: Slot) -> f64 {
        let pos = (k as u128 - 1) * WORDS_PER_COMPONENT + 2 * slot as u128;
        self.rng.set_word_pos(pos);
        let bits = self.rng.next_u64() >> 11;
        let u = (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        Normal::standard().inverse_cdf(u)
    }
}

/// `ξ_k ~ N(0, ρ_k²)` for `k = 1..=K_max`.
pub fn synthesize_solution(channel: &GaussianChannel, stream: &mut TrialStream) -> CoefficientVector {
    let entries = (1..=channel.k_max())
        .map(|k| channel.rho_k(k) * stream.standard_normal(k, Slot::Solution))
        .collect();
    CoefficientVector::one_sided(&channel.model, entries)
}

/// `η_k = λ_k ξ_k + ζ_k` with `ζ_k ~ N(0, ε² ν_k²)`.
pub fn simulate_channel(
    channel: &GaussianChannel,
    xi: &CoefficientVector,
    stream: &mut TrialStream,
) -> Result<CoefficientVector> {
    let mut eta = forward_apply(&channel.model, xi)?;
    if channel.epsilon > 0.0 {
        for (i, e) in eta.entries_mut().iter_mut().enumerate() {
            let k = i + 1;
            *e += channel.epsilon * channel.nu_k(k) * stream.standard_normal(k, Slot::Noise);
        }
    }
    Ok(eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// Absent for a single trial.
    pub stderr: Option<f64>,
    pub trials: usize,
}

/// Sample mean of `‖ξ - B_I η‖²` over `trials` independent draws. The
/// squared prior tail beyond `K_max` is added analytically.
pub fn monte_carlo_mse(channel: &GaussianChannel, trials: usize, seed: u64) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(Error::Validation("need at least one trial".into()));
    }
    let tail = channel.rho.square_tail(channel.k_max()).ok_or_else(|| {
        Error::Unsupported("Monte-Carlo MSE needs a trace-class prior".into())
    })?;
    let part = channel.partition()?;
    let mut in_signal = vec![false; channel.k_max() + 1];
    for &k in &part.signal {
        in_signal[k] = true;
    }
    let errors: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut stream = TrialStream::new(seed, t);
            let xi = synthesize_solution(channel, &mut stream);
            let eta = simulate_channel(channel, &xi, &mut stream)?;
            let mut err = 0.0;
            for (i, (&x, &y)) in xi.entries().iter().zip(eta.entries()).enumerate() {
                let k = i + 1;
                let est = if in_signal[k] { y / channel.lambda_k(k) } else { 0.0 };
                err += (x - est).powi(2);
            }
            Ok(err + tail)
        })
        .collect::<Result<_>>()?;
    let n = errors.len() as f64;
    let mean = pairwise_sum(&errors) / n;
    let stderr = (errors.len() > 1).then(|| {
        let dev: Vec<f64> = errors.iter().map(|e| (e - mean).powi(2)).collect();
        (pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
    });
    Ok(MonteCarloEstimate { mean, stderr, trials })
}

/// Fixed-shape pairwise summation: the result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub rho: ScaleRule,
    pub nu: ScaleRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: SpectrumModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    pub epsilon_grid: Vec<Epsilon>,
    #[serde(default)]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "K_max", default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon_grid.is_empty() {
            return Err(Error::Validation("epsilon grid is empty".into()));
        }
        if self.epsilon_grid.windows(2).any(|w| !(w[1].log2() < w[0].log2())) {
            return Err(Error::Validation("epsilon grid must be strictly decreasing".into()));
        }
        if self.trials > 0 && self.channel.is_none() {
            return Err(Error::Validation("Monte-Carlo trials need a channel".into()));
        }
        Ok(())
    }

    pub fn effective_model(&self) -> Result<SpectrumModel> {
        match self.k_max {
            Some(k) => self.model.clone().with_k_max(k),
            None => Ok(self.model.clone()),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub epsilon: Epsilon,
    pub k0: usize,
    pub k_i: Option<usize>,
    pub k_alpha: Option<usize>,
    pub mse_closed: Option<f64>,
    pub mse_mc_mean: Option<f64>,
    pub mse_mc_stderr: Option<f64>,
    pub lower_bits: f64,
    pub upper_bits: Option<f64>,
    #[serde(rename = "logL_max")]
    pub log_l_max: f64,
    pub exact_nats: Option<f64>,
    pub approx_nats: Option<f64>,
}

pub const SWEEP_CSV_HEADER: &str = "epsilon,k0,k_I,k_alpha,mse_closed,mse_mc_mean,mse_mc_stderr,lower_bits,upper_bits,logL_max,exact_nats,approx_nats";

impl SweepRecord {
    fn csv_row(&self) -> String {
        let opt_int = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.epsilon,
            self.k0,
            opt_int(self.k_i),
            opt_int(self.k_alpha),
            format::opt_float(self.mse_closed),
            format::opt_float(self.mse_mc_mean),
            format::opt_float(self.mse_mc_stderr),
            format::float(self.lower_bits),
            format::opt_float(self.upper_bits),
            format::float(self.log_l_max),
            format::opt_float(self.exact_nats),
            format::opt_float(self.approx_nats),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<SweepRecord>,
    /// Failed trend assertions, one message per offending row.
    pub violations: Vec<String>,
    pub metadata: RunMetadata,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn metadata_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            #[serde(flatten)]
            metadata: &'a RunMetadata,
            rows: usize,
            violations: &'a [String],
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            metadata: &self.metadata,
            rows: self.records.len(),
            violations: &self.violations,
        })?)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// One record per grid point. Probabilistic columns need a channel and an
/// ε representable as an ordinary float. Along the grid, `mse_closed`
/// must strictly decrease and `k0`, `k_I` must not decrease; failures are
/// collected in `violations` and the run completes.
pub fn convergence_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let started = unix_now();
    let model = config.effective_model()?;
    let base = match &config.channel {
        Some(spec) => {
            let eps0 = config.epsilon_grid[0].as_f64().unwrap_or(0.0);
            Some(GaussianChannel::new(model.clone(), spec.rho.clone(), spec.nu.clone(), eps0)?)
        }
        None => None,
    };

    let mut records = Vec::with_capacity(config.epsilon_grid.len());
    for (row, eps) in config.epsilon_grid.iter().enumerate() {
        let upper_bits = match entropy_upper_bound(&model, eps, Sided::OneSided) {
            Ok(u) => Some(u),
            Err(Error::NotApplicable(_)) => None,
            Err(e) => return Err(e),
        };
        let mut rec = SweepRecord {
            epsilon: *eps,
            k0: k0(&model, eps)?,
            k_i: None,
            k_alpha: None,
            mse_closed: None,
            mse_mc_mean: None,
            mse_mc_stderr: None,
            lower_bits: entropy_lower_bound(&model, eps, Sided::OneSided)?,
            upper_bits,
            log_l_max: max_message_length_log2(&model, eps, Sided::OneSided)?,
            exact_nats: None,
            approx_nats: None,
        };
        if let (Some(base), Some(e)) = (&base, eps.as_f64()) {
            let ch = base.with_epsilon(e)?;
            rec.k_i = Some(ch.partition()?.k_i);
            let info = ch.total_information()?;
            rec.exact_nats = Some(info.exact_nats);
            rec.approx_nats = Some(info.approx_nats);
            if ch.is_trace_class() {
                rec.k_alpha = Some(ch.k_alpha()?);
                rec.mse_closed = Some(ch.mse_closed_form()?);
                if config.trials > 0 {
                    // Distinct seed per grid row keeps rows independent.
                    let mc = monte_carlo_mse(&ch, config.trials, config.seed.wrapping_add(row as u64))?;
                    rec.mse_mc_mean = Some(mc.mean);
                    rec.mse_mc_stderr = mc.stderr;
                }
            }
        }
        records.push(rec);
    }

    let mut violations = Vec::new();
    for (i, w) in records.windows(2).enumerate() {
        let row = i + 1;
        if w[1].k0 < w[0].k0 {
            violations.push(format!("row {row}: k0 decreased from {} to {}", w[0].k0, w[1].k0));
        }
        if let (Some(a), Some(b)) = (w[0].k_i, w[1].k_i) {
            if b < a {
                violations.push(format!("row {row}: k_I decreased from {a} to {b}"));
            }
        }
        if let (Some(a), Some(b)) = (w[0].mse_closed, w[1].mse_closed) {
            if !(b < a) {
                violations.push(format!("row {row}: mse_closed did not decrease ({a:e} -> {b:e})"));
            }
        }
    }

    Ok(ExperimentResult {
        records,
        violations,
        metadata: RunMetadata {
            seed: config.seed,
            config_hash: config.hash()?,
            started_unix: started,
            finished_unix: unix_now(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Decay law of the eigenvalues.
    pub behavior: String,
    pub model: SpectrumModel,
    /// Shape of the fitted `log2 L_max(ε)` law, with `p` the fitted exponent.
    pub log_l_max_form: String,
    pub log_l_max_exponent: f64,
    pub d_c: Option<f64>,
    pub d_c_exp: Option<f64>,
    pub growth: GrowthEstimate,
}

pub const SUMMARY_CSV_HEADER: &str = "behavior,log_lmax_form,log_lmax_exponent,d_c,d_c_exp";

impl SummaryRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.behavior,
            self.log_l_max_form,
            format::float(self.log_l_max_exponent),
            format::opt_float(self.d_c),
            format::opt_float(self.d_c_exp),
        )
    }
}

/// Exponent grid used for the exponentially decaying spectra.
pub fn deep_grid() -> Vec<Epsilon> {
    pow2_grid(-16.0, -1024.0, 64)
}

/// Decimal grid used for the algebraically decaying spectrum.
pub fn algebraic_grid() -> Vec<Epsilon> {
    log_grid(1e-2, 1e-10, 33)
}

/// The three reference operators with fitted metric-information laws and
/// degrees of compactness.
pub fn reproduce_summary_table() -> Result<Vec<SummaryRow>> {
    let poisson = SpectrumModel::poisson(0.5, 1.0)?;
    let heat = SpectrumModel::heat(1.0, 2.0, 1.0)?;
    let green = SpectrumModel::green();
    let deep = deep_grid();
    let alg = algebraic_grid();
    Ok(vec![
        summary_row("e^{-c1 k}", poisson, &deep, LogLaw::PowerOfLog)?,
        summary_row("e^{-c2 k^2}", heat, &deep, LogLaw::PowerOfLog)?,
        summary_row("c3/k^2", green, &alg, LogLaw::AlgebraicTimesLog)?,
    ])
}

enum LogLaw {
    /// `log L ∝ [log(1/ε)]^p`.
    PowerOfLog,
    /// `log L ∝ ε^{-p} log(1/ε)`.
    AlgebraicTimesLog,
}

fn summary_row(behavior: &str, model: SpectrumModel, grid: &[Epsilon], law: LogLaw) -> Result<SummaryRow> {
    let growth = growth_orders(&model, grid)?;
    let mut x = Vec::with_capacity(grid.len());
    let mut y = Vec::with_capacity(grid.len());
    for eps in grid {
        let bits = max_message_length_log2(&model, eps, Sided::Total)?;
        let inv = -eps.ln();
        match law {
            LogLaw::PowerOfLog => {
                x.push(inv.ln());
                y.push(bits.ln());
            }
            LogLaw::AlgebraicTimesLog => {
                x.push(inv);
                y.push((bits / eps.bits()).ln());
            }
        }
    }
    let fit = LinearFit::fit(&x, &y)?;
    let form = match law {
        LogLaw::PowerOfLog => "[log(1/eps)]^p",
        LogLaw::AlgebraicTimesLog => "eps^-p log(1/eps)",
    };
    Ok(SummaryRow {
        behavior: behavior.to_string(),
        model,
        log_l_max_form: form.to_string(),
        log_l_max_exponent: fit.slope,
        d_c: growth.d_c,
        d_c_exp: growth.d_c_exp,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> GaussianChannel {
        let model = SpectrumModel::poisson(0.5, 1.0).unwrap().with_k_max(64).unwrap();
        GaussianChannel::new(
            model,
            ScaleRule::Geometric { scale: 1.0, ratio: 0.5 },
            ScaleRule::Constant { value: 1.0 },
            0.0625,
        )
        .unwrap()
    }

    #[test]
    fn same_seed_same_draws() {
        let ch = worked();
        let a = synthesize_solution(&ch, &mut TrialStream::new(7, 3));
        let b = synthesize_solution(&ch, &mut TrialStream::new(7, 3));
        assert_eq!(a, b);
        let c = synthesize_solution(&ch, &mut TrialStream::new(7, 4));
        assert_ne!(a, c);
    }

    #[test]
    fn draws_keyed_by_component() {
        let ch = worked();
        let short = GaussianChannel::new(
            ch.model.clone().with_k_max(8).unwrap(),
            ch.rho.clone(),
            ch.nu.clone(),
            ch.epsilon,
        )
        .unwrap();
        let long = synthesize_solution(&ch, &mut TrialStream::new(1, 0));
        let head = synthesize_solution(&short, &mut TrialStream::new(1, 0));
        assert_eq!(&long.entries()[..8], head.entries());
    }

    #[test]
    fn zero_noise_channel_is_forward_map() {
        let ch = worked().with_epsilon(0.0).unwrap();
        let mut s = TrialStream::new(11, 0);
        let xi = synthesize_solution(&ch, &mut s);
        let eta = simulate_channel(&ch, &xi, &mut s).unwrap();
        assert_eq!(eta, forward_apply(&ch.model, &xi).unwrap());
    }

    #[test]
    fn single_trial_has_no_stderr() {
        let mc = monte_carlo_mse(&worked(), 1, 5).unwrap();
        assert!(mc.stderr.is_none());
        assert!(mc.mean.is_finite());
        assert!(monte_carlo_mse(&worked(), 0, 5).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn config_json_round_trip_and_hash() {
        let cfg = ExperimentConfig {
            model: SpectrumModel::green(),
            channel: Some(ChannelSpec {
                rho: ScaleRule::Geometric { scale: 1.0, ratio: 0.1 },
                nu: ScaleRule::Constant { value: 0.1 },
            }),
            epsilon_grid: vec![Epsilon::Value(0.5), Epsilon::Pow2(-3.0)],
            trials: 100,
            seed: 9,
            k_max: Some(32),
            output_path: None,
        };
        let text = cfg.to_json().unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        assert_eq!(cfg.hash().unwrap().len(), 64);
    }

    #[test]
    fn empty_grid_rejected() {
        let cfg = ExperimentConfig {
            model: SpectrumModel::green(),
            channel: None,
            epsilon_grid: vec![],
            trials: 0,
            seed: 0,
            k_max: None,
            output_path: None,
        };
        assert!(matches!(convergence_sweep(&cfg), Err(Error::Validation(_))));
    }
}
