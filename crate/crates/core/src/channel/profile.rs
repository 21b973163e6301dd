use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Tapped-delay-line power-delay profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    name: String,
    tap_delays_ns: Vec<f64>,
    tap_powers_db: Vec<f64>,
}

impl ChannelProfile {
    pub fn new(
        name: impl Into<String>,
        tap_delays_ns: Vec<f64>,
        tap_powers_db: Vec<f64>,
    ) -> Result<Self> {
        if tap_delays_ns.is_empty() {
            return Err(Error::InvalidProfile("profile has no taps".into()));
        }
        if tap_delays_ns.len() != tap_powers_db.len() {
            return Err(Error::InvalidProfile(format!(
                "{} delays but {} powers",
                tap_delays_ns.len(),
                tap_powers_db.len()
            )));
        }
        if tap_delays_ns[0] != 0.0 {
            return Err(Error::InvalidProfile("first delay must be 0 ns".into()));
        }
        if tap_delays_ns.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidProfile(
                "delays must be strictly increasing".into(),
            ));
        }
        if tap_delays_ns.iter().chain(&tap_powers_db).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite delay or power".into()));
        }
        Ok(Self {
            name: name.into(),
            tap_delays_ns,
            tap_powers_db,
        })
    }

    /// 3GPP Extended Typical Urban.
    pub fn etu() -> Self {
        Self::new(
            "ETU",
            vec![0.0, 50.0, 120.0, 200.0, 230.0, 500.0, 1600.0, 2300.0, 5000.0],
            vec![-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0],
        )
        .expect("static profile")
    }

    /// 3GPP Extended Pedestrian A.
    pub fn epa() -> Self {
        Self::new(
            "EPA",
            vec![0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0],
            vec![0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8],
        )
        .expect("static profile")
    }

    /// Single tap at delay 0 with 0 dB power (flat Rayleigh fading).
    pub fn flat() -> Self {
        Self::new("FLAT", vec![0.0], vec![0.0]).expect("static profile")
    }

    /// Looks up a built-in profile by case-insensitive name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "etu" => Some(Self::etu()),
            "epa" => Some(Self::epa()),
            "flat" => Some(Self::flat()),
            _ => None,
        }
    }

    /// Parses the key-value profile format:
    ///
    /// ```text
    /// # comment
    /// name = custom
    /// delays_ns = 0, 30, 70
    /// powers_db = 0, -1, -2
    /// ```
    ///
    /// List items may be separated by commas or whitespace.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::from("custom");
        let mut delays = None;
        let mut powers = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidProfile(format!("line {}: expected key = value", lineno + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "name" => name = value.to_string(),
                "delays_ns" => delays = Some(parse_list(value, lineno)?),
                "powers_db" => powers = Some(parse_list(value, lineno)?),
                other => {
                    return Err(Error::InvalidProfile(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        let delays = delays.ok_or_else(|| Error::InvalidProfile("missing delays_ns".into()))?;
        let powers = powers.ok_or_else(|| Error::InvalidProfile("missing powers_db".into()))?;
        Self::new(name, delays, powers)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tap_delays_ns(&self) -> &[f64] {
        &self.tap_delays_ns
    }

    pub fn tap_powers_db(&self) -> &[f64] {
        &self.tap_powers_db
    }

    /// Sample index of each profile tap on a grid of period `sample_period_ns`.
    pub fn tap_indices(&self, sample_period_ns: f64) -> Vec<usize> {
        self.tap_delays_ns
            .iter()
            .map(|d| (d / sample_period_ns).round() as usize)
            .collect()
    }

    /// Channel length `L` in samples for the given sampling period.
    pub fn channel_length(&self, sample_period_ns: f64) -> usize {
        self.tap_indices(sample_period_ns).last().copied().unwrap_or(0) + 1
    }
}

fn parse_list(value: &str, lineno: usize) -> Result<Vec<f64>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| {
                Error::InvalidProfile(format!("line {}: cannot parse `{s}`", lineno + 1))
            })
        })
        .collect()
}

/// Discrete-time channel impulse response `h_0..h_{L-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImpulseResponse {
    taps: Vec<Complex64>,
    sample_period_ns: f64,
}

impl ChannelImpulseResponse {
    pub fn new(taps: Vec<Complex64>, sample_period_ns: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidProfile("impulse response has no taps".into()));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::InvalidProfile("non-finite tap".into()));
        }
        Ok(Self {
            taps,
            sample_period_ns,
        })
    }

    /// Impulse response with unspecified sampling period, for constructed channels.
    pub fn from_taps(taps: Vec<Complex64>) -> Result<Self> {
        Self::new(taps, 1.0)
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn sample_period_ns(&self) -> f64 {
        self.sample_period_ns
    }

    /// First `len` taps, as an impulse response on the same grid.
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            taps: self.taps[..len.min(self.taps.len())].to_vec(),
            sample_period_ns: self.sample_period_ns,
        }
    }
}

/// Draws one realization of `profile` on a grid of period `sample_period_ns`.
///
/// Each profile tap is an independent circularly-symmetric complex Gaussian
/// whose variance is its linear power divided by the total profile power, so
/// the expected channel energy is 1. Taps that round to the same sample are
/// summed.
pub fn sample_cir<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    sample_period_ns: f64,
    rng: &mut R,
) -> Result<ChannelImpulseResponse> {
    if sample_period_ns.is_nan() || sample_period_ns <= 0.0 || !sample_period_ns.is_finite() {
        return Err(Error::InvalidProfile(format!(
            "sample period must be positive, got {sample_period_ns}"
        )));
    }
    let indices = profile.tap_indices(sample_period_ns);
    let linear: Vec<f64> = profile
        .tap_powers_db
        .iter()
        .map(|db| 10f64.powf(db / 10.0))
        .collect();
    let total: f64 = linear.iter().sum();

    let mut taps = vec![Complex64::new(0.0, 0.0); profile.channel_length(sample_period_ns)];
    for (&idx, &p) in indices.iter().zip(&linear) {
        let sigma = (p / total / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        taps[idx] += Complex64::new(sigma * re, sigma * im);
    }
    ChannelImpulseResponse::new(taps, sample_period_ns)
}
