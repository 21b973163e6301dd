//! Mutual information of slices.
//!
//! MI is reported in bits per OFDM symbol (summed over bins) under uniform
//! power allocation. Three routes are available: the dense log-determinant,
//! the bin formula on a circulant's frequency response, and split reports that
//! walk the chain of polarized children.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::channel::{circular_complement, lower_toeplitz, ChannelImpulseResponse, CirculantChannel};
use crate::error::{Error, Result};
use crate::plan::{decode_cost, Polarity, PolarityPath};
use crate::spectral::{logdet2_psd, unnormalized_freq_response, ComplexMatrix};
use crate::transform::{RecursiveTransform, DENSE_LIMIT};

/// Linear signal-to-noise ratio `P / sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(f64);

impl Snr {
    pub fn new(linear: f64) -> Result<Self> {
        if linear.is_nan() || linear < 0.0 {
            return Err(Error::InvalidSnr(linear));
        }
        Ok(Self(linear))
    }

    pub fn from_db(db: f64) -> Result<Self> {
        if db.is_nan() {
            return Err(Error::InvalidSnr(db));
        }
        Self::new(10f64.powf(db / 10.0))
    }

    /// Infinite SNR: no noise is added on propagation.
    pub fn noiseless() -> Self {
        Self(f64::INFINITY)
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }

    pub fn is_noiseless(self) -> bool {
        self.0.is_infinite()
    }
}

/// `log2 det(I + rho H H^H)` for a dense square channel.
pub fn mi_logdet(channel: &ComplexMatrix, snr: Snr) -> Result<f64> {
    if !channel.is_square() {
        return Err(Error::NotSquare {
            rows: channel.rows(),
            cols: channel.cols(),
        });
    }
    if channel.rows() > DENSE_LIMIT {
        return Err(Error::Oversize {
            size: channel.rows(),
            limit: DENSE_LIMIT,
        });
    }
    let gram = channel.matmul(&channel.adjoint());
    let n = channel.rows();
    let a = ComplexMatrix::identity(n).add(&gram.scale(Complex64::new(snr.linear(), 0.0)));
    logdet2_psd(&a)
}

/// `sum_b log2(1 + rho |G_b|^2)` over the `m` unnormalized bins of a circulant generator.
pub fn mi_fast(generator: &[Complex64], m: usize, snr: Snr) -> Result<f64> {
    if generator.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: generator.len(),
        });
    }
    let response = unnormalized_freq_response(generator, m)?;
    Ok(mi_from_response(&response, snr))
}

/// Bin-formula MI from an already computed frequency response.
pub fn mi_from_response(response: &[Complex64], snr: Snr) -> f64 {
    let rho = snr.linear();
    response
        .iter()
        .map(|g| (rho * g.norm_sqr()).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

pub fn mi_circulant(channel: &CirculantChannel, snr: Snr) -> f64 {
    mi_from_response(&channel.freq_response(), snr)
}

/// How the children of a slice channel are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMode {
    /// Exact fold/modulate laws; MI is conserved at every level.
    ExactFold,
    /// Triangular blocks built from the taps as printed, dropping taps that
    /// do not fit the half-size blocks.
    LiteralPaper,
}

impl SplitMode {
    pub fn name(self) -> &'static str {
        match self {
            SplitMode::ExactFold => "exact-fold",
            SplitMode::LiteralPaper => "literal-paper",
        }
    }

    fn children(self, parent: &CirculantChannel) -> Result<(CirculantChannel, CirculantChannel)> {
        match self {
            SplitMode::ExactFold => Ok((parent.positive_child()?, parent.negative_child()?)),
            SplitMode::LiteralPaper => Ok((
                parent.literal_positive_child()?,
                parent.literal_negative_child()?,
            )),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-fold" | "exact" | "fold" => Ok(SplitMode::ExactFold),
            "literal-paper" | "literal" => Ok(SplitMode::LiteralPaper),
            other => Err(Error::Config(format!("unknown split mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceMi {
    pub path: PolarityPath,
    pub size: usize,
    pub mi_bits: f64,
}

/// One polarization step of the chain: a parent and its two children.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSplit {
    /// 1 for the first split of the frame.
    pub level: usize,
    pub parent: SliceMi,
    pub positive: SliceMi,
    pub negative: SliceMi,
    /// `parent - (positive + negative)` in bits.
    pub residual_bits: f64,
}

impl LevelSplit {
    pub fn relative_residual(&self) -> f64 {
        if self.parent.mi_bits == 0.0 {
            self.residual_bits.abs()
        } else {
            (self.residual_bits / self.parent.mi_bits).abs()
        }
    }

    /// `|MI+ - MI-| / (MI+ + MI-)`.
    pub fn imbalance(&self) -> f64 {
        let sum = self.positive.mi_bits + self.negative.mi_bits;
        if sum == 0.0 {
            0.0
        } else {
            (self.positive.mi_bits - self.negative.mi_bits).abs() / sum
        }
    }
}

/// Per-level MI of a chain split.
#[derive(Debug, Clone, PartialEq)]
pub struct MiSplitReport {
    pub mode: SplitMode,
    pub root_size: usize,
    pub total_mi_bits: f64,
    pub levels: Vec<LevelSplit>,
    /// Relative off-diagonal coupling of the first split, when it applies
    /// (`L <= N/4` and `N <= DIAGNOSTIC_LIMIT`).
    pub uniformity: Option<f64>,
    /// Channel length, when the report was built from an impulse response.
    pub channel_length: Option<usize>,
}

impl MiSplitReport {
    /// Leaf slices in frame order (deepest positive first, then negatives
    /// from the deepest level outward).
    pub fn leaves(&self) -> Vec<SliceMi> {
        let Some(last) = self.levels.last() else {
            return vec![SliceMi {
                path: PolarityPath::root(),
                size: self.root_size,
                mi_bits: self.total_mi_bits,
            }];
        };
        let mut out = vec![last.positive.clone()];
        out.extend(self.levels.iter().rev().map(|l| l.negative.clone()));
        out
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.levels
            .iter()
            .map(LevelSplit::relative_residual)
            .fold(0.0, f64::max)
    }

    /// True at levels whose children are shorter than the channel.
    pub fn level_is_non_uniform(&self, level: &LevelSplit) -> bool {
        self.channel_length.is_some_and(|l| l > level.positive.size)
    }

    /// Rows `level,path,size,mode,mi_bits,parent_residual`, both children per level.
    pub fn write_csv_rows(&self, out: &mut String) {
        for l in &self.levels {
            for child in [&l.positive, &l.negative] {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    l.level, child.path, child.size, self.mode, child.mi_bits, l.residual_bits
                );
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(MI_CSV_HEADER);
        self.write_csv_rows(&mut out);
        out
    }
}

/// Largest frame for which split reports attach the uniformity diagnostic;
/// it needs an SVD of an `N/4` matrix per report.
pub const DIAGNOSTIC_LIMIT: usize = 256;

pub const MI_CSV_HEADER: &str = "level,path,size,mode,mi_bits,parent_residual\n";

/// Splits `root` along the positive chain `depth` times.
pub fn split_chain(
    root: &CirculantChannel,
    root_path: &PolarityPath,
    depth: usize,
    snr: Snr,
    mode: SplitMode,
) -> Result<MiSplitReport> {
    if depth > root.size().trailing_zeros() as usize {
        return Err(Error::InvalidPlan(format!(
            "cannot split a size-{} channel {depth} times",
            root.size()
        )));
    }
    let total = mi_circulant(root, snr);
    let mut parent = root.clone();
    let mut parent_mi = SliceMi {
        path: root_path.clone(),
        size: root.size(),
        mi_bits: total,
    };
    let mut levels = Vec::with_capacity(depth);
    for level in 1..=depth {
        let (pos, neg) = mode.children(&parent)?;
        let positive = SliceMi {
            path: parent_mi.path.child(Polarity::Positive),
            size: pos.size(),
            mi_bits: mi_circulant(&pos, snr),
        };
        let negative = SliceMi {
            path: parent_mi.path.child(Polarity::Negative),
            size: neg.size(),
            mi_bits: mi_circulant(&neg, snr),
        };
        let residual_bits = parent_mi.mi_bits - positive.mi_bits - negative.mi_bits;
        levels.push(LevelSplit {
            level,
            parent: parent_mi,
            positive: positive.clone(),
            negative,
            residual_bits,
        });
        parent = pos;
        parent_mi = positive;
    }
    Ok(MiSplitReport {
        mode,
        root_size: root.size(),
        total_mi_bits: total,
        levels,
        uniformity: None,
        channel_length: None,
    })
}

/// MI of every slice of the depth-`depth` chain plan for `cir` on an `n`-sample frame.
pub fn mi_split_report(
    cir: &ChannelImpulseResponse,
    n: usize,
    depth: usize,
    snr: Snr,
    mode: SplitMode,
) -> Result<MiSplitReport> {
    RecursiveTransform::new(n, depth)?;
    let root = CirculantChannel::build(cir, n)?;
    let mut report = split_chain(&root, &PolarityPath::root(), depth, snr, mode)?;
    report.channel_length = Some(cir.len());
    if (8..=DIAGNOSTIC_LIMIT).contains(&n) && cir.len() <= n / 4 {
        report.uniformity = Some(uniformity_diagnostic(cir, n)?);
    }
    Ok(report)
}

/// Relative size of the coupling term that makes the positive and negative
/// MI differ: `||D B^H||_2 / ||H H^H + H_C H_C^H||_2` on the quarter-size blocks.
pub fn uniformity_diagnostic(cir: &ChannelImpulseResponse, n: usize) -> Result<f64> {
    let blocks = crate::channel::appendix_a_subblocks(cir, n)?;
    if blocks.offdiag_norm == 0.0 {
        return Ok(0.0);
    }
    let h = lower_toeplitz(cir.taps(), n / 4);
    let hc = circular_complement(cir.taps(), n / 4);
    let diag = h.matmul(&h.adjoint()).add(&hc.matmul(&hc.adjoint()));
    Ok(blocks.offdiag_norm / diag.spectral_norm())
}

/// Decode cost of one column of the deep-split table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostEntry {
    pub size: usize,
    pub negative_ops: u64,
    /// Only reported for the final, unit-size positive leaf.
    pub positive_leaf_ops: Option<u64>,
}

impl fmt::Display for CostEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.positive_leaf_ops {
            Some(p) => write!(f, "{}/{}", self.negative_ops, p),
            None => write!(f, "{}", self.negative_ops),
        }
    }
}

/// Deep continuation of a slice channel down to unit-size slices, in both modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepSplitTable {
    pub exact: MiSplitReport,
    pub literal: MiSplitReport,
    pub cost_row: Vec<CostEntry>,
}

impl DeepSplitTable {
    /// Text table with one column per child size.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let width = 10;
        let _ = write!(out, "{:<24}", "size M");
        for c in &self.cost_row {
            let _ = write!(out, "{:>width$}", c.size);
        }
        out.push('\n');
        for (label, report) in [("exact-fold", &self.exact), ("literal-paper", &self.literal)] {
            for (sign, pick) in [("+", true), ("-", false)] {
                let _ = write!(out, "{:<24}", format!("MI_{sign} {label}"));
                for l in &report.levels {
                    let v = if pick { l.positive.mi_bits } else { l.negative.mi_bits };
                    let _ = write!(out, "{:>width$.3}", v);
                }
                out.push('\n');
            }
            let _ = write!(out, "{:<24}", format!("residual {label}"));
            for l in &report.levels {
                let _ = write!(out, "{:>width$.2e}", l.residual_bits);
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<24}", "decoding complexity");
        for c in &self.cost_row {
            let _ = write!(out, "{:>width$}", c.to_string());
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "parent MI = {:.3} bits (size {})",
            self.exact.total_mi_bits, self.exact.root_size
        );
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(MI_CSV_HEADER);
        self.exact.write_csv_rows(&mut out);
        self.literal.write_csv_rows(&mut out);
        out
    }
}

/// Descends `start_depth` positive steps from the frame channel (in each
/// mode separately), then splits the reached slice down to unit size and
/// tabulates MI and decode cost.
pub fn table1_continuation(
    root: &CirculantChannel,
    start_depth: usize,
    snr: Snr,
) -> Result<DeepSplitTable> {
    if start_depth >= root.size().trailing_zeros() as usize {
        return Err(Error::InvalidPlan(format!(
            "no slice of size >= 2 at depth {start_depth} of a size-{} frame",
            root.size()
        )));
    }
    let size = root.size() >> start_depth;
    let path = PolarityPath::new(vec![Polarity::Positive; start_depth]);
    let continue_in = |mode: SplitMode| -> Result<MiSplitReport> {
        let mut slice = root.clone();
        for _ in 0..start_depth {
            slice = mode.children(&slice)?.0;
        }
        split_chain(&slice, &path, size.trailing_zeros() as usize, snr, mode)
    };
    let exact = continue_in(SplitMode::ExactFold)?;
    let literal = continue_in(SplitMode::LiteralPaper)?;
    let cost_row = exact
        .levels
        .iter()
        .map(|l| CostEntry {
            size: l.negative.size,
            negative_ops: decode_cost(Polarity::Negative, l.negative.size),
            positive_leaf_ops: (l.positive.size == 1).then(|| decode_cost(Polarity::Positive, 1)),
        })
        .collect();
    Ok(DeepSplitTable {
        exact,
        literal,
        cost_row,
    })
}
