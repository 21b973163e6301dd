//! Slice trees for the chain split: every level re-splits the positive child,
//! so a depth-`K` plan carries `K + 1` slices.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::transform::RecursiveTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn symbol(self) -> char {
        match self {
            Polarity::Positive => '+',
            Polarity::Negative => '-',
        }
    }
}

/// Root-to-leaf sequence of polarities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PolarityPath(Vec<Polarity>);

impl PolarityPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn new(steps: Vec<Polarity>) -> Self {
        Self(steps)
    }

    /// `+` repeated `level - 1` times followed by `last`.
    pub fn chain(level: usize, last: Polarity) -> Self {
        let mut steps = vec![Polarity::Positive; level.saturating_sub(1)];
        if level > 0 {
            steps.push(last);
        }
        Self(steps)
    }

    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '+' => Ok(Polarity::Positive),
                '-' | '\u{2212}' => Ok(Polarity::Negative),
                other => Err(Error::InvalidPlan(format!("bad polarity symbol `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[Polarity] {
        &self.0
    }

    pub fn last(&self) -> Option<Polarity> {
        self.0.last().copied()
    }

    pub fn child(&self, p: Polarity) -> Self {
        let mut steps = self.0.clone();
        steps.push(p);
        Self(steps)
    }

    /// Residue of the slice's frequency bins: bit `i` is set when step `i` is negative.
    pub fn bin_residue(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == Polarity::Negative)
            .map(|(i, _)| 1 << i)
            .sum()
    }

    pub fn bin_stride(&self) -> usize {
        1 << self.0.len()
    }
}

impl fmt::Display for PolarityPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            f.write_char(p.symbol())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceDescriptor {
    pub path: PolarityPath,
    pub size: usize,
    /// Offset of the slice's symbols within the frame.
    pub frame_offset: usize,
    pub bin_residue: usize,
    pub bin_stride: usize,
    pub decode_ops: u64,
}

impl SliceDescriptor {
    fn new(path: PolarityPath, size: usize, frame_offset: usize) -> Self {
        let decode_ops = decode_cost(path.last().unwrap_or(Polarity::Positive), size);
        Self {
            bin_residue: path.bin_residue(),
            bin_stride: path.bin_stride(),
            path,
            size,
            frame_offset,
            decode_ops,
        }
    }

    /// Frequency bins of the full frame that this slice occupies, ascending.
    pub fn bins(&self) -> Vec<usize> {
        (0..self.size)
            .map(|k| self.bin_residue + k * self.bin_stride)
            .collect()
    }

    pub fn frame_range(&self) -> std::ops::Range<usize> {
        self.frame_offset..self.frame_offset + self.size
    }
}

/// Bins `{l : l = residue (mod 2^depth)}` of an `n`-bin frame for `d`.
pub fn bins_for_slice(d: &SliceDescriptor, n: usize) -> Result<Vec<usize>> {
    if d.size * d.bin_stride != n {
        return Err(Error::InvalidPlan(format!(
            "slice {} of size {} does not belong to a frame of {n}",
            d.path, d.size
        )));
    }
    Ok(d.bins())
}

/// Decode cost in FFT-operation units.
///
/// A positive slice of size `M` is an FFT (`M log2 M`); a negative slice adds
/// `2M` real operations for the mixer. A positive slice of size 1 costs 1.
pub fn decode_cost(polarity: Polarity, size: usize) -> u64 {
    let m = size as u64;
    let fft = m * size.trailing_zeros() as u64;
    match polarity {
        Polarity::Positive if size == 1 => 1,
        Polarity::Positive => fft,
        Polarity::Negative => 2 * m + fft,
    }
}

/// Chain slice plan for one OFDM symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlicePlan {
    frame_size: usize,
    depth: usize,
    cp_length: usize,
    channel_length_hint: Option<usize>,
    slices: Vec<SliceDescriptor>,
}

impl SlicePlan {
    /// Builds the canonical chain plan: negative slices of sizes
    /// `N/2, N/4, ..., N/2^K` and the final positive slice of size `N/2^K`,
    /// laid out smallest first.
    pub fn build(
        frame_size: usize,
        depth: usize,
        cp_length: usize,
        channel_length_hint: Option<usize>,
    ) -> Result<Self> {
        RecursiveTransform::new(frame_size, depth)?;
        if let Some(l) = channel_length_hint {
            if cp_length < l {
                return Err(Error::CyclicPrefixTooShort {
                    cp: cp_length,
                    taps: l,
                });
            }
        }

        let leaf = frame_size >> depth;
        let mut slices = Vec::with_capacity(depth + 1);
        slices.push(SliceDescriptor::new(
            PolarityPath::new(vec![Polarity::Positive; depth]),
            leaf,
            0,
        ));
        let mut offset = leaf;
        for level in (1..=depth).rev() {
            let size = frame_size >> level;
            slices.push(SliceDescriptor::new(
                PolarityPath::chain(level, Polarity::Negative),
                size,
                offset,
            ));
            offset += size;
        }
        Ok(Self {
            frame_size,
            depth,
            cp_length,
            channel_length_hint,
            slices,
        })
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn cp_length(&self) -> usize {
        self.cp_length
    }

    pub fn channel_length_hint(&self) -> Option<usize> {
        self.channel_length_hint
    }

    pub fn slices(&self) -> &[SliceDescriptor] {
        &self.slices
    }

    pub fn transform(&self) -> RecursiveTransform {
        RecursiveTransform::new(self.frame_size, self.depth).expect("validated at build")
    }

    /// Smallest slice size, `N / 2^K`.
    pub fn leaf_size(&self) -> usize {
        self.frame_size >> self.depth
    }

    /// True when the channel is longer than the smallest slice, so the split
    /// no longer shares the MI evenly.
    pub fn is_non_uniform(&self) -> bool {
        self.channel_length_hint
            .is_some_and(|l| l > self.leaf_size())
    }

    /// Sum of the slices' decode costs.
    pub fn total_cost(&self) -> u64 {
        self.slices.iter().map(|s| s.decode_ops).sum()
    }

    /// CSV with header `path,size,frame_offset,bin_residue,bin_stride,decode_ops`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,size,frame_offset,bin_residue,bin_stride,decode_ops\n");
        for s in &self.slices {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.path, s.size, s.frame_offset, s.bin_residue, s.bin_stride, s.decode_ops
            );
        }
        out
    }
}

/// Free-function form of [`SlicePlan::build`].
pub fn build_plan(
    frame_size: usize,
    depth: usize,
    cp_length: usize,
    channel_length_hint: Option<usize>,
) -> Result<SlicePlan> {
    SlicePlan::build(frame_size, depth, cp_length, channel_length_hint)
}

/// Free-function form of [`SlicePlan::total_cost`].
pub fn total_cost(plan: &SlicePlan) -> u64 {
    plan.total_cost()
}
