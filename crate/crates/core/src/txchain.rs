//! Bit-to-symbol mapping and differential encoding, one user at a time.

use crate::constellation::IndividualConstellation;
use crate::{Complex, Error, Result, Scalar};

/// Data symbol indices of one user for one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolFrame {
    pub user_id: usize,
    pub indices: Vec<usize>,
}

impl SymbolFrame {
    pub fn new<T: Scalar>(c: &IndividualConstellation<T>, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("a frame needs at least one symbol"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= c.order()) {
            return Err(Error::invalid(format!("symbol index {bad} >= order {}", c.order())));
        }
        Ok(SymbolFrame {
            user_id: c.user_id(),
            indices,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Differentially encoded samples; `samples[0]` is the `1 + 0i` reference.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffFrame<T> {
    pub samples: Vec<Complex<T>>,
}

impl<T: Scalar> DiffFrame<T> {
    /// Number of data symbols carried (one less than the sample count).
    pub fn data_len(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }
}

/// Maps groups of `log2 M` bits (MSB first) to symbol indices through the
/// constellation's bit map.
pub fn map_bits<T: Scalar>(bits: &[u8], c: &IndividualConstellation<T>) -> Result<SymbolFrame> {
    let width = c.bits_per_symbol() as usize;
    if bits.is_empty() || !bits.len().is_multiple_of(width) {
        return Err(Error::invalid(format!(
            "{} bits do not form whole {width}-bit symbols",
            bits.len()
        )));
    }
    let indices = bits
        .chunks(width)
        .map(|group| {
            let label = group.iter().try_fold(0u32, |acc, &b| match b {
                0 | 1 => Ok((acc << 1) | b as u32),
                _ => Err(Error::invalid(format!("bit value {b}"))),
            })?;
            Ok(c.index_of_label(label).expect("every label of the width is mapped"))
        })
        .collect::<Result<Vec<_>>>()?;
    SymbolFrame::new(c, indices)
}

/// Inverse of [`map_bits`].
pub fn unmap_bits<T: Scalar>(indices: &[usize], c: &IndividualConstellation<T>) -> Vec<u8> {
    let width = c.bits_per_symbol();
    let mut bits = Vec::with_capacity(indices.len() * width as usize);
    for &m in indices {
        let label = c.label(m);
        bits.extend((0..width).rev().map(|b| ((label >> b) & 1) as u8));
    }
    bits
}

/// `s[0] = 1`, `s[t] = s[t-1] * exp(i * phase(x[t-1]))`.
pub fn diff_encode<T: Scalar>(frame: &SymbolFrame, c: &IndividualConstellation<T>) -> DiffFrame<T> {
    let mut samples = Vec::with_capacity(frame.len() + 1);
    let mut s = Complex::new(T::one(), T::zero());
    samples.push(s);
    for &m in &frame.indices {
        s = s * c.symbol(m);
        samples.push(s);
    }
    DiffFrame { samples }
}

/// Single-user differential detection: nearest phase to `conj(s[t-1]) * s[t]`.
pub fn diff_decode<T: Scalar>(frame: &DiffFrame<T>, c: &IndividualConstellation<T>) -> Result<SymbolFrame> {
    let indices = frame
        .samples
        .windows(2)
        .map(|w| {
            let z = w[0].conj() * w[1];
            (0..c.order())
                .map(|m| (m, (z - c.symbol(m)).norm_sqr()))
                .fold((0, T::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best })
                .0
        })
        .collect();
    SymbolFrame::new(c, indices)
}
